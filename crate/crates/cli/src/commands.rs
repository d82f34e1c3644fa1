use std::path::{Path, PathBuf};

use log::{info, warn};

use rasch_gauss::gaussianize::{chain_b_to_c, chain_c_to_d, ChainObservation, Regime, SmoothingConfig};
use rasch_gauss::inference::{build_ellipsoid, coverage_sim, CoverageConfig, CoverageMode};
use rasch_gauss::model::{simulate_scores, sufficient_stats, AbilityDistribution, DifficultyParams};
use rasch_gauss::par::Execution;
use rasch_gauss::rng::child_stream;
use rasch_gauss::tvlab::{check_lemma, DistanceReport, LemmaId, Relation, SuiteConfig, TvBudget, Verdict};
use rasch_gauss::Error;

use crate::error::{CliError, CliResult};
use crate::io::{emit_json, read_scores, write_scores};
use crate::report::*;
use crate::{CoverArgs, EstimateArgs, ModelArgs, SimulateArgs, StatsArgs, VerifyArgs};

fn advise_rate(m: usize, n: u64, beta: Option<f64>) {
    if let Some(beta) = beta {
        if (m as f64).powf(beta) > n as f64 {
            warn!("m^beta = {:.3e} exceeds n = {n} for beta = {beta}; the rate condition does not hold", (m as f64).powf(beta));
        }
    }
}

fn model_from_args(a: &ModelArgs) -> CliResult<(DifficultyParams, AbilityDistribution)> {
    if a.m < 2 {
        return Err(CliError::Usage(format!("m must be at least 2, got {}", a.m)));
    }
    if a.n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let ability: AbilityDistribution = a.ability.parse()?;
    let params = match &a.theta {
        Some(theta) if theta.len() != a.m => {
            return Err(CliError::Usage(format!("--theta has {} entries but m = {}", theta.len(), a.m)))
        }
        Some(theta) => DifficultyParams::new(theta.clone(), a.radius)?,
        None => DifficultyParams::random(a.m, a.radius, &mut child_stream(a.seed, "theta", 0))?,
    };
    advise_rate(a.m, a.n as u64, a.beta);
    Ok((params, ability))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".json");
    s.into()
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let (params, ability) = model_from_args(&a.model)?;
    let x = simulate_scores(&params, &ability, a.model.n, &mut child_stream(a.model.seed, "simulate", 0))?;
    write_scores(&a.out, &x, a.header)?;
    let meta = SimulateMeta {
        format_version: FORMAT_VERSION,
        command: "simulate",
        seed: a.model.seed,
        n: a.model.n,
        m: a.model.m,
        radius: a.model.radius,
        theta: params.theta().to_vec(),
        ability: ability.to_string(),
        csv: a.out.display().to_string(),
        header: a.header,
    };
    let side = sidecar_path(&a.out);
    emit_json(&meta, Some(&side))?;
    info!("wrote {} and {}", a.out.display(), side.display());
    Ok(())
}

pub fn stats(a: &StatsArgs) -> CliResult<()> {
    let x = read_scores(&a.input)?;
    let st = sufficient_stats(&x);
    let doc = StatsDoc {
        format_version: FORMAT_VERSION,
        command: "stats",
        n: st.n(),
        m: st.m(),
        interior: st.interior(),
        invariants: st.check_invariants().into_iter().map(|(name, holds)| Invariant { name, holds }).collect(),
        s: st.s,
        t: st.t,
        t_m: st.t_m,
        counts: st.counts,
    };
    emit_json(&doc, a.out.as_ref())
}

pub fn estimate(a: &EstimateArgs) -> CliResult<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let x = read_scores(&a.input)?;
    let st = sufficient_stats(&x);
    let (n, m) = (st.n(), st.m());
    if m < 2 {
        return Err(CliError::Usage("the score sheet needs at least two items".into()));
    }
    advise_rate(m, n, a.beta);
    let smoothing = match (a.smoothing.alpha_exponent, a.beta) {
        (Some(alpha), Some(beta)) => Some(SmoothingConfig::from_alpha(n, alpha, Regime::Scores, beta)?),
        (Some(_), None) => return Err(CliError::Usage("--alpha-exponent requires --beta".into())),
        _ if a.smoothing.b == 0.0 => None,
        _ => Some(SmoothingConfig::new(a.smoothing.b)?),
    };
    let mut doc = EstimateDoc {
        format_version: FORMAT_VERSION,
        command: "estimate",
        n,
        m,
        degenerate: st.interior() == 0,
        alpha: a.alpha,
        t: st.t.clone(),
        counts: st.counts.clone(),
        t_star: None,
        t_star_star: None,
        clamped: None,
        center: None,
        shape: None,
        iota: None,
        maximal_axis: None,
        smoothing: SmoothingDoc {
            b: smoothing.map_or(0.0, |s| s.b),
            alpha_exponent: smoothing.and_then(|s| s.alpha_exponent),
            beta: a.beta,
            seed: a.seed,
        },
    };
    if !doc.degenerate {
        let b = ChainObservation::from_stats(&st);
        let c = match &smoothing {
            Some(cfg) => chain_b_to_c(&b, cfg, &mut child_stream(a.seed, "estimate-smooth", 0))?,
            None => ChainObservation::C { t_star: st.t.iter().map(|&v| v as f64).collect(), counts: st.counts.clone() },
        };
        if let (Some(_), ChainObservation::C { t_star, .. }) = (&smoothing, &c) {
            doc.t_star = Some(t_star.clone());
        }
        let ChainObservation::D { t_star_star, counts, clamped } = chain_c_to_d(&c, !a.no_clamp)? else {
            unreachable!("chain_c_to_d yields stage D")
        };
        if clamped {
            warn!("smoothed column sums fell outside the mean-map range and were pulled back inside");
        }
        let e = build_ellipsoid(&t_star_star, &counts, a.alpha)?;
        doc.maximal_axis = Some(e.maximal_axis()?);
        doc.center = Some(e.center.as_slice().to_vec());
        doc.shape = Some((0..m).flat_map(|r| (0..m).map(move |c| (r, c))).map(|(r, c)| e.shape[(r, c)]).collect());
        doc.iota = Some(e.iota);
        doc.t_star_star = Some(t_star_star);
        doc.clamped = Some(clamped);
    }
    emit_json(&doc, a.out.as_ref())
}

fn coverage_report(cfg: &CoverageConfig) -> DistanceReport {
    let instance = format!(
        "mode {:?}, m = {}, n = {}, alpha = {}, reps = {}, F = {}",
        cfg.mode,
        cfg.params.m(),
        cfg.n,
        cfg.alpha,
        cfg.reps,
        cfg.ability
    );
    match coverage_sim(cfg) {
        Ok(r) => {
            let se = (r.coverage * (1.0 - r.coverage) / r.replications as f64).sqrt();
            DistanceReport::numeric("coverage", instance, r.coverage, 0.0, 0.88, Relation::AtLeast)
                .with_detail("binomial_se", se)
                .with_detail("degenerate", r.degenerate_count as f64)
                .with_detail("failures", r.failures as f64)
                .with_detail("axis_median", r.axis_median.unwrap_or(f64::NAN))
        }
        Err(e) => DistanceReport::inconclusive("coverage", instance, e.to_string()),
    }
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let cfg = SuiteConfig {
        instances: a.instances,
        seed: a.seed,
        cap: a.cap,
        tv: TvBudget { mc_samples: a.mc_samples, seed: a.seed, ..TvBudget::default() },
        reps: a.reps,
        exec,
    };
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let reports: Vec<DistanceReport> = match a.suite.to_ascii_lowercase().as_str() {
        "all" => LemmaId::ALL.iter().flat_map(|&id| check_lemma(id, &cfg)).collect(),
        "coverage" => vec![coverage_report(&CoverageConfig {
            params: DifficultyParams::random(5, 1.0, &mut child_stream(a.seed, "coverage-theta", 0))?,
            ability: AbilityDistribution::gaussian(0.0, 1.0)?,
            n: 5000,
            alpha: 0.9,
            reps: a.reps,
            mode: CoverageMode::D,
            smoothing: Some(SmoothingConfig::new(1.0)?),
            seed: a.seed,
            exec,
        })],
        _ => {
            let id: LemmaId = a.suite.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
            check_lemma(id, &cfg)
        }
    };
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    let summary = VerdictCounts {
        holds: count(Verdict::Holds),
        holds_as_shape: count(Verdict::HoldsAsShape),
        violated: count(Verdict::Violated),
        inconclusive: count(Verdict::Inconclusive),
    };
    let failed = reports.iter().filter(|r| r.verdict == Verdict::Inconclusive && r.reason.is_some()).count();
    let violated = summary.violated;
    let doc = VerifyDoc {
        format_version: FORMAT_VERSION,
        command: "verify",
        suite: a.suite.clone(),
        seed: a.seed,
        instances: a.instances,
        reps: a.reps,
        summary,
        reports,
    };
    emit_json(&doc, a.out.as_ref())?;
    if violated > 0 {
        Err(CliError::Violated(violated))
    } else if failed > 0 {
        Err(CliError::Inconclusive(failed))
    } else {
        Ok(())
    }
}

pub fn cover(a: &CoverArgs) -> CliResult<()> {
    let (params, ability) = model_from_args(&a.model)?;
    let mode: CoverageMode = a.mode.parse()?;
    if a.b < 0.0 {
        return Err(CliError::Usage(format!("--b must be non-negative, got {}", a.b)));
    }
    let cfg = CoverageConfig {
        params: params.clone(),
        ability: ability.clone(),
        n: a.model.n,
        alpha: a.alpha,
        reps: a.reps,
        mode,
        smoothing: if a.b == 0.0 { None } else { Some(SmoothingConfig::new(a.b)?) },
        seed: a.model.seed,
        exec: if a.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let result = coverage_sim(&cfg)?;
    let doc = CoverDoc {
        format_version: FORMAT_VERSION,
        command: "cover",
        inputs: CoverInputs {
            m: a.model.m,
            n: a.model.n,
            radius: a.model.radius,
            theta: params.theta().to_vec(),
            ability: ability.to_string(),
            alpha: a.alpha,
            reps: a.reps,
            mode,
            b: a.b,
            seed: a.model.seed,
        },
        result,
    };
    emit_json(&doc, a.out.as_ref())
}
