//! Acceptance suite: one PASS/FAIL line per criterion. Reference values come
//! from oracles written here (subset enumeration, brute-force score-matrix
//! enumeration, Simpson quadrature, finite differences) rather than from the
//! library code under test.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngExt;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use rasch_gauss::gaussianize::{cml_invert, phi_forward, sample_multinomial, SmoothingConfig};
use rasch_gauss::inference::{coverage_sim, oracle_conditional_coverage, CoverageConfig, CoverageMode};
use rasch_gauss::model::{
    cell_probs, exact_law_t_given_n, simulate_scores, sufficient_stats, AbilityDistribution, DifficultyParams,
    FixedSumSampler,
};
use rasch_gauss::par::Execution;
use rasch_gauss::rng::{stream_from_seed, Stream};
use rasch_gauss::symfunc::{log_esp, psi_eval, LogWeights, Order};
use rasch_gauss::tvlab::{check_lemma, kappa_lower_bound, LemmaId, Rhs, SuiteConfig};

type Outcome = (bool, String);

// ---------- oracles ----------

fn patterns(m: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u32..(1 << m)).map(move |c| (0..m).map(|l| ((c >> l) & 1) as u8).collect())
}

/// `e_k(w)` by summing products over all subsets.
fn esp_by_subsets(w: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; w.len() + 1];
    for b in patterns(w.len()) {
        let k = b.iter().filter(|&&x| x == 1).count();
        e[k] += w.iter().zip(&b).filter(|(_, &x)| x == 1).map(|(v, _)| v).product::<f64>();
    }
    e
}

/// Weights `e^{-ϑ_l}` with the last item's weight 1.
fn weights(vartheta: &[f64]) -> Vec<f64> {
    vartheta.iter().map(|v| (-v).exp()).chain(std::iter::once(1.0)).collect()
}

/// Law of the first `m-1` answers of a subject with total score `k`.
fn reduced_law(vartheta: &[f64], k: usize) -> HashMap<Vec<u8>, f64> {
    let w = weights(vartheta);
    let m = w.len();
    let mut law: HashMap<Vec<u8>, f64> = HashMap::new();
    let mut total = 0.0;
    for b in patterns(m) {
        if b.iter().filter(|&&x| x == 1).count() != k {
            continue;
        }
        let p: f64 = w.iter().zip(&b).filter(|(_, &x)| x == 1).map(|(v, _)| v).product();
        *law.entry(b[..m - 1].to_vec()).or_default() += p;
        total += p;
    }
    law.values_mut().for_each(|p| *p /= total);
    law
}

fn reduced_cov(vartheta: &[f64], k: usize) -> DMatrix<f64> {
    let d = vartheta.len();
    let law = reduced_law(vartheta, k);
    let mut mean = vec![0.0; d];
    for (b, p) in &law {
        for l in 0..d {
            mean[l] += p * b[l] as f64;
        }
    }
    DMatrix::from_fn(d, d, |r, c| law.iter().map(|(b, p)| p * (b[r] as f64 - mean[r]) * (b[c] as f64 - mean[c])).sum())
}

fn kappa_oracle(vartheta: &[f64], scores: &[usize]) -> f64 {
    let d = vartheta.len();
    let mut best = f64::INFINITY;
    for &k in scores {
        let law = reduced_law(vartheta, k);
        for l in 0..d {
            let mut e = 0.0;
            for (b, p) in &law {
                let mut one = b.clone();
                one[l] = 1;
                let mut zero = b.clone();
                zero[l] = 0;
                let p1 = law.get(&one).copied().unwrap_or(0.0);
                let p0 = law.get(&zero).copied().unwrap_or(0.0);
                let c = p1 / (p1 + p0);
                e += p * c * (1.0 - c);
            }
            best = best.min(e);
        }
    }
    best
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn random_counts(m: usize, max: u64, rng: &mut Stream) -> Vec<u64> {
    let mut c: Vec<u64> = (0..=m).map(|_| rng.random_range(0..=max)).collect();
    if c[1..m].iter().sum::<u64>() == 0 {
        c[1] = 1;
    }
    c
}

fn random_vartheta(d: usize, r: f64, rng: &mut Stream) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-r..=r)).collect()
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |s, (x, y)| s.max((x - y).abs())) / scale
}

// ---------- criteria ----------

fn c01_symfunc() -> Outcome {
    let mut rng = stream_from_seed(101);
    let (mut worst_esp, mut worst_grad, mut worst_hess) = (0.0f64, 0.0f64, 0.0f64);
    let h = 1e-5;
    for m in 2..=12 {
        for _ in 0..100 {
            let v = random_vartheta(m - 1, 3.0, &mut rng);
            let lib = log_esp(&LogWeights::from_vartheta(&v).unwrap());
            let exact = esp_by_subsets(&weights(&v));
            for (a, b) in lib.iter().zip(&exact) {
                worst_esp = worst_esp.max((a.exp() / b - 1.0).abs());
            }
        }
        for _ in 0..100 {
            let v = random_vartheta(m - 1, 3.0, &mut rng);
            let counts = random_counts(m, 20, &mut rng);
            let ev = psi_eval(&counts, &v, Order::Hessian).unwrap();
            let d = v.len();
            let mut fd_grad = vec![0.0; d];
            let mut fd_hess = vec![0.0; d * d];
            for j in 0..d {
                let mut up = v.clone();
                up[j] += h;
                let mut dn = v.clone();
                dn[j] -= h;
                let pu = psi_eval(&counts, &up, Order::Gradient).unwrap();
                let pd = psi_eval(&counts, &dn, Order::Gradient).unwrap();
                fd_grad[j] = (pu.value - pd.value) / (2.0 * h);
                for r in 0..d {
                    fd_hess[r * d + j] = (pu.gradient()[r] - pd.gradient()[r]) / (2.0 * h);
                }
            }
            let an_h: Vec<f64> = (0..d * d).map(|i| ev.hessian()[(i / d, i % d)]).collect();
            worst_grad = worst_grad.max(rel_dev(&fd_grad, ev.gradient().as_slice()));
            worst_hess = worst_hess.max(rel_dev(&fd_hess, &an_h));
        }
    }
    (
        worst_esp <= 1e-10 && worst_grad <= 1e-6 && worst_hess <= 1e-6,
        format!("max rel dev: e_k {worst_esp:.2e}, gradient {worst_grad:.2e}, hessian {worst_hess:.2e}"),
    )
}

fn c02_sampler() -> Outcome {
    let mut rng = stream_from_seed(202);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let v = random_vartheta(5, 2.0, &mut rng);
        let w = weights(&v);
        let mut exact: HashMap<Vec<u8>, f64> = HashMap::new();
        for b in patterns(6).filter(|b| b.iter().filter(|&&x| x == 1).count() == 3) {
            let p: f64 = w.iter().zip(&b).filter(|(_, &x)| x == 1).map(|(x, _)| x).product();
            exact.insert(b, p);
        }
        let z: f64 = exact.values().sum();
        let sampler = FixedSumSampler::new(&v).unwrap();
        let draws = 200_000;
        let mut emp: HashMap<Vec<u8>, f64> = HashMap::new();
        for _ in 0..draws {
            *emp.entry(sampler.sample(3, &mut rng).unwrap()).or_default() += 1.0 / draws as f64;
        }
        let mut tv = 0.0;
        for (b, p) in &exact {
            tv += (p / z - emp.get(b).copied().unwrap_or(0.0)).abs();
        }
        tv += emp.iter().filter(|(b, _)| !exact.contains_key(*b)).map(|(_, p)| p).sum::<f64>();
        worst = worst.max(tv);
    }
    (worst <= 0.02, format!("max TV over 3 instances = {worst:.4} (bound 0.02)"))
}

fn row_probs(theta: &[f64], density: impl Fn(f64) -> f64) -> Vec<f64> {
    patterns(theta.len())
        .map(|b| {
            simpson(
                |beta| {
                    let mut p = density(beta);
                    for (t, &x) in theta.iter().zip(&b) {
                        let s = sigmoid(beta - t);
                        p *= if x == 1 { s } else { 1.0 - s };
                    }
                    p
                },
                -60.0,
                60.0,
                400_000,
            )
        })
        .collect()
}

/// `P(T, N)` over all `16^n` score matrices, accumulated row by row.
fn joint_t_n(theta: &[f64], n: usize, row: &[f64]) -> HashMap<(Vec<u64>, Vec<u64>), f64> {
    let m = theta.len();
    let mut states: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
    states.insert((vec![0; m - 1], vec![0; m + 1]), 1.0);
    for _ in 0..n {
        let mut next: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
        for ((t, c), p) in &states {
            for (b, q) in patterns(m).zip(row) {
                let mut t2 = t.clone();
                for l in 0..m - 1 {
                    t2[l] += b[l] as u64;
                }
                let mut c2 = c.clone();
                c2[b.iter().map(|&x| x as usize).sum::<usize>()] += 1;
                *next.entry((t2, c2)).or_default() += p * q;
            }
        }
        states = next;
    }
    states
}

fn conditional(joint: &HashMap<(Vec<u64>, Vec<u64>), f64>) -> HashMap<(Vec<u64>, Vec<u64>), f64> {
    let mut pn: HashMap<Vec<u64>, f64> = HashMap::new();
    for ((_, c), p) in joint {
        *pn.entry(c.clone()).or_default() += p;
    }
    joint.iter().map(|((t, c), p)| ((t.clone(), c.clone()), p / pn[c])).collect()
}

fn c03_f_freeness() -> Outcome {
    let params = DifficultyParams::random(4, 1.0, &mut stream_from_seed(303)).unwrap();
    let th = params.theta();
    let gauss = row_probs(th, |b| (-0.5 * b * b).exp() / (2.0 * std::f64::consts::PI).sqrt());
    let logis = row_probs(th, |b| {
        let e = (-b.abs()).exp();
        e / ((1.0 + e) * (1.0 + e))
    });
    let cg = conditional(&joint_t_n(th, 6, &gauss));
    let cl = conditional(&joint_t_n(th, 6, &logis));
    let mut between = 0.0f64;
    let mut vs_lib = 0.0f64;
    let v = params.vartheta();
    let mut laws = HashMap::new();
    for (key, p) in &cg {
        between = between.max((p - cl.get(key).copied().unwrap_or(0.0)).abs());
        let law = laws.entry(key.1.clone()).or_insert_with(|| exact_law_t_given_n(&v, &key.1, 1 << 20).unwrap());
        vs_lib = vs_lib.max((p - law.prob(&key.0)).abs());
    }
    (
        between <= 1e-8 && cg.len() == cl.len(),
        format!("{} (T, N) atoms; max |gaussian - logistic| = {between:.2e}; max |brute force - exact_law_t_given_n| = {vs_lib:.2e}", cg.len()),
    )
}

fn c04_eigen_floor() -> Outcome {
    let mut rng = stream_from_seed(404);
    let mut worst = 0.0f64;
    let mut fails = 0;
    for _ in 0..50 {
        let m = rng.random_range(3..=6);
        let v = random_vartheta(m - 1, 2.0, &mut rng);
        let counts = random_counts(m, 30, &mut rng);
        let mut h = DMatrix::zeros(m - 1, m - 1);
        for k in 1..m {
            if counts[k] > 0 {
                h += reduced_cov(&v, k) * counts[k] as f64;
            }
        }
        let lambda = SymmetricEigen::new(h).eigenvalues.min();
        let occupied: Vec<usize> = (1..m).filter(|&k| counts[k] > 0).collect();
        let n_int: u64 = counts[1..m].iter().sum();
        let rhs = n_int as f64 * kappa_oracle(&v, &occupied) / (m as f64 - 1.0);
        let lib = psi_eval(&counts, &v, Order::Hessian).unwrap().min_eigenvalue_estimate.unwrap();
        if !(lambda > rhs) || (lib - lambda).abs() > 1e-9 * lambda {
            fails += 1;
        }
        worst = worst.max(rhs / lambda);
    }
    (fails == 0, format!("50 instances, m in 3..=6; {fails} failures; max rhs/lambda_min = {worst:.4}"))
}

fn c05_kappa_floor() -> Outcome {
    let mut rng = stream_from_seed(505);
    let mut worst = 0.0f64;
    let mut fails = 0;
    for i in 0..50 {
        let m = 3 + i % 4;
        let p = DifficultyParams::random(m, 2.0, &mut rng).unwrap();
        let kappa = kappa_oracle(&p.vartheta(), &(1..m).collect::<Vec<_>>());
        let bound = kappa_lower_bound(m, 2.0);
        if !(kappa >= bound) {
            fails += 1;
        }
        worst = worst.max(bound / kappa);
    }
    (fails == 0, format!("50 instances, m in 3..=6, R = 2; {fails} failures; max bound/kappa = {worst:.3e}"))
}

fn suite(id: LemmaId, instances: usize) -> Vec<rasch_gauss::tvlab::DistanceReport> {
    check_lemma(id, &SuiteConfig { instances, ..Default::default() })
}

fn c06_denoising() -> Outcome {
    let reps = suite(LemmaId::L46, 100);
    let passed = reps.iter().filter(|r| r.passed()).count();
    let worst = reps
        .iter()
        .filter_map(|r| match r.rhs_bound {
            Rhs::Numeric(v) => Some((r.lhs_estimate + 3.0 * r.lhs_error_bar) / v),
            Rhs::ShapeOnly => None,
        })
        .fold(0.0f64, f64::max);
    (
        passed == reps.len(),
        format!("{passed}/{} instances hold (synthetic + 100 random, d <= 4); max (lhs + 3 err)/rhs = {worst:.3}", reps.len()),
    )
}

fn c07_scale_chain() -> Outcome {
    let reps = suite(LemmaId::L54, 0);
    let parts: Vec<String> = reps
        .iter()
        .map(|r| {
            let rhs = match r.rhs_bound {
                Rhs::Numeric(v) => v,
                Rhs::ShapeOnly => f64::NAN,
            };
            format!("[{}] E TV = {:.5} +/- {:.5} vs {:.5}", r.instance, r.lhs_estimate, r.lhs_error_bar, rhs)
        })
        .collect();
    (reps.len() == 2 && reps.iter().all(|r| r.passed()), parts.join("; "))
}

fn shape_summary(r: &rasch_gauss::tvlab::DistanceReport) -> String {
    r.details.iter().map(|d| format!("{} = {:.4}", d.name, d.value)).collect::<Vec<_>>().join(", ")
}

fn c08_smooth_round() -> Outcome {
    let r = suite(LemmaId::L42, 0).remove(0);
    (r.passed(), shape_summary(&r))
}

fn c09_clt() -> Outcome {
    let r = suite(LemmaId::L45, 0).remove(0);
    // binomial(n, p) mixture against the matched normal, by Simpson
    let n = 25u64;
    let p = (-1f64).exp() / ((-1f64).exp() + 1.0);
    let pmf: Vec<f64> = (0..=n)
        .map(|k| {
            let lc = (0..k).fold(0.0, |a, i| a + ((n - i) as f64).ln() - ((i + 1) as f64).ln());
            (lc + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
        })
        .collect();
    let mu = n as f64 * p;
    let s = (n as f64 * p * (1.0 - p) + 1.0).sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let oracle = simpson(
        |x| {
            let mix: f64 = pmf.iter().enumerate().map(|(k, q)| q * phi(x - k as f64)).sum();
            (mix - phi((x - mu) / s) / s).abs()
        },
        mu - 20.0 * s,
        mu + 20.0 * s,
        200_000,
    );
    let lib = r.detail("tv@n=25,b=1").unwrap_or(f64::NAN);
    let agree = (lib - oracle).abs() < 1e-6;
    (r.passed() && agree, format!("{}; Simpson oracle at n = 25: {oracle:.6}", shape_summary(&r)))
}

fn c10_cml() -> Outcome {
    let mut rng = stream_from_seed(1010);
    let (mut worst_res, mut worst_rt) = (0.0f64, 0.0f64);
    let mut errors = 0;
    for _ in 0..200 {
        let m = rng.random_range(2..=8);
        let v = random_vartheta(m - 1, 3.0, &mut rng);
        let counts = random_counts(m, 30, &mut rng);
        let n: u64 = counts.iter().sum();
        let x = random_vartheta(m - 1, 3.0, &mut rng);
        let target = phi_forward(&x, &counts).unwrap().0;
        match cml_invert(&counts, &target, None) {
            Ok(inv) => {
                let back = phi_forward(&inv, &counts).unwrap().0;
                let res = back.iter().zip(&target).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
                worst_res = worst_res.max(res / n as f64);
            }
            Err(_) => errors += 1,
        }
        let clean = phi_forward(&v, &counts).unwrap().0;
        match cml_invert(&counts, &clean, Some(1e-13 * n as f64)) {
            Ok(inv) => worst_rt = worst_rt.max(inv.iter().zip(&v).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()))),
            Err(_) => errors += 1,
        }
    }
    (
        errors == 0 && worst_res <= 1e-8 && worst_rt <= 1e-8,
        format!("200 instances, m in 2..=8; max residual/n = {worst_res:.2e}, max |theta error| = {worst_rt:.2e}, {errors} errors"),
    )
}

fn coverage_cfg(m: usize, n: usize, reps: usize, mode: CoverageMode, seed: u64) -> CoverageConfig {
    CoverageConfig {
        params: DifficultyParams::random(m, 1.0, &mut stream_from_seed(seed)).unwrap(),
        ability: AbilityDistribution::gaussian(0.0, 1.0).unwrap(),
        n,
        alpha: 0.9,
        reps,
        mode,
        smoothing: Some(SmoothingConfig::new(1.0).unwrap()),
        seed,
        exec: Execution::Parallel,
    }
}

fn c11_coverage_d() -> Outcome {
    let cfg = coverage_cfg(5, 5000, 1000, CoverageMode::D, 1111);
    let r = coverage_sim(&cfg).unwrap();
    let q = cell_probs(&cfg.params, &cfg.ability).unwrap().q;
    let counts = sample_multinomial(5000, &q, &mut stream_from_seed(1112)).unwrap();
    let oracle = oracle_conditional_coverage(&cfg.params.vartheta(), &counts, 0.9, 10_000, 1113).unwrap();
    (
        r.coverage >= 0.88 && (oracle - 0.9).abs() <= 0.015,
        format!(
            "mode D coverage = {:.3} ({} / {}, {} degenerate, {} failures); oracle conditional coverage = {oracle:.4}",
            r.coverage, r.hits, r.replications, r.degenerate_count, r.failures
        ),
    )
}

fn c12_end_to_end() -> Outcome {
    let r = coverage_sim(&coverage_cfg(4, 5000, 500, CoverageMode::EndToEndA, 1212)).unwrap();
    let small = coverage_sim(&coverage_cfg(4, 2000, 200, CoverageMode::EndToEndA, 1213)).unwrap();
    let large = coverage_sim(&coverage_cfg(4, 8000, 200, CoverageMode::EndToEndA, 1213)).unwrap();
    let ratio = small.axis_median.unwrap_or(f64::NAN) / large.axis_median.unwrap_or(f64::NAN);
    (
        r.coverage >= 0.87 && (1.7..=2.3).contains(&ratio),
        format!(
            "end-to-end coverage = {:.3} ({} failures); median axis n=2000: {:.4}, n=8000: {:.4}, ratio {ratio:.3}",
            r.coverage,
            r.failures,
            small.axis_median.unwrap_or(f64::NAN),
            large.axis_median.unwrap_or(f64::NAN)
        ),
    )
}

fn c13_multinomial() -> Outcome {
    let params = DifficultyParams::random(4, 1.0, &mut stream_from_seed(1313)).unwrap();
    let f = AbilityDistribution::gaussian(0.0, 1.0).unwrap();
    let q = cell_probs(&params, &f).unwrap().q;
    let n = 100_000usize;
    let chi = ChiSquared::new(4.0).unwrap();
    let mut pass = 0;
    for seed in 0..100u64 {
        let st = sufficient_stats(&simulate_scores(&params, &f, n, &mut stream_from_seed(seed)).unwrap());
        let stat: f64 = st
            .counts
            .iter()
            .zip(&q)
            .map(|(&o, &p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        if 1.0 - chi.cdf(stat) > 0.001 {
            pass += 1;
        }
    }
    (pass >= 99, format!("{pass}/100 seeds pass chi-square GOF at level 0.001"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("symmetric-function engine vs enumeration and finite differences", c01_symfunc),
        ("conditional-Bernoulli sampler TV", c02_sampler),
        ("law of T given N free of the ability distribution", c03_f_freeness),
        ("eigenvalue floor of the conditional covariance", c04_eigen_floor),
        ("kappa lower bound", c05_kappa_floor),
        ("de-noising TV bound", c06_denoising),
        ("explicit constant chain for the variance rescaling", c07_scale_chain),
        ("smooth/round lattice TV shape", c08_smooth_round),
        ("CLT in TV shape", c09_clt),
        ("CML inversion round trip", c10_cml),
        ("mode-D coverage and oracle conditional coverage", c11_coverage_d),
        ("end-to-end coverage and axis scaling", c12_end_to_end),
        ("multinomial law of the score histogram", c13_multinomial),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, summary) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {} {title}: {summary} ({:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
