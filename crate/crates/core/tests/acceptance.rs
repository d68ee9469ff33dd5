//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rare_switch::analysis::{
    claim1_suite, find_counterexample, lemma12_suite, verify_theorem_on_traces, AnalysisError, RecordedStream,
    SearchMode, TheoremOptions,
};
use rare_switch::bandit::{compare_rules, run_bandit, ActionSpec, LinearBanditEnv, Policy};
use rare_switch::linalg::Vector;
use rare_switch::noise::{sample_noise, NoiseBudget, NoiseKind, NoiseModel};
use rare_switch::sampling;
use rare_switch::switching::{run_stream, update_count_bound, RuleKind, StreamConfig, SwitchRule, SwitchTrace};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn stream_cfg(
    dim: usize,
    horizon: usize,
    kind: RuleKind,
    alpha: f64,
    noise: NoiseModel,
    eta: f64,
    lambda: f64,
) -> StreamConfig {
    StreamConfig::new(
        dim,
        horizon,
        1.0,
        SwitchRule::new(kind, alpha).unwrap(),
        noise,
        NoiseBudget::new(eta, lambda).unwrap(),
    )
    .unwrap()
}

fn ball_actions(seed: u64, dim: usize, n: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sampling::in_ball(&mut rng, dim, 1.0)).collect()
}

fn dense(v: &Vector) -> DMatrix<f64> {
    v * v.transpose()
}

/// Largest real eigenvalue of a matrix similar to a symmetric one.
fn top_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max)
}

// ---------------------------------------------------------------------------

fn claim1() -> Outcome {
    let budget = NoiseBudget::new(0.5, 1.0).unwrap();
    let reports: Vec<_> = [2usize, 3, 5, 8]
        .par_iter()
        .map(|&d| (d, claim1_suite(d, 10_000, &budget, 1.0, 0xC1A1).unwrap()))
        .collect();
    let pass = reports.iter().all(|(_, r)| {
        r.instances == 10_000 && r.failures == 0 && r.max_upper_ratio <= 1.0 + 1e-9 && r.max_lower_ratio <= 1.0 + 1e-9
    });
    let worst = reports
        .iter()
        .map(|(_, r)| r.max_upper_ratio.max(r.max_lower_ratio))
        .fold(0.0, f64::max);
    outcome(
        pass,
        format!(
            "4 x 10000 instances, c_rho = {}, worst ratio to c_rho = {worst:.12}",
            budget.c_rho()
        ),
    )
}

/// The 50 noisy Rayleigh streams shared by criteria 2 to 4.
fn theorem_streams() -> Vec<RecordedStream> {
    (0..50u64)
        .into_par_iter()
        .map(|i| {
            let dim = [2, 5, 10][i as usize % 3];
            let sigma = if i % 2 == 0 { 1.0 } else { 0.1 };
            let noise = NoiseModel::new(NoiseKind::GaussianOrthogonalRescaled, sigma, 1000 + i).unwrap();
            let cfg = stream_cfg(dim, 10_000, RuleKind::Rayleigh, 4.0, noise, 0.5, 1.0);
            RecordedStream::run(cfg, ball_actions(i, dim, 10_000)).unwrap()
        })
        .collect()
}

/// Dense-inverse recomputation of the private width ratio on the 2-d
/// streams: `sup_x ‖x‖²_{Ṽ_τ⁻¹} / ‖x‖²_{Ṽ_t⁻¹} = λ_max(Ṽ_τ⁻¹ Ṽ_t)`.
fn dense_width_oracle(rec: &RecordedStream) -> (usize, f64) {
    let cfg = &rec.cfg;
    let dim = cfg.dim;
    let mut design = DMatrix::identity(dim, dim) * cfg.lambda();
    let mut anchor: Option<DMatrix<f64>> = None;
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for (x, step) in rec.xs.iter().zip(&rec.trace.steps) {
        let noise = sample_noise(&cfg.noise, &cfg.budget, step.t, dim);
        let perturbed = &design + noise.as_matrix();
        if step.switched {
            anchor = Some(perturbed);
        } else {
            let a = anchor.as_ref().unwrap();
            let ratio = top_real_eigenvalue(&(a.clone().try_inverse().unwrap() * &perturbed)).sqrt();
            worst = worst.max(ratio / cfg.rule.alpha.sqrt());
            if ratio > cfg.rule.alpha.sqrt() * (1.0 + 1e-7) {
                violations += 1;
            }
        }
        design += dense(x);
    }
    (violations, worst)
}

fn theorem_widths(streams: &[RecordedStream]) -> Outcome {
    let report = verify_theorem_on_traces(
        streams,
        &TheoremOptions {
            directions_per_checkpoint: 100,
            seed: 0x7E57,
            ..Default::default()
        },
    );
    let oracle: Vec<(usize, f64)> = streams
        .par_iter()
        .filter(|s| s.cfg.dim == 2)
        .map(dense_width_oracle)
        .collect();
    let oracle_violations: usize = oracle.iter().map(|o| o.0).sum();
    let oracle_worst = oracle.iter().map(|o| o.1).fold(0.0, f64::max);
    let pass = report.traces == 50
        && report.private_violations == 0
        && report.nonprivate_violations == 0
        && report.trace_errors.is_empty()
        && oracle_violations == 0;
    outcome(
        pass,
        format!(
            "{} checkpoints, {} directions, violations private = {} non-private = {}, trace errors = {}; \
             dense oracle on {} 2-d streams: {} violations, worst ratio / sqrt(alpha) = {:.9}",
            report.checkpoints,
            report.directions,
            report.private_violations,
            report.nonprivate_violations,
            report.trace_errors.len(),
            oracle.len(),
            oracle_violations,
            oracle_worst
        ),
    )
}

fn formula_bound(d: f64, t: f64, l: f64, lambda: f64, alpha: f64, c_rho: f64) -> f64 {
    d * (1.0 + t * l * l / (lambda * d)).ln() / (alpha / c_rho).ln()
}

fn theorem_bound(streams: &[RecordedStream]) -> Outcome {
    let mut ok = true;
    let mut slack = f64::INFINITY;
    for s in streams {
        let b = formula_bound(s.cfg.dim as f64, 10_000.0, 1.0, 1.0, 4.0, 3.0);
        ok &= (s.trace.m as f64) <= b + 1.0;
        slack = slack.min(b + 1.0 - s.trace.m as f64);
    }

    let cfg = |horizon| stream_cfg(2, horizon, RuleKind::Rayleigh, 2.0, NoiseModel::none(), 0.0, 1.0);
    let bound = update_count_bound(&cfg(1000)).unwrap();
    let oracle = 2.0 * 501f64.ln() / 2f64.ln();
    let concrete_ok = (bound - oracle).abs() < 1e-12 && (bound - 17.94).abs() < 0.005;

    let mut fixed: Vec<Vec<Vector>> = vec![
        vec![Vector::from_column_slice(&[1.0, 0.0]); 1000],
        (0..1000)
            .map(|i| Vector::from_column_slice(if i % 2 == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] }))
            .collect(),
    ];
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fixed.push(
            (0..1000)
                .map(|_| {
                    if seed % 2 == 0 {
                        sampling::unit_vector(&mut rng, 2)
                    } else {
                        sampling::in_ball(&mut rng, 2, 1.0)
                    }
                })
                .collect(),
        );
    }
    let max_m = fixed
        .par_iter()
        .map(|xs| run_stream(&cfg(1000), xs).unwrap().m)
        .max()
        .unwrap();
    let pass = ok && concrete_ok && (max_m as f64) <= bound;
    outcome(
        pass,
        format!(
            "50 noisy streams within bound + 1 (min slack {slack:.3}); d=2 T=1000 alpha=2 eta=0 bound = {bound:.4}, \
             max m over {} streams = {max_m}",
            fixed.len()
        ),
    )
}

fn decisions(trace: &SwitchTrace) -> Vec<bool> {
    trace.steps.iter().map(|s| s.switched).collect()
}

fn rule_forms(streams: &[RecordedStream]) -> Outcome {
    let mut cases: Vec<(StreamConfig, Vec<Vector>, Vec<bool>)> = streams
        .iter()
        .map(|s| {
            (
                s.cfg
                    .with_rule(SwitchRule::new(RuleKind::RayleighLoewnerForm, 4.0).unwrap()),
                s.xs.clone(),
                decisions(&s.trace),
            )
        })
        .collect();
    for i in 0..36u64 {
        let dim = 2 + (i as usize % 3);
        let alpha = [1.5, 2.0, 4.0][(i / 3) as usize % 3];
        let noise = match i % 4 {
            0 => NoiseModel::none(),
            1 => NoiseModel::new(NoiseKind::AdversarialDiagonal, 0.0, 0).unwrap(),
            _ => NoiseModel::new(NoiseKind::GaussianOrthogonalRescaled, 0.5, i).unwrap(),
        };
        let eta = if i % 4 == 0 { 0.0 } else { 0.5 };
        let xs = ball_actions(500 + i, dim, 2000);
        let cfg = stream_cfg(dim, 2000, RuleKind::Rayleigh, alpha, noise, eta, 1.0);
        let reference = decisions(&run_stream(&cfg, &xs).unwrap());
        cases.push((
            cfg.with_rule(SwitchRule::new(RuleKind::RayleighLoewnerForm, alpha).unwrap()),
            xs,
            reference,
        ));
    }
    let mismatches: Vec<usize> = cases
        .par_iter()
        .map(|(cfg, xs, reference)| {
            let other = decisions(&run_stream(cfg, xs).unwrap());
            reference.iter().zip(&other).filter(|(a, b)| a != b).count()
        })
        .collect();
    let steps: usize = cases.iter().map(|c| c.2.len()).sum();
    let bad: usize = mismatches.iter().sum();
    outcome(
        bad == 0,
        format!("{} streams, {steps} steps, {bad} differing decisions", cases.len()),
    )
}

fn ordering() -> Outcome {
    let reports: Vec<_> = [2usize, 3, 5, 8]
        .par_iter()
        .map(|&d| lemma12_suite(d, 10_000, 1.0, 1.0, 0x0D0E).unwrap())
        .collect();
    let pairs: usize = reports.iter().map(|r| r.instances).sum();
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    let max_ratio = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);

    let shared: Vec<(usize, usize)> = (0..60u64)
        .into_par_iter()
        .map(|i| {
            let dim = [2, 3, 5][i as usize % 3];
            let alpha = [1.5, 2.0, 4.0][(i / 3) as usize % 3];
            let xs = ball_actions(9000 + i, dim, 2000);
            let cfg = |k| stream_cfg(dim, 2000, k, alpha, NoiseModel::none(), 0.0, 1.0);
            (
                run_stream(&cfg(RuleKind::Rayleigh), &xs).unwrap().m,
                run_stream(&cfg(RuleKind::Determinant), &xs).unwrap().m,
            )
        })
        .collect();
    let bandit_ok = (0..10u64).into_par_iter().all(|seed| {
        let env = LinearBanditEnv::random(3, ActionSpec::Fresh { count: 5 }, 1.0, 1.0, 0.1, seed).unwrap();
        let cfg = stream_cfg(3, 2000, RuleKind::Determinant, 2.0, NoiseModel::none(), 0.0, 1.0);
        let rules = [
            SwitchRule::new(RuleKind::Determinant, 2.0).unwrap(),
            SwitchRule::new(RuleKind::Rayleigh, 2.0).unwrap(),
            SwitchRule::new(RuleKind::RayleighLoewnerForm, 2.0).unwrap(),
        ];
        let cmp = compare_rules(&env, &cfg, &rules).unwrap();
        !cmp.ordering.is_empty() && cmp.ordering_holds()
    });
    let stream_ok = shared.iter().all(|(r, d)| r <= d);
    let total_r: usize = shared.iter().map(|s| s.0).sum();
    let total_d: usize = shared.iter().map(|s| s.1).sum();
    outcome(
        failures == 0 && pairs >= 10_000 && stream_ok && bandit_ok,
        format!(
            "{pairs} monotone pairs, {failures} failures, max rayleigh/det ratio = {max_ratio:.6}; \
             60 shared streams: sum m_rayleigh = {total_r} <= sum m_determinant = {total_d}, \
             per-stream ordering {}; bandit shared streams ordering {}",
            if stream_ok { "holds" } else { "FAILS" },
            if bandit_ok { "holds" } else { "FAILS" }
        ),
    )
}

fn counterexample() -> Outcome {
    let (alpha, lambda, eta) = (1.5, 1.0, 0.5);
    let budget = NoiseBudget::new(eta, lambda).unwrap();
    let c = match find_counterexample(alpha, &budget, SearchMode::Analytic) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("search failed: {e}")),
    };
    let verified = c.verify().is_ok();

    // Independent rebuild from the raw actions and noise matrices.
    let to_vec = |v: &Vec<f64>| Vector::from_column_slice(v);
    let mut v_tau = DMatrix::identity(2, 2) * lambda;
    for x in &c.prefix {
        v_tau += dense(&to_vec(x));
    }
    let mut v_t = v_tau.clone();
    for x in &c.increment {
        v_t += dense(&to_vec(x));
    }
    let actions_ok = c
        .prefix
        .iter()
        .chain(&c.increment)
        .all(|x| to_vec(x).norm() <= 1.0 + 1e-12);
    let e_tau = c.noise_tau.as_matrix().clone();
    let e_t = c.noise_t.as_matrix().clone();
    let noise_ok = [&e_tau, &e_t].iter().all(|e| {
        (*e - e.transpose()).amax() == 0.0 && (*e).clone().symmetric_eigenvalues().amax() <= eta * (1.0 + 1e-12)
    });
    let p_tau = &v_tau + &e_tau;
    let p_t = &v_t + &e_t;
    let det_ratio = p_t.determinant() / p_tau.determinant();
    let inflation = top_real_eigenvalue(&(p_tau.clone().try_inverse().unwrap() * &p_t)).sqrt();
    let w = to_vec(&c.witness);
    let inv_norm = |m: &DMatrix<f64>, x: &Vector| (x.transpose() * m.clone().try_inverse().unwrap() * x)[(0, 0)].sqrt();
    let witness_ratio = inv_norm(&p_tau, &w) / inv_norm(&p_t, &w);
    let inst_ok = det_ratio <= alpha && inflation > alpha.sqrt() && witness_ratio > alpha.sqrt();
    let agrees = (det_ratio - c.det_ratio).abs() < 1e-9 && (inflation - c.width_inflation).abs() < 1e-9;

    let none = matches!(
        find_counterexample(alpha, &NoiseBudget::new(0.0, lambda).unwrap(), SearchMode::Analytic),
        Err(AnalysisError::NoCounterexample { .. })
    );
    outcome(
        verified && actions_ok && noise_ok && inst_ok && agrees && none,
        format!(
            "det ratio = {det_ratio:.12} <= {alpha}, width inflation = {inflation:.6} > sqrt(alpha) = {:.6}, \
             witness ratio = {witness_ratio:.6}, library verify {}, eta = 0 reports none: {none}",
            alpha.sqrt(),
            if verified { "ok" } else { "FAILED" }
        ),
    )
}

fn regret() -> Outcome {
    let horizon = 10_000;
    let seeds: Vec<u64> = (0..20).collect();
    let mean = |policy: Policy, kind: RuleKind| -> f64 {
        let total: f64 = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let env =
                    LinearBanditEnv::random(2, ActionSpec::Fixed { count: 5 }, 1.0, 1.0, 0.1, rng.random()).unwrap();
                let cfg = stream_cfg(2, horizon, kind, 2.0, NoiseModel::none(), 0.0, 1.0);
                run_bandit(&env, &cfg, policy).unwrap().total_regret()
            })
            .sum();
        total / seeds.len() as f64
    };
    let base = mean(Policy::EveryStep, RuleKind::Determinant);
    let det = mean(Policy::RareSwitch, RuleKind::Determinant);
    let ray = mean(Policy::RareSwitch, RuleKind::Rayleigh);
    outcome(
        det <= 3.0 * base && ray <= 3.0 * base,
        format!(
            "mean regret every-step = {base:.4}, determinant = {det:.4} ({:.3}x), rayleigh = {ray:.4} ({:.3}x)",
            det / base,
            ray / base
        ),
    )
}

fn collect_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let p = entry.path();
        if p.is_dir() {
            for (name, bytes) in collect_files(&p) {
                out.push((format!("{}/{name}", entry.file_name().to_string_lossy()), bytes));
            }
        } else {
            out.push((
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let dir = work.path();
    std::fs::write(
        dir.join("run.json"),
        r#"{"dim": 3, "horizon": 1500, "lambda": 1.0, "seeds": 3, "seed": 42, "include_baseline": true,
            "rules": [{"kind": "rayleigh", "alpha": 4.0}, {"kind": "determinant", "alpha": 4.0}],
            "noise": {"kind": "gaussian-orthogonal-rescaled", "sigma": 0.5, "eta": 0.5},
            "env": {"actions": {"mode": "fresh", "count": 6}}}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("verify.json"),
        r#"{"seed": 5, "suites": [{"suite": "claim1", "dims": [2, 3], "instances": 200},
            {"suite": "lemma12", "dims": [4], "instances": 200},
            {"suite": "theorem", "streams": 3, "dims": [2, 3], "horizon": 500}]}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_rswitch");
    let run = |out: &str, threads: &str| {
        let cmds: [Vec<&str>; 4] = [
            vec!["simulate", "--config", "run.json"],
            vec!["compare", "--config", "run.json"],
            vec!["verify", "--config", "verify.json"],
            vec![
                "counterexample",
                "--alpha",
                "1.5",
                "--eta",
                "0.5",
                "--lambda",
                "1",
                "--mode",
                "grid",
            ],
        ];
        for (i, args) in cmds.iter().enumerate() {
            let target = format!("{out}/{i}");
            let status = Command::new(bin)
                .args(args)
                .args(["--out", &target, "--threads", threads])
                .current_dir(dir)
                .env_remove("RSWITCH_SEED")
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{args:?} failed: {status}");
        }
    };
    run("a", "1");
    run("b", "4");
    let a = collect_files(&dir.join("a"));
    let b = collect_files(&dir.join("b"));
    let same = a == b;
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    outcome(
        same && a.len() >= 10,
        format!("{} files, {bytes} bytes, identical across runs: {same}", a.len()),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let start = Instant::now();
    let streams = theorem_streams();
    let criteria: Vec<Criterion> = vec![
        ("perturbed Rayleigh sandwich", Box::new(claim1)),
        (
            "width guarantees on noisy Rayleigh streams",
            Box::new(|| theorem_widths(&streams)),
        ),
        ("update-count bound", Box::new(|| theorem_bound(&streams))),
        ("Rayleigh and Loewner forms agree", Box::new(|| rule_forms(&streams))),
        (
            "Rayleigh max below det ratio; m_rayleigh <= m_determinant",
            Box::new(ordering),
        ),
        ("determinant-rule counterexample", Box::new(counterexample)),
        ("rare-switch regret within 3x of every-step", Box::new(regret)),
        ("byte-identical artifacts", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} {} {name} ({:.1}s): {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
