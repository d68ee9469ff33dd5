//! Seeded experiment runners and their CSV/JSON artifacts.
//!
//! Every artifact starts with the resolved configuration and the root seed:
//! CSV files as `#` comment lines, JSON files as the `config` and `root_seed`
//! keys. Wall-clock timings are never written, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    claim1_suite, find_counterexample, lemma12_suite, verify_theorem_on_traces, AnalysisError, Counterexample,
    Lemma12Report, RecordedStream, SandwichReport, SearchMode, TheoremOptions, TheoremReport,
};
use crate::bandit::{compare_rules, run_bandit, BanditError, BanditRun, OrderingCheck, Policy};
use crate::config::{ConfigError, RunConfig, SuiteConfig, VerifyConfig};
use crate::noise::{NoiseBudget, NoiseKind, NoiseModel};
use crate::sampling;
use crate::switching::{update_count_bound, RuleKind, StreamConfig, SwitchError, SwitchRule, SwitchTrace};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot write {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// Which artifact families to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Formats {
    pub const BOTH: Formats = Formats { csv: true, json: true };
}

/// Seed of the `i`-th run under `root`.
pub fn run_seed(root: u64, i: usize) -> u64 {
    root.wrapping_add(i as u64)
}

/// Independent `(environment, noise)` seeds for one run.
pub fn sub_seeds(run_seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    (rng.random(), rng.random())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone)]
pub struct SimRun {
    pub rule_index: usize,
    pub policy: Policy,
    pub seed: u64,
    pub bound: Option<f64>,
    pub c_rho: f64,
    pub run: BanditRun,
}

impl SimRun {
    pub fn m(&self) -> usize {
        self.run.trace.m
    }

    /// `m ≤ bound + 1`, vacuously true without a bound or for the baseline.
    pub fn within_bound(&self) -> bool {
        self.policy == Policy::EveryStep || self.bound.is_none_or(|b| self.m() as f64 <= b + 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: RunConfig,
    pub runs: Vec<SimRun>,
}

impl Simulation {
    /// Runs that break `m ≤ bound + 1` for a Rayleigh rule.
    pub fn bound_failures(&self) -> Vec<&SimRun> {
        self.runs
            .iter()
            .filter(|r| r.run.rule.kind.is_rayleigh() && !r.within_bound())
            .collect()
    }
}

/// One bandit run per (rule, seed), plus the every-step baseline per seed
/// when requested. Runs execute in parallel; order is (rule, policy, seed).
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, ExperimentError> {
    cfg.validate()?;
    let rules = cfg.switch_rules()?;
    let mut jobs: Vec<(usize, Policy, usize)> = Vec::new();
    for r in 0..rules.len() {
        for s in 0..cfg.seeds {
            jobs.push((r, cfg.policy, s));
        }
    }
    if cfg.include_baseline && cfg.policy != Policy::EveryStep {
        for s in 0..cfg.seeds {
            jobs.push((0, Policy::EveryStep, s));
        }
    }
    let runs = jobs
        .par_iter()
        .map(|&(r, policy, s)| -> Result<SimRun, ExperimentError> {
            let seed = run_seed(cfg.seed, s);
            let (env_seed, noise_seed) = sub_seeds(seed);
            let env = cfg.environment(env_seed)?;
            let stream = cfg.stream_config(rules[r], noise_seed)?;
            let run = run_bandit(&env, &stream, policy)?;
            Ok(SimRun {
                rule_index: r,
                policy,
                seed,
                bound: update_count_bound(&stream).ok(),
                c_rho: stream.budget.c_rho(),
                run,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Simulation {
        config: cfg.clone(),
        runs,
    })
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary {
    rule: RuleKind,
    alpha: f64,
    policy: Policy,
    seed: u64,
    m: usize,
    bound: Option<f64>,
    c_rho: f64,
    cumulative_regret: f64,
    recomputations: usize,
    update_times: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct AggregateSummary {
    rule: RuleKind,
    alpha: f64,
    policy: Policy,
    runs: usize,
    mean_m: f64,
    max_m: usize,
    bound: Option<f64>,
    c_rho: f64,
    mean_cumulative_regret: f64,
    max_cumulative_regret: f64,
}

#[derive(Serialize)]
struct SummaryCsvRow {
    rule: RuleKind,
    alpha: f64,
    policy: Policy,
    seed: String,
    m: f64,
    bound: Option<f64>,
    c_rho: f64,
    cumulative_regret: f64,
    recomputations: f64,
}

fn summarize(run: &SimRun) -> RunSummary {
    RunSummary {
        rule: run.run.rule.kind,
        alpha: run.run.rule.alpha,
        policy: run.policy,
        seed: run.seed,
        m: run.m(),
        bound: run.bound,
        c_rho: run.c_rho,
        cumulative_regret: run.run.total_regret(),
        recomputations: run.run.recomputations,
        update_times: run.run.trace.update_times.clone(),
    }
}

fn aggregate(runs: &[SimRun]) -> Vec<AggregateSummary> {
    let mut groups: Vec<((usize, Policy), Vec<&SimRun>)> = Vec::new();
    for r in runs {
        let key = (r.rule_index, r.policy);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let n = g.len() as f64;
            AggregateSummary {
                rule: g[0].run.rule.kind,
                alpha: g[0].run.rule.alpha,
                policy: g[0].policy,
                runs: g.len(),
                mean_m: g.iter().map(|r| r.m() as f64).sum::<f64>() / n,
                max_m: g.iter().map(|r| r.m()).max().unwrap_or(0),
                bound: g[0].bound,
                c_rho: g[0].c_rho,
                mean_cumulative_regret: g.iter().map(|r| r.run.total_regret()).sum::<f64>() / n,
                max_cumulative_regret: g.iter().map(|r| r.run.total_regret()).fold(0.0, f64::max),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct TraceRun<'a> {
    rule: RuleKind,
    alpha: f64,
    policy: Policy,
    seed: u64,
    m: usize,
    bound: Option<f64>,
    c_rho: f64,
    trace: &'a SwitchTrace,
    cumulative_regret: &'a [f64],
}

/// Writes `trace.csv`, `regret.csv`, `summary.csv` and/or `summary.json`,
/// `traces.json`. Returns the written paths.
pub fn write_simulation(sim: &Simulation, out: &Path, formats: Formats) -> Result<Vec<PathBuf>, ExperimentError> {
    let prov = Provenance::new("simulate", sim.config.seed, &sim.config)?;
    create_dir(out)?;
    let mut written = Vec::new();
    let summaries: Vec<RunSummary> = sim.runs.iter().map(summarize).collect();
    let aggregates = aggregate(&sim.runs);

    if formats.csv {
        #[derive(Serialize)]
        struct TraceRow {
            rule: RuleKind,
            alpha: f64,
            policy: Policy,
            seed: u64,
            t: u64,
            tau: u64,
            statistic: f64,
            switched: bool,
        }
        #[derive(Serialize)]
        struct RegretRow {
            rule: RuleKind,
            alpha: f64,
            policy: Policy,
            seed: u64,
            t: u64,
            cum_regret: f64,
            m_so_far: usize,
        }
        let path = out.join("trace.csv");
        write_csv(&path, &prov, |w| {
            for r in &sim.runs {
                for s in &r.run.trace.steps {
                    w.serialize(TraceRow {
                        rule: r.run.rule.kind,
                        alpha: r.run.rule.alpha,
                        policy: r.policy,
                        seed: r.seed,
                        t: s.t,
                        tau: s.tau,
                        statistic: s.statistic,
                        switched: s.switched,
                    })?;
                }
            }
            Ok(())
        })?;
        written.push(path);

        let path = out.join("regret.csv");
        write_csv(&path, &prov, |w| {
            for r in &sim.runs {
                let mut m = 0;
                for (s, cum) in r.run.trace.steps.iter().zip(&r.run.cumulative_regret) {
                    m += usize::from(s.switched);
                    w.serialize(RegretRow {
                        rule: r.run.rule.kind,
                        alpha: r.run.rule.alpha,
                        policy: r.policy,
                        seed: r.seed,
                        t: s.t,
                        cum_regret: *cum,
                        m_so_far: m,
                    })?;
                }
            }
            Ok(())
        })?;
        written.push(path);

        let path = out.join("summary.csv");
        write_csv(&path, &prov, |w| {
            for s in &summaries {
                w.serialize(SummaryCsvRow {
                    rule: s.rule,
                    alpha: s.alpha,
                    policy: s.policy,
                    seed: s.seed.to_string(),
                    m: s.m as f64,
                    bound: s.bound,
                    c_rho: s.c_rho,
                    cumulative_regret: s.cumulative_regret,
                    recomputations: s.recomputations as f64,
                })?;
            }
            for (a, g) in aggregates.iter().zip(group_recomputations(&sim.runs)) {
                w.serialize(SummaryCsvRow {
                    rule: a.rule,
                    alpha: a.alpha,
                    policy: a.policy,
                    seed: "all".into(),
                    m: a.mean_m,
                    bound: a.bound,
                    c_rho: a.c_rho,
                    cumulative_regret: a.mean_cumulative_regret,
                    recomputations: g,
                })?;
            }
            Ok(())
        })?;
        written.push(path);
    }

    if formats.json {
        #[derive(Serialize)]
        struct SummaryFile<'a> {
            command: &'static str,
            root_seed: u64,
            config: &'a RunConfig,
            runs: &'a [RunSummary],
            aggregate: &'a [AggregateSummary],
        }
        let path = out.join("summary.json");
        write_json(
            &path,
            &SummaryFile {
                command: prov.command,
                root_seed: prov.root_seed,
                config: &sim.config,
                runs: &summaries,
                aggregate: &aggregates,
            },
        )?;
        written.push(path);

        #[derive(Serialize)]
        struct TracesFile<'a> {
            command: &'static str,
            root_seed: u64,
            config: &'a RunConfig,
            runs: Vec<TraceRun<'a>>,
        }
        let runs = sim
            .runs
            .iter()
            .map(|r| TraceRun {
                rule: r.run.rule.kind,
                alpha: r.run.rule.alpha,
                policy: r.policy,
                seed: r.seed,
                m: r.m(),
                bound: r.bound,
                c_rho: r.c_rho,
                trace: &r.run.trace,
                cumulative_regret: &r.run.cumulative_regret,
            })
            .collect();
        let path = out.join("traces.json");
        write_json(
            &path,
            &TracesFile {
                command: prov.command,
                root_seed: prov.root_seed,
                config: &sim.config,
                runs,
            },
        )?;
        written.push(path);
    }
    Ok(written)
}

fn group_recomputations(runs: &[SimRun]) -> Vec<f64> {
    let mut groups: Vec<((usize, Policy), f64, usize)> = Vec::new();
    for r in runs {
        let key = (r.rule_index, r.policy);
        match groups.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, sum, n)) => {
                *sum += r.run.recomputations as f64;
                *n += 1;
            }
            None => groups.push((key, r.run.recomputations as f64, 1)),
        }
    }
    groups.into_iter().map(|(_, sum, n)| sum / n as f64).collect()
}

// ---------------------------------------------------------------------------
// compare

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub rule: RuleKind,
    pub alpha: f64,
    pub m: usize,
    pub cumulative_regret: f64,
    pub shared_m: usize,
    pub shared_width_violations: usize,
    pub shared_trace: SwitchTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSeed {
    pub seed: u64,
    pub rows: Vec<CompareRow>,
    pub ordering: Vec<OrderingCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareOutcome {
    pub command: &'static str,
    pub root_seed: u64,
    pub config: RunConfig,
    pub ordering_holds: bool,
    pub seeds: Vec<CompareSeed>,
}

/// All configured rules on shared environments, one per seed.
pub fn compare(cfg: &RunConfig) -> Result<CompareOutcome, ExperimentError> {
    cfg.validate()?;
    let rules = cfg.switch_rules()?;
    let seeds = (0..cfg.seeds)
        .into_par_iter()
        .map(|s| -> Result<CompareSeed, ExperimentError> {
            let seed = run_seed(cfg.seed, s);
            let (env_seed, noise_seed) = sub_seeds(seed);
            let env = cfg.environment(env_seed)?;
            let stream = cfg.stream_config(rules[0], noise_seed)?;
            let cmp = compare_rules(&env, &stream, &rules)?;
            Ok(CompareSeed {
                seed,
                rows: cmp
                    .rows
                    .into_iter()
                    .map(|r| CompareRow {
                        rule: r.rule.kind,
                        alpha: r.rule.alpha,
                        m: r.m,
                        cumulative_regret: r.cumulative_regret,
                        shared_m: r.shared_m,
                        shared_width_violations: r.shared_width_violations,
                        shared_trace: r.shared_trace,
                    })
                    .collect(),
                ordering: cmp.ordering,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompareOutcome {
        command: "compare",
        root_seed: cfg.seed,
        config: cfg.clone(),
        ordering_holds: seeds.iter().all(|s| s.ordering.iter().all(|o| o.holds)),
        seeds,
    })
}

/// Writes `comparison.csv`, `shared_trace.csv` and/or `comparison.json`.
pub fn write_comparison(cmp: &CompareOutcome, out: &Path, formats: Formats) -> Result<Vec<PathBuf>, ExperimentError> {
    let prov = Provenance::new(cmp.command, cmp.root_seed, &cmp.config)?;
    create_dir(out)?;
    let mut written = Vec::new();
    if formats.csv {
        #[derive(Serialize)]
        struct Row {
            rule: RuleKind,
            alpha: f64,
            seed: u64,
            m: usize,
            cumulative_regret: f64,
            shared_m: usize,
            shared_width_violations: usize,
        }
        #[derive(Serialize)]
        struct StepRow {
            rule: RuleKind,
            alpha: f64,
            seed: u64,
            t: u64,
            tau: u64,
            statistic: f64,
            switched: bool,
        }
        let path = out.join("comparison.csv");
        write_csv(&path, &prov, |w| {
            for s in &cmp.seeds {
                for r in &s.rows {
                    w.serialize(Row {
                        rule: r.rule,
                        alpha: r.alpha,
                        seed: s.seed,
                        m: r.m,
                        cumulative_regret: r.cumulative_regret,
                        shared_m: r.shared_m,
                        shared_width_violations: r.shared_width_violations,
                    })?;
                }
            }
            Ok(())
        })?;
        written.push(path);
        let path = out.join("shared_trace.csv");
        write_csv(&path, &prov, |w| {
            for s in &cmp.seeds {
                for r in &s.rows {
                    for st in &r.shared_trace.steps {
                        w.serialize(StepRow {
                            rule: r.rule,
                            alpha: r.alpha,
                            seed: s.seed,
                            t: st.t,
                            tau: st.tau,
                            statistic: st.statistic,
                            switched: st.switched,
                        })?;
                    }
                }
            }
            Ok(())
        })?;
        written.push(path);
    }
    if formats.json {
        let path = out.join("comparison.json");
        write_json(&path, cmp)?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Clone, Serialize)]
pub struct DimSandwich {
    pub dim: usize,
    pub report: SandwichReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimOrdering {
    pub dim: usize,
    pub report: Lemma12Report,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "suite", rename_all = "kebab-case")]
pub enum SuiteReport {
    Claim1 {
        eta: f64,
        lambda: f64,
        c_rho: f64,
        dims: Vec<DimSandwich>,
        violations: usize,
    },
    Lemma12 {
        lambda: f64,
        dims: Vec<DimOrdering>,
        violations: usize,
    },
    Theorem {
        rule: RuleKind,
        alpha: f64,
        noise: NoiseKind,
        c_rho: f64,
        report: TheoremReport,
        violations: usize,
    },
}

impl SuiteReport {
    pub fn violations(&self) -> usize {
        match self {
            SuiteReport::Claim1 { violations, .. }
            | SuiteReport::Lemma12 { violations, .. }
            | SuiteReport::Theorem { violations, .. } => *violations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub root_seed: u64,
    pub config: VerifyConfig,
    pub total_violations: usize,
    pub suites: Vec<SuiteReport>,
}

fn stream_seed(root: u64, suite: usize, stream: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((suite as u64) << 32) | stream as u64);
    rng.random()
}

fn run_suite(root: u64, index: usize, suite: &SuiteConfig) -> Result<SuiteReport, ExperimentError> {
    let seed = stream_seed(root, index, u32::MAX as usize);
    match suite {
        SuiteConfig::Claim1 {
            dims,
            instances,
            lambda,
            rho,
        } => {
            let budget = NoiseBudget::new(rho * lambda, *lambda).map_err(ConfigError::from)?;
            let per_dim = dims
                .par_iter()
                .map(|&d| claim1_suite(d, *instances, &budget, 1.0, seed).map(|report| DimSandwich { dim: d, report }))
                .collect::<Result<Vec<_>, _>>()?;
            let violations = per_dim.iter().map(|r| r.report.failures).sum();
            Ok(SuiteReport::Claim1 {
                eta: budget.eta(),
                lambda: budget.lambda(),
                c_rho: budget.c_rho(),
                dims: per_dim,
                violations,
            })
        }
        SuiteConfig::Lemma12 {
            dims,
            instances,
            lambda,
        } => {
            let per_dim = dims
                .par_iter()
                .map(|&d| lemma12_suite(d, *instances, *lambda, 1.0, seed).map(|report| DimOrdering { dim: d, report }))
                .collect::<Result<Vec<_>, _>>()?;
            let violations = per_dim.iter().map(|r| r.report.failures).sum();
            Ok(SuiteReport::Lemma12 {
                lambda: *lambda,
                dims: per_dim,
                violations,
            })
        }
        SuiteConfig::Theorem {
            streams,
            dims,
            horizon,
            alpha,
            lambda,
            eta,
            rule,
            noise,
            sigma,
            directions,
        } => {
            let budget = NoiseBudget::new(*eta, *lambda).map_err(ConfigError::from)?;
            let rule_v = SwitchRule::new(*rule, *alpha)?;
            let traces = (0..*streams)
                .into_par_iter()
                .map(|s| -> Result<RecordedStream, ExperimentError> {
                    let dim = dims[s % dims.len()];
                    let (xs_seed, noise_seed) = sub_seeds(stream_seed(root, index, s));
                    let model = NoiseModel::new(*noise, *sigma, noise_seed).map_err(ConfigError::from)?;
                    let cfg = StreamConfig::new(dim, *horizon, 1.0, rule_v, model, budget)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(xs_seed);
                    let xs = (0..*horizon).map(|_| sampling::in_ball(&mut rng, dim, 1.0)).collect();
                    Ok(RecordedStream::run(cfg, xs)?)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = verify_theorem_on_traces(
                &traces,
                &TheoremOptions {
                    directions_per_checkpoint: *directions,
                    seed,
                    ..Default::default()
                },
            );
            Ok(SuiteReport::Theorem {
                rule: *rule,
                alpha: *alpha,
                noise: *noise,
                c_rho: budget.c_rho(),
                violations: report.total_violations(),
                report,
            })
        }
    }
}

/// Runs every configured suite; the report counts all violations.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport, ExperimentError> {
    let suites = cfg
        .suites
        .iter()
        .enumerate()
        .map(|(i, s)| run_suite(cfg.seed, i, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyReport {
        command: "verify",
        root_seed: cfg.seed,
        config: cfg.clone(),
        total_violations: suites.iter().map(SuiteReport::violations).sum(),
        suites,
    })
}

/// Writes `verify.json`.
pub fn write_verify(report: &VerifyReport, out: &Path) -> Result<PathBuf, ExperimentError> {
    create_dir(out)?;
    let path = out.join("verify.json");
    write_json(&path, report)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleOutcome {
    pub command: &'static str,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub mode: SearchMode,
    pub found: bool,
    /// Why the search came back empty.
    pub reason: Option<String>,
    pub counterexample: Option<Counterexample>,
}

impl CounterexampleOutcome {
    pub fn to_text(&self) -> String {
        match (&self.counterexample, &self.reason) {
            (Some(c), _) => c.to_text(),
            (None, reason) => format!(
                "counterexample not found within budget (alpha = {}, eta = {}, lambda = {}, mode = {})\n{}\n",
                self.alpha,
                self.eta,
                self.lambda,
                search_mode_str(self.mode),
                reason.as_deref().unwrap_or("")
            ),
        }
    }
}

fn search_mode_str(mode: SearchMode) -> &'static str {
    match mode {
        SearchMode::Analytic => "analytic",
        SearchMode::Grid => "grid",
    }
}

/// Searches, then re-verifies any hit from its raw actions before returning.
pub fn counterexample(
    alpha: f64,
    eta: f64,
    lambda: f64,
    mode: SearchMode,
) -> Result<CounterexampleOutcome, ExperimentError> {
    let budget = NoiseBudget::new(eta, lambda).map_err(ConfigError::from)?;
    SwitchRule::new(RuleKind::Determinant, alpha)?;
    let mut outcome = CounterexampleOutcome {
        command: "counterexample",
        alpha,
        eta,
        lambda,
        mode,
        found: false,
        reason: None,
        counterexample: None,
    };
    match find_counterexample(alpha, &budget, mode) {
        Ok(c) => {
            c.verify()?;
            outcome.found = true;
            outcome.counterexample = Some(c);
        }
        Err(AnalysisError::NoCounterexample { reason }) => outcome.reason = Some(reason),
        Err(e) => return Err(e.into()),
    }
    Ok(outcome)
}

/// Writes `counterexample.json` and `counterexample.txt`.
pub fn write_counterexample(outcome: &CounterexampleOutcome, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    create_dir(out)?;
    let json = out.join("counterexample.json");
    write_json(&json, outcome)?;
    let txt = out.join("counterexample.txt");
    std::fs::write(&txt, outcome.to_text()).map_err(|source| ExperimentError::Io {
        path: txt.clone(),
        source,
    })?;
    Ok(vec![json, txt])
}

// ---------------------------------------------------------------------------
// file helpers

struct Provenance {
    command: &'static str,
    root_seed: u64,
    config_json: String,
}

impl Provenance {
    fn new<C: Serialize>(command: &'static str, root_seed: u64, config: &C) -> Result<Self, ExperimentError> {
        let config_json = serde_json::to_string(config).map_err(|source| ExperimentError::Json {
            path: PathBuf::from("<config>"),
            source,
        })?;
        Ok(Self {
            command,
            root_seed,
            config_json,
        })
    }
}

fn create_dir(out: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(out).map_err(|source| ExperimentError::Io {
        path: out.to_path_buf(),
        source,
    })
}

fn write_csv<F>(path: &Path, prov: &Provenance, body: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> Result<(), csv::Error>,
{
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(f, "# rswitch {}", prov.command).map_err(io)?;
    writeln!(f, "# root_seed: {}", prov.root_seed).map_err(io)?;
    writeln!(f, "# config: {}", prov.config_json).map_err(io)?;
    let mut w = csv::Writer::from_writer(f);
    let wrap = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    body(&mut w).map_err(wrap)?;
    w.flush().map_err(io)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut f = BufWriter::new(File::create(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|source| ExperimentError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(f)
        .and_then(|_| f.flush())
        .map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })
}
