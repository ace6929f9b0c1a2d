//! Experiment drivers shared by the command line and the acceptance suite.
//!
//! Every driver fans work out on a caller-provided thread pool and collects
//! results in input order, so output never depends on the worker count.

use mellow_core::domains::{derive_seed, random_mdp, RandomMdpConfig};
use mellow_core::gvi::{self, FixedPointReport, GviConfig};
use mellow_core::sarsa::{detect_oscillation, run_sarsa, EpisodicEnv, LearningTrace, SarsaConfig, StabilityReport};
use mellow_core::{Mdp, Operator, PolicySpec, QTable, Result};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{fmt_f64, Table};

pub fn thread_pool(parallelism: usize) -> CliResult<ThreadPool> {
    if parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Maps `f` over `items` on `pool`, keeping input order.
pub fn ordered_map<T, U, F>(pool: &ThreadPool, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    pool.install(|| items.par_iter().map(f).collect())
}

fn ordered_try_map<T, U, F>(pool: &ThreadPool, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    ordered_map(pool, items, f).into_iter().collect()
}

/// Column name of a Q-table entry.
pub fn q_column(prefix: &str, (s, a): (usize, usize)) -> String {
    format!("{prefix}q_{s}_{a}")
}

/// Initializations for fixed-point search: a `per_axis` lattice over the
/// non-trivial entries when there are at most two of them, otherwise
/// `per_axis^2` uniform draws. Both cover `box_`.
pub fn search_inits(mdp: &Mdp, box_: (f64, f64), per_axis: usize, seed: u64) -> Result<Vec<QTable>> {
    let entries = mdp.non_trivial_entries();
    if entries.len() <= 2 {
        gvi::init_lattice(mdp, &entries, box_.0, box_.1, per_axis)
    } else {
        Ok(gvi::random_inits(mdp, box_.0, box_.1, per_axis * per_axis, seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamReport {
    pub operator: Operator,
    pub report: FixedPointReport,
}

/// Fixed-point enumeration at every parameter value.
pub fn fixed_point_sweep(
    pool: &ThreadPool,
    mdp: &Mdp,
    operator: &Operator,
    params: &[f64],
    inits: &[QTable],
    config: &GviConfig,
    cluster_tol: f64,
) -> Result<Vec<ParamReport>> {
    let ops = params.iter().map(|&p| operator.with_parameter(p)).collect::<Result<Vec<_>>>()?;
    ordered_try_map(pool, &ops, |op| {
        let report = gvi::enumerate_fixed_points(mdp, op, inits, config, cluster_tol)?;
        Ok(ParamReport { operator: *op, report })
    })
}

pub fn fixed_point_table(mdp: &Mdp, rows: &[ParamReport]) -> Table {
    let entries = mdp.non_trivial_entries();
    let mut header = vec!["param".to_string(), "cluster_id".to_string()];
    header.extend(entries.iter().map(|&e| q_column("", e)));
    header.extend(["basin_count".to_string(), "nonconverged".to_string()]);
    let mut table = Table::new(header);
    for row in rows {
        let param = row.operator.parameter().map_or_else(String::new, fmt_f64);
        for (id, (point, basin)) in row.report.points.iter().zip(&row.report.basin_counts).enumerate() {
            let mut cells = vec![param.clone(), id.to_string()];
            cells.extend(entries.iter().map(|&(s, a)| fmt_f64(point.get(s, a))));
            cells.extend([basin.to_string(), row.report.nonconverged_count.to_string()]);
            table.push(cells);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRow {
    pub operator: Operator,
    pub iterations: usize,
    pub converged: bool,
}

/// GVI from one start for every operator at every parameter value. Rows are
/// parameter-major.
pub fn iteration_sweep(
    pool: &ThreadPool,
    mdp: &Mdp,
    operators: &[Operator],
    params: &[f64],
    q0: &QTable,
    config: &GviConfig,
) -> Result<Vec<IterationRow>> {
    let mut ops = Vec::with_capacity(params.len() * operators.len());
    for &p in params {
        for op in operators {
            ops.push(op.with_parameter(p)?);
        }
    }
    ordered_try_map(pool, &ops, |op| {
        let res = gvi::run_gvi(mdp, q0, op, config)?;
        Ok(IterationRow { operator: *op, iterations: res.iterations, converged: res.converged })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_mdps: usize,
    pub operators: Vec<Operator>,
    pub seed: u64,
    /// Termination run from `Q = 0`.
    pub gvi: GviConfig,
    /// Random starts per MDP for counting fixed points.
    pub fp_inits: usize,
    pub fp_gvi: GviConfig,
    pub mdp: RandomMdpConfig,
}

/// One (MDP, operator) cell of the random study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub mdp_index: usize,
    pub mdp_seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
    pub operator: String,
    pub parameter: Option<f64>,
    pub terminated: bool,
    pub iterations: usize,
    pub n_fixed_points: usize,
    pub fp_nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub operator: String,
    pub parameter: Option<f64>,
    pub n_mdps: usize,
    pub n_no_terminate: usize,
    pub n_multi_fixed_point: usize,
    /// Mean over the runs that terminated; `None` when none did.
    pub mean_iterations: Option<f64>,
}

/// Runs the random-MDP study. Records are ordered by MDP index, then by
/// operator in the order given.
pub fn random_study(pool: &ThreadPool, config: &StudyConfig) -> Result<Vec<StudyRecord>> {
    let indices: Vec<usize> = (0..config.n_mdps).collect();
    let per_mdp = ordered_try_map(pool, &indices, |&i| {
        let mdp_seed = derive_seed(config.seed, i as u64);
        let (mdp, _) = random_mdp(&config.mdp, mdp_seed)?;
        let (lo, hi) = gvi::default_box(&mdp);
        let inits = gvi::random_inits(&mdp, lo, hi, config.fp_inits, derive_seed(mdp_seed, 1));
        let tol = config.fp_gvi.default_cluster_tol(mdp.gamma());
        let q0 = QTable::zeros(&mdp);
        config
            .operators
            .iter()
            .map(|op| {
                let run = gvi::run_gvi(&mdp, &q0, op, &config.gvi)?;
                let fp = gvi::enumerate_fixed_points(&mdp, op, &inits, &config.fp_gvi, tol)?;
                Ok(StudyRecord {
                    mdp_index: i,
                    mdp_seed,
                    n_states: mdp.n_states(),
                    n_actions: mdp.n_actions(),
                    operator: op.name().to_string(),
                    parameter: op.parameter(),
                    terminated: run.converged,
                    iterations: run.iterations,
                    n_fixed_points: fp.n_points(),
                    fp_nonconverged: fp.nonconverged_count,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_mdp.into_iter().flatten().collect())
}

/// Summaries per (operator, parameter), in order of first appearance.
pub fn summarize(records: &[StudyRecord]) -> Vec<StudySummary> {
    let mut keys: Vec<(String, Option<u64>)> = Vec::new();
    for r in records {
        let key = (r.operator.clone(), r.parameter.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(operator, bits)| {
            let rows: Vec<&StudyRecord> =
                records.iter().filter(|r| r.operator == operator && r.parameter.map(f64::to_bits) == bits).collect();
            let done: Vec<usize> = rows.iter().filter(|r| r.terminated).map(|r| r.iterations).collect();
            StudySummary {
                operator,
                parameter: bits.map(f64::from_bits),
                n_mdps: rows.len(),
                n_no_terminate: rows.len() - done.len(),
                n_multi_fixed_point: rows.iter().filter(|r| r.n_fixed_points > 1).count(),
                mean_iterations: (!done.is_empty())
                    .then(|| done.iter().map(|&k| k as f64).sum::<f64>() / done.len() as f64),
            }
        })
        .collect()
}

pub fn study_table(records: &[StudyRecord]) -> Table {
    let mut table = Table::new([
        "mdp_index",
        "mdp_seed",
        "n_states",
        "n_actions",
        "operator",
        "parameter",
        "terminated",
        "iterations",
        "n_fixed_points",
        "fp_nonconverged",
    ]);
    for r in records {
        table.push(vec![
            r.mdp_index.to_string(),
            r.mdp_seed.to_string(),
            r.n_states.to_string(),
            r.n_actions.to_string(),
            r.operator.clone(),
            r.parameter.map_or_else(String::new, fmt_f64),
            r.terminated.to_string(),
            r.iterations.to_string(),
            r.n_fixed_points.to_string(),
            r.fp_nonconverged.to_string(),
        ]);
    }
    table
}

pub fn study_records_from_csv(text: &str) -> CliResult<Vec<StudyRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<StudyRecord>, _>>()
        .map_err(CliError::from)
}

/// One SARSA run per seed, with `template.seed` replaced.
pub fn sarsa_runs<E: EpisodicEnv + Sync + ?Sized>(
    pool: &ThreadPool,
    env: &E,
    q0: &QTable,
    template: &SarsaConfig,
    seeds: &[u64],
) -> Result<Vec<LearningTrace>> {
    ordered_try_map(pool, seeds, |&seed| {
        let cfg = SarsaConfig { seed, ..template.clone() };
        run_sarsa(env, q0, &cfg)
    })
}

pub fn trace_table(trace: &LearningTrace, tracked: &[(usize, usize)]) -> Table {
    let mut header = vec!["episode".to_string(), "return".to_string()];
    header.extend(tracked.iter().map(|&e| q_column("", e)));
    let mut table = Table::new(header);
    for (k, (ret, q)) in trace.per_episode_return.iter().zip(&trace.per_episode_q).enumerate() {
        let mut row = vec![(k + 1).to_string(), fmt_f64(*ret)];
        row.extend(q.iter().map(|&v| fmt_f64(v)));
        table.push(row);
    }
    table
}

/// Per-episode mean over runs, truncated to the shortest run.
pub fn mean_curve_table(traces: &[LearningTrace], tracked: &[(usize, usize)]) -> Table {
    let mut header = vec!["episode".to_string(), "return".to_string()];
    header.extend(tracked.iter().map(|&e| q_column("", e)));
    let mut table = Table::new(header);
    let len = traces.iter().map(LearningTrace::episodes).min().unwrap_or(0);
    let n = traces.len() as f64;
    for k in 0..len {
        let mut row =
            vec![(k + 1).to_string(), fmt_f64(traces.iter().map(|t| t.per_episode_return[k]).sum::<f64>() / n)];
        for j in 0..tracked.len() {
            row.push(fmt_f64(traces.iter().map(|t| t.per_episode_q[k][j]).sum::<f64>() / n));
        }
        table.push(row);
    }
    table
}

pub fn stability_reports(traces: &[LearningTrace], window: usize, tau: f64) -> Result<Vec<StabilityReport>> {
    traces.iter().map(|t| detect_oscillation(t, window, tau)).collect()
}

pub fn stability_table(seeds: &[u64], reports: &[StabilityReport], tracked: &[(usize, usize)]) -> Table {
    let mut header = vec!["seed".to_string(), "oscillating".to_string()];
    header.extend(tracked.iter().map(|&e| q_column("std_", e)));
    let mut table = Table::new(header);
    for (seed, rep) in seeds.iter().zip(reports) {
        let mut row = vec![seed.to_string(), rep.oscillating.to_string()];
        row.extend(rep.window_std.iter().map(|&v| fmt_f64(v)));
        table.push(row);
    }
    table
}

/// Outcome of one (policy, step size) setting averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub policy: PolicySpec,
    pub alpha: f64,
    /// Total reward per run, averaged over seeds.
    pub mean_total_reward: f64,
    pub mean_reward_per_step: f64,
    /// Seeds whose run contains an episode returning at least `target_return`.
    pub seeds_reaching_target: usize,
    pub n_seeds: usize,
}

/// Runs every policy at every step size for every seed.
#[allow(clippy::too_many_arguments)]
pub fn policy_comparison<E: EpisodicEnv + Sync + ?Sized>(
    pool: &ThreadPool,
    env: &E,
    q0: &QTable,
    template: &SarsaConfig,
    policies: &[PolicySpec],
    alphas: &[f64],
    seeds: &[u64],
    target_return: f64,
) -> Result<Vec<ComparisonRow>> {
    let mut jobs = Vec::new();
    for &policy in policies {
        for &alpha in alphas {
            for &seed in seeds {
                jobs.push(SarsaConfig::new(policy, alpha, template.budget, seed).tracking(&template.tracked));
            }
        }
    }
    let runs = ordered_try_map(pool, &jobs, |cfg| {
        let cfg = SarsaConfig { max_episode_steps: template.max_episode_steps, ..cfg.clone() };
        let t = run_sarsa(env, q0, &cfg)?;
        let hit = t.per_episode_return.iter().any(|&r| r >= target_return);
        Ok((t.total_reward, t.reward_per_step(), hit))
    })?;
    let n = seeds.len().max(1);
    Ok(jobs
        .chunks(n)
        .zip(runs.chunks(n))
        .map(|(cfgs, outs)| ComparisonRow {
            policy: cfgs[0].policy,
            alpha: match cfgs[0].step_size {
                mellow_core::sarsa::StepSize::Constant(a) => a,
                mellow_core::sarsa::StepSize::Decaying { alpha0, .. } => alpha0,
            },
            mean_total_reward: outs.iter().map(|o| o.0).sum::<f64>() / outs.len() as f64,
            mean_reward_per_step: outs.iter().map(|o| o.1).sum::<f64>() / outs.len() as f64,
            seeds_reaching_target: outs.iter().filter(|o| o.2).count(),
            n_seeds: outs.len(),
        })
        .collect())
}

/// Best row per policy family by mean total reward, with the step size
/// optimized per parameter value. Families appear in input order.
pub fn best_per_family(rows: &[ComparisonRow]) -> Vec<&ComparisonRow> {
    let mut best: Vec<&ComparisonRow> = Vec::new();
    for row in rows {
        match best.iter_mut().find(|b| b.policy.name() == row.policy.name()) {
            Some(b) if row.mean_total_reward > b.mean_total_reward => *b = row,
            Some(_) => {}
            None => best.push(row),
        }
    }
    best
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut table = Table::new([
        "policy",
        "param",
        "alpha",
        "mean_total_reward",
        "mean_reward_per_step",
        "seeds_reaching_target",
        "n_seeds",
    ]);
    for r in rows {
        table.push(vec![
            r.policy.name().to_string(),
            fmt_f64(r.policy.parameter()),
            fmt_f64(r.alpha),
            fmt_f64(r.mean_total_reward),
            fmt_f64(r.mean_reward_per_step),
            r.seeds_reaching_target.to_string(),
            r.n_seeds.to_string(),
        ]);
    }
    table
}

pub fn field_table(samples: &[gvi::FieldSample]) -> Table {
    let mut table = Table::new(["q1", "q2", "dq1", "dq2"]);
    for s in samples {
        table.push(vec![fmt_f64(s.point.0), fmt_f64(s.point.1), fmt_f64(s.delta.0), fmt_f64(s.delta.1)]);
    }
    table
}

/// The two entries a vector field is drawn over.
pub fn field_axes(mdp: &Mdp) -> CliResult<[(usize, usize); 2]> {
    match mdp.non_trivial_entries().as_slice() {
        &[a, b] => Ok([a, b]),
        other => Err(CliError::Unsupported(format!(
            "vector fields need exactly two non-trivial Q entries, this MDP has {}",
            other.len()
        ))),
    }
}
