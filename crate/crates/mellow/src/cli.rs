//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mellow_core::config::{
    FIXED_POINT_CAP, FIXED_POINT_DELTA, GVI_CAP, GVI_DELTA, OSCILLATION_TAU, OSCILLATION_WINDOW, RANDOM_STUDY_GAMMA,
    RANDOM_STUDY_INITS,
};
use mellow_core::domains::{example_mdp, random_mdp, RandomMdpConfig, TaxiConfig, TaxiEnv, EXAMPLE_TRACKED};
use mellow_core::gvi::{self, GviConfig, SweepOrder};
use mellow_core::sarsa::{Budget, EpisodicEnv, MdpEnv, SarsaConfig};
use mellow_core::{Mdp, Operator, PolicySpec, QTable};
use serde::Serialize;

use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};
use crate::experiments as ex;
use crate::formats::{mdp_to_json, read_mdp, write_json, write_text};

#[derive(Debug, Parser)]
#[command(name = "mellow", version, about = "Softmax operators in planning and learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GVI stopping threshold (command-specific default).
    #[arg(long)]
    pub delta: Option<f64>,
    /// GVI sweep cap (command-specific default).
    #[arg(long)]
    pub cap: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
}

impl Common {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Order {
    Sync,
    InPlace,
}

impl From<Order> for SweepOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Sync => SweepOrder::Synchronous,
            Order::InPlace => SweepOrder::InPlace,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MdpKind {
    Example,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run generalized value iteration once.
    Gvi {
        /// MDP JSON file, or `example`.
        #[arg(long)]
        mdp: String,
        #[arg(long)]
        operator: String,
        #[arg(long)]
        param: Option<f64>,
        #[arg(long, value_enum, default_value = "sync")]
        order: Order,
        /// Initial Q values, comma separated in state-major order (default zeros).
        #[arg(long)]
        init: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate fixed points from a grid of starts over a parameter sweep.
    FixedPoints {
        #[arg(long)]
        mdp: String,
        #[arg(long)]
        operator: String,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long)]
        params: String,
        /// Starts per axis.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Start box `lo,hi` (default from the reward bounds).
        #[arg(long = "box")]
        box_: Option<String>,
        #[arg(long)]
        cluster_tol: Option<f64>,
        #[arg(long, value_enum, default_value = "sync")]
        order: Order,
        #[command(flatten)]
        common: Common,
    },
    /// Termination and fixed-point statistics over random MDPs.
    RandomStudy {
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Comma-separated operator names.
        #[arg(long, default_value = "boltz,mellowmax")]
        operators: String,
        /// Parameter shared by every parameterized operator.
        #[arg(long)]
        param: f64,
        #[arg(long, default_value_t = RANDOM_STUDY_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = RANDOM_STUDY_INITS)]
        fp_inits: usize,
        #[arg(long, default_value_t = FIXED_POINT_DELTA)]
        fp_delta: f64,
        #[arg(long, default_value_t = FIXED_POINT_CAP)]
        fp_cap: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run SARSA with one or more policies.
    Sarsa {
        /// `example`, `taxi`, or an MDP JSON file.
        #[arg(long)]
        domain: String,
        /// Taxi layout file (default built-in grid).
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Comma-separated policy names.
        #[arg(long)]
        policy: String,
        /// Comma-separated policy parameters, shared by every policy or
        /// one `;`-separated group per policy.
        #[arg(long)]
        param: String,
        /// Comma-separated step sizes.
        #[arg(long, default_value = "0.1")]
        alpha: String,
        #[arg(long, conflicts_with = "steps")]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        /// Number of runs; run k uses seed `seed + k`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Start state for MDP domains.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = OSCILLATION_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = OSCILLATION_TAU)]
        tau: f64,
        #[command(flatten)]
        common: Common,
    },
    /// One-sweep update field over the two non-trivial Q entries.
    VectorField {
        #[arg(long)]
        mdp: String,
        #[arg(long)]
        operator: String,
        #[arg(long)]
        param: Option<f64>,
        /// `x0,x1,y0,y1` (default from the reward bounds).
        #[arg(long = "box")]
        box_: Option<String>,
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Write an MDP document (to stdout unless --out is given).
    MakeMdp {
        #[arg(value_enum)]
        kind: MdpKind,
        #[arg(long, default_value_t = RANDOM_STUDY_GAMMA)]
        gamma: f64,
        #[command(flatten)]
        common: Common,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_mdp(source: &str) -> CliResult<Mdp> {
    if source == "example" {
        Ok(example_mdp())
    } else {
        read_mdp(Path::new(source))
    }
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad {what} value '{t}'")))).collect()
}

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn parse_params(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let [lo, hi, step] = [lo, hi, step].map(|t| t.trim().parse::<f64>());
            let (lo, hi, step) = match (lo, hi, step) {
                (Ok(a), Ok(b), Ok(c)) if c > 0.0 && b >= a => (a, b, c),
                _ => return Err(usage(format!("bad parameter range '{text}'"))),
            };
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| lo + step * i as f64).collect())
        }
        [_] => parse_list(text, "parameter"),
        _ => Err(usage(format!("bad parameter range '{text}'"))),
    }
}

fn parse_box(text: Option<&str>, n: usize, default: &[f64]) -> CliResult<Vec<f64>> {
    match text {
        None => Ok(default.to_vec()),
        Some(t) => {
            let v = parse_list(t, "box")?;
            if v.len() != n {
                return Err(usage(format!("--box needs {n} numbers")));
            }
            Ok(v)
        }
    }
}

fn operator(name: &str, param: Option<f64>) -> CliResult<Operator> {
    Operator::from_name(name, param).map_err(|e| match (param, e) {
        (None, mellow_core::Error::InvalidParameter { name: "operator", .. }) | (Some(_), _) => {
            usage(format!("operator '{name}': unknown name or bad parameter"))
        }
        (None, _) => usage(format!("operator '{name}' needs --param")),
    })
}

fn gvi_config(common: &Common, delta: f64, cap: usize, order: Order) -> GviConfig {
    GviConfig::new(common.delta.unwrap_or(delta), common.cap.unwrap_or(cap)).with_order(order.into())
}

#[derive(Serialize)]
struct GviOutput<'a> {
    operator: Operator,
    delta: f64,
    cap: usize,
    result: &'a gvi::GviResult,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gvi { mdp, operator: name, param, order, init, common } => {
            let mdp = load_mdp(&mdp)?;
            let op = operator(&name, param)?;
            let cfg = gvi_config(&common, GVI_DELTA, GVI_CAP, order);
            let q0 = match init {
                None => QTable::zeros(&mdp),
                Some(text) => QTable::from_values(&mdp, parse_list(&text, "init")?)?,
            };
            let res = gvi::run_gvi(&mdp, &q0, &op, &cfg)?;
            let dir = common.out_dir();
            write_json(
                &dir.join("gvi.json"),
                &GviOutput { operator: op, delta: cfg.delta, cap: cfg.cap, result: &res },
            )?;
            let mut table = crate::formats::Table::new(["iteration", "diff"]);
            for (k, d) in res.diff_trace.iter().enumerate() {
                table.push(vec![(k + 1).to_string(), crate::formats::fmt_f64(*d)]);
            }
            table.write(&dir.join("gvi_sweeps.csv"))?;
            println!("{}: converged={} iterations={}", op.name(), res.converged, res.iterations);
        }
        Command::FixedPoints { mdp, operator: name, params, grid, box_, cluster_tol, order, common } => {
            let mdp = load_mdp(&mdp)?;
            let params = parse_params(&params)?;
            let op = operator(&name, params.first().copied())?;
            let cfg = gvi_config(&common, FIXED_POINT_DELTA, FIXED_POINT_CAP, order);
            let (lo, hi) = gvi::default_box(&mdp);
            let b = parse_box(box_.as_deref(), 2, &[lo, hi])?;
            let inits = ex::search_inits(&mdp, (b[0], b[1]), grid, common.seed)?;
            if inits.is_empty() {
                return Err(usage("--grid must be at least 1"));
            }
            let tol = cluster_tol.unwrap_or_else(|| cfg.default_cluster_tol(mdp.gamma()));
            let pool = ex::thread_pool(common.parallelism)?;
            let rows = ex::fixed_point_sweep(&pool, &mdp, &op, &params, &inits, &cfg, tol)?;
            let dir = common.out_dir();
            ex::fixed_point_table(&mdp, &rows).write(&dir.join("fixed_points.csv"))?;
            write_json(&dir.join("fixed_points.json"), &rows)?;
            for r in &rows {
                println!(
                    "{} {:?}: {} fixed point(s), {} non-converged",
                    r.operator.name(),
                    r.operator.parameter(),
                    r.report.n_points(),
                    r.report.nonconverged_count
                );
            }
        }
        Command::RandomStudy { n, operators, param, gamma, fp_inits, fp_delta, fp_cap, common } => {
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let ops =
                operators.split(',').map(|name| operator(name.trim(), Some(param))).collect::<CliResult<Vec<_>>>()?;
            let config = ex::StudyConfig {
                n_mdps: n,
                operators: ops,
                seed: common.seed,
                gvi: gvi_config(&common, GVI_DELTA, GVI_CAP, Order::Sync),
                fp_inits,
                fp_gvi: GviConfig::new(fp_delta, fp_cap),
                mdp: RandomMdpConfig { gamma, ..RandomMdpConfig::default() },
            };
            let pool = ex::thread_pool(common.parallelism)?;
            let records = ex::random_study(&pool, &config)?;
            let summary = ex::summarize(&records);
            let dir = common.out_dir();
            ex::study_table(&records).write(&dir.join("study_records.csv"))?;
            write_json(&dir.join("study_summary.json"), &summary)?;
            for s in &summary {
                println!(
                    "{} {:?}: no-terminate {}/{}, multiple fixed points {}/{}, mean iterations {:?}",
                    s.operator,
                    s.parameter,
                    s.n_no_terminate,
                    s.n_mdps,
                    s.n_multi_fixed_point,
                    s.n_mdps,
                    s.mean_iterations
                );
            }
        }
        Command::Sarsa { domain, layout, policy, param, alpha, episodes, steps, seeds, start, window, tau, common } => {
            let budget = match (episodes, steps) {
                (Some(e), None) => Budget::Episodes(e),
                (None, Some(s)) => Budget::Steps(s),
                (None, None) => Budget::Episodes(5000),
                (Some(_), Some(_)) => return Err(usage("give --episodes or --steps, not both")),
            };
            let names: Vec<&str> = policy.split(',').map(str::trim).collect();
            let groups = param.split(';').map(|g| parse_list(g, "param")).collect::<CliResult<Vec<_>>>()?;
            if groups.len() != 1 && groups.len() != names.len() {
                return Err(usage(format!("{} --param groups for {} policies", groups.len(), names.len())));
            }
            let mut policies = Vec::new();
            for (i, name) in names.iter().enumerate() {
                for &p in &groups[if groups.len() == 1 { 0 } else { i }] {
                    policies.push(PolicySpec::from_name(name, p).map_err(|e| usage(format!("policy '{name}': {e}")))?);
                }
            }
            let alphas = parse_list(&alpha, "alpha")?;
            let seeds: Vec<u64> = (0..seeds).map(|k| common.seed + k).collect();
            let spec = SarsaSpec { policies, alphas, budget, seeds, window, tau, out: common.out_dir() };
            let pool = ex::thread_pool(common.parallelism)?;
            match domain.as_str() {
                "taxi" => {
                    let mut cfg = TaxiConfig::default();
                    if let Some(path) = layout {
                        cfg.layout = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    }
                    let env = TaxiEnv::new(&cfg)?;
                    let top = cfg.delivery_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    run_sarsa_command(&pool, &env, &[], top, &spec)?;
                }
                source => {
                    let mdp = load_mdp(source)?;
                    let tracked =
                        if source == "example" { EXAMPLE_TRACKED.to_vec() } else { mdp.non_trivial_entries() };
                    let env = MdpEnv::new(&mdp, start)?;
                    run_sarsa_command(&pool, &env, &tracked, f64::INFINITY, &spec)?;
                }
            }
        }
        Command::VectorField { mdp, operator: name, param, box_, resolution, common } => {
            let mdp = load_mdp(&mdp)?;
            let op = operator(&name, param)?;
            let axes = ex::field_axes(&mdp)?;
            if resolution == 0 {
                return Err(usage("--resolution must be at least 1"));
            }
            let (lo, hi) = gvi::default_box(&mdp);
            let b = parse_box(box_.as_deref(), 4, &[lo, hi, lo, hi])?;
            let points = gvi::grid_points((b[0], b[2]), (b[1], b[3]), resolution);
            let samples = gvi::vector_field(&mdp, &op, axes, &points)?;
            ex::field_table(&samples).write(&common.out_dir().join("field.csv"))?;
            println!("{} samples", samples.len());
        }
        Command::MakeMdp { kind, gamma, common } => {
            let mdp = match kind {
                MdpKind::Example => example_mdp(),
                MdpKind::Random => random_mdp(&RandomMdpConfig { gamma, ..RandomMdpConfig::default() }, common.seed)?.0,
            };
            let text = mdp_to_json(&mdp) + "\n";
            match &common.out {
                Some(dir) => write_text(&dir.join("mdp.json"), &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

struct SarsaSpec {
    policies: Vec<PolicySpec>,
    alphas: Vec<f64>,
    budget: Budget,
    seeds: Vec<u64>,
    window: usize,
    tau: f64,
    out: PathBuf,
}

fn run_sarsa_command<E: EpisodicEnv + Sync>(
    pool: &rayon::ThreadPool,
    env: &E,
    tracked: &[(usize, usize)],
    target_return: f64,
    spec: &SarsaSpec,
) -> CliResult<()> {
    let q0 = QTable::zeros_with_shape(env.n_states(), env.n_actions());
    if let ([policy], [alpha]) = (spec.policies.as_slice(), spec.alphas.as_slice()) {
        let template = SarsaConfig::new(*policy, *alpha, spec.budget, 0).tracking(tracked);
        let traces = ex::sarsa_runs(pool, env, &q0, &template, &spec.seeds)?;
        for (seed, t) in spec.seeds.iter().zip(&traces) {
            ex::trace_table(t, tracked).write(&spec.out.join(format!("trace_seed{seed}.csv")))?;
            println!("seed {seed}: {} episodes, total reward {}", t.episodes(), t.total_reward);
        }
        ex::mean_curve_table(&traces, tracked).write(&spec.out.join("mean_curve.csv"))?;
        if !tracked.is_empty() {
            let reports = ex::stability_reports(&traces, spec.window, spec.tau)?;
            ex::stability_table(&spec.seeds, &reports, tracked).write(&spec.out.join("stability.csv"))?;
            for (seed, r) in spec.seeds.iter().zip(&reports) {
                println!("seed {seed}: oscillating={} window std {:?}", r.oscillating, r.window_std);
            }
        }
    } else {
        let template = SarsaConfig::new(spec.policies[0], spec.alphas[0], spec.budget, 0).tracking(tracked);
        let rows =
            ex::policy_comparison(pool, env, &q0, &template, &spec.policies, &spec.alphas, &spec.seeds, target_return)?;
        ex::comparison_table(&rows).write(&spec.out.join("comparison.csv"))?;
        for best in ex::best_per_family(&rows) {
            println!(
                "{} best: param {} alpha {} mean total reward {}",
                best.policy.name(),
                best.policy.parameter(),
                best.alpha,
                best.mean_total_reward
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_ranges() {
        assert_eq!(parse_params("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_params("16.55").unwrap(), vec![16.55]);
        assert_eq!(parse_params("1, 3").unwrap(), vec![1.0, 3.0]);
        assert_eq!(parse_params("16:17:0.1").unwrap().len(), 11);
        assert!(parse_params("2:1:0.1").is_err());
        assert!(parse_params("a").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
