//! Generalized value iteration: value iteration with the `max` backup
//! replaced by any [`Operator`].
//!
//! Each backup is `Q(s, a) <- sum_{s'} P(s, a, s') [R(s, a, s') + gamma *
//! op(Q(s', .))]`, with terminal states contributing zero continuation value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CLUSTER_TOL_FACTOR, GVI_CAP, GVI_DELTA};
use crate::{Error, Mdp, Operator, QTable, Result};

/// Order in which entries are updated within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepOrder {
    /// Every entry reads the pre-sweep table.
    #[default]
    Synchronous,
    /// Entries are overwritten one at a time in state-major order and later
    /// entries read the updated values.
    InPlace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GviConfig {
    /// Stop once a sweep changes no entry by `delta` or more.
    pub delta: f64,
    /// Maximum number of sweeps.
    pub cap: usize,
    pub order: SweepOrder,
}

impl Default for GviConfig {
    fn default() -> Self {
        Self { delta: GVI_DELTA, cap: GVI_CAP, order: SweepOrder::Synchronous }
    }
}

impl GviConfig {
    pub fn new(delta: f64, cap: usize) -> Self {
        Self { delta, cap, ..Self::default() }
    }

    pub fn with_order(self, order: SweepOrder) -> Self {
        Self { order, ..self }
    }

    /// Clustering threshold matching this stopping threshold on an MDP with
    /// discount `gamma`. A run stopped at `delta` can sit up to roughly
    /// `delta / (1 - gamma)` from the point it is approaching.
    pub fn default_cluster_tol(&self, gamma: f64) -> f64 {
        CLUSTER_TOL_FACTOR * self.delta / (1.0 - gamma)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter { name: "delta", value: self.delta });
        }
        if self.cap == 0 {
            return Err(Error::InvalidParameter { name: "cap", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GviResult {
    pub final_q: QTable,
    /// Sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Infinity-norm change of each sweep.
    pub diff_trace: Vec<f64>,
}

fn check_shape(mdp: &Mdp, q: &QTable) -> Result<()> {
    if q.matches(mdp) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "Q-table is {}x{}, MDP is {}x{}",
            q.n_states(),
            q.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )))
    }
}

/// `op(Q(s, .))` for every state, zero for terminal states.
pub fn state_values(mdp: &Mdp, q: &QTable, op: &Operator) -> Vec<f64> {
    (0..mdp.n_states()).map(|s| if mdp.is_terminal(s) { 0.0 } else { op.apply(q.row(s)) }).collect()
}

/// One backup of `(s, a)` given per-state continuation values.
pub fn backup(mdp: &Mdp, values: &[f64], s: usize, a: usize) -> f64 {
    let gamma = mdp.gamma();
    mdp.transition_row(s, a)
        .iter()
        .zip(mdp.reward_row(s, a))
        .zip(values)
        .filter(|((&p, _), _)| p != 0.0)
        .map(|((&p, &r), &v)| p * (r + gamma * v))
        .sum()
}

/// The GVI backup of a single entry against table `q`.
pub fn backup_entry(mdp: &Mdp, q: &QTable, op: &Operator, s: usize, a: usize) -> Result<f64> {
    check_shape(mdp, q)?;
    mdp.check_pair(s, a)?;
    if mdp.is_terminal(s) {
        return Ok(0.0);
    }
    Ok(backup(mdp, &state_values(mdp, q, op), s, a))
}

/// One synchronous sweep. Returns the new table and the infinity-norm
/// change.
pub fn gvi_sweep(mdp: &Mdp, q: &QTable, op: &Operator) -> Result<(QTable, f64)> {
    check_shape(mdp, q)?;
    let values = state_values(mdp, q, op);
    let mut next = QTable::zeros(mdp);
    let mut diff = 0.0_f64;
    for s in (0..mdp.n_states()).filter(|&s| !mdp.is_terminal(s)) {
        for a in 0..mdp.n_actions() {
            let v = backup(mdp, &values, s, a);
            if !v.is_finite() {
                return Err(Error::NonFiniteBackup { state: s, action: a });
            }
            diff = diff.max((v - q.get(s, a)).abs());
            next.set(s, a, v);
        }
    }
    for &t in mdp.terminals() {
        for a in 0..mdp.n_actions() {
            diff = diff.max(q.get(t, a).abs());
        }
    }
    Ok((next, diff))
}

/// One in-place sweep; each entry reads the values written before it.
pub fn gvi_sweep_in_place(mdp: &Mdp, q: &mut QTable, op: &Operator) -> Result<f64> {
    check_shape(mdp, q)?;
    let mut values = state_values(mdp, q, op);
    let mut diff = 0.0_f64;
    for s in 0..mdp.n_states() {
        if mdp.is_terminal(s) {
            for a in 0..mdp.n_actions() {
                diff = diff.max(q.get(s, a).abs());
                q.set(s, a, 0.0);
            }
            continue;
        }
        for a in 0..mdp.n_actions() {
            let v = backup(mdp, &values, s, a);
            if !v.is_finite() {
                return Err(Error::NonFiniteBackup { state: s, action: a });
            }
            diff = diff.max((v - q.get(s, a)).abs());
            q.set(s, a, v);
            values[s] = op.apply(q.row(s));
        }
    }
    Ok(diff)
}

/// Repeats sweeps until one changes no entry by `delta` or more, or `cap`
/// sweeps have run.
pub fn run_gvi(mdp: &Mdp, q0: &QTable, op: &Operator, config: &GviConfig) -> Result<GviResult> {
    config.validate()?;
    op.validate()?;
    check_shape(mdp, q0)?;
    let mut q = q0.clone();
    let mut diff_trace = Vec::new();
    let mut converged = false;
    while diff_trace.len() < config.cap {
        let diff = match config.order {
            SweepOrder::Synchronous => {
                let (next, diff) = gvi_sweep(mdp, &q, op)?;
                q = next;
                diff
            }
            SweepOrder::InPlace => gvi_sweep_in_place(mdp, &mut q, op)?,
        };
        diff_trace.push(diff);
        if diff < config.delta {
            converged = true;
            break;
        }
    }
    Ok(GviResult { final_q: q, iterations: diff_trace.len(), converged, diff_trace })
}

/// Distinct GVI fixed points reached from a set of initializations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedPointReport {
    /// Cluster centroids, ordered by the first initialization that reached
    /// each cluster.
    pub points: Vec<QTable>,
    pub basin_counts: Vec<usize>,
    pub nonconverged_count: usize,
}

impl FixedPointReport {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_initializations(&self) -> usize {
        self.basin_counts.iter().sum::<usize>() + self.nonconverged_count
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering of the converged endpoints in `results` with an
/// infinity-norm threshold. Clusters are reported in order of their first
/// member, so the report depends only on the order of `results`.
pub fn cluster_endpoints(results: &[GviResult], cluster_tol: f64) -> FixedPointReport {
    let converged: Vec<&QTable> = results.iter().filter(|r| r.converged).map(|r| &r.final_q).collect();
    let nonconverged_count = results.len() - converged.len();
    let m = converged.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            if converged[i].max_abs_diff(converged[j]) <= cluster_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut roots: Vec<usize> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (i, q) in converged.iter().enumerate() {
        let root = find(&mut parent, i);
        let k = match roots.iter().position(|&r| r == root) {
            Some(k) => k,
            None => {
                roots.push(root);
                sums.push(vec![0.0; q.values().len()]);
                counts.push(0);
                roots.len() - 1
            }
        };
        for (acc, v) in sums[k].iter_mut().zip(q.values()) {
            *acc += v;
        }
        counts[k] += 1;
    }

    let points = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &c)| {
            let first = converged[0];
            let values = sum.into_iter().map(|v| v / c as f64).collect();
            QTable::from_shape(first.n_states(), first.n_actions(), values).expect("shape preserved")
        })
        .collect();
    FixedPointReport { points, basin_counts: counts, nonconverged_count }
}

/// Runs GVI from every initialization and clusters the endpoints.
pub fn enumerate_fixed_points(
    mdp: &Mdp,
    op: &Operator,
    inits: &[QTable],
    config: &GviConfig,
    cluster_tol: f64,
) -> Result<FixedPointReport> {
    if inits.is_empty() {
        return Err(Error::Dimension("initialization set is empty".into()));
    }
    let results = inits.iter().map(|q0| run_gvi(mdp, q0, op, config)).collect::<Result<Vec<_>>>()?;
    Ok(cluster_endpoints(&results, cluster_tol))
}

/// Default search box for initial values, `[R_min, R_max] / (1 - gamma)`.
/// With terminal states the box is widened to contain zero, the value of an
/// episode that ends immediately.
pub fn default_box(mdp: &Mdp) -> (f64, f64) {
    let (mut lo, mut hi) = mdp.reward_bounds();
    let scale = 1.0 / (1.0 - mdp.gamma());
    (lo, hi) = (lo * scale, hi * scale);
    if !mdp.terminals().is_empty() {
        (lo, hi) = (lo.min(0.0), hi.max(0.0));
    }
    (lo, hi)
}

/// `per_axis` evenly spaced points over `[lo, hi]`; a single point sits at
/// the centre.
pub fn linspace(lo: f64, hi: f64, per_axis: usize) -> Vec<f64> {
    match per_axis {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        k => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Uniform lattice over the listed entries with every other entry at zero.
/// The first entry varies slowest.
pub fn init_lattice(mdp: &Mdp, entries: &[(usize, usize)], lo: f64, hi: f64, per_axis: usize) -> Result<Vec<QTable>> {
    for &(s, a) in entries {
        mdp.check_pair(s, a)?;
    }
    let axis = linspace(lo, hi, per_axis);
    let total = axis.len().pow(entries.len() as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut q = QTable::zeros(mdp);
        for &(s, a) in entries.iter().rev() {
            q.set(s, a, axis[code % axis.len()]);
            code /= axis.len();
        }
        out.push(QTable::from_values(mdp, q.values().to_vec())?);
    }
    Ok(out)
}

/// `count` tables with every non-terminal entry drawn uniformly from
/// `[lo, hi]`.
pub fn random_inits(mdp: &Mdp, lo: f64, hi: f64, count: usize, seed: u64) -> Vec<QTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mdp.n_states() * mdp.n_actions();
    (0..count)
        .map(|_| {
            let values = (0..n).map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo }).collect();
            QTable::from_values(mdp, values).expect("finite values of the right shape")
        })
        .collect()
}

/// Change of two tracked entries produced by one synchronous sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldSample {
    pub point: (f64, f64),
    pub delta: (f64, f64),
}

/// Samples the one-sweep update of two entries at each point, holding every
/// other entry at zero.
pub fn vector_field(
    mdp: &Mdp,
    op: &Operator,
    axes: [(usize, usize); 2],
    points: &[(f64, f64)],
) -> Result<Vec<FieldSample>> {
    for &(s, a) in &axes {
        mdp.check_pair(s, a)?;
    }
    op.validate()?;
    let [(s1, a1), (s2, a2)] = axes;
    points
        .iter()
        .map(|&(x, y)| {
            let mut q = QTable::zeros(mdp);
            q.set(s1, a1, x);
            q.set(s2, a2, y);
            let (next, _) = gvi_sweep(mdp, &q, op)?;
            Ok(FieldSample { point: (x, y), delta: (next.get(s1, a1) - x, next.get(s2, a2) - y) })
        })
        .collect()
}

/// Row-major `resolution x resolution` grid over a box; the second
/// coordinate varies fastest.
pub fn grid_points(lo: (f64, f64), hi: (f64, f64), resolution: usize) -> Vec<(f64, f64)> {
    let xs = linspace(lo.0, hi.0, resolution);
    let ys = linspace(lo.1, hi.1, resolution);
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect()
}
