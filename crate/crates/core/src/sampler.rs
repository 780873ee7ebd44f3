//! The SPDE sampler in spectral coordinates and the two Monte-Carlo oracles
//! (forward rejection bridges and Girsanov importance sampling).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{ess, MomentAccumulator};
use crate::drift::{eval_drift, log_density_u};
use crate::error::{invalid, Error, Result};
use crate::field::ForceField;
use crate::gaussian::BridgeGaussian;
use crate::grid::{Path, PathGrid};
use crate::operator::{
    assemble_operator, eigendecompose, projection_weight, solve_mean_path, MeanPath, ProjectionKind,
    SpectralBasis,
};
use crate::problem::BridgeProblem;

/// Number of leading modes whose coefficient series are tracked.
pub const TRACKED_MODES: usize = 20;
/// Side of the node subgrid on which covariances are tracked.
pub const PROBE_COUNT: usize = 10;

const REJECTION_STREAMS: u64 = 1 << 40;
const IMPORTANCE_STREAMS: u64 = 2 << 40;
const ORACLE_BLOCK: usize = 1024;

/// Independent, reproducible random stream `(seed, index)`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub dtau: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_modes: usize,
    pub galerkin_fejer: bool,
    pub seed: u64,
    /// Independent chains, merged in index order.
    pub chains: usize,
}

impl SamplerConfig {
    /// Defaults for a grid: all modes, burn-in at 20% of the steps.
    pub fn for_grid(grid: &PathGrid, n_steps: usize) -> Self {
        Self {
            dtau: 1e-3,
            n_steps,
            burn_in: n_steps / 5,
            thin: 1,
            n_modes: grid.n_interior(),
            galerkin_fejer: false,
            seed: 0,
            chains: 1,
        }
    }

    pub fn validate(&self, grid: &PathGrid) -> Result<()> {
        if !(self.dtau.is_finite() && self.dtau > 0.0) {
            return Err(invalid("dtau", format!("must be positive, got {}", self.dtau)));
        }
        if self.burn_in >= self.n_steps {
            return Err(invalid(
                "burn_in",
                format!("must be below n_steps = {}, got {}", self.n_steps, self.burn_in),
            ));
        }
        if self.thin == 0 {
            return Err(invalid("thin", "must be at least 1"));
        }
        if self.n_modes == 0 || self.n_modes > grid.n_interior() {
            return Err(invalid(
                "n_modes",
                format!("must be in 1..={}, got {}", grid.n_interior(), self.n_modes),
            ));
        }
        if self.chains == 0 {
            return Err(invalid("chains", "must be at least 1"));
        }
        Ok(())
    }

    /// Recorded samples per chain.
    pub fn n_recorded(&self) -> usize {
        (self.n_steps - self.burn_in) / self.thin
    }
}

/// Spectral coefficients of `x - x̄` (`n_modes x d`), algorithmic time and stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub z: DMatrix<f64>,
    pub tau: f64,
    pub steps: usize,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(z: DMatrix<f64>, rng: ChaCha8Rng) -> Self {
        Self {
            z,
            tau: 0.0,
            steps: 0,
            rng,
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Exponential-integrator stepper: for each mode
/// `z ← e^{-λ dτ} z + λ⁻¹ (1 - e^{-λ dτ}) N_k + sqrt((1 - e^{-2λ dτ}) / λ) ξ`.
pub struct SpectralSampler<'a> {
    basis: &'a SpectralBasis,
    mean: &'a MeanPath,
    field: &'a dyn ForceField,
    mass: f64,
    dim: usize,
    n_modes: usize,
    noise_width: usize,
    dtau: f64,
    decay: Vec<f64>,
    gain: Vec<f64>,
    noise: Vec<f64>,
    fejer: Option<Vec<f64>>,
}

impl<'a> SpectralSampler<'a> {
    pub fn new(
        basis: &'a SpectralBasis,
        mean: &'a MeanPath,
        field: &'a dyn ForceField,
        mass: f64,
        cfg: &SamplerConfig,
    ) -> Result<Self> {
        cfg.validate(basis.grid())?;
        let n = cfg.n_modes;
        let lambdas = &basis.lambdas()[..n];
        let decay = lambdas.iter().map(|l| (-l * cfg.dtau).exp()).collect();
        // -expm1 keeps the small-λdτ limits accurate
        let gain = lambdas.iter().map(|l| -(-l * cfg.dtau).exp_m1() / l).collect();
        let noise = lambdas
            .iter()
            .map(|l| (-(-2.0 * l * cfg.dtau).exp_m1() / l).sqrt())
            .collect();
        let fejer = cfg.galerkin_fejer.then(|| {
            (1..=n)
                .map(|k| projection_weight(ProjectionKind::Fejer, n, k))
                .collect()
        });
        Ok(Self {
            basis,
            mean,
            field,
            mass,
            dim: mean.values().dim(),
            n_modes: n,
            noise_width: basis.n_modes(),
            dtau: cfg.dtau,
            decay,
            gain,
            noise,
            fejer,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.basis.lambdas()[..self.n_modes]
    }

    /// State drawn from the force-free stationary law `z_k ~ N(0, 1/λ_k)`.
    pub fn stationary_state(&self, mut rng: ChaCha8Rng) -> ChainState {
        let lambdas = self.lambdas();
        let mut z = DMatrix::zeros(self.n_modes, self.dim);
        for c in 0..self.dim {
            for k in 0..self.noise_width {
                let xi: f64 = rng.sample(StandardNormal);
                if k < self.n_modes {
                    z[(k, c)] = xi / lambdas[k].sqrt();
                }
            }
        }
        ChainState::new(z, rng)
    }

    /// `x̄ + Σ_k z_k e_k`; the ends are copied from `x̄` and stay at `x_±` exactly.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> Path {
        let mut path = self.mean.values().clone();
        let modes = self.basis.modes().columns(0, self.n_modes);
        let dx = modes * z;
        let values = path.values_mut();
        for c in 0..self.dim {
            for i in 0..dx.nrows() {
                values[(i + 1, c)] += dx[(i, c)];
            }
        }
        path
    }

    /// `N_k = <N(x), e_k>_h`, with the Fejér weights applied to both the
    /// argument and the result when the Galerkin variant is active.
    pub fn drift_coefficients(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = match &self.fejer {
            Some(w) => {
                let mut zw = z.clone();
                for (k, wk) in w.iter().enumerate() {
                    zw.row_mut(k).scale_mut(*wk);
                }
                self.reconstruct(&zw)
            }
            None => self.reconstruct(z),
        };
        let drift = eval_drift(self.field, &x, self.mass)?.total();
        let modes = self.basis.modes().columns(0, self.n_modes);
        let mut coeffs = modes.tr_mul(&drift) * self.basis.grid().dt();
        if let Some(w) = &self.fejer {
            for (k, wk) in w.iter().enumerate() {
                coeffs.row_mut(k).scale_mut(*wk);
            }
        }
        Ok(coeffs)
    }

    pub fn step(&self, state: &mut ChainState) -> Result<()> {
        let drift = if self.field.is_zero() {
            None
        } else {
            Some(self.drift_coefficients(&state.z)?)
        };
        for c in 0..self.dim {
            // every mode of the grid consumes a draw, so runs that differ only in
            // n_modes share their noise on the common modes
            for k in 0..self.noise_width {
                let xi: f64 = state.rng.sample(StandardNormal);
                if k >= self.n_modes {
                    continue;
                }
                let nk = drift.as_ref().map_or(0.0, |n| n[(k, c)]);
                let z = self.decay[k] * state.z[(k, c)] + self.gain[k] * nk + self.noise[k] * xi;
                if !z.is_finite() {
                    return Err(Error::ChainDiverged {
                        tau: state.tau,
                        mode: k + 1,
                    });
                }
                state.z[(k, c)] = z;
            }
        }
        state.tau += self.dtau;
        state.steps += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub tau: f64,
    /// Node values, component-major: all nodes of component 0, then component 1, ...
    pub values: Vec<f64>,
}

/// Interior nodes of a uniform `count`-point probe subgrid.
pub fn probe_nodes(grid: &PathGrid, count: usize) -> Vec<usize> {
    let n = grid.intervals();
    let mut nodes: Vec<usize> = (1..=count)
        .map(|i| ((i * n) as f64 / (count + 1) as f64).round() as usize)
        .map(|j| j.clamp(1, n - 1))
        .collect();
    nodes.dedup();
    nodes
}

/// Functional layout used by [`run_chain`].
#[derive(Debug, Clone)]
pub struct ChainLayout {
    pub probes: Vec<usize>,
    pub midpoint: usize,
    pub tracked_modes: usize,
    pub dim: usize,
    pub n_interior: usize,
}

impl ChainLayout {
    pub fn new(grid: &PathGrid, dim: usize, n_modes: usize) -> Self {
        Self {
            probes: probe_nodes(grid, PROBE_COUNT),
            midpoint: grid.nearest_node(0.5 * grid.horizon()),
            tracked_modes: n_modes.min(TRACKED_MODES),
            dim,
            n_interior: grid.n_interior(),
        }
    }

    /// Index of node `j` (1-based interior), component `c` in the node accumulator.
    pub fn node_index(&self, j: usize, c: usize) -> usize {
        c * self.n_interior + (j - 1)
    }

    pub fn node_accumulator(&self) -> Result<MomentAccumulator> {
        let labels = (0..self.dim)
            .flat_map(|c| (1..=self.n_interior).map(move |j| format!("x{c}@{j}")))
            .collect();
        let mut pairs = Vec::new();
        for c in 0..self.dim {
            for (a, &i) in self.probes.iter().enumerate() {
                for &j in &self.probes[a..] {
                    pairs.push((self.node_index(i, c), self.node_index(j, c)));
                }
            }
        }
        MomentAccumulator::new(labels, pairs)
    }

    pub fn mode_accumulator(&self) -> Result<MomentAccumulator> {
        let labels = (0..self.dim)
            .flat_map(|c| (1..=self.tracked_modes).map(move |k| format!("z{c}_{k}")))
            .collect();
        MomentAccumulator::new(labels, Vec::new())
    }

    /// `x_c(T/2)` and `x_c(T/2)²` per component.
    pub fn midpoint_accumulator(&self) -> Result<MomentAccumulator> {
        let labels = (0..self.dim)
            .flat_map(|c| [format!("x{c}(T/2)"), format!("x{c}(T/2)^2")])
            .collect();
        MomentAccumulator::new(labels, Vec::new())
    }

    fn node_values(&self, path: &Path, out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.dim {
            out.extend((1..=self.n_interior).map(|j| path.at(j, c)));
        }
    }

    fn mode_values(&self, z: &DMatrix<f64>, out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.dim {
            out.extend((0..self.tracked_modes).map(|k| z[(k, c)]));
        }
    }

    fn midpoint_values(&self, path: &Path, out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.dim {
            let x = path.at(self.midpoint, c);
            out.extend([x, x * x]);
        }
    }
}

/// Statistics of one or more chains.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub layout: ChainLayout,
    pub lambdas: Vec<f64>,
    pub mean_path: Path,
    pub nodes: MomentAccumulator,
    pub modes: MomentAccumulator,
    pub midpoint: MomentAccumulator,
    /// Snapshots of chain 0 (empty unless requested).
    pub snapshots: Vec<Snapshot>,
    pub final_tau: f64,
}

struct Series {
    width: usize,
    data: Vec<f64>,
}

impl Series {
    fn new(width: usize, capacity: usize) -> Self {
        Self {
            width,
            data: Vec::with_capacity(width * capacity),
        }
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.width).copied().collect()
    }

    fn ess(&self) -> Result<Vec<f64>> {
        (0..self.width).map(|i| ess(&self.column(i)).map(|e| e.ess)).collect()
    }
}

struct SingleChain {
    nodes: MomentAccumulator,
    modes: MomentAccumulator,
    midpoint: MomentAccumulator,
    snapshots: Vec<Snapshot>,
    tau: f64,
}

fn run_single(
    sampler: &SpectralSampler<'_>,
    layout: &ChainLayout,
    cfg: &SamplerConfig,
    index: usize,
    record_snapshots: bool,
) -> Result<SingleChain> {
    let mut state = sampler.stationary_state(stream_rng(cfg.seed, index as u64));
    let recorded = cfg.n_recorded();
    let mut nodes = layout.node_accumulator()?;
    let mut modes = layout.mode_accumulator()?;
    let mut midpoint = layout.midpoint_accumulator()?;
    let mut node_series = Series::new(nodes.labels().len(), recorded);
    let mut mode_series = Series::new(modes.labels().len(), recorded);
    let mut mid_series = Series::new(midpoint.labels().len(), recorded);
    let mut snapshots = Vec::new();
    let mut buf = Vec::new();
    for step in 1..=cfg.n_steps {
        sampler.step(&mut state)?;
        if step <= cfg.burn_in || (step - cfg.burn_in) % cfg.thin != 0 {
            continue;
        }
        let x = sampler.reconstruct(&state.z);
        layout.node_values(&x, &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("chain {index} path at tau = {}", state.tau),
            });
        }
        nodes.push(&buf);
        node_series.data.extend_from_slice(&buf);
        layout.mode_values(&state.z, &mut buf);
        modes.push(&buf);
        mode_series.data.extend_from_slice(&buf);
        layout.midpoint_values(&x, &mut buf);
        midpoint.push(&buf);
        mid_series.data.extend_from_slice(&buf);
        if record_snapshots {
            let mut values = Vec::with_capacity(x.values().len());
            values.extend(x.values().iter());
            snapshots.push(Snapshot {
                step,
                tau: state.tau,
                values,
            });
        }
    }
    nodes.set_ess(node_series.ess()?)?;
    modes.set_ess(mode_series.ess()?)?;
    midpoint.set_ess(mid_series.ess()?)?;
    Ok(SingleChain {
        nodes,
        modes,
        midpoint,
        snapshots,
        tau: state.tau,
    })
}

pub fn run_chain(problem: &BridgeProblem, grid: &PathGrid, cfg: &SamplerConfig) -> Result<ChainRun> {
    run_chain_with(problem, grid, cfg, true)
}

pub fn run_chain_with(
    problem: &BridgeProblem,
    grid: &PathGrid,
    cfg: &SamplerConfig,
    record_snapshots: bool,
) -> Result<ChainRun> {
    cfg.validate(grid)?;
    if cfg.n_recorded() < crate::diagnostics::MIN_SERIES {
        return Err(invalid(
            "n_steps",
            format!(
                "only {} recorded samples; need at least {}",
                cfg.n_recorded(),
                crate::diagnostics::MIN_SERIES
            ),
        ));
    }
    let op = assemble_operator(problem, grid)?;
    let basis = eigendecompose(&op)?;
    let mean = solve_mean_path(problem, grid)?;
    let sampler = SpectralSampler::new(&basis, &mean, problem.field().as_ref(), problem.mass(), cfg)?;
    let layout = ChainLayout::new(grid, problem.dim(), cfg.n_modes);
    let runs: Vec<Result<SingleChain>> = (0..cfg.chains)
        .into_par_iter()
        .map(|i| run_single(&sampler, &layout, cfg, i, record_snapshots && i == 0))
        .collect();
    let mut runs = runs.into_iter();
    let first = runs.next().expect("at least one chain")?;
    let (mut nodes, mut modes, mut midpoint) = (first.nodes, first.modes, first.midpoint);
    for run in runs {
        let run = run?;
        nodes.merge(&run.nodes)?;
        modes.merge(&run.modes)?;
        midpoint.merge(&run.midpoint)?;
    }
    Ok(ChainRun {
        lambdas: sampler.lambdas().to_vec(),
        mean_path: mean.values().clone(),
        layout,
        nodes,
        modes,
        midpoint,
        snapshots: first.snapshots,
        final_tau: first.tau,
    })
}

/// A forward Langevin trajectory sampled on the path grid.
#[derive(Debug, Clone)]
pub struct ForwardPath {
    pub path: Path,
    pub q_end: Vec<f64>,
    pub p_end: Vec<f64>,
}

/// Euler–Maruyama for `dq = p dt`, `m dp = f(q) dt - p dt + dw`, `q(0) = x_-`,
/// `p(0) ~ N(0, 1/2m)`, interpolated linearly onto `grid`.
pub fn forward_langevin<R: Rng + ?Sized>(
    problem: &BridgeProblem,
    grid: &PathGrid,
    n_sde_steps: usize,
    rng: &mut R,
) -> Result<ForwardPath> {
    if n_sde_steps < 100 {
        return Err(invalid("n_sde_steps", format!("need at least 100, got {n_sde_steps}")));
    }
    let d = problem.dim();
    let m = problem.mass();
    let h = problem.horizon() / n_sde_steps as f64;
    let sq = h.sqrt() / m;
    let v0 = (0.5 / m).sqrt();
    let mut q = problem.x_minus().to_vec();
    let mut p: Vec<f64> = (0..d).map(|_| v0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut f = vec![0.0; d];
    let mut path = Path::zeros(*grid, d);
    let mut next_node = 1;
    let mut prev = q.clone();
    for c in 0..d {
        path.values_mut()[(0, c)] = q[c];
    }
    for i in 1..=n_sde_steps {
        prev.copy_from_slice(&q);
        problem.field().value(&q, &mut f);
        for c in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            q[c] += p[c] * h;
            p[c] += (f[c] - p[c]) * h / m + sq * xi;
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("forward Langevin step {i}"),
            });
        }
        let t_hi = i as f64 * h;
        while next_node <= grid.intervals() && grid.node(next_node) <= t_hi + 1e-12 * h {
            let w = ((grid.node(next_node) - (t_hi - h)) / h).clamp(0.0, 1.0);
            for c in 0..d {
                path.values_mut()[(next_node, c)] = (1.0 - w) * prev[c] + w * q[c];
            }
            next_node += 1;
        }
    }
    for c in 0..d {
        path.values_mut()[(grid.intervals(), c)] = q[c];
    }
    Ok(ForwardPath {
        path,
        q_end: q,
        p_end: p,
    })
}

#[derive(Debug, Clone)]
pub struct RejectionResult {
    pub accepted: Vec<Path>,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Forward trajectories kept when `|q(T) - x_+| < epsilon`.
pub fn rejection_bridge_oracle(
    problem: &BridgeProblem,
    grid: &PathGrid,
    epsilon: f64,
    n_attempts: usize,
    n_sde_steps: usize,
    seed: u64,
) -> Result<RejectionResult> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let blocks = n_attempts.div_ceil(ORACLE_BLOCK);
    let found: Vec<Result<Vec<Path>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, REJECTION_STREAMS + b as u64);
            let count = ORACLE_BLOCK.min(n_attempts - b * ORACLE_BLOCK);
            let mut kept = Vec::new();
            for _ in 0..count {
                let fwd = forward_langevin(problem, grid, n_sde_steps, &mut rng)?;
                let dist2: f64 = fwd
                    .q_end
                    .iter()
                    .zip(problem.x_plus())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist2 < epsilon * epsilon {
                    kept.push(fwd.path);
                }
            }
            Ok(kept)
        })
        .collect();
    let mut accepted = Vec::new();
    for block in found {
        accepted.extend(block?);
    }
    if accepted.is_empty() {
        return Err(Error::NoAcceptance {
            attempts: n_attempts,
        });
    }
    Ok(RejectionResult {
        acceptance_rate: accepted.len() as f64 / n_attempts as f64,
        attempts: n_attempts,
        accepted,
    })
}

/// A scalar path functional.
pub type PathFunctional = dyn Fn(&Path) -> f64 + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceResult {
    pub estimates: Vec<WeightedEstimate>,
    /// `(Σw)² / Σw²`.
    pub ess_w: f64,
    pub n_samples: usize,
    /// Set when `ess_w < 50`.
    pub unreliable: bool,
}

pub const MIN_IMPORTANCE_ESS: f64 = 50.0;

/// Self-normalized weighted mean of each functional with delta-method errors.
pub fn weighted_estimates(log_weights: &[f64], values: &[Vec<f64>]) -> (Vec<WeightedEstimate>, f64) {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|u| (u - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let n_fun = values.first().map_or(0, Vec::len);
    let estimates = (0..n_fun)
        .map(|f| {
            let est = w.iter().zip(values).map(|(wi, g)| wi * g[f]).sum::<f64>() / sw;
            let var = w
                .iter()
                .zip(values)
                .map(|(wi, g)| (wi * (g[f] - est)).powi(2))
                .sum::<f64>();
            WeightedEstimate {
                estimate: est,
                standard_error: var.sqrt() / sw,
            }
        })
        .collect();
    (estimates, sw * sw / sw2)
}

/// `E_μ[g] ≈ Σ w_i g(x_i) / Σ w_i` with `x_i` drawn from the force-free bridge
/// and `w_i = exp(U(x_i))`.
pub fn importance_oracle(
    gauss: &BridgeGaussian,
    field: &dyn ForceField,
    functionals: &[&PathFunctional],
    n_samples: usize,
    seed: u64,
) -> Result<ImportanceResult> {
    if n_samples < 1000 {
        return Err(invalid("n_samples", format!("need at least 1000, got {n_samples}")));
    }
    let blocks = n_samples.div_ceil(ORACLE_BLOCK);
    let draws: Vec<Result<Vec<(f64, Vec<f64>)>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, IMPORTANCE_STREAMS + b as u64);
            let count = ORACLE_BLOCK.min(n_samples - b * ORACLE_BLOCK);
            (0..count)
                .map(|_| {
                    let x = gauss.sample_bridge(&mut rng);
                    let u = log_density_u(field, &x, gauss.mass())?.u;
                    Ok((u, functionals.iter().map(|g| g(&x)).collect()))
                })
                .collect()
        })
        .collect();
    let mut log_w = Vec::with_capacity(n_samples);
    let mut values = Vec::with_capacity(n_samples);
    for block in draws {
        for (u, g) in block? {
            log_w.push(u);
            values.push(g);
        }
    }
    let (estimates, ess_w) = weighted_estimates(&log_w, &values);
    Ok(ImportanceResult {
        estimates,
        ess_w,
        n_samples,
        unreliable: ess_w < MIN_IMPORTANCE_ESS,
    })
}
