//! The five subcommands. Each writes its files into the output directory and
//! returns whether its checks passed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::Serialize;

use hypobridge_core::diagnostics::{
    compare_moments, convergence_order, mode_variance_test, z_score, ComparisonEntry, ComparisonReport,
    ModeVarianceTest, MomentAccumulator, Reference,
};
use hypobridge_core::gaussian::{bridge_mean, condition, greens_check, GreensReport};
use hypobridge_core::operator::{analytic_eigenvalue, eigenvalue_scale, eigenvalues, normalized_alpha};
use hypobridge_core::sampler::{
    importance_oracle, rejection_bridge_oracle, run_chain_with, ChainRun, PathFunctional,
};
use hypobridge_core::{assemble_operator, make_grid, solve_mean_path, BridgeProblem, Path, PathGrid};

use crate::{CliError, ExperimentConfig};

pub const EIGS_HEADER: &str = "k,lambda_matrix,mu_root,mu_root4,ratio_to_k4";
/// Required agreement of the two mean-path constructions.
pub const MEAN_TOLERANCE: f64 = 1e-10;
/// Required observed order of the Green's-function residual.
pub const GREENS_ORDER: f64 = 1.5;

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &FsPath) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Usage(format!("json: {e}")))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn csv(&self, name: &str, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    fn timing(&self, command: &str, start: Instant, cfg: &ExperimentConfig) -> Result<(), CliError> {
        let seconds = start.elapsed().as_secs_f64();
        eprintln!("{command}: {seconds:.3} s");
        if cfg.wants("json") {
            self.json("timing.json", &Timing { command, seconds })?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    seconds: f64,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct EigRow {
    pub k: usize,
    /// Grid eigenvalue divided by `m²π⁴/T⁴`, comparable with `μ_k⁴`.
    pub lambda_matrix: f64,
    /// `NaN` when the determinant root could not be bracketed.
    pub mu_root: f64,
    pub mu_root4: f64,
    pub ratio_to_k4: f64,
}

pub fn eigs(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<EigRow>, CliError> {
    let start = Instant::now();
    let problem = cfg.free_problem()?;
    let grid = cfg.grid()?;
    let values = eigenvalues(&assemble_operator(&problem, &grid)?)?;
    let scale = eigenvalue_scale(&problem);
    let (gamma, alpha) = (problem.rescaled_gamma(), normalized_alpha(&problem));
    let rows: Vec<EigRow> = values
        .iter()
        .take(cfg.eigs_count)
        .enumerate()
        .map(|(i, &lambda)| {
            let k = i + 1;
            let mu = analytic_eigenvalue(k, gamma, alpha).unwrap_or(f64::NAN);
            let lambda_matrix = lambda / scale;
            EigRow {
                k,
                lambda_matrix,
                mu_root: mu,
                mu_root4: mu.powi(4),
                ratio_to_k4: lambda_matrix / (k as f64).powi(4),
            }
        })
        .collect();
    if cfg.wants("csv") {
        out.csv(
            "eigs.csv",
            EIGS_HEADER,
            rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    float(r.lambda_matrix),
                    float(r.mu_root),
                    float(r.mu_root4),
                    float(r.ratio_to_k4),
                ]
            }),
        )?;
    }
    out.timing("eigs", start, cfg)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearReport {
    pub greens: Vec<GreensReport>,
    pub greens_order: f64,
    pub greens_pass: bool,
    pub mean_max_abs: f64,
    pub mean_pass: bool,
    pub modes: ModeVarianceTest,
    pub nodes: ComparisonReport,
    pub pass: bool,
}

/// Largest deviation of the boundary-value mean path from the conditioning formula.
pub fn mean_cross_check(problem: &BridgeProblem, grid: &PathGrid) -> Result<f64, CliError> {
    let mean = solve_mean_path(problem, grid)?;
    let (t, m) = (problem.horizon(), problem.mass());
    let mut worst: f64 = 0.0;
    for c in 0..problem.dim() {
        let (a, b) = (problem.x_minus()[c], problem.x_plus()[c]);
        for j in 0..=grid.intervals() {
            worst = worst.max((mean.values().at(j, c) - bridge_mean(grid.node(j), t, m, a, b)).abs());
        }
    }
    Ok(worst)
}

pub fn linear_check(cfg: &ExperimentConfig, out: &Output) -> Result<LinearReport, CliError> {
    let start = Instant::now();
    let problem = cfg.free_problem()?;
    let grid = cfg.grid()?;
    let mut greens = Vec::new();
    for level in 0..3 {
        let g = make_grid(problem.horizon(), cfg.intervals << level)?;
        greens.push(greens_check(&assemble_operator(&problem, &g)?, &condition(&g, &problem)?)?);
    }
    let points: Vec<(f64, f64)> = greens
        .iter()
        .map(|r| (problem.horizon() / r.intervals as f64, r.inverse_residual))
        .collect();
    let greens_order = convergence_order(&points)?;
    let mean_max_abs = mean_cross_check(&problem, &grid)?;

    let run = run_chain_with(&problem, &grid, &cfg.sampler_config(&grid)?, false)?;
    let modes = mode_variance_test(&run.modes, &run.lambdas, cfg.z_threshold)?;
    let gauss = condition(&grid, &problem)?;
    let n = grid.n_interior();
    let means: Vec<f64> = (0..problem.dim())
        .flat_map(|c| (1..=n).map(move |j| (j, c)))
        .map(|(j, c)| gauss.mean().at(j, c))
        .collect();
    let covs: Vec<f64> = run
        .nodes
        .pairs()
        .iter()
        .map(|&(a, b)| gauss.node_cov(a % n + 1, b % n + 1))
        .collect();
    let nodes = compare_moments(
        &run.nodes,
        &Reference::Exact {
            means: &means,
            covariances: &covs,
        },
        cfg.z_threshold,
    )?;
    let greens_pass = greens_order >= GREENS_ORDER;
    let mean_pass = mean_max_abs <= MEAN_TOLERANCE;
    let pass = greens_pass && mean_pass && modes.pass && nodes.pass;
    let report = LinearReport {
        greens,
        greens_order,
        greens_pass,
        mean_max_abs,
        mean_pass,
        modes,
        nodes,
        pass,
    };
    if cfg.wants("json") {
        out.json("linear_check.json", &report)?;
    }
    println!(
        "linear-check: greens order {:.3}, mean {:.3e}, modes chi2 {:.2}/{:.2}, nodes max|z| {:.3} -> {}",
        report.greens_order,
        report.mean_max_abs,
        report.modes.statistic,
        report.modes.threshold,
        report.nodes.max_abs_z,
        verdict(pass)
    );
    out.timing("linear-check", start, cfg)?;
    Ok(report)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSummary {
    pub name: String,
    pub mean: f64,
    pub standard_error: f64,
    pub ess: f64,
}

fn summarize(acc: &MomentAccumulator) -> Vec<FunctionalSummary> {
    acc.labels()
        .iter()
        .enumerate()
        .map(|(i, name)| FunctionalSummary {
            name: name.clone(),
            mean: acc.mean(i),
            standard_error: acc.mean_se(i),
            ess: acc.ess(i),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSummary {
    pub name: String,
    pub variance: f64,
    pub stationary_variance: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub samples_per_chain: usize,
    pub chains: usize,
    pub final_tau: f64,
    pub midpoint_node: usize,
    pub functionals: Vec<FunctionalSummary>,
    pub probes: Vec<FunctionalSummary>,
    pub modes: Vec<ModeSummary>,
}

fn chain(cfg: &ExperimentConfig, record: bool) -> Result<(BridgeProblem, PathGrid, ChainRun), CliError> {
    let problem = cfg.build_problem()?;
    let grid = cfg.grid()?;
    let run = run_chain_with(&problem, &grid, &cfg.sampler_config(&grid)?, record)?;
    Ok((problem, grid, run))
}

pub fn sample(cfg: &ExperimentConfig, out: &Output) -> Result<SampleSummary, CliError> {
    let start = Instant::now();
    let (problem, grid, run) = chain(cfg, cfg.wants("csv"))?;
    let sampler = cfg.sampler_config(&grid)?;
    if cfg.wants("csv") {
        let header = std::iter::once("step".to_string())
            .chain(std::iter::once("tau".to_string()))
            .chain((0..problem.dim()).flat_map(|c| (0..=grid.intervals()).map(move |j| format!("x{c}_{j}"))))
            .collect::<Vec<_>>()
            .join(",");
        out.csv(
            "snapshots.csv",
            &header,
            run.snapshots.iter().map(|s| {
                [s.step.to_string(), float(s.tau)]
                    .into_iter()
                    .chain(s.values.iter().map(|&v| float(v)))
                    .collect()
            }),
        )?;
    }
    let layout = &run.layout;
    let probes: Vec<FunctionalSummary> = {
        let all = summarize(&run.nodes);
        (0..problem.dim())
            .flat_map(|c| layout.probes.iter().map(move |&j| layout.node_index(j, c)))
            .map(|i| all[i].clone())
            .collect()
    };
    let modes = run
        .modes
        .labels()
        .iter()
        .enumerate()
        .map(|(i, name)| ModeSummary {
            name: name.clone(),
            variance: run.modes.variance(i),
            stationary_variance: 1.0 / run.lambdas[i % layout.tracked_modes],
            ess: run.modes.ess(i),
        })
        .collect();
    let summary = SampleSummary {
        samples_per_chain: sampler.n_recorded(),
        chains: sampler.chains,
        final_tau: run.final_tau,
        midpoint_node: layout.midpoint,
        functionals: summarize(&run.midpoint),
        probes,
        modes,
    };
    if cfg.wants("json") {
        out.json("summary.json", &summary)?;
    }
    for f in &summary.functionals {
        println!("sample: {} = {:.6} ± {:.6} (ess {:.0})", f.name, f.mean, f.standard_error, f.ess);
    }
    out.timing("sample", start, cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub name: String,
    pub estimate: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionSummary {
    pub accepted: usize,
    pub attempts: usize,
    pub acceptance_rate: f64,
    pub estimates: Vec<Estimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub midpoint_node: usize,
    pub importance: Vec<Estimate>,
    pub ess_w: f64,
    pub n_samples: usize,
    pub unreliable: bool,
    pub rejection: Option<RejectionSummary>,
    pub agreement: Option<ComparisonReport>,
    pub pass: bool,
}

fn midpoint_names(dim: usize) -> Vec<String> {
    (0..dim)
        .flat_map(|c| [format!("x{c}(T/2)"), format!("x{c}(T/2)^2")])
        .collect()
}

fn midpoint_values(x: &Path, node: usize) -> Vec<f64> {
    (0..x.dim())
        .flat_map(|c| {
            let v = x.at(node, c);
            [v, v * v]
        })
        .collect()
}

fn importance(cfg: &ExperimentConfig, problem: &BridgeProblem, grid: &PathGrid, node: usize) -> Result<(Vec<Estimate>, f64, bool), CliError> {
    let gauss = condition(grid, &problem.with_field(std::sync::Arc::new(hypobridge_core::field::ZeroField))?)?;
    let fs: Vec<Box<PathFunctional>> = (0..2 * problem.dim())
        .map(|i| {
            let (c, square) = (i / 2, i % 2 == 1);
            Box::new(move |x: &Path| {
                let v = x.at(node, c);
                if square {
                    v * v
                } else {
                    v
                }
            }) as Box<PathFunctional>
        })
        .collect();
    let refs: Vec<&PathFunctional> = fs.iter().map(|f| f.as_ref()).collect();
    let res = importance_oracle(&gauss, problem.field().as_ref(), &refs, cfg.oracle.n_samples, cfg.sampler.seed)?;
    let estimates = midpoint_names(problem.dim())
        .into_iter()
        .zip(&res.estimates)
        .map(|(name, e)| Estimate {
            name,
            estimate: e.estimate,
            standard_error: e.standard_error,
        })
        .collect();
    Ok((estimates, res.ess_w, res.unreliable))
}

fn agreement(a: &[Estimate], b: &[Estimate], threshold: f64) -> ComparisonReport {
    let entries = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let se = x.standard_error.hypot(y.standard_error);
            ComparisonEntry {
                name: x.name.clone(),
                estimate_a: x.estimate,
                estimate_b: y.estimate,
                standard_error: se,
                z: z_score(x.estimate, y.estimate, se),
            }
        })
        .collect();
    ComparisonReport::from_entries(entries, threshold)
}

pub fn oracle(cfg: &ExperimentConfig, out: &Output) -> Result<OracleReport, CliError> {
    let start = Instant::now();
    let problem = cfg.build_problem()?;
    let grid = cfg.grid()?;
    let node = grid.nearest_node(0.5 * problem.horizon());
    let (estimates, ess_w, unreliable) = importance(cfg, &problem, &grid, node)?;
    let (rejection, agreement) = if cfg.oracle.rejection {
        let o = &cfg.oracle;
        let res = rejection_bridge_oracle(&problem, &grid, o.epsilon, o.n_attempts, o.n_sde_steps, cfg.sampler.seed)?;
        let mut acc = MomentAccumulator::new(midpoint_names(problem.dim()), Vec::new())?;
        for x in &res.accepted {
            acc.push(&midpoint_values(x, node));
        }
        let r = RejectionSummary {
            accepted: res.accepted.len(),
            attempts: res.attempts,
            acceptance_rate: res.acceptance_rate,
            estimates: acc
                .labels()
                .iter()
                .enumerate()
                .map(|(i, name)| Estimate {
                    name: name.clone(),
                    estimate: acc.mean(i),
                    standard_error: acc.mean_se(i),
                })
                .collect(),
        };
        let cmp = agreement(&estimates, &r.estimates, cfg.z_threshold);
        (Some(r), Some(cmp))
    } else {
        (None, None)
    };
    let pass = !unreliable && agreement.as_ref().is_none_or(|c| c.pass);
    let report = OracleReport {
        midpoint_node: node,
        importance: estimates,
        ess_w,
        n_samples: cfg.oracle.n_samples,
        unreliable,
        rejection,
        agreement,
        pass,
    };
    if cfg.wants("json") {
        out.json("oracle.json", &report)?;
    }
    for e in &report.importance {
        println!("oracle: {} = {:.6} ± {:.6}", e.name, e.estimate, e.standard_error);
    }
    if let Some(c) = &report.agreement {
        println!("oracle: importance vs rejection max|z| {:.3} -> {}", c.max_abs_z, verdict(c.pass));
    }
    out.timing("oracle", start, cfg)?;
    Ok(report)
}

pub fn compare(cfg: &ExperimentConfig, out: &Output) -> Result<ComparisonReport, CliError> {
    let start = Instant::now();
    let (problem, grid, run) = chain(cfg, false)?;
    let node = run.layout.midpoint;
    let chain: Vec<Estimate> = summarize(&run.midpoint)
        .into_iter()
        .map(|f| Estimate {
            name: f.name,
            estimate: f.mean,
            standard_error: f.standard_error,
        })
        .collect();
    let (reference, _, unreliable) = importance(cfg, &problem, &grid, node)?;
    let mut report = agreement(&chain, &reference, cfg.z_threshold);
    report.pass &= !unreliable;
    if cfg.wants("json") {
        out.json("compare.json", &report)?;
    }
    for e in &report.entries {
        println!(
            "compare: {} chain {:.6} oracle {:.6} z {:.3}",
            e.name, e.estimate_a, e.estimate_b, e.z
        );
    }
    println!("compare: max|z| {:.3} -> {}", report.max_abs_z, verdict(report.pass));
    out.timing("compare", start, cfg)?;
    Ok(report)
}
