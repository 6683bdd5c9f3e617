//! Discrete spectrum of the layer Hamiltonian on a truncated domain.

pub mod assemble;
pub mod grid;
pub mod lanczos;

pub use assemble::{assemble, transverse_fit, DiscreteOperator, CELLS_PER_RHO_M};
pub use grid::{Axis, Grid, GridSpec, LateralBc};
pub use lanczos::{lowest_eigenpairs, validate_options, EigenOptions, EigenSolution};

use crate::error::{Error, Result};
use crate::geometry::Surface;
use serde::{Deserialize, Serialize};

/// Settings of one spectral solve and of the bracketing study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    pub grid: GridSpec,
    pub bc: LateralBc,
    pub eigen: EigenOptions,
    /// Truncation radii of the Dirichlet/Neumann bracketing study; empty skips it.
    pub bracket_radii: Vec<f64>,
    /// Dyadic levels of the grid-convergence study; 0 skips it.
    pub refinement_levels: usize,
    /// Optional Matrix Market dump of the stiffness matrix (mass goes to `<path>.mass`).
    pub dump_matrix: Option<String>,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            bc: LateralBc::Dirichlet,
            eigen: EigenOptions::default(),
            bracket_radii: vec![10.0, 20.0, 40.0],
            refinement_levels: 0,
            dump_matrix: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub r_max: f64,
    pub nodes: usize,
    pub transverse_nodes: usize,
    pub bc: LateralBc,
    pub dim: usize,
    pub nnz: usize,
    pub core_spacing: f64,
    pub max_spacing: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub threshold: f64,
    pub grid: GridSummary,
    pub symmetry_defect: f64,
    pub eigenvalues: Vec<f64>,
    /// lambda_n - kappa_1^2 for the levels below [`bound_cut`].
    pub binding_energies: Vec<f64>,
    pub below_threshold: usize,
    pub solver: EigenSolution,
}

/// Levels count as bound only below kappa_1^2 (1 - tol): the Neumann
/// exterior mode sits at threshold up to solver accuracy.
pub fn bound_cut(threshold: f64, tol: f64) -> f64 {
    threshold * (1.0 - tol)
}

/// Assembles and solves on one grid.
pub fn solve<S: Surface + ?Sized>(
    surface: &S,
    half_width: f64,
    rho_m: Option<f64>,
    grid: &GridSpec,
    bc: LateralBc,
    eigen: &EigenOptions,
) -> Result<(SpectrumReport, DiscreteOperator)> {
    let g = Grid::new(grid, surface.support_radius(), half_width, bc)?;
    let op = assemble(surface, &g, rho_m)?;
    let sol = lowest_eigenpairs(&op, eigen)?;
    let spacings: Vec<f64> = g.axis.nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let cut = bound_cut(op.threshold, eigen.tol);
    let below: Vec<f64> = sol.values.iter().copied().filter(|&l| l < cut).collect();
    let report = SpectrumReport {
        threshold: op.threshold,
        grid: GridSummary {
            r_max: grid.r_max,
            nodes: grid.nodes,
            transverse_nodes: grid.transverse_nodes,
            bc,
            dim: op.dim(),
            nnz: op.nnz(),
            core_spacing: spacings.iter().copied().fold(f64::INFINITY, f64::min),
            max_spacing: spacings.iter().copied().fold(0.0, f64::max),
        },
        symmetry_defect: op.symmetry_defect(),
        eigenvalues: sol.values.clone(),
        binding_energies: below.iter().map(|l| l - op.threshold).collect(),
        below_threshold: below.len(),
        solver: sol,
    };
    Ok((report, op))
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketRow {
    pub r_max: f64,
    pub neumann: Vec<f64>,
    pub dirichlet: Vec<f64>,
    /// lambda_n^N <= lambda_n^D for every computed n.
    pub ordered: bool,
    pub dim_neumann: usize,
    pub dim_dirichlet: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub threshold: f64,
    pub rows: Vec<BracketRow>,
    /// Dirichlet levels below threshold at the largest radius: a lower bound
    /// on the number of bound states.
    pub bound_states_lower: usize,
    /// Neumann levels below threshold at the largest radius: an upper bound
    /// within the computed window.
    pub bound_states_upper: usize,
    /// max/min - 1 of the Dirichlet ground state over the radii.
    pub ground_state_spread: f64,
    /// |lambda - kappa_1^2| of the first Dirichlet level above threshold, per radius.
    pub continuum_edge_gap: Vec<f64>,
    pub continuum_edge_monotone: bool,
}

/// Solves with both lateral conditions at each radius.
pub fn bracket<S: Surface + ?Sized>(
    surface: &S,
    half_width: f64,
    rho_m: Option<f64>,
    spec: &SolveSpec,
) -> Result<BracketReport> {
    if spec.bracket_radii.is_empty() {
        return Err(Error::Validation {
            field: "solve.bracket_radii".into(),
            constraint: "need at least one radius".into(),
        });
    }
    let mut rows = Vec::new();
    let mut threshold = f64::NAN;
    for &r in &spec.bracket_radii {
        let grid = GridSpec { r_max: r, ..spec.grid };
        let (n, _) = solve(surface, half_width, rho_m, &grid, LateralBc::Neumann, &spec.eigen)?;
        let (d, _) = solve(surface, half_width, rho_m, &grid, LateralBc::Dirichlet, &spec.eigen)?;
        threshold = d.threshold;
        let slack = 1e-9 * threshold.abs();
        rows.push(BracketRow {
            r_max: r,
            ordered: n.eigenvalues.iter().zip(&d.eigenvalues).all(|(a, b)| *a <= b + slack),
            neumann: n.eigenvalues,
            dirichlet: d.eigenvalues,
            dim_neumann: n.grid.dim,
            dim_dirichlet: d.grid.dim,
        });
    }
    let last = rows.last().unwrap();
    let cut = bound_cut(threshold, spec.eigen.tol);
    let lower = last.dirichlet.iter().filter(|&&l| l < cut).count();
    let upper = last.neumann.iter().filter(|&&l| l < cut).count();
    let ground: Vec<f64> = rows.iter().map(|r| r.dirichlet[0]).collect();
    let (gmin, gmax) = ground
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    let edge: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.dirichlet
                .iter()
                .find(|&&l| l >= threshold)
                .map_or(f64::NAN, |l| l - threshold)
        })
        .collect();
    let monotone = edge.windows(2).all(|w| w[1] <= w[0]);
    Ok(BracketReport {
        threshold,
        bound_states_lower: lower,
        bound_states_upper: upper,
        ground_state_spread: gmax / gmin - 1.0,
        continuum_edge_monotone: monotone,
        continuum_edge_gap: edge,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub nodes: Vec<usize>,
    pub transverse_nodes: Vec<usize>,
    pub lambda1: Vec<f64>,
    /// lambda1 differences between consecutive levels.
    pub differences: Vec<f64>,
    /// Ratios of consecutive differences (about 4 for second order).
    pub ratios: Vec<f64>,
    /// Richardson extrapolation from the two finest levels.
    pub extrapolated: f64,
}

/// lambda_1 on `levels` dyadically refined grids.
pub fn convergence_study<S: Surface + ?Sized>(
    surface: &S,
    half_width: f64,
    rho_m: Option<f64>,
    grid: &GridSpec,
    bc: LateralBc,
    eigen: &EigenOptions,
    levels: usize,
) -> Result<ConvergenceReport> {
    let mut g = *grid;
    let mut nodes = Vec::new();
    let mut tn = Vec::new();
    let mut lambda1 = Vec::new();
    let opts = EigenOptions { count: 1, ..*eigen };
    for _ in 0..levels.max(2) {
        let (r, _) = solve(surface, half_width, rho_m, &g, bc, &opts)?;
        nodes.push(g.nodes);
        tn.push(g.transverse_nodes);
        lambda1.push(r.eigenvalues[0]);
        g = g.refined();
    }
    let differences: Vec<f64> = lambda1.windows(2).map(|w| w[0] - w[1]).collect();
    let ratios = differences.windows(2).map(|w| w[0] / w[1]).collect();
    let k = lambda1.len();
    let extrapolated = (4.0 * lambda1[k - 1] - lambda1[k - 2]) / 3.0;
    Ok(ConvergenceReport {
        nodes,
        transverse_nodes: tn,
        lambda1,
        differences,
        ratios,
        extrapolated,
    })
}
