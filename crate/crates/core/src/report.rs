//! Versioned run report and its tabular views.

use crate::certify::Certificate;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{compute_curvature, CurvatureSplit, Surface, TotalCurvature};
use crate::identities::IdentityReport;
use crate::layer::ThicknessReport;
use crate::spectral::{BracketReport, ConvergenceReport, SpectrumReport};
use serde::Serialize;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const REPORT_SCHEMA: &str = "qlayer-report/1";
pub const ERROR_SCHEMA: &str = "qlayer-error/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub gauss: f64,
    pub mean: f64,
    pub k_plus: f64,
    pub k_minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub family: String,
    pub support_radius: Option<f64>,
    pub thickness: Option<ThicknessReport>,
    pub rho_m: Option<f64>,
    pub c_plus: f64,
    pub c_minus: f64,
    pub total_curvature: Option<TotalCurvature>,
    pub curvature_split: Option<CurvatureSplit>,
    pub min_gauss: f64,
    pub max_gauss: f64,
    pub min_mean: f64,
    pub max_mean: f64,
    /// Curvatures along the positive q1 axis.
    pub profile: Vec<ProfileRow>,
}

/// Extremes of K and M on a square sampling grid.
pub(crate) fn curvature_extremes<S: Surface + ?Sized>(
    surface: &S,
    half: f64,
    n: usize,
) -> Result<[f64; 4]> {
    use rayon::prelude::*;
    let h = 2.0 * half / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| -> Result<[f64; 4]> {
            let mut e = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for j in 0..n {
                let c = compute_curvature(surface, [-half + h * j as f64, -half + h * i as f64])?;
                e = [e[0].min(c.gauss), e[1].max(c.gauss), e[2].min(c.mean), e[3].max(c.mean)];
            }
            Ok(e)
        })
        .try_reduce(
            || [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
            |a, b| Ok([a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]),
        )
}

pub(crate) fn profile<S: Surface + ?Sized>(surface: &S, r_max: f64, n: usize) -> Result<Vec<ProfileRow>> {
    (0..n)
        .map(|i| {
            let r = r_max * i as f64 / (n.max(2) - 1) as f64;
            let c = compute_curvature(surface, [r, 0.0])?;
            Ok(ProfileRow {
                r,
                gauss: c.gauss,
                mean: c.mean,
                k_plus: c.k_plus,
                k_minus: c.k_minus,
            })
        })
        .collect()
}

/// Tail behaviour of t0(sigma) over the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepTrend {
    /// First sweep index of the tail (second half of the grid).
    pub tail_start: usize,
    /// t0 strictly decreasing along the tail.
    pub monotone: bool,
    /// sigma-independent limit of t0 (the inner-disk part).
    pub limit: f64,
    /// Total curvature the limit is compared against.
    pub total_curvature: f64,
    /// |limit - Tot| within the quadrature errors of both.
    pub limit_matches: bool,
    /// t0 - limit at the last sigma.
    pub last_excess: f64,
}

pub fn sweep_trend(cert: &Certificate, tot: Option<&TotalCurvature>) -> SweepTrend {
    let n = cert.sweep.len();
    let tail_start = n / 2;
    let tail = &cert.sweep[tail_start..];
    let monotone = tail.windows(2).all(|w| w[1].t0 < w[0].t0);
    let (total, tot_err) = tot.map_or((0.0, 0.0), |t| (t.value, t.delta));
    let err = tail.last().map_or(0.0, |r| r.quadrature_error);
    SweepTrend {
        tail_start,
        monotone,
        limit: cert.interior_t,
        total_curvature: total,
        limit_matches: (cert.interior_t - total).abs() <= err + tot_err + 1e-6,
        last_excess: tail.last().map_or(f64::NAN, |r| r.t0 - cert.interior_t),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifySummary {
    pub certificate: Certificate,
    pub sweep_trend: SweepTrend,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixDump {
    pub stiffness: String,
    pub mass: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub spectrum: SpectrumReport,
    pub bracket: Option<BracketReport>,
    pub convergence: Option<ConvergenceReport>,
    pub matrix_dump: Option<MatrixDump>,
}

/// Eigensolver against certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency {
    pub lambda1: f64,
    pub e_ub: f64,
    pub threshold: f64,
    /// Eigensolver tolerance plus the certificate's quadrature error in energy units.
    pub tolerance: f64,
    pub lambda1_below_threshold: bool,
    /// lambda1 <= E_ub + tolerance.
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Ok,
    NotCertified,
    Inconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: RunStatus,
    pub threads: usize,
    pub config: RunConfig,
    pub geometry: Option<GeometrySummary>,
    pub identities: Option<IdentityReport>,
    pub certify: Option<CertifySummary>,
    pub spectrum: Option<SpectrumSummary>,
    pub consistency: Option<Consistency>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub schema: &'static str,
    pub command: Option<String>,
    pub error: &'static str,
    pub message: String,
}

impl ErrorReport {
    pub fn new(command: Option<&str>, e: &Error) -> Self {
        Self {
            schema: ERROR_SCHEMA,
            command: command.map(str::to_string),
            error: e.kind(),
            message: e.to_string(),
        }
    }
}

/// A flat table of stringified cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn cell(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, cell)
}

impl Report {
    /// Tables carried by the report, the command's main table first.
    pub fn tables(&self) -> Vec<Table> {
        let mut out = Vec::new();
        if let Some(c) = &self.certify {
            out.push(Table {
                name: "sweep",
                header: vec![
                    "sigma",
                    "sigma_r0",
                    "t0",
                    "mollifier_norm_sq",
                    "b",
                    "eps_star",
                    "t_min",
                    "ln_norm_sq",
                    "energy_gap",
                    "quadrature_error",
                    "passes",
                    "loss_of_precision",
                ],
                rows: c
                    .certificate
                    .sweep
                    .iter()
                    .map(|r| {
                        vec![
                            cell(r.sigma),
                            cell(r.sigma_r0),
                            cell(r.t0),
                            cell(r.mollifier_norm_sq),
                            cell(r.b),
                            cell(r.eps_star),
                            cell(r.t_min),
                            cell(r.ln_norm_sq),
                            cell(r.energy_gap),
                            cell(r.quadrature_error),
                            r.passes.to_string(),
                            r.loss_of_precision.to_string(),
                        ]
                    })
                    .collect(),
            });
        }
        if let Some(s) = &self.spectrum {
            let sp = &s.spectrum;
            out.push(Table {
                name: "spectrum",
                header: vec!["n", "lambda", "lambda_minus_threshold", "residual", "below_threshold"],
                rows: sp
                    .eigenvalues
                    .iter()
                    .zip(&sp.solver.residuals)
                    .enumerate()
                    .map(|(i, (l, r))| {
                        vec![
                            (i + 1).to_string(),
                            cell(*l),
                            cell(l - sp.threshold),
                            cell(*r),
                            (*l < sp.threshold).to_string(),
                        ]
                    })
                    .collect(),
            });
            if let Some(b) = &s.bracket {
                let mut rows = Vec::new();
                for row in &b.rows {
                    for n in 0..row.neumann.len().max(row.dirichlet.len()) {
                        rows.push(vec![
                            cell(row.r_max),
                            (n + 1).to_string(),
                            opt(row.neumann.get(n).copied()),
                            opt(row.dirichlet.get(n).copied()),
                            row.ordered.to_string(),
                        ]);
                    }
                }
                out.push(Table {
                    name: "bracket",
                    header: vec!["r_max", "n", "neumann", "dirichlet", "ordered"],
                    rows,
                });
            }
            if let Some(c) = &s.convergence {
                out.push(Table {
                    name: "convergence",
                    header: vec!["nodes", "transverse_nodes", "lambda1", "difference", "ratio"],
                    rows: (0..c.lambda1.len())
                        .map(|i| {
                            vec![
                                c.nodes[i].to_string(),
                                c.transverse_nodes[i].to_string(),
                                cell(c.lambda1[i]),
                                opt(i.checked_sub(1).map(|j| c.differences[j])),
                                opt(i.checked_sub(2).map(|j| c.ratios[j])),
                            ]
                        })
                        .collect(),
                });
            }
        }
        if let Some(id) = &self.identities {
            let p = &id.pointwise;
            let t = &id.transverse;
            let mut rows: Vec<Vec<String>> = [
                ("third_form", p.third_form),
                ("det_g", p.det_g),
                ("characteristic", p.characteristic),
                ("sandwich", p.sandwich),
                ("orthonormality", t.orthonormality),
                ("transverse_moment", t.moment_defect),
                ("mollifier_decay", id.mollifier.decay_ratio),
            ]
            .iter()
            .map(|(k, c)| vec![k.to_string(), String::new(), cell(c.value), cell(c.tolerance), c.pass.to_string()])
            .collect();
            for r in &id.mollifier.rows {
                let c = r.relative_difference;
                rows.push(vec![
                    "mollifier_norm".into(),
                    cell(r.sigma_r0),
                    cell(c.value),
                    cell(c.tolerance),
                    c.pass.to_string(),
                ]);
            }
            out.push(Table {
                name: "identities",
                header: vec!["check", "parameter", "value", "tolerance", "pass"],
                rows,
            });
        }
        if let Some(g) = &self.geometry {
            out.push(Table {
                name: "profile",
                header: vec!["r", "gauss", "mean", "k_plus", "k_minus"],
                rows: g
                    .profile
                    .iter()
                    .map(|r| vec![cell(r.r), cell(r.gauss), cell(r.mean), cell(r.k_plus), cell(r.k_minus)])
                    .collect(),
            });
        }
        let main = match self.command.as_str() {
            "curvature" => "profile",
            "check-identities" => "identities",
            "solve" => "spectrum",
            _ => "sweep",
        };
        if let Some(i) = out.iter().position(|t| t.name == main) {
            let t = out.remove(i);
            out.insert(0, t);
        }
        out
    }
}
