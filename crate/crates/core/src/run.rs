//! Command orchestration: each command fills its sections of the report.

use crate::certify::{certify, CertificateStatus};
use crate::config::Validated;
use crate::error::{Error, Result};
use crate::geometry::{curvature_split, total_curvature};
use crate::identities::check_identities;
use crate::report::{
    curvature_extremes, profile, sweep_trend, CertifySummary, Consistency, GeometrySummary, MatrixDump, Report,
    RunStatus, SpectrumSummary, REPORT_SCHEMA,
};
use crate::spectral::{bracket, convergence_study, solve};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    CheckIdentities,
    Certify,
    Solve,
    Full,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Curvature,
        Command::CheckIdentities,
        Command::Certify,
        Command::Solve,
        Command::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::CheckIdentities => "check-identities",
            Command::Certify => "certify",
            Command::Solve => "solve",
            Command::Full => "full",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command `{s}`")))
    }
}

/// Sizes the rayon pool and faer's parallelism; `None` keeps the defaults.
/// Only the first call configures the rayon pool.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        #[cfg(not(target_arch = "wasm32"))]
        faer::set_global_parallelism(if n == 1 {
            faer::Par::Seq
        } else {
            faer::Par::rayon(n)
        });
    }
}

fn geometry(v: &Validated) -> Result<GeometrySummary> {
    let s = &v.surface;
    let g = &v.config.geometry;
    let support = s.support_radius();
    let compact = support.is_finite();
    let half = if compact { support } else { 0.5 * s.length_scale() };
    let (tot, split) = if compact {
        let q = &v.config.certify.quadrature;
        (
            Some(total_curvature(s, &g.total_curvature)?),
            Some(curvature_split(s, 4 * q.radial_panels, q.order, 4 * q.angular_nodes)?),
        )
    } else {
        (None, None)
    };
    let e = curvature_extremes(s, half, 129)?;
    let (c_plus, c_minus) = v.thickness.map_or((1.0, 1.0), |t| (t.c_plus, t.c_minus));
    Ok(GeometrySummary {
        family: v.config.surface.family.clone(),
        support_radius: compact.then_some(support),
        thickness: v.thickness,
        rho_m: v.rho_m(),
        c_plus,
        c_minus,
        total_curvature: tot,
        curvature_split: split,
        min_gauss: e[0],
        max_gauss: e[1],
        min_mean: e[2],
        max_mean: e[3],
        profile: profile(s, 1.25 * half, g.profile_points)?,
    })
}

fn spectrum(v: &Validated) -> Result<SpectrumSummary> {
    let spec = &v.config.solve;
    let a = v.layer.a;
    let (report, op) = solve(&v.surface, a, v.rho_m(), &spec.grid, spec.bc, &spec.eigen)?;
    let matrix_dump = match &spec.dump_matrix {
        Some(path) => {
            let mass = format!("{path}.mass");
            op.dump(Path::new(path), Path::new(&mass))?;
            Some(MatrixDump {
                stiffness: path.clone(),
                mass,
            })
        }
        None => None,
    };
    drop(op);
    let bracket = if spec.bracket_radii.is_empty() {
        None
    } else {
        Some(bracket(&v.surface, a, v.rho_m(), spec)?)
    };
    let convergence = if spec.refinement_levels >= 2 {
        Some(convergence_study(
            &v.surface,
            a,
            v.rho_m(),
            &spec.grid,
            spec.bc,
            &spec.eigen,
            spec.refinement_levels,
        )?)
    } else {
        None
    };
    Ok(SpectrumSummary {
        spectrum: report,
        bracket,
        convergence,
        matrix_dump,
    })
}

/// Runs one command on a validated configuration.
pub fn run_command(cmd: Command, v: &Validated) -> Result<Report> {
    let mut report = Report {
        schema: REPORT_SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name().to_string(),
        status: RunStatus::Ok,
        threads: rayon::current_num_threads(),
        config: v.config.clone(),
        geometry: None,
        identities: None,
        certify: None,
        spectrum: None,
        consistency: None,
    };
    let wants = |c: Command| cmd == c || cmd == Command::Full;
    if matches!(cmd, Command::Certify | Command::Solve | Command::Full) {
        v.require_compact(cmd.name())?;
    }
    if wants(Command::Curvature) {
        report.geometry = Some(geometry(v)?);
    }
    if wants(Command::CheckIdentities) {
        report.identities = Some(check_identities(
            &v.surface,
            v.layer.a,
            v.thickness.as_ref(),
            &v.config.identities,
        )?);
    }
    if wants(Command::Certify) {
        let cert = certify(&v.surface, &v.layer, &v.config.certify.certifier())?;
        let tot = match report.geometry.as_ref().and_then(|g| g.total_curvature) {
            Some(t) => Some(t),
            None => Some(total_curvature(&v.surface, &v.config.geometry.total_curvature)?),
        };
        if cert.status == CertificateStatus::NotCertified {
            report.status = RunStatus::NotCertified;
        }
        report.certify = Some(CertifySummary {
            sweep_trend: sweep_trend(&cert, tot.as_ref()),
            certificate: cert,
        });
    }
    if wants(Command::Solve) {
        report.spectrum = Some(spectrum(v)?);
    }
    if cmd == Command::Full {
        let c = &report.certify.as_ref().unwrap().certificate;
        let s = &report.spectrum.as_ref().unwrap().spectrum;
        let lambda1 = s.eigenvalues[0];
        let tolerance = v.config.solve.eigen.tol * lambda1.abs() + c.quadrature_error * (-c.ln_norm_sq).exp();
        let holds = lambda1 <= c.e_ub + tolerance;
        let cons = Consistency {
            lambda1,
            e_ub: c.e_ub,
            threshold: s.threshold,
            tolerance,
            lambda1_below_threshold: lambda1 < s.threshold,
            holds,
        };
        if c.status == CertificateStatus::Certified && !(holds && cons.lambda1_below_threshold) {
            report.status = RunStatus::Inconsistent;
        }
        report.consistency = Some(cons);
    }
    Ok(report)
}
