//! Run configuration: strict TOML ingestion and up-front validation.
//!
//! Lengths are in the units of the surface parameters; energies in the
//! inverse square of that unit (hbar^2/2m = 1).

use crate::certify::{CertifierConfig, LocalizationSpec};
use crate::error::{Error, Result};
use crate::geometry::Surface;
use crate::identities::IdentitySpec;
use crate::layer::{validate_thickness, GridSpec as SamplingSpec, LayerConfig, ThicknessReport};
use crate::quadrature::{QuadratureSpec, RefinementSpec};
use crate::spectral::{validate_options, Grid, GridSpec, SolveSpec, CELLS_PER_RHO_M};
use crate::surfaces::builtin_surface;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    /// `plane`, `compact-bump` or `sphere-patch-test`.
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    /// Half-width a (the layer has width d = 2a).
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySection {
    /// Mollifier radius r0; defaults to the support radius.
    pub r0: Option<f64>,
    /// Decreasing sigma values (1/length); empty selects the default grid.
    pub sigma_grid: Vec<f64>,
    pub localization: LocalizationSpec,
    pub quadrature: QuadratureSpec,
    /// Required margin in units of kappa_1^2.
    pub delta_min: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        let c = CertifierConfig::default();
        Self {
            r0: None,
            sigma_grid: c.sigma_grid,
            localization: c.localization,
            quadrature: c.quadrature,
            delta_min: c.delta_min,
        }
    }
}

impl CertifySection {
    pub fn certifier(&self) -> CertifierConfig {
        CertifierConfig {
            sigma_grid: self.sigma_grid.clone(),
            localization: self.localization,
            quadrature: self.quadrature,
            delta_min: self.delta_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Sampling of the curvature supremum behind rho_m.
    pub thickness: SamplingSpec,
    /// Quadrature of the total curvature.
    pub total_curvature: RefinementSpec,
    /// Radial samples in the curvature profile table.
    pub profile_points: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            thickness: SamplingSpec::default(),
            total_curvature: RefinementSpec::default(),
            profile_points: 61,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Report path; standard output when absent.
    pub path: Option<String>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceSection,
    pub layer: LayerSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub identities: IdentitySpec,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated configuration with the objects every command needs.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: RunConfig,
    pub surface: Arc<dyn Surface>,
    pub layer: LayerConfig,
    /// `None` for surfaces without compact support.
    pub thickness: Option<ThicknessReport>,
}

impl Validated {
    /// True when certify and solve may run on this surface.
    pub fn compactly_supported(&self) -> bool {
        self.surface.support_radius().is_finite()
    }

    pub fn rho_m(&self) -> Option<f64> {
        self.thickness.and_then(|t| t.rho_m)
    }

    pub fn require_compact(&self, command: &str) -> Result<()> {
        if self.compactly_supported() {
            Ok(())
        } else {
            Err(Error::Validation {
                field: "surface.family".into(),
                constraint: format!(
                    "`{}` is not compactly supported and cannot be used with `{command}`",
                    self.config.surface.family
                ),
            })
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Validated> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)?.validate()
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation {
            field: field.into(),
            constraint: format!("must be finite and > 0, got {v}"),
        })
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::Validation {
            field: field.into(),
            constraint: format!("must be at least {min}, got {v}"),
        })
    }
}

impl RunConfig {
    /// Checks every field before any heavy computation.
    pub fn validate(self) -> Result<Validated> {
        let surface = builtin_surface(&self.surface.family, &self.surface.params)?;
        let a = self.layer.a;
        positive("layer.a", a)?;
        let support = surface.support_radius();
        let compact = support.is_finite();

        let geo = &self.geometry;
        at_least("geometry.thickness.initial_nodes", geo.thickness.initial_nodes, 3)?;
        positive("geometry.thickness.rel_tol", geo.thickness.rel_tol)?;
        at_least("geometry.total_curvature.order", geo.total_curvature.order, 1)?;
        at_least("geometry.total_curvature.initial_panels", geo.total_curvature.initial_panels, 1)?;
        positive("geometry.total_curvature.tolerance", geo.total_curvature.tolerance)?;

        let id = &self.identities;
        at_least("identities.samples", id.samples, 1)?;
        at_least("identities.modes", id.modes, 1)?;
        for (field, pts) in [("identities.mollifier_points", &id.mollifier_points), ("identities.decay_points", &id.decay_points)] {
            if let Some(x) = pts.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::Validation {
                    field: field.into(),
                    constraint: format!("entries must lie in (0, 1), got {x}"),
                });
            }
        }

        let c = &self.certify;
        let r0 = c.r0.unwrap_or(if compact { support } else { 1.0 });
        positive("certify.r0", r0)?;
        if compact && r0 < support {
            return Err(Error::Validation {
                field: "certify.r0".into(),
                constraint: format!("r0 = {r0} must be at least the support radius {support}"),
            });
        }
        let layer = LayerConfig::new(a, r0)?;
        c.certifier().sigma_values(r0)?;
        if !(c.delta_min >= 0.0) || !c.delta_min.is_finite() {
            return Err(Error::Validation {
                field: "certify.delta_min".into(),
                constraint: format!("must be finite and >= 0, got {}", c.delta_min),
            });
        }
        let loc = &c.localization;
        if let Some(r) = loc.radius {
            positive("certify.localization.radius", r)?;
        }
        if !(loc.transverse_fraction > 0.0 && loc.transverse_fraction < 1.0) {
            return Err(Error::Validation {
                field: "certify.localization.transverse_fraction".into(),
                constraint: format!("must lie in (0, 1), got {}", loc.transverse_fraction),
            });
        }
        at_least("certify.localization.plateau", loc.plateau as usize, 1)?;
        let q = &c.quadrature;
        at_least("certify.quadrature.order", q.order, 1)?;
        at_least("certify.quadrature.radial_panels", q.radial_panels, 1)?;
        at_least("certify.quadrature.angular_nodes", q.angular_nodes, 4)?;
        at_least("certify.quadrature.transverse_panels", q.transverse_panels, 1)?;

        let s = &self.solve;
        let grid = Grid::new(&s.grid, if compact { support } else { 1.0 }, a, s.bc)?;
        if compact && s.grid.r_max <= support {
            return Err(Error::Validation {
                field: "solve.grid.r_max".into(),
                constraint: format!("r_max = {} must exceed the support radius {support}", s.grid.r_max),
            });
        }
        validate_options(&s.eigen, grid.dim())?;
        for (i, &r) in s.bracket_radii.iter().enumerate() {
            if !r.is_finite() || (compact && r <= support) || r <= 0.0 {
                return Err(Error::Validation {
                    field: "solve.bracket_radii".into(),
                    constraint: format!("entry {i} = {r} must be finite and exceed the support radius"),
                });
            }
        }
        if s.refinement_levels == 1 {
            return Err(Error::Validation {
                field: "solve.refinement_levels".into(),
                constraint: "use 0 to skip the study or at least 2 levels".into(),
            });
        }

        let thickness = if compact {
            let t = validate_thickness(&surface, a, &geo.thickness)?;
            if let (Some(rho), false) = (t.rho_m, t.valid) {
                return Err(Error::Validation {
                    field: "layer.a".into(),
                    constraint: format!("a = {a} must be below rho_m = {rho}"),
                });
            }
            if let Some(rho) = t.rho_m {
                let limit = rho / CELLS_PER_RHO_M;
                let radii = std::iter::once(s.grid.r_max).chain(s.bracket_radii.iter().copied());
                for r in radii {
                    let g = GridSpec { r_max: r, ..s.grid };
                    let spacing = Grid::new(&g, support, a, s.bc)?.axis.max_spacing_within(support);
                    if spacing > limit {
                        return Err(Error::Validation {
                            field: "solve.grid.nodes".into(),
                            constraint: format!(
                                "lateral spacing {spacing:.4} inside the support exceeds rho_m/{CELLS_PER_RHO_M} = {limit:.4} at r_max = {r}"
                            ),
                        });
                    }
                }
            }
            Some(t)
        } else {
            None
        };
        Ok(Validated {
            config: self,
            surface,
            layer,
            thickness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_plane_config_fills_defaults() {
        let v = parse_config("[surface]\nfamily = \"plane\"\n[layer]\na = 1.0\n")
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(v.config.solve, SolveSpec::default());
        assert_eq!(v.config.output.format, OutputFormat::Json);
        assert_eq!(v.layer.r0, 1.0);
        assert_eq!(v.rho_m(), None);
    }

    #[test]
    fn thick_bump_layer_is_rejected_on_layer_a() {
        let text = "[surface]\nfamily = \"compact-bump\"\nparams = { h = 1.5, s = 1.5 }\n[layer]\na = 0.5\n";
        match parse_config(text).unwrap().validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "layer.a"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn misspelled_key_is_a_parse_error_naming_it() {
        let text = "laye.a = 1.0\n[surface]\nfamily = \"plane\"\n[layer]\na = 1.0\n";
        match parse_config(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("laye"), "{msg}"),
            other => panic!("expected a parse error, got {other:?}"),
        }
        let nested = "[surface]\nfamily = \"plane\"\n[layer]\na = 1.0\n[solve.grid]\nnode = 3\n";
        match parse_config(nested) {
            Err(Error::Parse(msg)) => assert!(msg.contains("node"), "{msg}"),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn r0_inside_support_is_rejected() {
        let text = "[surface]\nfamily = \"compact-bump\"\nparams = { h = 0.5, s = 3.0 }\n[layer]\na = 0.5\n[certify]\nr0 = 2.0\n";
        match parse_config(text).unwrap().validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "certify.r0"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn sphere_patch_is_not_compact() {
        let text = "[surface]\nfamily = \"sphere-patch-test\"\nparams = { radius = 2.0 }\n[layer]\na = 0.5\n";
        let v = parse_config(text).unwrap().validate().unwrap();
        assert!(v.require_compact("certify").is_err());
    }
}
