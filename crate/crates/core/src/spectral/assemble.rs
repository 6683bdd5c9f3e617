//! Finite-volume discretisation of H = -d_mu G^{mu nu} d_nu - d_u^2 + V on a
//! tensor grid, as a symmetric stiffness matrix and a diagonal mass.

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::forms::PotentialColumn;
use crate::geometry::{compute_curvature, Mat2, Orientation, Surface};
use crate::layer::layer_metric_at;
use rayon::prelude::*;
use sprs::CsMat;
use std::path::Path;

/// Minimum number of lateral cells per rho_m inside the deformation.
pub const CELLS_PER_RHO_M: f64 = 8.0;

/// Generalised eigenproblem A x = lambda M x with M diagonal.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub stiffness: CsMat<f64>,
    pub mass: Vec<f64>,
    pub threshold: f64,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn nnz(&self) -> usize {
        self.stiffness.nnz()
    }

    /// max |A_ij - A_ji| / max |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.stiffness.transpose_view().to_csr();
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (r, rt) in self.stiffness.outer_iterator().zip(t.outer_iterator()) {
            if r.nnz() != rt.nnz() {
                return f64::INFINITY;
            }
            for ((c, v), (ct, vt)) in r.iter().zip(rt.iter()) {
                if c != ct {
                    return f64::INFINITY;
                }
                defect = defect.max((v - vt).abs());
                scale = scale.max(v.abs());
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            0.0
        }
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        csr_matvec(&self.stiffness, x, y);
    }

    /// x^T A x / x^T M x.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&self.mass).map(|(a, m)| a * a * m).sum();
        num / den
    }

    /// ||M^{-1/2}(A x - lambda M x)|| / ||M^{1/2} x||, the residual of the
    /// symmetric problem M^{-1/2} A M^{-1/2}.
    pub fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            let r = y[i] - lambda * self.mass[i] * x[i];
            num += r * r / self.mass[i];
            den += self.mass[i] * x[i] * x[i];
        }
        (num / den).sqrt()
    }

    /// Writes A and diag(M) as 1-indexed Matrix Market coordinate files.
    pub fn dump(&self, stiffness: &Path, mass: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        sprs::io::write_matrix_market(stiffness, &self.stiffness).map_err(io)?;
        let m = CsMat::new_csc(
            (self.dim(), self.dim()),
            (0..=self.dim()).collect(),
            (0..self.dim()).collect(),
            self.mass.clone(),
        );
        sprs::io::write_matrix_market(mass, &m).map_err(io)
    }
}

/// Row-parallel CSR product.
pub(crate) fn csr_matvec(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    let ptr = a.indptr();
    let ptr = ptr.raw_storage();
    let idx = a.indices();
    let val = a.data();
    let row = |i: usize| -> f64 {
        let mut s = 0.0;
        for p in ptr[i]..ptr[i + 1] {
            s += val[p] * x[idx[p]];
        }
        s
    };
    if y.len() >= 1 << 14 {
        y.par_chunks_mut(1 << 12).enumerate().for_each(|(c, chunk)| {
            for (o, yi) in chunk.iter_mut().enumerate() {
                *yi = row(c * (1 << 12) + o);
            }
        });
    } else {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = row(i);
        }
    }
}

/// Fitted transverse coefficient: with it the three-point Dirichlet
/// Laplacian on the u grid has lowest eigenvalue exactly kappa_1^2.
pub fn transverse_fit(kappa: f64, du: f64) -> f64 {
    let s = (0.5 * kappa * du).sin();
    (0.5 * kappa * du).powi(2) / (s * s)
}

/// Local 4x4 energy matrix of one lateral cell, nodes ordered
/// (0,0), (1,0), (0,1), (1,1).
fn cell_matrix(hx: f64, hy: f64, g: &Mat2) -> [[f64; 4]; 4] {
    let e1lo = [-1.0 / hx, 1.0 / hx, 0.0, 0.0];
    let e1hi = [0.0, 0.0, -1.0 / hx, 1.0 / hx];
    let e2lo = [-1.0 / hy, 0.0, 1.0 / hy, 0.0];
    let e2hi = [0.0, -1.0 / hy, 0.0, 1.0 / hy];
    let area = hx * hy;
    let mut k = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let b1p = 0.5 * (e1lo[p] + e1hi[p]);
            let b1q = 0.5 * (e1lo[q] + e1hi[q]);
            let b2p = 0.5 * (e2lo[p] + e2hi[p]);
            let b2q = 0.5 * (e2lo[q] + e2hi[q]);
            k[p][q] = area
                * (0.5 * g[(0, 0)] * (e1lo[p] * e1lo[q] + e1hi[p] * e1hi[q])
                    + 0.5 * g[(1, 1)] * (e2lo[p] * e2lo[q] + e2hi[p] * e2hi[q])
                    + g[(0, 1)] * (b1p * b2q + b2p * b1q));
        }
    }
    k
}

/// Assembles the operator. `rho_m` (when finite) enforces the resolution
/// rule: lateral spacing inside the support must not exceed rho_m/8.
pub fn assemble<S: Surface + ?Sized>(surface: &S, grid: &Grid, rho_m: Option<f64>) -> Result<DiscreteOperator> {
    let support = surface.support_radius();
    if let Some(rho) = rho_m {
        let limit = rho / CELLS_PER_RHO_M;
        let spacing = grid.axis.max_spacing_within(support);
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { spacing, limit });
        }
    }
    let x = &grid.axis.nodes;
    let n = x.len();
    let nu = grid.transverse_nodes;
    let du = grid.du();
    let a = grid.half_width;
    let kappa = std::f64::consts::PI / (2.0 * a);
    let fit = transverse_fit(kappa, du);
    let flat_beyond = support * (1.0 + 1e-6);
    let is_flat = |q: [f64; 2]| (q[0] * q[0] + q[1] * q[1]).sqrt() > flat_beyond;

    // G^{mu nu} at cell centres, per u level
    let cells: Vec<Vec<Mat2>> = (0..(n - 1) * (n - 1))
        .into_par_iter()
        .map(|c| -> Result<Vec<Mat2>> {
            let (i, j) = (c / (n - 1), c % (n - 1));
            let q = [0.5 * (x[i] + x[i + 1]), 0.5 * (x[j] + x[j + 1])];
            if is_flat(q) {
                return Ok(vec![Mat2::identity(); nu]);
            }
            let cd = compute_curvature(surface, q)?;
            (1..=nu).map(|k| Ok(layer_metric_at(&cd, grid.u(k))?.contra)).collect()
        })
        .collect::<Result<_>>()?;

    // V = V1 + V2 at nodes
    let potential: Vec<Vec<f64>> = (0..n * n)
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let q = [x[c / n], x[c % n]];
            if is_flat(q) {
                return Ok(vec![0.0; nu]);
            }
            let col = PotentialColumn::new(surface, q, Orientation::Standard)?;
            (1..=nu).map(|k| col.potential(grid.u(k))).collect()
        })
        .collect::<Result<_>>()?;

    let w = grid.axis.dual_widths();
    let active = grid.active();
    let m = active.len();
    let dim = grid.dim();
    let nodes: Vec<(usize, usize)> = active
        .clone()
        .flat_map(|i| active.clone().map(move |j| (i, j)))
        .collect();

    // per active lateral node: (row entries per k, mass per k)
    let rows: Vec<(Vec<Vec<(usize, f64)>>, f64)> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let mut stencil = vec![[[0.0f64; 3]; 3]; nu];
            for ci in i.saturating_sub(1)..=i.min(n - 2) {
                for cj in j.saturating_sub(1)..=j.min(n - 2) {
                    let hx = x[ci + 1] - x[ci];
                    let hy = x[cj + 1] - x[cj];
                    let p = (i - ci) + 2 * (j - cj);
                    for (k, st) in stencil.iter_mut().enumerate() {
                        let km = cell_matrix(hx, hy, &cells[ci * (n - 1) + cj][k]);
                        for (q, kq) in km[p].iter().enumerate() {
                            let (qi, qj) = (ci + (q & 1), cj + (q >> 1));
                            st[qi + 1 - i][qj + 1 - j] += kq * du;
                        }
                    }
                }
            }
            let weight = w[i] * w[j];
            let u_off = -weight * fit / du;
            let mut out = Vec::with_capacity(nu);
            for k in 1..=nu {
                let st = &stencil[k - 1];
                let mut row = Vec::with_capacity(11);
                for di in 0..3 {
                    for dj in 0..3 {
                        let (ii, jj) = ((i + di).wrapping_sub(1), (j + dj).wrapping_sub(1));
                        if di == 1 && dj == 1 {
                            let base = grid.index(i, j, 1).unwrap();
                            if k > 1 {
                                row.push((base + k - 2, u_off));
                            }
                            let diag = st[1][1]
                                + 2.0 * weight * fit / du
                                + weight * du * potential[i * n + j][k - 1];
                            row.push((base + k - 1, diag));
                            if k < nu {
                                row.push((base + k, u_off));
                            }
                        } else if let Some(c) = grid.index(ii, jj, k) {
                            if st[di][dj] != 0.0 {
                                row.push((c, st[di][dj]));
                            }
                        }
                    }
                }
                out.push(row);
            }
            (out, weight * du)
        })
        .collect();

    let mut indptr = Vec::with_capacity(dim + 1);
    let mut indices = Vec::with_capacity(dim * 11);
    let mut data = Vec::with_capacity(dim * 11);
    let mut mass = Vec::with_capacity(dim);
    indptr.push(0);
    for (node_rows, weight) in rows {
        for row in node_rows {
            for (c, v) in row {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
            mass.push(weight);
        }
    }
    debug_assert_eq!(mass.len(), m * m * nu);
    Ok(DiscreteOperator {
        grid: grid.clone(),
        stiffness: CsMat::new((dim, dim), indptr, indices, data),
        mass,
        threshold: kappa * kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::{GridSpec, LateralBc};
    use crate::surfaces::{CompactBump, Plane};

    fn small(bc: LateralBc) -> Grid {
        let spec = GridSpec {
            r_max: 3.0,
            core_half_width: Some(1.0),
            nodes: 13,
            core_fraction: 0.5,
            transverse_nodes: 4,
        };
        Grid::new(&spec, 1.0, 0.5, bc).unwrap()
    }

    #[test]
    fn fitted_transverse_coefficient_tends_to_one() {
        assert!((transverse_fit(3.0, 1e-4) - 1.0).abs() < 1e-8);
        let kappa = 2.0;
        let du = 0.1;
        let lam = transverse_fit(kappa, du) * 4.0 / (du * du) * (0.5 * kappa * du).sin().powi(2);
        assert!((lam - kappa * kappa).abs() < 1e-12);
    }

    #[test]
    fn plane_neumann_constant_mode_sits_at_threshold() {
        let g = small(LateralBc::Neumann);
        let op = assemble(&Plane, &g, None).unwrap();
        assert_eq!(op.symmetry_defect(), 0.0);
        let nu = g.transverse_nodes;
        let x: Vec<f64> = (0..op.dim())
            .map(|r| (std::f64::consts::PI * (r % nu + 1) as f64 / (nu + 1) as f64).sin())
            .collect();
        assert!(op.residual(op.threshold, &x) < 1e-12 * op.threshold);
    }

    #[test]
    fn bump_operator_is_symmetric_and_resolution_is_enforced() {
        let b = CompactBump::new(0.3, 1.0).unwrap();
        let op = assemble(&b, &small(LateralBc::Dirichlet), Some(10.0)).unwrap();
        assert_eq!(op.symmetry_defect(), 0.0);
        assert!(matches!(
            assemble(&b, &small(LateralBc::Dirichlet), Some(0.5)),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
