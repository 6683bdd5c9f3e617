//! Lowest eigenpairs of A x = lambda M x by thick-restart band Lanczos on
//! the shift-invert operator (A - sigma M)^{-1} M in the M inner product.
//! The shifted matrix is factorised once by sparse Cholesky; a failed
//! factorisation means the shift is not below the spectrum.

use super::assemble::DiscreteOperator;
use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::CsMat;

/// Eigensolver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Number of lowest eigenvalues sought.
    pub count: usize,
    /// Relative residual ||B psi - lambda psi|| <= tol |lambda| ||psi||.
    pub tol: f64,
    /// Shift as a fraction of kappa_1^2.
    pub shift_fraction: f64,
    /// Seed of the random start vector.
    pub seed: u64,
    pub krylov_dim: usize,
    /// Band width of the Lanczos recursion (largest resolvable multiplicity).
    pub block_size: usize,
    pub max_restarts: usize,
    /// Retries with a shift moved further below threshold on ShiftAboveSpectrum.
    pub shift_retries: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            count: 5,
            tol: 1e-9,
            shift_fraction: 0.9,
            seed: 0x5eed,
            krylov_dim: 30,
            block_size: 2,
            max_restarts: 300,
            shift_retries: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSolution {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// True relative residuals of the returned pairs.
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub shift: f64,
    pub seed: u64,
    pub restarts: usize,
    pub operator_applications: usize,
    /// Stored entries of the Cholesky factor.
    pub factor_nnz: usize,
    pub dim: usize,
}

/// Runs the solver, moving the shift down on ShiftAboveSpectrum.
pub fn lowest_eigenpairs(op: &DiscreteOperator, opts: &EigenOptions) -> Result<EigenSolution> {
    validate_options(opts, op.dim())?;
    let mut shift = opts.shift_fraction * op.threshold;
    let mut attempt = 0;
    loop {
        match solve_with_shift(op, opts, shift) {
            Err(Error::ShiftAboveSpectrum { .. }) if attempt < opts.shift_retries => {
                let gap = (op.threshold - shift).max(0.05 * op.threshold.abs().max(1e-3));
                shift = op.threshold - 2.0 * gap;
                attempt += 1;
            }
            Err(Error::ShiftAboveSpectrum { .. }) => return Err(Error::ShiftAboveSpectrum { shift }),
            other => return other,
        }
    }
}

/// Checks the settings against a problem of dimension `dim`.
pub fn validate_options(opts: &EigenOptions, dim: usize) -> Result<()> {
    let bad = |field: &str, constraint: String| {
        Err(Error::Validation {
            field: format!("solve.eigen.{field}"),
            constraint,
        })
    };
    if opts.count == 0 || opts.count >= dim {
        return bad("count", format!("need 0 < count < dim = {dim}, got {}", opts.count));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return bad("tol", format!("must lie in (0, 1), got {}", opts.tol));
    }
    if !opts.shift_fraction.is_finite() {
        return bad("shift_fraction", "must be finite".into());
    }
    if opts.block_size == 0 {
        return bad("block_size", "must be at least 1".into());
    }
    if opts.krylov_dim < opts.count + opts.block_size + 3 || opts.krylov_dim + opts.block_size >= dim {
        return bad(
            "krylov_dim",
            format!(
                "need count + block_size + 3 <= krylov_dim < dim - block_size, got {}",
                opts.krylov_dim
            ),
        );
    }
    Ok(())
}

fn solve_with_shift(op: &DiscreteOperator, opts: &EigenOptions, shift: f64) -> Result<EigenSolution> {
    let n = op.dim();
    let m = &op.mass;
    let llt = factorize(&op.stiffness, m, shift)?;
    let factor_nnz = llt.1;
    let llt = llt.0;
    let mdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum() };

    let mut applications = 0;
    let mut apply = |v: &[f64], out: &mut [f64]| -> Result<()> {
        out.iter_mut().zip(v.iter().zip(m)).for_each(|(o, (x, w))| *o = x * w);
        llt.solve_in_place(faer::MatMut::from_column_major_slice_mut(out, n, 1));
        applications += 1;
        Ok(())
    };

    // Band Lanczos: `b` vectors are kept ahead of the applied prefix, so
    // eigenvalues of multiplicity up to b are resolved.
    let b = opts.block_size;
    let kd = opts.krylov_dim;
    let cap = kd + b;
    let keep = (opts.count + opts.count.div_ceil(2) + 2).min(kd - b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random = |basis: &[Vec<f64>]| -> Result<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let before = mdot(&v, &v).sqrt();
            orthogonalize(&mut v, basis, &mdot, None);
            let s = mdot(&v, &v).sqrt();
            if s > 1e-8 * before {
                v.iter_mut().for_each(|x| *x /= s);
                return Ok(v);
            }
        }
        Err(Error::NoConvergence("cannot extend the Krylov basis".into()))
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);
    for _ in 0..b {
        let v = random(&basis)?;
        basis.push(v);
    }
    let mut h = DMatrix::<f64>::zeros(cap, cap);
    let mut known = DMatrix::<f64>::zeros(cap, cap);
    let mut applied = 0;
    let mut ritz_tol = opts.tol;
    let mut w = vec![0.0; n];
    for restart in 0..=opts.max_restarts {
        while applied < kd {
            apply(&basis[applied], &mut w)?;
            let scale = mdot(&w, &w).sqrt();
            let mut coef = vec![0.0; basis.len()];
            orthogonalize(&mut w, &basis, &mdot, Some(&mut coef));
            for (i, c) in coef.iter().enumerate() {
                h[(i, applied)] = *c;
                known[(i, applied)] = 1.0;
            }
            let beta = mdot(&w, &w).sqrt();
            let next = basis.len();
            known[(next, applied)] = 1.0;
            if beta > 1e-10 * scale {
                h[(next, applied)] = beta;
                basis.push(w.iter().map(|x| x / beta).collect());
            } else {
                h[(next, applied)] = 0.0;
                let v = random(&basis)?;
                basis.push(v);
            }
            applied += 1;
        }
        let a = applied;
        let sym = DMatrix::from_fn(a, a, |i, j| {
            let (x, y) = (known[(i, j)], known[(j, i)]);
            (x * h[(i, j)] + y * h[(j, i)]) / (x + y).max(1.0)
        });
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..a).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
        let theta_max = eig.eigenvalues[order[0]];
        let theta_min = eig.eigenvalues[order[a - 1]];
        if theta_max <= 0.0 || theta_min < -1e-8 * theta_max {
            return Err(Error::ShiftAboveSpectrum { shift });
        }
        // ||Op y - theta y|| = ||H[a.., ..a] s||
        let tail = |col: usize| -> Vec<f64> {
            (a..basis.len())
                .map(|r| (0..a).map(|c| h[(r, c)] * eig.eigenvectors[(c, col)]).sum())
                .collect()
        };
        let ritz_vector = |col: usize| -> Vec<f64> {
            let mut y = vec![0.0; n];
            for (i, v) in basis[..a].iter().enumerate() {
                let c = eig.eigenvectors[(i, col)];
                y.iter_mut().zip(v).for_each(|(p, q)| *p += c * q);
            }
            y
        };
        let converged = order[..opts.count].iter().all(|&c| {
            let r: f64 = tail(c).iter().map(|x| x * x).sum::<f64>().sqrt();
            r <= ritz_tol * eig.eigenvalues[c].abs()
        });
        if converged {
            let mut values = Vec::with_capacity(opts.count);
            let mut residuals = Vec::with_capacity(opts.count);
            let mut vectors = Vec::with_capacity(opts.count);
            for &c in &order[..opts.count] {
                let mut y = ritz_vector(c);
                let lambda = op.rayleigh_quotient(&y);
                let s = mdot(&y, &y).sqrt();
                y.iter_mut().for_each(|x| *x /= s);
                residuals.push(op.residual(lambda, &y) / lambda.abs().max(f64::MIN_POSITIVE));
                values.push(lambda);
                vectors.push(y);
            }
            if residuals.iter().all(|&r| r <= opts.tol) {
                let mut idx: Vec<usize> = (0..values.len()).collect();
                idx.sort_by(|&p, &q| values[p].total_cmp(&values[q]));
                return Ok(EigenSolution {
                    values: idx.iter().map(|&i| values[i]).collect(),
                    residuals: idx.iter().map(|&i| residuals[i]).collect(),
                    vectors: idx.iter().map(|&i| vectors[i].clone()).collect(),
                    shift,
                    seed: opts.seed,
                    restarts: restart,
                    operator_applications: applications,
                    factor_nnz,
                    dim: n,
                });
            }
            ritz_tol *= 0.1;
            if ritz_tol < 1e-15 {
                return Err(Error::NoConvergence(format!(
                    "true residuals {residuals:?} stay above {} at the Ritz tolerance floor",
                    opts.tol
                )));
            }
        }
        // thick restart: wanted Ritz vectors plus the unapplied band
        let mut next: Vec<Vec<f64>> = order[..keep].iter().map(|&c| ritz_vector(c)).collect();
        let mut hn = DMatrix::<f64>::zeros(cap, cap);
        let mut kn = DMatrix::<f64>::zeros(cap, cap);
        for (i, &c) in order[..keep].iter().enumerate() {
            hn[(i, i)] = eig.eigenvalues[c];
            let t = tail(c);
            for (r, v) in t.iter().enumerate() {
                hn[(keep + r, i)] = *v;
                kn[(keep + r, i)] = 1.0;
            }
            for j in 0..keep {
                kn[(j, i)] = 1.0;
            }
        }
        next.extend(basis.drain(a..));
        basis = next;
        h = hn;
        known = kn;
        applied = keep;
    }
    Err(Error::NoConvergence(format!(
        "no convergence after {} restarts",
        opts.max_restarts
    )))
}

/// Two passes of classical Gram-Schmidt in the M inner product.
fn orthogonalize<F: Fn(&[f64], &[f64]) -> f64>(
    w: &mut [f64],
    basis: &[Vec<f64>],
    mdot: &F,
    mut coef: Option<&mut Vec<f64>>,
) {
    for _ in 0..2 {
        let d: Vec<f64> = basis.iter().map(|v| mdot(v, w)).collect();
        for (v, di) in basis.iter().zip(&d) {
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= di * y);
        }
        if let Some(c) = coef.as_deref_mut() {
            c.iter_mut().zip(&d).for_each(|(c, d)| *c += d);
        }
    }
}

/// Cholesky factor of A - sigma diag(M) and its number of stored entries.
fn factorize(a: &CsMat<f64>, m: &[f64], sigma: f64) -> Result<(faer::sparse::linalg::solvers::Llt<usize, f64>, usize)> {
    let n = a.rows();
    // A is symmetric, so its CSR arrays are also the CSC arrays; keep the
    // lower triangle only.
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::with_capacity(a.nnz() / 2 + n);
    let mut val = Vec::with_capacity(a.nnz() / 2 + n);
    col_ptr.push(0);
    for (c, col) in a.outer_iterator().enumerate() {
        for (r, &v) in col.iter() {
            if r >= c {
                row_idx.push(r);
                val.push(if r == c { v - sigma * m[r] } else { v });
            }
        }
        col_ptr.push(row_idx.len());
    }
    let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let mat = SparseColMat::new(sym, val);
    let nnz = faer::sparse::linalg::cholesky::factorize_symbolic_cholesky(
        mat.symbolic(),
        faer::Side::Lower,
        Default::default(),
        Default::default(),
    )
    .map(|s| s.len_val())
    .unwrap_or(0);
    let llt = mat
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(_) => Error::ShiftAboveSpectrum { shift: sigma },
            other => Error::NoConvergence(format!("sparse factorisation failed: {other}")),
        })?;
    Ok((llt, nnz))
}
