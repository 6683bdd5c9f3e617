use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use qlayer::spectral::{
    assemble, lowest_eigenpairs, solve, DiscreteOperator, EigenOptions, Grid, GridSpec, LateralBc,
};
use qlayer::surfaces::{CompactBump, Plane};
use sprs::{CsMat, TriMat};
use std::f64::consts::PI;

fn opts(count: usize) -> EigenOptions {
    EigenOptions {
        count,
        ..Default::default()
    }
}

#[test]
fn one_dimensional_dirichlet_laplacian() {
    // -v'' on (-1, 1) with 200 interior nodes, in the symmetric form (K/h, h I).
    let n = 200;
    let h = 2.0 / (n + 1) as f64;
    let mut t = TriMat::new((n, n));
    for i in 0..n {
        t.add_triplet(i, i, 2.0 / h);
        if i + 1 < n {
            t.add_triplet(i, i + 1, -1.0 / h);
            t.add_triplet(i + 1, i, -1.0 / h);
        }
    }
    let spec = GridSpec {
        nodes: 3,
        transverse_nodes: 1,
        ..Default::default()
    };
    let op = DiscreteOperator {
        grid: Grid::new(&spec, 1.0, 1.0, LateralBc::Neumann).unwrap(),
        stiffness: t.to_csr(),
        mass: vec![h; n],
        threshold: PI * PI / 4.0,
    };
    let sol = lowest_eigenpairs(&op, &opts(3)).unwrap();
    for (k, l) in sol.values.iter().enumerate() {
        let exact = (PI * (k + 1) as f64 / 2.0).powi(2);
        assert!((l - exact).abs() / exact < 1e-4 * (k + 1).pow(2) as f64, "{k}: {l}");
    }
    assert!((sol.values[0] - PI * PI / 4.0).abs() / (PI * PI / 4.0) < 1e-4);
}

/// Eigenvalues of the 1D lateral problem K v = mu W v on the given axis:
/// the plane operator is its Kronecker sum plus the exact transverse level.
fn lateral_spectrum(nodes: &[f64], bc: LateralBc) -> Vec<f64> {
    let n = nodes.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = nodes[i + 1] - nodes[i];
        k[(i, i)] += 1.0 / h;
        k[(i + 1, i + 1)] += 1.0 / h;
        k[(i, i + 1)] -= 1.0 / h;
        k[(i + 1, i)] -= 1.0 / h;
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    let keep: Vec<usize> = match bc {
        LateralBc::Neumann => (0..n).collect(),
        LateralBc::Dirichlet => (1..n - 1).collect(),
    };
    let m = keep.len();
    let s = DMatrix::from_fn(m, m, |a, b| {
        k[(keep[a], keep[b])] / (w[keep[a]] * w[keep[b]]).sqrt()
    });
    let mut mu: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    mu.sort_by(f64::total_cmp);
    mu
}

#[test]
fn plane_spectrum_is_the_separable_sum() {
    let spec = GridSpec {
        r_max: 20.0,
        nodes: 41,
        core_fraction: 0.3,
        transverse_nodes: 4,
        ..Default::default()
    };
    for bc in [LateralBc::Dirichlet, LateralBc::Neumann] {
        let (r, _) = solve(&Plane, 1.0, None, &spec, bc, &opts(6)).unwrap();
        let grid = Grid::new(&spec, 1.0, 1.0, bc).unwrap();
        let mu = lateral_spectrum(&grid.axis.nodes, bc);
        let mut sums: Vec<f64> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| r.threshold + mu[i] + mu[j])
            .collect();
        sums.sort_by(f64::total_cmp);
        for (l, want) in r.eigenvalues.iter().zip(&sums) {
            assert!((l - want).abs() < 1e-9 * want, "{bc:?}: {l} vs {want}");
        }
    }
}

#[test]
fn plane_ground_state_sits_just_above_threshold() {
    let spec = GridSpec {
        r_max: 20.0,
        nodes: 81,
        core_fraction: 0.3,
        transverse_nodes: 8,
        ..Default::default()
    };
    let (r, _) = solve(&Plane, 1.0, None, &spec, LateralBc::Dirichlet, &opts(3)).unwrap();
    let k2 = PI * PI / 4.0;
    assert!((r.threshold - k2).abs() < 1e-14);
    assert!(r.eigenvalues[0] > k2 && r.eigenvalues[0] < k2 + 0.05, "{:?}", r.eigenvalues);
    assert_eq!(r.below_threshold, 0);
}

#[test]
fn matrix_dump_is_one_indexed_and_round_trips() {
    let b = CompactBump::new(0.3, 1.0).unwrap();
    let spec = GridSpec {
        r_max: 3.0,
        nodes: 21,
        core_fraction: 0.6,
        transverse_nodes: 3,
        ..Default::default()
    };
    let grid = Grid::new(&spec, 1.0, 0.2, LateralBc::Dirichlet).unwrap();
    let op = assemble(&b, &grid, None).unwrap();
    let dir = std::env::temp_dir().join(format!("qlayer-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, m) = (dir.join("a.mtx"), dir.join("m.mtx"));
    op.dump(&a, &m).unwrap();

    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let dims: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(dims[0], op.dim());
    assert_eq!(dims[1], op.dim());
    let mut min_index = usize::MAX;
    let mut max_index = 0;
    for l in lines {
        let mut it = l.split_whitespace();
        for _ in 0..2 {
            let i: usize = it.next().unwrap().parse().unwrap();
            min_index = min_index.min(i);
            max_index = max_index.max(i);
        }
    }
    assert_eq!(min_index, 1);
    assert_eq!(max_index, op.dim());

    let back: CsMat<f64> = sprs::io::read_matrix_market::<f64, usize, _>(&a).unwrap().to_csr();
    assert_eq!(back.nnz(), op.nnz());
    for (v, (i, j)) in op.stiffness.iter() {
        assert_eq!(back.get(i, j), Some(v));
    }
    let mass: CsMat<f64> = sprs::io::read_matrix_market::<f64, usize, _>(&m).unwrap().to_csr();
    for (i, w) in op.mass.iter().enumerate() {
        assert_eq!(mass.get(i, i), Some(w));
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn neumann_levels_never_exceed_dirichlet_levels(
        h in 0.05f64..0.4,
        s in 1.5f64..3.0,
        r_max in 4.0f64..8.0,
        seed in 0u64..1000,
    ) {
        let b = CompactBump::new(h, s).unwrap();
        let spec = GridSpec { r_max, nodes: 41, core_fraction: 0.6, transverse_nodes: 3, ..Default::default() };
        let o = EigenOptions { seed, ..opts(5) };
        let n = solve(&b, 0.2, None, &spec, LateralBc::Neumann, &o);
        let d = solve(&b, 0.2, None, &spec, LateralBc::Dirichlet, &o);
        let ((n, na), (d, da)) = (n.unwrap(), d.unwrap());
        prop_assert!(na.symmetry_defect() == 0.0 && da.symmetry_defect() == 0.0);
        for (x, y) in n.eigenvalues.iter().zip(&d.eigenvalues) {
            prop_assert!(*x <= y * (1.0 + 1e-9), "{x} > {y}");
        }
    }

    #[test]
    fn seeds_do_not_change_converged_levels(seed in 0u64..10_000) {
        let spec = GridSpec { r_max: 6.0, nodes: 21, core_fraction: 0.5, transverse_nodes: 3, ..Default::default() };
        let b = CompactBump::new(0.3, 1.5).unwrap();
        let (a, _) = solve(&b, 0.2, None, &spec, LateralBc::Dirichlet, &opts(4)).unwrap();
        let (c, _) = solve(&b, 0.2, None, &spec, LateralBc::Dirichlet, &EigenOptions { seed, ..opts(4) }).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&c.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-8 * x);
        }
    }
}
