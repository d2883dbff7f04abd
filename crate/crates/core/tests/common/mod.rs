//! Helpers shared by the integration tests.
#![allow(dead_code)]

use fraclap::domain::{BoundaryCondition, DomainSpec, Field, Grid};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// The five boundary regimes on small grids.
pub fn regimes(n: usize) -> Vec<(&'static str, Arc<Grid>, BoundaryCondition)> {
    let rect = Arc::new(Grid::new(&DomainSpec::rectangle(1.0, 1.5, 1.0), [n, n]).unwrap());
    let par = Arc::new(Grid::new(&DomainSpec::parallelogram([1.0, 0.0], [0.4, 0.9], 1.0), [n, n]).unwrap());
    vec![
        ("neumann", rect.clone(), BoundaryCondition::Neumann),
        ("dirichlet", rect.clone(), BoundaryCondition::Dirichlet),
        ("periodic", rect.clone(), BoundaryCondition::Periodic),
        ("mixed", rect, BoundaryCondition::MixedDn { dirichlet_axis: 1 }),
        ("quasi", par, BoundaryCondition::quasi(0.7, 2.1)),
    ]
}

pub fn random_real(grid: &Arc<Grid>, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = grid.dims();
    Field::new(grid.clone(), Array2::from_shape_fn((dims[0], dims[1]), |_| rng.random_range(-1.0..1.0))).unwrap()
}

pub fn random_complex(grid: &Arc<Grid>, seed: u64) -> Field<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = grid.dims();
    let v = Array2::from_shape_fn((dims[0], dims[1]), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    Field::new(grid.clone(), v).unwrap()
}

/// Continuum eigenpairs sampled at the nodes, one vector per mode, flattened
/// with the first index major.
fn sampled_modes(grid: &Grid, bc: &BoundaryCondition) -> Vec<(f64, Vec<Complex64>)> {
    let [n1, n2] = grid.dims();
    let nodes: Vec<[f64; 2]> =
        (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).map(|(i, j)| grid.position(i, j)).collect();
    let mut modes = Vec::with_capacity(n1 * n2);
    if let Some(theta) = bc.phases() {
        let [h1, h2] = grid.cell();
        let det = h1[0] * h2[1] - h1[1] * h2[0];
        let b = [[h2[1] / det, -h2[0] / det], [-h1[1] / det, h1[0] / det]];
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                // smallest wave vector among the aliases of (k1, k2)
                let mut best = (f64::INFINITY, [0.0; 2]);
                for a1 in -3i64..=3 {
                    for a2 in -3i64..=3 {
                        let c1 = TAU * (k1 as i64 + a1 * n1 as i64) as f64 + theta[0];
                        let c2 = TAU * (k2 as i64 + a2 * n2 as i64) as f64 + theta[1];
                        let kv = [c1 * b[0][0] + c2 * b[1][0], c1 * b[0][1] + c2 * b[1][1]];
                        let m = kv[0] * kv[0] + kv[1] * kv[1];
                        if m < best.0 {
                            best = (m, kv);
                        }
                    }
                }
                let kv = best.1;
                let v = nodes.iter().map(|p| Complex64::from_polar(1.0, kv[0] * p[0] + kv[1] * p[1])).collect();
                modes.push((best.0, v));
            }
        }
    } else {
        let [h1, h2] = grid.cell();
        let lengths = [h1[0], h2[1]];
        let sine = |axis: usize| match bc {
            BoundaryCondition::Dirichlet => true,
            BoundaryCondition::MixedDn { dirichlet_axis } => *dirichlet_axis == axis,
            _ => false,
        };
        let factor = |axis: usize, k: usize, x: f64| {
            if sine(axis) {
                (PI * (k + 1) as f64 * x / lengths[axis]).sin()
            } else {
                (PI * k as f64 * x / lengths[axis]).cos()
            }
        };
        let wave = |axis: usize, k: usize| PI * (k + sine(axis) as usize) as f64 / lengths[axis];
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let mu = wave(0, k1).powi(2) + wave(1, k2).powi(2);
                let v = nodes.iter().map(|p| Complex64::new(factor(0, k1, p[0]) * factor(1, k2, p[1]), 0.0)).collect();
                modes.push((mu, v));
            }
        }
    }
    modes
}

/// `(−Δ)^s u` from a dense Hermitian matrix `Σ μ φφ*/|φ|²` raised to the
/// power `s` through its eigendecomposition.
pub fn dense_fraclap(grid: &Grid, bc: &BoundaryCondition, s: f64, u: Vec<Complex64>) -> Vec<Complex64> {
    let n = u.len();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for (mu, phi) in sampled_modes(grid, bc) {
        let v = DVector::from_vec(phi);
        let norm2 = v.norm_squared();
        l += (&v * v.adjoint()) * Complex64::new(mu / norm2, 0.0);
    }
    // symmetrize away rounding before the Hermitian solver
    let l = (&l + l.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = l.symmetric_eigen();
    let scale = eig.eigenvalues.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
    let pow = eig.eigenvalues.map(|m| if m <= 1e-12 * scale { 0.0 } else { m.powf(s) });
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&pow.map(|x| Complex64::new(x, 0.0)));
    let ls = q * d * q.adjoint();
    (ls * DVector::from_vec(u)).iter().copied().collect()
}

pub fn flatten<T: Copy>(a: &Array2<T>) -> Vec<T> {
    a.iter().copied().collect()
}
