//! Spectral fractional Laplacians as diagonal multipliers.
//!
//! Each boundary regime has an orthonormal sampling basis: cosines (DCT-II)
//! for Neumann, sines (DST-II) for Dirichlet, twisted exponentials (FFT) for
//! periodic and quasi-periodic cells. Coefficients are scaled by the square
//! root of the node weight, so `Σ|c|² = ‖u‖²₂` holds exactly.

mod transform;

use crate::domain::{BoundaryCondition, Field, Grid, Scalar};
use crate::error::{invalid, Error, Result};
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;
use transform::AxisPlan;

pub use transform::AxisBasis;

/// Laplacian eigenvalues indexed like the transform coefficients, plus the plans
/// needed to move between node values and coefficients.
#[derive(Clone)]
pub struct SpectralSymbol {
    grid: Arc<Grid>,
    bc: BoundaryCondition,
    axes: [AxisBasis; 2],
    theta: [f64; 2],
    mu: Array2<f64>,
    plans: [AxisPlan; 2],
}

impl fmt::Debug for SpectralSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSymbol")
            .field("bc", &self.bc)
            .field("axes", &self.axes)
            .field("dims", &self.grid.dims())
            .finish()
    }
}

/// Builds the symbol of the `bc` Laplacian on `grid`.
///
/// Triangle cells accept Neumann and Dirichlet conditions: they are realized
/// on the periodic cell together with the even or odd reflection group, so
/// the symbol itself is the periodic one.
pub fn symbol(grid: &Arc<Grid>, bc: &BoundaryCondition) -> Result<SpectralSymbol> {
    bc.validate()?;
    let domain = grid.domain();
    let incompatible = |what: &str| Err(Error::Incompatible(format!("{bc} on {what}")));
    let (axes, theta) = if domain.is_triangle() {
        match bc {
            BoundaryCondition::Neumann | BoundaryCondition::Dirichlet | BoundaryCondition::Periodic => {
                ([AxisBasis::Fourier; 2], [0.0, 0.0])
            }
            _ => return incompatible("a triangle cell"),
        }
    } else {
        match bc {
            BoundaryCondition::Periodic | BoundaryCondition::QuasiPeriodic { .. } => {
                ([AxisBasis::Fourier; 2], bc.phases().expect("phases"))
            }
            _ if !(grid.is_rectangular() && grid.offset() == 0.5) => {
                return incompatible("a non-rectangular cell");
            }
            BoundaryCondition::Neumann => ([AxisBasis::Cosine; 2], [0.0; 2]),
            BoundaryCondition::Dirichlet => ([AxisBasis::Sine; 2], [0.0; 2]),
            BoundaryCondition::MixedDn { dirichlet_axis } => {
                let mut axes = [AxisBasis::Cosine; 2];
                axes[*dirichlet_axis] = AxisBasis::Sine;
                (axes, [0.0; 2])
            }
        }
    };
    let mu = eigenvalues(grid, axes, theta);
    let dims = grid.dims();
    let plans = [AxisPlan::new(axes[0], dims[0], theta[0]), AxisPlan::new(axes[1], dims[1], theta[1])];
    Ok(SpectralSymbol { grid: grid.clone(), bc: bc.clone(), axes, theta, mu, plans })
}

fn eigenvalues(grid: &Grid, axes: [AxisBasis; 2], theta: [f64; 2]) -> Array2<f64> {
    let [n1, n2] = grid.dims();
    if axes[0] == AxisBasis::Fourier {
        let [h1, h2] = grid.cell();
        let det = h1[0] * h2[1] - h1[1] * h2[0];
        // dual basis: b_i · h_j = δ_ij
        let b1 = [h2[1] / det, -h2[0] / det];
        let b2 = [-h1[1] / det, h1[0] / det];
        Array2::from_shape_fn((n1, n2), |(k1, k2)| {
            let mut best = f64::INFINITY;
            for j1 in -2i64..=2 {
                for j2 in -2i64..=2 {
                    let m1 = (k1 as i64 + j1 * n1 as i64) as f64;
                    let m2 = (k2 as i64 + j2 * n2 as i64) as f64;
                    let a1 = TAU * m1 + theta[0];
                    let a2 = TAU * m2 + theta[1];
                    let kx = a1 * b1[0] + a2 * b2[0];
                    let ky = a1 * b1[1] + a2 * b2[1];
                    best = best.min(kx * kx + ky * ky);
                }
            }
            best
        })
    } else {
        let lengths = [grid.cell()[0][0], grid.cell()[1][1]];
        let kappa = |axis: usize, k: usize| {
            let j = match axes[axis] {
                AxisBasis::Sine => k + 1,
                _ => k,
            };
            PI * j as f64 / lengths[axis]
        };
        Array2::from_shape_fn((n1, n2), |(k1, k2)| {
            let a = kappa(0, k1);
            let b = kappa(1, k2);
            a * a + b * b
        })
    }
}

impl SpectralSymbol {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn axes(&self) -> [AxisBasis; 2] {
        self.axes
    }

    /// Mode eigenvalues `μ ≥ 0`.
    pub fn mu(&self) -> &Array2<f64> {
        &self.mu
    }

    /// `μ^s` with `0^s = 0`.
    pub fn powers(&self, s: f64) -> Array2<f64> {
        self.mu.mapv(|m| if m == 0.0 { 0.0 } else { m.powf(s) })
    }

    pub fn zero_modes(&self) -> usize {
        self.mu.iter().filter(|&&m| m == 0.0).count()
    }

    /// Smallest nonzero eigenvalue.
    pub fn mu_min_positive(&self) -> f64 {
        self.mu.iter().copied().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min)
    }

    pub fn mu_max(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    /// Whether real node values map back to real node values.
    pub fn admits_real(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0 || t == PI)
    }

    pub(crate) fn check<T: Scalar>(&self, u: &Field<T>) -> Result<()> {
        if !(Arc::ptr_eq(u.grid(), &self.grid) || u.grid().same_layout(&self.grid)) {
            return Err(Error::Incompatible("field grid does not match the symbol grid".into()));
        }
        if T::KIND == crate::domain::ScalarKind::Real && !self.admits_real() {
            return Err(Error::NeedsComplex(self.bc.to_string()));
        }
        Ok(())
    }

    /// Node values to orthonormal, weight-scaled coefficients.
    pub fn forward<T: Scalar>(&self, u: &Field<T>) -> Result<Array2<Complex64>> {
        self.check(u)?;
        let mut c = u.values().mapv(|v| v.to_complex());
        for axis in 0..2 {
            self.plans[axis].forward(&mut c, axis);
        }
        let sw = self.grid.weight().sqrt();
        c.mapv_inplace(|z| z * sw);
        Ok(c)
    }

    /// Coefficients back to node values.
    pub fn inverse<T: Scalar>(&self, coeffs: &Array2<Complex64>) -> Result<Field<T>> {
        let d = self.grid.dims();
        if coeffs.dim() != (d[0], d[1]) {
            return Err(Error::Incompatible("coefficient shape does not match the grid".into()));
        }
        if T::KIND == crate::domain::ScalarKind::Real && !self.admits_real() {
            return Err(Error::NeedsComplex(self.bc.to_string()));
        }
        let isw = 1.0 / self.grid.weight().sqrt();
        let mut c = coeffs.mapv(|z| z * isw);
        for axis in (0..2).rev() {
            self.plans[axis].inverse(&mut c, axis);
        }
        Field::new(self.grid.clone(), c.mapv(T::from_complex))
    }

    /// Multiplies every coefficient by `diag` and transforms back.
    pub fn apply_diagonal<T: Scalar>(&self, u: &Field<T>, diag: &Array2<f64>) -> Result<Field<T>> {
        let mut c = self.forward(u)?;
        Zip::from(&mut c).and(diag).for_each(|z, &d| *z *= d);
        self.inverse(&c)
    }

    /// `Σ diag·|c|²`.
    pub fn quadratic_form<T: Scalar>(&self, u: &Field<T>, diag: &Array2<f64>) -> Result<f64> {
        let c = self.forward(u)?;
        Ok(Zip::from(&c).and(diag).fold(0.0, |acc, z, &d| acc + d * z.norm_sqr()))
    }
}

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        invalid(format!("fractional order s must lie in (0, 1], got {s}"))
    }
}

/// `(−Δ)^s u` through the symbol.
pub fn apply_fraclap<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, s: f64) -> Result<Field<T>> {
    check_order(s)?;
    sym.apply_diagonal(u, &sym.powers(s))
}

/// `[u]² = Σ μ^s |c|²`.
pub fn seminorm_sq<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, s: f64) -> Result<f64> {
    check_order(s)?;
    sym.quadratic_form(u, &sym.powers(s))
}

/// `(‖u‖₂, ‖u‖_q)` with grid quadrature.
pub fn norms<T: Scalar>(u: &Field<T>, q: f64) -> Result<(f64, f64)> {
    if !(q >= 1.0) {
        return invalid(format!("q must be at least 1, got {q}"));
    }
    Ok((u.norm_l2(), u.norm_lq(q)))
}

/// `|[v1+v2]² − [v1]² − [v2]²|`, the cross term of the seminorm.
pub fn support_separation_defect<T: Scalar>(v1: &Field<T>, v2: &Field<T>, sym: &SpectralSymbol, s: f64) -> Result<f64> {
    v1.check_same_grid(v2)?;
    let sum = v1.axpy(1.0, v2)?;
    let d = seminorm_sq(&sum, sym, s)? - seminorm_sq(v1, sym, s)? - seminorm_sq(v2, sym, s)?;
    Ok(d.abs())
}
