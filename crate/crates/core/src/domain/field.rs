use super::{Grid, Point};
use crate::error::{Error, Result};
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Node values: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
{
    const KIND: ScalarKind;

    fn to_complex(self) -> Complex64;
    /// Real part for `f64`, identity for complex.
    fn from_complex(c: Complex64) -> Self;
    fn modulus(self) -> f64;
    /// `Re(conj(self)·other)`.
    fn re_dot(self, other: Self) -> f64;
    fn mul_phase(self, z: Complex64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn re_dot(self, other: Self) -> f64 {
        self * other
    }
    fn mul_phase(self, z: Complex64) -> Self {
        self * z.re
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex;

    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(c: Complex64) -> Self {
        c
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn re_dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
    fn mul_phase(self, z: Complex64) -> Self {
        self * z
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Sampled function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Array2<T>,
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Array2<T>) -> Result<Self> {
        let d = grid.dims();
        if values.dim() != (d[0], d[1]) {
            return Err(Error::Incompatible(format!(
                "values shape {:?} does not match grid dims {:?}",
                values.dim(),
                d
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let d = grid.dims();
        Field { values: Array2::default((d[0], d[1])), grid }
    }

    pub fn constant(grid: Arc<Grid>, c: T) -> Self {
        let d = grid.dims();
        Field { values: Array2::from_elem((d[0], d[1]), c), grid }
    }

    /// Samples `f` at the physical node positions.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(Point) -> T) -> Self {
        let d = grid.dims();
        let values = Array2::from_shape_fn((d[0], d[1]), |(i, j)| f(grid.position(i, j)));
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn kind(&self) -> ScalarKind {
        T::KIND
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field { grid: self.grid.clone(), values: self.values.mapv(f) }
    }

    pub fn to_complex(&self) -> Field<Complex64> {
        self.map(|v| v.to_complex())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| v * a)
    }

    pub fn check_same_grid(&self, other: &Field<T>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::Incompatible("fields live on different grids".into()))
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field<T>) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = Zip::from(&self.values).and(&other.values).map_collect(|&x, &y| x + y * a);
        Ok(Field { grid: self.grid.clone(), values })
    }

    /// Weighted inner product `Re Σ w·conj(u)·v`.
    pub fn inner(&self, other: &Field<T>) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut s = 0.0;
        Zip::from(&self.values).and(&other.values).for_each(|&x, &y| s += x.re_dot(y));
        Ok(s * self.grid.weight())
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.re_dot(*v)).sum();
        (s * self.grid.weight()).sqrt()
    }

    /// `∫|u|^q`.
    pub fn mass_q(&self, q: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.modulus().powf(q)).sum();
        s * self.grid.weight()
    }

    pub fn norm_lq(&self, q: f64) -> f64 {
        self.mass_q(q).powf(1.0 / q)
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.modulus() == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_deviation(&self, other: &Field<T>) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(Zip::from(&self.values).and(&other.values).fold(0.0f64, |m, &x, &y| m.max((x - y).modulus())))
    }
}

impl Field<Complex64> {
    /// Real part, failing if any imaginary part exceeds `tol` relative to the maximum.
    pub fn to_real(&self, tol: f64) -> Result<Field<f64>> {
        let max = self.max_modulus();
        let worst = self.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        if worst > tol * max.max(f64::MIN_POSITIVE) {
            return Err(Error::Incompatible(format!("field has imaginary part {worst:e} above tolerance")));
        }
        Ok(self.map(|v| v.re))
    }
}

/// Real or complex field, used at I/O boundaries.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Real(Field<f64>),
    Complex(Field<Complex64>),
}

impl AnyField {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            AnyField::Real(f) => f.grid(),
            AnyField::Complex(f) => f.grid(),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyField::Real(_) => ScalarKind::Real,
            AnyField::Complex(_) => ScalarKind::Complex,
        }
    }

    pub fn to_complex(&self) -> Field<Complex64> {
        match self {
            AnyField::Real(f) => f.to_complex(),
            AnyField::Complex(f) => f.clone(),
        }
    }
}

impl From<Field<f64>> for AnyField {
    fn from(f: Field<f64>) -> Self {
        AnyField::Real(f)
    }
}

impl From<Field<Complex64>> for AnyField {
    fn from(f: Field<Complex64>) -> Self {
        AnyField::Complex(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};

    fn unit() -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::square(1.0), 16).unwrap())
    }

    #[test]
    fn constant_norms() {
        let u = Field::constant(unit(), 1.0);
        assert!((u.norm_l2() - 1.0).abs() < 1e-14);
        assert!((u.norm_lq(4.0) - 1.0).abs() < 1e-14);
        let g = Arc::new(build_grid(&DomainSpec::square(3.0), 4).unwrap());
        let c = 2.0;
        let v = Field::constant(g, c);
        assert!((v.norm_l2() - c * 3.0).abs() < 1e-12);
        assert!((v.norm_lq(4.0) - c * 9f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn shape_checked() {
        assert!(Field::new(unit(), Array2::<f64>::zeros((3, 3))).is_err());
    }

    #[test]
    fn complex_inner_is_real_part() {
        let g = unit();
        let u = Field::constant(g.clone(), Complex64::new(1.0, 1.0));
        let v = Field::constant(g, Complex64::new(0.0, 1.0));
        assert!((u.inner(&v).unwrap() - 1.0).abs() < 1e-14);
        assert!((u.norm_l2() - 2f64.sqrt()).abs() < 1e-14);
    }
}
