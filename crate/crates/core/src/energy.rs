//! Quotient `J(u) = ([u]² + ‖u‖²₂) / ‖u‖²_q`, its gradient, Nehari scaling and
//! the residual of `(−Δ)^s u + u = |u|^{q−2}u`.

use crate::domain::{Field, Scalar, SymmetryGroup};
use crate::error::{invalid, Error, Result};
use crate::spectral::{check_order, SpectralSymbol};
use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

/// Order `s` and exponent `q` of the problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub s: f64,
    pub q: f64,
    /// Admit `q = 2*_s` (never attained minimizers; results are grid dependent).
    #[serde(default)]
    pub allow_critical: bool,
}

/// `2*_s = 2n/(n−2s)` for `n = 2`; infinite when `2s ≥ 2`.
pub fn critical_exponent(s: f64) -> f64 {
    if s >= 1.0 {
        f64::INFINITY
    } else {
        4.0 / (2.0 - 2.0 * s)
    }
}

impl EnergyParams {
    /// Strictly subcritical parameters.
    pub fn new(s: f64, q: f64) -> Result<Self> {
        let p = EnergyParams { s, q, allow_critical: false };
        p.validate()?;
        Ok(p)
    }

    /// Parameters allowed to sit exactly at the critical exponent.
    pub fn allowing_critical(s: f64, q: f64) -> Result<Self> {
        let p = EnergyParams { s, q, allow_critical: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.s)?;
        let crit = critical_exponent(self.s);
        let upper_ok = if self.allow_critical { self.q <= crit } else { self.q < crit };
        if !(self.q > 2.0 && upper_ok && self.q.is_finite()) {
            return invalid(format!(
                "exponent q={} violates q∈(2,2*_s) with 2*_s={crit}{}",
                self.q,
                if self.allow_critical { " (critical endpoint allowed)" } else { "" }
            ));
        }
        Ok(())
    }

    pub fn is_critical(&self) -> bool {
        self.q == critical_exponent(self.s)
    }
}

/// `|u|^{q−2}u`, continuous at zero.
pub fn nonlinearity<T: Scalar>(u: &Field<T>, q: f64) -> Field<T> {
    u.map(|v| {
        let m = v.modulus();
        if m == 0.0 {
            T::default()
        } else {
            v * m.powf(q - 2.0)
        }
    })
}

/// Everything needed for one descent step, from two transforms.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub j: f64,
    pub seminorm: f64,
    pub l2_sq: f64,
    pub lq: f64,
    /// `L2` gradient of `J`.
    pub gradient: Field<T>,
}

/// Evaluates `J` and its gradient given precomputed `μ^s`.
pub fn evaluate<T: Scalar>(
    u: &Field<T>,
    sym: &SpectralSymbol,
    p: &EnergyParams,
    powers: &Array2<f64>,
) -> Result<Evaluation<T>> {
    let coeffs = sym.forward(u)?;
    let seminorm = Zip::from(&coeffs).and(powers).fold(0.0, |a, z, &m| a + m * z.norm_sqr());
    let l2_sq = u.norm_l2().powi(2);
    let lq = u.norm_lq(p.q);
    if lq == 0.0 {
        return Err(Error::ZeroField);
    }
    let j = (seminorm + l2_sq) / (lq * lq);
    let mut lc = coeffs;
    Zip::from(&mut lc).and(powers).for_each(|z, &m| *z *= m);
    let lu: Field<T> = sym.inverse(&lc)?;
    let nl = nonlinearity(u, p.q);
    let c = j * lq.powf(2.0 - p.q);
    let pre = 2.0 / (lq * lq);
    let values =
        Zip::from(lu.values()).and(u.values()).and(nl.values()).map_collect(|&a, &b, &n| (a + b - n * c) * pre);
    let gradient = Field::new(u.grid().clone(), values)?;
    Ok(Evaluation { j, seminorm, l2_sq, lq, gradient })
}

pub fn quotient_j<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, p: &EnergyParams) -> Result<f64> {
    let powers = sym.powers(p.s);
    let c = sym.forward(u)?;
    let seminorm = Zip::from(&c).and(&powers).fold(0.0, |a, z, &m| a + m * z.norm_sqr());
    let lq = u.norm_lq(p.q);
    if lq == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok((seminorm + u.norm_l2().powi(2)) / (lq * lq))
}

pub fn gradient_j<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, p: &EnergyParams) -> Result<Field<T>> {
    Ok(evaluate(u, sym, p, &sym.powers(p.s))?.gradient)
}

/// Rescales `u` so the Lagrange multiplier becomes one: `‖cu‖_q = J(u)^{1/(q−2)}`.
pub fn nehari_normalize<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, p: &EnergyParams) -> Result<Field<T>> {
    let j = quotient_j(u, sym, p)?;
    let c = j.powf(1.0 / (p.q - 2.0)) / u.norm_lq(p.q);
    Ok(u.scaled(c))
}

/// Relative residuals of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖(−Δ)^s u + u − |u|^{q−2}u‖₂ / ‖u‖_{H^s}`.
    pub relative_l2: f64,
    /// Same with the dual norm `Σ |r_k|²/(μ_k^s + 1)`.
    pub dual: f64,
}

pub fn el_residuals<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, p: &EnergyParams) -> Result<Residuals> {
    let powers = sym.powers(p.s);
    let c = sym.forward(u)?;
    let hs_sq = Zip::from(&c).and(&powers).fold(0.0, |a, z, &m| a + (m + 1.0) * z.norm_sqr());
    if hs_sq == 0.0 {
        return Ok(Residuals { relative_l2: 0.0, dual: 0.0 });
    }
    let mut lc = c.clone();
    Zip::from(&mut lc).and(&powers).for_each(|z, &m| *z *= m + 1.0);
    let lu: Field<T> = sym.inverse(&lc)?;
    let r = lu.axpy(-1.0, &nonlinearity(u, p.q))?;
    let rc = sym.forward(&r)?;
    let dual_sq = Zip::from(&rc).and(&powers).fold(0.0, |a, z, &m| a + z.norm_sqr() / (m + 1.0));
    let hs = hs_sq.sqrt();
    Ok(Residuals { relative_l2: r.norm_l2() / hs, dual: dual_sq.sqrt() / hs })
}

pub fn el_residual<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, p: &EnergyParams) -> Result<f64> {
    Ok(el_residuals(u, sym, p)?.relative_l2)
}

/// `‖u‖²_{H^s} = [u]² + ‖u‖²₂`.
pub fn hs_norm_sq<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, s: f64) -> Result<f64> {
    Ok(crate::spectral::seminorm_sq(u, sym, s)? + u.norm_l2().powi(2))
}

/// Quotient of a group-invariant field restricted to one fundamental domain,
/// every integral evaluated with restricted quadrature: mask nodes weighted by
/// `|orbit|/|G|`. For invariant `u` this equals `|G|^{2/q−1}·J(u)`.
pub fn restricted_quotient<T: Scalar>(
    u: &Field<T>,
    sym: &SpectralSymbol,
    p: &EnergyParams,
    group: &SymmetryGroup,
    mask: &Array2<bool>,
) -> Result<f64> {
    if mask.dim() != u.values().dim() {
        return Err(Error::Incompatible("mask shape does not match the field".into()));
    }
    let order = group.order() as f64;
    let orbits = group.orbit_sizes();
    let lu = crate::spectral::apply_fraclap(u, sym, p.s)?;
    let w = u.grid().weight();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, ((&m, &v), &l)) in mask.iter().zip(u.values().iter()).zip(lu.values().iter()).enumerate() {
        if m {
            let wk = w * orbits[k] as f64 / order;
            num += wk * (v.re_dot(l) + v.re_dot(v));
            den += wk * v.modulus().powf(p.q);
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(num / den.powf(2.0 / p.q))
}
