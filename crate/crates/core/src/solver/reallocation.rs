use crate::domain::{Field, Scalar};
use crate::energy::{hs_norm_sq, EnergyParams};
use crate::error::{invalid, Error, Result};
use crate::spectral::SpectralSymbol;

/// Competitor built by moving the mass of one bubble onto another.
#[derive(Clone, Debug, PartialEq)]
pub struct Reallocation<T> {
    pub field: Field<T>,
    /// `b` and `c` were exchanged so that `c` has the smaller ratio.
    pub swapped: bool,
    /// Factor `κ` applied to the kept bubble.
    pub kappa: f64,
}

/// Relative overlap tolerated between supports.
const OVERLAP_TOL: f64 = 1e-12;

/// `a + κc` with `κ = (‖b‖_q^q + ‖c‖_q^q)^{1/q} / ‖c‖_q`, after ordering `b, c`
/// so that `‖c‖²_{H^s}/‖c‖_q^q ≤ ‖b‖²_{H^s}/‖b‖_q^q`.
pub fn bubble_reallocation<T: Scalar>(
    a: &Field<T>,
    b: &Field<T>,
    c: &Field<T>,
    sym: &SpectralSymbol,
    p: &EnergyParams,
) -> Result<Reallocation<T>> {
    a.check_same_grid(b)?;
    a.check_same_grid(c)?;
    let q = p.q;
    let mq = |f: &Field<T>| f.mass_q(q);
    let (mb, mc) = (mq(b), mq(c));
    if mb == 0.0 || mc == 0.0 {
        return Err(Error::ZeroField);
    }
    let total = mq(a) + mb + mc;
    let overlap: f64 = [(a, b), (a, c), (b, c)]
        .iter()
        .map(|(f, g)| {
            f.values().iter().zip(g.values().iter()).map(|(x, y)| x.modulus().min(y.modulus()).powf(q)).sum::<f64>()
        })
        .sum::<f64>()
        * a.grid().weight();
    if overlap > OVERLAP_TOL * total {
        return invalid(format!("bubble supports overlap (relative q-mass {:.3e})", overlap / total));
    }
    let ratio = |f: &Field<T>, m: f64| -> Result<f64> { Ok(hs_norm_sq(f, sym, p.s)? / m) };
    let swapped = ratio(c, mc)? > ratio(b, mb)?;
    let (mb, keep, mk) = if swapped { (mc, b, mb) } else { (mb, c, mc) };
    let kappa = ((mb + mk) / mk).powf(1.0 / q);
    Ok(Reallocation { field: a.axpy(kappa, keep)?, swapped, kappa })
}
