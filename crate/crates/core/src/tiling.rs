//! Reflection and phase extensions of cell solutions to larger periodic
//! patches, with a residual check on the enlarged cell and a map of the
//! resulting bubble lattice.

use crate::domain::{BoundaryCondition, Field, Grid, Scalar, ScalarKind};
use crate::energy::{el_residuals, EnergyParams, Residuals};
use crate::error::{invalid, Error, Result};
use crate::solver::Solution;
use crate::spectral::symbol;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TilingMode {
    /// Mirror copies (Neumann).
    Even,
    /// Mirror copies with a sign flip per reflection (Dirichlet).
    Odd,
    /// Mirror copies, sign flips only across the Dirichlet axis.
    Mixed { dirichlet_axis: usize },
    /// Translates multiplied by `z₁^{c₁} z₂^{c₂}`, `z_k = e^{iθ_k}`.
    QuasiPhase { theta: [f64; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTilingSpec")]
pub struct TilingSpec {
    #[serde(flatten)]
    pub mode: TilingMode,
    pub copies: [usize; 2],
}

/// Flat form of [`TilingSpec`] that rejects keys the mode does not use.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTilingSpec {
    mode: String,
    #[serde(default)]
    dirichlet_axis: Option<usize>,
    #[serde(default)]
    theta: Option<[f64; 2]>,
    copies: [usize; 2],
}

impl TryFrom<RawTilingSpec> for TilingSpec {
    type Error = String;

    fn try_from(r: RawTilingSpec) -> std::result::Result<Self, String> {
        let mode = match (r.mode.as_str(), r.dirichlet_axis, r.theta) {
            ("even", None, None) => TilingMode::Even,
            ("odd", None, None) => TilingMode::Odd,
            ("mixed", Some(dirichlet_axis), None) => TilingMode::Mixed { dirichlet_axis },
            ("quasi_phase", None, Some(theta)) => TilingMode::QuasiPhase { theta },
            (m, ..) => return Err(format!("tiling mode `{m}` with these fields is not valid")),
        };
        Ok(TilingSpec { mode, copies: r.copies })
    }
}

impl TilingSpec {
    pub fn new(mode: TilingMode, copies: [usize; 2]) -> Self {
        TilingSpec { mode, copies }
    }

    pub fn validate(&self) -> Result<()> {
        if self.copies[0] == 0 || self.copies[1] == 0 {
            return invalid(format!("copies must be at least 1, got {:?}", self.copies));
        }
        if let TilingMode::Mixed { dirichlet_axis } = self.mode {
            if dirichlet_axis > 1 {
                return invalid(format!("Dirichlet axis must be 0 or 1, got {dirichlet_axis}"));
            }
        }
        Ok(())
    }
}

/// Field on the enlarged cell together with the regime it satisfies there.
#[derive(Clone, Debug, PartialEq)]
pub struct Extended<T> {
    pub field: Field<T>,
    pub mode: TilingMode,
    pub copies: [usize; 2],
    /// Regime of the enlarged cell: `None` when the patch is not periodic
    /// (reflections with an odd number of copies).
    pub periodic: Option<BoundaryCondition>,
}

/// Extends a solution by the tiling that matches its boundary regime.
pub fn extend<T: Scalar>(sol: &Solution<T>, spec: &TilingSpec) -> Result<Extended<T>> {
    extend_field(&sol.field, &sol.bc, spec)
}

pub fn extend_field<T: Scalar>(u: &Field<T>, bc: &BoundaryCondition, spec: &TilingSpec) -> Result<Extended<T>> {
    spec.validate()?;
    let grid = u.grid();
    let domain = grid.domain();
    let mismatch = || Err(Error::Incompatible(format!("{bc} solutions do not extend in mode {:?}", spec.mode)));
    // reflected[k]: copies along axis k are mirror images; flip[k]: and change sign
    let (reflected, flip, phase) = match (&spec.mode, bc) {
        (TilingMode::Even, BoundaryCondition::Neumann) if domain.is_triangle() => ([false; 2], [false; 2], None),
        (TilingMode::Odd, BoundaryCondition::Dirichlet) if domain.is_triangle() => ([false; 2], [false; 2], None),
        (TilingMode::Even, BoundaryCondition::Neumann) => ([true; 2], [false; 2], None),
        (TilingMode::Odd, BoundaryCondition::Dirichlet) => ([true; 2], [true; 2], None),
        (TilingMode::Mixed { dirichlet_axis: a }, BoundaryCondition::MixedDn { dirichlet_axis: b }) if a == b => {
            let mut flip = [false; 2];
            flip[*a] = true;
            ([true; 2], flip, None)
        }
        (TilingMode::QuasiPhase { theta }, BoundaryCondition::Periodic | BoundaryCondition::QuasiPeriodic { .. })
            if !domain.is_triangle() =>
        {
            let phases = bc.phases().expect("periodic regime");
            let close = |a: f64, b: f64| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d) < 1e-12
            };
            if !(close(theta[0], phases[0]) && close(theta[1], phases[1])) {
                return mismatch();
            }
            ([false; 2], [false; 2], Some(phases))
        }
        _ => return mismatch(),
    };
    let unit = |t: f64| -> Complex64 {
        if t == 0.0 {
            Complex64::new(1.0, 0.0)
        } else if t == PI {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, t)
        }
    };
    if let Some(ph) = phase {
        let real_ok = ph.iter().all(|&t| t == 0.0 || t == PI);
        if T::KIND == ScalarKind::Real && !real_ok {
            return Err(Error::NeedsComplex(bc.to_string()));
        }
    }
    let [n1, n2] = grid.dims();
    let [k1, k2] = spec.copies;
    let big = Arc::new(Grid::enlarged(grid, spec.copies));
    let src = u.values();
    let values = Array2::from_shape_fn((n1 * k1, n2 * k2), |(i, j)| {
        let (c1, c2) = (i / n1, j / n2);
        let (mut a, mut b) = (i % n1, j % n2);
        if reflected[0] && c1 % 2 == 1 {
            a = n1 - 1 - a;
        }
        if reflected[1] && c2 % 2 == 1 {
            b = n2 - 1 - b;
        }
        let mut v = src[[a, b]];
        let odd = (flip[0] && c1 % 2 == 1) != (flip[1] && c2 % 2 == 1);
        if odd {
            v = -v;
        }
        if let Some(ph) = phase {
            let z = unit(ph[0]).powu(c1 as u32) * unit(ph[1]).powu(c2 as u32);
            v = v.mul_phase(z);
        }
        v
    });
    let field = Field::new(big, values)?;
    let periodic = match phase {
        Some(ph) => {
            // keep real-compatible phases exact
            let times = |k: usize, t: f64| {
                if t == PI {
                    if k % 2 == 0 {
                        0.0
                    } else {
                        PI
                    }
                } else {
                    k as f64 * t
                }
            };
            Some(BoundaryCondition::quasi(times(k1, ph[0]), times(k2, ph[1])))
        }
        None => {
            let even = |k: usize, refl: bool| !refl || k % 2 == 0;
            (even(k1, reflected[0]) && even(k2, reflected[1])).then_some(BoundaryCondition::Periodic)
        }
    };
    Ok(Extended { field, mode: spec.mode, copies: spec.copies, periodic })
}

/// Residual of the extended field under the enlarged cell's periodic (or
/// quasi-periodic) symbol.
pub fn verify_extension<T: Scalar>(ext: &Extended<T>, p: &EnergyParams) -> Result<ExtensionCheck> {
    let Some(bc) = &ext.periodic else {
        return Err(Error::Incompatible(format!(
            "copies {:?} do not give a periodic patch; use an even count along reflected axes",
            ext.copies
        )));
    };
    let sym = symbol(ext.field.grid(), bc)?;
    let r = el_residuals(&ext.field, &sym, p)?;
    Ok(ExtensionCheck { bc: bc.clone(), residuals: r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCheck {
    pub bc: BoundaryCondition,
    pub residuals: Residuals,
}

impl ExtensionCheck {
    /// Accepted when within twice the cell residual plus `1e-8`.
    pub fn accepts(&self, fundamental_residual: f64) -> bool {
        self.residuals.relative_l2 <= 2.0 * fundamental_residual + 1e-8
    }
}

/// Local maximum of the `|u|^q` density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructurePoint {
    pub index: [usize; 2],
    pub position: [f64; 2],
    pub density: f64,
    /// Sign of the real part at the maximum.
    pub sign: i8,
    /// Argument of `u` at the maximum.
    pub phase: f64,
}

/// Local maxima (periodic 8-neighbourhood) of `|u|^q` above half the global
/// maximum; connected plateaus count once.
pub fn structure_map<T: Scalar>(u: &Field<T>, q: f64) -> Vec<StructurePoint> {
    let [n1, n2] = u.grid().dims();
    let dens = u.values().mapv(|v| v.modulus().powf(q));
    let max = dens.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let nbrs = |i: usize, j: usize| {
        let mut out = Vec::with_capacity(8);
        for di in [n1 - 1, 0, 1] {
            for dj in [n2 - 1, 0, 1] {
                if di == 0 && dj == 0 {
                    continue;
                }
                out.push(((i + di) % n1, (j + dj) % n2));
            }
        }
        out
    };
    let tol = 1e-12 * max;
    let is_max = Array2::from_shape_fn((n1, n2), |(i, j)| {
        let d = dens[[i, j]];
        d >= 0.5 * max && nbrs(i, j).iter().all(|&(a, b)| dens[[a, b]] <= d + tol)
    });
    let mut seen = Array2::from_elem((n1, n2), false);
    let mut points = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if !is_max[[i, j]] || seen[[i, j]] {
                continue;
            }
            let mut best = (i, j);
            let mut stack = vec![(i, j)];
            seen[[i, j]] = true;
            while let Some((a, b)) = stack.pop() {
                if dens[[a, b]] > dens[[best.0, best.1]] + tol
                    || (dens[[a, b]] >= dens[[best.0, best.1]] - tol && (a, b) < best)
                {
                    best = (a, b);
                }
                for (x, y) in nbrs(a, b) {
                    if is_max[[x, y]] && !seen[[x, y]] {
                        seen[[x, y]] = true;
                        stack.push((x, y));
                    }
                }
            }
            let v = u.values()[[best.0, best.1]].to_complex();
            points.push(StructurePoint {
                index: [best.0, best.1],
                position: u.grid().position(best.0, best.1),
                density: dens[[best.0, best.1]],
                sign: if v.re >= 0.0 { 1 } else { -1 },
                phase: v.arg(),
            });
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::spectral::seminorm_sq;

    fn unit(res: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::square(1.0), res).unwrap())
    }

    #[test]
    fn constant_even_extension() {
        let u = Field::constant(unit(8), 1.0);
        let e = extend_field(&u, &BoundaryCondition::Neumann, &TilingSpec::new(TilingMode::Even, [2, 2])).unwrap();
        assert_eq!(e.field.grid().dims(), [16, 16]);
        assert!(e.field.values().iter().all(|&v| v == 1.0));
        let check = verify_extension(&e, &EnergyParams::allowing_critical(0.5, 4.0).unwrap()).unwrap();
        assert_eq!(check.residuals.relative_l2, 0.0);
    }

    #[test]
    fn odd_extension_of_sine_is_sine() {
        let g = unit(8);
        let u = Field::from_fn(g, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let e = extend_field(&u, &BoundaryCondition::Dirichlet, &TilingSpec::new(TilingMode::Odd, [2, 2])).unwrap();
        let oracle = Field::from_fn(e.field.grid().clone(), |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        assert!(e.field.max_deviation(&oracle).unwrap() < 1e-14);
    }

    #[test]
    fn zero_phase_gives_identical_translates() {
        let g = Arc::new(Grid::new(&DomainSpec::parallelogram([1.0, 0.0], [0.3, 0.8], 1.0), [8, 8]).unwrap());
        let u = Field::from_fn(g, |p| p[0] * 3.0 - p[1]);
        let spec = TilingSpec::new(TilingMode::QuasiPhase { theta: [0.0, 0.0] }, [3, 3]);
        let e = extend_field(&u, &BoundaryCondition::Periodic, &spec).unwrap();
        for ((i, j), &v) in e.field.values().indexed_iter() {
            assert_eq!(v, u.values()[[i % 8, j % 8]]);
        }
    }

    #[test]
    fn quasi_modulus_lattice_periodic() {
        let g = unit(8);
        let u = Field::from_fn(g, |p| Complex64::new(p[0], p[1] * p[1]));
        let spec = TilingSpec::new(TilingMode::QuasiPhase { theta: [0.7, 2.0] }, [3, 2]);
        let e = extend_field(&u, &BoundaryCondition::quasi(0.7, 2.0), &spec).unwrap();
        for ((i, j), v) in e.field.values().indexed_iter() {
            assert!((v.norm() - u.values()[[i % 8, j % 8]].norm()).abs() < 1e-12);
        }
        let ph = e.periodic.unwrap().phases().unwrap();
        assert!((ph[0] - 2.1).abs() < 1e-12 && (ph[1] - 4.0).abs() < 1e-12);
        let u = Field::constant(unit(8), 1.0);
        let spec = TilingSpec::new(TilingMode::QuasiPhase { theta: [PI, PI] }, [3, 2]);
        let e = extend_field(&u, &BoundaryCondition::quasi(PI, PI), &spec).unwrap();
        assert_eq!(e.periodic, Some(BoundaryCondition::quasi(PI, 0.0)));
    }

    #[test]
    fn mode_mismatch_rejected() {
        let u = Field::constant(unit(8), 1.0);
        let spec = TilingSpec::new(TilingMode::Odd, [2, 2]);
        assert!(extend_field(&u, &BoundaryCondition::Neumann, &spec).is_err());
        let spec = TilingSpec::new(TilingMode::Even, [0, 2]);
        assert!(extend_field(&u, &BoundaryCondition::Neumann, &spec).is_err());
        let spec = TilingSpec::new(TilingMode::QuasiPhase { theta: [1.0, 0.0] }, [2, 2]);
        assert!(extend_field(&u, &BoundaryCondition::Periodic, &spec).is_err());
    }

    #[test]
    fn odd_copy_count_not_periodic() {
        let u = Field::constant(unit(8), 1.0);
        let e = extend_field(&u, &BoundaryCondition::Neumann, &TilingSpec::new(TilingMode::Even, [3, 2])).unwrap();
        assert!(e.periodic.is_none());
        assert!(verify_extension(&e, &EnergyParams::new(0.5, 3.0).unwrap()).is_err());
    }

    #[test]
    fn seminorm_additive_under_reflection() {
        let g = Arc::new(build_grid(&DomainSpec::rectangle(1.0, 1.5, 1.0), 8).unwrap());
        let u = Field::from_fn(g.clone(), |p| (p[0] * 2.3).exp() + p[1] * p[1]);
        let bcs = [
            (BoundaryCondition::Neumann, TilingMode::Even),
            (BoundaryCondition::Dirichlet, TilingMode::Odd),
            (BoundaryCondition::MixedDn { dirichlet_axis: 1 }, TilingMode::Mixed { dirichlet_axis: 1 }),
        ];
        for (bc, mode) in bcs {
            let sym = symbol(&g, &bc).unwrap();
            let e = extend_field(&u, &bc, &TilingSpec::new(mode, [2, 4])).unwrap();
            let big = symbol(e.field.grid(), e.periodic.as_ref().unwrap()).unwrap();
            let a = seminorm_sq(&u, &sym, 0.6).unwrap();
            let b = seminorm_sq(&e.field, &big, 0.6).unwrap();
            assert!((b - 8.0 * a).abs() < 1e-10 * b, "{bc}");
        }
    }

    #[test]
    fn structure_of_checkerboard() {
        let g = unit(16);
        let u = Field::from_fn(g, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let e = extend_field(&u, &BoundaryCondition::Dirichlet, &TilingSpec::new(TilingMode::Odd, [2, 2])).unwrap();
        let pts = structure_map(&e.field, 2.0);
        assert_eq!(pts.len(), 4);
        for p in &pts {
            let cell = [(p.position[0] / 1.0) as i64, (p.position[1] / 1.0) as i64];
            let expected = if (cell[0] + cell[1]) % 2 == 0 { 1 } else { -1 };
            assert_eq!(p.sign, expected);
        }
    }

    #[test]
    fn spec_json() {
        let spec: TilingSpec =
            serde_json::from_str(r#"{"mode": "mixed", "dirichlet_axis": 1, "copies": [2, 4]}"#).unwrap();
        assert_eq!(spec, TilingSpec::new(TilingMode::Mixed { dirichlet_axis: 1 }, [2, 4]));
        let back: TilingSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<TilingSpec>(r#"{"mode": "odd", "copies": [2, 2], "extra": 1}"#).is_err());
    }
}
