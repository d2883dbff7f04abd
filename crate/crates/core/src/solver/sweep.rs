use super::{minimize, minimize_from, Init, Solution, SolveConfig};
use crate::diagnostics::{concentration_report, ConcentrationReport, DEFAULT_EPSILON};
use crate::domain::{build_grid, BoundaryCondition, DomainSpec, Field, Grid, Scalar, Topology};
use crate::error::{invalid, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Grid used for every member of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Nodes per unit length, so the grid grows with `R`.
    Resolution(usize),
    /// Fixed node counts, so the spacing grows with `R`.
    Dims([usize; 2]),
}

impl GridSpec {
    pub fn build(&self, domain: &DomainSpec) -> Result<Grid> {
        match *self {
            GridSpec::Resolution(r) => build_grid(domain, r),
            GridSpec::Dims(d) => Grid::new(domain, d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// Start each `R` from the previous minimizer, rescaled to the new cell.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPSILON
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { warm_start: false, epsilon: DEFAULT_EPSILON }
    }
}

/// One member of a sweep; failures are kept per entry.
#[derive(Debug)]
pub struct SweepEntry<T> {
    pub scale: f64,
    pub result: Result<(Solution<T>, ConcentrationReport)>,
}

/// Solves on `domain.with_scale(R)` for every `R` in `scales` (strictly increasing).
pub fn sweep_r<T: Scalar>(
    domain: &DomainSpec,
    scales: &[f64],
    grid: GridSpec,
    bc: &BoundaryCondition,
    cfg: &SolveConfig,
    opts: &SweepOptions,
) -> Result<Vec<SweepEntry<T>>> {
    if scales.is_empty() {
        return invalid("R list is empty");
    }
    if scales.windows(2).any(|w| !(w[0] < w[1])) || scales.iter().any(|&r| !(r > 0.0)) {
        return invalid("R list must be positive and strictly increasing");
    }
    cfg.validate()?;
    let report = |sol: Solution<T>| -> Result<(Solution<T>, ConcentrationReport)> {
        let r = concentration_report(&sol.field, bc, cfg.params.q, opts.epsilon)?;
        Ok((sol, r))
    };
    let solve_one = |scale: f64, warm: Option<&Field<T>>| -> Result<Solution<T>> {
        let d = domain.with_scale(scale);
        d.validate()?;
        let g = Arc::new(grid.build(&d)?);
        match warm {
            None => minimize(&g, bc, cfg),
            Some(prev) => {
                let start = resample(prev, &g, Topology::of(&g, bc));
                minimize_from(&g, bc, cfg, start).or_else(|_| {
                    let vertex = d.vertices()[0].id;
                    let mut fallback = cfg.clone();
                    fallback.init = Init::CornerBump { vertex, width: 0.125 * scale };
                    minimize(&g, bc, &fallback)
                })
            }
        }
    };
    if !opts.warm_start {
        return Ok(scales
            .par_iter()
            .map(|&scale| SweepEntry { scale, result: solve_one(scale, None).and_then(report) })
            .collect());
    }
    let mut out = Vec::with_capacity(scales.len());
    let mut prev: Option<Field<T>> = None;
    for &scale in scales {
        let sol = solve_one(scale, prev.as_ref());
        if let Ok(s) = &sol {
            prev = Some(s.field.clone());
        }
        out.push(SweepEntry { scale, result: sol.and_then(report) });
    }
    Ok(out)
}

/// Bilinear interpolation of `u` in fractional cell coordinates onto `target`.
pub(crate) fn resample<T: Scalar>(u: &Field<T>, target: &Arc<Grid>, topology: Topology) -> Field<T> {
    let src = u.grid();
    let [m1, m2] = src.dims();
    let off = src.offset();
    let vals = u.values();
    let index = |f: f64, m: usize| -> (usize, usize, f64) {
        let x = f * m as f64 - off;
        match topology {
            Topology::Periodic => {
                let x0 = x.floor();
                let t = x - x0;
                let i0 = (x0 as i64).rem_euclid(m as i64) as usize;
                (i0, (i0 + 1) % m, t)
            }
            Topology::Bounded => {
                let x = x.clamp(0.0, (m - 1) as f64);
                let i0 = (x.floor() as usize).min(m.saturating_sub(2));
                (i0, (i0 + 1).min(m - 1), x - i0 as f64)
            }
        }
    };
    let [n1, n2] = target.dims();
    let values = ndarray::Array2::from_shape_fn((n1, n2), |(i, j)| {
        let f = target.fractional(i, j);
        let (a0, a1, s) = index(f[0], m1);
        let (b0, b1, t) = index(f[1], m2);
        vals[[a0, b0]] * ((1.0 - s) * (1.0 - t))
            + vals[[a1, b0]] * (s * (1.0 - t))
            + vals[[a0, b1]] * ((1.0 - s) * t)
            + vals[[a1, b1]] * (s * t)
    });
    Field::new(target.clone(), values).expect("shape")
}
