//! Minimization of `J` over the admissible cone.
//!
//! Iterates `u ← Π(u − τ·M⁻¹∇J(u))` on the unit `L_q` sphere, where `M` is the
//! `H^s` Riesz map `(−Δ)^s + 1` (or the identity), `τ` comes from a
//! Barzilai–Borwein quotient measured in the same metric and is cut back by
//! Armijo backtracking. `Π` applies, in order: `u ← |u|`, group averaging,
//! radial averaging, vertex-mass constraints, `L_q` renormalization.

mod constraint;
mod init;
mod reallocation;
mod sweep;

pub use constraint::{default_theta_q, ConstraintCenter, MassConstraint};
pub use init::Init;
pub use reallocation::{bubble_reallocation, Reallocation};
pub use sweep::{sweep_r, GridSpec, SweepEntry, SweepOptions};

use crate::domain::{
    fundamental_mask, mirror_subgroup, symmetry_group, AnyField, BoundaryCondition, Character, Field, Grid, Scalar,
    SymmetryGroup, Topology,
};
use crate::energy::{el_residuals, evaluate, EnergyParams, Evaluation};
use crate::error::{invalid, Error, Result};
use crate::spectral::{symbol, SpectralSymbol};
use constraint::ResolvedConstraint;
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Metric in which the descent direction and step length are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Sobolev,
    L2,
}

/// Symmetry imposed by averaging in every projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case", deny_unknown_fields)]
pub enum Symmetrize {
    /// Full reflection group of the domain.
    Full { character: Character },
    /// Single midline mirror of a rectangle or strip.
    Mirror { axis: usize, character: Character },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub params: EnergyParams,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::tol_j")]
    pub tol_j: f64,
    #[serde(default = "defaults::tol_residual")]
    pub tol_residual: f64,
    #[serde(default)]
    pub init: Init,
    /// Further initial guesses; the start with the lowest final `λ` wins.
    #[serde(default)]
    pub extra_starts: Vec<Init>,
    #[serde(default = "defaults::yes")]
    pub enforce_positivity: bool,
    #[serde(default)]
    pub symmetrize: Option<Symmetrize>,
    #[serde(default)]
    pub radialize: bool,
    #[serde(default)]
    pub constraints: Vec<MassConstraint>,
    #[serde(default)]
    pub metric: Metric,
}

mod defaults {
    pub fn max_iters() -> usize {
        3000
    }
    pub fn tol_j() -> f64 {
        1e-10
    }
    pub fn tol_residual() -> f64 {
        1e-8
    }
    pub fn yes() -> bool {
        true
    }
}

impl SolveConfig {
    pub fn new(params: EnergyParams) -> Self {
        SolveConfig {
            params,
            max_iters: defaults::max_iters(),
            tol_j: defaults::tol_j(),
            tol_residual: defaults::tol_residual(),
            init: Init::default(),
            extra_starts: Vec::new(),
            enforce_positivity: true,
            symmetrize: None,
            radialize: false,
            constraints: Vec::new(),
            metric: Metric::Sobolev,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.max_iters < 1 {
            return invalid("max_iters must be at least 1");
        }
        if !(self.tol_j > 0.0 && self.tol_residual > 0.0) {
            return invalid("tolerances must be positive");
        }
        for c in &self.constraints {
            c.validate(self.params.q)?;
        }
        Ok(())
    }
}

/// Nehari-normalized minimizer and its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub field: Field<T>,
    pub bc: BoundaryCondition,
    pub params: EnergyParams,
    pub lambda: f64,
    pub residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_active: Vec<bool>,
    /// `q`-mass fraction inside each constraint ball at exit.
    pub constraint_fraction: Vec<f64>,
    pub history: Vec<f64>,
    /// Index of the winning start (0 is `init`).
    pub start: usize,
}

/// Solution with its scalar type erased.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySolution {
    Real(Solution<f64>),
    Complex(Solution<Complex64>),
}

impl AnySolution {
    pub fn lambda(&self) -> f64 {
        match self {
            AnySolution::Real(s) => s.lambda,
            AnySolution::Complex(s) => s.lambda,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            AnySolution::Real(s) => s.converged,
            AnySolution::Complex(s) => s.converged,
        }
    }

    pub fn field(&self) -> AnyField {
        match self {
            AnySolution::Real(s) => AnyField::Real(s.field.clone()),
            AnySolution::Complex(s) => AnyField::Complex(s.field.clone()),
        }
    }
}

/// Real solve when the regime keeps real fields real, complex otherwise.
pub fn minimize_any(grid: &Arc<Grid>, bc: &BoundaryCondition, cfg: &SolveConfig) -> Result<AnySolution> {
    if bc.admits_real() {
        minimize::<f64>(grid, bc, cfg).map(AnySolution::Real)
    } else {
        minimize::<Complex64>(grid, bc, cfg).map(AnySolution::Complex)
    }
}

/// Minimization with vertex-mass caps; with an empty constraint list this is
/// exactly [`minimize`].
pub fn minimize_constrained<T: Scalar>(
    grid: &Arc<Grid>,
    bc: &BoundaryCondition,
    cfg: &SolveConfig,
) -> Result<Solution<T>> {
    minimize(grid, bc, cfg)
}

/// Minimizes `J` from every configured start and keeps the lowest `λ`.
pub fn minimize<T: Scalar>(grid: &Arc<Grid>, bc: &BoundaryCondition, cfg: &SolveConfig) -> Result<Solution<T>> {
    cfg.validate()?;
    let problem = Problem::new(grid, bc, cfg)?;
    let topology = Topology::of(grid, bc);
    let starts: Vec<&Init> = std::iter::once(&cfg.init).chain(cfg.extra_starts.iter()).collect();
    let run = |k: usize, init: &Init| init.build(grid, topology).and_then(|u0| problem.run(u0, k));
    let runs: Vec<Result<Solution<T>>> = if starts.len() == 1 {
        vec![run(0, starts[0])]
    } else {
        starts.par_iter().enumerate().map(|(k, init)| run(k, init)).collect()
    };
    best_of(runs)
}

/// Like [`minimize`] but the first start is the given field.
pub(crate) fn minimize_from<T: Scalar>(
    grid: &Arc<Grid>,
    bc: &BoundaryCondition,
    cfg: &SolveConfig,
    first: Field<T>,
) -> Result<Solution<T>> {
    cfg.validate()?;
    let problem = Problem::new(grid, bc, cfg)?;
    let topology = Topology::of(grid, bc);
    let mut runs = vec![problem.run(first, 0)];
    runs.extend(
        cfg.extra_starts
            .par_iter()
            .enumerate()
            .map(|(k, init)| init.build(grid, topology).and_then(|u0| problem.run(u0, k + 1)))
            .collect::<Vec<_>>(),
    );
    best_of(runs)
}

fn best_of<T: Scalar>(runs: Vec<Result<Solution<T>>>) -> Result<Solution<T>> {
    let mut best: Option<Solution<T>> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.lambda < b.lambda) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::Convergence("no start produced a solution".into())))
}

struct Problem<'a> {
    grid: Arc<Grid>,
    bc: BoundaryCondition,
    cfg: &'a SolveConfig,
    sym: SpectralSymbol,
    powers: Array2<f64>,
    precond: Array2<f64>,
    group: Option<SymmetryGroup>,
    odd_reps: Option<Vec<bool>>,
    radial_bins: Option<Vec<usize>>,
    constraints: Vec<ResolvedConstraint>,
}

impl<'a> Problem<'a> {
    fn new(grid: &Arc<Grid>, bc: &BoundaryCondition, cfg: &'a SolveConfig) -> Result<Self> {
        let sym = symbol(grid, bc)?;
        let domain = grid.domain();
        let powers = sym.powers(cfg.params.s);
        let precond = match cfg.metric {
            Metric::Sobolev => powers.mapv(|m| 1.0 / (m + 1.0)),
            Metric::L2 => powers.mapv(|_| 1.0),
        };
        let implied = if domain.is_triangle() {
            match bc {
                BoundaryCondition::Neumann => Some(Character::Even),
                BoundaryCondition::Dirichlet => Some(Character::Odd),
                _ => None,
            }
        } else {
            None
        };
        let group = match (cfg.symmetrize, implied) {
            (None, None) => None,
            (None, Some(ch)) => Some(symmetry_group(domain, grid, ch)?),
            (Some(Symmetrize::Full { character }), imp) => {
                if imp.is_some_and(|c| c != character) {
                    return Err(Error::Incompatible(format!("{bc} on a triangle cell fixes the group character")));
                }
                Some(symmetry_group(domain, grid, character)?)
            }
            (Some(Symmetrize::Mirror { axis, character }), None) => {
                Some(mirror_subgroup(domain, grid, axis, character)?)
            }
            (Some(Symmetrize::Mirror { .. }), Some(_)) => {
                return Err(Error::Incompatible("mirror subgroups apply to rectangles only".into()));
            }
        };
        let odd_reps = match &group {
            Some(g) if g.character() == Character::Odd => Some(if domain.is_triangle() {
                fundamental_mask(domain, grid)?.iter().copied().collect()
            } else {
                orbit_representatives(g, grid.len())
            }),
            _ => None,
        };
        let topology = Topology::of(grid, bc);
        let radial_bins = cfg.radialize.then(|| radial_bins(grid));
        let constraints =
            cfg.constraints.iter().map(|c| c.resolve(grid, topology, cfg.params.q)).collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            grid: grid.clone(),
            bc: bc.clone(),
            cfg,
            sym,
            powers,
            precond,
            group,
            odd_reps,
            radial_bins,
            constraints,
        })
    }

    fn project<T: Scalar>(&self, u: &Field<T>) -> Result<Field<T>> {
        let mut v = if self.cfg.enforce_positivity {
            u.map(|x| T::from_complex(Complex64::new(x.modulus(), 0.0)))
        } else {
            u.clone()
        };
        if let Some(g) = &self.group {
            if let (true, Some(reps)) = (self.cfg.enforce_positivity, &self.odd_reps) {
                // |u| on one fundamental piece, extended with the sign of the character
                let k = g.order() as f64;
                for (x, &keep) in v.values_mut().iter_mut().zip(reps) {
                    *x = if keep { *x * k } else { T::default() };
                }
            }
            v = g.average(&v)?;
        }
        if let Some(bins) = &self.radial_bins {
            v = radial_average(&v, bins);
        }
        for c in &self.constraints {
            c.enforce(&mut v, self.cfg.params.q)?;
        }
        let n = v.norm_lq(self.cfg.params.q);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroField);
        }
        Ok(v.scaled(1.0 / n))
    }

    fn direction<T: Scalar>(&self, g: &Field<T>) -> Result<Field<T>> {
        match self.cfg.metric {
            Metric::L2 => Ok(g.clone()),
            Metric::Sobolev => self.sym.apply_diagonal(g, &self.precond),
        }
    }

    fn metric_inner<T: Scalar>(&self, s: &Field<T>) -> Result<f64> {
        match self.cfg.metric {
            Metric::L2 => Ok(s.norm_l2().powi(2)),
            Metric::Sobolev => {
                let c = self.sym.forward(s)?;
                Ok(Zip::from(&c).and(&self.powers).fold(0.0, |a, z, &m| a + (m + 1.0) * z.norm_sqr()))
            }
        }
    }

    fn eval<T: Scalar>(&self, u: &Field<T>) -> Result<Evaluation<T>> {
        evaluate(u, &self.sym, &self.cfg.params, &self.powers)
    }

    fn run<T: Scalar>(&self, u0: Field<T>, start: usize) -> Result<Solution<T>> {
        let cfg = self.cfg;
        if !u0.grid().same_layout(&self.grid) {
            return Err(Error::Incompatible("initial field lives on a different grid".into()));
        }
        let mut u = self.project(&u0)?;
        let mut ev = self.eval(&u)?;
        let mut history = vec![ev.j];
        let mut tau = 0.5;
        let mut iterations = 0;
        let mut converged = false;
        let mut prev_j = f64::INFINITY;
        let residual_of = |ev: &Evaluation<T>| ev.gradient.norm_l2() / (2.0 * ev.j.sqrt());

        for _ in 0..cfg.max_iters {
            let res = residual_of(&ev);
            let rel_dec = ((prev_j - ev.j) / ev.j).abs();
            if res < cfg.tol_residual && rel_dec < cfg.tol_j.max(f64::EPSILON) {
                converged = true;
                break;
            }
            let d = self.direction(&ev.gradient)?;
            let slope = ev.gradient.inner(&d)?;
            let mut accepted = None;
            let mut fallback = None;
            let mut t = tau;
            for _ in 0..60 {
                let cand = u.axpy(-t, &d)?;
                if cand.all_finite() {
                    if let Ok(pc) = self.project(&cand) {
                        if let Ok(ec) = self.eval(&pc) {
                            if ec.j.is_finite() {
                                if ec.j <= ev.j - 1e-4 * t * slope {
                                    accepted = Some((pc, ec, t));
                                    break;
                                }
                                if ec.j <= ev.j * (1.0 + 1e-12)
                                    && fallback
                                        .as_ref()
                                        .is_none_or(|(_, f, _): &(Field<T>, Evaluation<T>, f64)| ec.j < f.j)
                                {
                                    fallback = Some((pc, ec, t));
                                }
                            }
                        }
                    }
                }
                t *= 0.5;
            }
            let Some((un, en, t_used)) = accepted.or(fallback) else {
                break;
            };
            let s = un.axpy(-1.0, &u)?;
            let y = en.gradient.axpy(-1.0, &ev.gradient)?;
            let sy = s.inner(&y)?;
            let ss = self.metric_inner(&s)?;
            tau = if sy > 0.0 && ss > 0.0 { (ss / sy).clamp(1e-6, 1e3) } else { (2.0 * t_used).min(1e3) };
            prev_j = ev.j;
            u = un;
            ev = en;
            history.push(ev.j);
            iterations += 1;
            if s.max_modulus() == 0.0 {
                break;
            }
        }
        if !converged {
            let res = residual_of(&ev);
            let rel_dec = ((prev_j - ev.j) / ev.j).abs();
            converged = res < cfg.tol_residual && rel_dec < cfg.tol_j.max(f64::EPSILON);
        }
        let fractions: Vec<f64> = self.constraints.iter().map(|c| c.fraction(&u, cfg.params.q)).collect();
        let active = self.constraints.iter().zip(&fractions).map(|(c, &f)| f >= c.theta * (1.0 - 1e-9)).collect();
        let lambda = ev.j;
        let field = u.scaled(lambda.powf(1.0 / (cfg.params.q - 2.0)));
        let r = el_residuals(&field, &self.sym, &cfg.params)?;
        Ok(Solution {
            field,
            bc: self.bc.clone(),
            params: cfg.params,
            lambda,
            residual: r.relative_l2,
            dual_residual: r.dual,
            iterations,
            converged,
            constraint_active: active,
            constraint_fraction: fractions,
            history,
            start,
        })
    }
}

/// Marks the lowest-index node of every group orbit.
fn orbit_representatives(g: &SymmetryGroup, n: usize) -> Vec<bool> {
    (0..n).map(|i| g.elements().iter().all(|e| e.perm[i] >= i)).collect()
}

/// Shell index (width one grid spacing) of every node around the cell centre.
fn radial_bins(grid: &Grid) -> Vec<usize> {
    let [h1, h2] = grid.cell();
    let center = [0.5 * (h1[0] + h2[0]), 0.5 * (h1[1] + h2[1])];
    let h = grid.spacing();
    let [n1, n2] = grid.dims();
    let mut bins = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let p = grid.position(i, j);
            let r = (p[0] - center[0]).hypot(p[1] - center[1]);
            bins.push((r / h).floor() as usize);
        }
    }
    bins
}

fn radial_average<T: Scalar>(u: &Field<T>, bins: &[usize]) -> Field<T> {
    let nb = bins.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![T::default(); nb];
    let mut count = vec![0usize; nb];
    for (&b, &v) in bins.iter().zip(u.values().iter()) {
        sum[b] += v;
        count[b] += 1;
    }
    let mut out = u.clone();
    for (v, &b) in out.values_mut().iter_mut().zip(bins) {
        *v = sum[b] * (1.0 / count[b] as f64);
    }
    out
}

#[cfg(test)]
mod tests;
