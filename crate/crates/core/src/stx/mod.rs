//! Half-cylinder extension `w(x,t) = Σ c_k Q_s(t√μ_k) φ_k(x)` of a cell field,
//! used as an independent check of the spectral operator: the weighted
//! Dirichlet energy reproduces `[u]²/C_s` and the weighted normal derivative
//! at `t = 0` reproduces `(−Δ)^s u`.

mod special;

use special::q_profile_pair;
pub use special::{bessel_k, c_s, gamma, q_profile, q_profile_derivative};

use crate::domain::{BoundaryCondition, Field, Scalar};
use crate::error::{invalid, Error, Result};
use crate::spectral::{symbol, SpectralSymbol};
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default number of geometric `t` nodes.
pub const DEFAULT_NODES: usize = 400;
/// Required decay `T·√μ_min` of the slowest nonconstant mode.
pub const DECAY_RANGE: f64 = 20.0;

/// Geometric nodes `t_1 < … < t_M = T`; integrals are trapezoid sums in `ln t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    nodes: Vec<f64>,
    ratio: f64,
}

impl TGrid {
    pub fn new(t1: f64, t_max: f64, m: usize) -> Result<Self> {
        if !(t1 > 0.0 && t_max > t1 && m >= 2) {
            return invalid(format!("t-grid needs 0 < t1 < T and M ≥ 2, got {t1}, {t_max}, {m}"));
        }
        let ratio = (t_max / t1).powf(1.0 / (m - 1) as f64);
        let mut nodes: Vec<f64> = (0..m).map(|i| t1 * ratio.powi(i as i32)).collect();
        nodes[m - 1] = t_max;
        Ok(TGrid { nodes, ratio })
    }

    /// Covers `t√μ_max ≥ 1e-6` up to `t√μ_min = 20` (times a margin).
    pub fn for_symbol(sym: &SpectralSymbol, m: usize) -> Result<Self> {
        let mu_max = sym.mu_max();
        let mu_min = sym.mu_min_positive();
        if !mu_min.is_finite() {
            return TGrid::new(1e-6, 1.0, m);
        }
        TGrid::new(1e-6 / mu_max.sqrt(), 1.05 * DECAY_RANGE / mu_min.sqrt(), m)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }

    /// Trapezoid weights for `∫ f(t) dt = ∫ f(t) t dσ`, `σ = ln t`.
    fn weights(&self) -> Vec<f64> {
        let h = self.ratio.ln();
        let m = self.nodes.len();
        self.nodes.iter().enumerate().map(|(i, &t)| if i == 0 || i == m - 1 { 0.5 * h * t } else { h * t }).collect()
    }
}

/// Profile of one eigenvalue on the t-grid.
#[derive(Clone, Debug)]
struct ModeProfile {
    mu: f64,
    /// `Q_s(t_i√μ)`.
    q: Vec<f64>,
    /// `d/dt Q_s(t√μ)` at `t_i`.
    dq: Vec<f64>,
}

/// Coefficients of the extension on a t-grid: `d_k(t_i) = c_k·Q_s(t_i√μ_k)`.
#[derive(Clone, Debug)]
pub struct STExtension {
    sym: SpectralSymbol,
    s: f64,
    tgrid: TGrid,
    coeffs: Array2<Complex64>,
    profile_of: Array2<usize>,
    profiles: Vec<ModeProfile>,
}

fn check_regime(sym: &SpectralSymbol) -> Result<()> {
    match sym.bc() {
        BoundaryCondition::Neumann | BoundaryCondition::Dirichlet if !sym.grid().domain().is_triangle() => Ok(()),
        bc => invalid(format!("extension oracle supports Neumann and Dirichlet rectangles, got {bc}")),
    }
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        invalid(format!("extension order must lie in (0, 1), got {s}"))
    }
}

pub fn st_extend<T: Scalar>(u: &Field<T>, sym: &SpectralSymbol, s: f64, tgrid: &TGrid) -> Result<STExtension> {
    check_order(s)?;
    check_regime(sym)?;
    let coeffs = sym.forward(u)?;
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut distinct = Vec::new();
    let profile_of = sym.mu().mapv(|m| {
        *index.entry(m.to_bits()).or_insert_with(|| {
            distinct.push(m);
            distinct.len() - 1
        })
    });
    let profiles = distinct
        .par_iter()
        .map(|&mu| {
            let r = mu.sqrt();
            let (q, dq) = if mu == 0.0 {
                (vec![1.0; tgrid.nodes.len()], vec![0.0; tgrid.nodes.len()])
            } else {
                tgrid
                    .nodes
                    .iter()
                    .map(|&t| {
                        let (q, dq) = q_profile_pair(s, t * r);
                        (q, r * dq)
                    })
                    .unzip()
            };
            ModeProfile { mu, q, dq }
        })
        .collect();
    Ok(STExtension { sym: sym.clone(), s, tgrid: tgrid.clone(), coeffs, profile_of, profiles })
}

impl STExtension {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn tgrid(&self) -> &TGrid {
        &self.tgrid
    }

    /// `d_k(t_i)`.
    pub fn coefficient(&self, k: [usize; 2], i: usize) -> Complex64 {
        self.coeffs[k] * self.profiles[self.profile_of[k]].q[i]
    }

    /// `d_k(0⁺) = c_k` transformed back.
    pub fn trace<T: Scalar>(&self) -> Result<Field<T>> {
        self.sym.inverse(&self.coeffs)
    }

    /// `w(·, t_i)`.
    pub fn slice<T: Scalar>(&self, i: usize) -> Result<Field<T>> {
        self.sym.inverse(&self.scaled_coeffs(|p| p.q[i]))
    }

    fn scaled_coeffs(&self, f: impl Fn(&ModeProfile) -> f64) -> Array2<Complex64> {
        let factor: Vec<f64> = self.profiles.iter().map(f).collect();
        Zip::from(&self.coeffs).and(&self.profile_of).map_collect(|&c, &k| c * factor[k])
    }

    fn check_range(&self) -> Result<()> {
        let mu_min = self.sym.mu_min_positive();
        if mu_min.is_finite() && self.tgrid.t_max() * mu_min.sqrt() < DECAY_RANGE {
            return Err(Error::Quadrature(format!(
                "T = {} leaves the slowest mode undecayed; use T ≥ {}",
                self.tgrid.t_max(),
                DECAY_RANGE / mu_min.sqrt()
            )));
        }
        Ok(())
    }

    /// `∫ t^{1−2s}(d'² + μd²) dt` per unit coefficient, for every profile.
    fn mode_energies(&self) -> Vec<f64> {
        let s = self.s;
        let w = self.tgrid.weights();
        let t1 = self.tgrid.nodes[0];
        let a = 1.0 / c_s(s);
        self.profiles
            .iter()
            .map(|p| {
                if p.mu == 0.0 {
                    return 0.0;
                }
                let body: f64 = self
                    .tgrid
                    .nodes
                    .iter()
                    .zip(&w)
                    .zip(p.q.iter().zip(&p.dq))
                    .map(|((&t, &wt), (&q, &dq))| wt * t.powf(1.0 - 2.0 * s) * (dq * dq + p.mu * q * q))
                    .sum();
                // (0, t1): d' ≈ −A μ^s t^{2s−1}, d ≈ 1
                let tail = a * a * p.mu.powf(2.0 * s) * t1.powf(2.0 * s) / (2.0 * s)
                    + p.mu * t1.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
                body + tail
            })
            .collect()
    }
}

/// `C_s·E(w)` against `[u]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub energy: f64,
    pub scaled_energy: f64,
    pub seminorm_sq: f64,
    /// `|C_s·E − [u]²| / [u]²` (absolute when `[u]² = 0`).
    pub relative_gap: f64,
}

pub fn st_energy(w: &STExtension) -> Result<EnergyIdentity> {
    w.check_range()?;
    let per_mode = w.mode_energies();
    let energy = Zip::from(&w.coeffs).and(&w.profile_of).fold(0.0, |acc, c, &k| acc + c.norm_sqr() * per_mode[k]);
    let powers = w.sym.powers(w.s);
    let seminorm_sq = Zip::from(&w.coeffs).and(&powers).fold(0.0, |a, c, &m| a + m * c.norm_sqr());
    let scaled_energy = c_s(w.s) * energy;
    let diff = (scaled_energy - seminorm_sq).abs();
    let relative_gap = if seminorm_sq > 0.0 { diff / seminorm_sq } else { diff };
    Ok(EnergyIdentity { energy, scaled_energy, seminorm_sq, relative_gap })
}

/// `−C_s lim_{t→0} t^{1−2s} ∂_t w`, extrapolated from the smallest nodes.
pub fn neumann_trace<T: Scalar>(w: &STExtension) -> Result<Field<T>> {
    let s = w.s;
    let nu = 1.0 - s;
    let exps = [2.0 * nu, 2.0, 2.0 * nu + 2.0, 4.0];
    const STRIDE: usize = 10;
    if w.tgrid.nodes.len() <= 4 * STRIDE {
        return Err(Error::Quadrature("t-grid too short for extrapolation".into()));
    }
    let cs = c_s(s);
    let mut limits = Vec::with_capacity(w.profiles.len());
    for p in &w.profiles {
        if p.mu == 0.0 {
            limits.push(0.0);
            continue;
        }
        let r = p.mu.sqrt();
        // f(τ) = τ^{1−2s} Q'(τ) = f0 + Σ a_j τ^{e_j}
        let rows: Vec<(f64, f64)> = (0..5)
            .map(|k| {
                let i = k * STRIDE;
                let t = w.tgrid.nodes[i];
                let tau = t * r;
                (tau, tau.powf(1.0 - 2.0 * s) * p.dq[i] / r)
            })
            .collect();
        let f0 =
            extrapolate(&rows, &exps).ok_or_else(|| Error::Quadrature("trace extrapolation is singular".into()))?;
        if !f0.is_finite() {
            return Err(Error::Quadrature("trace extrapolation did not converge".into()));
        }
        // t^{1−2s} d'(t) = μ^s τ^{1−2s} Q'(τ)
        limits.push(-cs * p.mu.powf(s) * f0);
    }
    let c = Zip::from(&w.coeffs).and(&w.profile_of).map_collect(|&c, &k| c * limits[k]);
    w.sym.inverse(&c)
}

/// Value at 0 of `f0 + Σ a_j τ^{e_j}` fitted through five samples.
fn extrapolate(rows: &[(f64, f64)], exps: &[f64; 4]) -> Option<f64> {
    let mut a = [[0.0f64; 6]; 5];
    for (r, &(tau, f)) in a.iter_mut().zip(rows) {
        r[0] = 1.0;
        for (j, e) in exps.iter().enumerate() {
            r[j + 1] = tau.powf(*e);
        }
        r[5] = f;
    }
    // column scaling keeps the elimination well conditioned and leaves f0 alone
    for j in 1..5 {
        let m = a.iter().map(|r| r[j].abs()).fold(0.0, f64::max);
        if m > 0.0 {
            for r in a.iter_mut() {
                r[j] /= m;
            }
        }
    }
    for col in 0..5 {
        let piv = (col..5).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..5 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..6 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some(a[0][5] / a[0][0])
}

/// Quintic smoothstep realization of the cutoff profile: `1` on `[0, ½]`,
/// `0` on `[1, ∞)`. Returns `(η, η')`.
fn cutoff(rho: f64) -> (f64, f64) {
    let x = (2.0 - 2.0 * rho).clamp(0.0, 1.0);
    let eta = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let deta = if x > 0.0 && x < 1.0 { -2.0 * 30.0 * x * x * (1.0 - x) * (1.0 - x) } else { 0.0 };
    (eta, deta)
}

/// `C_s·(E(ηw) − E(w)) / ‖u‖²_{H^s}` for the product cutoff
/// `η(dist(x,ω)/r)·η(t/2r)`, both energies by direct quadrature.
pub fn cutoff_energy_defect<T: Scalar>(
    u: &Field<T>,
    sym: &SpectralSymbol,
    s: f64,
    omega: &Array2<bool>,
    r: f64,
    tgrid: &TGrid,
) -> Result<f64> {
    check_order(s)?;
    check_regime(sym)?;
    let grid = sym.grid().clone();
    let dims = grid.dims();
    if omega.dim() != (dims[0], dims[1]) {
        return Err(Error::Incompatible("mask shape does not match the grid".into()));
    }
    if !omega.iter().any(|&b| b) {
        return invalid("cutoff set ω is empty");
    }
    if !(r >= 2.0 * grid.spacing()) {
        return invalid(format!("cutoff radius {r} is below two grid cells ({})", 2.0 * grid.spacing()));
    }
    if tgrid.t_max() < 2.0 * r {
        return Err(Error::Quadrature(format!("T = {} must reach 2r = {}", tgrid.t_max(), 2.0 * r)));
    }
    let w = st_extend(u, sym, s, tgrid)?;
    w.check_range()?;

    // spatial cutoff and its gradient from the distance to ω
    let inside: Vec<[f64; 2]> =
        omega.indexed_iter().filter(|(_, &b)| b).map(|((i, j), _)| grid.position(i, j)).collect();
    let mut eta_x = Array2::zeros((dims[0], dims[1]));
    let mut grad_eta = [Array2::zeros((dims[0], dims[1])), Array2::zeros((dims[0], dims[1]))];
    for ((i, j), e) in eta_x.indexed_iter_mut() {
        let p = grid.position(i, j);
        let (d2, near) = inside
            .iter()
            .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), *q))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("nonempty");
        let d = d2.sqrt();
        let (v, dv) = cutoff(d / r);
        *e = v;
        if d > 0.0 {
            for a in 0..2 {
                grad_eta[a][[i, j]] = dv / r * (p[a] - near[a]) / d;
            }
        }
    }

    // ∂_x in the swapped basis: cosine ↔ sine along the differentiated axis
    let lengths = [grid.cell()[0][0], grid.cell()[1][1]];
    let deriv_syms = [derivative_symbol(&w.sym, 0)?, derivative_symbol(&w.sym, 1)?];
    let dirichlet = *w.sym.bc() == BoundaryCondition::Dirichlet;
    let diff_coeffs = |c: &Array2<Complex64>, axis: usize| -> Array2<Complex64> {
        let n = dims[axis];
        let kappa = |j: usize| std::f64::consts::PI * j as f64 / lengths[axis];
        Array2::from_shape_fn((dims[0], dims[1]), |(a, b)| {
            let k = if axis == 0 { a } else { b };
            let at = |kk: usize| if axis == 0 { c[[kk, b]] } else { c[[a, kk]] };
            if dirichlet {
                // sin(κ_j x)' = κ_j cos(κ_j x): sine index j−1 → cosine index j
                if k == 0 {
                    Complex64::default()
                } else {
                    at(k - 1) * kappa(k)
                }
            } else if k + 1 < n {
                // cos(κ_j x)' = −κ_j sin(κ_j x): cosine index j → sine index j−1
                -at(k + 1) * kappa(k + 1)
            } else {
                Complex64::default()
            }
        })
    };

    let s2 = 1.0 - 2.0 * s;
    let weights = w.tgrid.weights();
    let cell_w = grid.weight();
    let mut e_cut = 0.0;
    let mut e_full = 0.0;
    for (i, (&t, &wt)) in w.tgrid.nodes.iter().zip(&weights).enumerate() {
        let (et, det) = cutoff(t / (2.0 * r));
        let det = det / (2.0 * r);
        let c = w.scaled_coeffs(|p| p.q[i]);
        let ct = w.scaled_coeffs(|p| p.dq[i]);
        let val: Field<Complex64> = w.sym.inverse(&c)?;
        let dt: Field<Complex64> = w.sym.inverse(&ct)?;
        let dx: Field<Complex64> = deriv_syms[0].inverse(&diff_coeffs(&c, 0))?;
        let dy: Field<Complex64> = deriv_syms[1].inverse(&diff_coeffs(&c, 1))?;
        let mut full = 0.0;
        let mut cut = 0.0;
        for (((idx, &v), &vt), (&vx, &vy)) in
            val.values().indexed_iter().zip(dt.values().iter()).zip(dx.values().iter().zip(dy.values().iter()))
        {
            full += vx.norm_sqr() + vy.norm_sqr() + vt.norm_sqr();
            if et == 0.0 && det == 0.0 {
                continue;
            }
            let ex = eta_x[idx];
            let eta = ex * et;
            let gx = vx * eta + v * (grad_eta[0][idx] * et);
            let gy = vy * eta + v * (grad_eta[1][idx] * et);
            let gt = vt * eta + v * (ex * det);
            cut += gx.norm_sqr() + gy.norm_sqr() + gt.norm_sqr();
        }
        let f = wt * t.powf(s2) * cell_w;
        e_full += f * full;
        e_cut += f * cut;
    }
    // (0, t1): ∂_t w ≈ −A t^{2s−1}(−Δ)^s u, ∇_x w ≈ ∇_x u; t-cutoff is 1 there
    let t1 = w.tgrid.nodes[0];
    let a = 1.0 / c_s(s);
    let lu: Field<Complex64> =
        w.sym.inverse(&Zip::from(&w.coeffs).and(&w.sym.powers(s)).map_collect(|&c, &m| c * m))?;
    let ux: Field<Complex64> = deriv_syms[0].inverse(&diff_coeffs(&w.coeffs, 0))?;
    let uy: Field<Complex64> = deriv_syms[1].inverse(&diff_coeffs(&w.coeffs, 1))?;
    let u0: Field<Complex64> = w.trace()?;
    let kt = a * a * t1.powf(2.0 * s) / (2.0 * s);
    let kx = t1.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let mut tail_full = 0.0;
    let mut tail_cut = 0.0;
    for (idx, &l) in lu.values().indexed_iter() {
        let ex = eta_x[idx];
        let (gx, gy) = (ux.values()[idx], uy.values()[idx]);
        let v = u0.values()[idx];
        tail_full += kt * l.norm_sqr() + kx * (gx.norm_sqr() + gy.norm_sqr());
        let cx = gx * ex + v * grad_eta[0][idx];
        let cy = gy * ex + v * grad_eta[1][idx];
        tail_cut += kt * ex * ex * l.norm_sqr() + kx * (cx.norm_sqr() + cy.norm_sqr());
    }
    e_full += tail_full * cell_w;
    e_cut += tail_cut * cell_w;
    let hs = crate::energy::hs_norm_sq(u, sym, s)?;
    if hs == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(c_s(s) * (e_cut - e_full) / hs)
}

/// Symbol whose basis along `axis` is the derivative partner of `sym`'s.
fn derivative_symbol(sym: &SpectralSymbol, axis: usize) -> Result<SpectralSymbol> {
    let bc = match sym.bc() {
        BoundaryCondition::Neumann => BoundaryCondition::MixedDn { dirichlet_axis: axis },
        _ => BoundaryCondition::MixedDn { dirichlet_axis: 1 - axis },
    };
    symbol(sym.grid(), &bc)
}
