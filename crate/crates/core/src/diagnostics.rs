//! Concentration diagnostics: bubble location, ball-mass profiles, weights,
//! and the concentration/vanishing verdict across dilation sweeps.

use crate::domain::{BoundaryCondition, DomainSpec, Field, Grid, Point, Scalar, Topology, VertexId};
use crate::error::{invalid, Error, Result};
use crate::spectral::symbol;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EPSILON: f64 = 0.01;
/// Ball radius at which the sup-over-centres mass is recorded.
pub const DEFAULT_REFERENCE_RADIUS: f64 = 1.0;
const PROFILE_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Vertex,
    Edge,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub class: LocationClass,
    /// Vertex within tolerance, if any.
    pub vertex: Option<VertexId>,
    pub vertex_distances: Vec<(VertexId, f64)>,
    pub edge_distances: Vec<f64>,
    /// `x*` folded into the fundamental domain.
    pub point: Point,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub scale: f64,
    pub x_star: Point,
    pub x_star_index: [usize; 2],
    pub radii: Vec<f64>,
    /// Fraction of `∫|u|^q` in `B(x*, ρ)` for each radius.
    pub mass_profile: Vec<f64>,
    pub rho_eps: f64,
    /// Mass fraction held by the bubble at `x*`: the profile value at twice
    /// the first radius where doubling adds at most an `ε` share.
    pub weight: f64,
    pub multi_bubble: bool,
    pub epsilon: f64,
    pub location: Option<Location>,
    pub reference_radius: f64,
    /// Largest ball-mass fraction over all centres at `reference_radius`.
    pub sup_ball_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Concentration,
    Vanishing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub verdict: Verdict,
    /// `(R, sup-over-centres ball mass)` in increasing `R`.
    pub evidence: Vec<(f64, f64)>,
    /// Least-squares slope of the evidence against `ln R`.
    pub slope: f64,
}

/// Report with the default reference radius.
pub fn concentration_report<T: Scalar>(
    u: &Field<T>,
    bc: &BoundaryCondition,
    q: f64,
    eps: f64,
) -> Result<ConcentrationReport> {
    concentration_report_at(u, bc, q, eps, DEFAULT_REFERENCE_RADIUS)
}

pub fn concentration_report_at<T: Scalar>(
    u: &Field<T>,
    bc: &BoundaryCondition,
    q: f64,
    eps: f64,
    reference_radius: f64,
) -> Result<ConcentrationReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("epsilon must lie in (0, 1/2), got {eps}"));
    }
    if !(q >= 1.0) {
        return invalid(format!("q must be at least 1, got {q}"));
    }
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let grid = u.grid().clone();
    let topology = Topology::of(&grid, bc);
    let density: Vec<f64> = u.values().iter().map(|v| v.modulus().powf(q)).collect();
    let total: f64 = density.iter().sum();

    let (x_star_index, x_star) = locate_peak(&grid, topology, &density)?;

    let dist: Vec<f64> = nodes(&grid).map(|p| grid.distance(p, x_star, topology)).collect();
    let h = grid.spacing();
    let diam = grid.diameter();
    let radii: Vec<f64> =
        (0..PROFILE_POINTS).map(|k| h * (diam / h).powf(k as f64 / (PROFILE_POINTS - 1) as f64)).collect();
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
    let mass_at = |r: f64| -> f64 {
        let mut m = 0.0;
        for &i in &order {
            if dist[i] > r {
                break;
            }
            m += density[i];
        }
        (m / total).min(1.0)
    };
    let mut mass_profile: Vec<f64> = radii.iter().map(|&r| mass_at(r)).collect();
    if let Some(last) = mass_profile.last_mut() {
        // the last radius is the cell diameter: every node is inside
        *last = 1.0;
    }
    let rho_eps = radii.iter().zip(&mass_profile).find(|(_, &m)| m >= 1.0 - eps).map_or(diam, |(&r, _)| r);
    let weight = radii
        .iter()
        .map(|&r| (r, mass_at(r), mass_at(2.0 * r)))
        .find(|&(_, m1, m2)| m2 > 0.0 && (m2 - m1) / m2 <= eps)
        .map_or(1.0, |(_, _, m2)| m2);
    let location = match vertex_distance_at(x_star, rho_eps, grid.domain()) {
        Ok(l) => Some(l),
        Err(_) => None,
    };
    let sup_ball_mass = sup_ball_mass(&grid, topology, &density, reference_radius);
    Ok(ConcentrationReport {
        scale: grid.domain().scale,
        x_star,
        x_star_index,
        radii,
        mass_profile,
        rho_eps,
        weight,
        multi_bubble: weight < 1.0 - eps,
        epsilon: eps,
        location,
        reference_radius,
        sup_ball_mass,
    })
}

fn nodes(grid: &Grid) -> impl Iterator<Item = Point> + '_ {
    let [n1, n2] = grid.dims();
    (0..n1).flat_map(move |i| (0..n2).map(move |j| grid.position(i, j)))
}

/// Argmax of the density after one heat step `e^{−δ(−Δ)}` with `δ` the node
/// cell area. Ties go to the smallest index; a flat density yields the cell
/// centre.
fn locate_peak(grid: &std::sync::Arc<Grid>, topology: Topology, density: &[f64]) -> Result<([usize; 2], Point)> {
    let bc = match topology {
        Topology::Bounded => BoundaryCondition::Neumann,
        Topology::Periodic => BoundaryCondition::Periodic,
    };
    let sym = symbol(grid, &bc)?;
    let d = grid.dims();
    let field =
        Field::new(grid.clone(), ndarray::Array2::from_shape_vec((d[0], d[1]), density.to_vec()).expect("shape"))?;
    let delta = grid.weight();
    let smooth = sym.apply_diagonal(&field, &sym.mu().mapv(|m| (-delta * m).exp()))?;
    let vals = smooth.values();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min <= 1e-9 * max.abs() {
        let [h1, h2] = grid.cell();
        let c = [0.5 * (h1[0] + h2[0]), 0.5 * (h1[1] + h2[1])];
        let idx = grid.nearest_node(c);
        return Ok((idx, grid.position(idx[0], idx[1])));
    }
    // values equal to the max up to transform rounding count as ties
    let (best, _) = vals.indexed_iter().find(|(_, &v)| v >= max - 1e-12 * max.abs()).expect("nonempty grid");
    let best = [best.0, best.1];
    Ok((best, grid.position(best[0], best[1])))
}

fn sup_ball_mass(grid: &Grid, topology: Topology, density: &[f64], radius: f64) -> f64 {
    let [n1, n2] = grid.dims();
    let total: f64 = density.iter().sum();
    let s1 = grid.step(0);
    let s2 = grid.step(1);
    // one representative per periodic image, every offset when bounded
    let range = |n: usize| -> std::ops::RangeInclusive<i64> {
        let n = n as i64;
        match topology {
            Topology::Periodic => -(n - 1) / 2..=n / 2,
            Topology::Bounded => -(n - 1)..=n - 1,
        }
    };
    let mut offsets = Vec::new();
    for a in range(n1) {
        for b in range(n2) {
            let x = a as f64 * s1[0] + b as f64 * s2[0];
            let y = a as f64 * s1[1] + b as f64 * s2[1];
            if x.hypot(y) <= radius {
                offsets.push((a, b));
            }
        }
    }
    let mut best = 0.0f64;
    for i in 0..n1 as i64 {
        for j in 0..n2 as i64 {
            let mut m = 0.0;
            for &(a, b) in &offsets {
                let (mut x, mut y) = (i + a, j + b);
                match topology {
                    Topology::Periodic => {
                        x = x.rem_euclid(n1 as i64);
                        y = y.rem_euclid(n2 as i64);
                    }
                    Topology::Bounded => {
                        if x < 0 || y < 0 || x >= n1 as i64 || y >= n2 as i64 {
                            continue;
                        }
                    }
                }
                m += density[x as usize * n2 + y as usize];
            }
            best = best.max(m);
        }
    }
    (best / total).min(1.0)
}

/// Distances from `x*` to the vertices and edges of the fundamental domain.
pub fn vertex_distance(report: &ConcentrationReport, domain: &DomainSpec) -> Result<Location> {
    vertex_distance_at(report.x_star, report.rho_eps, domain)
}

fn vertex_distance_at(x: Point, rho_eps: f64, domain: &DomainSpec) -> Result<Location> {
    let vertices = domain.vertices();
    if !(domain.is_rectangular() || domain.is_triangle()) {
        return invalid("vertex classification needs a rectangle or a triangle");
    }
    let p = if domain.is_triangle() { domain.fold_to_fundamental(x) } else { x };
    let vertex_distances: Vec<(VertexId, f64)> =
        vertices.iter().map(|v| (v.id, (p[0] - v.position[0]).hypot(p[1] - v.position[1]))).collect();
    let edges = domain.edges();
    let edge_distances: Vec<f64> = edges.iter().map(|e| segment_distance(p, e[0], e[1])).collect();
    let shortest = edges.iter().map(|e| (e[1][0] - e[0][0]).hypot(e[1][1] - e[0][1])).fold(f64::INFINITY, f64::min);
    let tolerance = (2.0 * rho_eps).min(0.25 * shortest);
    let nearest = vertex_distances.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).expect("domain has vertices");
    let (class, vertex) = if nearest.1 <= tolerance {
        (LocationClass::Vertex, Some(nearest.0))
    } else if edge_distances.iter().any(|&d| d <= tolerance) {
        (LocationClass::Edge, None)
    } else {
        (LocationClass::Interior, None)
    };
    Ok(Location { class, vertex, vertex_distances, edge_distances, point: p, tolerance })
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Vanishing iff the sup-over-centres ball mass at the largest `R` is below
/// 0.05 and its fitted trend against `ln R` is nonincreasing.
pub fn classify_dichotomy(reports: &[ConcentrationReport]) -> Result<DichotomyVerdict> {
    if reports.len() < 3 {
        return invalid(format!("dichotomy needs at least 3 values of R, got {}", reports.len()));
    }
    let mut evidence: Vec<(f64, f64)> = reports.iter().map(|r| (r.scale, r.sup_ball_mass)).collect();
    evidence.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = evidence.iter().map(|e| e.0.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = evidence.iter().map(|e| e.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&evidence).map(|(x, e)| (x - mx) * (e.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let last = evidence.last().expect("nonempty").1;
    let verdict = if last < 0.05 && slope <= 0.0 { Verdict::Vanishing } else { Verdict::Concentration };
    Ok(DichotomyVerdict { verdict, evidence, slope })
}

/// Two bubbles describe the same concentration sequence when their centres
/// are within the larger of the two concentration radii.
pub fn equivalent(a: &ConcentrationReport, b: &ConcentrationReport) -> bool {
    let d = (a.x_star[0] - b.x_star[0]).hypot(a.x_star[1] - b.x_star[1]);
    d <= a.rho_eps.max(b.rho_eps)
}

/// Maximum of `|u|` over shells of width one grid spacing around `center`.
/// Returns `(shell inner radius, max)` pairs; empty shells are skipped.
pub fn decay_profile<T: Scalar>(u: &Field<T>, center: Point, topology: Topology) -> Vec<(f64, f64)> {
    let grid = u.grid();
    let h = grid.spacing();
    let mut shells: Vec<Option<f64>> = Vec::new();
    for (p, v) in nodes(grid).zip(u.values().iter()) {
        let k = (grid.distance(p, center, topology) / h).floor() as usize;
        if shells.len() <= k {
            shells.resize(k + 1, None);
        }
        let m = v.modulus();
        shells[k] = Some(shells[k].map_or(m, |x: f64| x.max(m)));
    }
    shells.into_iter().enumerate().filter_map(|(k, m)| m.map(|m| (k as f64 * h, m))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;
    use std::sync::Arc;

    fn square(scale: f64, res: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::square(scale), res).unwrap())
    }

    fn bump(g: &Arc<Grid>, c: Point, w: f64) -> Field<f64> {
        Field::from_fn(g.clone(), |p| (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (w * w)).exp())
    }

    #[test]
    fn sharp_bump_located() {
        let g = square(4.0, 16);
        let c = g.position(20, 37);
        let u = bump(&g, c, 0.08);
        let r = concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert_eq!(r.x_star_index, [20, 37]);
        assert!(r.weight >= 0.99);
        assert!(r.rho_eps < 0.5);
        assert!(!r.multi_bubble);
        assert_eq!(r.location.unwrap().class, LocationClass::Interior);
    }

    #[test]
    fn profile_monotone_and_saturates() {
        let g = square(3.0, 12);
        let u = bump(&g, [1.0, 2.0], 0.4);
        let r = concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert!(r.mass_profile.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*r.mass_profile.last().unwrap(), 1.0);
        assert!(r.weight > 0.0 && r.weight <= 1.0);
    }

    #[test]
    fn constant_is_interior_and_spread() {
        let g = square(4.0, 8);
        let u = Field::constant(g.clone(), 1.0);
        let r = concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert!(r.rho_eps > 0.4 * g.diameter());
        assert_eq!(r.location.unwrap().class, LocationClass::Interior);
    }

    #[test]
    fn two_bumps_flag_multiple() {
        let g = square(8.0, 8);
        let u = bump(&g, [2.0, 2.0], 0.3).axpy(1.0, &bump(&g, [6.0, 6.0], 0.3)).unwrap();
        let r = concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert!(r.multi_bubble);
        assert!((r.weight - 0.5).abs() < 0.02, "{}", r.weight);
    }

    #[test]
    fn corner_and_edge_classes() {
        let g = square(4.0, 16);
        let corner = concentration_report(&bump(&g, [0.0, 0.0], 0.2), &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        let loc = corner.location.unwrap();
        assert_eq!(loc.class, LocationClass::Vertex);
        assert_eq!(loc.vertex, Some(VertexId::C0));
        let edge = concentration_report(&bump(&g, [2.0, 0.0], 0.2), &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert_eq!(edge.location.unwrap().class, LocationClass::Edge);
    }

    #[test]
    fn tie_break_smallest_index() {
        let g = square(4.0, 8);
        let mut u = Field::zeros(g.clone());
        u.values_mut()[[5, 9]] = 1.0;
        u.values_mut()[[20, 9]] = 1.0;
        let r = concentration_report(&u, &BoundaryCondition::Periodic, 2.0, 0.01).unwrap();
        assert_eq!(r.x_star_index, [5, 9]);
    }

    #[test]
    fn normalized_constants_vanish() {
        let reports: Vec<_> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&s| {
                let g = square(s, 4);
                let u = Field::constant(g.clone(), g.cell_area().powf(-0.25));
                concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap()
            })
            .collect();
        let v = classify_dichotomy(&reports).unwrap();
        assert_eq!(v.verdict, Verdict::Vanishing);
        // oracle: a unit ball inside the square holds π/R² of the mass
        let last = v.evidence.last().unwrap().1;
        assert!((last - std::f64::consts::PI / 1024.0).abs() < 0.2 * last);
    }

    #[test]
    fn translated_bump_concentrates() {
        let reports: Vec<_> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&s| {
                let g = square(s, 8);
                let u = bump(&g, [s / 2.0, s / 3.0], 0.3);
                concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.01).unwrap()
            })
            .collect();
        assert_eq!(classify_dichotomy(&reports).unwrap().verdict, Verdict::Concentration);
        assert!(classify_dichotomy(&reports[..2]).is_err());
    }

    #[test]
    fn equivalence_radius() {
        let g = square(4.0, 16);
        let a = concentration_report(&bump(&g, [1.0, 1.0], 0.2), &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        let b = concentration_report(&bump(&g, [1.1, 1.0], 0.2), &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        let c = concentration_report(&bump(&g, [3.0, 3.0], 0.2), &BoundaryCondition::Neumann, 4.0, 0.01).unwrap();
        assert!(equivalent(&a, &b));
        assert!(!equivalent(&a, &c));
    }

    #[test]
    fn flat_decay_profile() {
        let g = square(2.0, 8);
        let u = Field::constant(g, 1.0);
        let prof = decay_profile(&u, [1.0, 1.0], Topology::Bounded);
        assert!(prof.iter().all(|&(_, m)| m == 1.0));
        assert!(prof.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn bad_epsilon_and_zero_field() {
        let g = square(1.0, 8);
        let u = Field::constant(g.clone(), 1.0);
        assert!(concentration_report(&u, &BoundaryCondition::Neumann, 4.0, 0.6).is_err());
        let z = Field::<f64>::zeros(g);
        assert!(matches!(concentration_report(&z, &BoundaryCondition::Neumann, 4.0, 0.01), Err(Error::ZeroField)));
    }
}
