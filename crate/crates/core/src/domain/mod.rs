//! Computational domains, boundary regimes, grids and reflection groups.
//!
//! Rectangles and strips are sampled directly on a cell-centred grid.
//! Triangles are never meshed: they live as symmetry-invariant subspaces of a
//! rhombic periodic cell whose reflection group has the triangle as a
//! fundamental domain.

mod field;
mod grid;
mod symmetry;

pub use field::{AnyField, Field, Scalar, ScalarKind};
pub use grid::{build_grid, Grid, Topology};
pub use symmetry::{fundamental_mask, mirror_subgroup, symmetry_group, Character, GroupElement, SymmetryGroup};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;

pub type Point = [f64; 2];

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Shape of the unit domain `Ω`; the physical domain is `Ω_R = R·Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Rectangle {
        l1: f64,
        l2: f64,
    },
    /// Strip of width `2R` truncated to length `truncation·2R`.
    Strip {
        truncation: f64,
    },
    Parallelogram {
        h1: Point,
        h2: Point,
    },
    /// Equilateral triangle with side `R`.
    EquilateralTriangle,
    /// Right triangle with angles 30/60/90 and hypotenuse `R`.
    Triangle306090,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: Shape,
    pub scale: f64,
}

pub const MIN_STRIP_TRUNCATION: f64 = 8.0;

impl DomainSpec {
    pub fn rectangle(l1: f64, l2: f64, scale: f64) -> Self {
        DomainSpec { shape: Shape::Rectangle { l1, l2 }, scale }
    }

    pub fn square(scale: f64) -> Self {
        Self::rectangle(1.0, 1.0, scale)
    }

    pub fn strip(half_width: f64, truncation: f64) -> Self {
        DomainSpec { shape: Shape::Strip { truncation }, scale: half_width }
    }

    pub fn parallelogram(h1: Point, h2: Point, scale: f64) -> Self {
        DomainSpec { shape: Shape::Parallelogram { h1, h2 }, scale }
    }

    pub fn equilateral(side: f64) -> Self {
        DomainSpec { shape: Shape::EquilateralTriangle, scale: side }
    }

    pub fn triangle_30_60_90(hypotenuse: f64) -> Self {
        DomainSpec { shape: Shape::Triangle306090, scale: hypotenuse }
    }

    /// Same shape at a different dilation.
    pub fn with_scale(&self, scale: f64) -> Self {
        DomainSpec { shape: self.shape.clone(), scale }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| -> Result<()> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {x}"))
            }
        };
        pos(self.scale, "scale")?;
        match &self.shape {
            Shape::Rectangle { l1, l2 } => {
                pos(*l1, "l1")?;
                pos(*l2, "l2")
            }
            Shape::Strip { truncation } => {
                pos(*truncation, "truncation")?;
                if *truncation < MIN_STRIP_TRUNCATION {
                    return invalid(format!(
                        "strip truncation must be at least {MIN_STRIP_TRUNCATION} widths, got {truncation}"
                    ));
                }
                Ok(())
            }
            Shape::Parallelogram { h1, h2 } => {
                if !h1.iter().chain(h2.iter()).all(|x| x.is_finite()) {
                    return invalid("parallelogram generators must be finite");
                }
                let det = h1[0] * h2[1] - h1[1] * h2[0];
                let scale = (h1[0].hypot(h1[1]) * h2[0].hypot(h2[1])).max(f64::MIN_POSITIVE);
                if det.abs() <= 1e-12 * scale {
                    return invalid("parallelogram generators are linearly dependent");
                }
                Ok(())
            }
            Shape::EquilateralTriangle | Shape::Triangle306090 => Ok(()),
        }
    }

    pub fn is_triangle(&self) -> bool {
        matches!(self.shape, Shape::EquilateralTriangle | Shape::Triangle306090)
    }

    /// Rectangles and strips: the cell is the domain itself and is axis aligned.
    pub fn is_rectangular(&self) -> bool {
        matches!(self.shape, Shape::Rectangle { .. } | Shape::Strip { .. })
    }

    /// Physical cell vectors `(h1, h2)` of the computational cell.
    pub fn cell(&self) -> [Point; 2] {
        let r = self.scale;
        match &self.shape {
            Shape::Rectangle { l1, l2 } => [[r * l1, 0.0], [0.0, r * l2]],
            Shape::Strip { truncation } => [[2.0 * r, 0.0], [0.0, 2.0 * r * truncation]],
            Shape::Parallelogram { h1, h2 } => [[r * h1[0], r * h1[1]], [r * h2[0], r * h2[1]]],
            Shape::EquilateralTriangle | Shape::Triangle306090 => {
                let a = SQRT3 * r;
                [[a, 0.0], [0.5 * a, 0.5 * SQRT3 * a]]
            }
        }
    }

    pub fn cell_area(&self) -> f64 {
        let [h1, h2] = self.cell();
        (h1[0] * h2[1] - h1[1] * h2[0]).abs()
    }

    /// Measure of `Ω_R` itself (the triangle, not its periodic cell).
    pub fn area(&self) -> f64 {
        self.cell_area() / self.cell_multiplicity() as f64
    }

    /// Number of copies of `Ω_R` that make up the computational cell.
    pub fn cell_multiplicity(&self) -> usize {
        match self.shape {
            Shape::EquilateralTriangle => 6,
            Shape::Triangle306090 => 12,
            _ => 1,
        }
    }

    /// Diameter of the computational cell (longest diagonal).
    pub fn cell_diameter(&self) -> f64 {
        let [h1, h2] = self.cell();
        let d1 = (h1[0] + h2[0]).hypot(h1[1] + h2[1]);
        let d2 = (h1[0] - h2[0]).hypot(h1[1] - h2[1]);
        d1.max(d2)
    }

    /// Vertices of the fundamental domain with their interior angles.
    pub fn vertices(&self) -> Vec<Vertex> {
        let [h1, h2] = self.cell();
        let at = |f1: f64, f2: f64| [f1 * h1[0] + f2 * h2[0], f1 * h1[1] + f2 * h2[1]];
        match self.shape {
            Shape::Triangle306090 => vec![
                Vertex { id: VertexId::X, position: at(0.0, 0.0), angle: PI / 6.0 },
                Vertex { id: VertexId::Y, position: at(1.0 / 3.0, 1.0 / 3.0), angle: PI / 3.0 },
                Vertex { id: VertexId::Z, position: at(0.5, 0.0), angle: PI / 2.0 },
            ],
            Shape::EquilateralTriangle => vec![
                Vertex { id: VertexId::A, position: at(0.0, 0.0), angle: PI / 3.0 },
                Vertex { id: VertexId::B, position: at(1.0 / 3.0, 1.0 / 3.0), angle: PI / 3.0 },
                Vertex { id: VertexId::C, position: at(2.0 / 3.0, -1.0 / 3.0), angle: PI / 3.0 },
            ],
            _ => {
                let ids = [VertexId::C0, VertexId::C1, VertexId::C2, VertexId::C3];
                let corners = [at(0.0, 0.0), at(1.0, 0.0), at(1.0, 1.0), at(0.0, 1.0)];
                let angle = angle_between(h1, h2);
                ids.iter()
                    .zip(corners)
                    .enumerate()
                    .map(|(k, (&id, position))| Vertex {
                        id,
                        position,
                        angle: if k % 2 == 0 { angle } else { PI - angle },
                    })
                    .collect()
            }
        }
    }

    pub fn vertex(&self, id: VertexId) -> Result<Vertex> {
        self.vertices()
            .into_iter()
            .find(|v| v.id == id)
            .ok_or_else(|| crate::Error::Validation(format!("domain has no vertex {id}")))
    }

    /// Edges of the fundamental domain as segments.
    pub fn edges(&self) -> Vec<[Point; 2]> {
        let v = self.vertices();
        (0..v.len()).map(|k| [v[k].position, v[(k + 1) % v.len()].position]).collect()
    }

    /// Fractional cell coordinates of every image of a vertex in the cell.
    pub fn vertex_orbit(&self, id: VertexId) -> Result<Vec<Point>> {
        let frac: Vec<Point> = match (&self.shape, id) {
            (Shape::Triangle306090, VertexId::X) | (Shape::EquilateralTriangle, VertexId::A) => {
                vec![[0.0, 0.0]]
            }
            (Shape::Triangle306090, VertexId::Y) => {
                vec![[1.0 / 3.0, 1.0 / 3.0], [2.0 / 3.0, 2.0 / 3.0]]
            }
            (Shape::Triangle306090, VertexId::Z) => vec![[0.5, 0.0], [0.0, 0.5], [0.5, 0.5]],
            (Shape::EquilateralTriangle, VertexId::B) => vec![[1.0 / 3.0, 1.0 / 3.0]],
            (Shape::EquilateralTriangle, VertexId::C) => vec![[2.0 / 3.0, 2.0 / 3.0]],
            (_, VertexId::C0) if !self.is_triangle() => vec![[0.0, 0.0]],
            (_, VertexId::C1) if !self.is_triangle() => vec![[1.0, 0.0]],
            (_, VertexId::C2) if !self.is_triangle() => vec![[1.0, 1.0]],
            (_, VertexId::C3) if !self.is_triangle() => vec![[0.0, 1.0]],
            _ => return invalid(format!("domain has no vertex {id}")),
        };
        let [h1, h2] = self.cell();
        Ok(frac.into_iter().map(|f| [f[0] * h1[0] + f[1] * h2[0], f[0] * h1[1] + f[1] * h2[1]]).collect())
    }

    /// Integer point-group matrices (acting on lattice coordinates) of the
    /// reflection group of a triangle cell; `None` for other shapes.
    pub(crate) fn point_group(&self) -> Option<Vec<[[i64; 2]; 2]>> {
        // rotation by 60 degrees and mirrors, expressed in the (h1, h2) basis
        let r60 = [[0, -1], [1, 1]];
        let m0 = [[1, 1], [0, -1]];
        let m90 = [[-1, -1], [0, 1]];
        let gens: Vec<[[i64; 2]; 2]> = match self.shape {
            Shape::Triangle306090 => vec![r60, m0],
            Shape::EquilateralTriangle => vec![matmul(r60, r60), m90],
            _ => return None,
        };
        let mut elems = vec![[[1, 0], [0, 1]]];
        let mut k = 0;
        while k < elems.len() {
            for g in &gens {
                let e = matmul(*g, elems[k]);
                if !elems.contains(&e) {
                    elems.push(e);
                }
            }
            k += 1;
        }
        Some(elems)
    }

    /// Membership test for the closed fundamental triangle in integer lattice
    /// coordinates scaled by `n` (fractional coordinate = i/n).
    pub(crate) fn in_fundamental_triangle(&self, i1: i64, i2: i64, n: i64) -> bool {
        match self.shape {
            Shape::Triangle306090 => i2 >= 0 && i1 >= i2 && 2 * i1 + i2 <= n,
            Shape::EquilateralTriangle => i1 >= i2 && i1 + 2 * i2 >= 0 && 2 * i1 + i2 <= n,
            _ => true,
        }
    }

    /// Map a physical point of the cell to its image inside the fundamental
    /// domain. Identity for rectangles and parallelograms.
    pub fn fold_to_fundamental(&self, p: Point) -> Point {
        let Some(group) = self.point_group() else {
            return p;
        };
        let [h1, h2] = self.cell();
        let det = h1[0] * h2[1] - h1[1] * h2[0];
        let f = [(p[0] * h2[1] - p[1] * h2[0]) / det, (h1[0] * p[1] - h1[1] * p[0]) / det];
        let tol = 1e-9;
        let inside = |g: Point| -> bool {
            match self.shape {
                Shape::Triangle306090 => g[1] >= -tol && g[0] - g[1] >= -tol && 2.0 * g[0] + g[1] <= 1.0 + tol,
                _ => g[0] - g[1] >= -tol && g[0] + 2.0 * g[1] >= -tol && 2.0 * g[0] + g[1] <= 1.0 + tol,
            }
        };
        for a in &group {
            let g = [a[0][0] as f64 * f[0] + a[0][1] as f64 * f[1], a[1][0] as f64 * f[0] + a[1][1] as f64 * f[1]];
            for k1 in -2..=2 {
                for k2 in -2..=2 {
                    let c = [g[0] + k1 as f64, g[1] + k2 as f64];
                    if inside(c) {
                        return [c[0] * h1[0] + c[1] * h2[0], c[0] * h1[1] + c[1] * h2[1]];
                    }
                }
            }
        }
        p
    }
}

fn matmul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn angle_between(a: Point, b: Point) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1];
    (dot / (a[0].hypot(a[1]) * b[0].hypot(b[1]))).clamp(-1.0, 1.0).acos()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexId {
    C0,
    C1,
    C2,
    C3,
    X,
    Y,
    Z,
    A,
    B,
    C,
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub position: Point,
    pub angle: f64,
}

/// Boundary regime of the spectral Laplacian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    Neumann,
    Dirichlet,
    Periodic,
    /// `u(x + h_k) = e^{iθ_k} u(x)`.
    QuasiPeriodic {
        theta: [f64; 2],
    },
    /// Dirichlet on the two sides normal to `dirichlet_axis`, Neumann on the others.
    MixedDn {
        dirichlet_axis: usize,
    },
}

impl BoundaryCondition {
    /// Quasi-periodic condition with phases reduced modulo 2π.
    pub fn quasi(theta1: f64, theta2: f64) -> Self {
        BoundaryCondition::QuasiPeriodic { theta: [theta1.rem_euclid(TAU), theta2.rem_euclid(TAU)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BoundaryCondition::QuasiPeriodic { theta } => {
                if theta.iter().any(|t| !t.is_finite()) {
                    return invalid("quasi-periodic phases must be finite");
                }
                Ok(())
            }
            BoundaryCondition::MixedDn { dirichlet_axis } if *dirichlet_axis > 1 => {
                invalid(format!("dirichlet_axis must be 0 or 1, got {dirichlet_axis}"))
            }
            _ => Ok(()),
        }
    }

    /// Phases reduced to [0, 2π); `(0, 0)` for periodic conditions.
    pub fn phases(&self) -> Option<[f64; 2]> {
        match self {
            BoundaryCondition::Periodic => Some([0.0, 0.0]),
            BoundaryCondition::QuasiPeriodic { theta } => Some([theta[0].rem_euclid(TAU), theta[1].rem_euclid(TAU)]),
            _ => None,
        }
    }

    /// Whether real fields stay real under this regime.
    pub fn admits_real(&self) -> bool {
        match self.phases() {
            Some(t) => t.iter().all(|&x| x == 0.0 || x == PI),
            None => true,
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Neumann => write!(f, "neumann"),
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Periodic => write!(f, "periodic"),
            BoundaryCondition::QuasiPeriodic { theta } => {
                write!(f, "quasi_periodic({}, {})", theta[0], theta[1])
            }
            BoundaryCondition::MixedDn { dirichlet_axis } => {
                write!(f, "mixed_dn(axis {dirichlet_axis})")
            }
        }
    }
}
