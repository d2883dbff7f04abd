use super::{BoundaryCondition, DomainSpec, Point, Shape};
use crate::error::{invalid, Result};

/// Uniform structured grid on the computational cell.
///
/// Node `(i1, i2)` sits at `(i1 + o)·e1 + (i2 + o)·e2` where `e_k = h_k / N_k`
/// and `o` is the layout offset: `1/2` (cell centred) for rectangles, strips and
/// parallelograms, `0` for triangle cells so that every mirror of the
/// reflection group maps nodes onto nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    domain: DomainSpec,
    dims: [usize; 2],
    cell: [Point; 2],
    offset: f64,
}

/// Metric used for distances between nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Bounded,
    Periodic,
}

impl Topology {
    pub fn of(grid: &Grid, bc: &BoundaryCondition) -> Topology {
        if grid.domain().is_triangle() || bc.phases().is_some() {
            Topology::Periodic
        } else {
            Topology::Bounded
        }
    }
}

/// Factor the cell dimension must be divisible by for triangle cells.
pub(crate) fn symmetry_divisor(domain: &DomainSpec) -> usize {
    match domain.shape {
        Shape::Triangle306090 => 6,
        Shape::EquilateralTriangle => 3,
        _ => 1,
    }
}

/// Grid with `round(resolution · side)` nodes along each cell vector.
pub fn build_grid(domain: &DomainSpec, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    let [h1, h2] = domain.cell();
    let sides = [h1[0].hypot(h1[1]), h2[0].hypot(h2[1])];
    let min_side = sides[0].min(sides[1]);
    if (resolution as f64) * min_side < 8.0 {
        return invalid(format!(
            "resolution {resolution} too coarse: need resolution·min side ≥ 8 (min side {min_side})"
        ));
    }
    let dims = [(resolution as f64 * sides[0]).round() as usize, (resolution as f64 * sides[1]).round() as usize];
    Grid::new(domain, dims)
}

impl Grid {
    /// Grid with explicit node counts.
    pub fn new(domain: &DomainSpec, dims: [usize; 2]) -> Result<Grid> {
        domain.validate()?;
        if dims[0] == 0 || dims[1] == 0 {
            return invalid("grid dims must be positive");
        }
        let offset = if domain.is_triangle() {
            let div = symmetry_divisor(domain);
            if dims[0] != dims[1] {
                return invalid(format!("triangle cells need equal dims, got {dims:?}"));
            }
            if dims[0] % div != 0 {
                return invalid(format!("triangle grid dims {} not divisible by the required divisor {div}", dims[0]));
            }
            0.0
        } else {
            0.5
        };
        Ok(Grid { domain: domain.clone(), dims, cell: domain.cell(), offset })
    }

    /// Same grid with the node offset replaced (`0` or `½` of a step).
    pub(crate) fn with_offset(mut self, offset: f64) -> Result<Grid> {
        if offset != 0.0 && offset != 0.5 {
            return invalid(format!("node offset must be 0 or 0.5, got {offset}"));
        }
        self.offset = offset;
        Ok(self)
    }

    /// Grid on a cell made of `copies` translates of `base`'s cell, same layout.
    pub(crate) fn enlarged(base: &Grid, copies: [usize; 2]) -> Grid {
        let [h1, h2] = base.cell;
        let (k1, k2) = (copies[0] as f64, copies[1] as f64);
        let s = base.domain.scale;
        let shape = match &base.domain.shape {
            Shape::Rectangle { l1, l2 } => Shape::Rectangle { l1: l1 * k1, l2: l2 * k2 },
            _ if base.domain.is_rectangular() => Shape::Rectangle { l1: h1[0] * k1 / s, l2: h2[1] * k2 / s },
            _ => Shape::Parallelogram { h1: [h1[0] * k1 / s, h1[1] * k1 / s], h2: [h2[0] * k2 / s, h2[1] * k2 / s] },
        };
        let domain = DomainSpec { shape, scale: s };
        Grid {
            domain,
            dims: [base.dims[0] * copies[0], base.dims[1] * copies[1]],
            cell: [[h1[0] * k1, h1[1] * k1], [h2[0] * k2, h2[1] * k2]],
            offset: base.offset,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self) -> [Point; 2] {
        self.cell
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Physical step vector along `axis`.
    pub fn step(&self, axis: usize) -> Point {
        let n = self.dims[axis] as f64;
        [self.cell[axis][0] / n, self.cell[axis][1] / n]
    }

    /// Shortest step length.
    pub fn spacing(&self) -> f64 {
        let a = self.step(0);
        let b = self.step(1);
        a[0].hypot(a[1]).min(b[0].hypot(b[1]))
    }

    pub fn cell_area(&self) -> f64 {
        let [h1, h2] = self.cell;
        (h1[0] * h2[1] - h1[1] * h2[0]).abs()
    }

    /// Quadrature weight of a single node.
    pub fn weight(&self) -> f64 {
        self.cell_area() / self.len() as f64
    }

    /// Whether the cell vectors are axis aligned (trigonometric bases apply).
    pub fn is_rectangular(&self) -> bool {
        self.cell[0][1] == 0.0 && self.cell[1][0] == 0.0
    }

    pub fn diameter(&self) -> f64 {
        let [h1, h2] = self.cell;
        let d1 = (h1[0] + h2[0]).hypot(h1[1] + h2[1]);
        let d2 = (h1[0] - h2[0]).hypot(h1[1] - h2[1]);
        d1.max(d2)
    }

    pub fn fractional(&self, i1: usize, i2: usize) -> Point {
        [(i1 as f64 + self.offset) / self.dims[0] as f64, (i2 as f64 + self.offset) / self.dims[1] as f64]
    }

    pub fn frac_to_physical(&self, f: Point) -> Point {
        let [h1, h2] = self.cell;
        [f[0] * h1[0] + f[1] * h2[0], f[0] * h1[1] + f[1] * h2[1]]
    }

    pub fn physical_to_frac(&self, p: Point) -> Point {
        let [h1, h2] = self.cell;
        let det = h1[0] * h2[1] - h1[1] * h2[0];
        [(p[0] * h2[1] - p[1] * h2[0]) / det, (h1[0] * p[1] - h1[1] * p[0]) / det]
    }

    pub fn position(&self, i1: usize, i2: usize) -> Point {
        self.frac_to_physical(self.fractional(i1, i2))
    }

    /// Node closest to a physical point (periodic wrap of the index).
    pub fn nearest_node(&self, p: Point) -> [usize; 2] {
        let f = self.physical_to_frac(p);
        let idx = |k: usize| {
            let n = self.dims[k] as f64;
            let i = (f[k] * n - self.offset).round();
            i.rem_euclid(n) as usize
        };
        [idx(0), idx(1)]
    }

    /// Displacement `b - a`, reduced to the shortest lattice image when periodic.
    pub fn displacement(&self, a: Point, b: Point, topology: Topology) -> Point {
        let d = [b[0] - a[0], b[1] - a[1]];
        if topology == Topology::Bounded {
            return d;
        }
        let f = self.physical_to_frac(d);
        let base = [f[0] - f[0].round(), f[1] - f[1].round()];
        let mut best = self.frac_to_physical(base);
        let mut best_len = best[0].hypot(best[1]);
        for k1 in -1..=1 {
            for k2 in -1..=1 {
                let c = self.frac_to_physical([base[0] + k1 as f64, base[1] + k2 as f64]);
                let l = c[0].hypot(c[1]);
                if l < best_len {
                    best = c;
                    best_len = l;
                }
            }
        }
        best
    }

    pub fn distance(&self, a: Point, b: Point, topology: Topology) -> f64 {
        let d = self.displacement(a, b, topology);
        d[0].hypot(d[1])
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.dims == other.dims && self.cell == other.cell && self.offset == other.offset
    }
}
