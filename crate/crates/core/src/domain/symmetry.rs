use super::{DomainSpec, Field, Grid, Scalar};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Even elements act trivially; odd ones multiply by the determinant of the
/// linear part, i.e. flip sign under every mirror.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Character {
    Even,
    Odd,
}

/// Grid automorphism: node `i` is sent to `perm[i]` and the value multiplied by `character`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub perm: Vec<usize>,
    pub character: f64,
    /// Determinant of the linear part (`-1` for mirrors).
    pub det: i64,
}

impl GroupElement {
    /// `self ∘ other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            perm: other.perm.iter().map(|&j| self.perm[j]).collect(),
            character: self.character * other.character,
            det: self.det * other.det,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.character == 1.0 && self.perm.iter().enumerate().all(|(i, &j)| i == j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryGroup {
    elements: Vec<GroupElement>,
    dims: [usize; 2],
    character: Character,
}

impl SymmetryGroup {
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn character(&self) -> Character {
        self.character
    }

    fn check<T: Scalar>(&self, u: &Field<T>) -> Result<()> {
        if u.grid().dims() != self.dims {
            return Err(Error::Incompatible(format!(
                "group built for dims {:?}, field has {:?}",
                self.dims,
                u.grid().dims()
            )));
        }
        Ok(())
    }

    /// `(g·u)[perm[i]] = χ(g)·u[i]`.
    pub fn act<T: Scalar>(&self, g: &GroupElement, u: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        let src = u.values().as_slice().expect("standard layout");
        let mut out = vec![T::default(); src.len()];
        for (i, &v) in src.iter().enumerate() {
            out[g.perm[i]] = v * g.character;
        }
        let values = Array2::from_shape_vec(u.values().dim(), out).expect("shape");
        Field::new(u.grid().clone(), values)
    }

    /// Group average `(1/|G|) Σ g·u`, an orthogonal projection.
    pub fn average<T: Scalar>(&self, u: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        let src = u.values().as_slice().expect("standard layout");
        let mut acc = vec![T::default(); src.len()];
        for g in &self.elements {
            for (i, &v) in src.iter().enumerate() {
                acc[g.perm[i]] += v * g.character;
            }
        }
        let inv = 1.0 / self.elements.len() as f64;
        let values =
            Array2::from_shape_vec(u.values().dim(), acc.into_iter().map(|v| v * inv).collect()).expect("shape");
        Field::new(u.grid().clone(), values)
    }

    /// Largest `|g·u − u|` over all elements and nodes.
    pub fn invariance_defect<T: Scalar>(&self, u: &Field<T>) -> Result<f64> {
        let mut worst = 0.0f64;
        for g in &self.elements {
            worst = worst.max(self.act(g, u)?.max_deviation(u)?);
        }
        Ok(worst)
    }

    /// Brute-force closure check of the composition table.
    pub fn is_closed(&self) -> bool {
        let has_identity = self.elements.iter().any(|g| g.is_identity());
        has_identity
            && self.elements.iter().all(|a| {
                self.elements.iter().all(|b| {
                    let c = a.compose(b);
                    self.elements.contains(&c)
                })
            })
    }

    /// Size of the orbit of every node (flat row-major index).
    pub fn orbit_sizes(&self) -> Vec<usize> {
        let n = self.dims[0] * self.dims[1];
        (0..n)
            .map(|i| {
                let mut imgs: Vec<usize> = self.elements.iter().map(|g| g.perm[i]).collect();
                imgs.sort_unstable();
                imgs.dedup();
                imgs.len()
            })
            .collect()
    }
}

fn check_grid(domain: &DomainSpec, grid: &Grid) -> Result<()> {
    if grid.domain() != domain {
        return Err(Error::Incompatible("grid was built for a different domain".into()));
    }
    Ok(())
}

/// Reflection group whose invariant subspace realizes the fundamental domain.
///
/// Rectangles and strips get the Klein group of the two midline mirrors;
/// the equilateral triangle cell gets the point group of order 6 and the
/// 30-60-90 cell the one of order 12, acting on lattice coordinates modulo `N`.
pub fn symmetry_group(domain: &DomainSpec, grid: &Grid, character: Character) -> Result<SymmetryGroup> {
    check_grid(domain, grid)?;
    let [n1, n2] = grid.dims();
    let flat = |i1: usize, i2: usize| i1 * n2 + i2;
    let chi = |det: i64| match character {
        Character::Even => 1.0,
        Character::Odd => det as f64,
    };
    let elements = if let Some(point_group) = domain.point_group() {
        let n = n1 as i64;
        point_group
            .iter()
            .map(|a| {
                let mut perm = vec![0; n1 * n2];
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let (x, y) = (i1 as i64, i2 as i64);
                        let j1 = (a[0][0] * x + a[0][1] * y).rem_euclid(n) as usize;
                        let j2 = (a[1][0] * x + a[1][1] * y).rem_euclid(n) as usize;
                        perm[flat(i1, i2)] = flat(j1, j2);
                    }
                }
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                GroupElement { perm, character: chi(det), det }
            })
            .collect()
    } else if domain.is_rectangular() {
        [(false, false), (true, false), (false, true), (true, true)]
            .iter()
            .map(|&(mx, my)| {
                let mut perm = vec![0; n1 * n2];
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let j1 = if mx { n1 - 1 - i1 } else { i1 };
                        let j2 = if my { n2 - 1 - i2 } else { i2 };
                        perm[flat(i1, i2)] = flat(j1, j2);
                    }
                }
                let det = if mx ^ my { -1 } else { 1 };
                GroupElement { perm, character: chi(det), det }
            })
            .collect()
    } else {
        return Err(Error::Incompatible("parallelogram cells carry no reflection group".into()));
    };
    Ok(SymmetryGroup { elements, dims: [n1, n2], character })
}

/// Subgroup of a rectangle's Klein group generated by the mirror across the
/// midline normal to `axis`.
pub fn mirror_subgroup(domain: &DomainSpec, grid: &Grid, axis: usize, character: Character) -> Result<SymmetryGroup> {
    if !domain.is_rectangular() || axis > 1 {
        return Err(Error::Incompatible("mirror subgroups exist for rectangles only".into()));
    }
    let full = symmetry_group(domain, grid, character)?;
    // element order: id, mirror_x, mirror_y, both
    let keep = [0, 1 + axis];
    Ok(SymmetryGroup { elements: keep.iter().map(|&k| full.elements[k].clone()).collect(), dims: full.dims, character })
}

/// Nodes of one copy of the fundamental domain inside the cell.
pub fn fundamental_mask(domain: &DomainSpec, grid: &Grid) -> Result<Array2<bool>> {
    check_grid(domain, grid)?;
    let [n1, n2] = grid.dims();
    if !domain.is_triangle() {
        return Ok(Array2::from_elem((n1, n2), true));
    }
    let n = n1 as i64;
    Ok(Array2::from_shape_fn((n1, n2), |(i1, i2)| {
        (-1..=1).any(|k1| (-1..=1).any(|k2| domain.in_fundamental_triangle(i1 as i64 + k1 * n, i2 as i64 + k2 * n, n)))
    }))
}
