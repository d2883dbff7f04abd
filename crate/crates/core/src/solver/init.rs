use crate::domain::{Field, Grid, Point, Scalar, ScalarKind, Topology, VertexId};
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

/// Initial guess for a descent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// `1 + a·ξ` with `ξ` uniform in `[−1, 1]` (independent real and imaginary draws).
    ConstantPlusNoise {
        seed: u64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Gaussian bumps at every image of a vertex.
    CornerBump { vertex: VertexId, width: f64 },
    /// Gaussian bump at an arbitrary point.
    Bump { center: Point, width: f64 },
    /// Field file written earlier on the same grid.
    File { path: PathBuf },
}

fn default_amplitude() -> f64 {
    0.1
}

impl Default for Init {
    fn default() -> Self {
        Init::ConstantPlusNoise { seed: 0, amplitude: default_amplitude() }
    }
}

impl Init {
    pub fn build<T: Scalar>(&self, grid: &Arc<Grid>, topology: Topology) -> Result<Field<T>> {
        match self {
            Init::ConstantPlusNoise { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(Field::from_fn(grid.clone(), |_| {
                    let re = 1.0 + amplitude * rng.random_range(-1.0..=1.0);
                    let im = amplitude * rng.random_range(-1.0..=1.0);
                    T::from_complex(Complex64::new(re, im))
                }))
            }
            Init::CornerBump { vertex, width } => {
                let centers = grid.domain().vertex_orbit(*vertex)?;
                bumps(grid, topology, &centers, *width)
            }
            Init::Bump { center, width } => bumps(grid, topology, &[*center], *width),
            Init::File { path } => {
                let any = crate::io::read_field(path)?;
                if !any.grid().same_layout(grid) {
                    return Err(Error::Incompatible(format!("{} was written on a different grid", path.display())));
                }
                let c = any.to_complex();
                if T::KIND == ScalarKind::Real {
                    let scale = c.max_modulus();
                    if c.values().iter().any(|z| z.im.abs() > 1e-12 * scale) {
                        return Err(Error::NeedsComplex(format!("{} holds a complex field", path.display())));
                    }
                }
                Field::new(grid.clone(), c.values().mapv(T::from_complex))
            }
        }
    }
}

fn bumps<T: Scalar>(grid: &Arc<Grid>, topology: Topology, centers: &[Point], width: f64) -> Result<Field<T>> {
    if !(width > 0.0 && width.is_finite()) {
        return invalid(format!("bump width must be positive, got {width}"));
    }
    Ok(Field::from_fn(grid.clone(), |p| {
        let v: f64 = centers
            .iter()
            .map(|&c| {
                let d = grid.distance(p, c, topology);
                (-0.5 * (d / width).powi(2)).exp()
            })
            .sum();
        T::from_complex(Complex64::new(v, 0.0))
    }))
}
