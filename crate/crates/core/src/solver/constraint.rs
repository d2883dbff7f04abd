use crate::domain::{Field, Grid, Point, Scalar, Topology, VertexId};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCenter {
    /// Every image of a vertex in the cell.
    Vertex(VertexId),
    Point(Point),
}

/// Caps the fraction of `∫|u|^q` inside balls around a vertex orbit at `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassConstraint {
    pub center: ConstraintCenter,
    /// Ball radius; a quarter of the domain scale when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Cap `θ ∈ (0, 1)`; [`default_theta_q`] when absent.
    #[serde(default)]
    pub theta: Option<f64>,
}

impl MassConstraint {
    pub fn at_vertex(vertex: VertexId) -> Self {
        MassConstraint { center: ConstraintCenter::Vertex(vertex), radius: None, theta: None }
    }

    pub fn validate(&self, q: f64) -> Result<()> {
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return invalid(format!("constraint radius must be positive, got {r}"));
            }
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t < 1.0) {
                return invalid(format!("constraint cap must lie in (0, 1), got {t}"));
            }
            if let ConstraintCenter::Vertex(_) = self.center {
                // two-bubble competitor must still be excluded
                let ratio = (t / (1.0 - t)).powf(1.0 - 2.0 / q) * 2f64.powf(2.0 / q);
                if ratio >= 1.0 {
                    return invalid(format!(
                        "constraint cap {t} too large for q = {q}: largest admissible is {}",
                        default_theta_q(q)
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, grid: &Grid, topology: Topology, q: f64) -> Result<ResolvedConstraint> {
        self.validate(q)?;
        let domain = grid.domain();
        let centers = match self.center {
            ConstraintCenter::Vertex(id) => domain.vertex_orbit(id)?,
            ConstraintCenter::Point(p) => vec![p],
        };
        let radius = self.radius.unwrap_or(0.25 * domain.scale);
        let [n1, n2] = grid.dims();
        let mut inside = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                let p = grid.position(i, j);
                inside.push(centers.iter().any(|&c| grid.distance(p, c, topology) <= radius));
            }
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::Infeasible(format!("constraint ball of radius {radius} contains no grid node")));
        }
        Ok(ResolvedConstraint { inside, theta: self.theta.unwrap_or_else(|| default_theta_q(q)) })
    }
}

/// Largest `θ` with `(θ/(1−θ))^{1−2/q}·2^{2/q} ≤ 1/2`.
pub fn default_theta_q(q: f64) -> f64 {
    let f = |t: f64| (t / (1.0 - t)).powf(1.0 - 2.0 / q) * 2f64.powf(2.0 / q) - 0.5;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug)]
pub(crate) struct ResolvedConstraint {
    inside: Vec<bool>,
    pub(crate) theta: f64,
}

impl ResolvedConstraint {
    fn split<T: Scalar>(&self, u: &Field<T>, q: f64) -> (f64, f64) {
        let (mut inn, mut out) = (0.0, 0.0);
        for (&b, v) in self.inside.iter().zip(u.values().iter()) {
            let m = v.modulus().powf(q);
            if b {
                inn += m;
            } else {
                out += m;
            }
        }
        (inn, out)
    }

    pub(crate) fn fraction<T: Scalar>(&self, u: &Field<T>, q: f64) -> f64 {
        let (inn, out) = self.split(u, q);
        let total = inn + out;
        if total > 0.0 {
            inn / total
        } else {
            0.0
        }
    }

    /// Rescales the ball part so that its mass fraction drops to `θ`.
    pub(crate) fn enforce<T: Scalar>(&self, u: &mut Field<T>, q: f64) -> Result<()> {
        let (inn, out) = self.split(u, q);
        let total = inn + out;
        if total == 0.0 || inn <= self.theta * total {
            return Ok(());
        }
        if out <= f64::MIN_POSITIVE * total.max(1.0) {
            return Err(Error::Infeasible("all mass lies inside the constraint ball".into()));
        }
        let kappa = (self.theta * out / ((1.0 - self.theta) * inn)).powf(1.0 / q);
        for (&b, v) in self.inside.iter().zip(u.values_mut().iter_mut()) {
            if b {
                *v = *v * kappa;
            }
        }
        Ok(())
    }
}
