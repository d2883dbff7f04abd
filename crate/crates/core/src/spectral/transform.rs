use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustdct::{DctPlanner, TransformType2And3};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One-dimensional sampling basis along a grid axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisBasis {
    /// `cos(πj(n+½)/N)`, half-sample even (DCT-II).
    Cosine,
    /// `sin(π(j+1)(n+½)/N)`, half-sample odd (DST-II).
    Sine,
    /// `e^{i(2πm+θ)n/N}`.
    Fourier,
}

#[derive(Clone)]
pub(crate) enum AxisPlan {
    Trig { basis: AxisBasis, plan: Arc<dyn TransformType2And3<f64>>, n: usize },
    Fourier { fwd: Arc<dyn Fft<f64>>, inv: Arc<dyn Fft<f64>>, twist: Option<Vec<Complex64>>, n: usize },
}

impl AxisPlan {
    pub(crate) fn new(basis: AxisBasis, n: usize, theta: f64) -> AxisPlan {
        match basis {
            AxisBasis::Fourier => {
                let mut planner = FftPlanner::new();
                let twist = (theta != 0.0)
                    .then(|| (0..n).map(|k| Complex64::from_polar(1.0, -theta * k as f64 / n as f64)).collect());
                AxisPlan::Fourier { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), twist, n }
            }
            _ => AxisPlan::Trig { basis, plan: DctPlanner::new().plan_dct2(n), n },
        }
    }

    pub(crate) fn forward(&self, c: &mut Array2<Complex64>, axis: usize) {
        match self {
            AxisPlan::Trig { basis, plan, n } => {
                let scale = trig_scales(*basis, *n);
                let mut re = vec![0.0; *n];
                let mut im = vec![0.0; *n];
                for mut lane in c.lanes_mut(Axis(axis)) {
                    for (k, z) in lane.iter().enumerate() {
                        re[k] = z.re;
                        im[k] = z.im;
                    }
                    if *basis == AxisBasis::Cosine {
                        plan.process_dct2(&mut re);
                        plan.process_dct2(&mut im);
                    } else {
                        plan.process_dst2(&mut re);
                        plan.process_dst2(&mut im);
                    }
                    for (k, z) in lane.iter_mut().enumerate() {
                        *z = Complex64::new(re[k] * scale[k], im[k] * scale[k]);
                    }
                }
            }
            AxisPlan::Fourier { fwd, twist, n, .. } => {
                let norm = 1.0 / (*n as f64).sqrt();
                let mut buf = vec![Complex64::default(); *n];
                for mut lane in c.lanes_mut(Axis(axis)) {
                    for (k, z) in lane.iter().enumerate() {
                        buf[k] = match twist {
                            Some(t) => *z * t[k],
                            None => *z,
                        };
                    }
                    fwd.process(&mut buf);
                    for (k, z) in lane.iter_mut().enumerate() {
                        *z = buf[k] * norm;
                    }
                }
            }
        }
    }

    pub(crate) fn inverse(&self, c: &mut Array2<Complex64>, axis: usize) {
        match self {
            AxisPlan::Trig { basis, plan, n } => {
                let mut scale = trig_scales(*basis, *n);
                // type-III transforms halve the special coefficient
                let special = if *basis == AxisBasis::Cosine { 0 } else { *n - 1 };
                scale[special] *= 2.0;
                let mut re = vec![0.0; *n];
                let mut im = vec![0.0; *n];
                for mut lane in c.lanes_mut(Axis(axis)) {
                    for (k, z) in lane.iter().enumerate() {
                        re[k] = z.re * scale[k];
                        im[k] = z.im * scale[k];
                    }
                    if *basis == AxisBasis::Cosine {
                        plan.process_dct3(&mut re);
                        plan.process_dct3(&mut im);
                    } else {
                        plan.process_dst3(&mut re);
                        plan.process_dst3(&mut im);
                    }
                    for (k, z) in lane.iter_mut().enumerate() {
                        *z = Complex64::new(re[k], im[k]);
                    }
                }
            }
            AxisPlan::Fourier { inv, twist, n, .. } => {
                let norm = 1.0 / (*n as f64).sqrt();
                let mut buf = vec![Complex64::default(); *n];
                for mut lane in c.lanes_mut(Axis(axis)) {
                    for (k, z) in lane.iter().enumerate() {
                        buf[k] = *z;
                    }
                    inv.process(&mut buf);
                    for (k, z) in lane.iter_mut().enumerate() {
                        let v = buf[k] * norm;
                        *z = match twist {
                            Some(t) => v * t[k].conj(),
                            None => v,
                        };
                    }
                }
            }
        }
    }
}

/// Orthonormalizing factors of the unnormalized type-II outputs.
fn trig_scales(basis: AxisBasis, n: usize) -> Vec<f64> {
    let a = (1.0 / n as f64).sqrt();
    let b = (2.0 / n as f64).sqrt();
    let special = if basis == AxisBasis::Cosine { 0 } else { n - 1 };
    (0..n).map(|k| if k == special { a } else { b }).collect()
}
