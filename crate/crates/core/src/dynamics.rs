//! Right-hand sides for the true plant (linear and Lipschitz-nonlinear
//! variants), the target system and its reference-modified twin, plus
//! reference-signal and nonlinearity evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::serde_util;

/// Singular-value threshold for the controllability-matrix rank test.
pub const CONTROLLABILITY_RANK_TOL: f64 = 1e-10;

/// Elementwise globally Lipschitz primitives (constant <= 1, vanishing at 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    Sin,
    /// `cos(x) - 1`
    CosMinusOne,
    /// `x / (1 + |x|)`
    SoftSat,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Sin => x.sin(),
            Nonlinearity::CosMinusOne => x.cos() - 1.0,
            Nonlinearity::SoftSat => x / (1.0 + x.abs()),
        }
    }
}

/// Per-component nonlinearity selection, applied elementwise to the state.
///
/// Kept as a fixed enum library rather than user code so the Lipschitz
/// invariant stays machine-checkable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NonlinearitySpec(pub Vec<Nonlinearity>);

impl NonlinearitySpec {
    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// Elementwise evaluation of the configured primitives.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.0.len() {
            return Err(Error::DimensionMismatch(format!(
                "nonlinearity arity {} does not match state dimension {}",
                self.0.len(),
                x.len()
            )));
        }
        Ok(Vector::from_fn(x.len(), |i, _| self.0[i].apply(x[i])))
    }
}

/// The uncertain plant `dX/dt = A X + B lambda u (+ A1 Phi(X))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantModel {
    #[serde(with = "serde_util::matrix_rows")]
    pub a: Matrix,
    #[serde(with = "serde_util::vector")]
    pub b: Vector,
    pub lambda: f64,
    #[serde(default, with = "serde_util::matrix_rows_opt")]
    pub a1: Option<Matrix>,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
}

impl PlantModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Effective input channel `B * lambda`.
    pub fn input_channel(&self) -> Vector {
        &self.b * self.lambda
    }

    /// Rank test on `[B lambda, A B lambda, ..., A^(n-1) B lambda]`.
    pub fn is_controllable(&self) -> bool {
        let n = self.dim();
        let mut col = self.input_channel();
        let mut ctrb = Matrix::zeros(n, n);
        for j in 0..n {
            ctrb.set_column(j, &col);
            col = &self.a * col;
        }
        ctrb.rank(CONTROLLABILITY_RANK_TOL) == n
    }

    /// State derivative under applied input `u`.
    pub fn deriv(&self, x: &Vector, u: f64) -> Result<Vector> {
        let n = self.dim();
        if x.len() != n || self.b.len() != n || !self.a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "plant of order {n} evaluated on state of length {}",
                x.len()
            )));
        }
        let mut dx = &self.a * x + &self.b * (self.lambda * u);
        if let Some(a1) = &self.a1 {
            let spec = self.nonlinearity.as_ref().ok_or_else(|| {
                Error::DimensionMismatch("A1 configured without a nonlinearity spec".into())
            })?;
            dx += a1 * spec.eval(x)?;
        }
        Ok(dx)
    }
}

/// The stable target system `dX_m/dt = A_m X_m + B_m r`.
///
/// The same right-hand side serves the original target (`r = f`) and the
/// reference-modified one (`r = f + g`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetModel {
    #[serde(with = "serde_util::matrix_rows")]
    pub a_m: Matrix,
    #[serde(with = "serde_util::vector")]
    pub b_m: Vector,
    #[serde(with = "serde_util::vector")]
    pub xm0: Vector,
}

impl TargetModel {
    pub fn dim(&self) -> usize {
        self.a_m.nrows()
    }

    pub fn deriv(&self, x_m: &Vector, r: f64) -> Result<Vector> {
        let n = self.dim();
        if x_m.len() != n || self.b_m.len() != n || !self.a_m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "target of order {n} evaluated on state of length {}",
                x_m.len()
            )));
        }
        Ok(&self.a_m * x_m + &self.b_m * r)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SinusoidTerm {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Scalar reference input `f(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSignal {
    /// `sum_i a_i sin(omega_i t + phi_i) + offset`
    Sinusoids {
        #[serde(default)]
        terms: Vec<SinusoidTerm>,
        #[serde(default)]
        offset: f64,
    },
    /// Piecewise-linear table, clamped outside the sampled range. Only
    /// accepted by validation with `unchecked_amplitude: true`.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        unchecked_amplitude: bool,
    },
}

impl ReferenceSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ReferenceSignal::Sinusoids { terms, offset } => {
                terms
                    .iter()
                    .map(|s| s.amplitude * (s.omega * t + s.phase).sin())
                    .sum::<f64>()
                    + offset
            }
            ReferenceSignal::Tabulated { times, values, .. } => {
                if times.is_empty() {
                    return 0.0;
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[times.len() - 1] {
                    return values[values.len() - 1];
                }
                let hi = times.partition_point(|&x| x <= t);
                let (t0, t1) = (times[hi - 1], times[hi]);
                let (v0, v1) = (values[hi - 1], values[hi]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Closed-form sufficient bound on `sup_t |f(t)|`, when the shape admits
    /// one without an amplitude waiver.
    pub fn amplitude_bound(&self) -> Option<f64> {
        match self {
            ReferenceSignal::Sinusoids { terms, offset } => Some(
                terms.iter().map(|s| s.amplitude.abs()).sum::<f64>() + offset.abs(),
            ),
            ReferenceSignal::Tabulated {
                values,
                unchecked_amplitude,
                ..
            } => {
                if *unchecked_amplitude {
                    None
                } else {
                    Some(values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                }
            }
        }
    }
}
