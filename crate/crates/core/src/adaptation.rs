//! Barrier gradient term and the projection-based parameter update laws.
//!
//! The update laws keep the estimates inside their known sets: the gain
//! estimate on or inside the `M_K` sphere (tangential deflection at the
//! boundary) and the input-gain estimate frozen at the edges of
//! `[m_l, M_l]`. Boundary detection uses a relative band since exact norm
//! equality never holds in floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LyapunovPair, Vector};
use crate::scenario::ProjectionBounds;
use crate::serde_util;

/// Relative width of the boundary-detection band.
pub const BOUNDARY_BAND: f64 = 1e-9;
/// Floor applied to the squared barrier denominator.
pub const BARRIER_DENOM_FLOOR: f64 = 1e-12;

/// Adaptive parameter estimates owned by the simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateState {
    #[serde(with = "serde_util::vector")]
    pub k_hat: Vector,
    pub l_hat: f64,
    #[serde(default, with = "serde_util::vector_opt")]
    pub k1_hat: Option<Vector>,
}

/// Positive adaptation rates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdaptationGains {
    pub k_gain: f64,
    pub l_gain: f64,
    #[serde(default)]
    pub k1_gain: Option<f64>,
}

/// Barrier gradient value, flagged when the denominator floor was binding.
#[derive(Debug, Clone, Copy)]
pub struct BarrierGradient {
    pub value: f64,
    pub floored: bool,
}

/// `mu = 2 M^2 e' P B_m sign(l) / (M^2 - e' P e)^2`, defined while the error
/// is strictly inside the barrier.
///
/// Returns `BarrierViolated` when `e' P e >= M^2`: the theory guarantees the
/// trajectory never reaches the barrier, so crossing it means the
/// configuration or step size is broken and the run must surface it.
pub fn barrier_gradient(
    e: &Vector,
    pair: &LyapunovPair,
    b_m: &Vector,
    sign_l: f64,
    barrier_radius: f64,
) -> Result<BarrierGradient> {
    let m_sq = barrier_radius * barrier_radius;
    let quad = pair.quad_form(e);
    if quad >= m_sq {
        return Err(Error::BarrierViolated {
            quad_form: quad,
            barrier_sq: m_sq,
        });
    }
    Ok(barrier_gradient_raw(e, pair, b_m, sign_l, barrier_radius))
}

/// Same as [`barrier_gradient`] but without the inside-the-barrier check;
/// used by the soft (exploratory) barrier mode that renormalizes instead of
/// aborting.
pub fn barrier_gradient_raw(
    e: &Vector,
    pair: &LyapunovPair,
    b_m: &Vector,
    sign_l: f64,
    barrier_radius: f64,
) -> BarrierGradient {
    let m_sq = barrier_radius * barrier_radius;
    let quad = pair.quad_form(e);
    let numerator = 2.0 * m_sq * (&pair.p * e).dot(b_m) * sign_l;
    let denom = (m_sq - quad) * (m_sq - quad);
    let floored = denom < BARRIER_DENOM_FLOOR;
    BarrierGradient {
        value: numerator / denom.max(BARRIER_DENOM_FLOOR),
        floored,
    }
}

/// Gradient used by the conventional (non-barrier) baseline:
/// `2 e' P B_m sign(l)`, i.e. the barrier law with the barrier factor
/// `M^2 / (M^2 - e' P e)^2` removed.
pub fn baseline_gradient(e: &Vector, pair: &LyapunovPair, b_m: &Vector, sign_l: f64) -> f64 {
    2.0 * (&pair.p * e).dot(b_m) * sign_l
}

/// Shared projection law for the norm-bounded vector estimates: full gradient
/// in the interior or when the boundary flow points inward, tangential
/// deflection otherwise.
fn projected_vector_deriv(
    estimate: &Vector,
    mu: f64,
    drive: &Vector,
    gain: f64,
    norm_bound: f64,
) -> Vector {
    let full = drive * (-gain * mu);
    let norm = estimate.norm();
    if norm < norm_bound * (1.0 - BOUNDARY_BAND) {
        return full;
    }
    let radial = mu * drive.dot(estimate);
    if radial >= 0.0 {
        // flow already points inward (or along the sphere)
        return full;
    }
    // subtract the radial component: -gain (I - kk'/k'k) mu drive
    &full + estimate * (gain * radial / estimate.norm_squared())
}

/// Update-law derivative for the feedback-gain estimate.
pub fn k_hat_deriv(k_hat: &Vector, mu: f64, x: &Vector, k_gain: f64, k_norm_bound: f64) -> Vector {
    projected_vector_deriv(k_hat, mu, x, k_gain, k_norm_bound)
}

/// Update-law derivative for the nonlinearity-gain estimate (same projection
/// structure, driven by `Phi(X)`).
pub fn k1_hat_deriv(
    k1_hat: &Vector,
    mu: f64,
    phi_x: &Vector,
    k1_gain: f64,
    k1_norm_bound: f64,
) -> Vector {
    projected_vector_deriv(k1_hat, mu, phi_x, k1_gain, k1_norm_bound)
}

/// Update-law derivative for the input-gain estimate, frozen whenever the
/// flow would push `|l_hat|` past either edge of `[l_lower, l_upper]`.
///
/// `r` is the total reference driving the law (`f`, or `f + g` under
/// reference modification).
pub fn l_hat_deriv(
    l_hat: f64,
    mu: f64,
    r: f64,
    l_gain: f64,
    l_lower: f64,
    l_upper: f64,
) -> f64 {
    let a = l_hat.abs();
    let drive = mu * r * l_hat;
    // drive > 0 shrinks |l_hat|, drive < 0 grows it
    if a <= l_lower * (1.0 + BOUNDARY_BAND) && drive > 0.0 {
        return 0.0;
    }
    if a >= l_upper * (1.0 - BOUNDARY_BAND) && drive < 0.0 {
        return 0.0;
    }
    -l_gain * mu * r
}

/// Discrete-time cleanup after an integrator step: radially renormalize the
/// vector estimates onto their spheres and clamp `|l_hat|` into
/// `[l_lower, l_upper]` when the step overshot past the boundary band.
///
/// These are Euclidean projections onto convex sets containing the true
/// gains, so they never increase the parameter-error terms of the barrier
/// Lyapunov function.
pub fn project_estimates(est: &mut EstimateState, bounds: &ProjectionBounds) {
    let norm = est.k_hat.norm();
    if norm > bounds.k_norm_bound * (1.0 + BOUNDARY_BAND) {
        est.k_hat *= bounds.k_norm_bound / norm;
    }
    if let (Some(k1), Some(bound)) = (est.k1_hat.as_mut(), bounds.k1_norm_bound) {
        let norm = k1.norm();
        if norm > bound * (1.0 + BOUNDARY_BAND) {
            *k1 *= bound / norm;
        }
    }
    // clamp in the configured sign's frame so an overshoot across zero is
    // pulled back to sign_l * l_lower, preserving sign constancy
    let signed = est.l_hat * bounds.sign_l;
    est.l_hat = bounds.sign_l * signed.clamp(bounds.l_lower, bounds.l_upper);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn unit_pair(n: usize) -> LyapunovPair {
        LyapunovPair {
            p: Matrix::identity(n, n),
            q: Matrix::identity(n, n),
            residual_norm: 0.0,
        }
    }

    #[test]
    fn gradient_vanishes_at_zero_error() {
        let pair = unit_pair(2);
        let mu = barrier_gradient(
            &Vector::zeros(2),
            &pair,
            &Vector::from_vec(vec![1.0, 0.0]),
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(mu.value, 0.0);
        assert!(!mu.floored);
    }

    #[test]
    fn gradient_is_odd_in_error() {
        let pair = unit_pair(2);
        let b_m = Vector::from_vec(vec![0.7, -0.3]);
        let e = Vector::from_vec(vec![0.1, 0.05]);
        let plus = barrier_gradient(&e, &pair, &b_m, 1.0, 0.5).unwrap();
        let minus = barrier_gradient(&(-e), &pair, &b_m, 1.0, 0.5).unwrap();
        assert!((plus.value + minus.value).abs() < 1e-15);
    }

    #[test]
    fn gradient_scalar_case() {
        // n = 1, P = 1, B_m = 1, sign = +1, M = 1, e = 0.5 -> 16/9
        let pair = unit_pair(1);
        let mu = barrier_gradient(
            &Vector::from_vec(vec![0.5]),
            &pair,
            &Vector::from_vec(vec![1.0]),
            1.0,
            1.0,
        )
        .unwrap();
        assert!((mu.value - 16.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_rejects_barrier_crossing() {
        let pair = unit_pair(1);
        let err = barrier_gradient(
            &Vector::from_vec(vec![1.0]),
            &pair,
            &Vector::from_vec(vec![1.0]),
            1.0,
            0.5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BarrierViolated { .. }));
    }

    #[test]
    fn gradient_floor_flags() {
        let pair = unit_pair(1);
        // e'Pe just inside M^2 so (M^2 - w)^2 < 1e-12
        let m = 1.0;
        let e = Vector::from_vec(vec![(1.0f64 - 1e-8).sqrt()]);
        let mu = barrier_gradient(&e, &pair, &Vector::from_vec(vec![1.0]), 1.0, m).unwrap();
        assert!(mu.floored);
        assert!(mu.value.is_finite());
    }

    #[test]
    fn baseline_ratio_to_barrier() {
        let pair = unit_pair(2);
        let b_m = Vector::from_vec(vec![1.0, 0.5]);
        let e = Vector::from_vec(vec![0.1, -0.05]);
        let m = 0.6;
        let barrier = barrier_gradient(&e, &pair, &b_m, 1.0, m).unwrap().value;
        let base = baseline_gradient(&e, &pair, &b_m, 1.0);
        let m_sq = m * m;
        let w = pair.quad_form(&e);
        let expected_ratio = m_sq / ((m_sq - w) * (m_sq - w));
        assert!((barrier / base - expected_ratio).abs() < 1e-12);
    }

    #[test]
    fn k_update_interior() {
        let k = Vector::from_vec(vec![0.0, 0.0]);
        let d = k_hat_deriv(&k, 1.0, &Vector::from_vec(vec![1.0, 0.0]), 2.0, 10.0);
        assert_eq!(d.as_slice(), &[-2.0, 0.0]);
    }

    #[test]
    fn k_update_boundary_outward_is_tangential() {
        let m_k = 2.0;
        let k = Vector::from_vec(vec![m_k, 0.0]);
        // mu x'k < 0 -> outward flow under the full law
        let x = Vector::from_vec(vec![-1.0, 0.5]);
        let d = k_hat_deriv(&k, 1.0, &x, 2.0, m_k);
        assert!(k.dot(&d).abs() < 1e-12, "radial growth rate must vanish");
        // boundary with inward flow keeps the full law
        let x_in = Vector::from_vec(vec![1.0, 0.5]);
        let d_in = k_hat_deriv(&k, 1.0, &x_in, 2.0, m_k);
        assert_eq!(d_in.as_slice(), &[-2.0, -1.0]);
    }

    #[test]
    fn k_update_zero_gradient() {
        let k = Vector::from_vec(vec![1.0, 1.0]);
        let d = k_hat_deriv(&k, 0.0, &Vector::from_vec(vec![3.0, -4.0]), 2.0, 1.4142);
        assert_eq!(d.amax(), 0.0);
    }

    #[test]
    fn l_update_interior_and_freezes() {
        // interior: -gamma mu r
        let d = l_hat_deriv(2.0, 2.0, 0.5, 0.05, 1.0, 4.0);
        assert!((d - -0.05).abs() < 1e-15);
        // at lower bound with shrinking flow: frozen
        assert_eq!(l_hat_deriv(1.0, 1.0, 0.5, 0.05, 1.0, 4.0), 0.0);
        // at upper bound with growing flow: frozen
        assert_eq!(l_hat_deriv(4.0, -1.0, 0.5, 0.05, 1.0, 4.0), 0.0);
        // at lower bound with growing flow: active
        assert!(l_hat_deriv(1.0, -1.0, 0.5, 0.05, 1.0, 4.0) > 0.0);
        // zero gradient
        assert_eq!(l_hat_deriv(2.0, 0.0, 0.5, 0.05, 1.0, 4.0), 0.0);
    }

    #[test]
    fn l_update_negative_sign_branch() {
        // sign(l) = -1 run: |l_hat| at lower bound, flow shrinking |l_hat|
        let d = l_hat_deriv(-1.0, 1.0, -0.5, 0.05, 1.0, 4.0);
        // drive = mu r l = (1)(-0.5)(-1) = 0.5 > 0 -> frozen
        assert_eq!(d, 0.0);
    }

    #[test]
    fn k1_update_matches_structure() {
        let k1 = Vector::from_vec(vec![0.0, 0.0]);
        let d = k1_hat_deriv(&k1, 1.0, &Vector::from_vec(vec![0.0, 1.0]), 3.0, 5.0);
        assert_eq!(d.as_slice(), &[0.0, -3.0]);
        assert_eq!(
            k1_hat_deriv(&k1, 1.0, &Vector::zeros(2), 3.0, 5.0).amax(),
            0.0
        );
    }

    #[test]
    fn projection_cleanup() {
        let bounds = ProjectionBounds {
            k_norm_bound: 2.0,
            l_lower: 1.0,
            l_upper: 4.0,
            sign_l: 1.0,
            k1_norm_bound: Some(1.0),
        };
        let mut est = EstimateState {
            k_hat: Vector::from_vec(vec![3.0, 0.0]),
            l_hat: 0.5,
            k1_hat: Some(Vector::from_vec(vec![0.0, -2.0])),
        };
        project_estimates(&mut est, &bounds);
        assert!((est.k_hat.norm() - 2.0).abs() < 1e-12);
        assert_eq!(est.l_hat, 1.0);
        assert!((est.k1_hat.as_ref().unwrap().norm() - 1.0).abs() < 1e-12);

        // overshoot across zero restores the configured sign
        let mut est = EstimateState {
            k_hat: Vector::zeros(2),
            l_hat: -0.2,
            k1_hat: None,
        };
        project_estimates(&mut est, &bounds);
        assert_eq!(est.l_hat, 1.0);

        // interior values pass through bit-exactly
        let mut est = EstimateState {
            k_hat: Vector::from_vec(vec![1.0, 0.5]),
            l_hat: 2.7,
            k1_hat: None,
        };
        project_estimates(&mut est, &bounds);
        assert_eq!(est.l_hat, 2.7);
        assert_eq!(est.k_hat.as_slice(), &[1.0, 0.5]);
    }
}
