//! Shared fixtures for the integration suites: bundled scenario loading and
//! randomized admissible-scenario generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cmrac::adaptation::{AdaptationGains, EstimateState};
use cmrac::dynamics::{PlantModel, ReferenceSignal, SinusoidTerm, TargetModel};
use cmrac::linalg::{eig_extrema_sym, solve_lyapunov, Matrix, Vector};
use cmrac::scenario::{
    validate_scenario, ConstraintSpec, IntegratorSettings, PlantConfig, ProjectionBounds,
    ScenarioConfig,
};
use cmrac::ControllerVariant;

pub fn load_scenario(name: &str) -> ScenarioConfig {
    let path = format!(
        "{}/../../scenarios/{name}",
        env!("CARGO_MANIFEST_DIR")
    );
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read bundled scenario {path}: {e}"));
    ScenarioConfig::from_json(&text).expect("bundled scenario must parse")
}

pub fn paper_scenario() -> ScenarioConfig {
    load_scenario("linear_3state.json")
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 0.2 {
            return v / v.norm();
        }
    }
}

/// Build a random scenario that provably satisfies every validated
/// hypothesis: Hurwitz target by Gershgorin shift, plant constructed from
/// true matching gains, reference budget sized from the analytic
/// target-bound formula, estimates started inside their sets.
///
/// `excite` offsets the initial plant state to a quarter of the barrier (in
/// the P-metric) so the adaptation actually moves.
pub fn random_admissible_scenario(
    rng: &mut ChaCha8Rng,
    n: usize,
    excite: bool,
) -> ScenarioConfig {
    loop {
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let row_sum_max = (0..n)
            .map(|i| g.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let shift = row_sum_max + rng.random_range(0.3..1.0);
        let a_m = &g - Matrix::identity(n, n) * shift;

        let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if b.norm() < 0.3 {
            continue;
        }
        let sign_lambda = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lambda = rng.random_range(0.3..1.5) * sign_lambda;
        let k_true = random_unit(rng, n) * rng.random_range(0.5..2.0);
        let sign_l = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let l_true = rng.random_range(0.8..2.5) * sign_l;
        let a = &a_m - (&b * lambda) * k_true.transpose();
        let b_m = &b * (lambda * l_true);

        let plant = PlantModel {
            a,
            b: b.clone(),
            lambda,
            a1: None,
            nonlinearity: None,
        };
        if !plant.is_controllable() {
            continue;
        }

        let pair = match solve_lyapunov(&a_m, &Matrix::identity(n, n)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let (p_min, p_max) = eig_extrema_sym(&pair.p).unwrap();

        let state_bound = rng.random_range(1.5..3.0);
        let target_bound = state_bound - rng.random_range(0.3..0.6);
        // size f_M from the analytic ultimate bound so the reference check
        // passes with margin (Xm0 = 0, Q = I)
        let f_cap = target_bound / ((p_max / p_min).sqrt() * 2.0 * (&pair.p * &b_m).norm());
        let reference_bound = 0.8 * f_cap;

        let k_norm_bound = k_true.norm() * 1.5 + 0.5;
        let l_lower = l_true.abs() * 0.5;
        let l_upper = l_true.abs() * 2.0;
        let input_bound = k_norm_bound * state_bound + l_upper * reference_bound + 0.5;

        let amplitude = rng.random_range(0.3..1.0) * reference_bound;
        let omega = rng.random_range(0.5..3.0);

        let k_hat0 = random_unit(rng, n) * (rng.random_range(0.0..0.5) * k_norm_bound);
        let l_hat0 = sign_l * rng.random_range(l_lower..l_upper);

        let xm0 = Vector::zeros(n);
        let x0 = if excite {
            // quarter of the barrier radius in the P-weighted metric
            let error_radius = state_bound - target_bound;
            let barrier_sq = error_radius * error_radius * p_min;
            let d = random_unit(rng, n);
            let quad = pair.quad_form(&d);
            &xm0 + d * (0.25 * barrier_sq / quad).sqrt()
        } else {
            xm0.clone()
        };

        let cfg = ScenarioConfig {
            schema_version: 1,
            name: format!("random-n{n}"),
            plant: PlantConfig { model: plant, x0 },
            target: TargetModel {
                a_m,
                b_m,
                xm0,
            },
            constraints: ConstraintSpec {
                state_norm_bound: state_bound,
                input_bound,
                target_norm_bound: target_bound,
                reference_bound,
            },
            bounds: ProjectionBounds {
                k_norm_bound,
                l_lower,
                l_upper,
                sign_l,
                k1_norm_bound: None,
            },
            gains: AdaptationGains {
                k_gain: 1.0,
                l_gain: 0.05,
                k1_gain: None,
            },
            initial_estimates: EstimateState {
                k_hat: k_hat0,
                l_hat: l_hat0,
                k1_hat: None,
            },
            reference: ReferenceSignal::Sinusoids {
                terms: vec![SinusoidTerm {
                    amplitude,
                    omega,
                    phase: 0.0,
                }],
                offset: 0.0,
            },
            integrator: IntegratorSettings {
                dt: 1e-3,
                horizon: 10.0,
                ..Default::default()
            },
            variant: ControllerVariant::StateAndInput,
            lyapunov_q: None,
        };
        if validate_scenario(&cfg).is_empty() {
            return cfg;
        }
    }
}
