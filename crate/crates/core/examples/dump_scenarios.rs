use cmrac::adaptation::{AdaptationGains, EstimateState};
use cmrac::dynamics::{
    Nonlinearity, NonlinearitySpec, PlantModel, ReferenceSignal, SinusoidTerm, TargetModel,
};
use cmrac::scenario::{
    validate_scenario, ConstraintSpec, IntegratorSettings, PlantConfig, ProjectionBounds,
    ScenarioConfig,
};
use cmrac::{ControllerVariant, Matrix, Vector};

fn main() {
    let linear = ScenarioConfig {
        schema_version: 1,
        name: "linear-3state".into(),
        plant: PlantConfig {
            model: PlantModel {
                a: Matrix::from_row_slice(3, 3, &[-0.5, 1.0, 1.85, -1.2, -1.7, -0.6, 2.5, 0.0, -0.4]),
                b: Vector::from_vec(vec![0.5, 0.0, 1.0]),
                lambda: 0.5,
                a1: None,
                nonlinearity: None,
            },
            x0: Vector::from_vec(vec![0.3, -0.2, 0.2]),
        },
        target: TargetModel {
            a_m: Matrix::from_row_slice(3, 3, &[-2.0, 1.5, 1.1, -1.2, -1.7, -0.6, -0.5, 1.0, -1.9]),
            b_m: Vector::from_vec(vec![0.5, 0.0, 1.0]),
            xm0: Vector::from_vec(vec![0.3, -0.2, 0.2]),
        },
        constraints: ConstraintSpec {
            state_norm_bound: 2.0,
            input_bound: 3.0,
            target_norm_bound: 1.9,
            reference_bound: 2.4,
        },
        bounds: ProjectionBounds {
            k_norm_bound: 10.0,
            l_lower: 1.0,
            l_upper: 4.0,
            sign_l: 1.0,
            k1_norm_bound: None,
        },
        gains: AdaptationGains { k_gain: 1.0, l_gain: 0.05, k1_gain: None },
        initial_estimates: EstimateState {
            k_hat: Vector::from_vec(vec![0.1, 0.1, 0.1]),
            l_hat: 3.0,
            k1_hat: None,
        },
        reference: ReferenceSignal::Sinusoids {
            terms: vec![
                SinusoidTerm { amplitude: 1.4, omega: 2.0, phase: 0.0 },
                SinusoidTerm { amplitude: 1.0, omega: 2.5, phase: 0.0 },
            ],
            offset: 0.0,
        },
        integrator: IntegratorSettings::default(),
        variant: ControllerVariant::StateAndInput,
        lyapunov_q: None,
    };
    assert!(validate_scenario(&linear).is_empty(), "{:?}", validate_scenario(&linear));
    std::fs::write("scenarios/linear_3state.json", linear.to_json() + "\n").unwrap();

    // nonlinear 2-state fixture: A = Am - B*lam*K', A1 = -B*lam*K1'
    let b = Vector::from_vec(vec![1.0, 0.5]);
    let lam = 0.8;
    let k_true = Vector::from_vec(vec![-3.0, 1.0]);
    let l_true = 2.0;
    let k1_true = Vector::from_vec(vec![0.5, -0.4]);
    let a_m = Matrix::from_row_slice(2, 2, &[-2.0, 1.0, -1.0, -2.0]);
    let a = &a_m - (&b * lam) * k_true.transpose();
    let a1 = -((&b * lam) * k1_true.transpose());
    let b_m = &b * (lam * l_true);
    let nonlinear = ScenarioConfig {
        schema_version: 1,
        name: "nonlinear-2state".into(),
        plant: PlantConfig {
            model: PlantModel {
                a,
                b,
                lambda: lam,
                a1: Some(a1),
                nonlinearity: Some(NonlinearitySpec(vec![Nonlinearity::Tanh, Nonlinearity::Tanh])),
            },
            x0: Vector::from_vec(vec![0.2, -0.1]),
        },
        target: TargetModel { a_m, b_m, xm0: Vector::from_vec(vec![0.2, -0.1]) },
        constraints: ConstraintSpec {
            state_norm_bound: 2.0,
            input_bound: 1.0,
            target_norm_bound: 1.8,
            reference_bound: 0.9,
        },
        bounds: ProjectionBounds {
            k_norm_bound: 5.0,
            l_lower: 1.0,
            l_upper: 3.0,
            sign_l: 1.0,
            k1_norm_bound: Some(1.5),
        },
        gains: AdaptationGains { k_gain: 1.0, l_gain: 0.05, k1_gain: Some(1.0) },
        initial_estimates: EstimateState {
            k_hat: Vector::zeros(2),
            l_hat: 1.5,
            k1_hat: Some(Vector::zeros(2)),
        },
        reference: ReferenceSignal::Sinusoids {
            terms: vec![SinusoidTerm { amplitude: 0.8, omega: 1.5, phase: 0.0 }],
            offset: 0.0,
        },
        integrator: IntegratorSettings::default(),
        variant: ControllerVariant::NonlinearStateAndInput,
        lyapunov_q: None,
    };
    assert!(validate_scenario(&nonlinear).is_empty(), "{:?}", validate_scenario(&nonlinear));
    std::fs::write("scenarios/nonlinear_2state.json", nonlinear.to_json() + "\n").unwrap();
    println!("wrote scenarios");
}
