//! Fixed-step closed-loop integration of the augmented system: plant,
//! original target, reference-modified target and the adaptive estimates,
//! advanced together by classical RK4 with the controller re-evaluated at
//! every stage.
//!
//! The reference modification `g` has a kink across the saturation boundary;
//! re-evaluating it inside RK4 stages degrades local order to O(dt^2) near
//! switching instants, which is accepted: constraint satisfaction is the
//! contract, not high-order accuracy near switches.

use std::io::{self, Write};

use serde::Serialize;

use crate::adaptation::{
    self, project_estimates, AdaptationGains, BarrierGradient, EstimateState,
};
use crate::controller::{
    assumption_margin, constrained_control, nominal_control, ControlDecision, ControllerVariant,
    SaturationMode,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::scenario::{
    compute_barrier, derive_k1, validate_scenario, BarrierMode, BarrierSpec, ScenarioConfig,
};

/// Fraction of the barrier radius restored by the soft renormalization.
const SOFT_RENORM_FRACTION: f64 = 0.999;
/// Slack on the input bound accepted by the summary flag.
const INPUT_FLAG_SLACK: f64 = 1e-9;

/// Complete integration state at one instant.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub t: f64,
    pub x: Vector,
    pub x_m: Vector,
    pub x_m_s: Vector,
    pub est: EstimateState,
}

impl AugmentedState {
    fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.x_m.iter().all(|v| v.is_finite())
            && self.x_m_s.iter().all(|v| v.is_finite())
            && self.est.k_hat.iter().all(|v| v.is_finite())
            && self.est.l_hat.is_finite()
            && self
                .est
                .k1_hat
                .as_ref()
                .is_none_or(|k1| k1.iter().all(|v| v.is_finite()))
    }
}

/// Derivative of the augmented state.
struct Deriv {
    x: Vector,
    x_m: Vector,
    x_m_s: Vector,
    k_hat: Vector,
    l_hat: f64,
    k1_hat: Option<Vector>,
}

struct StageOut {
    deriv: Deriv,
    floored: bool,
}

fn offset(s: &AugmentedState, h: f64, d: &Deriv) -> AugmentedState {
    AugmentedState {
        t: s.t,
        x: &s.x + &d.x * h,
        x_m: &s.x_m + &d.x_m * h,
        x_m_s: &s.x_m_s + &d.x_m_s * h,
        est: EstimateState {
            k_hat: &s.est.k_hat + &d.k_hat * h,
            l_hat: s.est.l_hat + d.l_hat * h,
            k1_hat: match (&s.est.k1_hat, &d.k1_hat) {
                (Some(k1), Some(dk1)) => Some(k1 + dk1 * h),
                _ => s.est.k1_hat.clone(),
            },
        },
    }
}

/// Flags raised inside a single step, folded into events by the run loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepEffects {
    /// The barrier-gradient denominator floor was binding in some stage.
    pub barrier_floored: bool,
    /// Soft mode pulled the error back inside the barrier after the step.
    pub soft_renormalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BarrierSaturated,
    StabilityConditionViolated,
    BarrierSoftRenormalized,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::BarrierSaturated => "barrier_saturated",
            EventKind::StabilityConditionViolated => "stability_condition_violated",
            EventKind::BarrierSoftRenormalized => "barrier_soft_renormalized",
        }
    }
}

/// Monitor event with the timestamp where its episode began.
#[derive(Debug, Clone, Serialize)]
pub struct SimEvent {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

/// One uniformly-sampled trace record.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub t: f64,
    pub x: Vector,
    pub x_m: Vector,
    pub x_m_s: Vector,
    pub k_hat: Vector,
    pub l_hat: f64,
    pub k1_hat: Option<Vector>,
    pub f: f64,
    pub decision: ControlDecision,
    /// `e' P e / M^2`; 1.0 is the barrier.
    pub barrier_fraction: f64,
    pub x_norm: f64,
    pub error_norm: f64,
    /// Barrier Lyapunov function, available when the scenario admits exact
    /// matching gains (truth known) and the variant is barrier-driven.
    pub lyapunov_v: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub dim: usize,
    pub has_k1: bool,
    pub has_v: bool,
    pub records: Vec<TraceRecord>,
    pub events: Vec<SimEvent>,
}

/// Constraint verdicts for one run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstraintFlags {
    /// `sup ||X|| < M_x`.
    pub state_ok: bool,
    /// `sup |u^s| <= M_u` (up to integration slack).
    pub input_ok: bool,
    /// Online stability condition held throughout.
    pub margin_ok: bool,
    /// `sup ||E^s|| < M_e`.
    pub error_within_radius: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub variant: ControllerVariant,
    pub dt: f64,
    pub horizon: f64,
    pub input_bound: f64,
    pub state_norm_bound: f64,
    pub error_radius: f64,
    pub barrier_radius: f64,
    pub sup_x_norm: f64,
    pub sup_u_applied: f64,
    pub sup_g_abs: f64,
    pub inf_margin: f64,
    pub sup_error_norm: f64,
    /// Mean `||E^s||` over the last 10% of the horizon.
    pub final_window_mean_error: f64,
    /// `sup ||X_m^s - X_m||` over the whole horizon.
    pub sup_target_shift: f64,
    /// `sup ||X_m^s - X_m||` over the final half-horizon.
    pub final_half_target_shift_sup: f64,
    pub flags: ConstraintFlags,
    /// True iff a constraint this variant promises to hold was breached.
    pub constraint_violation: bool,
    pub event_count: usize,
}

/// True matching gains recovered from a fixture-complete scenario.
struct TruthGains {
    k: Vector,
    l: f64,
    k1: Option<Vector>,
}

/// A prepared scenario: Lyapunov pair solved, barrier fixed, truth gains
/// recovered when the matching condition holds exactly.
pub struct Runner {
    config: ScenarioConfig,
    barrier: BarrierSpec,
    truth: Option<TruthGains>,
}

impl Runner {
    /// Prepare a validated scenario.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let violations = validate_scenario(&config);
        if !violations.is_empty() {
            return Err(Error::ScenarioInvalid(
                violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        Self::new_unchecked(config)
    }

    /// Prepare a scenario without running the validators (force mode).
    pub fn new_unchecked(config: ScenarioConfig) -> Result<Self> {
        let pair = linalg::solve_lyapunov(&config.target.a_m, &config.effective_q())?;
        let barrier = compute_barrier(&config.constraints, &pair)?;
        Ok(Self::with_barrier(config, barrier))
    }

    /// Prepare a scenario against an externally supplied barrier/Lyapunov
    /// geometry.
    pub fn with_barrier(config: ScenarioConfig, barrier: BarrierSpec) -> Self {
        let truth = derive_truth(&config);
        Runner {
            config,
            barrier,
            truth,
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn barrier(&self) -> &BarrierSpec {
        &self.barrier
    }

    pub fn initial_state(&self) -> AugmentedState {
        let mut est = self.config.initial_estimates.clone();
        if self.config.variant != ControllerVariant::NonlinearStateAndInput {
            est.k1_hat = None;
        }
        AugmentedState {
            t: 0.0,
            x: self.config.plant.x0.clone(),
            x_m: self.config.target.xm0.clone(),
            x_m_s: self.config.target.xm0.clone(),
            est,
        }
    }

    fn phi(&self, x: &Vector) -> Result<Option<Vector>> {
        if self.config.variant != ControllerVariant::NonlinearStateAndInput {
            return Ok(None);
        }
        let spec = self
            .config
            .plant
            .model
            .nonlinearity
            .as_ref()
            .ok_or_else(|| {
                Error::DimensionMismatch("nonlinear variant without a nonlinearity spec".into())
            })?;
        Ok(Some(spec.eval(x)?))
    }

    fn gradient(&self, e: &Vector) -> Result<BarrierGradient> {
        let pair = &self.barrier.pair;
        let b_m = &self.config.target.b_m;
        let sign_l = self.config.bounds.sign_l;
        match self.config.variant {
            ControllerVariant::BaselineMrac => Ok(BarrierGradient {
                value: adaptation::baseline_gradient(e, pair, b_m, sign_l),
                floored: false,
            }),
            _ => match self.config.integrator.barrier_mode {
                BarrierMode::Abort => {
                    adaptation::barrier_gradient(e, pair, b_m, sign_l, self.barrier.radius)
                }
                BarrierMode::SoftRenormalize => Ok(adaptation::barrier_gradient_raw(
                    e,
                    pair,
                    b_m,
                    sign_l,
                    self.barrier.radius,
                )),
            },
        }
    }

    /// Tracking error driving adaptation: against the modified target in
    /// barrier modes, against the original target for the baseline.
    fn tracking_error(&self, s: &AugmentedState) -> Vector {
        match self.config.variant {
            ControllerVariant::BaselineMrac => &s.x - &s.x_m,
            _ => &s.x - &s.x_m_s,
        }
    }

    fn stage(&self, t: f64, s: &AugmentedState) -> Result<StageOut> {
        let cfg = &self.config;
        let gains: &AdaptationGains = &cfg.gains;
        let bounds = &cfg.bounds;
        let f = cfg.reference.eval(t);
        let phi = self.phi(&s.x)?;
        let u_nominal = nominal_control(&s.est, &s.x, f, phi.as_ref())?;

        let (u_applied, g) = match cfg.variant {
            ControllerVariant::StateAndInput | ControllerVariant::NonlinearStateAndInput => {
                let m_u = cfg.constraints.input_bound;
                let g = crate::controller::reference_modification(u_nominal, m_u, s.est.l_hat);
                (u_nominal.clamp(-m_u, m_u), g)
            }
            ControllerVariant::StateOnly | ControllerVariant::BaselineMrac => (u_nominal, 0.0),
        };
        let r = f + g;

        let e = self.tracking_error(s);
        let mu = self.gradient(&e)?;

        let k_hat = adaptation::k_hat_deriv(
            &s.est.k_hat,
            mu.value,
            &s.x,
            gains.k_gain,
            bounds.k_norm_bound,
        );
        let l_hat = adaptation::l_hat_deriv(
            s.est.l_hat,
            mu.value,
            r,
            gains.l_gain,
            bounds.l_lower,
            bounds.l_upper,
        );
        let k1_hat = match (&s.est.k1_hat, &phi) {
            (Some(k1), Some(phi_x)) => Some(adaptation::k1_hat_deriv(
                k1,
                mu.value,
                phi_x,
                gains.k1_gain.unwrap_or(0.0),
                bounds.k1_norm_bound.unwrap_or(f64::INFINITY),
            )),
            _ => None,
        };

        Ok(StageOut {
            deriv: Deriv {
                x: cfg.plant.model.deriv(&s.x, u_applied)?,
                x_m: cfg.target.deriv(&s.x_m, f)?,
                x_m_s: cfg.target.deriv(&s.x_m_s, r)?,
                k_hat,
                l_hat,
                k1_hat,
            },
            floored: mu.floored,
        })
    }

    /// One classical RK4 step of length `dt`, followed by the discrete
    /// projection cleanup and barrier/finiteness monitors.
    pub fn step(&self, s: &AugmentedState) -> Result<(AugmentedState, StepEffects)> {
        let dt = self.config.integrator.dt;
        let half = dt / 2.0;
        let mut effects = StepEffects::default();

        let k1 = self.stage(s.t, s).map_err(|e| e.at_time(s.t))?;
        let s2 = offset(s, half, &k1.deriv);
        let k2 = self.stage(s.t + half, &s2).map_err(|e| e.at_time(s.t + half))?;
        let s3 = offset(s, half, &k2.deriv);
        let k3 = self.stage(s.t + half, &s3).map_err(|e| e.at_time(s.t + half))?;
        let s4 = offset(s, dt, &k3.deriv);
        let k4 = self.stage(s.t + dt, &s4).map_err(|e| e.at_time(s.t + dt))?;
        effects.barrier_floored = k1.floored || k2.floored || k3.floored || k4.floored;

        let sixth = dt / 6.0;
        let combine = |a: &Vector, b: &Vector, c: &Vector, d: &Vector| -> Vector {
            a + b * 2.0 + c * 2.0 + d
        };
        let mut next = AugmentedState {
            t: s.t + dt,
            x: &s.x + combine(&k1.deriv.x, &k2.deriv.x, &k3.deriv.x, &k4.deriv.x) * sixth,
            x_m: &s.x_m
                + combine(&k1.deriv.x_m, &k2.deriv.x_m, &k3.deriv.x_m, &k4.deriv.x_m) * sixth,
            x_m_s: &s.x_m_s
                + combine(
                    &k1.deriv.x_m_s,
                    &k2.deriv.x_m_s,
                    &k3.deriv.x_m_s,
                    &k4.deriv.x_m_s,
                ) * sixth,
            est: EstimateState {
                k_hat: &s.est.k_hat
                    + combine(
                        &k1.deriv.k_hat,
                        &k2.deriv.k_hat,
                        &k3.deriv.k_hat,
                        &k4.deriv.k_hat,
                    ) * sixth,
                l_hat: s.est.l_hat
                    + (k1.deriv.l_hat
                        + 2.0 * k2.deriv.l_hat
                        + 2.0 * k3.deriv.l_hat
                        + k4.deriv.l_hat)
                        * sixth,
                k1_hat: match (
                    &s.est.k1_hat,
                    &k1.deriv.k1_hat,
                    &k2.deriv.k1_hat,
                    &k3.deriv.k1_hat,
                    &k4.deriv.k1_hat,
                ) {
                    (Some(v), Some(a), Some(b), Some(c), Some(d)) => {
                        Some(v + combine(a, b, c, d) * sixth)
                    }
                    _ => s.est.k1_hat.clone(),
                },
            },
        };

        project_estimates(&mut next.est, &self.config.bounds);

        if !next.is_finite() {
            return Err(Error::NonFiniteState.at_time(next.t));
        }

        if self.config.variant.barrier_is_hard() {
            let e = self.tracking_error(&next);
            let quad = self.barrier.pair.quad_form(&e);
            let m_sq = self.barrier.radius_sq();
            if quad >= m_sq {
                match self.config.integrator.barrier_mode {
                    BarrierMode::Abort => {
                        return Err(Error::BarrierViolated {
                            quad_form: quad,
                            barrier_sq: m_sq,
                        }
                        .at_time(next.t))
                    }
                    BarrierMode::SoftRenormalize => {
                        // pull the error radially back to 0.999 of the barrier
                        // (in the P-weighted norm) by moving the modified
                        // target; exploratory runs only
                        let scale = SOFT_RENORM_FRACTION * self.barrier.radius / quad.sqrt();
                        let e_new = &e * scale;
                        next.x_m_s = &next.x - e_new;
                        effects.soft_renormalized = true;
                    }
                }
            }
        }

        Ok((next, effects))
    }

    /// Diagnostics at the current state; pure, does not advance time.
    pub fn observe(&self, s: &AugmentedState) -> Result<TraceRecord> {
        let cfg = &self.config;
        let f = cfg.reference.eval(s.t);
        let phi = self.phi(&s.x)?;
        let decision = match cfg.variant {
            ControllerVariant::StateAndInput | ControllerVariant::NonlinearStateAndInput => {
                constrained_control(
                    &s.est,
                    &s.x,
                    f,
                    cfg.constraints.input_bound,
                    cfg.constraints.reference_bound,
                    cfg.bounds.sign_l,
                    phi.as_ref(),
                )?
            }
            ControllerVariant::StateOnly | ControllerVariant::BaselineMrac => {
                let u = nominal_control(&s.est, &s.x, f, phi.as_ref())?;
                ControlDecision {
                    u_nominal: u,
                    g: 0.0,
                    u_applied: u,
                    margin: assumption_margin(
                        &s.est,
                        &s.x,
                        cfg.constraints.reference_bound,
                        cfg.constraints.input_bound,
                        cfg.bounds.sign_l,
                        phi.as_ref(),
                    ),
                    mode: SaturationMode::Unsaturated,
                }
            }
        };
        let e = self.tracking_error(s);
        let quad = self.barrier.pair.quad_form(&e);
        Ok(TraceRecord {
            t: s.t,
            x: s.x.clone(),
            x_m: s.x_m.clone(),
            x_m_s: s.x_m_s.clone(),
            k_hat: s.est.k_hat.clone(),
            l_hat: s.est.l_hat,
            k1_hat: s.est.k1_hat.clone(),
            f,
            decision,
            barrier_fraction: quad / self.barrier.radius_sq(),
            x_norm: s.x.norm(),
            error_norm: e.norm(),
            lyapunov_v: self.lyapunov_v(&e, &s.est),
        })
    }

    /// Barrier Lyapunov function against the true gains, when known.
    fn lyapunov_v(&self, e: &Vector, est: &EstimateState) -> Option<f64> {
        if self.config.variant == ControllerVariant::BaselineMrac {
            return None;
        }
        let truth = self.truth.as_ref()?;
        let quad = self.barrier.pair.quad_form(e);
        let m_sq = self.barrier.radius_sq();
        let gamma = 1.0 / truth.l.abs(); // Sign(l)/l
        let gains = &self.config.gains;
        let mut v = quad / (m_sq - quad)
            + gamma / (2.0 * gains.k_gain) * (&est.k_hat - &truth.k).norm_squared()
            + gamma / (2.0 * gains.l_gain) * (est.l_hat - truth.l).powi(2);
        if let (Some(k1_hat), Some(k1), Some(g1)) = (&est.k1_hat, &truth.k1, gains.k1_gain) {
            v += gamma / (2.0 * g1) * (k1_hat - k1).norm_squared();
        }
        Some(v)
    }

    /// Integrate over the full horizon, recording every step.
    ///
    /// Deterministic given the configuration: repeated runs produce
    /// bit-identical traces.
    pub fn run(&self) -> Result<(SimulationTrace, RunSummary)> {
        let integ = &self.config.integrator;
        let steps = (integ.horizon / integ.dt).floor() as usize;
        let mut records = Vec::with_capacity(steps + 1);
        let mut events = Vec::new();
        let mut state = self.initial_state();
        let mut margin_episode = false;
        let mut floor_episode = false;

        for i in 0..=steps {
            let record = self.observe(&state).map_err(|e| e.at_time(state.t))?;
            if record.decision.margin < 0.0 {
                if !margin_episode {
                    events.push(SimEvent {
                        t: state.t,
                        kind: EventKind::StabilityConditionViolated,
                        detail: format!("margin = {:.6e}", record.decision.margin),
                    });
                    margin_episode = true;
                }
                if integ.abort_on_negative_margin {
                    let margin = record.decision.margin;
                    return Err(Error::StabilityConditionViolated { margin }.at_time(state.t));
                }
            } else {
                margin_episode = false;
            }
            records.push(record);
            if i == steps {
                break;
            }
            let (next, effects) = self.step(&state)?;
            if effects.barrier_floored && !floor_episode {
                events.push(SimEvent {
                    t: state.t,
                    kind: EventKind::BarrierSaturated,
                    detail: "barrier denominator floor binding".into(),
                });
            }
            floor_episode = effects.barrier_floored;
            if effects.soft_renormalized {
                events.push(SimEvent {
                    t: next.t,
                    kind: EventKind::BarrierSoftRenormalized,
                    detail: "error renormalized inside the barrier".into(),
                });
            }
            state = next;
        }

        let summary = self.summarize(&records, &events);
        Ok((
            SimulationTrace {
                dim: self.config.dim(),
                has_k1: records
                    .first()
                    .is_some_and(|r| r.k1_hat.is_some()),
                has_v: records.first().is_some_and(|r| r.lyapunov_v.is_some()),
                records,
                events,
            },
            summary,
        ))
    }

    fn summarize(&self, records: &[TraceRecord], events: &[SimEvent]) -> RunSummary {
        let cfg = &self.config;
        let end = records.last().map(|r| r.t).unwrap_or(0.0);
        let window_start = 0.9 * end;
        let half = 0.5 * end;
        let mut sup_x: f64 = 0.0;
        let mut sup_u: f64 = 0.0;
        let mut sup_g: f64 = 0.0;
        let mut inf_margin = f64::INFINITY;
        let mut sup_err: f64 = 0.0;
        let mut sup_shift: f64 = 0.0;
        let mut half_shift: f64 = 0.0;
        let mut window_sum = 0.0;
        let mut window_count = 0usize;
        for r in records {
            sup_x = sup_x.max(r.x_norm);
            sup_u = sup_u.max(r.decision.u_applied.abs());
            sup_g = sup_g.max(r.decision.g.abs());
            inf_margin = inf_margin.min(r.decision.margin);
            sup_err = sup_err.max(r.error_norm);
            let shift = (&r.x_m_s - &r.x_m).norm();
            sup_shift = sup_shift.max(shift);
            if r.t >= half {
                half_shift = half_shift.max(shift);
            }
            if r.t >= window_start {
                window_sum += r.error_norm;
                window_count += 1;
            }
        }
        let flags = ConstraintFlags {
            state_ok: sup_x < cfg.constraints.state_norm_bound,
            input_ok: sup_u <= cfg.constraints.input_bound + INPUT_FLAG_SLACK,
            margin_ok: inf_margin >= 0.0,
            error_within_radius: sup_err < self.barrier.error_radius,
        };
        let constraint_violation =
            !flags.state_ok || (cfg.variant.enforces_input_bound() && !flags.input_ok);
        RunSummary {
            name: cfg.name.clone(),
            variant: cfg.variant,
            dt: cfg.integrator.dt,
            horizon: cfg.integrator.horizon,
            input_bound: cfg.constraints.input_bound,
            state_norm_bound: cfg.constraints.state_norm_bound,
            error_radius: self.barrier.error_radius,
            barrier_radius: self.barrier.radius,
            sup_x_norm: sup_x,
            sup_u_applied: sup_u,
            sup_g_abs: sup_g,
            inf_margin,
            sup_error_norm: sup_err,
            final_window_mean_error: if window_count > 0 {
                window_sum / window_count as f64
            } else {
                f64::NAN
            },
            sup_target_shift: sup_shift,
            final_half_target_shift_sup: half_shift,
            flags,
            constraint_violation,
            event_count: events.len(),
        }
    }
}

/// Validate and run a scenario in one call.
pub fn run(config: &ScenarioConfig) -> Result<(SimulationTrace, RunSummary)> {
    Runner::new(config.clone())?.run()
}

/// Run the scenario once per input bound, in parallel; per-run failures are
/// collected, not fatal to the sweep. Results keep the order of `values`.
pub fn sweep_input_bound(
    config: &ScenarioConfig,
    values: &[f64],
) -> Vec<(f64, Result<(SimulationTrace, RunSummary)>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| {
                let mut cfg = config.clone();
                scope.spawn(move || {
                    cfg.constraints.input_bound = value;
                    Runner::new(cfg).and_then(|r| r.run())
                })
            })
            .collect();
        values
            .iter()
            .zip(handles)
            .map(|(&v, h)| (v, h.join().expect("sweep worker panicked")))
            .collect()
    })
}

fn derive_truth(config: &ScenarioConfig) -> Option<TruthGains> {
    let plant = &config.plant.model;
    let target = &config.target;
    let (k, l) = linalg::derive_matching_gains(
        &plant.a,
        &target.a_m,
        &plant.b,
        plant.lambda,
        &target.b_m,
    )
    .ok()?;
    let k1 = match &plant.a1 {
        Some(a1) => Some(derive_k1(a1, &plant.b, plant.lambda).ok()?),
        None => None,
    };
    Some(TruthGains { k, l, k1 })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the trace as CSV: one header row, one record per sample, 17
/// significant digits throughout. Column layout is documented in
/// `docs/trace_format.md`.
pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, out: &mut W) -> io::Result<()> {
    let n = trace.dim;
    let mut header: Vec<String> = vec!["t".into()];
    for i in 1..=n {
        header.push(format!("x{i}"));
    }
    for i in 1..=n {
        header.push(format!("xm{i}"));
    }
    for i in 1..=n {
        header.push(format!("xms{i}"));
    }
    header.extend(
        [
            "u",
            "us",
            "g",
            "f",
            "margin",
            "barrier_frac",
            "x_norm",
            "error_norm",
        ]
        .map(String::from),
    );
    for i in 1..=n {
        header.push(format!("khat{i}"));
    }
    header.push("lhat".into());
    if trace.has_k1 {
        for i in 1..=n {
            header.push(format!("k1hat{i}"));
        }
    }
    if trace.has_v {
        header.push("v".into());
    }
    writeln!(out, "{}", header.join(","))?;

    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in &trace.records {
        row.clear();
        row.push(fmt(r.t));
        row.extend(r.x.iter().map(|&v| fmt(v)));
        row.extend(r.x_m.iter().map(|&v| fmt(v)));
        row.extend(r.x_m_s.iter().map(|&v| fmt(v)));
        row.push(fmt(r.decision.u_nominal));
        row.push(fmt(r.decision.u_applied));
        row.push(fmt(r.decision.g));
        row.push(fmt(r.f));
        row.push(fmt(r.decision.margin));
        row.push(fmt(r.barrier_fraction));
        row.push(fmt(r.x_norm));
        row.push(fmt(r.error_norm));
        row.extend(r.k_hat.iter().map(|&v| fmt(v)));
        row.push(fmt(r.l_hat));
        if trace.has_k1 {
            match &r.k1_hat {
                Some(k1) => row.extend(k1.iter().map(|&v| fmt(v))),
                None => row.extend(std::iter::repeat_n(fmt(f64::NAN), n)),
            }
        }
        if trace.has_v {
            row.push(fmt(r.lyapunov_v.unwrap_or(f64::NAN)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Companion events CSV: `t,kind,detail`.
pub fn write_events_csv<W: Write>(trace: &SimulationTrace, out: &mut W) -> io::Result<()> {
    writeln!(out, "t,kind,detail")?;
    for e in &trace.events {
        writeln!(out, "{},{},{}", fmt(e.t), e.kind.as_str(), e.detail)?;
    }
    Ok(())
}
