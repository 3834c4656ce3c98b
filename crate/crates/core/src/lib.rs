//! Simulation library for adaptive tracking control of uncertain linear (and
//! Lipschitz-nonlinear-perturbed) systems under simultaneous state-norm and
//! input-magnitude constraints.
//!
//! The controller combines barrier-Lyapunov adaptation (the state constraint)
//! with an additive reference modification that parks the applied input at
//! the saturation boundary instead of exceeding it (the input constraint).
//! Every feasibility condition the guarantees rest on is executable:
//! matching-gain existence, target stability, reference-amplitude budgets,
//! and the online stability margin.
//!
//! Modules follow the pipeline: [`linalg`] (Lyapunov/eigen kernels) ->
//! [`dynamics`] (plant/target right-hand sides) -> [`scenario`] (config and
//! validators) -> [`adaptation`] (projection update laws) -> [`controller`]
//! (control laws) -> [`simulator`] (closed-loop RK4 with monitors and trace
//! export).

pub mod adaptation;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod scenario;
mod serde_util;
pub mod simulator;

pub use adaptation::{AdaptationGains, EstimateState};
pub use controller::{ControlDecision, ControllerVariant, SaturationMode};
pub use dynamics::{NonlinearitySpec, PlantModel, ReferenceSignal, TargetModel};
pub use error::{Error, Result};
pub use linalg::{LyapunovPair, Matrix, Vector};
pub use scenario::{
    BarrierMode, BarrierSpec, CheckReport, ConstraintSpec, IntegratorSettings, ProjectionBounds,
    ScenarioConfig, Violation,
};
pub use simulator::{RunSummary, Runner, SimulationTrace, TraceRecord};

#[cfg(test)]
pub(crate) mod test_rng {
    /// Tiny deterministic xorshift for sampled unit-test properties.
    pub struct XorShift(u64);

    impl XorShift {
        pub fn new(seed: u64) -> Self {
            XorShift(seed.max(1).wrapping_mul(0x9e3779b97f4a7c15))
        }

        pub fn next_f64(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }

        pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }
}
