//! The iteration: schedule, single steps with their diagnostics, and the
//! driver that accumulates the conjugacy.

mod engine;
mod schedule;

pub use engine::{
    verify_conjugacy, ConjugacyResult, HarmonicMode, KamConfig, KamEngine, KamState, RunStatus, StepOutcome,
    StepRecord,
};
pub use schedule::{radius, Schedule, ScheduleRow, SmallnessGate};
