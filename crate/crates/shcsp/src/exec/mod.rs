//! Stochastic execution of SHCSP systems: one sampled run applies the
//! operational semantics step by step, yielding a final state, a timed
//! trace, and a recorded flow.

pub(crate) mod cexpr;
pub mod interp;
pub mod merge;
pub mod state;

pub use interp::{run, step, StepOutcome};
pub use merge::{merge_states, merge_traces, pchoice_branch, weighted_pick, Branch};
pub use state::{
    Direction, ExitKind, Flow, FlowPoint, Label, ProcState, ReadyItem, ReadyStamp, RepeatPolicy,
    RunConfig, RunError, RunRecord, TimedItem, TimedTrace,
};
