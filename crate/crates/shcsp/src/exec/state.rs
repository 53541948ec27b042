//! Runtime state of a sampled run: timed traces, readiness records, process
//! states, recorded flows, and run configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::rational::Ratio;
use num::BigInt;
use thiserror::Error;

use crate::syntax::ast::{EvalError, Rational};

/// One observable item of a timed trace: a communication `⟨ch.c, t⟩` or an
/// internal action `⟨τ, t⟩`.
#[derive(Clone, Debug, PartialEq)]
pub enum TimedItem {
    Comm { chan: String, value: f64, time: f64 },
    Internal { time: f64 },
}

impl TimedItem {
    pub fn time(&self) -> f64 {
        match self {
            TimedItem::Comm { time, .. } | TimedItem::Internal { time } => *time,
        }
    }

    pub fn chan(&self) -> Option<&str> {
        match self {
            TimedItem::Comm { chan, .. } => Some(chan),
            TimedItem::Internal { .. } => None,
        }
    }

    /// Total identity key (f64 payloads by bit pattern), for set-like
    /// collections of traces.
    pub(crate) fn key(&self) -> (u8, String, u64, u64) {
        match self {
            TimedItem::Comm { chan, value, time } => {
                (0, chan.clone(), value.to_bits(), time.to_bits())
            }
            TimedItem::Internal { time } => (1, String::new(), 0, time.to_bits()),
        }
    }
}

impl fmt::Display for TimedItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimedItem::Comm { chan, value, time } => write!(f, "<{chan}.{value}, {time}>"),
            TimedItem::Internal { time } => write!(f, "<tau, {time}>"),
        }
    }
}

/// A time-sorted sequence of [`TimedItem`]s.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimedTrace(pub Vec<TimedItem>);

impl TimedTrace {
    pub fn new() -> Self {
        TimedTrace(Vec::new())
    }

    pub fn items(&self) -> &[TimedItem] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push_internal(&mut self, time: f64) {
        self.0.push(TimedItem::Internal { time });
    }

    pub fn push_comm(&mut self, chan: &str, value: f64, time: f64) {
        self.0.push(TimedItem::Comm {
            chan: chan.to_string(),
            value,
            time,
        });
    }

    pub fn last_time(&self) -> Option<f64> {
        self.0.last().map(TimedItem::time)
    }

    /// Projection onto one channel: the communications along `chan`, in order.
    pub fn project(&self, chan: &str) -> Vec<(f64, f64)> {
        self.0
            .iter()
            .filter_map(|item| match item {
                TimedItem::Comm { chan: c, value, time } if c == chan => Some((*value, *time)),
                _ => None,
            })
            .collect()
    }

    /// Number of communications along `chan`.
    pub fn comm_count(&self, chan: &str) -> usize {
        self.0
            .iter()
            .filter(|item| item.chan() == Some(chan))
            .count()
    }

    /// The set of channels occurring in the trace (the paper's Σ(τ)).
    pub fn channels(&self) -> BTreeSet<String> {
        self.0
            .iter()
            .filter_map(|item| item.chan().map(str::to_string))
            .collect()
    }

    pub fn is_time_sorted(&self) -> bool {
        self.0.windows(2).all(|w| w[0].time() <= w[1].time())
    }

    pub fn prefix(&self, len: usize) -> TimedTrace {
        TimedTrace(self.0[..len.min(self.0.len())].to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Input => "?",
            Direction::Output => "!",
        }
    }
}

/// A registered communication readiness `h.ch?` or `h.ch!`: channel,
/// direction, and the trace prefix `h` current at registration time.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadyItem {
    pub chan: String,
    pub direction: Direction,
    pub prefix: TimedTrace,
}

impl ReadyItem {
    /// Matching key per the projection-count discipline: two readiness
    /// records denote the same offer iff channel, direction, and the number
    /// of prior communications on that channel agree.
    pub fn match_key(&self) -> (&str, Direction, usize) {
        (
            &self.chan,
            self.direction,
            self.prefix.comm_count(&self.chan),
        )
    }
}

/// The global state of a run: valuation, clock, trace, and readiness set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProcState {
    pub vals: BTreeMap<String, f64>,
    pub now: f64,
    pub tr: TimedTrace,
    pub rdy: Vec<ReadyItem>,
}

impl ProcState {
    pub fn new(vals: BTreeMap<String, f64>) -> Self {
        ProcState {
            vals,
            now: 0.0,
            tr: TimedTrace::new(),
            rdy: Vec::new(),
        }
    }

    /// Register readiness for `chan` in `direction` with the current trace
    /// as prefix. `rdy` is a set: re-registering an equivalent offer is a
    /// no-op.
    pub fn register_ready(&mut self, chan: &str, direction: Direction) {
        let item = ReadyItem {
            chan: chan.to_string(),
            direction,
            prefix: self.tr.clone(),
        };
        if !self
            .rdy
            .iter()
            .any(|r| r.match_key() == item.match_key())
        {
            self.rdy.push(item);
        }
    }

    /// Remove one readiness record matching channel and direction.
    pub fn remove_ready(&mut self, chan: &str, direction: Direction) {
        if let Some(pos) = self
            .rdy
            .iter()
            .position(|r| r.chan == chan && r.direction == direction)
        {
            self.rdy.remove(pos);
        }
    }

    pub fn has_ready(&self, chan: &str, direction: Direction) -> bool {
        self.rdy
            .iter()
            .any(|r| r.chan == chan && r.direction == direction)
    }
}

/// Compressed readiness record stored per flow point; the full prefix can be
/// recovered as `trace.prefix(prefix_len)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadyStamp {
    pub chan: String,
    pub direction: Direction,
    pub prefix_len: usize,
}

/// One recorded point of a run's flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub time: f64,
    /// Values of the flow's variables, in `Flow::vars` order.
    pub vals: Vec<f64>,
    /// Length of the trace at this point (disambiguates same-time points).
    pub tr_len: usize,
    pub rdy: Vec<ReadyStamp>,
}

/// The recorded flow of one run: a time-sorted sequence of state snapshots.
/// Discrete events produce several points at the same time (the pre- and
/// post-state), so the sequence reads as right-continuous with left limits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Flow {
    /// Variable order for the `vals` vectors (and CSV columns).
    pub vars: Vec<String>,
    pub points: Vec<FlowPoint>,
}

impl Flow {
    /// Reconstruct the full state at recorded point `idx`, using the run's
    /// final trace to restore prefixes.
    pub fn snapshot(&self, idx: usize, trace: &TimedTrace) -> ProcState {
        let p = &self.points[idx];
        ProcState {
            vals: self
                .vars
                .iter()
                .cloned()
                .zip(p.vals.iter().copied())
                .collect(),
            now: p.time,
            tr: trace.prefix(p.tr_len),
            rdy: p
                .rdy
                .iter()
                .map(|s| ReadyItem {
                    chan: s.chan.clone(),
                    direction: s.direction,
                    prefix: trace.prefix(s.prefix_len),
                })
                .collect(),
        }
    }

    /// Index of the last point with `time ≤ t` (right-continuous reading).
    pub fn at(&self, t: f64) -> Option<usize> {
        let mut found = None;
        for (i, p) in self.points.iter().enumerate() {
            if p.time <= t {
                found = Some(i);
            } else {
                break;
            }
        }
        found
    }
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    /// Every component reached `stop`.
    Terminated,
    /// Model time reached `t_max` with work remaining.
    Timeout,
    /// No rule applies and time cannot advance.
    Deadlock,
    /// More than `max_instant_steps` discrete steps at one instant.
    StepLimit,
}

impl ExitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitKind::Terminated => "terminated",
            ExitKind::Timeout => "timeout",
            ExitKind::Deadlock => "deadlock",
            ExitKind::StepLimit => "step-limit",
        }
    }
}

/// Complete record of one sampled run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub final_state: ProcState,
    pub flow: Flow,
    pub trace: TimedTrace,
    pub exit: ExitKind,
}

/// How `P*` chooses its repetition count.
#[derive(Clone, Debug, PartialEq)]
pub enum RepeatPolicy {
    Fixed(u32),
    /// Continue after each iteration with probability `q`.
    Geometric(Rational),
}

impl Default for RepeatPolicy {
    fn default() -> Self {
        RepeatPolicy::Fixed(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Integrator step (also the polling resolution for waits).
    pub dt: f64,
    /// Model-time horizon.
    pub t_max: f64,
    /// Bound on zero-time discrete steps per instant.
    pub max_instant_steps: u32,
    pub repeat_policy: RepeatPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: 1e-3,
            t_max: 10.0,
            max_instant_steps: 10_000,
            repeat_policy: RepeatPolicy::default(),
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), RunError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(RunError::BadConfig(format!("dt must be positive: {}", self.dt)));
        }
        // A zero horizon is allowed: discrete work still runs at t = 0 and
        // anything continuous times out immediately.
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(RunError::BadConfig(format!(
                "t_max must be nonnegative: {}",
                self.t_max
            )));
        }
        if self.max_instant_steps == 0 {
            return Err(RunError::BadConfig(
                "max_instant_steps must be at least 1".into(),
            ));
        }
        if let RepeatPolicy::Geometric(q) = &self.repeat_policy {
            let zero = Ratio::<BigInt>::from_integer(0.into());
            let one = Ratio::<BigInt>::from_integer(1.into());
            if q < &zero || q >= &one {
                return Err(RunError::BadConfig(format!(
                    "geometric continue-probability must lie in [0, 1): {q}"
                )));
            }
        }
        Ok(())
    }
}

/// Event label of a single semantic step.
#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Tau,
    In(String, f64),
    Out(String, f64),
    Comm(String, f64),
    Delay(f64),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => write!(f, "tau"),
            Label::In(ch, v) => write!(f, "{ch}?{v}"),
            Label::Out(ch, v) => write!(f, "{ch}!{v}"),
            Label::Comm(ch, v) => write!(f, "{ch}.{v}"),
            Label::Delay(d) => write!(f, "delay {d}"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RunError {
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("non-finite value of {var} at time {time}")]
    NonFinite { var: String, time: f64 },
    #[error("invalid run configuration: {0}")]
    BadConfig(String),
    #[error("states are not parallelable: {0}")]
    NotParallelable(String),
    #[error("program failed validation: {0}")]
    Invalid(String),
}
