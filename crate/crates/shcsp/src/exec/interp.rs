//! The step/run engine: applies the operational semantics to a sampled
//! configuration.
//!
//! One run works a queue of parallel components against a single global
//! state (valuation, clock, trace, readiness set). Each scheduling round:
//!
//! 1. **Registration.** Pending communication offers register one at a time
//!    (In-1/Out-1: a τ step that only extends `rdy`), in component order —
//!    deterministic, no randomness consumed, confluent because
//!    registrations commute.
//! 2. **Instant moves.** All enabled zero-time transitions form a pool:
//!    skips, assignments, conditionals, probabilistic choices, boundary
//!    exits (Cont-2 / IntP-3), matched communication pairs (In-3 + Out-3
//!    fused through Par-1), and interrupt firings (IntP-2). A single
//!    enabled move applies directly; several draw a uniform scheduler pick
//!    (Par-2 nondeterminism, resolved stochastically).
//! 3. **Time advance.** With no instant move left, every active SDE
//!    integrates along its own `dt`-grid (per-component segment chains);
//!    the global clock jumps to the earliest segment end or refined
//!    boundary crossing. Components mid-segment are observed by linear
//!    interpolation without consuming their random stream, so a
//!    component's trajectory is unaffected by unrelated neighbors.
//!
//! Randomness is split per role: ChaCha stream 0 schedules, stream `1 + i`
//! drives component `i` (probabilistic choices, interrupt weights, Brownian
//! increments). A component therefore samples identically whether or not it
//! has neighbors — the parallel non-interference property.
//!
//! A configuration with no instant move and no active SDE can never change
//! again (waiting offers could only be served by components that are
//! themselves frozen), so the run exits as a deadlock at the current time
//! rather than idling to the horizon.

use std::collections::BTreeMap;

use rand_chacha::ChaCha12Rng;

use super::cexpr::{compile_bool, compile_expr, CBool, CExpr, Slots};
use super::merge::{pchoice_branch, weighted_pick, Branch};
use super::state::{
    Direction, ExitKind, Flow, FlowPoint, Label, ProcState, ReadyItem, ReadyStamp, RepeatPolicy,
    RunConfig, RunError, RunRecord, TimedTrace,
};
use crate::rng::{self, uniform_f64, uniform_index};
use crate::sde::{bisect_exit, boundary_tol, brownian_increment};
use crate::syntax::ast::{
    BoolExpr, CommEvent, Expr, InterruptBranch, Lookup, Process, Rational, SdeBlock,
};
use crate::syntax::validate::validate;

/// An SDE block compiled against the engine's slot table.
struct CompiledBlock {
    ast: SdeBlock,
    var_slots: Vec<usize>,
    drift: Vec<CExpr>,
    diffusion: Vec<Vec<CExpr>>,
    domain: CBool,
}

/// A drawn but not yet fully consumed integration segment
/// `[t0, t1]` on a component's own grid.
#[derive(Clone, Debug)]
struct Seg {
    t0: f64,
    s0: Vec<f64>,
    t1: f64,
    s1: Vec<f64>,
    /// Bisection-refined boundary crossing inside the segment, if any.
    exit: Option<(f64, Vec<f64>)>,
}

impl Seg {
    fn t_eff(&self) -> f64 {
        self.exit.as_ref().map_or(self.t1, |(t, _)| *t)
    }

    fn state_at(&self, t: f64) -> Vec<f64> {
        if self.t1 == self.t0 {
            return self.s1.clone();
        }
        let a = (t - self.t0) / (self.t1 - self.t0);
        self.s0
            .iter()
            .zip(&self.s1)
            .map(|(x0, x1)| x0 + a * (x1 - x0))
            .collect()
    }
}

/// Integration bookkeeping for an active continuous block.
#[derive(Clone, Debug)]
struct SdeRun {
    entry: f64,
    /// Completed whole steps since entry (sample times are `entry + k·dt`).
    k: u64,
    seg: Option<Seg>,
    /// Guard known false: a Cont-2 / IntP-3 exit is pending.
    dead: bool,
}

impl SdeRun {
    fn fresh(entry: f64) -> Self {
        SdeRun { entry, k: 0, seg: None, dead: false }
    }
}

/// Runtime form of one component's residual process. `Pending` subtrees
/// lower lazily when they reach the active position.
enum RP {
    Stop,
    Pending(Box<Process>),
    Skip,
    Assign(String, Expr),
    Input(String, String),
    Output(String, Expr),
    Cond(BoolExpr, Box<Process>),
    PChoice(Box<Process>, Rational, Box<Process>),
    Seq(Box<RP>, Box<RP>),
    Sde { idx: usize, run: SdeRun },
    Interrupt { idx: usize, branches: Vec<InterruptBranch>, run: SdeRun },
}

struct Comp {
    rp: RP,
    rng: ChaCha12Rng,
}

/// What the pool scheduler can fire this round.
#[derive(Clone, Debug, PartialEq)]
enum Move {
    Discrete(usize),
    ContExit(usize),
    IntBoundary(usize),
    Comm { chan: String, reader: usize, writer: usize },
    IntFire(usize),
}

struct SlotLookup<'a> {
    slots: &'a Slots,
    env: &'a [f64],
}

impl Lookup for SlotLookup<'_> {
    fn get(&self, name: &str) -> Option<f64> {
        self.slots.get(name).map(|i| self.env[i])
    }
}

/// Outcome of one public `step`.
// One short-lived value per call; boxing the payload would buy nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Step {
        label: Label,
        /// Residual system; `None` once every component has stopped.
        process: Option<Process>,
        state: ProcState,
        /// Flow points recorded by this step.
        flow: Flow,
    },
    /// No rule applies and time cannot change anything: a deadlock.
    Stuck,
}

pub(crate) struct Engine {
    slots: Slots,
    env: Vec<f64>,
    now: f64,
    tr: TimedTrace,
    rdy: Vec<ReadyItem>,
    blocks: Vec<CompiledBlock>,
    comps: Vec<Comp>,
    cfg: RunConfig,
    sched: ChaCha12Rng,
    flow_vars: Vec<String>,
    flow_slots: Vec<usize>,
    points: Vec<FlowPoint>,
    instants: u32,
}

/// Collect every SDE block of a process, in traversal order.
fn collect_blocks(p: &Process, out: &mut Vec<SdeBlock>) {
    match p {
        Process::Skip
        | Process::Assign(..)
        | Process::Input(..)
        | Process::Output(..) => {}
        Process::Seq(a, b) | Process::Parallel(a, b) => {
            collect_blocks(a, out);
            collect_blocks(b, out);
        }
        Process::Cond(_, body) | Process::Repeat(body) => collect_blocks(body, out),
        Process::PChoice(a, _, b) => {
            collect_blocks(a, out);
            collect_blocks(b, out);
        }
        Process::Sde(block) => {
            if !out.contains(block) {
                out.push(block.clone());
            }
        }
        Process::Interrupt(block, branches) => {
            if !out.contains(block) {
                out.push(block.clone());
            }
            for br in branches {
                collect_blocks(&br.body, out);
            }
        }
    }
}

/// Split the top-level parallel spine into components, left to right.
fn split_parallel(p: &Process, out: &mut Vec<Process>) {
    if let Process::Parallel(a, b) = p {
        split_parallel(a, out);
        split_parallel(b, out);
    } else {
        out.push(p.clone());
    }
}

impl Engine {
    fn new(
        p: &Process,
        vals: &BTreeMap<String, f64>,
        now: f64,
        tr: TimedTrace,
        rdy: Vec<ReadyItem>,
        seed: u64,
        cfg: &RunConfig,
    ) -> Result<Engine, RunError> {
        cfg.check()?;

        let mut slots = Slots::new();
        for var in p.variables() {
            slots.slot(&var);
        }
        for var in vals.keys() {
            slots.slot(var);
        }

        let mut block_asts = Vec::new();
        collect_blocks(p, &mut block_asts);
        let blocks: Vec<CompiledBlock> = block_asts
            .into_iter()
            .map(|ast| {
                let var_slots = ast.vars.iter().map(|v| slots.slot(v)).collect();
                let drift = ast.drift.iter().map(|e| compile_expr(e, &mut slots)).collect();
                let diffusion = ast
                    .diffusion
                    .iter()
                    .map(|row| row.iter().map(|e| compile_expr(e, &mut slots)).collect())
                    .collect();
                let domain = compile_bool(&ast.domain, &mut slots);
                CompiledBlock { ast, var_slots, drift, diffusion, domain }
            })
            .collect();

        let mut env = vec![0.0; slots.len()];
        for (name, value) in vals {
            env[slots.get(name).expect("interned above")] = *value;
        }

        let mut comp_asts = Vec::new();
        split_parallel(p, &mut comp_asts);
        let comps = comp_asts
            .into_iter()
            .enumerate()
            .map(|(i, ast)| Comp {
                rp: RP::Pending(Box::new(ast)),
                rng: rng::stream(seed, 1 + i as u64),
            })
            .collect();

        let mut flow_vars: Vec<String> = slots.names().to_vec();
        flow_vars.sort();
        let flow_slots = flow_vars
            .iter()
            .map(|v| slots.get(v).expect("own name"))
            .collect();

        let mut engine = Engine {
            slots,
            env,
            now,
            tr,
            rdy,
            blocks,
            comps,
            cfg: cfg.clone(),
            sched: rng::stream(seed, 0),
            flow_vars,
            flow_slots,
            points: Vec::new(),
            instants: 0,
        };
        engine.record_point();
        Ok(engine)
    }

    fn record_point(&mut self) {
        self.points.push(FlowPoint {
            time: self.now,
            vals: self.flow_slots.iter().map(|&i| self.env[i]).collect(),
            tr_len: self.tr.len(),
            rdy: self
                .rdy
                .iter()
                .map(|r| ReadyStamp {
                    chan: r.chan.clone(),
                    direction: r.direction,
                    prefix_len: r.prefix.len(),
                })
                .collect(),
        });
    }

    fn lookup(&self) -> SlotLookup<'_> {
        SlotLookup { slots: &self.slots, env: &self.env }
    }

    fn block_index(&self, block: &SdeBlock) -> usize {
        self.blocks
            .iter()
            .position(|cb| cb.ast == *block)
            .expect("every block was collected at construction")
    }

    fn has_ready(&self, chan: &str, direction: Direction) -> bool {
        self.rdy
            .iter()
            .any(|r| r.chan == chan && r.direction == direction)
    }

    fn register(&mut self, chan: &str, direction: Direction) {
        let item = ReadyItem {
            chan: chan.to_string(),
            direction,
            prefix: self.tr.clone(),
        };
        self.rdy.push(item);
    }

    fn remove_ready(&mut self, chan: &str, direction: Direction) {
        if let Some(pos) = self
            .rdy
            .iter()
            .position(|r| r.chan == chan && r.direction == direction)
        {
            self.rdy.remove(pos);
        }
    }

    /// Lower `Pending` nodes and fold finished sequence heads until the
    /// component's active position is an executable form.
    fn normalize(&mut self, comp: usize) -> Result<(), RunError> {
        // Take the tree out to satisfy the borrow checker; cheap (one enum).
        let mut rp = std::mem::replace(&mut self.comps[comp].rp, RP::Stop);
        let result = self.normalize_rp(&mut rp, comp);
        self.comps[comp].rp = rp;
        result
    }

    fn normalize_rp(&mut self, rp: &mut RP, comp: usize) -> Result<(), RunError> {
        loop {
            match rp {
                RP::Pending(_) => {
                    let RP::Pending(ast) = std::mem::replace(rp, RP::Stop) else {
                        unreachable!()
                    };
                    *rp = self.build(*ast, comp)?;
                }
                RP::Seq(first, rest) => {
                    self.normalize_rp(first, comp)?;
                    if matches!(**first, RP::Stop) {
                        let rest = std::mem::replace(&mut **rest, RP::Stop);
                        *rp = rest;
                    } else {
                        return Ok(());
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    /// Lower one AST node to runtime form. Repetition expands here using
    /// the configured policy: `fixed(n)` unrolls n copies ending in a
    /// `false -> {skip}` guard whose Cond-2 step is observably identical
    /// to the Rep-3 exit (one τ, trace extended); `geometric(q)` draws one
    /// continue/exit decision per arrival from the component's stream.
    fn build(&mut self, p: Process, comp: usize) -> Result<RP, RunError> {
        Ok(match p {
            Process::Skip => RP::Skip,
            Process::Assign(x, e) => RP::Assign(x, e),
            Process::Input(ch, x) => RP::Input(ch, x),
            Process::Output(ch, e) => RP::Output(ch, e),
            Process::Cond(b, body) => RP::Cond(b, body),
            Process::PChoice(a, prob, b) => RP::PChoice(a, prob, b),
            Process::Seq(a, b) => {
                let first = self.build(*a, comp)?;
                RP::Seq(Box::new(first), Box::new(RP::Pending(b)))
            }
            Process::Repeat(body) => {
                let exit = Process::Cond(BoolExpr::False, Box::new(Process::Skip));
                let expansion = match self.cfg.repeat_policy.clone() {
                    RepeatPolicy::Fixed(n) => {
                        let mut chain = exit;
                        for _ in 0..n {
                            chain = Process::Seq(body.clone(), Box::new(chain));
                        }
                        chain
                    }
                    RepeatPolicy::Geometric(q) => {
                        let u = uniform_f64(&mut self.comps[comp].rng);
                        if pchoice_branch(&q, u) == Branch::Left {
                            Process::Seq(body.clone(), Box::new(Process::Repeat(body)))
                        } else {
                            exit
                        }
                    }
                };
                self.build(expansion, comp)?
            }
            Process::Sde(block) => {
                let idx = self.block_index(&block);
                let mut run = SdeRun::fresh(self.now);
                run.dead = !self.guard_holds(idx)?;
                RP::Sde { idx, run }
            }
            Process::Interrupt(block, branches) => {
                let idx = self.block_index(&block);
                let mut run = SdeRun::fresh(self.now);
                run.dead = !self.guard_holds(idx)?;
                RP::Interrupt { idx, branches, run }
            }
            Process::Parallel(..) => {
                return Err(RunError::Invalid(
                    "parallel composition below the top level".into(),
                ))
            }
        })
    }

    fn guard_holds(&self, idx: usize) -> Result<bool, RunError> {
        Ok(self.blocks[idx].domain.eval(&self.env)?)
    }

    /// First unregistered offer (component order, branch order), if any.
    fn next_registration(&self) -> Option<(String, Direction)> {
        for i in 0..self.comps.len() {
            match self.head(i) {
                RP::Input(ch, _) if !self.has_ready(ch, Direction::Input) => {
                    return Some((ch.clone(), Direction::Input));
                }
                RP::Output(ch, _) if !self.has_ready(ch, Direction::Output) => {
                    return Some((ch.clone(), Direction::Output));
                }
                RP::Interrupt { branches, run, .. } if !run.dead => {
                    for br in branches {
                        let dir = if br.event.is_input() {
                            Direction::Input
                        } else {
                            Direction::Output
                        };
                        if !self.has_ready(br.event.chan(), dir) {
                            return Some((br.event.chan().to_string(), dir));
                        }
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Active position of a component: the innermost head of its (already
    /// normalized) sequence spine.
    fn head(&self, comp: usize) -> &RP {
        let mut rp = &self.comps[comp].rp;
        while let RP::Seq(first, _) = rp {
            rp = first;
        }
        rp
    }

    fn head_mut(&mut self, comp: usize) -> &mut RP {
        let mut rp = &mut self.comps[comp].rp;
        while let RP::Seq(first, _) = rp {
            rp = first;
        }
        rp
    }

    fn build_pool(&self) -> Vec<Move> {
        let mut pool = Vec::new();
        let mut plain_in: BTreeMap<&str, usize> = BTreeMap::new();
        let mut plain_out: BTreeMap<&str, usize> = BTreeMap::new();
        for i in 0..self.comps.len() {
            match self.head(i) {
                RP::Skip | RP::Assign(..) | RP::Cond(..) | RP::PChoice(..) => {
                    pool.push(Move::Discrete(i));
                }
                RP::Sde { run, .. } if run.dead => pool.push(Move::ContExit(i)),
                RP::Interrupt { run, .. } if run.dead => pool.push(Move::IntBoundary(i)),
                RP::Input(ch, _) => {
                    plain_in.insert(ch.as_str(), i);
                }
                RP::Output(ch, _) => {
                    plain_out.insert(ch.as_str(), i);
                }
                _ => {}
            }
        }
        // An interrupt with at least one partner-ready branch can fire.
        for i in 0..self.comps.len() {
            if let RP::Interrupt { branches, run, .. } = self.head(i) {
                if !run.dead && !self.fireable_branches(i, branches).is_empty() {
                    pool.push(Move::IntFire(i));
                }
            }
        }
        for (chan, reader) in &plain_in {
            if let Some(writer) = plain_out.get(chan) {
                pool.push(Move::Comm {
                    chan: chan.to_string(),
                    reader: *reader,
                    writer: *writer,
                });
            }
        }
        pool
    }

    /// Branch indices whose dual offer is registered by another component.
    fn fireable_branches(&self, comp: usize, branches: &[InterruptBranch]) -> Vec<usize> {
        branches
            .iter()
            .enumerate()
            .filter(|(_, br)| {
                let dual = if br.event.is_input() {
                    Direction::Output
                } else {
                    Direction::Input
                };
                self.has_ready(br.event.chan(), dual)
                    && self.dual_holder(br.event.chan(), dual, comp).is_some()
            })
            .map(|(k, _)| k)
            .collect()
    }

    /// The component whose head currently offers `chan` in `direction`.
    fn dual_holder(&self, chan: &str, direction: Direction, not: usize) -> Option<usize> {
        (0..self.comps.len()).find(|&j| {
            if j == not {
                return false;
            }
            match self.head(j) {
                RP::Input(ch, _) => direction == Direction::Input && ch == chan,
                RP::Output(ch, _) => direction == Direction::Output && ch == chan,
                RP::Interrupt { branches, run, .. } => {
                    !run.dead
                        && branches.iter().any(|br| {
                            br.event.chan() == chan
                                && (br.event.is_input() == (direction == Direction::Input))
                        })
                }
                _ => false,
            }
        })
    }

    /// Remove every offer registered by an interrupt's branches.
    fn clear_interrupt_offers(&mut self, branches: &[InterruptBranch]) {
        for br in branches {
            let dir = if br.event.is_input() {
                Direction::Input
            } else {
                Direction::Output
            };
            self.remove_ready(br.event.chan(), dir);
        }
    }

    fn apply(&mut self, mv: Move) -> Result<Label, RunError> {
        match mv {
            Move::Discrete(i) => self.apply_discrete(i),
            Move::ContExit(i) => {
                // Cont-2: the guard fails at (or right after) this point.
                self.tr.push_internal(self.now);
                *self.head_mut(i) = RP::Stop;
                Ok(Label::Tau)
            }
            Move::IntBoundary(i) => {
                // IntP-3: the continuous part exits before any communication;
                // the registered offers die with the interrupt.
                let RP::Interrupt { branches, .. } = self.head(i) else {
                    unreachable!("pool guarantees an interrupt head");
                };
                let branches = branches.clone();
                self.clear_interrupt_offers(&branches);
                self.tr.push_internal(self.now);
                *self.head_mut(i) = RP::Stop;
                Ok(Label::Tau)
            }
            Move::Comm { chan, reader, writer } => {
                // In-3 + Out-3 fused through Par-1: one timed communication.
                let RP::Output(_, e) = self.head(writer) else {
                    unreachable!("pool guarantees a plain writer");
                };
                let value = e.eval(&self.lookup())?;
                let RP::Input(_, x) = self.head(reader) else {
                    unreachable!("pool guarantees a plain reader");
                };
                let slot = self.slots.get(x).expect("program variable");
                self.env[slot] = value;
                self.remove_ready(&chan, Direction::Input);
                self.remove_ready(&chan, Direction::Output);
                self.tr.push_comm(&chan, value, self.now);
                *self.head_mut(reader) = RP::Stop;
                *self.head_mut(writer) = RP::Stop;
                Ok(Label::Comm(chan, value))
            }
            Move::IntFire(i) => self.apply_int_fire(i),
        }
    }

    fn apply_discrete(&mut self, i: usize) -> Result<Label, RunError> {
        let head = std::mem::replace(self.head_mut(i), RP::Stop);
        match head {
            RP::Skip => {
                self.tr.push_internal(self.now);
            }
            RP::Assign(x, e) => {
                let value = e.eval(&self.lookup())?;
                let slot = self.slots.get(&x).expect("program variable");
                self.env[slot] = value;
                self.tr.push_internal(self.now);
            }
            RP::Cond(guard, body) => {
                let taken = guard.eval(&self.lookup())?;
                self.tr.push_internal(self.now);
                if taken {
                    *self.head_mut(i) = RP::Pending(body);
                }
            }
            RP::PChoice(left, prob, right) => {
                let u = uniform_f64(&mut self.comps[i].rng);
                let chosen = match pchoice_branch(&prob, u) {
                    Branch::Left => left,
                    Branch::Right => right,
                };
                self.tr.push_internal(self.now);
                *self.head_mut(i) = RP::Pending(chosen);
            }
            other => {
                *self.head_mut(i) = other;
                unreachable!("pool guarantees a discrete head");
            }
        }
        Ok(Label::Tau)
    }

    /// IntP-2: pick a branch among the simultaneously partner-ready ones by
    /// weight, then perform its communication with the partner.
    fn apply_int_fire(&mut self, i: usize) -> Result<Label, RunError> {
        let RP::Interrupt { branches, .. } = self.head(i) else {
            unreachable!("pool guarantees an interrupt head");
        };
        let branches = branches.clone();
        let fireable = self.fireable_branches(i, &branches);
        debug_assert!(!fireable.is_empty());
        let weights: Vec<Rational> = fireable
            .iter()
            .map(|&k| branches[k].weight.clone())
            .collect();
        let u = uniform_f64(&mut self.comps[i].rng);
        let chosen = fireable[weighted_pick(&weights, u)];
        let event = branches[chosen].event.clone();
        let body = branches[chosen].body.clone();
        let chan = event.chan().to_string();
        let dual = if event.is_input() {
            Direction::Output
        } else {
            Direction::Input
        };
        let partner = self
            .dual_holder(&chan, dual, i)
            .expect("fireable branch has a partner");

        // Resolve the partner's side of the communication.
        let partner_head = std::mem::replace(self.head_mut(partner), RP::Stop);
        let (value, partner_next) = match partner_head {
            RP::Output(_, e) => {
                let value = e.eval(&self.lookup())?;
                (value, RP::Stop)
            }
            RP::Input(_, x) => {
                let CommEvent::Out { expr, .. } = &event else {
                    unreachable!("dual directions");
                };
                let value = expr.eval(&self.lookup())?;
                let slot = self.slots.get(&x).expect("program variable");
                self.env[slot] = value;
                (value, RP::Stop)
            }
            RP::Interrupt { branches: pbranches, .. } => {
                // Partner is itself an interrupt: it picks among its own
                // branches matching this channel, by weight, on its stream.
                let matching: Vec<usize> = pbranches
                    .iter()
                    .enumerate()
                    .filter(|(_, br)| {
                        br.event.chan() == chan
                            && (br.event.is_input() == (dual == Direction::Input))
                    })
                    .map(|(k, _)| k)
                    .collect();
                debug_assert!(!matching.is_empty());
                let pweights: Vec<Rational> = matching
                    .iter()
                    .map(|&k| pbranches[k].weight.clone())
                    .collect();
                let pu = uniform_f64(&mut self.comps[partner].rng);
                let pk = matching[weighted_pick(&pweights, pu)];
                let pevent = pbranches[pk].event.clone();
                let pbody = pbranches[pk].body.clone();
                let value = match (&event, &pevent) {
                    (CommEvent::Out { expr, .. }, CommEvent::In { .. }) => {
                        expr.eval(&self.lookup())?
                    }
                    (CommEvent::In { .. }, CommEvent::Out { expr, .. }) => {
                        expr.eval(&self.lookup())?
                    }
                    _ => unreachable!("dual directions"),
                };
                if let CommEvent::In { var, .. } = &pevent {
                    let slot = self.slots.get(var).expect("program variable");
                    self.env[slot] = value;
                }
                self.clear_interrupt_offers(&pbranches);
                (value, RP::Pending(Box::new(pbody)))
            }
            other => {
                *self.head_mut(partner) = other;
                unreachable!("dual holder is a plain offer or an interrupt");
            }
        };
        *self.head_mut(partner) = partner_next;

        if let CommEvent::In { var, .. } = &event {
            let slot = self.slots.get(var).expect("program variable");
            self.env[slot] = value;
        }
        self.clear_interrupt_offers(&branches);
        // The partner's plain offer (if plain) also dies.
        self.remove_ready(&chan, dual);
        self.tr.push_comm(&chan, value, self.now);
        *self.head_mut(i) = RP::Pending(Box::new(body));
        Ok(Label::Comm(chan, value))
    }

    /// Whether any component still integrates a continuous block.
    fn has_active_sde(&self) -> bool {
        (0..self.comps.len()).any(|i| {
            matches!(
                self.head(i),
                RP::Sde { run, .. } | RP::Interrupt { run, .. } if !run.dead
            )
        })
    }

    fn all_stopped(&self) -> bool {
        self.comps.iter().all(|c| matches!(c.rp, RP::Stop))
    }

    /// Ensure the component's current segment is drawn; returns its
    /// effective end (segment end or refined boundary time).
    fn ensure_segment(&mut self, i: usize) -> Result<f64, RunError> {
        // Inspect without holding a borrow across the draw.
        let (idx, entry, k, have) = match self.head(i) {
            RP::Sde { idx, run } | RP::Interrupt { idx, run, .. } => {
                (*idx, run.entry, run.k, run.seg.is_some())
            }
            _ => unreachable!("caller filtered active blocks"),
        };
        if have {
            let (RP::Sde { run, .. } | RP::Interrupt { run, .. }) = self.head(i) else {
                unreachable!()
            };
            return Ok(run.seg.as_ref().expect("checked").t_eff());
        }

        let block = &self.blocks[idx];
        let t0 = (entry + k as f64 * self.cfg.dt).min(self.cfg.t_max);
        let t1 = (entry + (k + 1) as f64 * self.cfg.dt).min(self.cfg.t_max);
        let h = t1 - t0;
        let s0: Vec<f64> = block.var_slots.iter().map(|&s| self.env[s]).collect();
        debug_assert!(h > 0.0, "advance requested at the horizon");

        let bm = block.ast.brownian_dim();
        let dw = brownian_increment(bm, h, &mut self.comps[i].rng);
        // Euler–Maruyama on the compiled block, same fold order as em_step.
        let mut s1 = Vec::with_capacity(s0.len());
        for (r, &x) in s0.iter().enumerate() {
            let mut v = x + block.drift[r].eval(&self.env)? * h;
            for (j, entry_expr) in block.diffusion[r].iter().enumerate() {
                v += entry_expr.eval(&self.env)? * dw[j];
            }
            s1.push(v);
        }
        for (r, x) in s1.iter().enumerate() {
            if !x.is_finite() {
                return Err(RunError::NonFinite {
                    var: block.ast.vars[r].clone(),
                    time: t1,
                });
            }
        }

        // Guard check at the segment end, bisection refinement on failure.
        let mut probe_env = self.env.clone();
        let var_slots = block.var_slots.clone();
        let write_probe = |env: &mut Vec<f64>, s: &[f64]| {
            for (&slot, &x) in var_slots.iter().zip(s) {
                env[slot] = x;
            }
        };
        write_probe(&mut probe_env, &s1);
        let exit = if !block.domain.eval(&probe_env)? {
            let tol = boundary_tol(self.cfg.t_max);
            let domain = &block.domain;
            let (t_star, s_star) = bisect_exit(
                |s| {
                    write_probe(&mut probe_env, s);
                    domain.eval(&probe_env)
                },
                t0,
                &s0,
                t1,
                &s1,
                tol,
            )?;
            Some((t_star, s_star))
        } else {
            None
        };

        let seg = Seg { t0, s0, t1, s1, exit };
        let t_eff = seg.t_eff();
        let (RP::Sde { run, .. } | RP::Interrupt { run, .. }) = self.head_mut(i) else {
            unreachable!()
        };
        run.seg = Some(seg);
        Ok(t_eff)
    }

    /// Advance the global clock to the earliest segment end or boundary
    /// crossing among active blocks (Cont-1 / IntP-1 / Par-3 joint delay).
    fn advance(&mut self) -> Result<f64, RunError> {
        let active: Vec<usize> = (0..self.comps.len())
            .filter(|&i| {
                matches!(
                    self.head(i),
                    RP::Sde { run, .. } | RP::Interrupt { run, .. } if !run.dead
                )
            })
            .collect();
        debug_assert!(!active.is_empty());

        let mut target = f64::INFINITY;
        for &i in &active {
            target = target.min(self.ensure_segment(i)?);
        }

        for &i in &active {
            let (idx, state) = {
                let (RP::Sde { idx, run } | RP::Interrupt { idx, run, .. }) = self.head_mut(i)
                else {
                    unreachable!("active components have continuous heads")
                };
                let idx = *idx;
                let seg = run.seg.as_ref().expect("ensured above");
                if seg.t_eff() <= target {
                    // Commit: the block reaches its own sample point (or its
                    // refined boundary crossing).
                    let seg = run.seg.take().expect("checked");
                    match seg.exit {
                        Some((_, s_star)) => {
                            run.dead = true;
                            (idx, s_star)
                        }
                        None => {
                            run.k += 1;
                            (idx, seg.s1)
                        }
                    }
                } else {
                    // Mid-segment: observe by interpolation, keep the segment
                    // (and the component's stream position) untouched.
                    (idx, seg.state_at(target))
                }
            };
            for (&slot, &x) in self.blocks[idx].var_slots.iter().zip(&state) {
                self.env[slot] = x;
            }
        }

        let d = target - self.now;
        self.now = target;
        self.instants = 0;
        self.record_point();
        Ok(d)
    }

    /// Run to completion.
    fn run_to_exit(&mut self) -> Result<ExitKind, RunError> {
        loop {
            for i in 0..self.comps.len() {
                self.normalize(i)?;
            }
            if self.instants >= self.cfg.max_instant_steps {
                return Ok(ExitKind::StepLimit);
            }
            if let Some((chan, dir)) = self.next_registration() {
                // In-1 / Out-1: τ step extending only the ready set.
                self.register(&chan, dir);
                self.instants += 1;
                self.record_point();
                continue;
            }
            let pool = self.build_pool();
            if !pool.is_empty() {
                let mv = if pool.len() == 1 {
                    pool.into_iter().next().expect("nonempty")
                } else {
                    let k = uniform_index(&mut self.sched, pool.len());
                    pool.into_iter().nth(k).expect("index in range")
                };
                self.apply(mv)?;
                self.instants += 1;
                self.record_point();
                continue;
            }
            if self.all_stopped() {
                // Par-4 closes the system without extending the trace.
                return Ok(ExitKind::Terminated);
            }
            if !self.has_active_sde() {
                return Ok(ExitKind::Deadlock);
            }
            if self.now >= self.cfg.t_max {
                return Ok(ExitKind::Timeout);
            }
            self.advance()?;
        }
    }

    fn proc_state(&self) -> ProcState {
        ProcState {
            vals: self
                .slots
                .names()
                .iter()
                .map(|name| {
                    (
                        name.clone(),
                        self.env[self.slots.get(name).expect("own name")],
                    )
                })
                .collect(),
            now: self.now,
            tr: self.tr.clone(),
            rdy: self.rdy.clone(),
        }
    }

    fn flow(&self) -> Flow {
        Flow {
            vars: self.flow_vars.clone(),
            points: self.points.clone(),
        }
    }
}

/// Rebuild an AST from a residual runtime tree; `None` is `stop`.
fn rp_to_process(rp: &RP, blocks: &[CompiledBlock]) -> Option<Process> {
    match rp {
        RP::Stop => None,
        RP::Pending(p) => Some((**p).clone()),
        RP::Skip => Some(Process::Skip),
        RP::Assign(x, e) => Some(Process::Assign(x.clone(), e.clone())),
        RP::Input(ch, x) => Some(Process::Input(ch.clone(), x.clone())),
        RP::Output(ch, e) => Some(Process::Output(ch.clone(), e.clone())),
        RP::Cond(b, body) => Some(Process::Cond(b.clone(), body.clone())),
        RP::PChoice(a, p, b) => Some(Process::PChoice(a.clone(), p.clone(), b.clone())),
        RP::Seq(first, rest) => {
            let rest = rp_to_process(rest, blocks);
            match (rp_to_process(first, blocks), rest) {
                (Some(f), Some(r)) => Some(Process::Seq(Box::new(f), Box::new(r))),
                (Some(f), None) => Some(f),
                (None, r) => r,
            }
        }
        RP::Sde { idx, .. } => Some(Process::Sde(blocks[*idx].ast.clone())),
        RP::Interrupt { idx, branches, .. } => Some(Process::Interrupt(
            blocks[*idx].ast.clone(),
            branches.clone(),
        )),
    }
}

/// Execute one sampled run of `p` from the initial valuation.
pub fn run(
    p: &Process,
    init: &BTreeMap<String, f64>,
    seed: u64,
    cfg: &RunConfig,
) -> Result<RunRecord, RunError> {
    let diagnostics = validate(p);
    if let Some(d) = diagnostics.first() {
        return Err(RunError::Invalid(d.message.clone()));
    }
    let mut engine = Engine::new(p, init, 0.0, TimedTrace::new(), Vec::new(), seed, cfg)?;
    let exit = engine.run_to_exit()?;
    let final_state = engine.proc_state();
    Ok(RunRecord {
        seed,
        trace: final_state.tr.clone(),
        flow: engine.flow(),
        final_state,
        exit,
    })
}

/// Apply exactly one semantics rule to a configuration. Registrations,
/// instant moves, and time advances each count as one step; `Stuck` reports
/// a configuration that can never change again.
///
/// The random streams are re-derived from `seed` on every call, which makes
/// a single step reproducible in isolation; `run` is the faithful way to
/// sample a whole trajectory.
pub fn step(
    p: &Process,
    state: &ProcState,
    seed: u64,
    cfg: &RunConfig,
) -> Result<StepOutcome, RunError> {
    let mut engine = Engine::new(
        p,
        &state.vals,
        state.now,
        state.tr.clone(),
        state.rdy.clone(),
        seed,
        cfg,
    )?;
    engine.points.clear(); // the entry state is the caller's, not a new point
    for i in 0..engine.comps.len() {
        engine.normalize(i)?;
    }

    let label = if let Some((chan, dir)) = engine.next_registration() {
        engine.register(&chan, dir);
        engine.record_point();
        Label::Tau
    } else {
        let pool = engine.build_pool();
        if !pool.is_empty() {
            let mv = if pool.len() == 1 {
                pool.into_iter().next().expect("nonempty")
            } else {
                let k = uniform_index(&mut engine.sched, pool.len());
                pool.into_iter().nth(k).expect("index in range")
            };
            let label = engine.apply(mv)?;
            engine.record_point();
            label
        } else if engine.all_stopped() {
            // Par-4: the final τ of a fully stopped system.
            return Ok(StepOutcome::Step {
                label: Label::Tau,
                process: None,
                state: engine.proc_state(),
                flow: engine.flow(),
            });
        } else if !engine.has_active_sde() || engine.now >= engine.cfg.t_max {
            // Frozen (nothing can ever change) or out of horizon.
            return Ok(StepOutcome::Stuck);
        } else {
            let d = engine.advance()?;
            Label::Delay(d)
        }
    };

    for i in 0..engine.comps.len() {
        engine.normalize(i)?;
    }
    let residual = engine
        .comps
        .iter()
        .filter_map(|c| rp_to_process(&c.rp, &engine.blocks))
        .collect::<Vec<_>>();
    let process = residual
        .into_iter()
        .reduce(|a, b| Process::Parallel(Box::new(a), Box::new(b)));
    Ok(StepOutcome::Step {
        label,
        process,
        state: engine.proc_state(),
        flow: engine.flow(),
    })
}
