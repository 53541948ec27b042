//! The assertion language evaluated over sampled runs, and Monte Carlo
//! estimation of probability formulas.
//!
//! Terms cover value/time expressions (with the system variable `now`),
//! trace expressions, and the trace variable `tr`. State formulas add
//! relations, communication readiness `h.ch?` / `h.ch!`, and boolean
//! connectives; formulas place state formulas at time points (`S at T`) and
//! quantify over finite grids or the recorded flow samples; probability
//! formulas compare `P(φ)` against a rational threshold.
//!
//! This is a *checkable fragment*: real-valued quantifiers are bounded
//! (explicit grids, or the run's recorded sample times), and a run's flow is
//! read right-continuously — `S at T` evaluates `S` in the last recorded
//! snapshot not after `T`. Within a formula, `at`/`during`/`in` bind looser
//! than the state-level connectives, and `∨` short-circuits left to right.
//!
//! Star (`h*`) is a pattern: it may appear in readiness prefixes, where it
//! matches any number of repetitions, but evaluating it to a concrete trace
//! is an error.

mod estimate;
mod parse;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exec::{Direction, ProcState, RunRecord, TimedItem, TimedTrace};
use crate::syntax::ast::{CmpOp, EvalError, Expr, Lookup};

pub use estimate::{estimate_formula, estimate_prob, hoeffding_band, Estimate, EstimateError,
                   FormulaEstimate, Verdict};
pub use parse::{parse_formula, parse_prob_formula, parse_state_formula};

/// Trace expressions `h`: empty, a timed item, concatenation, repetition.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceExpr {
    Empty,
    Item { chan: String, value: Expr, time: Expr },
    Concat(Box<TraceExpr>, Box<TraceExpr>),
    Star(Box<TraceExpr>),
}

/// Assertion terms: numeric expressions (values and times share one sort;
/// `now` resolves to the clock), trace expressions, and the trace variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Num(Expr),
    Trace(TraceExpr),
    Tr,
}

/// An evaluated term.
#[derive(Clone, Debug, PartialEq)]
pub enum TermValue {
    Num(f64),
    Trace(TimedTrace),
}

/// State formulas, interpreted over one state snapshot.
#[derive(Clone, Debug, PartialEq)]
pub enum StateFormula {
    False,
    Cmp(Term, CmpOp, Term),
    /// `h.ch?` / `h.ch!`: a readiness record for `chan` whose registration
    /// prefix matches the pattern.
    Ready {
        prefix: TraceExpr,
        chan: String,
        direction: Direction,
    },
    Not(Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
}

impl StateFormula {
    /// `⊤`, encoded as `¬⊥`.
    pub fn truth() -> StateFormula {
        StateFormula::Not(Box::new(StateFormula::False))
    }

    /// Conjunction, encoded by De Morgan.
    pub fn and(a: StateFormula, b: StateFormula) -> StateFormula {
        StateFormula::Not(Box::new(StateFormula::Or(
            Box::new(StateFormula::Not(Box::new(a))),
            Box::new(StateFormula::Not(Box::new(b))),
        )))
    }
}

/// Formulas over a whole run.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    False,
    /// `S at T`: the state formula holds in the snapshot at time `T`
    /// (time expressions are evaluated in the initial state, plus any
    /// quantifier bindings).
    At(Box<StateFormula>, Expr),
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// Bounded value quantifier over an explicit finite grid.
    ForallNum {
        var: String,
        grid: Vec<f64>,
        body: Box<Formula>,
    },
    /// Bounded time quantifier over the run's recorded sample times in
    /// `[lo, hi]`.
    ForallTime {
        var: String,
        lo: Expr,
        hi: Expr,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn truth() -> Formula {
        Formula::Not(Box::new(Formula::False))
    }

    /// `S at T`.
    pub fn at(s: StateFormula, t: Expr) -> Formula {
        Formula::At(Box::new(s), t)
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::Not(Box::new(Formula::Or(
            Box::new(Formula::Not(Box::new(a))),
            Box::new(Formula::Not(Box::new(b))),
        )))
    }

    /// `S during [lo, hi]`: S holds at every recorded sample time in the
    /// interval (`∀t. lo ≤ t ≤ hi ⇒ S at t`).
    pub fn during(s: StateFormula, lo: Expr, hi: Expr) -> Formula {
        Formula::ForallTime {
            var: "$t".into(),
            lo,
            hi,
            body: Box::new(Formula::at(s, Expr::Var("$t".into()))),
        }
    }

    /// `S in [lo, hi]`: S holds at some recorded sample time in the interval
    /// (`∃t. lo ≤ t ≤ hi ∧ S at t`, encoded by De Morgan).
    pub fn within(s: StateFormula, lo: Expr, hi: Expr) -> Formula {
        Formula::Not(Box::new(Formula::ForallTime {
            var: "$t".into(),
            lo,
            hi,
            body: Box::new(Formula::Not(Box::new(Formula::at(
                s,
                Expr::Var("$t".into()),
            )))),
        }))
    }
}

/// Probability-comparison relation `⋈ ∈ {<, ≤, >, ≥}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbRel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl ProbRel {
    pub fn symbol(self) -> &'static str {
        match self {
            ProbRel::Lt => "<",
            ProbRel::Le => "<=",
            ProbRel::Gt => ">",
            ProbRel::Ge => ">=",
        }
    }
}

/// Probability formulas `P(φ) ⋈ p` and their boolean combinations.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbFormula {
    Atom {
        formula: Box<Formula>,
        rel: ProbRel,
        p: crate::syntax::ast::Rational,
    },
    Not(Box<ProbFormula>),
    Or(Box<ProbFormula>, Box<ProbFormula>),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AssertError {
    #[error("term evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("star pattern evaluated in a value position")]
    StarInValue,
    #[error("traces admit only equality comparison, not `{0:?}`")]
    TraceComparison(CmpOp),
    #[error("cannot compare a trace with a number")]
    MixedComparison,
    #[error("time {time} lies outside the recorded flow horizon")]
    OutsideHorizon { time: f64 },
    #[error("the run recorded no flow points")]
    EmptyFlow,
}

/// Variable resolution for term evaluation: quantifier bindings shadow the
/// system variable `now`, which shadows the program valuation.
struct AssertEnv<'a> {
    state: &'a ProcState,
    bindings: &'a BTreeMap<String, f64>,
}

impl Lookup for AssertEnv<'_> {
    fn get(&self, name: &str) -> Option<f64> {
        if let Some(v) = self.bindings.get(name) {
            return Some(*v);
        }
        if name == "now" {
            return Some(self.state.now);
        }
        self.state.vals.get(name).copied()
    }
}

/// Evaluate a trace expression to a concrete trace (star is refused).
fn concrete_trace(h: &TraceExpr, env: &AssertEnv<'_>) -> Result<TimedTrace, AssertError> {
    fn go(h: &TraceExpr, env: &AssertEnv<'_>, out: &mut TimedTrace) -> Result<(), AssertError> {
        match h {
            TraceExpr::Empty => Ok(()),
            TraceExpr::Item { chan, value, time } => {
                let v = value.eval(env)?;
                let t = time.eval(env)?;
                out.push_comm(chan, v, t);
                Ok(())
            }
            TraceExpr::Concat(a, b) => {
                go(a, env, out)?;
                go(b, env, out)
            }
            TraceExpr::Star(_) => Err(AssertError::StarInValue),
        }
    }
    let mut out = TimedTrace::new();
    go(h, env, &mut out)?;
    Ok(out)
}

/// Evaluate a term in a state under quantifier bindings.
pub fn eval_term(
    term: &Term,
    state: &ProcState,
    bindings: &BTreeMap<String, f64>,
) -> Result<TermValue, AssertError> {
    let env = AssertEnv { state, bindings };
    match term {
        Term::Num(e) => Ok(TermValue::Num(e.eval(&env)?)),
        Term::Trace(h) => Ok(TermValue::Trace(concrete_trace(h, &env)?)),
        Term::Tr => Ok(TermValue::Trace(state.tr.clone())),
    }
}

/// The comparable content of a trace: its communications, in order.
/// Internal τ items carry no observable data and are ignored.
fn comm_items(tr: &TimedTrace) -> Vec<(&str, f64, f64)> {
    tr.items()
        .iter()
        .filter_map(|item| match item {
            TimedItem::Comm { chan, value, time } => Some((chan.as_str(), *value, *time)),
            TimedItem::Internal { .. } => None,
        })
        .collect()
}

/// A compiled readiness pattern.
enum Pat {
    Item(String, f64, f64),
    Star(Vec<Pat>),
}

fn compile_pattern(h: &TraceExpr, env: &AssertEnv<'_>) -> Result<Vec<Pat>, AssertError> {
    Ok(match h {
        TraceExpr::Empty => Vec::new(),
        TraceExpr::Item { chan, value, time } => {
            vec![Pat::Item(chan.clone(), value.eval(env)?, time.eval(env)?)]
        }
        TraceExpr::Concat(a, b) => {
            let mut out = compile_pattern(a, env)?;
            out.extend(compile_pattern(b, env)?);
            out
        }
        TraceExpr::Star(inner) => vec![Pat::Star(compile_pattern(inner, env)?)],
    })
}

/// Lengths of item prefixes exactly matched by the pattern.
fn prefix_lens(pat: &[Pat], items: &[(&str, f64, f64)]) -> Vec<usize> {
    match pat.split_first() {
        None => vec![0],
        Some((Pat::Item(c, v, t), rest)) => match items.split_first() {
            Some((head, tail)) if head.0 == c && head.1 == *v && head.2 == *t => {
                prefix_lens(rest, tail).into_iter().map(|k| k + 1).collect()
            }
            _ => Vec::new(),
        },
        Some((Pat::Star(sub), rest)) => {
            let mut lens: Vec<usize> = prefix_lens(rest, items);
            for k in prefix_lens(sub, items) {
                if k > 0 {
                    // One repetition consumed; the star may match again.
                    for l in prefix_lens(pat, &items[k..]) {
                        lens.push(k + l);
                    }
                }
            }
            lens.sort_unstable();
            lens.dedup();
            lens
        }
    }
}

fn pattern_matches(pat: &[Pat], items: &[(&str, f64, f64)]) -> bool {
    prefix_lens(pat, items).contains(&items.len())
}

/// Evaluate a state formula in one state snapshot.
pub fn eval_state_formula(
    s: &StateFormula,
    state: &ProcState,
    bindings: &BTreeMap<String, f64>,
) -> Result<bool, AssertError> {
    match s {
        StateFormula::False => Ok(false),
        StateFormula::Not(inner) => Ok(!eval_state_formula(inner, state, bindings)?),
        StateFormula::Or(a, b) => Ok(eval_state_formula(a, state, bindings)?
            || eval_state_formula(b, state, bindings)?),
        StateFormula::Cmp(lhs, op, rhs) => {
            let a = eval_term(lhs, state, bindings)?;
            let b = eval_term(rhs, state, bindings)?;
            match (a, b) {
                (TermValue::Num(x), TermValue::Num(y)) => Ok(op.holds_f64(x, y)),
                (TermValue::Trace(x), TermValue::Trace(y)) => {
                    if *op == CmpOp::Eq {
                        Ok(comm_items(&x) == comm_items(&y))
                    } else {
                        Err(AssertError::TraceComparison(*op))
                    }
                }
                _ => Err(AssertError::MixedComparison),
            }
        }
        StateFormula::Ready { prefix, chan, direction } => {
            let env = AssertEnv { state, bindings };
            let pat = compile_pattern(prefix, &env)?;
            Ok(state.rdy.iter().any(|r| {
                r.chan == *chan
                    && r.direction == *direction
                    && pattern_matches(&pat, &comm_items(&r.prefix))
            }))
        }
    }
}

/// Evaluate a formula over one run record.
pub fn eval_formula(f: &Formula, rec: &RunRecord) -> Result<bool, AssertError> {
    if rec.flow.points.is_empty() {
        return Err(AssertError::EmptyFlow);
    }
    let init = rec.flow.snapshot(0, &rec.trace);
    let mut bindings = BTreeMap::new();
    eval_formula_bound(f, rec, &init, &mut bindings)
}

fn eval_formula_bound(
    f: &Formula,
    rec: &RunRecord,
    init: &ProcState,
    bindings: &mut BTreeMap<String, f64>,
) -> Result<bool, AssertError> {
    match f {
        Formula::False => Ok(false),
        Formula::Not(inner) => Ok(!eval_formula_bound(inner, rec, init, bindings)?),
        Formula::Or(a, b) => Ok(eval_formula_bound(a, rec, init, bindings)?
            || eval_formula_bound(b, rec, init, bindings)?),
        Formula::At(s, t_expr) => {
            let env = AssertEnv { state: init, bindings };
            let t = t_expr.eval(&env)?;
            let last = rec.flow.points.last().expect("nonempty").time;
            let idx = rec.flow.at(t);
            match idx {
                Some(idx) if t <= last => {
                    let state = rec.flow.snapshot(idx, &rec.trace);
                    eval_state_formula(s, &state, bindings)
                }
                _ => Err(AssertError::OutsideHorizon { time: t }),
            }
        }
        Formula::ForallNum { var, grid, body } => {
            forall_over(var, grid.iter().copied(), body, rec, init, bindings)
        }
        Formula::ForallTime { var, lo, hi, body } => {
            let env = AssertEnv { state: init, bindings };
            let lo = lo.eval(&env)?;
            let hi = hi.eval(&env)?;
            let mut times: Vec<f64> = rec
                .flow
                .points
                .iter()
                .map(|p| p.time)
                .filter(|t| *t >= lo && *t <= hi)
                .collect();
            times.dedup();
            forall_over(var, times.into_iter(), body, rec, init, bindings)
        }
    }
}

fn forall_over(
    var: &str,
    values: impl Iterator<Item = f64>,
    body: &Formula,
    rec: &RunRecord,
    init: &ProcState,
    bindings: &mut BTreeMap<String, f64>,
) -> Result<bool, AssertError> {
    let shadowed = bindings.get(var).copied();
    let mut all = true;
    for v in values {
        bindings.insert(var.to_string(), v);
        let holds = eval_formula_bound(body, rec, init, bindings);
        match holds {
            Ok(true) => {}
            Ok(false) => {
                all = false;
                break;
            }
            Err(e) => {
                restore_binding(bindings, var, shadowed);
                return Err(e);
            }
        }
    }
    restore_binding(bindings, var, shadowed);
    Ok(all)
}

fn restore_binding(bindings: &mut BTreeMap<String, f64>, var: &str, old: Option<f64>) {
    match old {
        Some(v) => {
            bindings.insert(var.to_string(), v);
        }
        None => {
            bindings.remove(var);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{run, RunConfig};
    use crate::syntax::parser::parse;

    fn num(e: &str) -> Term {
        Term::Num(crate::syntax::parse_expr(e).unwrap())
    }

    fn state_with(vals: &[(&str, f64)], now: f64) -> ProcState {
        let mut st = ProcState::new(vals.iter().map(|(k, v)| (k.to_string(), *v)).collect());
        st.now = now;
        st
    }

    fn no_bindings() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn now_resolves_to_the_clock() {
        let st = state_with(&[], 3.5);
        assert_eq!(
            eval_term(&num("now"), &st, &no_bindings()).unwrap(),
            TermValue::Num(3.5)
        );
    }

    #[test]
    fn trace_item_folds_its_expressions() {
        let st = state_with(&[], 0.0);
        let item = TraceExpr::Item {
            chan: "ch".into(),
            value: crate::syntax::parse_expr("1 + 1").unwrap(),
            time: crate::syntax::parse_expr("2").unwrap(),
        };
        let got = eval_term(&Term::Trace(item), &st, &no_bindings()).unwrap();
        let mut want = TimedTrace::new();
        want.push_comm("ch", 2.0, 2.0);
        assert_eq!(got, TermValue::Trace(want));
    }

    #[test]
    fn tr_returns_the_state_trace() {
        let mut st = state_with(&[], 1.0);
        st.tr.push_comm("a", 1.0, 0.0);
        let got = eval_term(&Term::Tr, &st, &no_bindings()).unwrap();
        assert_eq!(got, TermValue::Trace(st.tr.clone()));
    }

    #[test]
    fn star_refused_in_value_position() {
        let st = state_with(&[], 0.0);
        let star = TraceExpr::Star(Box::new(TraceExpr::Empty));
        assert_eq!(
            eval_term(&Term::Trace(star), &st, &no_bindings()),
            Err(AssertError::StarInValue)
        );
    }

    #[test]
    fn bottom_is_false_and_relations_evaluate() {
        let st = state_with(&[("x", 1.0)], 0.0);
        assert!(!eval_state_formula(&StateFormula::False, &st, &no_bindings()).unwrap());
        let geq = StateFormula::Cmp(num("x"), CmpOp::Ge, num("0"));
        assert!(eval_state_formula(&geq, &st, &no_bindings()).unwrap());
        // Double negation is the identity.
        let nn = StateFormula::Not(Box::new(StateFormula::Not(Box::new(geq.clone()))));
        assert_eq!(
            eval_state_formula(&nn, &st, &no_bindings()).unwrap(),
            eval_state_formula(&geq, &st, &no_bindings()).unwrap()
        );
    }

    #[test]
    fn readiness_matches_a_registered_offer() {
        let mut st = state_with(&[], 1.0);
        st.tr.push_comm("a", 1.0, 0.5);
        st.register_ready("ch", Direction::Input);
        let ready = |prefix: TraceExpr| StateFormula::Ready {
            prefix,
            chan: "ch".into(),
            direction: Direction::Input,
        };
        let item = TraceExpr::Item {
            chan: "a".into(),
            value: crate::syntax::parse_expr("1").unwrap(),
            time: crate::syntax::parse_expr("0.5").unwrap(),
        };
        assert!(eval_state_formula(&ready(item.clone()), &st, &no_bindings()).unwrap());
        // The empty prefix does not match a one-item registration prefix.
        assert!(!eval_state_formula(&ready(TraceExpr::Empty), &st, &no_bindings()).unwrap());
        // A star pattern absorbs the repetition.
        let star = TraceExpr::Star(Box::new(item));
        assert!(eval_state_formula(&ready(star), &st, &no_bindings()).unwrap());
        // Wrong direction never matches.
        let out = StateFormula::Ready {
            prefix: TraceExpr::Star(Box::new(TraceExpr::Item {
                chan: "a".into(),
                value: crate::syntax::parse_expr("1").unwrap(),
                time: crate::syntax::parse_expr("0.5").unwrap(),
            })),
            chan: "ch".into(),
            direction: Direction::Output,
        };
        assert!(!eval_state_formula(&out, &st, &no_bindings()).unwrap());
    }

    #[test]
    fn star_matches_zero_and_many_repetitions() {
        let items = |n: usize| -> Vec<(&str, f64, f64)> { vec![("a", 1.0, 0.0); n] };
        let pat = vec![Pat::Star(vec![Pat::Item("a".into(), 1.0, 0.0)])];
        assert!(pattern_matches(&pat, &items(0)));
        assert!(pattern_matches(&pat, &items(1)));
        assert!(pattern_matches(&pat, &items(3)));
        assert!(!pattern_matches(&pat, &[("b", 1.0, 0.0)]));
    }

    #[test]
    fn holds_at_reads_the_final_snapshot_of_time_zero() {
        let rec = run(
            &parse("x := 5").unwrap(),
            &[("x".to_string(), 0.0)].into_iter().collect(),
            1,
            &RunConfig::default(),
        )
        .unwrap();
        let f = Formula::at(
            StateFormula::Cmp(num("x"), CmpOp::Eq, num("5")),
            crate::syntax::parse_expr("0").unwrap(),
        );
        assert!(eval_formula(&f, &rec).unwrap());
    }

    #[test]
    fn time_outside_the_horizon_errors() {
        let rec = run(
            &parse("skip").unwrap(),
            &BTreeMap::new(),
            1,
            &RunConfig::default(),
        )
        .unwrap();
        let f = Formula::at(StateFormula::truth(), crate::syntax::parse_expr("1").unwrap());
        assert!(matches!(
            eval_formula(&f, &rec),
            Err(AssertError::OutsideHorizon { .. })
        ));
    }

    #[test]
    fn drift_path_stays_on_the_diagonal() {
        let cfg = RunConfig { t_max: 2.0, ..RunConfig::default() };
        let rec = run(
            &parse("{d[s] = 1 dt + 0 dW & s < 1}").unwrap(),
            &[("s".to_string(), 0.0)].into_iter().collect(),
            3,
            &cfg,
        )
        .unwrap();
        // ∀t ∈ [0,1] (at sample resolution): s ≤ t + tolerance.
        let f = Formula::ForallTime {
            var: "t".into(),
            lo: crate::syntax::parse_expr("0").unwrap(),
            hi: crate::syntax::parse_expr("1").unwrap(),
            body: Box::new(Formula::at(
                StateFormula::Cmp(num("s"), CmpOp::Le, num("t + 0.02")),
                crate::syntax::parse_expr("t").unwrap(),
            )),
        };
        assert!(eval_formula(&f, &rec).unwrap());
    }

    #[test]
    fn time_axiom_conjunction_commutes_with_at() {
        let cfg = RunConfig { t_max: 1.0, ..RunConfig::default() };
        let rec = run(
            &parse("x := 2; {d[s] = 1 dt + 0.5 dW & s < 3}").unwrap(),
            &[("s".to_string(), 0.0), ("x".to_string(), 0.0)].into_iter().collect(),
            7,
            &cfg,
        )
        .unwrap();
        let s1 = StateFormula::Cmp(num("x"), CmpOp::Eq, num("2"));
        let s2 = StateFormula::Cmp(num("s"), CmpOp::Le, num("10"));
        for t in ["0", "0.25", "0.5"] {
            let te = crate::syntax::parse_expr(t).unwrap();
            let split = Formula::and(
                Formula::at(s1.clone(), te.clone()),
                Formula::at(s2.clone(), te.clone()),
            );
            let joined = Formula::at(StateFormula::and(s1.clone(), s2.clone()), te);
            assert_eq!(
                eval_formula(&split, &rec).unwrap(),
                eval_formula(&joined, &rec).unwrap(),
                "at {t}"
            );
        }
    }

    #[test]
    fn during_implies_at_each_recorded_point() {
        let cfg = RunConfig { t_max: 0.5, ..RunConfig::default() };
        let rec = run(
            &parse("{d[s] = 0 dt + 1 dW & true}").unwrap(),
            &[("s".to_string(), 0.0)].into_iter().collect(),
            11,
            &cfg,
        )
        .unwrap();
        let s = StateFormula::Cmp(num("abs(s)"), CmpOp::Lt, num("100"));
        let during = Formula::during(
            s.clone(),
            crate::syntax::parse_expr("0").unwrap(),
            crate::syntax::parse_expr("0.5").unwrap(),
        );
        assert!(eval_formula(&during, &rec).unwrap());
        for p in &rec.flow.points {
            // Bind the exact sample time; a numeric literal could round to a
            // neighbouring snapshot.
            let at = Formula::ForallNum {
                var: "u".into(),
                grid: vec![p.time],
                body: Box::new(Formula::at(s.clone(), Expr::Var("u".into()))),
            };
            assert!(eval_formula(&at, &rec).unwrap());
        }
    }

    #[test]
    fn within_is_the_dual_of_during() {
        let cfg = RunConfig { t_max: 1.0, ..RunConfig::default() };
        let rec = run(
            &parse("{d[s] = 1 dt + 0 dW & s < 2}").unwrap(),
            &[("s".to_string(), 0.0)].into_iter().collect(),
            5,
            &cfg,
        )
        .unwrap();
        let lo = crate::syntax::parse_expr("0").unwrap();
        let hi = crate::syntax::parse_expr("1").unwrap();
        // s reaches 0.5 somewhere in [0,1] but not everywhere.
        let s = StateFormula::Cmp(num("s"), CmpOp::Ge, num("0.5"));
        assert!(eval_formula(&Formula::within(s.clone(), lo.clone(), hi.clone()), &rec).unwrap());
        assert!(!eval_formula(&Formula::during(s, lo, hi), &rec).unwrap());
    }

    #[test]
    fn trace_terms_compare_by_communications() {
        let rec = run(
            &parse("c!3 || c?x").unwrap(),
            &[("x".to_string(), 0.0)].into_iter().collect(),
            13,
            &RunConfig::default(),
        )
        .unwrap();
        // tr = <c.3, 0> at time 0 (τ items are ignored by trace equality).
        let want = TraceExpr::Item {
            chan: "c".into(),
            value: crate::syntax::parse_expr("3").unwrap(),
            time: crate::syntax::parse_expr("0").unwrap(),
        };
        let f = Formula::at(
            StateFormula::Cmp(Term::Tr, CmpOp::Eq, Term::Trace(want)),
            crate::syntax::parse_expr("0").unwrap(),
        );
        assert!(eval_formula(&f, &rec).unwrap());
    }
}
