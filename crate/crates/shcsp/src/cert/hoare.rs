//! Propagation of certified probability bounds through the discrete
//! constructs: skip, assignment, sequencing, and probabilistic choice.
//!
//! A [`HoareBound`] reads as the contract
//! `{pre} statement {P(event) rel bound ∧ post}`: started from a state
//! satisfying `pre`, the statement terminates in a state satisfying `post`,
//! and the probability that `event` held at some point of the execution is
//! related to `bound` by `rel`. The vacuous probabilistic clause
//! `P(false) ≤ 0` stands in for contracts that carry no probability claim.
//!
//! Combinators here are deliberately syntactic and conservative: sequencing
//! requires the middle assertion to be entailed conjunct-by-conjunct, and
//! choice requires the two branches to bound the same event the same way.
//! Anything subtler is refused rather than approximated.

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::assertions::ProbRel;
use crate::syntax::ast::{BoolExpr, Expr, Process, Rational};
use crate::syntax::pretty_bool;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum HoareError {
    #[error("cannot sequence: {0}")]
    Entailment(String),
    #[error("cannot combine: {0}")]
    Mismatch(String),
    #[error("branch probability must lie in [0, 1], got {0}")]
    BadProbability(Rational),
}

/// `{pre} statement {P(event) rel bound ∧ post}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoareBound {
    pub statement: Process,
    pub pre: BoolExpr,
    pub post: BoolExpr,
    pub event: BoolExpr,
    pub rel: ProbRel,
    pub bound: Rational,
}

impl HoareBound {
    /// The empty probability claim `P(false) ≤ 0`, true of anything.
    fn vacuous_clause() -> (BoolExpr, ProbRel, Rational) {
        (BoolExpr::False, ProbRel::Le, Rational::zero())
    }

    fn clause_is_vacuous(&self) -> bool {
        let (event, rel, bound) = Self::vacuous_clause();
        self.event == event && self.rel == rel && self.bound == bound
    }

    /// Render as `{pre} stmt {P(event) rel bound & post}`.
    pub fn render(&self) -> String {
        format!(
            "{{{}}} {} {{P({}) {} {} & {}}}",
            pretty_bool(&self.pre),
            crate::syntax::pretty(&self.statement),
            pretty_bool(&self.event),
            self.rel.symbol(),
            self.bound,
            pretty_bool(&self.post),
        )
    }
}

/// `{a} skip {a}` with no probability claim.
pub fn hoare_skip(a: &BoolExpr) -> HoareBound {
    let (event, rel, bound) = HoareBound::vacuous_clause();
    HoareBound {
        statement: Process::Skip,
        pre: a.clone(),
        post: a.clone(),
        event,
        rel,
        bound,
    }
}

/// `{post[e/x]} x := e {post}` with no probability claim.
pub fn hoare_assign(x: &str, e: &Expr, post: &BoolExpr) -> HoareBound {
    let (event, rel, bound) = HoareBound::vacuous_clause();
    HoareBound {
        statement: Process::Assign(x.to_string(), e.clone()),
        pre: post.subst(x, e),
        post: post.clone(),
        event,
        rel,
        bound,
    }
}

/// Sequence two contracts. The first postcondition must syntactically
/// entail the second precondition (every needed conjunct is present), and
/// at most one side may carry a probability claim — the other must be
/// vacuous, as for skip and assignment.
pub fn chain_seq(first: &HoareBound, second: &HoareBound) -> Result<HoareBound, HoareError> {
    if !entails(&first.post, &second.pre) {
        return Err(HoareError::Entailment(format!(
            "`{}` does not syntactically entail `{}`",
            pretty_bool(&first.post),
            pretty_bool(&second.pre),
        )));
    }
    let (event, rel, bound) = match (first.clause_is_vacuous(), second.clause_is_vacuous()) {
        (_, true) => (first.event.clone(), first.rel, first.bound.clone()),
        (true, false) => (second.event.clone(), second.rel, second.bound.clone()),
        (false, false) => {
            return Err(HoareError::Mismatch(
                "both sides carry a probability claim; combining them needs a union \
                 bound this checker does not take"
                    .into(),
            ))
        }
    };
    Ok(HoareBound {
        statement: Process::Seq(
            Box::new(first.statement.clone()),
            Box::new(second.statement.clone()),
        ),
        pre: first.pre.clone(),
        post: second.post.clone(),
        event,
        rel,
        bound,
    })
}

/// Combine branch contracts of `(P |p| Q)`: the event probability is the
/// mixture `p·bound_left + (1−p)·bound_right`. Requires both branches to
/// constrain the same event with the same relation from the same
/// precondition.
pub fn combine_pchoice(
    left: &HoareBound,
    right: &HoareBound,
    p: &Rational,
) -> Result<HoareBound, HoareError> {
    if p.is_negative() || *p > Rational::one() {
        return Err(HoareError::BadProbability(p.clone()));
    }
    if left.event != right.event || left.rel != right.rel {
        return Err(HoareError::Mismatch(format!(
            "branches bound different claims: P({}) {} vs P({}) {}",
            pretty_bool(&left.event),
            left.rel.symbol(),
            pretty_bool(&right.event),
            right.rel.symbol(),
        )));
    }
    if left.pre != right.pre {
        return Err(HoareError::Mismatch(
            "branches assume different preconditions".into(),
        ));
    }
    let post = if left.post == right.post {
        left.post.clone()
    } else {
        // Only the common knowledge survives the branch; nothing here.
        BoolExpr::True
    };
    let bound = p.clone() * left.bound.clone()
        + (Rational::one() - p.clone()) * right.bound.clone();
    Ok(HoareBound {
        statement: Process::PChoice(
            Box::new(left.statement.clone()),
            p.clone(),
            Box::new(right.statement.clone()),
        ),
        pre: left.pre.clone(),
        post,
        event: left.event.clone(),
        rel: left.rel,
        bound,
    })
}

/// Does `have` syntactically entail `want`? True when every conjunct of
/// `want` is `true` or appears verbatim among the conjuncts of `have` (or
/// `have` is `false`). No arithmetic or logical reasoning is attempted.
fn entails(have: &BoolExpr, want: &BoolExpr) -> bool {
    if *have == BoolExpr::False {
        return true;
    }
    let mut haves = Vec::new();
    conjuncts(have, &mut haves);
    let mut wants = Vec::new();
    conjuncts(want, &mut wants);
    wants
        .iter()
        .all(|w| **w == BoolExpr::True || haves.contains(w))
}

fn conjuncts<'a>(b: &'a BoolExpr, out: &mut Vec<&'a BoolExpr>) {
    match b {
        BoolExpr::And(l, r) => {
            conjuncts(l, out);
            conjuncts(r, out);
        }
        other => out.push(other),
    }
}
