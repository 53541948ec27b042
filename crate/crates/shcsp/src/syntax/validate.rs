//! Static well-formedness checks.
//!
//! `validate` walks a process tree and reports every violated invariant:
//! probabilities inside `[0, 1]`, positive interrupt weights, consistent SDE
//! dimensions, parallel composition only at the top level, and the
//! disjointness rule for parallel components (no shared variables, input
//! channels, or output channels).

use std::collections::BTreeSet;
use std::fmt;

use num::{One, Signed, Zero};

use super::ast::{Process, Rational, SdeBlock};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl Diagnostic {
    fn new(message: impl Into<String>) -> Self {
        Diagnostic {
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check every invariant; an empty result means the process is well formed.
pub fn validate(p: &Process) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    walk(p, true, &mut out);
    out
}

fn walk(p: &Process, top_level: bool, out: &mut Vec<Diagnostic>) {
    match p {
        Process::Skip | Process::Input(..) | Process::Output(..) | Process::Assign(..) => {}
        Process::Seq(a, b) => {
            walk(a, false, out);
            walk(b, false, out);
        }
        Process::Cond(_, body) => walk(body, false, out),
        Process::Repeat(body) => walk(body, false, out),
        Process::PChoice(a, prob, b) => {
            if prob < &Rational::zero() || prob > &Rational::one() {
                out.push(Diagnostic::new(format!(
                    "probability out of range: {prob}"
                )));
            }
            walk(a, false, out);
            walk(b, false, out);
        }
        Process::Sde(block) => check_block(block, out),
        Process::Interrupt(block, branches) => {
            check_block(block, out);
            if branches.is_empty() {
                out.push(Diagnostic::new("interrupt needs at least one branch"));
            }
            for branch in branches {
                if !branch.weight.is_positive() {
                    out.push(Diagnostic::new(format!(
                        "interrupt weight must be positive: {} on channel {}",
                        branch.weight,
                        branch.event.chan()
                    )));
                }
                walk(&branch.body, false, out);
            }
        }
        Process::Parallel(left, right) => {
            if !top_level {
                out.push(Diagnostic::new("parallel composition must be top-level"));
            }
            check_disjoint(left, right, out);
            walk(left, top_level, out);
            walk(right, top_level, out);
        }
    }
}

fn check_block(block: &SdeBlock, out: &mut Vec<Diagnostic>) {
    let dim = block.vars.len();
    let mut seen = BTreeSet::new();
    for v in &block.vars {
        if !seen.insert(v) {
            out.push(Diagnostic::new(format!(
                "duplicate continuous variable {v}"
            )));
        }
    }
    if block.drift.len() != dim {
        out.push(Diagnostic::new(format!(
            "drift has {} component(s) for {} variable(s)",
            block.drift.len(),
            dim
        )));
    }
    if block.diffusion.len() != dim {
        out.push(Diagnostic::new(format!(
            "diffusion has {} row(s) for {} variable(s)",
            block.diffusion.len(),
            dim
        )));
    }
    let width = block.diffusion.first().map_or(0, |row| row.len());
    if width == 0 || block.diffusion.iter().any(|row| row.len() != width) {
        out.push(Diagnostic::new(
            "diffusion rows must have equal, nonzero length",
        ));
    }
}

fn check_disjoint(left: &Process, right: &Process, out: &mut Vec<Diagnostic>) {
    for v in left.variables().intersection(&right.variables()) {
        out.push(Diagnostic::new(format!("shared variable {v}")));
    }
    for ch in left
        .input_channels()
        .intersection(&right.input_channels())
    {
        out.push(Diagnostic::new(format!("shared input channel {ch}")));
    }
    for ch in left
        .output_channels()
        .intersection(&right.output_channels())
    {
        out.push(Diagnostic::new(format!("shared output channel {ch}")));
    }
}
