//! Mechanized checking of the supermartingale proof rule for SDE blocks.
//!
//! A certificate request names a block `{d[s] = b dt + σ dW & B}`, a
//! candidate function `f`, a level `λ > 0`, a probability budget `p`, an
//! initial state, and a box with a grid resolution. The checker verifies, in
//! order: that `f` is built from C² primitives, that the initial state lies
//! in `B` with `f(s₀) ≤ λ·p` (in exact rational arithmetic whenever the
//! expressions allow it), and that `f ≥ 0` and `Lf ≤ 0` hold at every grid
//! point of the box that satisfies `B`.
//!
//! A passing run certifies `P(sup f ≥ λ during the evolution) ≤ f(s₀)/λ`,
//! and that the closure of `B` holds when the block hands over. Two caveats
//! are recorded rather than glossed over: grid scans are *evidence*, not
//! proof, and compact support of `f` on `cl(B)` is assumed (its finiteness
//! is only sampled). When `f` has `abs`/`sgn` kinks the premises are checked
//! away from the kink set and the result is explicitly downgraded to partial
//! evidence.

pub mod check;
pub mod diff;
pub mod hoare;
pub mod io;

pub use check::{check_sign, check_sign_excluding, Sign, SignCheck};
pub use diff::{
    diff, diff_partial, lie_derivative, lie_derivative_partial, simplify, simplify_bool, DiffError,
};
pub use hoare::{chain_seq, combine_pchoice, hoare_assign, hoare_skip, HoareBound, HoareError};

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Signed, ToPrimitive};
use thiserror::Error;

use crate::syntax::ast::{EvalError, Expr, Rational, SdeBlock};
use crate::syntax::{pretty_bool, pretty_expr};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CertError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// What to certify: `P(sup f ≥ λ) ≤ p` for the given block, started at
/// `init`, with grid evidence collected over `bounds`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateRequest {
    pub block: SdeBlock,
    pub f: Expr,
    pub lam: Rational,
    pub p: Rational,
    /// Initial valuation; rational so the `f(s₀) ≤ λ·p` comparison can be
    /// exact when `f` is arithmetic.
    pub init: BTreeMap<String, Rational>,
    /// Closed interval per variable scanned by the sign checks. Variables
    /// missing here but present in `init` are pinned to their initial value.
    pub bounds: BTreeMap<String, (f64, f64)>,
    /// Samples per non-degenerate box axis.
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertVerdict {
    Certified,
    Rejected { premise: String },
    Unsupported { reason: String },
}

impl CertVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            CertVerdict::Certified => "certified",
            CertVerdict::Rejected { .. } => "rejected",
            CertVerdict::Unsupported { .. } => "unsupported",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Smoothness {
    /// Only C² primitives occur in `f`.
    C2,
    /// `f` has `abs`/`sgn` kinks; checks exclude the zero sets of `singular`.
    Kinked { singular: Vec<Expr> },
    /// `f` contains a primitive with no usable derivative at all.
    NotC2 { node: String },
}

/// One checked premise of the rule, with the evidence trail.
#[derive(Clone, Debug, PartialEq)]
pub struct PremiseCheck {
    pub name: &'static str,
    pub method: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateResult {
    pub verdict: CertVerdict,
    pub premises: Vec<PremiseCheck>,
    /// The implied probability bound `f(s₀)/λ`.
    pub bound: f64,
    pub smoothness: Smoothness,
    /// The simplified Lie derivative, when one exists.
    pub lie: Option<Expr>,
    /// What a passing certificate asserts.
    pub conclusion: String,
}

impl CertificateResult {
    pub fn certified(&self) -> bool {
        self.verdict == CertVerdict::Certified
    }
}

/// Check the SDE proof rule premises for `req` and assemble the verdict.
pub fn check_sde_rule(req: &CertificateRequest) -> Result<CertificateResult, CertError> {
    if !req.lam.is_positive() {
        return Err(CertError::BadRequest("lambda must be positive".into()));
    }
    if req.p.is_negative() || req.p > Rational::one() {
        return Err(CertError::BadRequest("p must lie in [0, 1]".into()));
    }
    if req.grid < 2 {
        return Err(CertError::BadRequest(
            "grid must have at least 2 points per axis".into(),
        ));
    }
    let mut init_vars = BTreeSet::new();
    req.f.free_vars(&mut init_vars);
    req.block.domain.free_vars(&mut init_vars);
    for v in &init_vars {
        if !req.init.contains_key(v) {
            return Err(CertError::BadRequest(format!(
                "initial state must bind `{v}`"
            )));
        }
    }

    // Smoothness and the Lie derivative. A strict failure on `abs`/`sgn`
    // falls back to the kink-aware derivative; `min`/`max`/`piece` in `f`
    // admit no derivative at all.
    let (lie, smoothness) = match lie_derivative(&req.f, &req.block) {
        Ok(lf) => (Some(lf), Smoothness::C2),
        Err(_) => match lie_derivative_partial(&req.f, &req.block) {
            Ok((lf, singular)) => (Some(lf), Smoothness::Kinked { singular }),
            Err(DiffError::NonDifferentiable { node, .. }) => {
                (None, Smoothness::NotC2 { node })
            }
        },
    };
    let singular: &[Expr] = match &smoothness {
        Smoothness::Kinked { singular } => singular,
        _ => &[],
    };

    let mut premises = Vec::new();
    premises.push(PremiseCheck {
        name: "smoothness",
        method: "syntactic scan of f".into(),
        passed: smoothness == Smoothness::C2,
        detail: match &smoothness {
            Smoothness::C2 => "all primitives of f are C2".into(),
            Smoothness::Kinked { singular } => format!(
                "f has kinks; evidence excludes the zero set of {}",
                render_exprs(singular)
            ),
            Smoothness::NotC2 { node } => {
                format!("`{node}` admits no derivative")
            }
        },
    });

    let (initial, bound) = initial_premise(req)?;
    premises.push(initial);

    // Assemble the box the grid scans run over: requested intervals first,
    // then degenerate axes pinning every remaining variable to its initial
    // value (so symbolic parameters stay fixed).
    let mut scan_vars = init_vars;
    if let Some(lf) = &lie {
        lf.free_vars(&mut scan_vars);
    }
    for g in singular {
        g.free_vars(&mut scan_vars);
    }
    let mut ebox = req.bounds.clone();
    for v in &scan_vars {
        if !ebox.contains_key(v) {
            let pinned = req
                .init
                .get(v)
                .ok_or_else(|| {
                    CertError::BadRequest(format!(
                        "`{v}` needs a box interval or an initial value"
                    ))
                })?
                .to_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    CertError::BadRequest(format!("initial value for `{v}` overflows binary64"))
                })?;
            ebox.insert(v.clone(), (pinned, pinned));
        }
    }

    let on = if singular.is_empty() {
        "grid evidence on B".to_string()
    } else {
        format!(
            "grid evidence on B minus the zero set of {}",
            render_exprs(singular)
        )
    };

    let nonneg = check_sign(&req.f, Sign::NonNeg, &req.block.domain, &ebox, req.grid)?;
    premises.push(sign_premise("nonneg", "f >= 0", &nonneg, "grid evidence on B"));

    match &lie {
        Some(lf) => {
            let lie_check = check_sign_excluding(
                lf,
                Sign::NonPos,
                &req.block.domain,
                &ebox,
                req.grid,
                singular,
            )?;
            premises.push(sign_premise("lie-nonpos", "Lf <= 0", &lie_check, &on));
        }
        None => premises.push(PremiseCheck {
            name: "lie-nonpos",
            method: "unavailable".into(),
            passed: false,
            detail: "no derivative of f exists to check".into(),
        }),
    }

    premises.push(PremiseCheck {
        name: "bounded",
        method: "assumption + grid finiteness".into(),
        passed: true,
        detail: "f was finite at every sampled point; compact support on cl(B) is assumed"
            .into(),
    });

    let find = |name: &str| {
        premises
            .iter()
            .find(|p| p.name == name)
            .expect("premise recorded above")
    };
    let verdict = if lie.is_none() {
        let Smoothness::NotC2 { node } = &smoothness else {
            unreachable!("a missing derivative implies a non-C2 node")
        };
        CertVerdict::Unsupported {
            reason: format!("f contains `{node}`, which has no derivative; nothing to certify"),
        }
    } else if !find("initial").passed {
        CertVerdict::Rejected { premise: "initial".into() }
    } else if !find("nonneg").passed {
        CertVerdict::Rejected { premise: "nonneg".into() }
    } else if !find("lie-nonpos").passed {
        CertVerdict::Rejected { premise: "lie-nonpos".into() }
    } else if let Smoothness::Kinked { singular } = &smoothness {
        CertVerdict::Unsupported {
            reason: format!(
                "f is not C2 (kinks where {} = 0); the premises hold away from the kink \
                 set, which is partial evidence, not a certificate",
                render_exprs(singular)
            ),
        }
    } else {
        CertVerdict::Certified
    };

    let conclusion = format!(
        "from the initial state, P(sup f(s) >= {} over the whole evolution) <= {bound}, and \
         the closure of {} holds whenever the block hands over",
        req.lam,
        pretty_bool(&req.block.domain),
    );

    Ok(CertificateResult {
        verdict,
        premises,
        bound,
        smoothness,
        lie,
        conclusion,
    })
}

/// Check `s₀ ∈ B` and `f(s₀) ≤ λ·p`, exactly when possible, and compute the
/// implied bound `f(s₀)/λ`.
fn initial_premise(req: &CertificateRequest) -> Result<(PremiseCheck, f64), CertError> {
    let lam_p = req.lam.clone() * req.p.clone();

    let mut init_f64: BTreeMap<String, f64> = BTreeMap::new();
    for (k, v) in &req.init {
        let x = v
            .to_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| {
                CertError::BadRequest(format!("initial value for `{k}` overflows binary64"))
            })?;
        init_f64.insert(k.clone(), x);
    }

    let in_domain = match req.block.domain.eval_exact(&req.init)? {
        Some(b) => b,
        None => req.block.domain.eval(&init_f64)?,
    };

    // `bound` is the implied probability bound f(s₀)/λ.
    let (method, le, bound, detail_cmp) = match req.f.eval_exact(&req.init)? {
        Some(f0) => {
            let le = f0 <= lam_p;
            let bound = (f0.clone() / req.lam.clone()).to_f64().unwrap_or(f64::NAN);
            let cmp = format!(
                "f(s0) = {f0} {} lam*p = {lam_p}",
                if le { "<=" } else { ">" }
            );
            ("exact rational".to_string(), le, bound, cmp)
        }
        None => {
            let f0 = req.f.eval(&init_f64)?;
            let lam_f = req.lam.to_f64().unwrap_or(f64::NAN);
            let lam_p_f = lam_p.to_f64().unwrap_or(f64::NAN);
            let le = f0 <= lam_p_f;
            let cmp = format!(
                "f(s0) = {f0} {} lam*p = {lam_p_f}",
                if le { "<=" } else { ">" }
            );
            ("binary64".to_string(), le, f0 / lam_f, cmp)
        }
    };

    let passed = in_domain && le;
    let detail = if in_domain {
        detail_cmp
    } else {
        format!("s0 violates the evolution domain; also {detail_cmp}")
    };
    Ok((
        PremiseCheck { name: "initial", method, passed, detail },
        bound,
    ))
}

fn sign_premise(name: &'static str, what: &str, out: &SignCheck, method: &str) -> PremiseCheck {
    match out {
        SignCheck::Passes { points, skipped } => PremiseCheck {
            name,
            method: method.to_string(),
            passed: true,
            detail: format!("{what} at all {points} sampled points ({skipped} outside)"),
        },
        SignCheck::Counterexample { point, value } => PremiseCheck {
            name,
            method: method.to_string(),
            passed: false,
            detail: format!(
                "{what} fails at {}: value {value}",
                check::render_point(point)
            ),
        },
    }
}

fn render_exprs(exprs: &[Expr]) -> String {
    let parts: Vec<String> = exprs.iter().map(pretty_expr).collect();
    parts.join(", ")
}
