//! Monte Carlo estimation of probability formulas with Hoeffding intervals.

use std::collections::BTreeMap;

use num::ToPrimitive;
use thiserror::Error;

use crate::exec::{run, RunConfig, RunError};
use crate::jsonfmt::fmt_f64;
use crate::rng;
use crate::syntax::ast::Process;

use super::{eval_formula, Formula, ProbFormula, ProbRel};

/// Three-valued outcome of comparing a confidence interval to a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    fn not(self) -> Verdict {
        match self {
            Verdict::Holds => Verdict::Fails,
            Verdict::Fails => Verdict::Holds,
            Verdict::Inconclusive => Verdict::Inconclusive,
        }
    }

    fn or(self, other: Verdict) -> Verdict {
        if self == Verdict::Holds || other == Verdict::Holds {
            Verdict::Holds
        } else if self == Verdict::Fails && other == Verdict::Fails {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }
}

/// A raw frequency estimate for one formula: the empirical probability with
/// a two-sided Hoeffding interval at confidence 1−δ, clamped to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct FormulaEstimate {
    pub phat: f64,
    pub n: u64,
    pub lo: f64,
    pub hi: f64,
    /// Runs that errored (engine failure or formula evaluation error) and
    /// were excluded from `n`.
    pub failures: u64,
}

/// One `P(φ) ⋈ p` atom with its interval-based verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomEstimate {
    pub phat: f64,
    pub lo: f64,
    pub hi: f64,
    pub rel: ProbRel,
    pub p: f64,
    pub verdict: Verdict,
}

/// Result of estimating a probability formula. `phat`/`lo`/`hi` describe the
/// first atom in syntactic order; `verdict` is the three-valued combination
/// over all atoms; `atoms` carries the per-atom detail.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub phat: f64,
    pub n: u64,
    pub lo: f64,
    pub hi: f64,
    pub verdict: Verdict,
    pub failures: u64,
    pub delta: f64,
    pub atoms: Vec<AtomEstimate>,
}

impl Estimate {
    /// Serialize as a single JSON object with a fixed key order, suitable
    /// for byte-identical reruns.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"phat\": {}", fmt_f64(self.phat)));
        out.push_str(&format!(", \"n\": {}", self.n));
        out.push_str(&format!(", \"lo\": {}", fmt_f64(self.lo)));
        out.push_str(&format!(", \"hi\": {}", fmt_f64(self.hi)));
        out.push_str(&format!(", \"verdict\": \"{}\"", self.verdict.as_str()));
        out.push('}');
        out
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("at least one run is required")]
    NoRuns,
    #[error("confidence level δ = {0} must lie strictly between 0 and 1")]
    BadConfidence(f64),
    #[error("{0}")]
    Run(#[from] RunError),
    #[error(
        "{failures} of {runs} runs failed (more than 1%); last error: {last_error}"
    )]
    TooManyFailures {
        failures: u64,
        runs: u64,
        last_error: String,
    },
}

/// Two-sided Hoeffding half-width `sqrt(ln(2/δ) / (2n))`, capped at 1.
pub fn hoeffding_band(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt().min(1.0)
}

/// Estimate the satisfaction probability of one formula over `n` runs
/// seeded from `seed` (run `i` uses an independent stream derived from
/// `(seed, i)`, so estimates are reproducible and extendable).
pub fn estimate_formula(
    formula: &Formula,
    program: &Process,
    init: &BTreeMap<String, f64>,
    n: u64,
    delta: f64,
    seed: u64,
    cfg: &RunConfig,
) -> Result<FormulaEstimate, EstimateError> {
    let batch = run_batch(&[formula], program, init, n, delta, seed, cfg)?;
    let (phat, lo, hi) = batch.bands[0];
    Ok(FormulaEstimate {
        phat,
        n: batch.n_ok,
        lo,
        hi,
        failures: batch.failures,
    })
}

/// Estimate a probability formula: every atom's `P(φ)` is estimated over
/// one shared batch of runs, each atom gets an interval-based verdict, and
/// the verdicts combine three-valued through `not` and `or`.
pub fn estimate_prob(
    pf: &ProbFormula,
    program: &Process,
    init: &BTreeMap<String, f64>,
    n: u64,
    delta: f64,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Estimate, EstimateError> {
    let mut specs: Vec<(&Formula, ProbRel, f64)> = Vec::new();
    collect_atoms(pf, &mut specs);
    let formulas: Vec<&Formula> = specs.iter().map(|(f, _, _)| *f).collect();
    let batch = run_batch(&formulas, program, init, n, delta, seed, cfg)?;

    let atoms: Vec<AtomEstimate> = specs
        .iter()
        .zip(&batch.bands)
        .map(|((_, rel, p), &(phat, lo, hi))| AtomEstimate {
            phat,
            lo,
            hi,
            rel: *rel,
            p: *p,
            verdict: decide(lo, hi, *rel, *p),
        })
        .collect();

    let mut pos = 0;
    let verdict = combined_verdict(pf, &atoms, &mut pos);
    let first = &atoms[0];
    Ok(Estimate {
        phat: first.phat,
        n: batch.n_ok,
        lo: first.lo,
        hi: first.hi,
        verdict,
        failures: batch.failures,
        delta,
        atoms,
    })
}

struct Batch {
    /// `(phat, lo, hi)` per formula, over the successful runs.
    bands: Vec<(f64, f64, f64)>,
    n_ok: u64,
    failures: u64,
}

fn run_batch(
    formulas: &[&Formula],
    program: &Process,
    init: &BTreeMap<String, f64>,
    n: u64,
    delta: f64,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Batch, EstimateError> {
    if n == 0 {
        return Err(EstimateError::NoRuns);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(EstimateError::BadConfidence(delta));
    }
    let mut counts = vec![0u64; formulas.len()];
    let mut failures = 0u64;
    let mut last_error = String::new();
    for i in 0..n {
        let rec = match run(program, init, rng::mix64(seed, i), cfg) {
            Ok(rec) => rec,
            // Structural problems are deterministic across runs; surface
            // them immediately rather than as a failure tally.
            Err(e @ (RunError::Invalid(_) | RunError::BadConfig(_) | RunError::NotParallelable(_))) => {
                return Err(e.into());
            }
            Err(e) => {
                failures += 1;
                last_error = e.to_string();
                continue;
            }
        };
        let mut values = Vec::with_capacity(formulas.len());
        let mut failed = false;
        for f in formulas {
            match eval_formula(f, &rec) {
                Ok(v) => values.push(v),
                Err(e) => {
                    failures += 1;
                    last_error = e.to_string();
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        for (count, value) in counts.iter_mut().zip(values) {
            if value {
                *count += 1;
            }
        }
    }
    if failures * 100 > n {
        return Err(EstimateError::TooManyFailures { failures, runs: n, last_error });
    }
    let n_ok = n - failures;
    let band = hoeffding_band(n_ok, delta);
    let bands = counts
        .iter()
        .map(|&c| {
            let phat = c as f64 / n_ok as f64;
            (phat, (phat - band).max(0.0), (phat + band).min(1.0))
        })
        .collect();
    Ok(Batch { bands, n_ok, failures })
}

fn collect_atoms<'a>(pf: &'a ProbFormula, out: &mut Vec<(&'a Formula, ProbRel, f64)>) {
    match pf {
        ProbFormula::Atom { formula, rel, p } => {
            out.push((formula.as_ref(), *rel, p.to_f64().unwrap_or(f64::NAN)));
        }
        ProbFormula::Not(inner) => collect_atoms(inner, out),
        ProbFormula::Or(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
    }
}

fn combined_verdict(pf: &ProbFormula, atoms: &[AtomEstimate], pos: &mut usize) -> Verdict {
    match pf {
        ProbFormula::Atom { .. } => {
            let v = atoms[*pos].verdict;
            *pos += 1;
            v
        }
        ProbFormula::Not(inner) => combined_verdict(inner, atoms, pos).not(),
        ProbFormula::Or(a, b) => {
            let va = combined_verdict(a, atoms, pos);
            let vb = combined_verdict(b, atoms, pos);
            va.or(vb)
        }
    }
}

/// Holds/fails only when the whole interval sits on one side of `p`.
fn decide(lo: f64, hi: f64, rel: ProbRel, p: f64) -> Verdict {
    match rel {
        ProbRel::Le => {
            if hi <= p {
                Verdict::Holds
            } else if lo > p {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
        ProbRel::Lt => {
            if hi < p {
                Verdict::Holds
            } else if lo >= p {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
        ProbRel::Ge => {
            if lo >= p {
                Verdict::Holds
            } else if hi < p {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
        ProbRel::Gt => {
            if lo > p {
                Verdict::Holds
            } else if hi <= p {
                Verdict::Fails
            } else {
                Verdict::Inconclusive
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::parse_prob_formula;
    use crate::syntax::parser::parse;

    fn init(vars: &[(&str, f64)]) -> BTreeMap<String, f64> {
        vars.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn hoeffding_band_matches_the_closed_form() {
        // sqrt(ln(2/0.01) / (2·10⁴))
        let band = hoeffding_band(10_000, 0.01);
        assert!((band - 1.6276236307187292e-2).abs() < 1e-12, "{band}");
        // Tiny n caps at 1.
        assert_eq!(hoeffding_band(1, 1e-9), 1.0);
    }

    #[test]
    fn sure_formula_holds_with_margin() {
        let program = parse("x := 1").unwrap();
        let pf = parse_prob_formula("P(x = 1 at 0) >= 0.9").unwrap();
        let est = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 1000, 0.01, 7, &RunConfig::default())
            .unwrap();
        assert_eq!(est.phat, 1.0);
        assert_eq!(est.n, 1000);
        assert_eq!(est.failures, 0);
        assert_eq!(est.verdict, Verdict::Holds);
        assert!(est.lo <= est.phat && est.phat <= est.hi);
        assert_eq!(est.hi, 1.0);
    }

    #[test]
    fn binomial_frequency_lands_in_the_analytic_band() {
        // x := 1 ⊔_{1/4} x := 2, estimated at n = 10⁴: the left-branch
        // frequency sits within 0.25 ± 0.011 (≈ 2.5σ for the binomial).
        let program = parse("(x := 1 | 1/4 | x := 2)").unwrap();
        let pf = parse_prob_formula("P(x = 1 at 0) <= 0.3").unwrap();
        let est = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 10_000, 0.01, 11, &RunConfig::default())
            .unwrap();
        assert!((est.phat - 0.25).abs() <= 0.011, "phat = {}", est.phat);
        assert_eq!(est.verdict, Verdict::Holds);
    }

    #[test]
    fn verdict_is_inconclusive_when_the_threshold_is_inside_the_band() {
        let program = parse("(x := 1 | 1/2 | x := 2)").unwrap();
        let pf = parse_prob_formula("P(x = 1 at 0) >= 0.5").unwrap();
        let est = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 200, 0.01, 3, &RunConfig::default())
            .unwrap();
        assert_eq!(est.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn negation_and_disjunction_combine_three_valued() {
        let program = parse("x := 1").unwrap();
        // ¬(P(x=1 at 0) < 1/2): inner fails decisively, so the negation holds.
        let pf = parse_prob_formula("not P(x = 1 at 0) < 1/2").unwrap();
        let est = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 500, 0.01, 5, &RunConfig::default())
            .unwrap();
        assert_eq!(est.verdict, Verdict::Holds);
        // fails | holds → holds; the report keeps the first atom's interval.
        let pf = parse_prob_formula("P(x = 2 at 0) >= 1/2 | P(x = 1 at 0) >= 1/2").unwrap();
        let est = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 500, 0.01, 5, &RunConfig::default())
            .unwrap();
        assert_eq!(est.verdict, Verdict::Holds);
        assert_eq!(est.atoms.len(), 2);
        assert_eq!(est.phat, est.atoms[0].phat);
        assert_eq!(est.atoms[0].verdict, Verdict::Fails);
    }

    #[test]
    fn runs_failing_evaluation_are_tallied_and_capped() {
        // now = 5 is outside every run's horizon (skip stops at t = 0), so
        // every run fails formula evaluation.
        let program = parse("skip").unwrap();
        let pf = parse_prob_formula("P(true at 5) >= 1/2").unwrap();
        let err = estimate_prob(&pf, &program, &BTreeMap::new(), 100, 0.01, 1, &RunConfig::default())
            .unwrap_err();
        let EstimateError::TooManyFailures { failures, runs, .. } = err else {
            panic!("expected a failure-rate error, got {err:?}");
        };
        assert_eq!((failures, runs), (100, 100));
    }

    #[test]
    fn structural_errors_surface_immediately() {
        // Shared variable across parallel components is rejected by
        // validation, not tallied as run failures.
        let program = parse("x := 1 || x := 2").unwrap();
        let pf = parse_prob_formula("P(true at 0) >= 1/2").unwrap();
        let err = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 100, 0.01, 1, &RunConfig::default())
            .unwrap_err();
        assert!(matches!(err, EstimateError::Run(_)), "{err:?}");
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let program = parse("skip").unwrap();
        let pf = parse_prob_formula("P(true at 0) >= 1/2").unwrap();
        assert_eq!(
            estimate_prob(&pf, &program, &BTreeMap::new(), 0, 0.01, 1, &RunConfig::default()),
            Err(EstimateError::NoRuns)
        );
        assert_eq!(
            estimate_prob(&pf, &program, &BTreeMap::new(), 10, 0.0, 1, &RunConfig::default()),
            Err(EstimateError::BadConfidence(0.0))
        );
    }

    #[test]
    fn json_shape_is_stable() {
        let program = parse("x := 1").unwrap();
        let pf = parse_prob_formula("P(x = 1 at 0) >= 0.9").unwrap();
        let a = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 1000, 0.05, 9, &RunConfig::default())
            .unwrap();
        let b = estimate_prob(&pf, &program, &init(&[("x", 0.0)]), 1000, 0.05, 9, &RunConfig::default())
            .unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.to_json().starts_with("{\"phat\": 1.0000000000000000e0, \"n\": 1000"));
        assert!(a.to_json().contains("\"verdict\": \"holds\""));
    }
}
