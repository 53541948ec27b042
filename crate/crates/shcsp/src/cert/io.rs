//! JSON intake for certificate requests and serialization of results.
//!
//! Requests keep every exactness-sensitive number (`lam`, `p`, the initial
//! valuation) as a rational string such as `"1/5000"`, so nothing is forced
//! through binary64 before the initial-premise comparison. Box intervals
//! and the grid resolution are plain numbers — they only steer sampling.
//!
//! Results are emitted with a fixed key order and 17-significant-digit
//! floats, so reruns are byte-identical.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::jsonfmt::{escape, fmt_f64};
use crate::syntax::ast::Process;
use crate::syntax::{parse, parse_expr, parse_rational, pretty_expr};

use super::{CertVerdict, CertificateRequest, CertificateResult, Smoothness};

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("request is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("in `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl ToString) -> RequestError {
    RequestError::Field { field: field.into(), message: message.to_string() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRequest {
    block: String,
    f: String,
    lam: String,
    p: String,
    init: BTreeMap<String, String>,
    #[serde(rename = "box")]
    bounds: BTreeMap<String, [f64; 2]>,
    grid: usize,
}

/// Parse a certificate request from its JSON form.
pub fn request_from_json(text: &str) -> Result<CertificateRequest, RequestError> {
    let raw: RawRequest = serde_json::from_str(text)?;
    let block = match parse(&raw.block).map_err(|e| field_err("block", e))? {
        Process::Sde(block) => block,
        _ => {
            return Err(field_err(
                "block",
                "must be a bare SDE block `{d[...] = ... dt + ... dW & ...}`",
            ))
        }
    };
    let f = parse_expr(&raw.f).map_err(|e| field_err("f", e))?;
    let lam = parse_rational(&raw.lam).map_err(|e| field_err("lam", e))?;
    let p = parse_rational(&raw.p).map_err(|e| field_err("p", e))?;
    let mut init = BTreeMap::new();
    for (k, v) in &raw.init {
        let value = parse_rational(v).map_err(|e| field_err(format!("init.{k}"), e))?;
        init.insert(k.clone(), value);
    }
    let bounds = raw
        .bounds
        .into_iter()
        .map(|(k, [lo, hi])| (k, (lo, hi)))
        .collect();
    Ok(CertificateRequest { block, f, lam, p, init, bounds, grid: raw.grid })
}

/// Deterministic JSON rendering of a result.
pub fn result_to_json(r: &CertificateResult) -> String {
    let mut out = String::new();
    out.push_str("{\"verdict\": \"");
    out.push_str(r.verdict.label());
    out.push('"');
    match &r.verdict {
        CertVerdict::Certified => {}
        CertVerdict::Rejected { premise } => {
            out.push_str(", \"premise\": \"");
            out.push_str(&escape(premise));
            out.push('"');
        }
        CertVerdict::Unsupported { reason } => {
            out.push_str(", \"reason\": \"");
            out.push_str(&escape(reason));
            out.push('"');
        }
    }
    out.push_str(", \"bound\": ");
    out.push_str(&fmt_f64(r.bound));
    out.push_str(", \"smoothness\": \"");
    out.push_str(match &r.smoothness {
        Smoothness::C2 => "C2",
        Smoothness::Kinked { .. } => "kinked",
        Smoothness::NotC2 { .. } => "not-C2",
    });
    out.push('"');
    if let Smoothness::Kinked { singular } = &r.smoothness {
        out.push_str(", \"singular\": [");
        for (i, g) in singular.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('"');
            out.push_str(&escape(&pretty_expr(g)));
            out.push('"');
        }
        out.push(']');
    }
    out.push_str(", \"lie\": ");
    match &r.lie {
        Some(lf) => {
            out.push('"');
            out.push_str(&escape(&pretty_expr(lf)));
            out.push('"');
        }
        None => out.push_str("null"),
    }
    out.push_str(", \"premises\": [");
    for (i, p) in r.premises.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str("{\"name\": \"");
        out.push_str(&escape(p.name));
        out.push_str("\", \"method\": \"");
        out.push_str(&escape(&p.method));
        out.push_str("\", \"passed\": ");
        out.push_str(if p.passed { "true" } else { "false" });
        out.push_str(", \"detail\": \"");
        out.push_str(&escape(&p.detail));
        out.push_str("\"}");
    }
    out.push_str("], \"conclusion\": \"");
    out.push_str(&escape(&r.conclusion));
    out.push_str("\"}");
    out
}

/// Multi-line human-readable report.
pub fn result_report(r: &CertificateResult) -> String {
    let mut out = String::new();
    out.push_str("verdict: ");
    out.push_str(r.verdict.label());
    match &r.verdict {
        CertVerdict::Certified => {}
        CertVerdict::Rejected { premise } => {
            out.push_str(&format!(" (premise `{premise}` failed)"));
        }
        CertVerdict::Unsupported { reason } => {
            out.push_str(&format!(" ({reason})"));
        }
    }
    out.push('\n');
    out.push_str(&format!("bound:   f(s0)/lam = {}\n", r.bound));
    if let Some(lf) = &r.lie {
        out.push_str(&format!("lie:     Lf = {}\n", pretty_expr(lf)));
    }
    out.push_str("premises:\n");
    for p in &r.premises {
        out.push_str(&format!(
            "  [{}] {:<10} ({}): {}\n",
            if p.passed { "pass" } else { "FAIL" },
            p.name,
            p.method,
            p.detail,
        ));
    }
    out.push_str(&format!("conclusion: {}\n", r.conclusion));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::check_sde_rule;

    const CONTRACTING: &str = r#"{
        "block": "{d[s] = -s dt + 0 dW & s > 1/100}",
        "f": "s*s",
        "lam": "1",
        "p": "1/100",
        "init": {"s": "1/10"},
        "box": {"s": [0.0, 1.0]},
        "grid": 33
    }"#;

    #[test]
    fn a_request_round_trips_from_json() {
        let req = request_from_json(CONTRACTING).unwrap();
        assert_eq!(req.grid, 33);
        assert_eq!(req.lam, parse_rational("1").unwrap());
        assert_eq!(req.init["s"], parse_rational("1/10").unwrap());
        assert_eq!(req.bounds["s"], (0.0, 1.0));
        assert_eq!(req.block.vars, vec!["s".to_string()]);
    }

    #[test]
    fn malformed_fields_are_named() {
        let bad_block = CONTRACTING.replace("{d[s] = -s dt + 0 dW & s > 1/100}", "skip");
        let err = request_from_json(&bad_block).unwrap_err();
        assert!(matches!(err, RequestError::Field { ref field, .. } if field == "block"));

        let bad_init = CONTRACTING.replace("\"1/10\"", "\"one tenth\"");
        let err = request_from_json(&bad_init).unwrap_err();
        assert!(matches!(err, RequestError::Field { ref field, .. } if field == "init.s"));

        let unknown = CONTRACTING.replace("\"grid\": 33", "\"grid\": 33, \"extra\": 1");
        assert!(matches!(request_from_json(&unknown), Err(RequestError::Json(_))));
    }

    #[test]
    fn result_json_is_deterministic_and_typed() {
        let req = request_from_json(CONTRACTING).unwrap();
        let out = check_sde_rule(&req).unwrap();
        let a = result_to_json(&out);
        let b = result_to_json(&out);
        assert_eq!(a, b);
        assert!(a.starts_with("{\"verdict\": \"certified\", \"bound\": 1.0000000000000000e-2"));
        assert!(a.contains("\"lie\": \"-2*s*s\""));
        let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["premises"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn the_report_flags_failures() {
        let mut req = request_from_json(CONTRACTING).unwrap();
        req.p = parse_rational("1/1000").unwrap();
        let out = check_sde_rule(&req).unwrap();
        let report = result_report(&out);
        assert!(report.starts_with("verdict: rejected (premise `initial` failed)"));
        assert!(report.contains("[FAIL] initial"));
        assert!(report.contains("[pass] nonneg"));
    }
}
