//! Deterministic file formats for simulation artifacts.
//!
//! Every float is printed with 17 significant digits, so records round-trip
//! binary64 exactly and byte-identical reruns are a testable property.

use std::collections::BTreeMap;

use crate::exec::{ExitKind, Flow, RunRecord, TimedItem};
use crate::jsonfmt::{escape, fmt_f64};

/// One run as a JSON document: seed, exit kind, final state, communication
/// trace, and the recorded flow (time, variable values, trace length per
/// point — readiness bookkeeping is not serialized).
pub fn record_json(r: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str("{\"seed\": ");
    out.push_str(&r.seed.to_string());
    out.push_str(", \"exit\": \"");
    out.push_str(r.exit.as_str());
    out.push_str("\", \"final\": {\"now\": ");
    out.push_str(&fmt_f64(r.final_state.now));
    out.push_str(", \"vals\": {");
    for (i, (name, value)) in r.final_state.vals.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(&escape(name));
        out.push_str("\": ");
        out.push_str(&fmt_f64(*value));
    }
    out.push_str("}}, \"trace\": [");
    for (i, item) in r.trace.items().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            TimedItem::Comm { chan, value, time } => {
                out.push_str("{\"chan\": \"");
                out.push_str(&escape(chan));
                out.push_str("\", \"value\": ");
                out.push_str(&fmt_f64(*value));
                out.push_str(", \"time\": ");
                out.push_str(&fmt_f64(*time));
                out.push('}');
            }
            TimedItem::Internal { time } => {
                out.push_str("{\"tau\": true, \"time\": ");
                out.push_str(&fmt_f64(*time));
                out.push('}');
            }
        }
    }
    out.push_str("], \"flow\": {\"vars\": [");
    for (i, v) in r.flow.vars.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(&escape(v));
        out.push('"');
    }
    out.push_str("], \"points\": [");
    for (i, p) in r.flow.points.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str("{\"time\": ");
        out.push_str(&fmt_f64(p.time));
        out.push_str(", \"vals\": [");
        for (j, v) in p.vals.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            out.push_str(&fmt_f64(*v));
        }
        out.push_str("], \"tr_len\": ");
        out.push_str(&p.tr_len.to_string());
        out.push('}');
    }
    out.push_str("]}}");
    out
}

/// The flow as CSV: `time,<vars...>,tr_len`, one row per recorded point.
pub fn flow_csv(flow: &Flow) -> String {
    let mut out = String::from("time");
    for v in &flow.vars {
        out.push(',');
        out.push_str(v);
    }
    out.push_str(",tr_len\n");
    for p in &flow.points {
        out.push_str(&fmt_f64(p.time));
        for v in &p.vals {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&p.tr_len.to_string());
        out.push('\n');
    }
    out
}

/// The index for a batch of runs: parameters, per-exit counts, file list,
/// and any per-run failures.
pub fn index_json(
    runs: usize,
    seed: u64,
    dt: f64,
    t_max: f64,
    files: &[String],
    exits: &BTreeMap<&'static str, usize>,
    errors: &[(usize, String)],
) -> String {
    let mut out = String::new();
    out.push_str("{\"runs\": ");
    out.push_str(&runs.to_string());
    out.push_str(", \"seed\": ");
    out.push_str(&seed.to_string());
    out.push_str(", \"dt\": ");
    out.push_str(&fmt_f64(dt));
    out.push_str(", \"tmax\": ");
    out.push_str(&fmt_f64(t_max));
    out.push_str(", \"exits\": {");
    for (i, (kind, count)) in exits.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(kind);
        out.push_str("\": ");
        out.push_str(&count.to_string());
    }
    out.push_str("}, \"files\": [");
    for (i, f) in files.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(&escape(f));
        out.push('"');
    }
    out.push_str("], \"errors\": [");
    for (i, (run, message)) in errors.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str("{\"run\": ");
        out.push_str(&run.to_string());
        out.push_str(", \"error\": \"");
        out.push_str(&escape(message));
        out.push_str("\"}");
    }
    out.push_str("]}");
    out
}

/// Exit-kind histogram for the index.
pub fn tally_exits(kinds: &[ExitKind]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for k in kinds {
        *out.entry(k.as_str()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{run, RunConfig};
    use crate::syntax::parse;
    use std::collections::BTreeMap;

    #[test]
    fn record_json_is_valid_and_stable() {
        let p = parse("x := 5").unwrap();
        let record = run(&p, &BTreeMap::new(), 7, &RunConfig::default()).unwrap();
        let a = record_json(&record);
        assert_eq!(a, record_json(&record));
        let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["seed"], 7);
        assert_eq!(parsed["exit"], "terminated");
        assert_eq!(parsed["final"]["vals"]["x"], 5.0);
    }

    #[test]
    fn trace_items_serialize_both_kinds() {
        let p = parse("c!3 || c?x").unwrap();
        let record = run(&p, &BTreeMap::new(), 1, &RunConfig::default()).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&record_json(&record)).unwrap();
        let trace = parsed["trace"].as_array().unwrap();
        assert!(trace.iter().any(|t| t["chan"] == "c" && t["value"] == 3.0));
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let p = parse("{d[s] = 1 dt + 0 dW & s < 1}").unwrap();
        let init = [("s".to_string(), 0.0)].into_iter().collect();
        let record = run(&p, &init, 3, &RunConfig::default()).unwrap();
        let csv = flow_csv(&record.flow);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,s,tr_len"));
        assert_eq!(lines.count(), record.flow.points.len());
    }

    #[test]
    fn index_reports_counts_and_errors() {
        let exits = tally_exits(&[ExitKind::Terminated, ExitKind::Timeout, ExitKind::Terminated]);
        let json = index_json(
            3,
            42,
            1e-3,
            10.0,
            &["run_00000.json".into()],
            &exits,
            &[(2, "boom".into())],
        );
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["exits"]["terminated"], 2);
        assert_eq!(parsed["errors"][0]["run"], 2);
    }
}
