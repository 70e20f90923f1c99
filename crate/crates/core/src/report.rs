//! Deterministic serialization of reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::analysis::Analysis;
use crate::chain::GlobalState;
use crate::error::{PdlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON with sorted keys and a trailing newline. Floats use the
/// shortest representation that round-trips.
pub fn canonical_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&sort_keys(value)).expect("JSON value serializes");
    s.push('\n');
    s
}

fn sort_keys(v: &Value) -> Value {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, Value> = map.iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

/// Prediction, potentials and the class graph of an exact analysis.
pub fn analysis_json(a: &Analysis) -> Value {
    let nodes: Vec<Value> = a
        .graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            json!({
                "label": n.label,
                "states": n.members.len(),
                "recurrent": n.recurrent,
                "contains_d": n.contains_d,
                "potential": a.potentials.gamma[i],
                "outward": a.graph.outward(i),
            })
        })
        .collect();
    json!({
        "prediction": a.prediction,
        "potential_minimizers": a.potential_states.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "paths_agree": a.agree(),
        "chain_states": a.chain.len(),
        "classes": nodes,
    })
}

/// `state,fraction` rows in state order.
pub fn occupancy_csv(occupancy: &BTreeMap<GlobalState, f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "fraction"]).expect("in-memory write");
    for (s, f) in occupancy {
        w.write_record([s.to_string(), f.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Parses an occupancy table back.
pub fn read_occupancy_csv(text: &str) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| PdlError::input(e.to_string()))?;
    if header != vec!["state", "fraction"] {
        return Err(PdlError::input(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| PdlError::input(e.to_string()))?;
            let f = rec[1].parse().map_err(|_| PdlError::input(format!("bad fraction `{}`", &rec[1])))?;
            Ok((rec[0].to_string(), f))
        })
        .collect()
}

/// Serializes a report; CSV takes the occupancy table under `occupancy`.
pub fn emit_report(report: &Value, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => Ok(canonical_json(report).into_bytes()),
        Format::Csv => {
            let table = report
                .get("occupancy")
                .and_then(Value::as_object)
                .ok_or_else(|| PdlError::input("report has no occupancy table"))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["state", "fraction"]).expect("in-memory write");
            for (state, f) in table {
                let f = f.as_f64().ok_or_else(|| PdlError::input(format!("fraction of {state} is not a number")))?;
                w.write_record([state.clone(), f.to_string()]).expect("in-memory write");
            }
            w.into_inner().map_err(|e| PdlError::internal(e.to_string()))
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PdlError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| PdlError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures;
    use crate::params::PolicyParams;
    use crate::policy::Policy;
    use crate::sim::{run_itel, SimParams};

    #[test]
    fn keys_are_sorted_at_every_depth() {
        let v = json!({"b": 1, "a": {"z": [{"y": 1, "x": 2}], "c": 0.1}});
        let text = canonical_json(&v);
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(text.find("\"x\"").unwrap() < text.find("\"y\"").unwrap());
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn analysis_json_lists_classes() {
        let a = crate::analysis::analyze(&fixtures::g1(), crate::policy::Algorithm::Itel, &PolicyParams::default(), false, None).unwrap();
        let v = analysis_json(&a);
        assert_eq!(v["classes"].as_array().unwrap().len(), 5);
        assert_eq!(v["paths_agree"], json!(true));
        assert_eq!(v["prediction"]["case"], json!("equilibria"));
    }

    #[test]
    fn identical_runs_give_identical_bytes() {
        let g = fixtures::g2();
        let policy = Policy::itel(PolicyParams::default());
        let p = SimParams::new(0.1, 2_000, 5);
        let a = emit_report(&run_itel(&g, &policy, &p).unwrap().to_json(), Format::Json).unwrap();
        let b = emit_report(&run_itel(&g, &policy, &p).unwrap().to_json(), Format::Json).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn occupancy_csv_round_trips() {
        let g = fixtures::g1();
        let r = run_itel(&g, &Policy::itel(PolicyParams::default()), &SimParams::new(0.1, 5_000, 2)).unwrap();
        let text = occupancy_csv(&r.occupancy());
        assert!(text.starts_with("state,fraction\n"));
        let rows = read_occupancy_csv(&text).unwrap();
        assert_eq!(rows.len(), r.counts.len());
        assert!((rows.iter().map(|(_, f)| f).sum::<f64>() - 1.0).abs() < 1e-9);
        let from_report = emit_report(&r.to_json(), Format::Csv).unwrap();
        let rows2 = read_occupancy_csv(std::str::from_utf8(&from_report).unwrap()).unwrap();
        assert!((rows2.iter().map(|(_, f)| f).sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
