//! Explicit transition-list systems and weight files, both JSON.
//!
//! ```json
//! {"k": 2,
//!  "transitions": [["00","01"], ["00","11","2"], ...],
//!  "initial": ["00"],
//!  "final": "all"}
//! ```
//!
//! A third element on a transition makes the system weighted; it is an
//! integer or a `"p/q"` string. Pairs without one get weight 1.

use std::collections::BTreeSet;
use std::str::FromStr;

use num_traits::{One, Signed};
use serde_json::{json, Value as Json};

use super::{format_state, pair_key, pair_levels, parse_state, TransitionSystem, WeightSpec};
use crate::dd::{Manager, Value};
use crate::error::{Error, Result};

const MINTERM_CAP: usize = 1 << 24;

pub fn parse_weight_value(v: &Json) -> Result<Value> {
    let w = match v {
        Json::Number(n) => match n.as_u64() {
            Some(i) => Value::from_integer(i.into()),
            None => return Err(Error::Invalid(format!("weight {n} must be a nonnegative integer or \"p/q\""))),
        },
        Json::String(s) => Value::from_str(s.trim()).map_err(|_| Error::Invalid(format!("bad rational weight {s:?}")))?,
        other => return Err(Error::Invalid(format!("bad weight {other}"))),
    };
    if !w.is_positive() {
        return Err(Error::Invalid(format!("weight {w} must be positive")));
    }
    Ok(w)
}

fn state_list(v: &Json, bits: u32, what: &str) -> Result<Vec<u64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Invalid(format!("`{what}` must be a list of states")))?;
    arr.iter()
        .map(|s| {
            let s = s
                .as_str()
                .ok_or_else(|| Error::Invalid(format!("`{what}` entries must be strings")))?;
            parse_state(s, bits)
        })
        .collect()
}

/// Parses the explicit JSON system format.
pub fn parse_explicit_system(text: &str) -> Result<TransitionSystem> {
    let doc: Json = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let bits = doc
        .get("k")
        .and_then(Json::as_u64)
        .ok_or_else(|| Error::Invalid("missing integer field `k`".into()))?;
    if bits == 0 || bits > 32 {
        return Err(Error::Invalid(format!("k must be in 1..=32, got {bits}")));
    }
    let bits = bits as u32;
    let transitions = doc
        .get("transitions")
        .and_then(Json::as_array)
        .ok_or_else(|| Error::Invalid("missing list field `transitions`".into()))?;
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(transitions.len());
    for t in transitions {
        let parts = t
            .as_array()
            .filter(|p| p.len() == 2 || p.len() == 3)
            .ok_or_else(|| Error::Invalid(format!("transition {t} must be [from, to] or [from, to, weight]")))?;
        let from = parse_state(parts[0].as_str().unwrap_or(""), bits)?;
        let to = parse_state(parts[1].as_str().unwrap_or(""), bits)?;
        let weight = match parts.get(2) {
            Some(w) => parse_weight_value(w)?,
            None => Value::one(),
        };
        if !seen.insert((from, to)) {
            return Err(Error::Invalid(format!(
                "duplicate transition {} -> {}",
                format_state(from, bits),
                format_state(to, bits)
            )));
        }
        rows.push((pair_key(from, to, bits), weight));
    }
    let initial = state_list(doc.get("initial").unwrap_or(&Json::Null), bits, "initial")?;
    let finals = match doc.get("final") {
        None => None,
        Some(Json::String(s)) if s == "all" => None,
        Some(v) => Some(state_list(v, bits, "final")?),
    };

    let mut mgr = Manager::new(bits, 2, 0);
    let relation = mgr.from_table(&pair_levels(&mgr), &rows)?;
    let init = mgr.state_set(0, initial)?;
    let fin = match finals {
        None => mgr.one(),
        Some(states) => mgr.state_set(0, states)?,
    };
    TransitionSystem::new(mgr, relation, init, fin)
}

/// Serializes a system to the explicit JSON format.
pub fn to_explicit_json(sys: &TransitionSystem) -> Result<String> {
    let mgr = sys.manager();
    let bits = sys.bits();
    let levels = pair_levels(mgr);
    let weighted = sys.is_weighted();
    let mask = (1u64 << bits) - 1;
    let transitions: Vec<Json> = mgr
        .minterms(sys.relation(), &levels, MINTERM_CAP)?
        .into_iter()
        .map(|(key, w)| {
            let (from, to) = (format_state(key & mask, bits), format_state(key >> bits, bits));
            if weighted {
                json!([from, to, w.to_string()])
            } else {
                json!([from, to])
            }
        })
        .collect();
    let states = |d| -> Result<Vec<String>> {
        Ok(mgr
            .minterms(d, &mgr.copy_levels(0), MINTERM_CAP)?
            .into_iter()
            .map(|(s, _)| format_state(s, bits))
            .collect())
    };
    let fin = if sys.finals() == mgr.one() {
        json!("all")
    } else {
        json!(states(sys.finals())?)
    };
    let doc = json!({
        "k": bits,
        "transitions": transitions,
        "initial": states(sys.initial())?,
        "final": fin,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("json"))
}

/// Parses a weight file: `{"default": "1", "entries": [["00","01","2"], ...]}`.
pub fn parse_weight_spec(text: &str, bits: u32) -> Result<WeightSpec> {
    let doc: Json = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let default_weight = match doc.get("default") {
        Some(v) => parse_weight_value(v)?,
        None => Value::one(),
    };
    let mut entries = Vec::new();
    if let Some(list) = doc.get("entries") {
        let list = list
            .as_array()
            .ok_or_else(|| Error::Invalid("`entries` must be a list".into()))?;
        for e in list {
            let parts = e
                .as_array()
                .filter(|p| p.len() == 3)
                .ok_or_else(|| Error::Invalid(format!("weight entry {e} must be [from, to, weight]")))?;
            let from = parse_state(parts[0].as_str().unwrap_or(""), bits)?;
            let to = parse_state(parts[1].as_str().unwrap_or(""), bits)?;
            entries.push((from, to, parse_weight_value(&parts[2])?));
        }
    }
    Ok(WeightSpec {
        entries,
        default_weight,
    })
}

/// Parses a final-state file: binary states separated by whitespace or
/// commas, or a JSON list of such strings.
pub fn parse_final_states(text: &str, bits: u32) -> Result<Vec<u64>> {
    if let Ok(Json::Array(items)) = serde_json::from_str::<Json>(text) {
        return state_list(&Json::Array(items), bits, "final");
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_state(s, bits))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    const TOY: &str = r#"{"k": 2,
        "transitions": [["00","01"],["00","11"],["01","01"],["01","10"],["10","10"],["11","01"]],
        "initial": ["00"], "final": "all"}"#;

    #[test]
    fn toy_relation() {
        let sys = parse_explicit_system(TOY).unwrap();
        assert_eq!(sys.bits(), 2);
        assert!(!sys.is_weighted());
        let edges: Vec<(u64, u64)> = (0..4)
            .flat_map(|s| (0..4).map(move |t| (s, t)))
            .filter(|&(s, t)| sys.transition_weight(s, t) == Value::one())
            .collect();
        assert_eq!(edges, vec![(0, 1), (0, 3), (1, 1), (1, 2), (2, 2), (3, 1)]);
        assert!(sys.is_initial(0) && !sys.is_initial(1));
        assert!((0..4).all(|s| sys.is_final(s)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let wrong_width = r#"{"k":2,"transitions":[["0","01"]],"initial":["00"]}"#;
        assert!(matches!(parse_explicit_system(wrong_width), Err(Error::Invalid(_))));
        let dup = r#"{"k":1,"transitions":[["0","1"],["0","1"]],"initial":["0"]}"#;
        assert!(parse_explicit_system(dup).is_err());
        let nonpos = r#"{"k":1,"transitions":[["0","1","0"]],"initial":["0"]}"#;
        assert!(parse_explicit_system(nonpos).is_err());
        assert!(matches!(parse_explicit_system("{not json"), Err(Error::Parse { .. })));
        let no_init = r#"{"k":1,"transitions":[],"initial":[]}"#;
        assert!(parse_explicit_system(no_init).is_err());
    }

    #[test]
    fn dead_end_states_are_accepted() {
        let text = r#"{"k":2,"transitions":[["00","01"]],"initial":["00"],"final":["01"]}"#;
        let sys = parse_explicit_system(text).unwrap();
        assert!(sys.is_final(1) && !sys.is_final(0));
    }

    #[test]
    fn weighted_entries() {
        let text = r#"{"k":1,"transitions":[["0","1","3/2"],["1","1"],["1","0",4]],"initial":["0"],"final":"all"}"#;
        let sys = parse_explicit_system(text).unwrap();
        assert!(sys.is_weighted());
        assert_eq!(sys.transition_weight(0, 1), Value::new(BigInt::from(3), BigInt::from(2)));
        assert_eq!(sys.transition_weight(1, 0), Value::from_integer(BigInt::from(4)));
        assert_eq!(sys.transition_weight(0, 0), Value::from_integer(BigInt::from(0)));
    }

    #[test]
    fn round_trip_preserves_semantics() {
        let text = r#"{"k":2,"transitions":[["00","01","2"],["01","10"],["11","00","1/3"]],"initial":["00","11"],"final":["10"]}"#;
        let sys = parse_explicit_system(text).unwrap();
        let again = parse_explicit_system(&to_explicit_json(&sys).unwrap()).unwrap();
        for s in 0..4 {
            assert_eq!(sys.is_initial(s), again.is_initial(s));
            assert_eq!(sys.is_final(s), again.is_final(s));
            for t in 0..4 {
                assert_eq!(sys.transition_weight(s, t), again.transition_weight(s, t));
            }
        }
    }

    #[test]
    fn weight_and_final_files() {
        let spec = parse_weight_spec(r#"{"default":"1/2","entries":[["00","01",2]]}"#, 2).unwrap();
        assert_eq!(spec.default_weight, Value::new(BigInt::from(1), BigInt::from(2)));
        assert_eq!(spec.entries, vec![(0, 1, Value::from_integer(BigInt::from(2)))]);
        assert_eq!(parse_final_states("01, 10\n11", 2).unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_final_states(r#"["01"]"#, 2).unwrap(), vec![1]);
        assert!(parse_final_states("012", 3).is_err());
    }
}
