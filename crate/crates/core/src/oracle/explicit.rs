//! Explicit-state ground truth: adjacency lists pulled out of the relation
//! diagram once, then plain loops from there on.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::dd::Value;
use crate::error::{Error, Result};
use crate::ingest::{pair_levels, TransitionSystem};
use crate::sampler::Trace;

/// Refuses to expand relations with more transitions than this.
pub const DEFAULT_EXTRACT_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitSystem {
    pub bits: u32,
    /// Successors of every state with their weights, ascending.
    pub succ: Vec<Vec<(u64, Value)>>,
    pub initial: Vec<u64>,
    pub finals: Vec<bool>,
}

impl ExplicitSystem {
    pub fn from_system(sys: &TransitionSystem, cap: usize) -> Result<Self> {
        let mgr = sys.manager();
        let bits = sys.bits();
        if bits > 20 {
            return Err(Error::Invalid(format!("{bits}-bit systems are too wide to expand")));
        }
        let n = 1usize << bits;
        let mask = (1u64 << bits) - 1;
        let mut succ = vec![Vec::new(); n];
        let minterms = mgr.minterms(sys.relation(), &pair_levels(mgr), cap).map_err(|e| match e {
            crate::dd::DdError::EnumerationCap { cap } => Error::EnumerationCap { cap },
            other => Error::Dd(other),
        })?;
        for (key, w) in minterms {
            succ[(key & mask) as usize].push((key >> bits, w));
        }
        for list in &mut succ {
            list.sort_by_key(|(t, _)| *t);
        }
        let states = |d| -> Result<Vec<u64>> {
            Ok(mgr
                .minterms(d, &mgr.copy_levels(0), n)?
                .into_iter()
                .map(|(s, _)| s)
                .collect())
        };
        let mut initial = states(sys.initial())?;
        initial.sort_unstable();
        let mut finals = vec![false; n];
        for s in states(sys.finals())? {
            finals[s as usize] = true;
        }
        Ok(ExplicitSystem {
            bits,
            succ,
            initial,
            finals,
        })
    }

    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    /// `ŵ(s, t)`, zero off the relation.
    pub fn weight(&self, s: u64, t: u64) -> Value {
        self.succ[s as usize]
            .binary_search_by_key(&t, |(u, _)| *u)
            .map(|i| self.succ[s as usize][i].1.clone())
            .unwrap_or_else(|_| Value::zero())
    }

    pub fn is_initial(&self, s: u64) -> bool {
        self.initial.binary_search(&s).is_ok()
    }

    /// Product of transition weights, or zero when `trace` is not a trace.
    pub fn trace_weight(&self, trace: &Trace) -> Value {
        let w = &trace.states;
        if w.is_empty() || w.iter().any(|&s| s as usize >= self.num_states()) {
            return Value::zero();
        }
        if !self.is_initial(w[0]) || !self.finals[*w.last().expect("nonempty") as usize] {
            return Value::zero();
        }
        w.windows(2).fold(Value::one(), |acc, p| acc * self.weight(p[0], p[1]))
    }

    /// `can[r][s]`: some path of exactly `r` steps leads from `s` to a final state.
    fn can_finish(&self, n: usize) -> Vec<Vec<bool>> {
        let mut can = vec![self.finals.clone()];
        for r in 1..=n {
            let prev = &can[r - 1];
            let row = self
                .succ
                .iter()
                .map(|list| list.iter().any(|(t, _)| prev[*t as usize]))
                .collect();
            can.push(row);
        }
        can
    }
}

/// All length-`n` traces in lexicographic order.
pub fn enumerate_traces(sys: &ExplicitSystem, n: usize, cap: usize) -> Result<Vec<Trace>> {
    let can = sys.can_finish(n);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n + 1);
    for &s in &sys.initial {
        if can[n][s as usize] {
            prefix.push(s);
            extend(sys, &can, n, &mut prefix, &mut out, cap)?;
            prefix.pop();
        }
    }
    Ok(out)
}

fn extend(sys: &ExplicitSystem, can: &[Vec<bool>], n: usize, prefix: &mut Vec<u64>, out: &mut Vec<Trace>, cap: usize) -> Result<()> {
    if prefix.len() == n + 1 {
        if out.len() >= cap {
            return Err(Error::EnumerationCap { cap });
        }
        out.push(Trace::new(prefix.clone()));
        return Ok(());
    }
    let remaining = n + 1 - prefix.len();
    let last = *prefix.last().expect("nonempty") as usize;
    for (t, _) in &sys.succ[last] {
        if can[remaining - 1][*t as usize] {
            prefix.push(*t);
            extend(sys, can, n, prefix, out, cap)?;
            prefix.pop();
        }
    }
    Ok(())
}

/// `ρ(s → t)` over paths of exactly `len` steps, by forward dynamic programming.
pub fn brute_path_count(sys: &ExplicitSystem, s: u64, t: u64, len: u64) -> Value {
    let mut row = vec![Value::zero(); sys.num_states()];
    row[s as usize] = Value::one();
    for _ in 0..len {
        let mut next = vec![Value::zero(); sys.num_states()];
        for (u, mass) in row.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (v, w) in &sys.succ[u] {
                next[*v as usize] += mass * w;
            }
        }
        row = next;
    }
    row.swap_remove(t as usize)
}

/// Dense square matrix of exact values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMatrix {
    pub n: usize,
    pub entries: Vec<Value>,
}

impl PathMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Value::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = Value::one();
        }
        PathMatrix { n, entries }
    }

    pub fn adjacency(sys: &ExplicitSystem) -> Self {
        let n = sys.num_states();
        let mut entries = vec![Value::zero(); n * n];
        for (s, list) in sys.succ.iter().enumerate() {
            for (t, w) in list {
                entries[s * n + *t as usize] = w.clone();
            }
        }
        PathMatrix { n, entries }
    }

    pub fn get(&self, s: u64, t: u64) -> &Value {
        &self.entries[s as usize * self.n + t as usize]
    }

    pub fn mul(&self, other: &PathMatrix) -> PathMatrix {
        let n = self.n;
        let mut entries = vec![Value::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.entries[k * n + j];
                    if !b.is_zero() {
                        entries[i * n + j] += a * b;
                    }
                }
            }
        }
        PathMatrix { n, entries }
    }
}

/// `ρ` for paths of exactly `len` steps, by repeated squaring of the
/// adjacency matrix.
pub fn path_count_matrix(sys: &ExplicitSystem, len: u64) -> PathMatrix {
    let mut result = PathMatrix::identity(sys.num_states());
    let mut base = PathMatrix::adjacency(sys);
    let mut e = len;
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.mul(&base);
        }
    }
    result
}

/// Exact weight of every trace, keyed by trace.
pub fn exact_trace_distribution(sys: &ExplicitSystem, n: usize, cap: usize) -> Result<BTreeMap<Trace, Value>> {
    let traces = enumerate_traces(sys, n, cap)?;
    let weights: Vec<Value> = traces.iter().map(|t| sys.trace_weight(t)).collect();
    let total: Value = weights.iter().cloned().fold(Value::zero(), |a, b| a + b);
    if total.is_zero() {
        return Ok(BTreeMap::new());
    }
    Ok(traces.into_iter().zip(weights).map(|(t, w)| (t, w / &total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixtures::{toy_system, toy_traces};
    use num_bigint::BigInt;

    fn int(v: i64) -> Value {
        Value::from_integer(BigInt::from(v))
    }

    #[test]
    fn toy_enumeration() {
        let ex = ExplicitSystem::from_system(&toy_system(), DEFAULT_EXTRACT_CAP).unwrap();
        assert_eq!(enumerate_traces(&ex, 4, 100).unwrap(), toy_traces());
        assert_eq!(enumerate_traces(&ex, 3, 100).unwrap().len(), 5);
        assert!(matches!(enumerate_traces(&ex, 4, 6), Err(Error::EnumerationCap { cap: 6 })));
    }

    #[test]
    fn path_counts_two_ways() {
        let ex = ExplicitSystem::from_system(&toy_system(), DEFAULT_EXTRACT_CAP).unwrap();
        assert_eq!(brute_path_count(&ex, 0, 1, 2), int(2));
        for len in 0..6 {
            let m = path_count_matrix(&ex, len);
            for s in 0..4 {
                for t in 0..4 {
                    assert_eq!(&brute_path_count(&ex, s, t, len), m.get(s, t));
                }
            }
        }
        for s in 0..4 {
            for t in 0..4 {
                assert!(brute_path_count(&ex, s, t, 0) <= int(1));
            }
        }
    }

    #[test]
    fn chain_has_single_trace() {
        let text = r#"{"k":1,"transitions":[["0","1"],["1","0"]],"initial":["0"],"final":"all"}"#;
        let ex = ExplicitSystem::from_system(&crate::ingest::parse_explicit_system(text).unwrap(), 16).unwrap();
        assert_eq!(enumerate_traces(&ex, 1, 10).unwrap(), vec![Trace::new(vec![0, 1])]);
    }
}
