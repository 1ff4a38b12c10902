//! Hand-checked systems, random system generators, the SAT reduction and a
//! Markov random-walk baseline.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};

use super::explicit::ExplicitSystem;
use crate::dd::{Manager, Value};
use crate::error::{Error, Result};
use crate::ingest::{pair_key, pair_levels, parse_explicit_system, Circuit, TransitionSystem, WeightSpec};
use crate::random::weighted_choice;
use crate::sampler::Trace;

/// Four states `s0..s3` with transitions s0→s1, s0→s3, s1→s1, s1→s2,
/// s2→s2, s3→s1 and initial state s0.
pub const TOY_JSON: &str = r#"{"k": 2,
  "transitions": [["00","01"], ["00","11"], ["01","01"], ["01","10"], ["10","10"], ["11","01"]],
  "initial": ["00"],
  "final": "all"}
"#;

/// The same system as a circuit with one input `a`:
/// `x0' = (¬x1 ∧ ¬(x0 ∧ a)) ∨ (x1 ∧ x0)`, `x1' = (¬x1 ∧ a) ∨ (x1 ∧ ¬x0)`.
pub const TOY_AAG: &str = "aag 10 1 2 0 7\n2\n4 15\n6 21\n8 4 2\n10 7 9\n12 6 4\n14 11 13\n16 7 2\n18 6 5\n20 17 19\n";

pub fn toy_system() -> TransitionSystem {
    parse_explicit_system(TOY_JSON).expect("fixture parses")
}

/// Toy system with `ŵ(s0, s1) = 2`.
pub fn toy_weighted() -> TransitionSystem {
    toy_system()
        .apply_weights(&WeightSpec {
            entries: vec![(0, 1, Value::from_integer(BigInt::from(2)))],
            default_weight: Value::one(),
        })
        .expect("fixture weights")
}

/// The seven length-4 traces, lexicographically.
pub fn toy_traces() -> Vec<Trace> {
    [
        [0, 1, 1, 1, 1],
        [0, 1, 1, 1, 2],
        [0, 1, 1, 2, 2],
        [0, 1, 2, 2, 2],
        [0, 3, 1, 1, 1],
        [0, 3, 1, 1, 2],
        [0, 3, 1, 2, 2],
    ]
    .iter()
    .map(|s| Trace::new(s.to_vec()))
    .collect()
}

/// Length-1 traces of the result are the models of `table`, a truth table
/// over `n` variables indexed by assignment (bit `j` = `x_{j+1}`).
///
/// States are assignments. Every state steps to the state whose bit 0 is
/// `φ(state)` and whose other bits are 0; all states are initial and the
/// only final state is `1`, so exactly the models reach it in one step.
pub fn sat_to_system(n: u32, table: &[bool]) -> Result<(TransitionSystem, u64)> {
    if n == 0 || n > 20 || table.len() != 1usize << n {
        return Err(Error::Invalid(format!("truth table over {n} variables must have 2^{n} rows")));
    }
    let mut mgr = Manager::new(n, 2, 0);
    let rows: Vec<(u64, Value)> = table
        .iter()
        .enumerate()
        .map(|(s, &phi)| (pair_key(s as u64, phi as u64, n), Value::one()))
        .collect();
    let relation = mgr.from_table(&pair_levels(&mgr), &rows)?;
    let initial = mgr.one();
    let finals = mgr.state_cube(0, 1)?;
    Ok((TransitionSystem::new(mgr, relation, initial, finals)?, 1))
}

/// Parameters of [`random_system`].
#[derive(Debug, Clone, Copy)]
pub struct RandomSystemConfig {
    pub bits: u32,
    /// Probability of each ordered pair being a transition.
    pub density: f64,
    pub weighted: bool,
    /// Every state is final when set; otherwise about half are.
    pub all_final: bool,
}

/// A random explicit system with one or two initial states.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, cfg: RandomSystemConfig) -> TransitionSystem {
    let k = cfg.bits;
    let n = 1u64 << k;
    let weights = [(1, 1), (2, 1), (3, 1), (1, 2), (3, 2)];
    let mut rows = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if rng.gen_bool(cfg.density) {
                let w = if cfg.weighted {
                    let (a, b) = weights[rng.gen_range(0..weights.len())];
                    Value::new(BigInt::from(a), BigInt::from(b))
                } else {
                    Value::one()
                };
                rows.push((pair_key(s, t, k), w));
            }
        }
    }
    let mut initial = vec![rng.gen_range(0..n)];
    if rng.gen_bool(0.5) {
        initial.push(rng.gen_range(0..n));
    }
    let finals: Vec<u64> = if cfg.all_final {
        (0..n).collect()
    } else {
        (0..n).filter(|_| rng.gen_bool(0.5)).collect()
    };
    let mut mgr = Manager::new(k, 2, 0);
    let relation = mgr.from_table(&pair_levels(&mgr), &rows).expect("no node cap");
    let init = mgr.state_set(0, initial).expect("no node cap");
    let fin = mgr.state_set(0, finals).expect("no node cap");
    TransitionSystem::new(mgr, relation, init, fin).expect("valid random system")
}

/// AIGER text of a random sparse circuit: every latch reads itself, a
/// neighbour and one input through a couple of gates.
pub fn random_circuit_aag<R: Rng + ?Sized>(rng: &mut R, latches: u32, inputs: u32) -> String {
    let (ni, nl) = (inputs, latches);
    let input_lit = |i: u32| 2 * (1 + i);
    let latch_lit = |j: u32| 2 * (1 + ni + j);
    let mut gates: Vec<(u32, u32, u32)> = Vec::new();
    let mut next = Vec::new();
    let mut var = 1 + ni + nl;
    for j in 0..nl {
        let neg = |rng: &mut R, lit: u32| lit | rng.gen_range(0..2);
        let own = latch_lit(j);
        let nbr = latch_lit((j + 1 + rng.gen_range(0..2)) % nl);
        let inp = input_lit(rng.gen_range(0..ni.max(1)).min(ni.saturating_sub(1)));
        let a = neg(rng, own);
        let b = neg(rng, nbr);
        let g1 = 2 * var;
        gates.push((g1, a, b));
        var += 1;
        let c = if ni > 0 { neg(rng, inp) } else { neg(rng, own) };
        let g2 = 2 * var;
        gates.push((g2, neg(rng, g1), c));
        var += 1;
        next.push(neg(rng, g2));
    }
    let m = var - 1;
    let mut text = format!("aag {m} {ni} {nl} 0 {}\n", gates.len());
    for i in 0..ni {
        text += &format!("{}\n", input_lit(i));
    }
    for (j, n) in next.iter().enumerate() {
        text += &format!("{} {}\n", latch_lit(j as u32), n);
    }
    for (l, a, b) in gates {
        text += &format!("{l} {a} {b}\n");
    }
    text
}

/// Per-state transition probabilities for a random walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePolicy {
    probs: Vec<Vec<(u64, Value)>>,
}

impl StatePolicy {
    /// Every state with successors must give each of them positive
    /// probability, summing to 1.
    pub fn new(sys: &ExplicitSystem, probs: Vec<Vec<(u64, Value)>>) -> Result<Self> {
        if probs.len() != sys.num_states() {
            return Err(Error::Invalid("policy must cover every state".into()));
        }
        for (s, (row, succ)) in probs.iter().zip(&sys.succ).enumerate() {
            let targets: Vec<u64> = row.iter().map(|(t, _)| *t).collect();
            let expected: Vec<u64> = succ.iter().map(|(t, _)| *t).collect();
            if targets != expected {
                return Err(Error::Invalid(format!("policy of state {s} must list exactly its successors")));
            }
            if row.iter().any(|(_, p)| *p <= Value::zero()) {
                return Err(Error::Invalid(format!("policy of state {s} has a non-positive probability")));
            }
            let sum: Value = row.iter().map(|(_, p)| p.clone()).fold(Value::zero(), |a, b| a + b);
            if !row.is_empty() && !sum.is_one() {
                return Err(Error::Invalid(format!("policy of state {s} sums to {sum}")));
            }
        }
        Ok(StatePolicy { probs })
    }

    pub fn uniform_successors(sys: &ExplicitSystem) -> Self {
        let probs = sys
            .succ
            .iter()
            .map(|row| {
                let p = Value::new(BigInt::one(), BigInt::from(row.len().max(1)));
                row.iter().map(|(t, _)| (*t, p.clone())).collect()
            })
            .collect();
        StatePolicy { probs }
    }

    /// Fair input bits: `Pr[s → t]` is the share of input vectors driving
    /// `s` to `t`.
    pub fn fair_inputs(circuit: &Circuit, sys: &ExplicitSystem) -> Result<Self> {
        let m = circuit.num_inputs() as u32;
        let denom = BigInt::from(1u64 << m);
        let probs = (0..sys.num_states() as u64)
            .map(|s| {
                let mut hits = std::collections::BTreeMap::new();
                for a in 0..(1u64 << m) {
                    *hits.entry(circuit.step(s, a)).or_insert(0u64) += 1;
                }
                hits.into_iter()
                    .map(|(t, c)| (t, Value::new(BigInt::from(c), denom.clone())))
                    .collect()
            })
            .collect();
        Self::new(sys, probs)
    }

    /// The two-parameter policy on the toy system:
    /// `Pr[s0→s1] = c`, `Pr[s1→s1] = d`.
    pub fn toy(sys: &ExplicitSystem, c: Value, d: Value) -> Result<Self> {
        let one = Value::one();
        let probs = vec![
            vec![(1, c.clone()), (3, &one - &c)],
            vec![(1, d.clone()), (2, &one - &d)],
            vec![(2, one.clone())],
            vec![(1, one)],
        ];
        Self::new(sys, probs)
    }

    pub fn row(&self, s: u64) -> &[(u64, Value)] {
        &self.probs[s as usize]
    }
}

/// A trace drawn by independent per-state choices, starting from a uniform
/// initial state. Final states are not targeted.
pub fn markov_walk<R: RngCore + ?Sized>(sys: &ExplicitSystem, policy: &StatePolicy, n: usize, rng: &mut R) -> Result<Trace> {
    let start = sys.initial[rng.gen_range(0..sys.initial.len())];
    let mut states = vec![start];
    for _ in 0..n {
        let row = policy.row(*states.last().expect("nonempty"));
        if row.is_empty() {
            return Err(Error::Invalid(format!("state {} has no successor", states.last().unwrap())));
        }
        let w: Vec<Value> = row.iter().map(|(_, p)| p.clone()).collect();
        states.push(row[weighted_choice(&w, rng)?].0);
    }
    Ok(Trace::new(states))
}

/// Exact probability of `trace` under [`markov_walk`].
pub fn walk_trace_probability(sys: &ExplicitSystem, policy: &StatePolicy, trace: &Trace) -> Value {
    let w = &trace.states;
    if w.is_empty() || !sys.is_initial(w[0]) {
        return Value::zero();
    }
    let start = Value::new(BigInt::one(), BigInt::from(sys.initial.len()));
    w.windows(2).fold(start, |acc, p| {
        let step = policy
            .row(p[0])
            .iter()
            .find(|(t, _)| *t == p[1])
            .map(|(_, q)| q.clone())
            .unwrap_or_else(Value::zero);
        acc * step
    })
}
