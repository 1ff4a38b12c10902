//! Transition systems and the formats they are loaded from.
//!
//! States are `bits`-wide integers: bit `j` of a state is state variable
//! `x_j`. On the wire a state is a fixed-width binary string with `x_{k−1}`
//! leftmost.

mod aiger;
mod explicit;

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::dd::{Diagram, Manager, Value};
use crate::error::{Error, Result};

pub use aiger::{circuit_to_system, parse_aiger_ascii, And, Circuit, Latch};
pub use explicit::{parse_explicit_system, parse_final_states, parse_weight_spec, parse_weight_value, to_explicit_json};

/// A finite transition system over `bits` state variables.
///
/// `relation` lives on copies `X^0` (current) and `X^1` (next); it is 0/1
/// valued for plain systems and carries transition weights otherwise.
/// `initial` and `finals` are stored on copy `X^0`.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    mgr: Manager,
    bits: u32,
    relation: Diagram,
    initial: Diagram,
    finals: Diagram,
}

/// Where the final-state predicate comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FinalStates {
    #[default]
    All,
    States(Vec<u64>),
    /// A circuit output, read with inputs existentially quantified.
    Output(usize),
}

/// Multiplicative transition weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSpec {
    pub entries: Vec<(u64, u64, Value)>,
    /// Weight of every transition not listed in `entries`.
    pub default_weight: Value,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            entries: Vec::new(),
            default_weight: Value::one(),
        }
    }
}

impl TransitionSystem {
    pub fn new(mgr: Manager, relation: Diagram, initial: Diagram, finals: Diagram) -> Result<Self> {
        let bits = mgr.bits();
        if bits == 0 || bits > 32 {
            return Err(Error::Invalid(format!("state width must be in 1..=32, got {bits}")));
        }
        if mgr.support_copies(relation).iter().any(|&c| c > 1) {
            return Err(Error::Invalid("transition relation must only use copies X0 and X1".into()));
        }
        for (name, d) in [("initial", initial), ("final", finals)] {
            if !mgr.is_boolean(d) {
                return Err(Error::Invalid(format!("{name} set must be 0/1 valued")));
            }
            if mgr.support_copies(d).iter().any(|&c| c != 0) {
                return Err(Error::Invalid(format!("{name} set must be stated over copy X0")));
            }
        }
        if !mgr.support_levels(relation).iter().chain(&mgr.support_levels(initial)).all(|&l| l >= mgr.aux_count()) {
            return Err(Error::Invalid("system depends on unquantified inputs".into()));
        }
        if initial == mgr.zero() {
            return Err(Error::Invalid("initial set is empty".into()));
        }
        Ok(TransitionSystem {
            mgr,
            bits,
            relation,
            initial,
            finals,
        })
    }

    pub fn manager(&self) -> &Manager {
        &self.mgr
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn relation(&self) -> Diagram {
        self.relation
    }

    pub fn initial(&self) -> Diagram {
        self.initial
    }

    pub fn finals(&self) -> Diagram {
        self.finals
    }

    pub fn is_weighted(&self) -> bool {
        !self.mgr.is_boolean(self.relation)
    }

    pub fn num_states(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn into_parts(self) -> (Manager, Diagram, Diagram, Diagram) {
        (self.mgr, self.relation, self.initial, self.finals)
    }

    pub fn set_node_limit(&mut self, limit: Option<usize>) {
        self.mgr.set_node_limit(limit);
    }

    /// Weight of the transition `from → to` (0 when absent).
    pub fn transition_weight(&self, from: u64, to: u64) -> Value {
        let bits = self.bits;
        let aux = self.mgr.aux_count();
        self.mgr
            .eval_with(self.relation, |level| {
                let off = level.checked_sub(aux)?;
                let (copy, bit) = (off / bits, off % bits);
                let state = match copy {
                    0 => from,
                    1 => to,
                    _ => return None,
                };
                Some((state >> bit) & 1 == 1)
            })
            .cloned()
            .unwrap_or_else(|_| Value::zero())
    }

    fn state_member(&self, set: Diagram, state: u64) -> bool {
        let bits = self.bits;
        let aux = self.mgr.aux_count();
        self.mgr
            .eval_with(set, |level| {
                let off = level.checked_sub(aux)?;
                (off < bits).then(|| (state >> off) & 1 == 1)
            })
            .map(|v| !v.is_zero())
            .unwrap_or(false)
    }

    pub fn is_initial(&self, state: u64) -> bool {
        self.state_member(self.initial, state)
    }

    pub fn is_final(&self, state: u64) -> bool {
        self.state_member(self.finals, state)
    }

    /// Replaces the final-state predicate with an explicit set.
    pub fn with_final_states(mut self, states: &[u64]) -> Result<Self> {
        check_states(states, self.bits)?;
        self.finals = self.mgr.state_set(0, states.iter().copied())?;
        Ok(self)
    }

    /// Turns the relation into a weight diagram per `spec`.
    pub fn apply_weights(self, spec: &WeightSpec) -> Result<Self> {
        apply_weights(self, spec)
    }
}

pub(crate) fn check_states(states: &[u64], bits: u32) -> Result<()> {
    for &s in states {
        if s >> bits != 0 {
            return Err(Error::Invalid(format!("state {s} does not fit in {bits} bits")));
        }
    }
    Ok(())
}

/// Replaces every transition's weight with the one given by `spec`. The
/// support of the relation is unchanged.
pub fn apply_weights(sys: TransitionSystem, spec: &WeightSpec) -> Result<TransitionSystem> {
    if !spec.default_weight.is_positive() {
        return Err(Error::Invalid("default weight must be positive".into()));
    }
    let mut seen = BTreeSet::new();
    for (from, to, w) in &spec.entries {
        if !w.is_positive() {
            return Err(Error::Invalid(format!("weight of {from}->{to} must be positive")));
        }
        if sys.transition_weight(*from, *to).is_zero() {
            return Err(Error::Invalid(format!(
                "weighted pair {} -> {} is not a transition",
                format_state(*from, sys.bits),
                format_state(*to, sys.bits)
            )));
        }
        if !seen.insert((*from, *to)) {
            return Err(Error::Invalid(format!("duplicate weight for {from}->{to}")));
        }
    }
    let bits = sys.bits;
    let (mut mgr, relation, initial, finals) = sys.into_parts();
    let levels = pair_levels(&mgr);
    let support = mgr.nonzero(relation)?;
    let listed_rows: Vec<(u64, Value)> = spec.entries.iter().map(|(f, t, _)| (pair_key(*f, *t, bits), Value::one())).collect();
    let weighted_rows: Vec<(u64, Value)> = spec.entries.iter().map(|(f, t, w)| (pair_key(*f, *t, bits), w.clone())).collect();
    let listed = mgr.from_table(&levels, &listed_rows)?;
    let unlisted = mgr.not(listed)?;
    let rest = mgr.and(support, unlisted)?;
    let rest = mgr.scale(rest, spec.default_weight.clone())?;
    let explicit = mgr.from_table(&levels, &weighted_rows)?;
    let relation = mgr.sum(rest, explicit)?;
    TransitionSystem::new(mgr, relation, initial, finals)
}

/// Levels of copies `X^0` then `X^1`; bit `j` of a pair key is `levels[j]`.
pub fn pair_levels(mgr: &Manager) -> Vec<u32> {
    let mut levels = mgr.copy_levels(0);
    levels.extend(mgr.copy_levels(1));
    levels
}

pub fn pair_key(from: u64, to: u64, bits: u32) -> u64 {
    from | (to << bits)
}

/// Parses a fixed-width binary state, most significant bit first.
pub fn parse_state(text: &str, bits: u32) -> Result<u64> {
    let t = text.trim();
    if t.len() != bits as usize || !t.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::Invalid(format!("state {t:?} is not a {bits}-bit binary string")));
    }
    Ok(t.bytes().fold(0u64, |acc, b| (acc << 1) | (b - b'0') as u64))
}

pub fn format_state(state: u64, bits: u32) -> String {
    (0..bits).rev().map(|j| if (state >> j) & 1 == 1 { '1' } else { '0' }).collect()
}
