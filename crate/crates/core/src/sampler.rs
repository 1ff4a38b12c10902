//! Top-down trace sampling over a ladder.
//!
//! The top diagram yields `ω[0]`, `ω[N/2]` and `ω[N]` together. Every
//! segment `[lo, hi]` of length `2^i` then gets its midpoint from `t_i`
//! cofactored by `ω[lo]` and `ω[hi]`, and both halves recurse. Each draw is
//! a leaf-to-root path of a [`SamplingView`], so a midpoint `m` is chosen
//! with probability exactly `t_i(lo, m, hi) / Σ_m t_i(lo, m, hi)`.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use num_traits::{One, Zero};
use rand::RngCore;
use rustc_hash::FxHashMap;

use crate::dd::{SamplingView, Value, VarId, VarKind};
use crate::error::{Error, Result};
use crate::ingest::{format_state, parse_state, TransitionSystem};
use crate::ladder::{Ladder, SamplingPlan};
use crate::random::rng_for_stream;

pub use crate::random::weighted_choice;

/// `N + 1` states, `ω[0]` first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace {
    pub states: Vec<u64>,
}

impl Trace {
    pub fn new(states: Vec<u64>) -> Self {
        Trace { states }
    }

    /// Number of transitions.
    pub fn length(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Wire format: comma-separated binary states.
    pub fn to_line(&self, bits: u32) -> String {
        self.states
            .iter()
            .map(|&s| format_state(s, bits))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_line(line: &str, bits: u32) -> Result<Self> {
        let states = line
            .trim()
            .split(',')
            .map(|s| parse_state(s, bits))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trace { states })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TracePosition {
    pub state_index: u64,
    pub bit: u32,
}

/// Where a variable of `t_i` lands in the trace for the segment `[lo, hi]`.
pub fn get_trace_position(var: VarId, i: u32, lo: u64, hi: u64) -> Result<TracePosition> {
    let state_index = if var.copy == 0 {
        lo
    } else if var.copy == i {
        (lo + hi) / 2
    } else if var.copy == i + 1 {
        hi
    } else {
        return Err(Error::Internal(format!("variable {var} does not belong to step {i}")));
    };
    Ok(TracePosition {
        state_index,
        bit: var.bit,
    })
}

/// Number of traces, or their total weight.
pub fn count_traces(ladder: &Ladder) -> Result<Value> {
    ladder.count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    Length { expected: usize, found: usize },
    Width { index: usize },
    NotInitial,
    NotFinal,
    NoTransition { step: usize },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::Length { expected, found } => write!(f, "trace has {found} states, expected {expected}"),
            TraceViolation::Width { index } => write!(f, "state {index} is wider than the system"),
            TraceViolation::NotInitial => write!(f, "first state is not initial"),
            TraceViolation::NotFinal => write!(f, "last state is not final"),
            TraceViolation::NoTransition { step } => write!(f, "no transition between states {step} and {}", step + 1),
        }
    }
}

/// Checks that `trace` is a length-`n` trace of `sys`.
pub fn validate_trace(sys: &TransitionSystem, trace: &Trace, n: u64) -> std::result::Result<(), TraceViolation> {
    let w = &trace.states;
    if w.len() as u64 != n + 1 {
        return Err(TraceViolation::Length {
            expected: n as usize + 1,
            found: w.len(),
        });
    }
    if let Some(index) = w.iter().position(|&s| s >> sys.bits() != 0) {
        return Err(TraceViolation::Width { index });
    }
    if !sys.is_initial(w[0]) {
        return Err(TraceViolation::NotInitial);
    }
    if !sys.is_final(w[w.len() - 1]) {
        return Err(TraceViolation::NotFinal);
    }
    match w.windows(2).position(|p| sys.transition_weight(p[0], p[1]).is_zero()) {
        Some(step) => Err(TraceViolation::NoTransition { step }),
        None => Ok(()),
    }
}

/// Draws traces from one ladder. Cofactor views are cached per
/// `(i, ω[lo], ω[hi])`; the cache is dropped whenever it grows past its cap.
pub struct Sampler<'a> {
    ladder: &'a Ladder,
    total: Value,
    top: Rc<SamplingView>,
    cache: FxHashMap<(u32, u64, u64), Rc<SamplingView>>,
    cache_cap: usize,
    check_frames: bool,
    frame_checks: u64,
}

const DEFAULT_CACHE_CAP: usize = 1 << 14;

impl<'a> Sampler<'a> {
    pub fn new(ladder: &'a Ladder) -> Result<Self> {
        let total = ladder.count()?;
        if total.is_zero() {
            return Err(Error::NoTrace);
        }
        let copies: BTreeSet<u32> = ladder.top_copies().into_iter().collect();
        let top = ladder.manager().build_sampling_view(ladder.top(), &copies)?;
        Ok(Sampler {
            ladder,
            total,
            top: Rc::new(top),
            cache: FxHashMap::default(),
            cache_cap: DEFAULT_CACHE_CAP,
            check_frames: false,
            frame_checks: 0,
        })
    }

    pub fn with_cache_cap(mut self, cap: usize) -> Self {
        self.cache_cap = cap.max(1);
        self
    }

    /// Fails the draw if a restricted ladder ever cofactors by a state
    /// outside its reachable frame.
    pub fn with_frame_checks(mut self, on: bool) -> Self {
        self.check_frames = on;
        self
    }

    /// Number of frame memberships verified so far.
    pub fn frame_checks(&self) -> u64 {
        self.frame_checks
    }

    pub fn total(&self) -> &Value {
        &self.total
    }

    pub fn cached_views(&self) -> usize {
        self.cache.len()
    }

    pub fn draw_sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<Trace> {
        let n = self.ladder.length();
        let depth = self.ladder.depth();
        let mut w = vec![0u64; n as usize + 1];
        let top = Rc::clone(&self.top);
        self.write_view_sample(&top, depth, 0, n, &mut w, rng)?;
        if depth > 0 {
            self.check_frame(depth, 0, n, &w)?;
            self.draw_sample_rec(depth - 1, 0, n / 2, &mut w, rng)?;
            self.draw_sample_rec(depth - 1, n / 2, n, &mut w, rng)?;
        }
        Ok(Trace { states: w })
    }

    /// Fills `ω` strictly between `lo` and `hi`; `hi − lo = 2^i`.
    pub fn draw_sample_rec<R: RngCore + ?Sized>(&mut self, i: u32, lo: u64, hi: u64, w: &mut [u64], rng: &mut R) -> Result<()> {
        if hi - lo <= 1 {
            return Ok(());
        }
        let mid = (lo + hi) / 2;
        self.sample_from_add(i, lo, hi, w, rng)?;
        self.check_frame(i, lo, hi, w)?;
        self.draw_sample_rec(i - 1, lo, mid, w, rng)?;
        self.draw_sample_rec(i - 1, mid, hi, w, rng)
    }

    /// Samples `ω[mid]` from `t_i` with `ω[lo]` and `ω[hi]` substituted.
    pub fn sample_from_add<R: RngCore + ?Sized>(&mut self, i: u32, lo: u64, hi: u64, w: &mut [u64], rng: &mut R) -> Result<()> {
        let key = (i, w[lo as usize], w[hi as usize]);
        let view = match self.cache.get(&key) {
            Some(v) => Rc::clone(v),
            None => {
                let v = Rc::new(cofactor_view(self.ladder, i, key.1, key.2)?);
                if self.cache.len() >= self.cache_cap {
                    self.cache.clear();
                }
                self.cache.insert(key, Rc::clone(&v));
                v
            }
        };
        self.write_view_sample(&view, i, lo, hi, w, rng)
    }

    fn write_view_sample<R: RngCore + ?Sized>(&self, view: &SamplingView, i: u32, lo: u64, hi: u64, w: &mut [u64], rng: &mut R) -> Result<()> {
        let bits = view.sample(rng)?;
        let mgr = self.ladder.manager();
        for (&level, &b) in view.free_levels().iter().zip(&bits) {
            let var = match mgr.var_at(level) {
                Some(VarKind::State(v)) => v,
                _ => return Err(Error::Internal(format!("free level {level} is not a state variable"))),
            };
            let pos = get_trace_position(var, i, lo, hi)?;
            let s = &mut w[pos.state_index as usize];
            if b {
                *s |= 1 << pos.bit;
            } else {
                *s &= !(1 << pos.bit);
            }
        }
        Ok(())
    }

    fn check_frame(&mut self, i: u32, lo: u64, hi: u64, w: &[u64]) -> Result<()> {
        if !self.check_frames {
            return Ok(());
        }
        let Some(frames) = self.ladder.frames() else {
            return Ok(());
        };
        let mid = (lo + hi) / 2;
        let (s_lo, s_mid) = (w[lo as usize], w[mid as usize]);
        self.frame_checks += 2;
        if !self.ladder.frame_contains(frames.alpha[i as usize - 1], s_lo) {
            return Err(Error::Internal(format!("state {s_lo} at position {lo} lies outside alpha[{}]", i - 1)));
        }
        if !self.ladder.frame_contains(frames.beta[i as usize - 1], s_mid) {
            return Err(Error::Internal(format!("state {s_mid} at position {mid} lies outside beta[{}]", i - 1)));
        }
        Ok(())
    }
}

/// View of `t_i` over its midpoint copy with both endpoints fixed.
fn cofactor_view(ladder: &Ladder, i: u32, lo_state: u64, hi_state: u64) -> Result<SamplingView> {
    let mgr = ladder.manager();
    let binding = [(0, lo_state), (i + 1, hi_state)];
    let view = SamplingView::new(mgr, ladder.step(i), &mgr.copy_levels(i), ladder.binding(&binding))?;
    if view.leaf_mass().is_zero() {
        return Err(Error::Internal(format!(
            "step {i} reduced to zero between states {lo_state} and {hi_state}"
        )));
    }
    Ok(view)
}

/// A single trace.
pub fn draw_sample<R: RngCore + ?Sized>(ladder: &Ladder, rng: &mut R) -> Result<Trace> {
    Sampler::new(ladder)?.draw_sample(rng)
}

/// `n` traces from one generator.
pub fn sample_many<R: RngCore + ?Sized>(ladder: &Ladder, n: usize, rng: &mut R) -> Result<Vec<Trace>> {
    let mut sampler = Sampler::new(ladder)?;
    (0..n).map(|_| sampler.draw_sample(rng)).collect()
}

/// `n` traces where trace `j` uses stream `j` of `seed`, so the output does
/// not depend on `jobs`.
pub fn sample_streams(ladder: &Ladder, n: usize, seed: u64, jobs: usize) -> Result<Vec<Trace>> {
    let jobs = jobs.clamp(1, n.max(1));
    let chunk = n.div_ceil(jobs).max(1);
    let ranges: Vec<(usize, usize)> = (0..n).step_by(chunk).map(|s| (s, (s + chunk).min(n))).collect();
    let run = |(start, end): (usize, usize)| -> Result<Vec<Trace>> {
        let mut sampler = Sampler::new(ladder)?;
        (start..end)
            .map(|j| sampler.draw_sample(&mut rng_for_stream(seed, j as u64)))
            .collect()
    };
    if ranges.len() <= 1 {
        return Ok(ranges.into_iter().map(run).collect::<Result<Vec<_>>>()?.concat());
    }
    let parts = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges.iter().map(|&r| scope.spawn(move || run(r))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("sampling thread panicked".into()))))
            .collect::<Result<Vec<_>>>()
    })?;
    if n > 0 && parts.is_empty() {
        return Err(Error::NoTrace);
    }
    Ok(parts.concat())
}

/// Exact probability that the sampler returns `trace`, from ladder values
/// alone. Zero for anything that is not a trace.
pub fn analytic_trace_probability(ladder: &Ladder, trace: &Trace) -> Result<Value> {
    let n = ladder.length();
    let w = &trace.states;
    if w.len() as u64 != n + 1 || w.iter().any(|&s| s >> ladder.bits() != 0) {
        return Ok(Value::zero());
    }
    let total = ladder.count()?;
    if total.is_zero() {
        return Ok(Value::zero());
    }
    let depth = ladder.depth();
    let top_binding: Vec<(u32, u64)> = if depth == 0 {
        vec![(0, w[0]), (1, w[1])]
    } else {
        vec![(0, w[0]), (depth, w[n as usize / 2]), (depth + 1, w[n as usize])]
    };
    let mut p = ladder.eval_at(ladder.top(), &top_binding) / total;
    if depth > 0 && !p.is_zero() {
        p *= segment_probability(ladder, depth - 1, 0, n / 2, w)?;
        if !p.is_zero() {
            p *= segment_probability(ladder, depth - 1, n / 2, n, w)?;
        }
    }
    Ok(p)
}

fn segment_probability(ladder: &Ladder, i: u32, lo: u64, hi: u64, w: &[u64]) -> Result<Value> {
    if hi - lo <= 1 {
        return Ok(Value::one());
    }
    let mid = (lo + hi) / 2;
    let (s_lo, s_mid, s_hi) = (w[lo as usize], w[mid as usize], w[hi as usize]);
    let num = ladder.step_value(i, s_lo, s_mid, s_hi);
    if num.is_zero() {
        return Ok(Value::zero());
    }
    let den = ladder.sum_copy(ladder.step(i), i, &[(0, s_lo), (i + 1, s_hi)])?;
    let mut p = num / den;
    p *= segment_probability(ladder, i - 1, lo, mid, w)?;
    if !p.is_zero() {
        p *= segment_probability(ladder, i - 1, mid, hi, w)?;
    }
    Ok(p)
}

/// Traces of the original system, projected from a [`SamplingPlan`].
pub fn plan_sample_streams(plan: &SamplingPlan, n: usize, seed: u64, jobs: usize) -> Result<Vec<Trace>> {
    let raw = sample_streams(&plan.ladder, n, seed, jobs)?;
    Ok(raw
        .into_iter()
        .map(|t| Trace::new(plan.projection.project(&t.states)))
        .collect())
}

/// Probability that a plan yields `trace` of the original system.
pub fn plan_trace_probability(plan: &SamplingPlan, trace: &Trace) -> Result<Value> {
    let proj = &plan.projection;
    if trace.states.len() as u64 != proj.length + 1 || trace.states.iter().any(|&s| s >> proj.bits != 0) {
        return Ok(Value::zero());
    }
    analytic_trace_probability(&plan.ladder, &Trace::new(proj.lift(&trace.states)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_explicit_system, WeightSpec};
    use crate::ladder::{make_adds, Mode};
    use crate::random::rng_from_seed;
    use num_bigint::BigInt;
    use std::collections::BTreeMap;

    const TOY: &str = r#"{"k":2,"transitions":[["00","01"],["00","11"],["01","01"],["01","10"],["10","10"],["11","01"]],"initial":["00"],"final":"all"}"#;

    fn q(n: i64, d: i64) -> Value {
        Value::new(BigInt::from(n), BigInt::from(d))
    }

    fn toy_traces() -> Vec<Trace> {
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

    #[test]
    fn trace_positions() {
        assert_eq!(get_trace_position(VarId::new(0, 0), 2, 0, 4).unwrap(), TracePosition { state_index: 0, bit: 0 });
        assert_eq!(get_trace_position(VarId::new(2, 3), 2, 4, 8).unwrap(), TracePosition { state_index: 6, bit: 3 });
        assert_eq!(get_trace_position(VarId::new(3, 1), 2, 4, 8).unwrap(), TracePosition { state_index: 8, bit: 1 });
        assert!(get_trace_position(VarId::new(5, 0), 2, 0, 4).is_err());
    }

    #[test]
    fn toy_exact_probabilities() {
        let sys = parse_explicit_system(TOY).unwrap();
        for mode in [Mode::Plain, Mode::Restricted] {
            let l = Ladder::build(&sys, 4, mode).unwrap();
            for t in toy_traces() {
                assert_eq!(analytic_trace_probability(&l, &t).unwrap(), q(1, 7));
            }
            assert!(analytic_trace_probability(&l, &Trace::new(vec![0, 1, 1, 3, 1])).unwrap().is_zero());
            assert!(analytic_trace_probability(&l, &Trace::new(vec![0, 1, 1])).unwrap().is_zero());
        }
    }

    #[test]
    fn weighted_toy() {
        let sys = parse_explicit_system(TOY)
            .unwrap()
            .apply_weights(&WeightSpec {
                entries: vec![(0, 1, q(2, 1))],
                default_weight: q(1, 1),
            })
            .unwrap();
        let l = make_adds(&sys, 4).unwrap();
        assert_eq!(count_traces(&l).unwrap(), q(11, 1));
        let probs: Vec<Value> = toy_traces().iter().map(|t| analytic_trace_probability(&l, t).unwrap()).collect();
        assert_eq!(probs, [2, 2, 2, 2, 1, 1, 1].map(|v| q(v, 11)).to_vec());
    }

    #[test]
    fn top_triple_probability() {
        // (s0, s1, s1) at positions 0, 2, 4 has weight ρ1(s0→s1)·ρ1(s1→s1) = 2·1
        let sys = parse_explicit_system(TOY).unwrap();
        let l = make_adds(&sys, 4).unwrap();
        assert_eq!(l.eval_at(l.top(), &[(0, 0), (2, 1), (3, 1)]) / l.count().unwrap(), q(2, 7));
    }

    #[test]
    fn conditional_midpoint_given_endpoints() {
        let sys = parse_explicit_system(TOY).unwrap();
        let l = make_adds(&sys, 4).unwrap();
        let mut sampler = Sampler::new(&l).unwrap();
        let mut rng = rng_from_seed(11);
        let mut seen = BTreeMap::new();
        for _ in 0..4000 {
            let mut w = vec![0, 0, 1, 0, 1];
            sampler.draw_sample_rec(1, 0, 2, &mut w, &mut rng).unwrap();
            sampler.draw_sample_rec(1, 2, 4, &mut w, &mut rng).unwrap();
            assert_eq!(w[3], 1);
            *seen.entry(w[1]).or_insert(0) += 1;
        }
        assert_eq!(seen.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        assert!((1800..2200).contains(&seen[&1]));
    }

    #[test]
    fn samples_are_traces_and_reproducible() {
        let sys = parse_explicit_system(TOY).unwrap();
        let l = Ladder::build(&sys, 4, Mode::Restricted).unwrap();
        let all = toy_traces();
        let a = sample_many(&l, 300, &mut rng_from_seed(5)).unwrap();
        let b = sample_many(&l, 300, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
        for t in &a {
            assert!(all.contains(t));
            validate_trace(&sys, t, 4).unwrap();
        }
        let mut sampler = Sampler::new(&l).unwrap().with_frame_checks(true);
        for _ in 0..200 {
            sampler.draw_sample(&mut rng_from_seed(3)).unwrap();
        }
        assert!(sampler.frame_checks() > 0);
    }

    #[test]
    fn streams_do_not_depend_on_jobs() {
        let sys = parse_explicit_system(TOY).unwrap();
        let l = make_adds(&sys, 4).unwrap();
        let one = sample_streams(&l, 50, 9, 1).unwrap();
        let four = sample_streams(&l, 50, 9, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.len(), 50);
        assert!(sample_streams(&l, 0, 9, 3).unwrap().is_empty());
    }

    #[test]
    fn empty_final_set_has_no_trace() {
        let sys = parse_explicit_system(TOY).unwrap().with_final_states(&[]).unwrap();
        let l = make_adds(&sys, 4).unwrap();
        assert!(count_traces(&l).unwrap().is_zero());
        assert!(matches!(Sampler::new(&l), Err(Error::NoTrace)));
    }

    #[test]
    fn deterministic_chain_has_one_trace() {
        let text = r#"{"k":2,"transitions":[["00","01"],["01","10"],["10","11"],["11","00"]],"initial":["00"],"final":"all"}"#;
        let sys = parse_explicit_system(text).unwrap();
        let l = make_adds(&sys, 8).unwrap();
        for t in sample_many(&l, 20, &mut rng_from_seed(1)).unwrap() {
            assert_eq!(t.states, vec![0, 1, 2, 3, 0, 1, 2, 3, 0]);
        }
        let l1 = make_adds(&sys, 1).unwrap();
        assert_eq!(draw_sample(&l1, &mut rng_from_seed(1)).unwrap().states, vec![0, 1]);
    }

    #[test]
    fn padded_plan_projects_to_original_width() {
        let sys = parse_explicit_system(TOY).unwrap();
        let plan = SamplingPlan::new(&sys, 5, Mode::Plain).unwrap();
        for t in plan_sample_streams(&plan, 40, 2, 2).unwrap() {
            assert_eq!(t.states.len(), 6);
            validate_trace(&sys, &t, 5).unwrap();
            assert_eq!(plan_trace_probability(&plan, &t).unwrap(), q(1, 9));
        }
    }

    #[test]
    fn wire_format_round_trip() {
        let t = Trace::new(vec![0, 1, 3]);
        assert_eq!(t.to_line(2), "00,01,11");
        assert_eq!(Trace::parse_line("00,01,11", 2).unwrap(), t);
    }
}
