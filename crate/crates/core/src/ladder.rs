//! The ladder of `2^i`-step count diagrams built by iterative squaring.
//!
//! Copy `X^0` is the start of a segment, `X^i` its midpoint and `X^{i+1}`
//! its end. Step `t_i(X^0, X^i, X^{i+1})` holds
//! `ρ_{i−1}(X^0 → X^i) · ρ_{i−1}(X^i → X^{i+1})`, where `ρ_l` counts (or
//! weighs) the paths of length `2^l`. The top step is masked with the
//! initial set on `X^0` and the final set on the last copy.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_traits::Zero;
use serde::Serialize;

use crate::dd::{DdError, Diagram, Manager, Value};
use crate::error::{Error, Result};
use crate::ingest::TransitionSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Plain,
    Restricted,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "restricted" => Ok(Mode::Restricted),
            other => Err(Error::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Reachable-state frames over copy `X^0`. `alpha[i-1]` restricts the start
/// copy of `t_i`, `beta[i-1]` its midpoint copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachFrames {
    pub alpha: Vec<Diagram>,
    pub beta: Vec<Diagram>,
    /// `r_0 = I, r_1, …, r_N`.
    pub reach: Vec<Diagram>,
}

/// Image of a state set under the transition relation. Implementations may
/// over-approximate.
pub trait ImageOperator {
    fn image(&self, mgr: &mut Manager, r: Diagram, t0: Diagram) -> Result<Diagram>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactImage;

impl ImageOperator for ExactImage {
    fn image(&self, mgr: &mut Manager, r: Diagram, t0: Diagram) -> Result<Diagram> {
        image(mgr, r, t0)
    }
}

/// `{s' : ∃s ∈ r. t0(s, s') ≠ 0}`, with `r` and the result over copy `X^0`.
pub fn image(mgr: &mut Manager, r: Diagram, t0: Diagram) -> Result<Diagram> {
    let rel = mgr.nonzero(t0)?;
    let conj = mgr.and(rel, r)?;
    let x0: BTreeSet<u32> = mgr.copy_levels(0).into_iter().collect();
    let next = mgr.quantify_exists_levels(conj, &x0)?;
    Ok(mgr.rename(next, &BTreeMap::from([(1, 0)]))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStats {
    pub i: u32,
    pub nodes: usize,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStats {
    pub mode: Mode,
    pub length: u64,
    pub bits: u32,
    pub steps: Vec<StepStats>,
    pub top_nodes: usize,
    pub top_leaves: usize,
    pub allocated_nodes: usize,
    pub frames_ms: f64,
    pub build_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Ladder {
    mgr: Manager,
    bits: u32,
    length: u64,
    depth: u32,
    mode: Mode,
    weighted: bool,
    /// `t_1 … t_L` before masking.
    steps: Vec<Diagram>,
    top: Diagram,
    /// Sum of `top`, computed once.
    total: Value,
    frames: Option<ReachFrames>,
    stats: LadderStats,
}

fn depth_of(n: u64) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Invalid(format!("ladder length must be a power of two, got {n}")));
    }
    Ok(n.trailing_zeros())
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Plain iterative squaring.
pub fn make_adds(sys: &TransitionSystem, n: u64) -> Result<Ladder> {
    build(sys, n, Mode::Plain, &ExactImage)
}

/// Iterative squaring with every step restricted to the reachable frames.
pub fn make_adds_restricted(sys: &TransitionSystem, n: u64, image: &dyn ImageOperator) -> Result<Ladder> {
    build(sys, n, Mode::Restricted, image)
}

impl Ladder {
    pub fn build(sys: &TransitionSystem, n: u64, mode: Mode) -> Result<Ladder> {
        build(sys, n, mode, &ExactImage)
    }
}

fn build(sys: &TransitionSystem, n: u64, mode: Mode, image_op: &dyn ImageOperator) -> Result<Ladder> {
    let depth = depth_of(n)?;
    let mut mgr = sys.manager().clone();
    mgr.ensure_copies(depth + 2);
    let (t0, init, finals) = (sys.relation(), sys.initial(), sys.finals());

    let started = Instant::now();
    let frames = match mode {
        Mode::Plain => None,
        Mode::Restricted => Some(compute_reachable_sets(&mut mgr, t0, init, n, image_op)?),
    };
    let frames_ms = ms(started);

    let started = Instant::now();
    let mut steps = Vec::with_capacity(depth as usize);
    let mut g = t0;
    for i in 1..=depth {
        let mut g_hat = mgr.rename(g, &BTreeMap::from([(0, i), (i, i + 1)]))?;
        if let Some(f) = &frames {
            let beta = mgr.rename(f.beta[i as usize - 1], &BTreeMap::from([(0, i)]))?;
            g_hat = restrict_or_zero(&mut mgr, g_hat, beta)?;
            g = restrict_or_zero(&mut mgr, g, f.alpha[i as usize - 1])?;
        }
        let t = mgr.product(g, g_hat)?;
        steps.push(t);
        let mid: BTreeSet<u32> = mgr.copy_levels(i).into_iter().collect();
        g = mgr.quantify_add_levels(t, &mid)?;
    }
    let (last_copy, unmasked) = match steps.last() {
        Some(&t) => (depth + 1, t),
        None => (1, t0),
    };
    let f_last = mgr.rename(finals, &BTreeMap::from([(0, last_copy)]))?;
    let top = mgr.and(unmasked, f_last)?;
    let top = mgr.and(top, init)?;
    let total = mgr.total(top, &top_copies(depth))?;
    let build_ms = ms(started);

    let steps_stats = steps
        .iter()
        .zip(1..)
        .map(|(&t, i)| StepStats {
            i,
            nodes: mgr.node_count(t),
            leaves: mgr.leaves(t).len(),
        })
        .collect();
    let stats = LadderStats {
        mode,
        length: n,
        bits: sys.bits(),
        steps: steps_stats,
        top_nodes: mgr.node_count(top),
        top_leaves: mgr.leaves(top).len(),
        allocated_nodes: mgr.allocated(),
        frames_ms,
        build_ms,
    };
    Ok(Ladder {
        mgr,
        bits: sys.bits(),
        length: n,
        depth,
        mode,
        weighted: sys.is_weighted(),
        steps,
        top,
        total,
        frames,
        stats,
    })
}

fn top_copies(depth: u32) -> Vec<u32> {
    if depth == 0 {
        vec![0, 1]
    } else {
        vec![0, depth, depth + 1]
    }
}

/// An empty care set means no trace passes through this step at all.
fn restrict_or_zero(mgr: &mut Manager, g: Diagram, care: Diagram) -> Result<Diagram> {
    match mgr.restrict(g, care) {
        Err(DdError::EmptyCareSet) => Ok(mgr.zero()),
        other => Ok(other?),
    }
}

/// Frames for a ladder of length `n`: all `n` image steps are taken.
pub fn compute_reachable_sets(
    mgr: &mut Manager,
    t0: Diagram,
    init: Diagram,
    n: u64,
    image_op: &dyn ImageOperator,
) -> Result<ReachFrames> {
    let depth = depth_of(n)? as usize;
    let mut alpha = vec![init; depth];
    let mut beta = vec![mgr.zero(); depth];
    let mut reach = vec![init];
    for j in 1..=n {
        let r = image_op.image(mgr, *reach.last().expect("r_0"), t0)?;
        reach.push(r);
        for i in 0..depth.saturating_sub(1) {
            if j % (1u64 << (i + 1)) == 0 {
                alpha[i] = mgr.or(alpha[i], r)?;
            } else {
                beta[i] = mgr.or(beta[i], r)?;
                break;
            }
        }
        if depth > 0 && j == n / 2 {
            beta[depth - 1] = mgr.or(beta[depth - 1], r)?;
        }
    }
    Ok(ReachFrames { alpha, beta, reach })
}

impl Ladder {
    pub fn manager(&self) -> &Manager {
        &self.mgr
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Trace length `N`.
    pub fn length(&self) -> u64 {
        self.length
    }

    /// `log2 N`, the number of squaring steps.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Unmasked step `t_i`, `1 ≤ i ≤ depth`.
    pub fn step(&self, i: u32) -> Diagram {
        self.steps[i as usize - 1]
    }

    pub fn steps(&self) -> &[Diagram] {
        &self.steps
    }

    /// The masked top diagram.
    pub fn top(&self) -> Diagram {
        self.top
    }

    /// Copies of the top diagram: start, midpoint (absent when `N = 1`), end.
    pub fn top_copies(&self) -> Vec<u32> {
        top_copies(self.depth)
    }

    pub fn frames(&self) -> Option<&ReachFrames> {
        self.frames.as_ref()
    }

    pub fn stats(&self) -> &LadderStats {
        &self.stats
    }

    /// Number of traces, or their total weight.
    pub fn count(&self) -> Result<Value> {
        Ok(self.total.clone())
    }

    /// Value of `d` with the given copies bound to states.
    pub(crate) fn eval_at(&self, d: Diagram, binding: &[(u32, u64)]) -> Value {
        let lookup = self.binding(binding);
        self.mgr.eval_with(d, lookup).cloned().unwrap_or_else(|_| Value::zero())
    }

    /// Sum of `d` over the free `copy` with the other copies bound.
    pub(crate) fn sum_copy(&self, d: Diagram, copy: u32, binding: &[(u32, u64)]) -> Result<Value> {
        let free = self.mgr.copy_levels(copy);
        Ok(self.mgr.sum_over(d, &free, self.binding(binding))?)
    }

    pub(crate) fn binding<'a>(&'a self, binding: &'a [(u32, u64)]) -> impl Fn(u32) -> Option<bool> + 'a {
        let (aux, bits) = (self.mgr.aux_count(), self.bits);
        move |level| {
            let off = level.checked_sub(aux)?;
            let (copy, bit) = (off / bits, off % bits);
            binding
                .iter()
                .find(|(c, _)| *c == copy)
                .map(|(_, s)| (s >> bit) & 1 == 1)
        }
    }

    /// `t_i(lo, mid, hi)`.
    pub fn step_value(&self, i: u32, lo: u64, mid: u64, hi: u64) -> Value {
        self.eval_at(self.step(i), &[(0, lo), (i, mid), (i + 1, hi)])
    }

    /// Whether `state` lies in the given frame (over copy `X^0`).
    pub fn frame_contains(&self, frame: Diagram, state: u64) -> bool {
        !self.eval_at(frame, &[(0, state)]).is_zero()
    }
}

/// Maps traces of a padded system back to the original one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Projection {
    /// State width of the original system.
    pub bits: u32,
    /// Requested trace length `N`.
    pub length: u64,
    /// Ladder length `N'`.
    pub padded_length: u64,
    pub counter_bits: u32,
}

impl Projection {
    pub fn identity(bits: u32, length: u64) -> Self {
        Projection {
            bits,
            length,
            padded_length: length,
            counter_bits: 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.counter_bits == 0
    }

    /// Drops the counter bits and keeps the first `N + 1` states.
    pub fn project(&self, states: &[u64]) -> Vec<u64> {
        let mask = (1u64 << self.bits) - 1;
        states
            .iter()
            .take(self.length as usize + 1)
            .map(|s| s & mask)
            .collect()
    }

    /// The unique padded trace projecting to `states`.
    pub fn lift(&self, states: &[u64]) -> Vec<u64> {
        if self.is_identity() {
            return states.to_vec();
        }
        let last = *states.last().expect("nonempty trace");
        (0..=self.padded_length)
            .map(|j| {
                let s = states.get(j as usize).copied().unwrap_or(last);
                s | (j.min(self.length) << self.bits)
            })
            .collect()
    }
}

fn ceil_log2(n: u64) -> u32 {
    64 - (n - 1).leading_zeros()
}

/// Pads a system so that traces of the next power-of-two length project
/// onto length-`n` traces of the original with the same distribution.
///
/// A counter on `⌈log2(n+1)⌉` bits above the original ones counts from 0 to
/// `n` and then locks; once locked, the original state holds with weight 1.
pub fn pad_system(sys: &TransitionSystem, n: u64) -> Result<(TransitionSystem, u64, Projection)> {
    if n == 0 {
        return Err(Error::Invalid("trace length must be at least 1".into()));
    }
    let k = sys.bits();
    if n.is_power_of_two() {
        return Ok((sys.clone(), n, Projection::identity(k, n)));
    }
    let padded_length = n.next_power_of_two();
    let c = ceil_log2(n + 1);
    let width = k + c;
    if width > 32 {
        return Err(Error::Invalid(format!("padded state width {width} exceeds 32 bits")));
    }
    let src = sys.manager();
    let mut mgr = Manager::new(width, 2, 0).with_node_limit(src.node_limit());
    let src_aux = src.aux_count();
    let lift_level = |level: u32| {
        let off = level - src_aux;
        (off / k) * width + off % k
    };
    let t0 = mgr.import(src, sys.relation(), lift_level)?;
    let init = mgr.import(src, sys.initial(), lift_level)?;
    let finals = mgr.import(src, sys.finals(), lift_level)?;

    let counter = |copy: u32| -> Vec<u32> { (k..width).map(|b| copy * width + b).collect() };
    let mut pair = counter(0);
    pair.extend(counter(1));
    let one = Value::from_integer(1.into());
    let advance_rows: Vec<(u64, Value)> = (0..n).map(|v| (v | ((v + 1) << c), one.clone())).collect();
    let advance = mgr.from_table(&pair, &advance_rows)?;
    let locked = mgr.from_table(&pair, &[(n | (n << c), one.clone())])?;
    let mut hold = mgr.one();
    for b in (0..k).rev() {
        let x = mgr.var_at_level(b)?;
        let y = mgr.var_at_level(width + b)?;
        let nx = mgr.not(x)?;
        let eq = mgr.ite(y, x, nx)?;
        hold = mgr.and(hold, eq)?;
    }
    let running = mgr.and(t0, advance)?;
    let stuck = mgr.and(hold, locked)?;
    let relation = mgr.sum(running, stuck)?;

    let start = mgr.from_table(&counter(0), &[(0, one.clone())])?;
    let end = mgr.from_table(&counter(0), &[(n, one)])?;
    let init = mgr.and(init, start)?;
    let finals = mgr.and(finals, end)?;
    let padded = TransitionSystem::new(mgr, relation, init, finals)?;
    let proj = Projection {
        bits: k,
        length: n,
        padded_length,
        counter_bits: c,
    };
    Ok((padded, padded_length, proj))
}

/// A ladder for any length, padding the system when needed.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub ladder: Ladder,
    pub projection: Projection,
    pub system: TransitionSystem,
}

impl SamplingPlan {
    pub fn new(sys: &TransitionSystem, n: u64, mode: Mode) -> Result<Self> {
        Self::with_image(sys, n, mode, &ExactImage)
    }

    pub fn with_image(sys: &TransitionSystem, n: u64, mode: Mode, image_op: &dyn ImageOperator) -> Result<Self> {
        let (system, padded, projection) = pad_system(sys, n)?;
        let ladder = build(&system, padded, mode, image_op)?;
        Ok(SamplingPlan {
            ladder,
            projection,
            system,
        })
    }

    pub fn count(&self) -> Result<Value> {
        self.ladder.count()
    }
}
