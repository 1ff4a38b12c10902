//! Path-count view of a diagram, used to sample root-to-leaf paths bottom-up
//! with probability proportional to the leaf value.
//!
//! A view is built against a set of free levels, optionally after fixing
//! other levels to constants. Fixed levels are followed on the fly, so the
//! view of a cofactor can be built from a shared, immutable manager.
//! `paths_to_root` counts root paths of each node with every skipped free
//! level contributing a factor of two:
//! `|Π_root| = 1` and `|Π_v| = Σ_p |Π_p| · 2^(rank(v) − rank(p) − 1)`.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;
use rustc_hash::FxHashMap;

use super::manager::{pow2, DdError, DdResult, Diagram, Manager, Value};
use crate::random::{fair_bit, scale_to_integers, ChoiceError, Cumulative};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParentEdge {
    pub parent: usize,
    /// True when `parent`'s then-edge leads here.
    pub polarity: bool,
    /// Free levels skipped strictly between parent and child.
    pub gap: usize,
}

#[derive(Debug, Clone)]
pub struct ViewNode {
    pub source: Diagram,
    /// Index of the node's level among the free levels; terminals rank last.
    pub rank: usize,
    pub value: Option<Value>,
    pub then_child: Option<usize>,
    pub else_child: Option<usize>,
    pub parents: Vec<ParentEdge>,
    pub paths_to_root: BigUint,
    parent_weights: Cumulative,
}

#[derive(Debug, Clone)]
pub struct SamplingView {
    free: Vec<u32>,
    /// Sorted by rank; index 0 is the root.
    nodes: Vec<ViewNode>,
    leaves: Vec<usize>,
    leaf_weights: Cumulative,
    /// Common denominator that turned the rational leaf weights into integers.
    leaf_scale: BigUint,
}

/// One leaf-to-root path with the probability the bottom-up rule assigns it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    /// Node indices from the leaf up to the root.
    pub nodes: Vec<usize>,
    /// Branch taken at each parent, leaf upward; cofactoring can leave both
    /// edges of a node pointing at the same child.
    pub polarities: Vec<bool>,
    pub probability: BigRational,
}

impl SamplingView {
    /// Builds the view of `root` over the sorted `free` levels, following
    /// `fixed` through every level it assigns.
    pub fn new(mgr: &Manager, root: Diagram, free: &[u32], fixed: impl Fn(u32) -> Option<bool>) -> DdResult<Self> {
        debug_assert!(free.windows(2).all(|w| w[0] < w[1]));
        let free = free.to_vec();
        let root = mgr.resolve(root, &free, &fixed)?;

        // discover resolved nodes
        let mut index: FxHashMap<u32, usize> = FxHashMap::default();
        let mut found: Vec<(Diagram, Option<(Diagram, Diagram)>)> = Vec::new();
        let mut stack = vec![root];
        while let Some(d) = stack.pop() {
            if index.contains_key(&d.0) {
                continue;
            }
            index.insert(d.0, found.len());
            let kids = match (mgr.then_child(d), mgr.else_child(d)) {
                (Some(t), Some(e)) => {
                    let t = mgr.resolve(t, &free, &fixed)?;
                    let e = mgr.resolve(e, &free, &fixed)?;
                    stack.push(t);
                    stack.push(e);
                    Some((t, e))
                }
                _ => None,
            };
            found.push((d, kids));
        }

        let mut order: Vec<usize> = (0..found.len()).collect();
        order.sort_by_key(|&i| (mgr.rank(&free, found[i].0), i));
        let mut position = vec![0usize; found.len()];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos;
        }
        let mut nodes: Vec<ViewNode> = order
            .iter()
            .map(|&i| {
                let (d, kids) = found[i];
                ViewNode {
                    source: d,
                    rank: mgr.rank(&free, d),
                    value: mgr.value(d).cloned(),
                    then_child: kids.map(|(t, _)| position[index[&t.0]]),
                    else_child: kids.map(|(_, e)| position[index[&e.0]]),
                    parents: Vec::new(),
                    paths_to_root: BigUint::zero(),
                    parent_weights: Cumulative::new(&[]),
                }
            })
            .collect();
        debug_assert_eq!(nodes[0].source, root);

        nodes[0].paths_to_root = BigUint::one();
        for v in 0..nodes.len() {
            let (rank, paths) = (nodes[v].rank, nodes[v].paths_to_root.clone());
            for (child, polarity) in [(nodes[v].then_child, true), (nodes[v].else_child, false)] {
                if let Some(c) = child {
                    let gap = nodes[c].rank - rank - 1;
                    nodes[c].paths_to_root += &paths << gap;
                    nodes[c].parents.push(ParentEdge { parent: v, polarity, gap });
                }
            }
        }
        for v in 0..nodes.len() {
            let weights: Vec<BigUint> = nodes[v]
                .parents
                .iter()
                .map(|e| &nodes[e.parent].paths_to_root << e.gap)
                .collect();
            nodes[v].parent_weights = Cumulative::new(&weights);
        }

        let leaves: Vec<usize> = (0..nodes.len()).filter(|&v| nodes[v].value.is_some()).collect();
        let rational: Vec<BigRational> = leaves
            .iter()
            .map(|&v| {
                let val = nodes[v].value.as_ref().expect("leaf");
                val * BigRational::from_integer(BigInt::from(nodes[v].paths_to_root.clone()))
            })
            .collect();
        let (ints, leaf_scale) = scale_to_integers(&rational).expect("terminals are nonnegative");
        Ok(SamplingView {
            free,
            nodes,
            leaves,
            leaf_weights: Cumulative::new(&ints),
            leaf_scale,
        })
    }

    pub fn free_levels(&self) -> &[u32] {
        &self.free
    }

    pub fn nodes(&self) -> &[ViewNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// `Σ_leaves val(v)·|Π_v|`.
    pub fn leaf_mass(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.leaf_weights.total()),
            BigInt::from(self.leaf_scale.clone()),
        )
    }

    /// Sum of the diagram over all assignments of the free levels: the leaf
    /// mass times the free levels skipped above the root.
    pub fn total(&self) -> Value {
        self.leaf_mass() * pow2(self.nodes[0].rank)
    }

    /// Draws a root-to-leaf path bottom-up and returns the value of every
    /// free level, indexed by rank. Skipped levels get fair bits.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Vec<bool>, ChoiceError> {
        let mut bits = vec![false; self.free.len()];
        let mut v = self.leaves[self.leaf_weights.draw(rng)?];
        while v != 0 {
            let node = &self.nodes[v];
            let edge = node.parents[node.parent_weights.draw(rng)?];
            let prank = self.nodes[edge.parent].rank;
            bits[prank] = edge.polarity;
            for b in &mut bits[prank + 1..node.rank] {
                *b = fair_bit(rng);
            }
            v = edge.parent;
        }
        for b in &mut bits[..self.nodes[0].rank] {
            *b = fair_bit(rng);
        }
        Ok(bits)
    }

    /// Every leaf-to-root path with the probability that [`Self::sample`]
    /// selects it, computed from the same choice weights without randomness.
    pub fn enumerate_paths(&self) -> Vec<PathRecord> {
        let total = self.leaf_weights.total();
        let mut out = Vec::new();
        if total.is_zero() {
            return out;
        }
        for (i, &leaf) in self.leaves.iter().enumerate() {
            let p = ratio(&self.leaf_weights.weight(i), &total);
            self.walk_up(leaf, vec![leaf], Vec::new(), p, &mut out);
        }
        out
    }

    fn walk_up(&self, v: usize, path: Vec<usize>, polarities: Vec<bool>, p: BigRational, out: &mut Vec<PathRecord>) {
        if v == 0 {
            out.push(PathRecord {
                nodes: path,
                polarities,
                probability: p,
            });
            return;
        }
        let node = &self.nodes[v];
        let total = node.parent_weights.total();
        for (i, e) in node.parents.iter().enumerate() {
            let step = ratio(&node.parent_weights.weight(i), &total);
            let mut next = path.clone();
            next.push(e.parent);
            let mut pol = polarities.clone();
            pol.push(e.polarity);
            self.walk_up(e.parent, next, pol, &p * step, out);
        }
    }
}

fn ratio(a: &BigUint, b: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(a.clone()), BigInt::from(b.clone()))
}

impl Manager {
    /// Sampling view of `a` with the variables of `free_copies` free.
    pub fn build_sampling_view(&self, a: Diagram, free_copies: &BTreeSet<u32>) -> DdResult<SamplingView> {
        let free: Vec<u32> = free_copies.iter().flat_map(|&c| self.copy_levels(c)).collect();
        for l in self.support_levels(a) {
            if free.binary_search(&l).is_err() {
                return Err(DdError::SupportLeak(l));
            }
        }
        SamplingView::new(self, a, &free, |_| None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::VarId;
    use crate::random::rng_from_seed;

    fn int(v: i64) -> Value {
        Value::from_integer(BigInt::from(v))
    }

    #[test]
    fn terminal_view() {
        let mut m = Manager::new(2, 1, 0);
        let c = m.constant_int(3).unwrap();
        let v = m.build_sampling_view(c, &[0].into()).unwrap();
        assert_eq!(v.nodes().len(), 1);
        assert_eq!(v.nodes()[0].paths_to_root, BigUint::one());
        assert!(v.nodes()[0].parents.is_empty());
        assert_eq!(v.total(), int(12));
    }

    #[test]
    fn single_variable_view() {
        let mut m = Manager::new(1, 1, 0);
        let x = m.var(VarId::new(0, 0)).unwrap();
        let v = m.build_sampling_view(x, &[0].into()).unwrap();
        for &l in v.leaves() {
            assert_eq!(v.nodes()[l].paths_to_root, BigUint::one());
        }
    }

    #[test]
    fn constant_one_over_three_free_variables() {
        let m = Manager::new(3, 1, 0);
        let v = m.build_sampling_view(m.one(), &[0].into()).unwrap();
        // the single leaf is the root: 1 · |Π| · 2^3 skipped levels above it
        assert_eq!(v.total(), int(8));
    }

    #[test]
    fn support_leak_rejected() {
        let mut m = Manager::new(1, 2, 0);
        let x = m.var(VarId::new(1, 0)).unwrap();
        assert!(matches!(m.build_sampling_view(x, &[0].into()), Err(DdError::SupportLeak(_))));
    }

    #[test]
    fn leaves_one_and_three_pick_then_with_three_quarters() {
        let mut m = Manager::new(1, 1, 0);
        let levels = m.copy_levels(0);
        let d = m.from_table(&levels, &[(0, int(1)), (1, int(3))]).unwrap();
        let v = m.build_sampling_view(d, &[0].into()).unwrap();
        let paths = v.enumerate_paths();
        let then_leaf = v.nodes()[0].then_child.unwrap();
        let p = paths.iter().find(|r| r.nodes[0] == then_leaf).unwrap();
        assert_eq!(p.probability, BigRational::new(3.into(), 4.into()));
        let mut rng = rng_from_seed(11);
        let n = 40_000;
        let ones = (0..n).filter(|_| v.sample(&mut rng).unwrap()[0]).count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn skipped_levels_are_counted() {
        // f = x0 ? 1 : (x2 ? 2 : 0) over three free levels; x1 is skipped
        let mut m = Manager::new(3, 1, 0);
        let levels = m.copy_levels(0);
        let rows: Vec<(u64, Value)> = (0..8u64)
            .map(|k| {
                let v = if k & 1 == 1 { 1 } else if k & 4 == 4 { 2 } else { 0 };
                (k, int(v))
            })
            .collect();
        let d = m.from_table(&levels, &rows).unwrap();
        let v = m.build_sampling_view(d, &[0].into()).unwrap();
        let sum: i64 = rows.iter().map(|(_, x)| x.to_integer().try_into().unwrap_or(0i64)).sum();
        assert_eq!(v.total(), int(sum));
        // sampled assignments follow f / Σf
        let mut rng = rng_from_seed(4);
        let mut counts = [0usize; 8];
        let n = 60_000;
        for _ in 0..n {
            let bits = v.sample(&mut rng).unwrap();
            let k = bits.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>();
            counts[k] += 1;
        }
        for (k, (_, val)) in rows.iter().enumerate() {
            let want = val.to_integer().try_into().unwrap_or(0i64) as f64 / sum as f64;
            assert!((counts[k] as f64 / n as f64 - want).abs() < 0.01, "k={k}");
        }
    }
}
