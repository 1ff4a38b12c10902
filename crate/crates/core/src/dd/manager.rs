//! Node storage, hash-consing and the variable layout shared by every diagram
//! of one manager.
//!
//! Levels are laid out in blocks: auxiliary variables (primary inputs) first,
//! then copy `X^0`, then `X^1`, and so on, with bits ascending inside each
//! copy. New copies are always appended below the existing ones, so growing
//! the manager never renumbers a level that is already in use.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use thiserror::Error;

/// Exact terminal carrier.
pub type Value = BigRational;

/// Level assigned to terminal nodes; larger than every variable level.
pub const TERMINAL_LEVEL: u32 = u32::MAX;

const APPLY_CACHE_LIMIT: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DdError {
    #[error("terminal values must be nonnegative, got {0}")]
    NegativeValue(Value),
    #[error("unknown variable {0}")]
    UnknownVar(VarId),
    #[error("diagram blow-up: node limit of {limit} exceeded")]
    BlowUp { limit: usize },
    #[error("`{op}` requires 0/1-valued operands")]
    NotBoolean { op: &'static str },
    #[error("restrict called with an empty care set")]
    EmptyCareSet,
    #[error("assignment leaves the variable at level {0} unassigned")]
    IncompleteAssignment(u32),
    #[error("renaming would violate the variable order")]
    OrderViolation,
    #[error("diagram depends on level {0}, which is neither free nor fixed")]
    SupportLeak(u32),
    #[error("more than {cap} entries while enumerating minterms")]
    EnumerationCap { cap: usize },
}

pub type DdResult<T> = Result<T, DdError>;

/// Handle to a node owned by a [`Manager`]. Two handles from the same manager
/// are equal exactly when the functions they denote are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Diagram(pub(crate) u32);

impl Diagram {
    pub fn id(self) -> u32 {
        self.0
    }
}

/// A state variable: bit `bit` of copy `X^copy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub copy: u32,
    pub bit: u32,
}

impl VarId {
    pub fn new(copy: u32, bit: u32) -> Self {
        VarId { copy, bit }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}[{}]", self.copy, self.bit)
    }
}

/// What sits at a given level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Aux(u32),
    State(VarId),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub(crate) level: u32,
    /// Then-child, or the index into `values` for a terminal.
    pub(crate) hi: u32,
    pub(crate) lo: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Op {
    Product,
    Sum,
    Or,
    Not,
    NonZero,
}

#[derive(Clone)]
pub struct Manager {
    aux: u32,
    bits: u32,
    copies: u32,
    pub(crate) nodes: Vec<Node>,
    boolean: Vec<bool>,
    values: Vec<Value>,
    unique: FxHashMap<(u32, u32, u32), u32>,
    leaf_index: HashMap<Value, u32>,
    pub(crate) cache: FxHashMap<(Op, u32, u32), u32>,
    node_limit: Option<usize>,
}

impl fmt::Debug for Manager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manager")
            .field("aux", &self.aux)
            .field("bits", &self.bits)
            .field("copies", &self.copies)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl Manager {
    /// A manager for `bits`-wide states with `copies` copies and `aux`
    /// auxiliary variables ordered above all state copies.
    pub fn new(bits: u32, copies: u32, aux: u32) -> Self {
        let mut mgr = Manager {
            aux,
            bits,
            copies,
            nodes: Vec::new(),
            boolean: Vec::new(),
            values: Vec::new(),
            unique: FxHashMap::default(),
            leaf_index: HashMap::new(),
            cache: FxHashMap::default(),
            node_limit: None,
        };
        mgr.leaf(Value::zero()).expect("no limit yet");
        mgr.leaf(Value::one()).expect("no limit yet");
        mgr
    }

    pub fn with_node_limit(mut self, limit: Option<usize>) -> Self {
        self.node_limit = limit;
        self
    }

    pub fn set_node_limit(&mut self, limit: Option<usize>) {
        self.node_limit = limit;
    }

    pub fn node_limit(&self) -> Option<usize> {
        self.node_limit
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn copies(&self) -> u32 {
        self.copies
    }

    pub fn aux_count(&self) -> u32 {
        self.aux
    }

    /// Appends copies until at least `copies` exist.
    pub fn ensure_copies(&mut self, copies: u32) {
        self.copies = self.copies.max(copies);
    }

    pub fn num_levels(&self) -> u32 {
        self.aux + self.copies * self.bits
    }

    /// Total number of nodes ever allocated (terminals included).
    pub fn allocated(&self) -> usize {
        self.nodes.len()
    }

    pub fn level_of(&self, var: VarId) -> DdResult<u32> {
        if var.copy >= self.copies || var.bit >= self.bits {
            return Err(DdError::UnknownVar(var));
        }
        Ok(self.aux + var.copy * self.bits + var.bit)
    }

    pub fn aux_level(&self, index: u32) -> Option<u32> {
        (index < self.aux).then_some(index)
    }

    pub fn var_at(&self, level: u32) -> Option<VarKind> {
        if level < self.aux {
            Some(VarKind::Aux(level))
        } else if level < self.num_levels() {
            let off = level - self.aux;
            Some(VarKind::State(VarId::new(off / self.bits, off % self.bits)))
        } else {
            None
        }
    }

    /// All levels of the given copy, ascending.
    pub fn copy_levels(&self, copy: u32) -> Vec<u32> {
        (0..self.bits)
            .map(|b| self.aux + copy * self.bits + b)
            .collect()
    }

    // ---- node access ----------------------------------------------------

    pub fn zero(&self) -> Diagram {
        Diagram(0)
    }

    pub fn one(&self) -> Diagram {
        Diagram(1)
    }

    pub fn level(&self, d: Diagram) -> u32 {
        self.nodes[d.0 as usize].level
    }

    pub fn is_terminal(&self, d: Diagram) -> bool {
        self.level(d) == TERMINAL_LEVEL
    }

    pub fn value(&self, d: Diagram) -> Option<&Value> {
        let n = self.nodes[d.0 as usize];
        (n.level == TERMINAL_LEVEL).then(|| &self.values[n.hi as usize])
    }

    pub fn then_child(&self, d: Diagram) -> Option<Diagram> {
        let n = self.nodes[d.0 as usize];
        (n.level != TERMINAL_LEVEL).then_some(Diagram(n.hi))
    }

    pub fn else_child(&self, d: Diagram) -> Option<Diagram> {
        let n = self.nodes[d.0 as usize];
        (n.level != TERMINAL_LEVEL).then_some(Diagram(n.lo))
    }

    /// True when every reachable terminal is 0 or 1.
    pub fn is_boolean(&self, d: Diagram) -> bool {
        self.boolean[d.0 as usize]
    }

    /// Cofactors of `d` with respect to `level` (`d` itself for both when the
    /// top variable of `d` lies below `level`).
    pub(crate) fn cofactors(&self, d: Diagram, level: u32) -> (Diagram, Diagram) {
        let n = self.nodes[d.0 as usize];
        if n.level == level {
            (Diagram(n.hi), Diagram(n.lo))
        } else {
            (d, d)
        }
    }

    // ---- construction ---------------------------------------------------

    fn check_limit(&self) -> DdResult<()> {
        match self.node_limit {
            Some(limit) if self.nodes.len() >= limit => Err(DdError::BlowUp { limit }),
            _ => Ok(()),
        }
    }

    pub(crate) fn leaf(&mut self, value: Value) -> DdResult<Diagram> {
        if let Some(&id) = self.leaf_index.get(&value) {
            return Ok(Diagram(id));
        }
        self.check_limit()?;
        let id = self.nodes.len() as u32;
        let boolean = value.is_zero() || value.is_one();
        self.nodes.push(Node {
            level: TERMINAL_LEVEL,
            hi: self.values.len() as u32,
            lo: 0,
        });
        self.boolean.push(boolean);
        self.values.push(value.clone());
        self.leaf_index.insert(value, id);
        Ok(Diagram(id))
    }

    /// Reduced, hash-consed node constructor. Callers guarantee that `level`
    /// lies strictly above both children.
    pub(crate) fn mk(&mut self, level: u32, hi: Diagram, lo: Diagram) -> DdResult<Diagram> {
        debug_assert!(level < self.level(hi) && level < self.level(lo));
        if hi == lo {
            return Ok(hi);
        }
        if let Some(&id) = self.unique.get(&(level, hi.0, lo.0)) {
            return Ok(Diagram(id));
        }
        self.check_limit()?;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            level,
            hi: hi.0,
            lo: lo.0,
        });
        let boolean = self.boolean[hi.0 as usize] && self.boolean[lo.0 as usize];
        self.boolean.push(boolean);
        self.unique.insert((level, hi.0, lo.0), id);
        Ok(Diagram(id))
    }

    /// Like [`Manager::mk`] but reports an order violation instead of
    /// assuming one cannot happen.
    pub(crate) fn mk_checked(&mut self, level: u32, hi: Diagram, lo: Diagram) -> DdResult<Diagram> {
        if level >= self.level(hi) || level >= self.level(lo) {
            return Err(DdError::OrderViolation);
        }
        self.mk(level, hi, lo)
    }

    pub fn constant(&mut self, value: Value) -> DdResult<Diagram> {
        if value.is_negative() {
            return Err(DdError::NegativeValue(value));
        }
        self.leaf(value)
    }

    pub fn constant_int(&mut self, value: u64) -> DdResult<Diagram> {
        self.leaf(Value::from_integer(BigInt::from(value)))
    }

    /// Indicator of a state variable.
    pub fn var(&mut self, var: VarId) -> DdResult<Diagram> {
        let level = self.level_of(var)?;
        self.var_at_level(level)
    }

    pub fn var_at_level(&mut self, level: u32) -> DdResult<Diagram> {
        let (one, zero) = (self.one(), self.zero());
        self.mk(level, one, zero)
    }

    /// Builds a diagram from a sparse table. Bit `i` of each key is the value
    /// of `levels[i]`; `levels` must be strictly increasing. Keys absent from
    /// the table map to 0. Later duplicates overwrite earlier ones.
    pub fn from_table(&mut self, levels: &[u32], entries: &[(u64, Value)]) -> DdResult<Diagram> {
        debug_assert!(levels.windows(2).all(|w| w[0] < w[1]));
        let mut dedup: BTreeMap<u64, &Value> = BTreeMap::new();
        for (key, value) in entries {
            if value.is_negative() {
                return Err(DdError::NegativeValue(value.clone()));
            }
            dedup.insert(*key, value);
        }
        let rows: Vec<(u64, &Value)> = dedup.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let refs: Vec<&(u64, &Value)> = rows.iter().collect();
        self.table_rec(levels, 0, &refs)
    }

    fn table_rec(&mut self, levels: &[u32], idx: usize, rows: &[&(u64, &Value)]) -> DdResult<Diagram> {
        if rows.is_empty() {
            return Ok(self.zero());
        }
        if idx == levels.len() {
            return self.leaf(rows[0].1.clone());
        }
        let (hi_rows, lo_rows): (Vec<_>, Vec<_>) = rows.iter().copied().partition(|r| (r.0 >> idx) & 1 == 1);
        let hi = self.table_rec(levels, idx + 1, &hi_rows)?;
        let lo = self.table_rec(levels, idx + 1, &lo_rows)?;
        self.mk(levels[idx], hi, lo)
    }

    /// Copies a diagram from another manager, sending each level through
    /// `map`. The map must preserve the relative order of the support.
    pub fn import(&mut self, src: &Manager, root: Diagram, map: impl Fn(u32) -> u32) -> DdResult<Diagram> {
        let mut memo: FxHashMap<u32, Diagram> = FxHashMap::default();
        self.import_rec(src, root, &map, &mut memo)
    }

    fn import_rec(
        &mut self,
        src: &Manager,
        d: Diagram,
        map: &impl Fn(u32) -> u32,
        memo: &mut FxHashMap<u32, Diagram>,
    ) -> DdResult<Diagram> {
        if let Some(&r) = memo.get(&d.0) {
            return Ok(r);
        }
        let n = src.nodes[d.0 as usize];
        let r = if n.level == TERMINAL_LEVEL {
            self.leaf(src.values[n.hi as usize].clone())?
        } else {
            let hi = self.import_rec(src, Diagram(n.hi), map, memo)?;
            let lo = self.import_rec(src, Diagram(n.lo), map, memo)?;
            let level = map(n.level);
            if level >= self.num_levels() {
                return Err(DdError::OrderViolation);
            }
            self.mk_checked(level, hi, lo)?
        };
        memo.insert(d.0, r);
        Ok(r)
    }

    pub(crate) fn trim_cache(&mut self) {
        if self.cache.len() > APPLY_CACHE_LIMIT {
            self.cache.clear();
        }
    }

    // ---- inspection -----------------------------------------------------

    fn reachable(&self, root: Diagram) -> Vec<Diagram> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![root];
        let mut out = Vec::new();
        while let Some(d) = stack.pop() {
            if !seen.insert(d.0) {
                continue;
            }
            out.push(d);
            let n = self.nodes[d.0 as usize];
            if n.level != TERMINAL_LEVEL {
                stack.push(Diagram(n.hi));
                stack.push(Diagram(n.lo));
            }
        }
        out
    }

    /// Number of distinct nodes reachable from `root`, terminals included.
    pub fn node_count(&self, root: Diagram) -> usize {
        self.reachable(root).len()
    }

    /// Reachable terminals of `root`.
    pub fn leaves(&self, root: Diagram) -> Vec<Diagram> {
        let mut v: Vec<Diagram> = self.reachable(root).into_iter().filter(|&d| self.is_terminal(d)).collect();
        v.sort();
        v
    }

    pub fn support_levels(&self, root: Diagram) -> BTreeSet<u32> {
        self.reachable(root)
            .into_iter()
            .map(|d| self.level(d))
            .filter(|&l| l != TERMINAL_LEVEL)
            .collect()
    }

    /// State variables the diagram depends on (auxiliary variables omitted).
    pub fn support(&self, root: Diagram) -> BTreeSet<VarId> {
        self.support_levels(root)
            .into_iter()
            .filter_map(|l| match self.var_at(l) {
                Some(VarKind::State(v)) => Some(v),
                _ => None,
            })
            .collect()
    }

    /// Copies of state variables the diagram depends on.
    pub fn support_copies(&self, root: Diagram) -> BTreeSet<u32> {
        self.support(root).into_iter().map(|v| v.copy).collect()
    }

    // ---- evaluation -----------------------------------------------------

    /// Evaluates under a total assignment of the support.
    pub fn evaluate(&self, root: Diagram, assignment: &BTreeMap<VarId, bool>) -> DdResult<Value> {
        self.eval_with(root, |level| match self.var_at(level) {
            Some(VarKind::State(v)) => assignment.get(&v).copied(),
            _ => None,
        })
        .cloned()
    }

    /// Evaluates with a level-indexed lookup.
    pub fn eval_with(&self, root: Diagram, lookup: impl Fn(u32) -> Option<bool>) -> DdResult<&Value> {
        let mut n = self.nodes[root.0 as usize];
        while n.level != TERMINAL_LEVEL {
            let bit = lookup(n.level).ok_or(DdError::IncompleteAssignment(n.level))?;
            n = self.nodes[if bit { n.hi } else { n.lo } as usize];
        }
        Ok(&self.values[n.hi as usize])
    }

    /// Exact sum of `root` over every assignment of the `free` levels, with
    /// levels for which `fixed` returns a value held at that value. Does not
    /// allocate nodes, so it may run concurrently on a shared manager.
    pub fn sum_over(&self, root: Diagram, free: &[u32], fixed: impl Fn(u32) -> Option<bool>) -> DdResult<Value> {
        let mut memo: FxHashMap<u32, Value> = FxHashMap::default();
        let root = self.resolve(root, free, &fixed)?;
        let top = self.rank(free, root);
        let s = self.sum_rec(root, free, &fixed, &mut memo)?;
        Ok(s * pow2(top))
    }

    /// Follows fixed levels down from `d` until reaching a free level or a
    /// terminal.
    pub(crate) fn resolve(&self, mut d: Diagram, free: &[u32], fixed: &impl Fn(u32) -> Option<bool>) -> DdResult<Diagram> {
        loop {
            let n = self.nodes[d.0 as usize];
            if n.level == TERMINAL_LEVEL {
                return Ok(d);
            }
            match fixed(n.level) {
                Some(bit) => d = Diagram(if bit { n.hi } else { n.lo }),
                None if free.binary_search(&n.level).is_ok() => return Ok(d),
                None => return Err(DdError::SupportLeak(n.level)),
            }
        }
    }

    /// Position of a resolved node's level among `free`; terminals rank last.
    pub(crate) fn rank(&self, free: &[u32], d: Diagram) -> usize {
        let level = self.level(d);
        if level == TERMINAL_LEVEL {
            free.len()
        } else {
            free.binary_search(&level).expect("resolved node lies on a free level")
        }
    }

    fn sum_rec(
        &self,
        d: Diagram,
        free: &[u32],
        fixed: &impl Fn(u32) -> Option<bool>,
        memo: &mut FxHashMap<u32, Value>,
    ) -> DdResult<Value> {
        if let Some(v) = memo.get(&d.0) {
            return Ok(v.clone());
        }
        let n = self.nodes[d.0 as usize];
        let out = if n.level == TERMINAL_LEVEL {
            self.values[n.hi as usize].clone()
        } else {
            let r = self.rank(free, d);
            let mut acc = Value::zero();
            for child in [Diagram(n.hi), Diagram(n.lo)] {
                let c = self.resolve(child, free, fixed)?;
                let gap = self.rank(free, c) - r - 1;
                acc += self.sum_rec(c, free, fixed, memo)? * pow2(gap);
            }
            acc
        };
        memo.insert(d.0, out.clone());
        Ok(out)
    }

    /// All nonzero points of `root` over `levels`, expanding skipped levels.
    /// Bit `i` of each key is the value of `levels[i]`.
    pub fn minterms(&self, root: Diagram, levels: &[u32], cap: usize) -> DdResult<Vec<(u64, Value)>> {
        let mut out = Vec::new();
        self.minterm_rec(root, levels, 0, 0, cap, &mut out)?;
        Ok(out)
    }

    fn minterm_rec(
        &self,
        d: Diagram,
        levels: &[u32],
        idx: usize,
        key: u64,
        cap: usize,
        out: &mut Vec<(u64, Value)>,
    ) -> DdResult<()> {
        if d == self.zero() {
            return Ok(());
        }
        let n = self.nodes[d.0 as usize];
        if idx == levels.len() {
            if n.level != TERMINAL_LEVEL {
                return Err(DdError::SupportLeak(n.level));
            }
            if out.len() >= cap {
                return Err(DdError::EnumerationCap { cap });
            }
            out.push((key, self.values[n.hi as usize].clone()));
            return Ok(());
        }
        let level = levels[idx];
        if n.level < level {
            return Err(DdError::SupportLeak(n.level));
        }
        let (hi, lo) = self.cofactors(d, level);
        self.minterm_rec(lo, levels, idx + 1, key, cap, out)?;
        self.minterm_rec(hi, levels, idx + 1, key | (1 << idx), cap, out)
    }
}

pub(crate) fn pow2(exp: usize) -> Value {
    Value::from_integer(BigInt::one() << exp)
}
