//! Algebraic and Boolean operations over diagrams of one manager.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use super::manager::{pow2, DdError, DdResult, Diagram, Manager, Op, Value, VarId, TERMINAL_LEVEL};

impl Manager {
    fn apply(&mut self, op: Op, a: Diagram, b: Diagram) -> DdResult<Diagram> {
        let (zero, one) = (self.zero(), self.one());
        match op {
            Op::Product => {
                if a == zero || b == zero {
                    return Ok(zero);
                }
                if a == one {
                    return Ok(b);
                }
                if b == one {
                    return Ok(a);
                }
            }
            Op::Sum => {
                if a == zero {
                    return Ok(b);
                }
                if b == zero {
                    return Ok(a);
                }
            }
            Op::Or => {
                if a == one || b == one {
                    return Ok(one);
                }
                if a == zero || a == b {
                    return Ok(b);
                }
                if b == zero {
                    return Ok(a);
                }
            }
            Op::Not | Op::NonZero => unreachable!("unary"),
        }
        let (a, b) = if a.0 <= b.0 { (a, b) } else { (b, a) };
        if let (Some(x), Some(y)) = (self.value(a), self.value(b)) {
            let v = match op {
                Op::Product => x * y,
                Op::Sum => x + y,
                Op::Or => Value::one(),
                _ => unreachable!(),
            };
            return self.leaf(v);
        }
        if let Some(&r) = self.cache.get(&(op, a.0, b.0)) {
            return Ok(Diagram(r));
        }
        let level = self.level(a).min(self.level(b));
        let (a1, a0) = self.cofactors(a, level);
        let (b1, b0) = self.cofactors(b, level);
        let hi = self.apply(op, a1, b1)?;
        let lo = self.apply(op, a0, b0)?;
        let r = self.mk(level, hi, lo)?;
        self.cache.insert((op, a.0, b.0), r.0);
        Ok(r)
    }

    fn apply_unary(&mut self, op: Op, a: Diagram) -> DdResult<Diagram> {
        if let Some(x) = self.value(a) {
            let v = match op {
                Op::Not => {
                    if x.is_zero() {
                        Value::one()
                    } else {
                        Value::zero()
                    }
                }
                Op::NonZero => {
                    if x.is_zero() {
                        Value::zero()
                    } else {
                        Value::one()
                    }
                }
                _ => unreachable!("binary"),
            };
            return self.leaf(v);
        }
        if let Some(&r) = self.cache.get(&(op, a.0, a.0)) {
            return Ok(Diagram(r));
        }
        let level = self.level(a);
        let (a1, a0) = self.cofactors(a, level);
        let hi = self.apply_unary(op, a1)?;
        let lo = self.apply_unary(op, a0)?;
        let r = self.mk(level, hi, lo)?;
        self.cache.insert((op, a.0, a.0), r.0);
        Ok(r)
    }

    /// Pointwise product.
    pub fn product(&mut self, a: Diagram, b: Diagram) -> DdResult<Diagram> {
        self.trim_cache();
        self.apply(Op::Product, a, b)
    }

    /// Pointwise sum.
    pub fn sum(&mut self, a: Diagram, b: Diagram) -> DdResult<Diagram> {
        self.trim_cache();
        self.apply(Op::Sum, a, b)
    }

    /// Conjunction. One operand may be a general ADD, in which case the
    /// other acts as a 0/1 mask and the result is their product.
    pub fn and(&mut self, a: Diagram, b: Diagram) -> DdResult<Diagram> {
        if !self.is_boolean(a) && !self.is_boolean(b) {
            return Err(DdError::NotBoolean { op: "and" });
        }
        self.product(a, b)
    }

    pub fn or(&mut self, a: Diagram, b: Diagram) -> DdResult<Diagram> {
        if !self.is_boolean(a) || !self.is_boolean(b) {
            return Err(DdError::NotBoolean { op: "or" });
        }
        self.trim_cache();
        self.apply(Op::Or, a, b)
    }

    pub fn not(&mut self, a: Diagram) -> DdResult<Diagram> {
        if !self.is_boolean(a) {
            return Err(DdError::NotBoolean { op: "not" });
        }
        self.trim_cache();
        self.apply_unary(Op::Not, a)
    }

    /// `f ? g : h` for a BDD `f` and arbitrary `g`, `h`.
    pub fn ite(&mut self, f: Diagram, g: Diagram, h: Diagram) -> DdResult<Diagram> {
        if !self.is_boolean(f) {
            return Err(DdError::NotBoolean { op: "ite" });
        }
        let t = self.product(f, g)?;
        let nf = self.not(f)?;
        let e = self.product(nf, h)?;
        self.sum(t, e)
    }

    /// BDD of the points where `a` is nonzero.
    pub fn nonzero(&mut self, a: Diagram) -> DdResult<Diagram> {
        if self.is_boolean(a) {
            return Ok(a);
        }
        self.apply_unary(Op::NonZero, a)
    }

    /// Multiplies every terminal by `c`.
    pub fn scale(&mut self, a: Diagram, c: Value) -> DdResult<Diagram> {
        let k = self.constant(c)?;
        self.product(a, k)
    }

    /// Indicator that `copy` encodes `state` (bit `j` of `state` is bit `j`
    /// of the copy).
    pub fn state_cube(&mut self, copy: u32, state: u64) -> DdResult<Diagram> {
        let levels = self.copy_levels(copy);
        self.from_table(&levels, &[(state, Value::one())])
    }

    /// Indicator of a set of states over one copy.
    pub fn state_set(&mut self, copy: u32, states: impl IntoIterator<Item = u64>) -> DdResult<Diagram> {
        let levels = self.copy_levels(copy);
        let rows: Vec<(u64, Value)> = states.into_iter().map(|s| (s, Value::one())).collect();
        self.from_table(&levels, &rows)
    }

    fn level_mask(&self, vars: &BTreeSet<VarId>) -> DdResult<Vec<bool>> {
        let mut mask = vec![false; self.num_levels() as usize];
        for &v in vars {
            mask[self.level_of(v)? as usize] = true;
        }
        Ok(mask)
    }

    /// All variables of the given copies.
    pub fn copy_vars(&self, copies: impl IntoIterator<Item = u32>) -> BTreeSet<VarId> {
        copies
            .into_iter()
            .flat_map(|c| (0..self.bits()).map(move |b| VarId::new(c, b)))
            .collect()
    }

    /// Additive abstraction: sums `a` over every assignment of `vars`.
    pub fn quantify_add(&mut self, a: Diagram, vars: &BTreeSet<VarId>) -> DdResult<Diagram> {
        let mask = self.level_mask(vars)?;
        self.abstract_levels(a, &mask, false)
    }

    /// Additive abstraction over levels, auxiliary ones included.
    pub fn quantify_add_levels(&mut self, a: Diagram, levels: &BTreeSet<u32>) -> DdResult<Diagram> {
        let mask = self.mask_from_levels(levels);
        self.abstract_levels(a, &mask, false)
    }

    /// Existential abstraction of a BDD.
    pub fn quantify_exists(&mut self, a: Diagram, vars: &BTreeSet<VarId>) -> DdResult<Diagram> {
        if !self.is_boolean(a) {
            return Err(DdError::NotBoolean { op: "quantify_exists" });
        }
        let mask = self.level_mask(vars)?;
        self.abstract_levels(a, &mask, true)
    }

    pub fn quantify_exists_levels(&mut self, a: Diagram, levels: &BTreeSet<u32>) -> DdResult<Diagram> {
        if !self.is_boolean(a) {
            return Err(DdError::NotBoolean { op: "quantify_exists" });
        }
        let mask = self.mask_from_levels(levels);
        self.abstract_levels(a, &mask, true)
    }

    fn mask_from_levels(&self, levels: &BTreeSet<u32>) -> Vec<bool> {
        let mut mask = vec![false; self.num_levels() as usize];
        for &l in levels {
            if (l as usize) < mask.len() {
                mask[l as usize] = true;
            }
        }
        mask
    }

    fn abstract_levels(&mut self, a: Diagram, mask: &[bool], boolean: bool) -> DdResult<Diagram> {
        // below[l] = number of abstracted levels strictly above level l
        let mut below = Vec::with_capacity(mask.len() + 1);
        let mut acc = 0usize;
        for &m in mask {
            below.push(acc);
            acc += m as usize;
        }
        below.push(acc);
        let count = |level: u32| -> usize {
            if level == TERMINAL_LEVEL {
                acc
            } else {
                below[level as usize]
            }
        };
        self.trim_cache();
        let mut memo = FxHashMap::default();
        let r = self.abstract_rec(a, mask, &count, boolean, &mut memo)?;
        if boolean {
            Ok(r)
        } else {
            let skipped = count(self.level(a));
            self.scale_pow2(r, skipped)
        }
    }

    fn scale_pow2(&mut self, a: Diagram, exp: usize) -> DdResult<Diagram> {
        if exp == 0 {
            return Ok(a);
        }
        self.scale(a, pow2(exp))
    }

    fn abstract_rec(
        &mut self,
        a: Diagram,
        mask: &[bool],
        count: &impl Fn(u32) -> usize,
        boolean: bool,
        memo: &mut FxHashMap<u32, Diagram>,
    ) -> DdResult<Diagram> {
        if self.is_terminal(a) {
            return Ok(a);
        }
        if let Some(&r) = memo.get(&a.0) {
            return Ok(r);
        }
        let level = self.level(a);
        let (c1, c0) = self.cofactors(a, level);
        let mut hi = self.abstract_rec(c1, mask, count, boolean, memo)?;
        let mut lo = self.abstract_rec(c0, mask, count, boolean, memo)?;
        if !boolean {
            let after = count(level + 1);
            hi = self.scale_pow2(hi, count(self.level(c1)) - after)?;
            lo = self.scale_pow2(lo, count(self.level(c0)) - after)?;
        }
        let r = if mask[level as usize] {
            if boolean {
                self.apply(Op::Or, hi, lo)?
            } else {
                self.apply(Op::Sum, hi, lo)?
            }
        } else {
            self.mk(level, hi, lo)?
        };
        memo.insert(a.0, r);
        Ok(r)
    }

    /// Coudert-Madre restrict: a diagram equal to `g` wherever `care` is 1.
    pub fn restrict(&mut self, g: Diagram, care: Diagram) -> DdResult<Diagram> {
        if !self.is_boolean(care) {
            return Err(DdError::NotBoolean { op: "restrict" });
        }
        if care == self.zero() {
            return Err(DdError::EmptyCareSet);
        }
        self.trim_cache();
        let mut memo = FxHashMap::default();
        self.restrict_rec(g, care, &mut memo)
    }

    fn restrict_rec(&mut self, g: Diagram, h: Diagram, memo: &mut FxHashMap<(u32, u32), Diagram>) -> DdResult<Diagram> {
        if h == self.one() || self.is_terminal(g) {
            return Ok(g);
        }
        if let Some(&r) = memo.get(&(g.0, h.0)) {
            return Ok(r);
        }
        let (lg, lh) = (self.level(g), self.level(h));
        let r = if lh < lg {
            let (h1, h0) = self.cofactors(h, lh);
            let merged = self.apply(Op::Or, h1, h0)?;
            self.restrict_rec(g, merged, memo)?
        } else {
            let (g1, g0) = self.cofactors(g, lg);
            let (h1, h0) = self.cofactors(h, lg);
            if h1 == self.zero() {
                self.restrict_rec(g0, h0, memo)?
            } else if h0 == self.zero() {
                self.restrict_rec(g1, h1, memo)?
            } else {
                let hi = self.restrict_rec(g1, h1, memo)?;
                let lo = self.restrict_rec(g0, h0, memo)?;
                self.mk(lg, hi, lo)?
            }
        };
        memo.insert((g.0, h.0), r);
        Ok(r)
    }

    /// Cofactor by a partial assignment.
    pub fn substitute(&mut self, a: Diagram, partial: &BTreeMap<VarId, bool>) -> DdResult<Diagram> {
        let mut fixed: Vec<Option<bool>> = vec![None; self.num_levels() as usize];
        for (&v, &b) in partial {
            fixed[self.level_of(v)? as usize] = Some(b);
        }
        let mut memo = FxHashMap::default();
        self.substitute_rec(a, &fixed, &mut memo)
    }

    fn substitute_rec(&mut self, a: Diagram, fixed: &[Option<bool>], memo: &mut FxHashMap<u32, Diagram>) -> DdResult<Diagram> {
        if self.is_terminal(a) {
            return Ok(a);
        }
        if let Some(&r) = memo.get(&a.0) {
            return Ok(r);
        }
        let level = self.level(a);
        let (c1, c0) = self.cofactors(a, level);
        let r = match fixed[level as usize] {
            Some(true) => self.substitute_rec(c1, fixed, memo)?,
            Some(false) => self.substitute_rec(c0, fixed, memo)?,
            None => {
                let hi = self.substitute_rec(c1, fixed, memo)?;
                let lo = self.substitute_rec(c0, fixed, memo)?;
                self.mk(level, hi, lo)?
            }
        };
        memo.insert(a.0, r);
        Ok(r)
    }

    /// Moves variables between copies, keeping bit indices. Copies absent
    /// from `map` stay put. Fails if the result would be out of order.
    pub fn rename(&mut self, a: Diagram, map: &BTreeMap<u32, u32>) -> DdResult<Diagram> {
        if map.iter().all(|(k, v)| k == v) {
            return Ok(a);
        }
        for &to in map.values() {
            if to >= self.copies() {
                return Err(DdError::UnknownVar(VarId::new(to, 0)));
            }
        }
        let bits = self.bits();
        let aux = self.aux_count();
        let target = |level: u32| -> u32 {
            if level < aux {
                return level;
            }
            let off = level - aux;
            let (copy, bit) = (off / bits, off % bits);
            aux + map.get(&copy).copied().unwrap_or(copy) * bits + bit
        };
        let mut memo = FxHashMap::default();
        self.rename_rec(a, &target, &mut memo)
    }

    fn rename_rec(&mut self, a: Diagram, target: &impl Fn(u32) -> u32, memo: &mut FxHashMap<u32, Diagram>) -> DdResult<Diagram> {
        if self.is_terminal(a) {
            return Ok(a);
        }
        if let Some(&r) = memo.get(&a.0) {
            return Ok(r);
        }
        let level = self.level(a);
        let (c1, c0) = self.cofactors(a, level);
        let hi = self.rename_rec(c1, target, memo)?;
        let lo = self.rename_rec(c0, target, memo)?;
        let r = self.mk_checked(target(level), hi, lo)?;
        memo.insert(a.0, r);
        Ok(r)
    }

    /// Sum of `a` over all assignments of the given copies, as a value.
    /// The diagram must not depend on any other variable.
    pub fn total(&self, a: Diagram, copies: &[u32]) -> DdResult<Value> {
        let mut free: Vec<u32> = copies.iter().flat_map(|&c| self.copy_levels(c)).collect();
        free.sort_unstable();
        self.sum_over(a, &free, |_| None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn int(v: i64) -> Value {
        Value::from_integer(BigInt::from(v))
    }

    /// Every assignment of `n` variables of copy 0, as maps.
    fn assignments(n: u32) -> Vec<BTreeMap<VarId, bool>> {
        (0..1u64 << n)
            .map(|k| (0..n).map(|b| (VarId::new(0, b), (k >> b) & 1 == 1)).collect())
            .collect()
    }

    fn table(m: &mut Manager, n: u32, vals: &[i64]) -> Diagram {
        let levels: Vec<u32> = (0..n).map(|b| m.level_of(VarId::new(0, b)).unwrap()).collect();
        let rows: Vec<(u64, Value)> = vals.iter().enumerate().map(|(k, &v)| (k as u64, int(v))).collect();
        m.from_table(&levels, &rows).unwrap()
    }

    fn ev(m: &Manager, d: Diagram, a: &BTreeMap<VarId, bool>) -> Value {
        m.evaluate(d, a).unwrap()
    }

    #[test]
    fn identities_and_annihilators() {
        let mut m = Manager::new(4, 1, 0);
        let f = table(&mut m, 4, &[0, 1, 2, 3, 4, 0, 0, 7, 1, 1, 1, 1, 9, 0, 3, 2]);
        let (one, zero) = (m.one(), m.zero());
        assert_eq!(m.product(f, one).unwrap(), f);
        assert_eq!(m.product(f, zero).unwrap(), zero);
        assert_eq!(m.sum(f, zero).unwrap(), f);
        let twice = m.sum(f, f).unwrap();
        let scaled = m.scale(f, int(2)).unwrap();
        assert_eq!(twice, scaled);
        assert_eq!(m.and(one, f).unwrap(), f);
        assert!(matches!(m.and(f, f), Err(DdError::NotBoolean { .. })));
    }

    #[test]
    fn not_is_an_involution() {
        let mut m = Manager::new(3, 1, 0);
        let f = table(&mut m, 3, &[1, 0, 0, 1, 1, 1, 0, 0]);
        let nf = m.not(f).unwrap();
        assert_eq!(m.not(nf).unwrap(), f);
        let g = table(&mut m, 3, &[2, 0, 0, 1, 1, 1, 0, 0]);
        assert!(m.not(g).is_err());
    }

    #[test]
    fn quantify_examples() {
        let mut m = Manager::new(2, 1, 0);
        let v = VarId::new(0, 0);
        let c = m.constant(int(5)).unwrap();
        let set: BTreeSet<VarId> = [v].into();
        let q = m.quantify_add(c, &set).unwrap();
        assert_eq!(m.value(q), Some(&int(10)));
        let x = m.var(v).unwrap();
        assert_eq!(m.quantify_add(x, &set).unwrap(), m.one());
        assert_eq!(m.quantify_exists(x, &set).unwrap(), m.one());
        let zero = m.zero();
        assert_eq!(m.quantify_exists(zero, &set).unwrap(), zero);
    }

    #[test]
    fn mask_zeroes_exactly_the_masked_columns() {
        let mut m = Manager::new(3, 1, 0);
        let counts = table(&mut m, 3, &[3, 1, 4, 1, 5, 9, 2, 6]);
        let fin = table(&mut m, 3, &[1, 0, 1, 1, 0, 0, 1, 0]);
        let masked = m.and(counts, fin).unwrap();
        for a in assignments(3) {
            let want = if ev(&m, fin, &a).is_zero() { int(0) } else { ev(&m, counts, &a) };
            assert_eq!(ev(&m, masked, &a), want);
        }
    }

    #[test]
    fn restrict_examples() {
        let mut m = Manager::new(2, 1, 0);
        let v = VarId::new(0, 0);
        let x = m.var(v).unwrap();
        assert_eq!(m.restrict(x, x).unwrap(), m.one());
        let one = m.one();
        assert_eq!(m.restrict(x, one).unwrap(), x);
        let zero = m.zero();
        assert!(matches!(m.restrict(x, zero), Err(DdError::EmptyCareSet)));
    }

    #[test]
    fn substitute_and_rename_examples() {
        let mut m = Manager::new(2, 3, 0);
        let v = VarId::new(0, 1);
        let x = m.var(v).unwrap();
        assert_eq!(m.substitute(x, &BTreeMap::new()).unwrap(), x);
        assert_eq!(m.substitute(x, &[(v, true)].into()).unwrap(), m.one());
        let a = m.var(VarId::new(0, 0)).unwrap();
        let b = m.var(VarId::new(1, 1)).unwrap();
        let f = m.sum(a, b).unwrap();
        let g = m.rename(f, &[(0, 1), (1, 2)].into()).unwrap();
        assert_eq!(m.rename(f, &[(0, 0)].into()).unwrap(), f);
        let back = m.rename(g, &[(1, 0), (2, 1)].into()).unwrap();
        assert_eq!(back, f);
        // swapping copies reverses their relative order
        assert!(matches!(m.rename(f, &[(0, 2), (1, 0)].into()), Err(DdError::OrderViolation)));
    }

    fn arb_table(n: u32) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(prop_oneof![3 => Just(0i64), 5 => 0i64..6], 1usize << n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn pointwise_algebra(a in arb_table(4), b in arb_table(4)) {
            let mut m = Manager::new(4, 1, 0);
            let da = table(&mut m, 4, &a);
            let db = table(&mut m, 4, &b);
            let p = m.product(da, db).unwrap();
            let s = m.sum(da, db).unwrap();
            let mask = m.nonzero(db).unwrap();
            let i = m.ite(mask, da, db).unwrap();
            for (k, asg) in assignments(4).iter().enumerate() {
                prop_assert_eq!(ev(&m, p, asg), int(a[k] * b[k]));
                prop_assert_eq!(ev(&m, s, asg), int(a[k] + b[k]));
                prop_assert_eq!(ev(&m, i, asg), int(if b[k] != 0 { a[k] } else { b[k] }));
            }
        }

        #[test]
        fn canonical_after_different_routes(a in arb_table(3), b in arb_table(3)) {
            let mut m = Manager::new(3, 1, 0);
            let da = table(&mut m, 3, &a);
            let db = table(&mut m, 3, &b);
            let ab = m.sum(da, db).unwrap();
            let ba = m.sum(db, da).unwrap();
            prop_assert_eq!(ab, ba);
            let sums: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let direct = table(&mut m, 3, &sums);
            prop_assert_eq!(ab, direct);
            let two = m.scale(ab, int(2)).unwrap();
            let twice = m.sum(ab, ab).unwrap();
            prop_assert_eq!(two, twice);
        }

        #[test]
        fn quantify_matches_brute_force(a in arb_table(4), which in prop::collection::btree_set(0u32..4, 0..4)) {
            let mut m = Manager::new(4, 1, 0);
            let da = table(&mut m, 4, &a);
            let vars: BTreeSet<VarId> = which.iter().map(|&b| VarId::new(0, b)).collect();
            let q = m.quantify_add(da, &vars).unwrap();
            let bool_a: Vec<i64> = a.iter().map(|&x| (x != 0) as i64).collect();
            let db = table(&mut m, 4, &bool_a);
            let e = m.quantify_exists(db, &vars).unwrap();
            prop_assert!(m.support(q).is_disjoint(&vars));
            for (k, asg) in assignments(4).iter().enumerate() {
                let mut total = 0;
                let mut any = false;
                for j in 0..16usize {
                    let agrees = (0..4).filter(|b| !which.contains(b)).all(|b| (j >> b) & 1 == (k >> b) & 1);
                    if agrees {
                        total += a[j];
                        any |= a[j] != 0;
                    }
                }
                prop_assert_eq!(ev(&m, q, asg), int(total));
                prop_assert_eq!(ev(&m, e, asg), int(any as i64));
            }
        }

        #[test]
        fn restrict_agrees_on_care_set(g in arb_table(4), h in prop::collection::vec(any::<bool>(), 16)) {
            prop_assume!(h.iter().any(|&x| x));
            let mut m = Manager::new(4, 1, 0);
            let dg = table(&mut m, 4, &g);
            let hv: Vec<i64> = h.iter().map(|&x| x as i64).collect();
            let dh = table(&mut m, 4, &hv);
            let r = m.restrict(dg, dh).unwrap();
            for (k, asg) in assignments(4).iter().enumerate() {
                if h[k] {
                    prop_assert_eq!(ev(&m, r, asg), int(g[k]));
                }
            }
        }

        #[test]
        fn rename_relabels(a in arb_table(3)) {
            let mut m = Manager::new(3, 3, 0);
            let da = table(&mut m, 3, &a);
            let r = m.rename(da, &[(0, 2)].into()).unwrap();
            prop_assert!(m.support_copies(r).iter().all(|&c| c == 2));
            for (k, asg) in assignments(3).iter().enumerate() {
                let moved: BTreeMap<VarId, bool> = asg.iter().map(|(v, &b)| (VarId::new(2, v.bit), b)).collect();
                prop_assert_eq!(ev(&m, r, &moved), int(a[k]));
            }
        }
    }
}
