//! AIGER ASCII (`aag`) sequential circuits.
//!
//! Latches reset to 0. Literal `2v` is variable `v`, `2v+1` its negation,
//! and 0/1 are the constants. Inputs become auxiliary diagram variables,
//! latch `j` becomes state bit `j`.

use std::collections::BTreeSet;

use super::{FinalStates, TransitionSystem};
use crate::dd::{Diagram, Manager, VarId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latch {
    pub lit: u32,
    pub next: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct And {
    pub lhs: u32,
    pub rhs0: u32,
    pub rhs1: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub max_var: u32,
    pub inputs: Vec<u32>,
    pub latches: Vec<Latch>,
    pub outputs: Vec<u32>,
    /// Gates in an order where every operand is defined first.
    pub ands: Vec<And>,
}

#[derive(Clone, Copy)]
enum Def {
    Undefined,
    Input,
    Latch,
    Gate(usize),
}

fn numbers(line: &str, lineno: usize, want: &[usize]) -> Result<Vec<u32>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if !want.contains(&fields.len()) {
        return Err(Error::parse(Some(lineno), format!("expected {want:?} fields, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<u32>()
                .map_err(|_| Error::parse(Some(lineno), format!("bad number {f:?}")))
        })
        .collect()
}

pub fn parse_aiger_ascii(text: &str) -> Result<Circuit> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(Some(1), "empty input"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("aag") {
        return Err(Error::parse(Some(hl), "header must start with `aag`"));
    }
    let counts = numbers(&head.collect::<Vec<_>>().join(" "), hl, &[5, 6, 7, 8, 9])?;
    let (m, ni, nl, no, na) = (counts[0], counts[1], counts[2], counts[3], counts[4]);
    if counts[5..].iter().any(|&c| c != 0) {
        return Err(Error::parse(Some(hl), "bad-state, constraint, justice and fairness sections are not supported"));
    }
    if (ni as u64) + (nl as u64) + (na as u64) > m as u64 {
        return Err(Error::parse(Some(hl), format!("M={m} is smaller than I+L+A")));
    }
    let max_lit = 2 * m + 1;
    let mut next_line = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(None, format!("unexpected end of input while reading {what}")))
    };

    let mut defs = vec![Def::Undefined; m as usize + 1];
    let mut define = |lit: u32, def: Def, lineno: usize| -> Result<()> {
        if lit & 1 == 1 || lit < 2 || lit > max_lit {
            return Err(Error::parse(Some(lineno), format!("literal {lit} cannot be defined here")));
        }
        let slot = &mut defs[(lit / 2) as usize];
        if !matches!(slot, Def::Undefined) {
            return Err(Error::parse(Some(lineno), format!("variable {} defined twice", lit / 2)));
        }
        *slot = def;
        Ok(())
    };

    let mut inputs = Vec::with_capacity(ni as usize);
    for _ in 0..ni {
        let (ln, l) = next_line("inputs")?;
        let v = numbers(l, ln, &[1])?;
        define(v[0], Def::Input, ln)?;
        inputs.push(v[0]);
    }
    let mut latches = Vec::with_capacity(nl as usize);
    let mut latch_lines = Vec::new();
    for _ in 0..nl {
        let (ln, l) = next_line("latches")?;
        let v = numbers(l, ln, &[2, 3])?;
        if v.len() == 3 && v[2] != 0 {
            return Err(Error::parse(Some(ln), "only zero latch resets are supported"));
        }
        define(v[0], Def::Latch, ln)?;
        latches.push(Latch { lit: v[0], next: v[1] });
        latch_lines.push(ln);
    }
    let mut outputs = Vec::with_capacity(no as usize);
    let mut output_lines = Vec::new();
    for _ in 0..no {
        let (ln, l) = next_line("outputs")?;
        outputs.push(numbers(l, ln, &[1])?[0]);
        output_lines.push(ln);
    }
    let mut gates = Vec::with_capacity(na as usize);
    let mut gate_lines = Vec::new();
    for idx in 0..na as usize {
        let (ln, l) = next_line("and gates")?;
        let v = numbers(l, ln, &[3])?;
        define(v[0], Def::Gate(idx), ln)?;
        gates.push(And { lhs: v[0], rhs0: v[1], rhs1: v[2] });
        gate_lines.push(ln);
    }
    // symbol table and comments are ignored
    for (ln, l) in lines {
        if l.starts_with('c') {
            break;
        }
        let ok = matches!(l.chars().next(), Some('i' | 'l' | 'o' | 'b' | 'c' | 'j' | 'f')) || l.trim().is_empty();
        if !ok {
            return Err(Error::parse(Some(ln), format!("unexpected line {l:?}")));
        }
    }

    let check = |lit: u32, ln: usize| -> Result<()> {
        if lit > max_lit {
            return Err(Error::parse(Some(ln), format!("literal {lit} exceeds 2M+1")));
        }
        if lit >= 2 && matches!(defs[(lit / 2) as usize], Def::Undefined) {
            return Err(Error::parse(Some(ln), format!("literal {lit} is never defined")));
        }
        Ok(())
    };
    for (latch, &ln) in latches.iter().zip(&latch_lines) {
        check(latch.next, ln)?;
    }
    for (&o, &ln) in outputs.iter().zip(&output_lines) {
        check(o, ln)?;
    }
    for (g, &ln) in gates.iter().zip(&gate_lines) {
        check(g.rhs0, ln)?;
        check(g.rhs1, ln)?;
    }

    let ands = topo_order(&gates, &defs, &gate_lines)?;
    Ok(Circuit {
        max_var: m,
        inputs,
        latches,
        outputs,
        ands,
    })
}

fn topo_order(gates: &[And], defs: &[Def], lines: &[usize]) -> Result<Vec<And>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; gates.len()];
    let mut order = Vec::with_capacity(gates.len());
    for start in 0..gates.len() {
        if mark[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0u8)];
        mark[start] = 1;
        while let Some(&mut (g, ref mut operand)) = stack.last_mut() {
            if *operand == 2 {
                mark[g] = 2;
                order.push(gates[g]);
                stack.pop();
                continue;
            }
            let lit = if *operand == 0 { gates[g].rhs0 } else { gates[g].rhs1 };
            *operand += 1;
            if let Def::Gate(h) = defs[(lit / 2) as usize] {
                match mark[h] {
                    0 => {
                        mark[h] = 1;
                        stack.push((h, 0));
                    }
                    1 => return Err(Error::parse(Some(lines[h]), format!("combinational cycle through literal {}", gates[h].lhs))),
                    _ => {}
                }
            }
        }
    }
    Ok(order)
}

impl Circuit {
    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_latches(&self) -> usize {
        self.latches.len()
    }

    fn valuation(&self, state: u64, input: u64) -> Vec<bool> {
        let mut val = vec![false; self.max_var as usize + 1];
        for (i, &lit) in self.inputs.iter().enumerate() {
            val[(lit / 2) as usize] = (input >> i) & 1 == 1;
        }
        for (j, l) in self.latches.iter().enumerate() {
            val[(l.lit / 2) as usize] = (state >> j) & 1 == 1;
        }
        for g in &self.ands {
            val[(g.lhs / 2) as usize] = lit_value(&val, g.rhs0) && lit_value(&val, g.rhs1);
        }
        val
    }

    /// Next state under the given input vector (bit `i` = input `i`).
    pub fn step(&self, state: u64, input: u64) -> u64 {
        let val = self.valuation(state, input);
        self.latches
            .iter()
            .enumerate()
            .fold(0, |acc, (j, l)| acc | ((lit_value(&val, l.next) as u64) << j))
    }

    pub fn output(&self, index: usize, state: u64, input: u64) -> bool {
        lit_value(&self.valuation(state, input), self.outputs[index])
    }
}

fn lit_value(val: &[bool], lit: u32) -> bool {
    let v = lit >= 2 && val[(lit / 2) as usize];
    v ^ (lit & 1 == 1)
}

/// Builds one diagram per AIG variable over inputs and copy `X^0`.
fn variable_bdds(c: &Circuit, mgr: &mut Manager) -> Result<Vec<Diagram>> {
    let mut nodes = vec![mgr.zero(); c.max_var as usize + 1];
    for (i, &lit) in c.inputs.iter().enumerate() {
        let level = mgr.aux_level(i as u32).expect("aux level");
        nodes[(lit / 2) as usize] = mgr.var_at_level(level)?;
    }
    for (j, l) in c.latches.iter().enumerate() {
        nodes[(l.lit / 2) as usize] = mgr.var(VarId::new(0, j as u32))?;
    }
    for g in &c.ands {
        let a = literal(mgr, &nodes, g.rhs0)?;
        let b = literal(mgr, &nodes, g.rhs1)?;
        nodes[(g.lhs / 2) as usize] = mgr.and(a, b)?;
    }
    Ok(nodes)
}

fn literal(mgr: &mut Manager, nodes: &[Diagram], lit: u32) -> Result<Diagram> {
    let base = if lit < 2 { mgr.zero() } else { nodes[(lit / 2) as usize] };
    Ok(if lit & 1 == 1 { mgr.not(base)? } else { base })
}

/// Transition relation `∃inputs. ∧_j (x1_j ↔ f_j)`, initial state all zeros.
pub fn circuit_to_system(c: &Circuit, finals: &FinalStates) -> Result<TransitionSystem> {
    let bits = c.num_latches() as u32;
    if bits == 0 || bits > 32 {
        return Err(Error::Invalid(format!("circuit must have 1..=32 latches, found {bits}")));
    }
    let mut mgr = Manager::new(bits, 2, c.num_inputs() as u32);
    let nodes = variable_bdds(c, &mut mgr)?;
    let inputs: BTreeSet<u32> = (0..c.num_inputs() as u32).collect();

    let mut relation = mgr.one();
    // conjoin from the last bit so the partial products stay small
    for (j, l) in c.latches.iter().enumerate().rev() {
        let f = literal(&mut mgr, &nodes, l.next)?;
        let nf = mgr.not(f)?;
        let next = mgr.var(VarId::new(1, j as u32))?;
        let eq = mgr.ite(next, f, nf)?;
        relation = mgr.and(relation, eq)?;
    }
    let relation = mgr.quantify_exists_levels(relation, &inputs)?;
    let initial = mgr.state_cube(0, 0)?;
    let fin = match finals {
        FinalStates::All => mgr.one(),
        FinalStates::States(states) => {
            super::check_states(states, bits)?;
            mgr.state_set(0, states.iter().copied())?
        }
        FinalStates::Output(idx) => {
            let lit = *c
                .outputs
                .get(*idx)
                .ok_or_else(|| Error::Invalid(format!("circuit has no output {idx}")))?;
            let o = literal(&mut mgr, &nodes, lit)?;
            mgr.quantify_exists_levels(o, &inputs)?
        }
    };
    TransitionSystem::new(mgr, relation, initial, fin)
}
