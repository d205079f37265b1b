//! CNF formulas, DIMACS I/O and unit propagation.
//!
//! Literals use the DIMACS convention: `v` is variable `v`, `-v` its
//! negation, variables numbered from 1.

use std::fmt::Write as _;

use crate::error::{DimacsError, Error, Result};
use crate::hypercube::BitVector;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    tautologies: Vec<usize>,
    input_vars: Option<Vec<usize>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidArgument("a formula needs at least one variable".into()));
        }
        let mut tautologies = Vec::new();
        for (c, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(Error::InvalidArgument(format!("clause {} is empty", c + 1)));
            }
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(Error::InvalidArgument(format!(
                        "clause {} has literal {lit} outside 1..={num_vars}",
                        c + 1
                    )));
                }
            }
            if is_tautology(clause) {
                tautologies.push(c);
            }
        }
        Ok(Self {
            num_vars,
            clauses,
            tautologies,
            input_vars: None,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Indices (0-based) of clauses containing a complementary pair.
    pub fn tautologies(&self) -> &[usize] {
        &self.tautologies
    }

    /// Input variables declared through `c input ...` comment lines.
    pub fn input_vars(&self) -> Option<&[usize]> {
        self.input_vars.as_deref()
    }

    pub fn set_input_vars(&mut self, vars: Vec<usize>) -> Result<()> {
        check_var_set(&vars, self.num_vars)?;
        self.input_vars = Some(vars);
        Ok(())
    }

    /// Number of clauses satisfied by a total assignment.
    pub fn count_satisfied(&self, assignment: &BitVector) -> Result<usize> {
        if assignment.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: assignment.len(),
            });
        }
        Ok(self
            .clauses
            .iter()
            .filter(|clause| {
                clause
                    .iter()
                    .any(|&lit| assignment.bit(lit.unsigned_abs() as usize - 1) == (lit > 0))
            })
            .count())
    }

    /// Copy of the formula with every literal appended as a unit clause.
    pub fn apply_assumptions(&self, literals: &[i32]) -> Result<Self> {
        let mut seen = vec![0i8; self.num_vars + 1];
        for &lit in literals {
            let var = lit.unsigned_abs() as usize;
            if lit == 0 || var > self.num_vars {
                return Err(Error::InvalidArgument(format!(
                    "assumption {lit} outside 1..={}",
                    self.num_vars
                )));
            }
            let sign = if lit > 0 { 1 } else { -1 };
            if seen[var] == -sign {
                return Err(Error::InvalidArgument(format!(
                    "assumptions contain both {var} and -{var}"
                )));
            }
            seen[var] = sign;
        }
        let mut out = self.clone();
        out.clauses.extend(literals.iter().map(|&lit| vec![lit]));
        Ok(out)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        if let Some(inputs) = &self.input_vars {
            let list: Vec<String> = inputs.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "c input {}", list.join(" "));
        }
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        out
    }
}

fn is_tautology(clause: &[i32]) -> bool {
    clause.iter().any(|&lit| clause.contains(&-lit))
}

pub(crate) fn check_var_set(vars: &[usize], num_vars: usize) -> Result<()> {
    let mut seen = vec![false; num_vars + 1];
    for &v in vars {
        if v == 0 || v > num_vars {
            return Err(Error::InvalidArgument(format!(
                "input variable {v} outside 1..={num_vars}"
            )));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidArgument(format!("input variable {v} listed twice")));
        }
    }
    Ok(())
}

/// Parses DIMACS CNF text.
///
/// Comment lines of the form `c input <indices...>` declare input variables.
/// A `%` line ends the clause section.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut inputs: Vec<(usize, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let mut words = rest.split_whitespace();
                if words.next() == Some("input") {
                    for w in words {
                        let v: usize = w
                            .parse()
                            .map_err(|_| DimacsError::new(line_no, format!("bad input variable {w:?}")))?;
                        inputs.push((v, line_no));
                    }
                }
                continue;
            }
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::new(line_no, "duplicate problem line"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(DimacsError::new(line_no, "expected 'p cnf <vars> <clauses>'"));
            }
            let vars = parts[2]
                .parse()
                .map_err(|_| DimacsError::new(line_no, format!("bad variable count {:?}", parts[2])))?;
            let count = parts[3]
                .parse()
                .map_err(|_| DimacsError::new(line_no, format!("bad clause count {:?}", parts[3])))?;
            header = Some((vars, count, line_no));
            continue;
        }
        let Some((num_vars, _, _)) = header else {
            return Err(DimacsError::new(line_no, "clause before the problem line"));
        };
        for token in line.split_whitespace() {
            let lit: i32 = token
                .parse()
                .map_err(|_| DimacsError::new(line_no, format!("bad literal {token:?}")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(DimacsError::new(line_no, "empty clause"));
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() as usize > num_vars {
                return Err(DimacsError::new(
                    line_no,
                    format!("literal {lit} exceeds the declared {num_vars} variables"),
                ));
            }
            current.push(lit);
        }
    }

    let Some((num_vars, expected, header_line)) = header else {
        return Err(DimacsError::new(0, "missing problem line"));
    };
    if !current.is_empty() {
        // tolerate a final clause without its terminating 0
        clauses.push(current);
    }
    if clauses.len() != expected {
        return Err(DimacsError::new(
            header_line,
            format!("header declares {expected} clauses, found {}", clauses.len()),
        ));
    }
    let mut formula = CnfFormula::new(num_vars, clauses).map_err(|e| DimacsError::new(header_line, e.to_string()))?;
    if !inputs.is_empty() {
        let line = inputs[0].1;
        let vars = inputs.into_iter().map(|(v, _)| v).collect();
        formula
            .set_input_vars(vars)
            .map_err(|e| DimacsError::new(line, e.to_string()))?;
    }
    Ok(formula)
}

/// Parses a sidecar list of whitespace-separated variable indices. Lines
/// starting with `c` or `#` are comments.
pub fn parse_input_vars(text: &str) -> Result<Vec<usize>> {
    let mut vars = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('c') || line.starts_with('#') {
            continue;
        }
        for w in line.split_whitespace() {
            vars.push(
                w.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad variable index {w:?}")))?,
            );
        }
    }
    Ok(vars)
}

/// Three-valued assignment over variables `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialAssignment {
    values: Vec<Option<bool>>,
}

impl PartialAssignment {
    pub fn empty(num_vars: usize) -> Self {
        Self {
            values: vec![None; num_vars],
        }
    }

    pub fn from_total(alpha: &BitVector) -> Self {
        Self {
            values: alpha.iter().map(Some).collect(),
        }
    }

    /// Builds an assignment from DIMACS literals; a complementary pair is an
    /// error.
    pub fn from_literals(num_vars: usize, literals: &[i32]) -> Result<Self> {
        let mut out = Self::empty(num_vars);
        for &lit in literals {
            let var = lit.unsigned_abs() as usize;
            if lit == 0 || var > num_vars {
                return Err(Error::InvalidArgument(format!("literal {lit} outside 1..={num_vars}")));
            }
            match out.values[var - 1] {
                Some(v) if v != (lit > 0) => {
                    return Err(Error::InvalidArgument(format!(
                        "variable {var} assigned both true and false"
                    )))
                }
                _ => out.values[var - 1] = Some(lit > 0),
            }
        }
        Ok(out)
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Value of variable `var` (1-based).
    pub fn get(&self, var: usize) -> Option<bool> {
        self.values.get(var.wrapping_sub(1)).copied().flatten()
    }

    pub fn set(&mut self, var: usize, value: bool) -> Result<()> {
        let n = self.values.len();
        let slot = self
            .values
            .get_mut(var.wrapping_sub(1))
            .ok_or(Error::IndexOutOfRange { index: var, n })?;
        *slot = Some(value);
        Ok(())
    }

    pub fn assigned(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// The assignment as a hypercube point when it is total.
    pub fn to_bitvector(&self) -> Option<BitVector> {
        let bits: Option<Vec<bool>> = self.values.iter().copied().collect();
        bits.map(|b| BitVector::from_bools(&b))
    }

    pub fn literal_value(&self, lit: i32) -> Option<bool> {
        self.get(lit.unsigned_abs() as usize).map(|v| v == (lit > 0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationStatus {
    Fixpoint,
    /// Clause index (0-based) found falsified.
    Conflict(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropagationOutcome {
    pub assignment: PartialAssignment,
    pub status: PropagationStatus,
    /// Clauses with a true literal under `assignment`; tautologies always count.
    pub satisfied: usize,
}

const NIL: u32 = u32::MAX;

/// Unit propagation with two watched literals.
///
/// Built once per formula; [`Propagator::propagate`] only copies the initial
/// watch lists, so a shared propagator can serve many concurrent callers.
/// The queue is FIFO: seed literals in variable order, then unit clauses in
/// clause order, then implied literals as they are found. Conflict-time
/// satisfied counts therefore depend only on the formula and the seed.
#[derive(Clone, Debug)]
pub struct Propagator {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    tautology: Vec<bool>,
    units: Vec<usize>,
    watch_pos: Vec<[u32; 2]>,
    head: Vec<u32>,
    next: Vec<u32>,
}

#[inline]
fn lit_index(lit: i32) -> usize {
    (lit.unsigned_abs() as usize) << 1 | (lit < 0) as usize
}

#[inline]
fn lit_value(val: &[i8], lit: i32) -> i8 {
    let v = val[lit.unsigned_abs() as usize];
    if lit < 0 {
        -v
    } else {
        v
    }
}

struct RunState {
    val: Vec<i8>,
    status: PropagationStatus,
}

impl Propagator {
    pub fn new(formula: &CnfFormula) -> Self {
        let m = formula.clauses.len();
        let mut clauses = Vec::with_capacity(m);
        let mut tautology = vec![false; m];
        for &c in &formula.tautologies {
            tautology[c] = true;
        }
        for clause in &formula.clauses {
            let mut dedup: Vec<i32> = Vec::with_capacity(clause.len());
            for &lit in clause {
                if !dedup.contains(&lit) {
                    dedup.push(lit);
                }
            }
            clauses.push(dedup);
        }
        let mut units = Vec::new();
        let mut watch_pos = vec![[0u32, 1u32]; m];
        let mut head = vec![NIL; 2 * (formula.num_vars + 1)];
        let mut next = vec![NIL; 2 * m];
        // push-front in reverse so every watch list starts in clause order
        for c in (0..m).rev() {
            if tautology[c] {
                continue;
            }
            if clauses[c].len() == 1 {
                continue;
            }
            watch_pos[c] = [0, 1];
            for (w, &lit) in clauses[c][..2].iter().enumerate() {
                let slot = 2 * c + w;
                let li = lit_index(lit);
                next[slot] = head[li];
                head[li] = slot as u32;
            }
        }
        for (c, clause) in clauses.iter().enumerate() {
            if clause.len() == 1 && !tautology[c] {
                units.push(c);
            }
        }
        Self {
            num_vars: formula.num_vars,
            clauses,
            tautology,
            units,
            watch_pos,
            head,
            next,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Propagates from `seed` to a fixpoint or the first conflict.
    pub fn propagate(&self, seed: &PartialAssignment) -> Result<PropagationOutcome> {
        if seed.num_vars() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: seed.num_vars(),
            });
        }
        let literals = seed
            .values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|b| if b { k as i32 + 1 } else { -(k as i32 + 1) }));
        let state = self.run(literals);
        let satisfied = self.count_true(&state.val);
        let values = state.val[1..]
            .iter()
            .map(|&v| match v {
                1 => Some(true),
                -1 => Some(false),
                _ => None,
            })
            .collect();
        Ok(PropagationOutcome {
            assignment: PartialAssignment { values },
            status: state.status,
            satisfied,
        })
    }

    /// Assigns `vars[k] = alpha[k]`, propagates, and returns the satisfied
    /// count together with the status. Hot path for the propagation
    /// objective; skips building a [`PartialAssignment`].
    pub fn satisfied_after(&self, vars: &[usize], alpha: &BitVector) -> (usize, PropagationStatus) {
        let literals = vars.iter().enumerate().map(|(k, &v)| {
            if alpha.bit(k) {
                v as i32
            } else {
                -(v as i32)
            }
        });
        let state = self.run(literals);
        (self.count_true(&state.val), state.status)
    }

    fn count_true(&self, val: &[i8]) -> usize {
        self.clauses
            .iter()
            .zip(&self.tautology)
            .filter(|(clause, &taut)| taut || clause.iter().any(|&lit| lit_value(val, lit) == 1))
            .count()
    }

    fn run(&self, seed: impl Iterator<Item = i32>) -> RunState {
        let mut val = vec![0i8; self.num_vars + 1];
        let mut trail: Vec<i32> = Vec::with_capacity(self.num_vars);
        for lit in seed {
            val[lit.unsigned_abs() as usize] = if lit > 0 { 1 } else { -1 };
            trail.push(lit);
        }
        for &c in &self.units {
            let lit = self.clauses[c][0];
            match lit_value(&val, lit) {
                1 => {}
                -1 => {
                    return RunState {
                        val,
                        status: PropagationStatus::Conflict(c),
                    }
                }
                _ => {
                    val[lit.unsigned_abs() as usize] = if lit > 0 { 1 } else { -1 };
                    trail.push(lit);
                }
            }
        }

        let mut pos = self.watch_pos.clone();
        let mut head = self.head.clone();
        let mut next = self.next.clone();
        let mut qhead = 0;
        while qhead < trail.len() {
            let falsified = -trail[qhead];
            qhead += 1;
            let fl = lit_index(falsified);
            let mut slot = head[fl];
            head[fl] = NIL;
            let mut tail = NIL;
            while slot != NIL {
                let s = slot as usize;
                let following = next[s];
                let c = s / 2;
                let w = s % 2;
                let clause = &self.clauses[c];
                let other = clause[pos[c][1 - w] as usize];
                let keep = if lit_value(&val, other) == 1 {
                    true
                } else {
                    let replacement = (0..clause.len()).find(|&k| {
                        k as u32 != pos[c][0] && k as u32 != pos[c][1] && lit_value(&val, clause[k]) != -1
                    });
                    match replacement {
                        Some(k) => {
                            pos[c][w] = k as u32;
                            let li = lit_index(clause[k]);
                            next[s] = head[li];
                            head[li] = slot;
                            false
                        }
                        None => {
                            if lit_value(&val, other) == 0 {
                                val[other.unsigned_abs() as usize] = if other > 0 { 1 } else { -1 };
                                trail.push(other);
                            } else {
                                return RunState {
                                    val,
                                    status: PropagationStatus::Conflict(c),
                                };
                            }
                            true
                        }
                    }
                };
                if keep {
                    next[s] = NIL;
                    if tail == NIL {
                        head[fl] = slot;
                    } else {
                        next[tail as usize] = slot;
                    }
                    tail = slot;
                }
                slot = following;
            }
        }
        RunState {
            val,
            status: PropagationStatus::Fixpoint,
        }
    }
}

/// One-shot unit propagation of `formula` from `seed`.
pub fn unit_propagate(formula: &CnfFormula, seed: &PartialAssignment) -> Result<PropagationOutcome> {
    Propagator::new(formula).propagate(seed)
}

/// Outcome of checking a declared input set as a unit-propagation backdoor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackdoorReport {
    pub seeds: u64,
    /// Seeds propagated to a total assignment without conflict.
    pub total: u64,
    pub conflicts: u64,
    /// Seeds whose propagation stopped with unassigned variables.
    pub incomplete: u64,
}

impl BackdoorReport {
    pub fn is_backdoor(&self) -> bool {
        self.incomplete == 0
    }
}

/// Propagates every assignment of `inputs` (at most 16 variables) and
/// classifies the outcomes.
pub fn check_backdoor(formula: &CnfFormula, inputs: &[usize]) -> Result<BackdoorReport> {
    check_var_set(inputs, formula.num_vars)?;
    if inputs.len() > 16 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive backdoor check needs at most 16 inputs, got {}",
            inputs.len()
        )));
    }
    let prop = Propagator::new(formula);
    let mut report = BackdoorReport {
        seeds: 0,
        total: 0,
        conflicts: 0,
        incomplete: 0,
    };
    for alpha in BitVector::enumerate(inputs.len()) {
        let mut seed = PartialAssignment::empty(formula.num_vars);
        for (k, &v) in inputs.iter().enumerate() {
            seed.values[v - 1] = Some(alpha.bit(k));
        }
        let out = prop.propagate(&seed)?;
        report.seeds += 1;
        match out.status {
            PropagationStatus::Conflict(_) => report.conflicts += 1,
            PropagationStatus::Fixpoint if out.assignment.is_total() => report.total += 1,
            PropagationStatus::Fixpoint => report.incomplete += 1,
        }
    }
    Ok(report)
}

/// Small complete solver (DPLL over [`Propagator`]), used to decide the
/// formulas this crate exports. Returns a satisfying total assignment.
pub fn solve(formula: &CnfFormula) -> Option<BitVector> {
    let prop = Propagator::new(formula);
    dpll(&prop, PartialAssignment::empty(formula.num_vars))
}

fn dpll(prop: &Propagator, seed: PartialAssignment) -> Option<BitVector> {
    let out = prop.propagate(&seed).ok()?;
    if let PropagationStatus::Conflict(_) = out.status {
        return None;
    }
    let Some(var) = out.assignment.values.iter().position(Option::is_none) else {
        return out.assignment.to_bitvector();
    };
    if out.satisfied == prop.num_clauses() {
        let bits: Vec<bool> = out.assignment.values.iter().map(|v| v.unwrap_or(false)).collect();
        return Some(BitVector::from_bools(&bits));
    }
    for value in [true, false] {
        let mut branch = out.assignment.clone();
        branch.values[var] = Some(value);
        if let Some(model) = dpll(prop, branch) {
            return Some(model);
        }
    }
    None
}
