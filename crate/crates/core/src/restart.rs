//! Tabu archive of strong local extrema and distance-constrained restarts.
//!
//! After MVHC stalls at a strong local extremum `a*` whose escape radius is
//! the critical block size `l*`, the next start point is chosen at Hamming
//! distance exactly `l* + 1` from every archived extremum. Such systems of
//! exact-distance constraints are solved by a complete backtracking search
//! with cardinality pruning; infeasible systems are relaxed by pushing every
//! target one step further out. Uniform steps keep the parity of
//! `t_q + |a_q|` fixed, so [`RelaxSchedule::ParityAware`] also moves the
//! targets whose parity disagrees with the majority.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::CnfFormula;
use crate::error::{Error, Result};
use crate::hypercube::BitVector;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabuEntry {
    pub point: BitVector,
    /// Largest block size among the mappings that failed to improve `point`.
    pub critical_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabuArchive {
    n: usize,
    entries: Vec<TabuEntry>,
}

impl TabuArchive {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[TabuEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a strong extremum. A point already archived keeps one entry
    /// whose critical size is the largest seen.
    pub fn record(&mut self, point: BitVector, critical_size: usize) -> Result<()> {
        if point.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: point.len(),
            });
        }
        if critical_size == 0 {
            return Err(Error::InvalidArgument("critical size must be at least 1".into()));
        }
        match self.entries.iter_mut().find(|e| e.point == point) {
            Some(entry) => entry.critical_size = entry.critical_size.max(critical_size),
            None => self.entries.push(TabuEntry { point, critical_size }),
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let archive: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad archive JSON: {e}")))?;
        if let Some(bad) = archive.entries.iter().find(|e| e.point.len() != archive.n) {
            return Err(Error::DimensionMismatch {
                expected: archive.n,
                found: bad.point.len(),
            });
        }
        Ok(archive)
    }
}

/// Constraints `d_H(z, anchor_q) = target_q` for every anchor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceConstraintSystem {
    n: usize,
    anchors: Vec<(BitVector, usize)>,
}

impl DistanceConstraintSystem {
    pub fn new(n: usize, anchors: Vec<(BitVector, usize)>) -> Result<Self> {
        for (point, target) in &anchors {
            if point.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: point.len(),
                });
            }
            if *target > n {
                return Err(Error::InvalidArgument(format!(
                    "target distance {target} exceeds the dimension {n}"
                )));
            }
        }
        Ok(Self { n, anchors })
    }

    /// One constraint per archive entry at distance `critical_size + 1`,
    /// capped at `n`.
    pub fn initial(archive: &TabuArchive) -> Result<Self> {
        if archive.is_empty() {
            return Err(Error::InvalidArgument("the tabu archive is empty".into()));
        }
        let n = archive.n();
        Self::new(
            n,
            archive
                .entries()
                .iter()
                .map(|e| (e.point.clone(), (e.critical_size + 1).min(n)))
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn anchors(&self) -> &[(BitVector, usize)] {
        &self.anchors
    }

    pub fn is_satisfied_by(&self, z: &BitVector) -> bool {
        self.anchors
            .iter()
            .all(|(a, target)| z.hamming_distance(a).ok() == Some(*target))
    }

    /// Every target one step further out, capped at `n`.
    pub fn relaxed(&self) -> Self {
        self.relaxed_by(RelaxSchedule::Uniform)
    }

    pub fn relaxed_by(&self, schedule: RelaxSchedule) -> Self {
        let n = self.n;
        let mut anchors: Vec<(BitVector, usize)> =
            self.anchors.iter().map(|(a, t)| (a.clone(), (t + 1).min(n))).collect();
        if schedule == RelaxSchedule::ParityAware && !anchors.is_empty() {
            // every solution z has t_q + |a_q| = |z| (mod 2) for all q
            let class = |(a, t): &(BitVector, usize)| (t + a.count_ones()) % 2;
            let odd = anchors.iter().filter(|e| class(e) == 1).count();
            let keep = match (2 * odd).cmp(&anchors.len()) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => class(&anchors[0]),
            };
            for entry in &mut anchors {
                if class(entry) != keep {
                    entry.1 = if entry.1 < n { entry.1 + 1 } else { entry.1 - 1 };
                }
            }
        }
        Self { n, anchors }
    }
}

/// How an infeasible system is relaxed between solver rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxSchedule {
    /// Every target `+1`, capped at `n`.
    #[default]
    Uniform,
    /// Every target `+1`, then targets whose parity contradicts the
    /// majority move one more step so that the parity conditions between
    /// anchors can hold. Uniform steps never change those conditions.
    ParityAware,
}

/// Result of a solver call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solve {
    Feasible(BitVector),
    Infeasible,
    /// The node limit was hit before the search finished.
    Unknown,
}

/// Complete search: returns a point meeting every constraint exactly, or
/// `None` when none exists. Which solution is returned depends on `rng`.
pub fn solve_distance_system<R: Rng + ?Sized>(system: &DistanceConstraintSystem, rng: &mut R) -> Option<BitVector> {
    match solve_with_limit(system, rng, None) {
        Solve::Feasible(z) => Some(z),
        Solve::Infeasible => None,
        Solve::Unknown => unreachable!("unlimited search always finishes"),
    }
}

/// Like [`solve_distance_system`] but gives up after `node_limit` search
/// nodes.
pub fn solve_with_limit<R: Rng + ?Sized>(
    system: &DistanceConstraintSystem,
    rng: &mut R,
    node_limit: Option<u64>,
) -> Solve {
    let mut order: Vec<usize> = (0..system.n).collect();
    order.shuffle(rng);
    let mut search = Backtrack::new(system, order, node_limit);
    let found = search.run(&mut |_| true, &mut Choice::Random(rng));
    match found {
        Some(()) => {
            let z = search.point();
            // soundness is part of the contract, not only a test concern
            assert!(
                system.is_satisfied_by(&z),
                "distance solver produced a point violating its constraints"
            );
            Solve::Feasible(z)
        }
        None if search.aborted => Solve::Unknown,
        None => Solve::Infeasible,
    }
}

/// Every solution of the system, in lexicographic order of the text form.
/// Exponential in general; meant for small `n`.
pub fn enumerate_solutions(system: &DistanceConstraintSystem) -> Vec<BitVector> {
    let mut search = Backtrack::new(system, (0..system.n).collect(), None);
    let mut out = Vec::new();
    search.run(
        &mut |s: &Backtrack| {
            out.push(s.point());
            false
        },
        &mut Choice::<crate::rng::SearchRng>::ZeroFirst,
    );
    out
}

enum Choice<'r, R: ?Sized> {
    Random(&'r mut R),
    ZeroFirst,
}

struct Backtrack<'s> {
    system: &'s DistanceConstraintSystem,
    order: Vec<usize>,
    z: Vec<bool>,
    /// Remaining distance each anchor still needs.
    need: Vec<i64>,
    /// disagree[p][k]: positions in order[k..] where pair p's anchors differ.
    disagree: Vec<Vec<u32>>,
    pairs: Vec<(usize, usize)>,
    nodes: u64,
    node_limit: Option<u64>,
    aborted: bool,
}

impl<'s> Backtrack<'s> {
    fn new(system: &'s DistanceConstraintSystem, order: Vec<usize>, node_limit: Option<u64>) -> Self {
        let n = system.n;
        let r = system.anchors.len();
        let mut pairs = Vec::new();
        let mut disagree = Vec::new();
        for q in 0..r {
            for s in q + 1..r {
                let (a, b) = (&system.anchors[q].0, &system.anchors[s].0);
                let mut suffix = vec![0u32; n + 1];
                for k in (0..n).rev() {
                    let i = order[k];
                    suffix[k] = suffix[k + 1] + (a.bit(i) != b.bit(i)) as u32;
                }
                pairs.push((q, s));
                disagree.push(suffix);
            }
        }
        Self {
            system,
            order,
            z: vec![false; n],
            need: system.anchors.iter().map(|(_, t)| *t as i64).collect(),
            disagree,
            pairs,
            nodes: 0,
            node_limit,
            aborted: false,
        }
    }

    fn point(&self) -> BitVector {
        BitVector::from_bools(&self.z)
    }

    /// Can the constraints still be met with positions order[depth..] free?
    fn consistent(&self, depth: usize) -> bool {
        let rem = (self.system.n - depth) as i64;
        if self.need.iter().any(|&d| d < 0 || d > rem) {
            return false;
        }
        for (p, &(q, s)) in self.pairs.iter().enumerate() {
            let dis = self.disagree[p][depth] as i64;
            let agree = rem - dis;
            let sum = self.need[q] + self.need[s];
            let diff = (self.need[q] - self.need[s]).abs();
            if sum < dis || (sum - dis) % 2 != 0 || sum - dis > 2 * agree || diff > dis {
                return false;
            }
        }
        true
    }

    /// Depth-first search; `on_solution` returns true to stop.
    fn run<R: Rng + ?Sized>(
        &mut self,
        on_solution: &mut dyn FnMut(&Backtrack) -> bool,
        choice: &mut Choice<'_, R>,
    ) -> Option<()> {
        if !self.consistent(0) {
            return None;
        }
        self.descend(0, on_solution, choice)
    }

    fn descend<R: Rng + ?Sized>(
        &mut self,
        depth: usize,
        on_solution: &mut dyn FnMut(&Backtrack) -> bool,
        choice: &mut Choice<'_, R>,
    ) -> Option<()> {
        if depth == self.system.n {
            return on_solution(self).then_some(());
        }
        self.nodes += 1;
        if self.node_limit.is_some_and(|limit| self.nodes > limit) {
            self.aborted = true;
            return None;
        }
        let i = self.order[depth];
        let first = match choice {
            Choice::Random(rng) => rng.random_bool(0.5),
            Choice::ZeroFirst => false,
        };
        for value in [first, !first] {
            self.z[i] = value;
            for (q, (a, _)) in self.system.anchors.iter().enumerate() {
                if a.bit(i) != value {
                    self.need[q] -= 1;
                }
            }
            let found = if self.consistent(depth + 1) {
                self.descend(depth + 1, on_solution, choice)
            } else {
                None
            };
            for (q, (a, _)) in self.system.anchors.iter().enumerate() {
                if a.bit(i) != value {
                    self.need[q] += 1;
                }
            }
            if found.is_some() {
                return found;
            }
            if self.aborted {
                return None;
            }
        }
        self.z[i] = false;
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelaxOutcome {
    /// `round` is the number of relaxations applied (0 = solved as given).
    Solved {
        point: BitVector,
        round: usize,
        system: DistanceConstraintSystem,
    },
    Exhausted {
        rounds: usize,
    },
}

/// Solves the system, relaxing every target by one after each failure, for
/// at most `max_rounds` relaxations.
pub fn relax_and_retry<R: Rng + ?Sized>(
    system: &DistanceConstraintSystem,
    rng: &mut R,
    max_rounds: usize,
) -> Result<RelaxOutcome> {
    relax_and_retry_limited(system, rng, max_rounds, None, RelaxSchedule::Uniform)
}

/// [`relax_and_retry`] with a per-round node limit and a choice of
/// relaxation; a round that hits the limit counts as infeasible.
pub fn relax_and_retry_limited<R: Rng + ?Sized>(
    system: &DistanceConstraintSystem,
    rng: &mut R,
    max_rounds: usize,
    node_limit: Option<u64>,
    schedule: RelaxSchedule,
) -> Result<RelaxOutcome> {
    if max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
    }
    let mut current = system.clone();
    for round in 0..=max_rounds {
        if let Solve::Feasible(point) = solve_with_limit(&current, rng, node_limit) {
            return Ok(RelaxOutcome::Solved {
                point,
                round,
                system: current,
            });
        }
        let next = current.relaxed_by(schedule);
        if next == current {
            return Ok(RelaxOutcome::Exhausted { rounds: round });
        }
        current = next;
    }
    Ok(RelaxOutcome::Exhausted { rounds: max_rounds })
}

/// Encodes the system as CNF over `z_1..z_n` (variables `1..=n`) plus
/// sequential-counter registers. The formula is satisfiable iff the system
/// is, and the first `n` variables of any model form a solution.
pub fn export_system_as_cnf(system: &DistanceConstraintSystem) -> CnfFormula {
    let n = system.n;
    let mut next_var = n as i32;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    for (anchor, target) in &system.anchors {
        // y_i is true iff z_i differs from the anchor
        let y: Vec<i32> = (0..n)
            .map(|i| if anchor.bit(i) { -(i as i32 + 1) } else { i as i32 + 1 })
            .collect();
        encode_exactly(&y, *target, &mut next_var, &mut clauses);
    }
    if clauses.is_empty() {
        // no anchors: every point is a solution; keep the formula nonempty
        clauses.push(vec![1, -1]);
    }
    let mut formula = CnfFormula::new(next_var as usize, clauses).expect("encoding produces valid clauses");
    formula
        .set_input_vars((1..=n).collect())
        .expect("primary variables are in range");
    formula
}

/// Exactly `k` of `lits` are true, via a sequential counter whose register
/// `s(i, j)` is equivalent to "at least j of the first i literals".
fn encode_exactly(lits: &[i32], k: usize, next_var: &mut i32, clauses: &mut Vec<Vec<i32>>) {
    let n = lits.len();
    if k == 0 {
        clauses.extend(lits.iter().map(|&y| vec![-y]));
        return;
    }
    if k == n {
        clauses.extend(lits.iter().map(|&y| vec![y]));
        return;
    }
    let width = k + 1;
    // regs[i][j - 1] = s(i + 1, j)
    let mut regs: Vec<Vec<i32>> = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<i32> = (0..width.min(i + 1))
            .map(|_| {
                *next_var += 1;
                *next_var
            })
            .collect();
        let y = lits[i];
        for (j0, &s) in row.iter().enumerate() {
            let prev_same = if i > 0 { regs[i - 1].get(j0).copied() } else { None };
            let prev_lower = if i > 0 && j0 > 0 { regs[i - 1].get(j0 - 1).copied() } else { None };
            match (j0, prev_same, prev_lower) {
                // s(1,1) <-> y
                (0, None, _) => {
                    clauses.push(vec![-s, y]);
                    clauses.push(vec![-y, s]);
                }
                // s(i,1) <-> s(i-1,1) or y
                (0, Some(u), _) => {
                    clauses.push(vec![-s, u, y]);
                    clauses.push(vec![-u, s]);
                    clauses.push(vec![-y, s]);
                }
                // s(i,j) <-> s(i-1,j) or (y and s(i-1,j-1))
                (_, Some(u), Some(p)) => {
                    clauses.push(vec![-u, s]);
                    clauses.push(vec![-y, -p, s]);
                    clauses.push(vec![-s, u, y]);
                    clauses.push(vec![-s, u, p]);
                }
                // s(i,i) <-> y and s(i-1,i-1)
                (_, None, Some(p)) => {
                    clauses.push(vec![-s, y]);
                    clauses.push(vec![-s, p]);
                    clauses.push(vec![-y, -p, s]);
                }
                (_, _, None) => unreachable!("j > 1 always has a lower register"),
            }
        }
        regs.push(row);
    }
    let last = &regs[n - 1];
    clauses.push(vec![last[k - 1]]);
    clauses.push(vec![-last[k]]);
}

/// The restart point encoded by a model of [`export_system_as_cnf`].
pub fn decode_model(system: &DistanceConstraintSystem, model: &BitVector) -> BitVector {
    BitVector::from_bools(&model.iter().take(system.n).collect::<Vec<_>>())
}
