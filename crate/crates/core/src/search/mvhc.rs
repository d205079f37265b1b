use rand::Rng;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::{Deserialize, Serialize};

use super::{Improvement, Meter, SearchBudget, SearchResult, Termination};
use crate::error::{Error, Result};
use crate::hypercube::BitVector;
use crate::merging::{MappingMode, MergingMapping, DEFAULT_BLOCK_CAP, MAX_BLOCK_BITS};
use crate::objectives::Objective;
use crate::restart::{relax_and_retry_limited, DistanceConstraintSystem, RelaxOutcome, RelaxSchedule, TabuArchive};

/// Redraws allowed when an occupancy mapping exceeds the block cap.
const CAP_MAX_REDRAWS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartConfig {
    /// Relaxation rounds per restart before giving up.
    pub max_relax_rounds: usize,
    /// Search-node limit per solver call; `None` for a complete search.
    pub node_limit: Option<u64>,
    pub max_restarts: Option<usize>,
    pub schedule: RelaxSchedule,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            max_relax_rounds: 8,
            node_limit: Some(1_000_000),
            max_restarts: None,
            schedule: RelaxSchedule::ParityAware,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MvhcConfig {
    pub r: usize,
    pub mode: MappingMode,
    /// Consecutive non-improving mappings that make a point a strong local
    /// extremum.
    pub stability: usize,
    pub policy: Improvement,
    pub workers: usize,
    /// Largest block a drawn mapping may have.
    pub block_cap: usize,
    pub restart: Option<RestartConfig>,
}

impl MvhcConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            mode: MappingMode::Occupancy,
            stability: 10,
            policy: Improvement::First,
            workers: 1,
            block_cap: DEFAULT_BLOCK_CAP,
            restart: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.r == 0 || self.r >= n {
            return Err(Error::InvalidArgument(format!(
                "r: need 1 <= r < n, got r = {}, n = {n}",
                self.r
            )));
        }
        if self.stability == 0 {
            return Err(Error::InvalidArgument("K: must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers: must be at least 1".into()));
        }
        if self.block_cap == 0 || self.block_cap > MAX_BLOCK_BITS {
            return Err(Error::InvalidArgument(format!(
                "block_cap: must lie in 1..={MAX_BLOCK_BITS}"
            )));
        }
        if n.div_ceil(self.r) > self.block_cap {
            return Err(Error::InvalidArgument(format!(
                "r: {} blocks over {n} variables force a block larger than the cap {}",
                self.r, self.block_cap
            )));
        }
        if let Some(rc) = &self.restart {
            if rc.max_relax_rounds == 0 {
                return Err(Error::InvalidArgument("restart: max_relax_rounds must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvhcOutcome {
    pub result: SearchResult,
    /// Whether `result.best_point` survived `stability` consecutive
    /// mappings without improvement.
    pub strong_extremum: bool,
    /// Largest block size among the mappings that confirmed the best point
    /// strong.
    pub critical_size: Option<usize>,
    pub archive: TabuArchive,
    pub restarts: usize,
}

/// One MVHC iteration: hill climbing in the merged space of `mapping`
/// starting from `alpha`, returned as a hypercube point.
///
/// With `workers > 1` each neighborhood scan is split by block across a
/// thread pool whenever the remaining evaluation budget covers the whole
/// scan. Results are combined in block order, so in best-improvement mode
/// the returned point does not depend on `workers`.
pub fn mvhc_iteration(
    f: &Objective,
    alpha: &BitVector,
    mapping: &MergingMapping,
    policy: Improvement,
    budget: &SearchBudget,
    workers: usize,
) -> Result<SearchResult> {
    if f.dim() != mapping.n() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: mapping.n(),
        });
    }
    mapping.check_dim(alpha)?;
    mapping.check_block_cap(DEFAULT_BLOCK_CAP)?;
    let pool = build_pool(workers)?;
    let start_value = f.evaluate(alpha);
    let mut meter = Meter::new(budget, start_value);
    let climb = climb_merged(
        f,
        mapping,
        alpha.clone(),
        start_value,
        policy,
        pool.as_ref(),
        &mut meter,
        true,
    );
    Ok(meter.into_result(climb.point, climb.cut.unwrap_or(Termination::LocalOptimum)))
}

/// Iterated MVHC: draws a fresh mapping each round and climbs from the
/// current point until it survives `stability` consecutive mappings.
///
/// Without restarts the strong extremum is returned. With restarts it is
/// archived, a point at the prescribed distances from every archived
/// extremum is solved for, and the search continues from there; the best
/// point seen overall is returned. An iteration is one mapping draw, and
/// stagnation counts rounds without a new best value.
pub fn mvhc<R: Rng + ?Sized>(
    f: &Objective,
    start: &BitVector,
    config: &MvhcConfig,
    budget: &SearchBudget,
    rng: &mut R,
) -> Result<MvhcOutcome> {
    let n = f.dim();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: start.len(),
        });
    }
    config.validate(n)?;
    let pool = build_pool(config.workers)?;

    let start_value = f.evaluate(start);
    let mut meter = Meter::new(budget, start_value);
    let mut current = start.clone();
    let mut current_value = start_value;
    let mut best = (current.clone(), current_value);
    let mut best_critical = None;
    let mut streak = 0;
    let mut critical = 0;
    let mut archive = TabuArchive::new(n);
    let mut restarts = 0;

    let terminated_by = loop {
        if let Some(t) = meter.iteration_limit() {
            break t;
        }
        let mapping = draw_mapping(n, config, rng)?;
        let climb = climb_merged(
            f,
            &mapping,
            current.clone(),
            current_value,
            config.policy,
            pool.as_ref(),
            &mut meter,
            false,
        );
        if climb.value > current_value {
            current = climb.point;
            current_value = climb.value;
            streak = 0;
            critical = 0;
        } else {
            streak += 1;
            critical = critical.max(mapping.max_block_size());
        }
        let improved = current_value > best.1;
        if improved {
            best = (current.clone(), current_value);
            best_critical = None;
        }
        meter.finish_iteration(improved);
        if let Some(t) = climb.cut {
            break t;
        }
        if streak < config.stability {
            continue;
        }

        if current == best.0 {
            best_critical = Some(critical);
        }
        let Some(rc) = &config.restart else {
            break Termination::StrongExtremum;
        };
        if rc.max_restarts.is_some_and(|max| restarts >= max) {
            break Termination::RestartsExhausted;
        }
        archive.record(current.clone(), critical)?;
        let system = DistanceConstraintSystem::initial(&archive)?;
        match relax_and_retry_limited(&system, rng, rc.max_relax_rounds, rc.node_limit, rc.schedule)? {
            RelaxOutcome::Solved { point, .. } => {
                if let Some(t) = meter.evaluation_limit() {
                    break t;
                }
                let v = f.evaluate(&point);
                meter.record(v);
                restarts += 1;
                current = point;
                current_value = v;
                streak = 0;
                critical = 0;
                if v > best.1 {
                    best = (current.clone(), v);
                    best_critical = None;
                }
            }
            RelaxOutcome::Exhausted { .. } => break Termination::RestartsExhausted,
        }
    };

    Ok(MvhcOutcome {
        result: meter.into_result(best.0, terminated_by),
        strong_extremum: best_critical.is_some(),
        critical_size: best_critical,
        archive,
        restarts,
    })
}

fn build_pool(workers: usize) -> Result<Option<ThreadPool>> {
    match workers {
        0 => Err(Error::InvalidArgument("workers: must be at least 1".into())),
        1 => Ok(None),
        w => ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(Some)
            .map_err(|e| Error::InvalidArgument(format!("workers: cannot start thread pool: {e}"))),
    }
}

fn draw_mapping<R: Rng + ?Sized>(n: usize, config: &MvhcConfig, rng: &mut R) -> Result<MergingMapping> {
    for _ in 0..CAP_MAX_REDRAWS {
        let m = MergingMapping::random(n, config.r, config.mode, rng)?;
        if m.max_block_size() <= config.block_cap {
            return Ok(m);
        }
    }
    Err(Error::InvalidArgument(format!(
        "block_cap: no mapping with blocks of at most {} found in {CAP_MAX_REDRAWS} draws",
        config.block_cap
    )))
}

struct Climb {
    point: BitVector,
    value: f64,
    cut: Option<Termination>,
}

/// Hill climbing in the merged space, working on hypercube points directly.
/// `count_scans` makes every scan an iteration of `meter`; otherwise the
/// caller owns the iteration count.
#[allow(clippy::too_many_arguments)]
fn climb_merged(
    f: &Objective,
    m: &MergingMapping,
    start: BitVector,
    start_value: f64,
    policy: Improvement,
    pool: Option<&ThreadPool>,
    meter: &mut Meter,
    count_scans: bool,
) -> Climb {
    let scan_size = (m.neighborhood_size() - 1) as u64;
    let mut current = start;
    let mut value = start_value;
    let mut best: Option<(BitVector, f64)> = None;
    let cut = loop {
        let limit = if count_scans {
            meter.iteration_limit()
        } else if meter.target_reached() {
            Some(Termination::TargetReached)
        } else {
            meter.evaluation_limit()
        };
        if let Some(t) = limit {
            break Some(t);
        }
        let fits = meter.remaining().is_none_or(|rem| rem >= scan_size);
        let scan = match pool {
            Some(pool) if fits => parallel_scan(f, m, &current, value, policy, pool, meter),
            _ => sequential_scan(f, m, &current, value, policy, meter),
        };
        if let Some((j, v, x)) = scan.seen {
            if best.as_ref().is_none_or(|b| x > b.1) {
                let mut p = current.clone();
                m.write_block(&mut p, j, v);
                best = Some((p, x));
            }
        }
        let moved = scan.step.is_some();
        if let Some((j, v, x)) = scan.step {
            m.write_block(&mut current, j, v);
            value = x;
        }
        if count_scans {
            meter.finish_iteration(moved);
        }
        if scan.cut.is_some() {
            break scan.cut;
        }
        if !moved {
            break None;
        }
    };
    match best {
        Some((p, x)) if x > value => Climb { point: p, value: x, cut },
        _ => Climb {
            point: current,
            value,
            cut,
        },
    }
}

/// A neighbor is `(block, value, objective)`.
struct Scan {
    step: Option<(usize, u64, f64)>,
    /// The best neighbor evaluated, first among ties.
    seen: Option<(usize, u64, f64)>,
    cut: Option<Termination>,
}

fn sequential_scan(
    f: &Objective,
    m: &MergingMapping,
    current: &BitVector,
    value: f64,
    policy: Improvement,
    meter: &mut Meter,
) -> Scan {
    let mut work = current.clone();
    let mut step: Option<(usize, u64, f64)> = None;
    let mut cut = None;
    'blocks: for (j, block) in m.blocks().iter().enumerate() {
        let original = m.block_value(current, j);
        for v in 0..1u64 << block.len() {
            if v == original {
                continue;
            }
            if let Some(t) = meter.evaluation_limit() {
                cut = Some(t);
                break 'blocks;
            }
            m.write_block(&mut work, j, v);
            let x = f.evaluate(&work);
            meter.record(x);
            if x > step.map_or(value, |s| s.2) {
                step = Some((j, v, x));
                if policy == Improvement::First {
                    break 'blocks;
                }
            }
        }
        m.write_block(&mut work, j, original);
    }
    Scan { step, seen: step, cut }
}

fn parallel_scan(
    f: &Objective,
    m: &MergingMapping,
    current: &BitVector,
    value: f64,
    policy: Improvement,
    pool: &ThreadPool,
    meter: &mut Meter,
) -> Scan {
    let first = policy == Improvement::First;
    let per_block: Vec<(u64, Vec<f64>)> = pool.install(|| {
        (0..m.r())
            .into_par_iter()
            .map(|j| {
                let original = m.block_value(current, j);
                let mut work = current.clone();
                let mut values = Vec::new();
                for v in 0..1u64 << m.blocks()[j].len() {
                    if v == original {
                        continue;
                    }
                    m.write_block(&mut work, j, v);
                    let x = f.evaluate(&work);
                    values.push(x);
                    if first && x > value {
                        break;
                    }
                }
                (original, values)
            })
            .collect()
    });

    let mut step: Option<(usize, u64, f64)> = None;
    let mut seen: Option<(usize, u64, f64)> = None;
    for (j, (original, values)) in per_block.into_iter().enumerate() {
        for (k, x) in values.into_iter().enumerate() {
            let v = if (k as u64) < original { k as u64 } else { k as u64 + 1 };
            meter.record(x);
            if x > seen.map_or(value, |s| s.2) {
                seen = Some((j, v, x));
            }
            let take = match (policy, step) {
                (Improvement::First, None) => x > value,
                (Improvement::First, Some(_)) => false,
                (Improvement::Best, s) => x > s.map_or(value, |s| s.2),
            };
            if take {
                step = Some((j, v, x));
            }
        }
    }
    Scan { step, seen, cut: None }
}
