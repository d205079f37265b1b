use rand::Rng;

use super::{Meter, SearchBudget, SearchResult};
use crate::error::{Error, Result};
use crate::hypercube::BitVector;
use crate::merging::{MappingMode, MergingMapping};
use crate::objectives::Objective;

/// Flips every bit independently with probability `p`, bits `1..=n` in order.
pub fn one_plus_one_mutation<R: Rng + ?Sized>(alpha: &BitVector, p: f64, rng: &mut R) -> Result<BitVector> {
    check_rate(p)?;
    let mut out = alpha.clone();
    for k in 0..out.len() {
        if rng.random_bool(p) {
            out.toggle(k);
        }
    }
    Ok(out)
}

/// Merging-variable random mutation: each of the `r` blocks is selected
/// with probability `1/r` (all trials first, in block order), then every
/// selected block's bits are flipped with probability `1/l_j`.
pub fn mv_random_mutation<R: Rng + ?Sized>(
    mapping: &MergingMapping,
    alpha: &BitVector,
    rng: &mut R,
) -> Result<BitVector> {
    mapping.check_dim(alpha)?;
    let select = 1.0 / mapping.r() as f64;
    let selected: Vec<bool> = (0..mapping.r()).map(|_| rng.random_bool(select)).collect();
    let mut out = alpha.clone();
    for (block, _) in mapping.blocks().iter().zip(&selected).filter(|(_, &s)| s) {
        let p = 1.0 / block.len() as f64;
        for &i in block {
            if rng.random_bool(p) {
                out.toggle(i - 1);
            }
        }
    }
    Ok(out)
}

/// (1+1)-EA: mutate with [`one_plus_one_mutation`] (default rate `1/n`) and
/// accept the offspring when it is at least as good.
pub fn one_plus_one_ea<R: Rng + ?Sized>(
    f: &Objective,
    start: &BitVector,
    p: Option<f64>,
    budget: &SearchBudget,
    rng: &mut R,
) -> Result<SearchResult> {
    let p = p.unwrap_or(1.0 / start.len().max(1) as f64);
    check_rate(p)?;
    evolve(f, start, budget, |x, rng| one_plus_one_mutation(x, p, rng), rng)
}

/// (1+1)-MVEA with a fixed mapping.
pub fn one_plus_one_mvea<R: Rng + ?Sized>(
    f: &Objective,
    mapping: &MergingMapping,
    start: &BitVector,
    budget: &SearchBudget,
    rng: &mut R,
) -> Result<SearchResult> {
    if f.dim() != mapping.n() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: mapping.n(),
        });
    }
    evolve(f, start, budget, |x, rng| mv_random_mutation(mapping, x, rng), rng)
}

/// Experimental (1+1)-MVEA variant drawing a fresh mapping before every
/// mutation.
pub fn one_plus_one_mvea_redrawing<R: Rng + ?Sized>(
    f: &Objective,
    r: usize,
    mode: MappingMode,
    start: &BitVector,
    budget: &SearchBudget,
    rng: &mut R,
) -> Result<SearchResult> {
    let n = f.dim();
    // fail early on bad r rather than at the first mutation
    MergingMapping::random(n, r, mode, rng)?;
    evolve(
        f,
        start,
        budget,
        |x, rng| {
            let m = MergingMapping::random(n, r, mode, rng)?;
            mv_random_mutation(&m, x, rng)
        },
        rng,
    )
}

fn check_rate(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mutation rate must lie in (0, 1], got {p}")))
    }
}

fn evolve<R, M>(f: &Objective, start: &BitVector, budget: &SearchBudget, mut mutate: M, rng: &mut R) -> Result<SearchResult>
where
    R: Rng + ?Sized,
    M: FnMut(&BitVector, &mut R) -> Result<BitVector>,
{
    if start.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: start.len(),
        });
    }
    if budget.max_evaluations.is_none()
        && budget.max_iterations.is_none()
        && budget.max_stagnation.is_none()
        && budget.wall_clock.is_none()
        && budget.target.is_none()
    {
        return Err(Error::InvalidArgument(
            "an evolutionary run needs at least one stopping rule".into(),
        ));
    }
    let mut current = start.clone();
    let mut value = f.evaluate(start);
    let mut meter = Meter::new(budget, value);
    let terminated_by = loop {
        if let Some(t) = meter.iteration_limit() {
            break t;
        }
        let child = mutate(&current, rng)?;
        let x = f.evaluate(&child);
        let improved = meter.record(x);
        if x >= value {
            current = child;
            value = x;
        }
        meter.finish_iteration(improved);
    };
    Ok(meter.into_result(current, terminated_by))
}
