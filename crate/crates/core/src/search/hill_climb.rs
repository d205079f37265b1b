use super::{Improvement, Meter, SearchBudget, SearchResult, Termination};
use crate::error::{Error, Result};
use crate::hypercube::BitVector;
use crate::objectives::Objective;

/// Hill climbing over any point space.
///
/// `neighbors(p)` must yield the neighbors of `p` other than `p` itself, in
/// a deterministic order. One iteration is one (possibly partial) scan of
/// the current neighborhood. Without budget limits the result is a local
/// maximum: no neighbor of it is strictly better.
pub fn hill_climb<P, E, N, I>(
    start: P,
    mut evaluate: E,
    mut neighbors: N,
    policy: Improvement,
    budget: &SearchBudget,
) -> SearchResult<P>
where
    P: Clone,
    E: FnMut(&P) -> f64,
    N: FnMut(&P) -> I,
    I: IntoIterator<Item = P>,
{
    let start_value = evaluate(&start);
    let mut meter = Meter::new(budget, start_value);
    let mut current = start;
    let mut value = start_value;
    loop {
        if let Some(t) = meter.iteration_limit() {
            return meter.into_result(current, t);
        }
        let mut best: Option<(P, f64)> = None;
        let mut cut = None;
        for q in neighbors(&current) {
            if let Some(t) = meter.evaluation_limit() {
                cut = Some(t);
                break;
            }
            let v = evaluate(&q);
            meter.record(v);
            if v > best.as_ref().map_or(value, |b| b.1) {
                best = Some((q, v));
                if policy == Improvement::First {
                    break;
                }
            }
        }
        let moved = best.is_some();
        if let Some((q, v)) = best {
            current = q;
            value = v;
        }
        meter.finish_iteration(moved);
        if let Some(t) = cut {
            return meter.into_result(current, t);
        }
        if !moved {
            return meter.into_result(current, Termination::LocalOptimum);
        }
    }
}

/// Hill climbing on the hypercube with the Hamming radius-1 neighborhood,
/// flipping bits `1..=n` in order.
pub fn hill_climb_hypercube(
    f: &Objective,
    start: &BitVector,
    policy: Improvement,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    if start.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: start.len(),
        });
    }
    Ok(hill_climb(
        start.clone(),
        |x| f.evaluate(x),
        |x: &BitVector| {
            let x = x.clone();
            (1..=x.len()).map(move |i| x.flip(i).expect("index in range"))
        },
        policy,
        budget,
    ))
}
