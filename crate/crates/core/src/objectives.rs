//! Pseudo-Boolean objectives `f: {0,1}^n -> R` and their merged-space
//! conjugates.
//!
//! Every search method evaluates through [`Objective::evaluate`], which
//! counts calls atomically, so all algorithms share one cost accounting.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::cnf::{CnfFormula, Propagator};
use crate::error::{Error, Result};
use crate::hypercube::BitVector;
use crate::merging::{MergedPoint, MergingMapping};

/// A deterministic pseudo-Boolean function. Implementations must be pure.
pub trait PseudoBoolean: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &BitVector) -> f64;

    fn name(&self) -> &str;

    /// The global maximum when it is known in closed form.
    fn known_optimum(&self) -> Option<f64> {
        None
    }
}

/// A pseudo-Boolean function with an evaluation counter.
pub struct Objective {
    inner: Box<dyn PseudoBoolean>,
    evaluations: AtomicU64,
}

impl Objective {
    pub fn new(f: impl PseudoBoolean + 'static) -> Self {
        Self {
            inner: Box::new(f),
            evaluations: AtomicU64::new(0),
        }
    }

    /// Number of ones.
    pub fn onemax(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("onemax needs n >= 1".into()));
        }
        Ok(Self::new(OneMax { n }))
    }

    /// Number of ones, except the all-zeros point scores `n + 1`.
    pub fn trap(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("trap needs n >= 2".into()));
        }
        Ok(Self::new(Trap { n }))
    }

    /// Clauses satisfied by the full assignment.
    pub fn clause_count(formula: Arc<CnfFormula>) -> Self {
        Self::new(ClauseCount { formula })
    }

    /// Assigns `input_vars` from the point, runs unit propagation, and counts
    /// the clauses satisfied by the resulting assignment.
    pub fn unit_propagation(formula: Arc<CnfFormula>, input_vars: Vec<usize>) -> Result<Self> {
        Ok(Self::new(UnitPropagationCount::new(formula, input_vars)?))
    }

    /// Wraps an arbitrary pure function.
    pub fn from_fn<F>(n: usize, name: &str, f: F) -> Self
    where
        F: Fn(&BitVector) -> f64 + Send + Sync + 'static,
    {
        Self::new(FnObjective {
            n,
            name: name.to_string(),
            f,
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.inner.known_optimum()
    }

    /// Evaluates `x` and bumps the counter.
    ///
    /// Panics when `x` has the wrong dimension; search code checks
    /// dimensions once up front.
    pub fn evaluate(&self, x: &BitVector) -> f64 {
        assert_eq!(x.len(), self.dim(), "objective evaluated at a point of the wrong dimension");
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    pub fn try_evaluate(&self, x: &BitVector) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.evaluate(x))
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

struct OneMax {
    n: usize,
}

impl PseudoBoolean for OneMax {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &BitVector) -> f64 {
        x.count_ones() as f64
    }

    fn name(&self) -> &str {
        "onemax"
    }

    fn known_optimum(&self) -> Option<f64> {
        Some(self.n as f64)
    }
}

struct Trap {
    n: usize,
}

impl PseudoBoolean for Trap {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &BitVector) -> f64 {
        match x.count_ones() {
            0 => (self.n + 1) as f64,
            ones => ones as f64,
        }
    }

    fn name(&self) -> &str {
        "trap"
    }

    fn known_optimum(&self) -> Option<f64> {
        Some((self.n + 1) as f64)
    }
}

struct ClauseCount {
    formula: Arc<CnfFormula>,
}

impl PseudoBoolean for ClauseCount {
    fn dim(&self) -> usize {
        self.formula.num_vars()
    }

    fn value(&self, x: &BitVector) -> f64 {
        self.formula.count_satisfied(x).expect("dimension checked by Objective") as f64
    }

    fn name(&self) -> &str {
        "maxsat"
    }
}

/// Unit-propagation clause count over a designated input set.
pub struct UnitPropagationCount {
    formula: Arc<CnfFormula>,
    inputs: Vec<usize>,
    propagator: Propagator,
}

impl UnitPropagationCount {
    pub fn new(formula: Arc<CnfFormula>, inputs: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("the input variable set is empty".into()));
        }
        crate::cnf::check_var_set(&inputs, formula.num_vars())?;
        let propagator = Propagator::new(&formula);
        Ok(Self {
            formula,
            inputs,
            propagator,
        })
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }
}

impl PseudoBoolean for UnitPropagationCount {
    fn dim(&self) -> usize {
        self.inputs.len()
    }

    fn value(&self, x: &BitVector) -> f64 {
        self.propagator.satisfied_after(&self.inputs, x).0 as f64
    }

    fn name(&self) -> &str {
        "upsat"
    }
}

struct FnObjective<F> {
    n: usize,
    name: String,
    f: F,
}

impl<F> PseudoBoolean for FnObjective<F>
where
    F: Fn(&BitVector) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &BitVector) -> f64 {
        (self.f)(x)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `F(beta) = f(tau(beta))`: the objective seen from a merged space.
/// Evaluations are counted on the base objective.
#[derive(Clone, Copy, Debug)]
pub struct ConjugatedObjective<'a> {
    base: &'a Objective,
    mapping: &'a MergingMapping,
}

impl<'a> ConjugatedObjective<'a> {
    pub fn new(base: &'a Objective, mapping: &'a MergingMapping) -> Result<Self> {
        if base.dim() != mapping.n() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: mapping.n(),
            });
        }
        Ok(Self { base, mapping })
    }

    pub fn evaluate(&self, point: &MergedPoint) -> Result<f64> {
        Ok(self.base.evaluate(&self.mapping.tau(point)?))
    }

    pub fn base(&self) -> &'a Objective {
        self.base
    }

    pub fn mapping(&self) -> &'a MergingMapping {
        self.mapping
    }
}

pub fn conjugate<'a>(base: &'a Objective, mapping: &'a MergingMapping) -> Result<ConjugatedObjective<'a>> {
    ConjugatedObjective::new(base, mapping)
}
