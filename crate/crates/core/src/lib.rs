//! Pseudo-Boolean optimization over merged-variable search spaces.
//!
//! A merging mapping partitions the `n` Boolean variables into `r` blocks.
//! Each block becomes one merged variable whose domain holds every
//! assignment of its bits, which turns `{0,1}^n` into a smaller-dimensional
//! Hamming space with much larger radius-1 neighborhoods. The crate provides
//! hill climbing and (1+1) evolutionary search over both spaces, objectives
//! (OneMax, Trap, MaxSAT clause counting and unit-propagation counting), a
//! tabu archive with a distance-constrained restart generator, and an
//! experiment runner that produces reproducible JSON reports.

pub mod cnf;
pub mod error;
pub mod experiment;
pub mod hypercube;
pub mod merging;
pub mod objectives;
pub mod restart;
pub mod rng;
pub mod search;

pub use cnf::{CnfFormula, PartialAssignment, PropagationOutcome, PropagationStatus};
pub use error::{DimacsError, Error, Result};
pub use hypercube::BitVector;
pub use merging::{MappingMode, MergedNeighborhood, MergedPoint, MergingMapping};
pub use objectives::{ConjugatedObjective, Objective, PseudoBoolean};
pub use restart::{DistanceConstraintSystem, RelaxOutcome, RelaxSchedule, TabuArchive, TabuEntry};
pub use experiment::{Algorithm, ExperimentConfig, ExperimentReport, ObjectiveKind};
pub use search::{Improvement, MvhcConfig, SearchBudget, SearchResult, Termination, TrajectoryPoint};
