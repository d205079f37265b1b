//! Reproducible experiment runs: configuration, execution and reports.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::{parse_dimacs, parse_input_vars, unit_propagate, CnfFormula, PartialAssignment};
use crate::error::{Error, Result};
use crate::hypercube::BitVector;
use crate::merging::{MappingMode, MergingMapping, DEFAULT_BLOCK_CAP};
use crate::objectives::Objective;
use crate::rng::seeded;
use crate::search::{
    hill_climb_hypercube, mvhc, one_plus_one_ea, one_plus_one_mvea, one_plus_one_mvea_redrawing, Improvement,
    MvhcConfig, RestartConfig, SearchBudget, SearchResult, Termination, TrajectoryPoint,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Onemax,
    Trap,
    Maxsat,
    Upsat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hc,
    Mvhc,
    Ea,
    Mvea,
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($variant:path => $text:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", $what, " `{}`"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(ObjectiveKind, "objective",
    ObjectiveKind::Onemax => "onemax", ObjectiveKind::Trap => "trap",
    ObjectiveKind::Maxsat => "maxsat", ObjectiveKind::Upsat => "upsat");
text_enum!(Algorithm, "algorithm",
    Algorithm::Hc => "hc", Algorithm::Mvhc => "mvhc", Algorithm::Ea => "ea", Algorithm::Mvea => "mvea");

fn default_k() -> usize {
    10
}

fn default_one() -> usize {
    1
}

fn default_block_cap() -> usize {
    DEFAULT_BLOCK_CAP
}

/// One experiment. Field names double as config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub cnf: Option<PathBuf>,
    /// Input variables for `upsat`. Falls back to the formula's `c input`
    /// lines, then to every variable.
    #[serde(default)]
    pub input_vars: Option<PathBuf>,
    pub algo: Algorithm,
    /// Dimension of synthetic objectives; checked against CNF objectives.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub map_mode: MappingMode,
    #[serde(default = "default_k", rename = "K", alias = "k")]
    pub k: usize,
    #[serde(default)]
    pub budget_evals: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<u64>,
    /// Defaults to `50 * n`.
    #[serde(default)]
    pub max_stagnation: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub repeats: usize,
    #[serde(default = "default_one")]
    pub workers: usize,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub restart: bool,
    #[serde(default)]
    pub improvement: Improvement,
    #[serde(default = "default_block_cap")]
    pub block_cap: usize,
    /// Experimental: redraw the MVEA mapping before every mutation.
    #[serde(default)]
    pub mvea_redraw: bool,
    /// Run repeats concurrently.
    #[serde(default)]
    pub parallel_repeats: bool,
}

impl ExperimentConfig {
    pub fn new(objective: ObjectiveKind, algo: Algorithm) -> Self {
        Self {
            objective,
            cnf: None,
            input_vars: None,
            algo,
            n: None,
            r: None,
            map_mode: MappingMode::default(),
            k: default_k(),
            budget_evals: None,
            max_iterations: None,
            max_stagnation: None,
            seed: 0,
            repeats: 1,
            workers: 1,
            target: None,
            restart: false,
            improvement: Improvement::default(),
            block_cap: DEFAULT_BLOCK_CAP,
            mvea_redraw: false,
            parallel_repeats: false,
        }
    }

    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            max_evaluations: self.budget_evals,
            max_iterations: self.max_iterations,
            max_stagnation: self.max_stagnation,
            wall_clock: None,
            target: self.target,
        }
    }

    fn check(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(field("repeats", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(field("workers", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(field("K", "must be at least 1"));
        }
        if self.target.is_some_and(|t| !t.is_finite()) {
            return Err(field("target", "must be finite"));
        }
        if matches!(self.algo, Algorithm::Mvhc | Algorithm::Mvea) && self.r.is_none() {
            return Err(field("r", format!("required by {}", self.algo)));
        }
        if self.restart && self.algo != Algorithm::Mvhc {
            return Err(field("restart", "only mvhc supports restarts"));
        }
        if self.input_vars.is_some() && self.objective != ObjectiveKind::Upsat {
            return Err(field("input_vars", "only used by the upsat objective"));
        }
        Ok(())
    }

    fn mvhc_config(&self) -> MvhcConfig {
        MvhcConfig {
            r: self.r.unwrap_or(0),
            mode: self.map_mode,
            stability: self.k,
            policy: self.improvement,
            workers: self.workers,
            block_cap: self.block_cap,
            restart: self.restart.then(RestartConfig::default),
        }
    }
}

fn field(name: &str, message: impl fmt::Display) -> Error {
    Error::InvalidArgument(format!("{name}: {message}"))
}

/// An objective built from a config, with the formula behind CNF objectives.
pub struct LoadedObjective {
    pub objective: Objective,
    pub formula: Option<Arc<CnfFormula>>,
    /// Input variables of `upsat`.
    pub inputs: Option<Vec<usize>>,
}

pub fn load_objective(config: &ExperimentConfig) -> Result<LoadedObjective> {
    let loaded = match config.objective {
        ObjectiveKind::Onemax | ObjectiveKind::Trap => {
            let n = config.n.ok_or_else(|| field("n", format!("required by {}", config.objective)))?;
            let objective = match config.objective {
                ObjectiveKind::Onemax => Objective::onemax(n),
                _ => Objective::trap(n),
            }
            .map_err(|e| field("n", e))?;
            LoadedObjective {
                objective,
                formula: None,
                inputs: None,
            }
        }
        ObjectiveKind::Maxsat | ObjectiveKind::Upsat => {
            let path = config
                .cnf
                .as_ref()
                .ok_or_else(|| field("cnf", format!("required by {}", config.objective)))?;
            let text = fs::read_to_string(path).map_err(|e| field("cnf", format!("{}: {e}", path.display())))?;
            let formula = Arc::new(parse_dimacs(&text).map_err(|e| field("cnf", format!("{}: {e}", path.display())))?);
            if config.objective == ObjectiveKind::Maxsat {
                LoadedObjective {
                    objective: Objective::clause_count(formula.clone()),
                    formula: Some(formula),
                    inputs: None,
                }
            } else {
                let inputs = match &config.input_vars {
                    Some(p) => {
                        let text =
                            fs::read_to_string(p).map_err(|e| field("input_vars", format!("{}: {e}", p.display())))?;
                        parse_input_vars(&text).map_err(|e| field("input_vars", format!("{}: {e}", p.display())))?
                    }
                    None => match formula.input_vars() {
                        Some(v) => v.to_vec(),
                        None => (1..=formula.num_vars()).collect(),
                    },
                };
                let objective =
                    Objective::unit_propagation(formula.clone(), inputs.clone()).map_err(|e| field("input_vars", e))?;
                LoadedObjective {
                    objective,
                    formula: Some(formula),
                    inputs: Some(inputs),
                }
            }
        }
    };
    if let Some(n) = config.n {
        if n != loaded.objective.dim() {
            return Err(field(
                "n",
                format!("{n} does not match the objective dimension {}", loaded.objective.dim()),
            ));
        }
    }
    Ok(loaded)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveInfo {
    pub name: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_vars: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_clauses: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub start_point: BitVector,
    pub best_point: BitVector,
    pub best_value: f64,
    pub evaluations: u64,
    pub iterations: u64,
    pub terminated_by: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reached_target: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong_extremum: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Full CNF assignment: the best point itself for `maxsat`, the
    /// propagated completion of the inputs for `upsat` (unassigned
    /// variables read as 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<BitVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied_clauses: Option<usize>,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_evaluations: f64,
    pub median_evaluations: f64,
    pub best_value: f64,
    pub mean_best_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reached_target: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub run_secs: Vec<f64>,
    pub mean_run_secs: f64,
    pub median_run_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// The configuration as run, with defaults filled in.
    pub config: ExperimentConfig,
    pub objective: ObjectiveInfo,
    pub runs: Vec<RunReport>,
    pub aggregate: Aggregate,
    /// Wall-clock measurements; the only part that varies between reruns.
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report without its timing section.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timing");
        }
        serde_json::to_string_pretty(&value).expect("report serializes")
    }

    /// One JSON object per line and per improvement event:
    /// `{"eval", "value", "algo", "seed"}`.
    pub fn improvement_log(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            for point in &run.trajectory {
                let line = serde_json::json!({
                    "eval": point.eval,
                    "value": point.value,
                    "algo": self.config.algo.to_string(),
                    "seed": run.seed,
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
        out
    }

    /// `None` when no target was set.
    pub fn any_reached_target(&self) -> Option<bool> {
        self.aggregate.reached_target.map(|k| k > 0)
    }
}

/// Runs `config.repeats` independent runs with seeds `seed, seed + 1, ...`.
/// Each run draws its start point (and, for MVEA, its mapping) from its
/// own seeded generator.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.check()?;
    let loaded = load_objective(config)?;
    let n = loaded.objective.dim();
    let mut resolved = config.clone();
    resolved.n = Some(n);
    resolved.max_stagnation = Some(config.max_stagnation.unwrap_or(50 * n as u64));
    match resolved.algo {
        Algorithm::Mvhc => resolved.mvhc_config().validate(n)?,
        Algorithm::Mvea => {
            let r = resolved.r.unwrap_or(0);
            if r == 0 || r >= n {
                return Err(field("r", format!("need 1 <= r < n, got r = {r}, n = {n}")));
            }
        }
        Algorithm::Hc | Algorithm::Ea => {}
    }

    let started = Instant::now();
    let run = |i: usize| -> Result<(RunReport, f64)> {
        let t = Instant::now();
        let report = run_once(&resolved, &loaded, resolved.seed.wrapping_add(i as u64))?;
        Ok((report, t.elapsed().as_secs_f64()))
    };
    let outcomes: Vec<Result<(RunReport, f64)>> = if resolved.parallel_repeats {
        (0..resolved.repeats).into_par_iter().map(run).collect()
    } else {
        (0..resolved.repeats).map(run).collect()
    };
    let (runs, run_secs): (Vec<RunReport>, Vec<f64>) = outcomes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let total_secs = started.elapsed().as_secs_f64();

    let evaluations: Vec<f64> = runs.iter().map(|r| r.evaluations as f64).collect();
    let values: Vec<f64> = runs.iter().map(|r| r.best_value).collect();
    let aggregate = Aggregate {
        runs: runs.len(),
        mean_evaluations: mean(&evaluations),
        median_evaluations: median(&evaluations),
        best_value: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_best_value: mean(&values),
        reached_target: resolved
            .target
            .map(|_| runs.iter().filter(|r| r.reached_target == Some(true)).count()),
    };
    let timing = Timing {
        total_secs,
        mean_run_secs: mean(&run_secs),
        median_run_secs: median(&run_secs),
        run_secs,
    };
    let objective = ObjectiveInfo {
        name: loaded.objective.name().to_string(),
        dim: n,
        num_vars: loaded.formula.as_ref().map(|f| f.num_vars()),
        num_clauses: loaded.formula.as_ref().map(|f| f.num_clauses()),
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: resolved,
        objective,
        runs,
        aggregate,
        timing,
    })
}

fn run_once(config: &ExperimentConfig, loaded: &LoadedObjective, seed: u64) -> Result<RunReport> {
    let f = &loaded.objective;
    let n = f.dim();
    let budget = config.budget();
    let mut rng = seeded(seed);
    let start = BitVector::random(n, &mut rng);
    let r = config.r.unwrap_or(0);

    let mut extras = (None, None, None);
    let result: SearchResult = match config.algo {
        Algorithm::Hc => hill_climb_hypercube(f, &start, config.improvement, &budget)?,
        Algorithm::Ea => one_plus_one_ea(f, &start, None, &budget, &mut rng)?,
        Algorithm::Mvea if config.mvea_redraw => {
            one_plus_one_mvea_redrawing(f, r, config.map_mode, &start, &budget, &mut rng)?
        }
        Algorithm::Mvea => {
            let m = MergingMapping::random(n, r, config.map_mode, &mut rng)?;
            one_plus_one_mvea(f, &m, &start, &budget, &mut rng)?
        }
        Algorithm::Mvhc => {
            let out = mvhc(f, &start, &config.mvhc_config(), &budget, &mut rng)?;
            extras = (
                Some(out.strong_extremum),
                out.critical_size,
                config.restart.then_some(out.restarts),
            );
            out.result
        }
    };

    let assignment = match (&loaded.formula, &loaded.inputs) {
        (Some(formula), Some(inputs)) => Some(complete_inputs(formula, inputs, &result.best_point)?),
        (Some(_), None) => Some(result.best_point.clone()),
        _ => None,
    };
    let satisfied_clauses = match (&loaded.formula, &assignment) {
        (Some(formula), Some(a)) => Some(formula.count_satisfied(a)?),
        _ => None,
    };
    Ok(RunReport {
        seed,
        start_point: start,
        best_value: result.best_value,
        best_point: result.best_point,
        evaluations: result.evaluations,
        iterations: result.iterations,
        terminated_by: result.terminated_by,
        reached_target: config.target.map(|t| result.best_value >= t),
        strong_extremum: extras.0,
        critical_size: extras.1,
        restarts: extras.2,
        assignment,
        satisfied_clauses,
        trajectory: result.trajectory,
    })
}

/// Assigns `inputs` from `point`, propagates, and reads unassigned
/// variables as 0.
pub fn complete_inputs(formula: &CnfFormula, inputs: &[usize], point: &BitVector) -> Result<BitVector> {
    if point.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: point.len(),
        });
    }
    let mut seed = PartialAssignment::empty(formula.num_vars());
    for (k, &var) in inputs.iter().enumerate() {
        seed.set(var, point.get(k + 1)?)?;
    }
    let outcome = unit_propagate(formula, &seed)?;
    let bits: Vec<bool> = (1..=formula.num_vars())
        .map(|v| outcome.assignment.get(v).unwrap_or(false))
        .collect();
    Ok(BitVector::from_bools(&bits))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onemax_config(algo: Algorithm) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ObjectiveKind::Onemax, algo);
        c.n = Some(20);
        c.r = Some(5);
        c.budget_evals = Some(100_000);
        c.repeats = 3;
        c.seed = 11;
        c
    }

    #[test]
    fn onemax_mvea_three_runs() {
        let mut c = onemax_config(Algorithm::Mvea);
        c.target = Some(20.0);
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.runs.len(), 3);
        assert_eq!(report.aggregate.runs, 3);
        assert_eq!(report.aggregate.reached_target, Some(3));
        assert_eq!(report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![11, 12, 13]);
        assert_eq!(report.config.max_stagnation, Some(1000));
        assert_eq!(report.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn every_algorithm_runs() {
        for algo in [Algorithm::Hc, Algorithm::Mvhc, Algorithm::Ea, Algorithm::Mvea] {
            let report = run_experiment(&onemax_config(algo)).unwrap();
            for run in &report.runs {
                assert!(run.best_value <= 20.0);
                assert!(run.evaluations <= 100_001);
            }
        }
    }

    #[test]
    fn reruns_are_identical_apart_from_timing() {
        for algo in [Algorithm::Mvhc, Algorithm::Ea] {
            let c = onemax_config(algo);
            assert_eq!(
                run_experiment(&c).unwrap().deterministic_json(),
                run_experiment(&c).unwrap().deterministic_json()
            );
        }
    }

    #[test]
    fn parallel_repeats_match_sequential() {
        let mut c = onemax_config(Algorithm::Mvhc);
        let a = run_experiment(&c).unwrap();
        c.parallel_repeats = true;
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.runs, b.runs);
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut c = onemax_config(Algorithm::Mvhc);
        c.r = None;
        assert!(run_experiment(&c).unwrap_err().to_string().contains("r:"));
        let mut c = onemax_config(Algorithm::Hc);
        c.n = None;
        assert!(run_experiment(&c).unwrap_err().to_string().contains("n:"));
        let mut c = ExperimentConfig::new(ObjectiveKind::Maxsat, Algorithm::Hc);
        assert!(run_experiment(&c).unwrap_err().to_string().contains("cnf:"));
        c.cnf = Some("/nonexistent/file.cnf".into());
        assert!(run_experiment(&c).unwrap_err().to_string().contains("cnf:"));
        let mut c = onemax_config(Algorithm::Ea);
        c.repeats = 0;
        assert!(run_experiment(&c).unwrap_err().to_string().contains("repeats:"));
        let mut c = onemax_config(Algorithm::Ea);
        c.restart = true;
        assert!(run_experiment(&c).unwrap_err().to_string().contains("restart:"));
    }

    #[test]
    fn config_serde_keys() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"objective":"onemax","algo":"mvhc","n":12,"r":3,"K":4,"map_mode":"uniform"}"#,
        )
        .unwrap();
        assert_eq!(c.k, 4);
        assert_eq!(c.map_mode, MappingMode::Uniform);
        assert_eq!(c.repeats, 1);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"objective":"onemax","algo":"hc","bogus":1}"#).is_err());
        assert_eq!("mvea".parse::<Algorithm>().unwrap(), Algorithm::Mvea);
        assert!("sat".parse::<ObjectiveKind>().is_err());
    }

    #[test]
    fn improvement_log_lines() {
        let report = run_experiment(&onemax_config(Algorithm::Hc)).unwrap();
        let log = report.improvement_log();
        let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(first["eval"], 1);
        assert_eq!(first["algo"], "hc");
        assert_eq!(first["seed"], 11);
        let total: usize = report.runs.iter().map(|r| r.trajectory.len()).sum();
        assert_eq!(log.lines().count(), total);
    }
}
