//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p mergevar --test acceptance`.

use std::collections::HashSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mergevar::cnf::{self, CnfFormula, PartialAssignment, PropagationStatus, Propagator};
use mergevar::experiment::{run_experiment, Algorithm, ExperimentConfig, ObjectiveKind};
use mergevar::merging::count_merging_mappings;
use mergevar::objectives::conjugate;
use mergevar::restart::{decode_model, enumerate_solutions, export_system_as_cnf, solve_distance_system};
use mergevar::rng::{seeded, SearchRng};
use mergevar::search::{
    mv_random_mutation, mvea_runtime_bound_ln, mvea_uniform_bound_exponent, mvhc, mvhc_iteration, MvhcConfig,
    RestartConfig,
};
use mergevar::{
    BitVector, DistanceConstraintSystem, Improvement, MappingMode, MergedPoint, MergingMapping, Objective,
    SearchBudget,
};
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;
/// Name, check, and runtime limit.
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn index_of(x: &BitVector) -> usize {
    x.iter().fold(0, |acc, b| acc << 1 | b as usize)
}

/// Objective given by a value table indexed by the point read as a binary
/// number, bit 1 most significant.
fn table_objective(n: usize, rng: &mut SearchRng, range: u32) -> (Objective, Arc<Vec<f64>>) {
    let table: Arc<Vec<f64>> = Arc::new((0..1usize << n).map(|_| rng.random_range(0..range) as f64).collect());
    let t = table.clone();
    (Objective::from_fn(n, "table", move |x| t[index_of(x)]), table)
}

fn random_mapping(n: usize, rng: &mut SearchRng) -> MergingMapping {
    let r = rng.random_range(1..n);
    let mode = if r <= n / 2 && rng.random_bool(0.5) {
        MappingMode::Occupancy
    } else {
        MappingMode::Uniform
    };
    MergingMapping::random(n, r, mode, rng).unwrap()
}

fn random_merged_point(m: &MergingMapping, rng: &mut SearchRng) -> MergedPoint {
    let sizes = m.block_sizes();
    let values = sizes.iter().map(|&l| rng.random_range(0..1u64 << l)).collect();
    MergedPoint::new(sizes, values).unwrap()
}

fn bijection() -> Check {
    let mut rng = seeded(1);
    for _ in 0..1000 {
        let n: usize = rng.random_range(2..=64);
        let r = rng.random_range(n.div_ceil(63).max(1)..n);
        let mode = if r <= n / 2 { MappingMode::Occupancy } else { MappingMode::Uniform };
        let m = MergingMapping::random(n, r, mode, &mut rng).unwrap();
        let alpha = BitVector::random(n, &mut rng);
        let back = m.tau(&m.tau_inverse(&alpha).unwrap()).unwrap();
        ensure(back == alpha, || format!("tau(tau_inverse(a)) != a for n = {n}"))?;
        let beta = random_merged_point(&m, &mut rng);
        let back = m.tau_inverse(&m.tau(&beta).unwrap()).unwrap();
        ensure(back == beta, || format!("tau_inverse(tau(b)) != b for n = {n}"))?;
    }
    let m = MergingMapping::new(5, vec![vec![1, 4], vec![2], vec![3, 5]]).unwrap();
    let beta = MergedPoint::new(vec![2, 1, 2], vec![2, 1, 3]).unwrap();
    let alpha = m.tau(&beta).unwrap();
    ensure(alpha.to_string() == "11101", || format!("worked example maps to {alpha}"))?;
    Ok("1000 random triples; (2,1,3) -> 11101".into())
}

fn extremum_preservation() -> Check {
    let mut rng = seeded(2);
    for case in 0..50 {
        let n = rng.random_range(2..=12);
        let (f, table) = table_objective(n, &mut rng, 1000);
        let max = table.iter().copied().fold(f64::MIN, f64::max);
        let min = table.iter().copied().fold(f64::MAX, f64::min);
        for _ in 0..10 {
            let m = random_mapping(n, &mut rng);
            let g = conjugate(&f, &m).unwrap();
            let (mut gmax, mut gmin) = (f64::MIN, f64::MAX);
            for beta in MergedPoint::enumerate(&m.block_sizes()) {
                let v = g.evaluate(&beta).unwrap();
                gmax = gmax.max(v);
                gmin = gmin.min(v);
            }
            ensure(gmax == max && gmin == min, || {
                format!("case {case}: merged extrema ({gmin}, {gmax}) vs ({min}, {max})")
            })?;
        }
    }
    Ok("50 objectives x 10 mappings, exact".into())
}

fn counting() -> Check {
    let mut got = Vec::new();
    for n in 2..=6u32 {
        let mut brute = 0u64;
        for r in 1..n {
            let total = (r as u64).pow(n);
            for code in 0..total {
                let mut hit = vec![false; r as usize];
                let mut c = code;
                for _ in 0..n {
                    hit[(c % r as u64) as usize] = true;
                    c /= r as u64;
                }
                if hit.iter().all(|&h| h) {
                    brute += 1;
                }
            }
        }
        let formula = count_merging_mappings(n as usize).map_err(|e| e.to_string())?;
        ensure(formula == BigUint::from(brute), || format!("n = {n}: {formula} vs {brute}"))?;
        got.push(brute.to_string());
    }
    ensure(got[0] == "1" && got[1] == "7", || format!("small counts {got:?}"))?;
    Ok(format!("n = 2..6: {}", got.join(", ")))
}

fn neighborhood_size() -> Check {
    let mut rng = seeded(4);
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..=14);
        let m = random_mapping(n, &mut rng);
        if m.blocks().iter().map(|b| 1u64 << b.len()).sum::<u64>() > 1 << 14 {
            continue;
        }
        let beta = random_merged_point(&m, &mut rng);
        let nb = m.neighborhood(&beta).unwrap();
        let points: HashSet<MergedPoint> = nb.iter().collect();
        ensure(points.len() as u128 == m.neighborhood_size(), || {
            format!("{} enumerated vs {} by formula", points.len(), m.neighborhood_size())
        })?;
        done += 1;
    }
    let m = MergingMapping::random(100, 10, MappingMode::Uniform, &mut rng).unwrap();
    ensure(m.block_sizes().iter().all(|&l| l == 10), || "uniform 100/10 block sizes".into())?;
    ensure(m.neighborhood_size() == 10_231, || format!("n=100, r=10 gives {}", m.neighborhood_size()))?;
    Ok("100 mappings enumerated; n=100, r=10 -> 10231".into())
}

fn mutation_mean() -> Check {
    let mut rng = seeded(5);
    let trials = 100_000;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(4..=128);
        let r = rng.random_range(2..=n / 2);
        let m = MergingMapping::random(n, r, MappingMode::Uniform, &mut rng).unwrap();
        ensure(m.block_sizes().iter().all(|&l| l >= 2), || "block smaller than 2".into())?;
        let alpha = BitVector::random(n, &mut rng);
        let mut total = 0usize;
        for _ in 0..trials {
            let child = mv_random_mutation(&m, &alpha, &mut rng).unwrap();
            total += alpha.hamming_distance(&child).unwrap();
        }
        let mean = total as f64 / trials as f64;
        worst = worst.max((mean - 1.0).abs());
        ensure((mean - 1.0).abs() <= 0.03, || format!("n = {n}, r = {r}: mean flips {mean}"))?;
    }
    Ok(format!("20 mappings, max |mean - 1| = {worst:.4}"))
}

fn strict_improvement() -> Check {
    let mut rng = seeded(6);
    let mut improved = 0u64;
    let mut fixed = 0u64;
    for n in 2..=10 {
        for _ in 0..4 {
            // a small value range leaves plateaus, which exercise the strict comparison
            let (f, _) = table_objective(n, &mut rng, 8);
            for _ in 0..3 {
                let m = random_mapping(n, &mut rng);
                if m.max_block_size() > 8 {
                    continue;
                }
                let g = conjugate(&f, &m).unwrap();
                for alpha in BitVector::enumerate(n) {
                    let beta = m.tau_inverse(&alpha).unwrap();
                    let v = g.evaluate(&beta).unwrap();
                    let local_max = m
                        .neighborhood(&beta)
                        .unwrap()
                        .iter()
                        .all(|q| g.evaluate(&q).unwrap() <= v);
                    for policy in [Improvement::First, Improvement::Best] {
                        let res =
                            mvhc_iteration(&f, &alpha, &m, policy, &SearchBudget::unlimited(), 1).map_err(|e| e.to_string())?;
                        if local_max {
                            ensure(res.best_point == alpha, || format!("n = {n}: local max {alpha} moved"))?;
                            fixed += 1;
                        } else {
                            ensure(res.best_value > v, || format!("n = {n}: no strict improvement from {alpha}"))?;
                            improved += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{improved} improving starts, {fixed} merged local maxima"))
}

fn brute_solutions(s: &DistanceConstraintSystem) -> Vec<BitVector> {
    BitVector::enumerate(s.n())
        .filter(|z| s.anchors().iter().all(|(a, d)| a.hamming_distance(z).unwrap() == *d))
        .collect()
}

fn restart_solver() -> Check {
    let mut rng = seeded(7);
    let mut feasible = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=12);
        let k = rng.random_range(1..=4);
        let planted = BitVector::random(n, &mut rng);
        let anchors: Vec<(BitVector, usize)> = (0..k)
            .map(|_| {
                let a = BitVector::random(n, &mut rng);
                let d = if case % 2 == 0 {
                    a.hamming_distance(&planted).unwrap()
                } else {
                    rng.random_range(0..=n)
                };
                (a, d)
            })
            .collect();
        let s = DistanceConstraintSystem::new(n, anchors).map_err(|e| e.to_string())?;
        let brute = brute_solutions(&s);
        let mut listed = enumerate_solutions(&s);
        listed.sort_by_key(|z| z.to_string());
        let mut sorted_brute = brute.clone();
        sorted_brute.sort_by_key(|z| z.to_string());
        ensure(listed == sorted_brute, || format!("case {case}: solution sets differ"))?;
        let found = solve_distance_system(&s, &mut rng);
        ensure(found.is_some() == !brute.is_empty(), || format!("case {case}: feasibility verdict wrong"))?;
        if let Some(z) = &found {
            ensure(s.is_satisfied_by(z) && brute.contains(z), || format!("case {case}: bad point {z}"))?;
            feasible += 1;
        }
        let exported = export_system_as_cnf(&s);
        let model = cnf::solve(&exported);
        ensure(model.is_some() == !brute.is_empty(), || format!("case {case}: CNF export disagrees"))?;
        if let Some(model) = model {
            ensure(s.is_satisfied_by(&decode_model(&s, &model)), || format!("case {case}: CNF model invalid"))?;
        }
    }
    let zero: BitVector = "0000".parse().unwrap();
    let ones: BitVector = "1111".parse().unwrap();
    let triangle = DistanceConstraintSystem::new(4, vec![(zero, 1), (ones, 1)]).unwrap();
    ensure(solve_distance_system(&triangle, &mut rng).is_none(), || "triangle system solved".into())?;
    ensure(cnf::solve(&export_system_as_cnf(&triangle)).is_none(), || "triangle CNF satisfiable".into())?;
    Ok(format!("200 systems ({feasible} feasible) match brute force; triangle system infeasible"))
}

fn random_3cnf(n: usize, m: usize, rng: &mut SearchRng, planted: Option<&BitVector>) -> CnfFormula {
    let mut vars: Vec<usize> = (1..=n).collect();
    let mut clauses = Vec::with_capacity(m);
    while clauses.len() < m {
        vars.shuffle(rng);
        let clause: Vec<i32> = vars[..3]
            .iter()
            .map(|&v| if rng.random_bool(0.5) { v as i32 } else { -(v as i32) })
            .collect();
        if let Some(x) = planted {
            if !clause.iter().any(|&l| x.get(l.unsigned_abs() as usize).unwrap() == (l > 0)) {
                continue;
            }
        }
        clauses.push(clause);
    }
    CnfFormula::new(n, clauses).unwrap()
}

fn lit_under(values: &[Option<bool>], lit: i32) -> Option<bool> {
    values[lit.unsigned_abs() as usize - 1].map(|v| v == (lit > 0))
}

fn recount(formula: &CnfFormula, values: &[Option<bool>]) -> usize {
    formula
        .clauses()
        .iter()
        .filter(|c| c.iter().any(|&l| lit_under(values, l) == Some(true)))
        .count()
}

fn unit_propagation() -> Check {
    let mut rng = seeded(8);
    let mut forced = 0;
    for case in 0..200 {
        let n = rng.random_range(3..=12);
        let m = rng.random_range(1..=5 * n);
        let formula = random_3cnf(n, m, &mut rng, None);
        let prop = Propagator::new(&formula);

        let x = BitVector::random(n, &mut rng);
        let out = prop.propagate(&PartialAssignment::from_total(&x)).map_err(|e| e.to_string())?;
        let full: Vec<Option<bool>> = x.iter().map(Some).collect();
        ensure(out.satisfied == recount(&formula, &full), || format!("case {case}: full-seed count"))?;
        ensure(out.satisfied == formula.count_satisfied(&x).unwrap(), || format!("case {case}: count_satisfied"))?;

        let mut seed = PartialAssignment::empty(n);
        for v in 1..=n {
            if rng.random_bool(0.3) {
                seed.set(v, rng.random_bool(0.5)).unwrap();
            }
        }
        let out = prop.propagate(&seed).map_err(|e| e.to_string())?;
        let after: Vec<Option<bool>> = (1..=n).map(|v| out.assignment.get(v)).collect();
        ensure(out.satisfied == recount(&formula, &after), || format!("case {case}: partial-seed count"))?;
        let models: Vec<BitVector> = BitVector::enumerate(n)
            .filter(|z| (1..=n).all(|v| seed.get(v).is_none_or(|b| z.get(v).unwrap() == b)))
            .filter(|z| formula.count_satisfied(z).unwrap() == formula.num_clauses())
            .collect();
        match out.status {
            PropagationStatus::Conflict(_) => {
                ensure(models.is_empty(), || format!("case {case}: conflict on a satisfiable seed"))?;
            }
            PropagationStatus::Fixpoint => {
                for v in 1..=n {
                    if let (Some(b), None) = (after[v - 1], seed.get(v)) {
                        forced += 1;
                        ensure(models.iter().all(|z| z.get(v).unwrap() == b), || {
                            format!("case {case}: x{v} = {b} is not entailed")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("200 formulas; {forced} forced literals entailed"))
}

// frozen after the calibration run in CALIBRATION.md
const SEARCH_INSTANCES: u64 = 10;
const SEARCH_REQUIRED: usize = 8;

fn search_effectiveness() -> Check {
    let n = 60;
    let m = 180;
    let mut solved = 0;
    let mut evals = Vec::new();
    for instance in 0..SEARCH_INSTANCES {
        let mut rng = seeded(9_000 + instance);
        let planted = BitVector::random(n, &mut rng);
        let formula = Arc::new(random_3cnf(n, m, &mut rng, Some(&planted)));
        let f = Objective::unit_propagation(formula.clone(), (1..=n).collect()).map_err(|e| e.to_string())?;
        let mut config = MvhcConfig::new(10);
        config.mode = MappingMode::Uniform;
        config.restart = Some(RestartConfig::default());
        let budget = SearchBudget::evaluations(1_000_000).with_target(m as f64);
        let start = BitVector::random(n, &mut rng);
        let out = mvhc(&f, &start, &config, &budget, &mut rng).map_err(|e| e.to_string())?;
        if out.result.best_value == m as f64 {
            ensure(formula.count_satisfied(&out.result.best_point).unwrap() == m, || {
                "reported optimum does not satisfy the formula".into()
            })?;
            solved += 1;
        }
        evals.push(out.result.evaluations);
    }
    ensure(solved >= SEARCH_REQUIRED, || {
        format!("solved {solved}/{SEARCH_INSTANCES}, need {SEARCH_REQUIRED}; evaluations {evals:?}")
    })?;
    Ok(format!("solved {solved}/{SEARCH_INSTANCES}; evaluations {evals:?}"))
}

/// `ln` of a big integer from its bit length and leading 53 bits.
fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(53);
    let top: BigUint = x >> shift;
    let top = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn bound_calculators() -> Check {
    let mut rng = seeded(10);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let n = rng.random_range(3..=2000usize);
        let r = rng.random_range(2..n);
        let l = rng.random_range(2..=n);
        let exact = BigUint::from(r).pow(r as u32) * BigUint::from(l).pow(n as u32);
        let got = mvea_runtime_bound_ln(n, r, l).map_err(|e| e.to_string())?;
        let err = rel_err(got, big_ln(&exact));
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("bound n={n} r={r} l={l}: rel err {err:e}"))?;
    }
    let mut sets = 0;
    while sets < 25 {
        let delta = rng.random_range(2..=40usize);
        let r = rng.random_range(1..=60usize);
        let n = delta * r;
        if n < 4 {
            continue;
        }
        // uniform blocks of delta variables: r^r (delta + 1)^n = n^e
        let exact = BigUint::from(r).pow(r as u32) * BigUint::from(delta + 1).pow(n as u32);
        let expect = big_ln(&exact) / (n as f64).ln();
        let got = mvea_uniform_bound_exponent(n, delta as f64).map_err(|e| e.to_string())?;
        let err = rel_err(got, expect);
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("exponent n={n} delta={delta}: rel err {err:e}"))?;
        sets += 1;
    }
    for n in 27..=1000usize {
        let e = mvea_uniform_bound_exponent(n, (n as f64).cbrt()).map_err(|e| e.to_string())?;
        ensure(e < n as f64, || format!("cube-root exponent {e} not below n = {n}"))?;
    }
    Ok(format!("50 parameter sets, max rel err {worst:.1e}; cube-root exponent < n on 27..=1000"))
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("mergevar-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cnf_path = dir.join("planted.cnf");
    let mut rng = seeded(11);
    let planted = BitVector::random(20, &mut rng);
    std::fs::write(&cnf_path, random_3cnf(20, 70, &mut rng, Some(&planted)).to_dimacs()).map_err(|e| e.to_string())?;

    let mut configs = Vec::new();
    for algo in [Algorithm::Hc, Algorithm::Mvhc, Algorithm::Ea, Algorithm::Mvea] {
        let mut c = ExperimentConfig::new(ObjectiveKind::Trap, algo);
        c.n = Some(16);
        c.r = Some(4);
        c.budget_evals = Some(20_000);
        c.repeats = 3;
        c.seed = 42;
        configs.push(c);
    }
    let mut c = ExperimentConfig::new(ObjectiveKind::Upsat, Algorithm::Mvhc);
    c.cnf = Some(cnf_path);
    c.r = Some(4);
    c.restart = true;
    c.target = Some(70.0);
    c.budget_evals = Some(50_000);
    c.repeats = 2;
    configs.push(c);
    for c in &configs {
        let a = run_experiment(c).map_err(|e| e.to_string())?.deterministic_json();
        let b = run_experiment(c).map_err(|e| e.to_string())?.deterministic_json();
        ensure(a == b, || format!("{} report differs between reruns", c.algo))?;
    }
    std::fs::remove_dir_all(&dir).ok();

    for case in 0..20u64 {
        let mut rng = seeded(1_100 + case);
        let n = rng.random_range(8..=24);
        let f = hashed_objective(n, case);
        let m = MergingMapping::random(n, rng.random_range(2..=n / 2), MappingMode::Uniform, &mut rng).unwrap();
        let alpha = BitVector::random(n, &mut rng);
        let base = mvhc_iteration(&f, &alpha, &m, Improvement::Best, &SearchBudget::unlimited(), 1).map_err(|e| e.to_string())?;
        for workers in [2, 3, 8] {
            let other =
                mvhc_iteration(&f, &alpha, &m, Improvement::Best, &SearchBudget::unlimited(), workers).map_err(|e| e.to_string())?;
            ensure(other.best_point == base.best_point, || format!("case {case}: workers = {workers} differs"))?;
        }
    }
    Ok(format!("{} experiment configs rerun identically; 20 worker-invariance cases", configs.len()))
}

/// Hash-valued objective for dimensions too large for a table.
fn hashed_objective(n: usize, salt: u64) -> Objective {
    Objective::from_fn(n, "hashed", move |x| {
        let mut h = salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        for b in x.iter() {
            h = (h ^ b as u64 ^ 0x5bd1).wrapping_mul(0x100_0000_01b3);
            h ^= h >> 29;
        }
        (h % 97) as f64
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 bijection", bijection, Some(Duration::from_secs(1))),
        ("2 extremum preservation", extremum_preservation, Some(Duration::from_secs(30))),
        ("3 mapping count", counting, Some(Duration::from_secs(10))),
        ("4 neighborhood size", neighborhood_size, None),
        ("5 merged mutation mean", mutation_mean, Some(Duration::from_secs(60))),
        ("6 strict improvement", strict_improvement, None),
        ("7 restart solver", restart_solver, Some(Duration::from_secs(60))),
        ("8 unit propagation", unit_propagation, None),
        ("9 search effectiveness", search_effectiveness, Some(Duration::from_secs(600))),
        ("10 bound calculators", bound_calculators, None),
        ("11 determinism", determinism, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
