//! Single-space population optimizers: DE/rand/1/bin and a level-based
//! learning swarm. Both advance a [`Population`] by one generation through an
//! evaluation callback, so the caller owns evaluation accounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::Objective;
use crate::convergence::{BestTracker, ConvergenceLog};
use crate::error::{Error, Result};

/// Evaluation callback. It may rewrite the candidate (bound clamping) and
/// returns [`Error::BudgetExhausted`] once no evaluations remain.
pub trait Evaluate: FnMut(&mut [f64]) -> Result<f64> {}
impl<T: FnMut(&mut [f64]) -> Result<f64>> Evaluate for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    De,
    Llso,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::De => "de",
            OptimizerKind::Llso => "llso",
        }
    }

    /// Default population size for the solver.
    pub fn default_population(self) -> usize {
        match self {
            OptimizerKind::De => 50,
            OptimizerKind::Llso => 500,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "de" => Ok(OptimizerKind::De),
            "llso" => Ok(OptimizerKind::Llso),
            other => Err(Error::invalid(format!(
                "unknown optimizer `{other}` (expected `de` or `llso`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    /// Differential weight.
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { f: 0.5, cr: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlsoParams {
    /// Number of levels.
    pub levels: usize,
    /// Weight of the second exemplar.
    pub phi: f64,
}

impl Default for LlsoParams {
    fn default() -> Self {
        Self { levels: 4, phi: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub kind: OptimizerKind,
    pub de: DeParams,
    pub llso: LlsoParams,
}

impl OptimizerParams {
    pub fn de() -> Self {
        Self {
            kind: OptimizerKind::De,
            de: DeParams::default(),
            llso: LlsoParams::default(),
        }
    }

    pub fn llso() -> Self {
        Self {
            kind: OptimizerKind::Llso,
            ..Self::de()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let DeParams { f, cr } = self.de;
        if !(f > 0.0 && f <= 2.0) {
            return Err(Error::invalid(format!("DE scale factor F must lie in (0, 2], got {f}")));
        }
        if !(0.0..=1.0).contains(&cr) {
            return Err(Error::invalid(format!("DE crossover rate CR must lie in [0, 1], got {cr}")));
        }
        if self.llso.levels < 2 {
            return Err(Error::invalid("LLSO needs at least 2 levels"));
        }
        if !(0.0..=1.0).contains(&self.llso.phi) {
            return Err(Error::invalid("LLSO phi must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Smallest population the configured solver accepts.
    pub fn min_population(&self) -> usize {
        match self.kind {
            OptimizerKind::De => 4,
            OptimizerKind::Llso => 2 * self.llso.levels,
        }
    }
}

/// Candidate solutions with aligned fitness values.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    /// Per-member velocities; only the swarm uses them.
    pub velocities: Option<Vec<Vec<f64>>>,
}

impl Population {
    /// Wraps `members` with unevaluated (`+inf`) fitness.
    pub fn new(members: Vec<Vec<f64>>) -> Self {
        let n = members.len();
        Self {
            members,
            fitness: vec![f64::INFINITY; n],
            velocities: None,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members.first().map_or(0, Vec::len)
    }

    /// Member indices ordered by fitness, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.fitness[a].total_cmp(&self.fitness[b]).then(a.cmp(&b)));
        idx
    }

    pub fn best_index(&self) -> Option<usize> {
        self.ranking().first().copied()
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Evaluates every member in order.
    pub fn evaluate_all(&mut self, evaluate: &mut impl Evaluate) -> Result<()> {
        for (x, f) in self.members.iter_mut().zip(self.fitness.iter_mut()) {
            *f = evaluate(x)?;
        }
        Ok(())
    }

    /// Pooled elitist truncation: merges `incoming` and keeps the `len()` best.
    /// Incumbents win ties, then lower index. Surviving newcomers take the slots
    /// of evicted incumbents; their velocities (if any) start at zero.
    /// Returns how many newcomers survived.
    pub fn absorb(&mut self, incoming: Vec<(Vec<f64>, f64)>) -> usize {
        let np = self.len();
        let mut pool: Vec<(f64, bool, usize)> = self
            .fitness
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, false, i))
            .chain(incoming.iter().enumerate().map(|(j, (_, f))| (*f, true, j)))
            .collect();
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        pool.truncate(np);

        let mut keep = vec![false; np];
        let mut newcomers = Vec::new();
        for &(_, is_new, idx) in &pool {
            if is_new {
                newcomers.push(idx);
            } else {
                keep[idx] = true;
            }
        }
        newcomers.sort_unstable();
        let accepted = newcomers.len();

        let mut incoming: Vec<Option<(Vec<f64>, f64)>> = incoming.into_iter().map(Some).collect();
        let free_slots = (0..np).filter(|&i| !keep[i]);
        for (slot, j) in free_slots.zip(newcomers) {
            let (x, f) = incoming[j].take().expect("each newcomer placed once");
            self.members[slot] = x;
            self.fitness[slot] = f;
            if let Some(v) = self.velocities.as_mut() {
                v[slot].iter_mut().for_each(|vi| *vi = 0.0);
            }
        }
        accepted
    }
}

/// Uniform sample of `np` points in the box `[lower, upper]`.
pub fn sample_initial(np: usize, lower: &[f64], upper: &[f64], rng: &mut impl Rng) -> Result<Population> {
    if np < 1 {
        return Err(Error::invalid("population size must be at least 1"));
    }
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::invalid("bounds must be non-empty and of equal length"));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::invalid("every lower bound must be below its upper bound"));
    }
    let members = (0..np)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| rng.gen_range(lo..hi))
                .collect()
        })
        .collect();
    Ok(Population::new(members))
}

/// How one generation went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepReport {
    pub evaluations: usize,
    /// False when the budget ran out partway through.
    pub completed: bool,
}

/// Runs the configured solver for one generation.
pub fn step(
    pop: &mut Population,
    params: &OptimizerParams,
    rng: &mut impl Rng,
    evaluate: &mut impl Evaluate,
) -> Result<StepReport> {
    match params.kind {
        OptimizerKind::De => de_step(pop, &params.de, rng, evaluate),
        OptimizerKind::Llso => llso_step(pop, &params.llso, rng, evaluate),
    }
}

fn pick_distinct(rng: &mut impl Rng, n: usize, exclude: &[usize]) -> usize {
    loop {
        let r = rng.gen_range(0..n);
        if !exclude.contains(&r) {
            return r;
        }
    }
}

/// rand/1 mutation followed by binomial crossover against `target`.
#[allow(clippy::too_many_arguments)]
pub fn de_trial(
    target: &[f64],
    base: &[f64],
    diff_a: &[f64],
    diff_b: &[f64],
    params: &DeParams,
    j_rand: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    (0..target.len())
        .map(|j| {
            if j == j_rand || rng.gen::<f64>() < params.cr {
                base[j] + params.f * (diff_a[j] - diff_b[j])
            } else {
                target[j]
            }
        })
        .collect()
}

/// One generation of DE/rand/1/bin with greedy one-to-one selection
/// (a trial replaces its target when not worse). Makes exactly `NP` evaluations
/// unless the budget runs out.
pub fn de_step(
    pop: &mut Population,
    params: &DeParams,
    rng: &mut impl Rng,
    evaluate: &mut impl Evaluate,
) -> Result<StepReport> {
    let np = pop.len();
    if np < 4 {
        return Err(Error::invalid(format!("DE needs at least 4 members, got {np}")));
    }
    let dim = pop.dim();
    let mut next_members = pop.members.clone();
    let mut next_fitness = pop.fitness.clone();
    let mut evaluations = 0;
    let mut completed = true;

    for i in 0..np {
        let r1 = pick_distinct(rng, np, &[i]);
        let r2 = pick_distinct(rng, np, &[i, r1]);
        let r3 = pick_distinct(rng, np, &[i, r1, r2]);
        let j_rand = rng.gen_range(0..dim);
        let mut trial = de_trial(
            &pop.members[i],
            &pop.members[r1],
            &pop.members[r2],
            &pop.members[r3],
            params,
            j_rand,
            rng,
        );
        let f = match evaluate(&mut trial) {
            Ok(f) => f,
            Err(Error::BudgetExhausted) => {
                completed = false;
                break;
            }
            Err(e) => return Err(e),
        };
        evaluations += 1;
        if f <= pop.fitness[i] {
            next_members[i] = trial;
            next_fitness[i] = f;
        }
    }

    pop.members = next_members;
    pop.fitness = next_fitness;
    Ok(StepReport { evaluations, completed })
}

/// Velocity and position update of one swarm member learning from two exemplars.
pub fn llso_update(
    x: &mut [f64],
    v: &mut [f64],
    exemplar_a: &[f64],
    exemplar_b: &[f64],
    phi: f64,
    rng: &mut impl Rng,
) {
    for d in 0..x.len() {
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let r3: f64 = rng.gen();
        v[d] = r1 * v[d] + r2 * (exemplar_a[d] - x[d]) + phi * r3 * (exemplar_b[d] - x[d]);
        x[d] += v[d];
    }
}

/// Splits a ranking into `levels` consecutive levels; the last takes the remainder.
pub fn level_bounds(np: usize, levels: usize) -> Vec<std::ops::Range<usize>> {
    let size = np / levels;
    (0..levels)
        .map(|l| {
            let end = if l + 1 == levels { np } else { (l + 1) * size };
            l * size..end
        })
        .collect()
}

/// One generation of the level-based learning swarm. The best level passes
/// through unevaluated; every other member learns from exemplars in two better
/// levels and is re-evaluated.
pub fn llso_step(
    pop: &mut Population,
    params: &LlsoParams,
    rng: &mut impl Rng,
    evaluate: &mut impl Evaluate,
) -> Result<StepReport> {
    let np = pop.len();
    if np < 2 * params.levels {
        return Err(Error::invalid(format!(
            "LLSO with {} levels needs at least {} members, got {np}",
            params.levels,
            2 * params.levels
        )));
    }
    let dim = pop.dim();
    if pop.velocities.is_none() {
        pop.velocities = Some(vec![vec![0.0; dim]; np]);
    }

    let ranking = pop.ranking();
    let levels = level_bounds(np, params.levels);
    let snapshot = pop.members.clone();
    let mut evaluations = 0;

    for (level, range) in levels.iter().enumerate().skip(1) {
        for &i in &ranking[range.clone()] {
            let (level_a, level_b) = if level == 1 {
                (0, 0)
            } else {
                let a = rng.gen_range(0..level);
                let b = pick_distinct(rng, level, &[a]);
                (a.min(b), a.max(b))
            };
            let pick = |rng: &mut dyn rand::RngCore, l: usize| {
                let r = &levels[l];
                ranking[rng.gen_range(r.clone())]
            };
            let a = pick(rng, level_a);
            let b = pick(rng, level_b);

            let mut x = pop.members[i].clone();
            let mut v = pop.velocities.as_ref().expect("initialized above")[i].clone();
            llso_update(&mut x, &mut v, &snapshot[a], &snapshot[b], params.phi, rng);
            let f = match evaluate(&mut x) {
                Ok(f) => f,
                Err(Error::BudgetExhausted) => {
                    return Ok(StepReport {
                        evaluations,
                        completed: false,
                    })
                }
                Err(e) => return Err(e),
            };
            evaluations += 1;
            pop.members[i] = x;
            pop.fitness[i] = f;
            pop.velocities.as_mut().expect("initialized above")[i] = v;
        }
    }
    Ok(StepReport {
        evaluations,
        completed: true,
    })
}

/// Outcome of a plain single-population run.
#[derive(Debug, Clone, PartialEq)]
pub struct BareRun {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub fe_used: u64,
    pub generations: u64,
    pub log: ConvergenceLog,
}

/// Runs the solver alone on `problem` until `max_fes` evaluations are spent.
/// Candidates are clamped into the box before evaluation.
pub fn minimize(
    problem: &dyn Objective,
    params: &OptimizerParams,
    np: usize,
    max_fes: u64,
    seed: u64,
) -> Result<BareRun> {
    params.validate()?;
    if np < params.min_population() {
        return Err(Error::invalid(format!(
            "population size {np} below the solver minimum {}",
            params.min_population()
        )));
    }
    if max_fes < np as u64 {
        return Err(Error::invalid("budget must cover the initial population"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = BestTracker::new(max_fes, np as u64);
    let mut evaluate = |x: &mut [f64]| -> Result<f64> {
        tracker.reserve()?;
        problem.clamp(x);
        let f = problem.value(x);
        tracker.record(x, f);
        Ok(f)
    };

    let mut pop = sample_initial(np, problem.lower(), problem.upper(), &mut rng)?;
    pop.evaluate_all(&mut evaluate)?;
    let mut generations = 0;
    loop {
        let report = step(&mut pop, params, &mut rng, &mut evaluate)?;
        if !report.completed {
            break;
        }
        generations += 1;
    }
    let (best_x, best_f, fe_used, log) = tracker.into_parts();
    Ok(BareRun {
        best_x,
        best_f,
        fe_used,
        generations,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &mut [f64]) -> Result<f64> {
        Ok(x.iter().map(|v| v * v).sum())
    }

    fn seeded_population(np: usize, dim: usize, seed: u64) -> (Population, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = sample_initial(np, &vec![-5.0; dim], &vec![5.0; dim], &mut rng).unwrap();
        pop.evaluate_all(&mut sphere).unwrap();
        (pop, rng)
    }

    #[test]
    fn donor_collapses_when_difference_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = [9.0, 9.0, 9.0];
        let base = [1.0, 2.0, 3.0];
        let diff = [4.0, -4.0, 0.5];
        let params = DeParams { f: 0.5, cr: 1.0 };
        let trial = de_trial(&target, &base, &diff, &diff, &params, 0, &mut rng);
        assert_eq!(trial, base.to_vec());
    }

    #[test]
    fn full_crossover_takes_donor_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = DeParams { f: 0.5, cr: 1.0 };
        let trial = de_trial(&[0.0; 4], &[1.0; 4], &[2.0; 4], &[0.0; 4], &params, 3, &mut rng);
        assert_eq!(trial, vec![2.0; 4]);
    }

    #[test]
    fn de_step_is_elitist_and_counts() {
        let (mut pop, mut rng) = seeded_population(10, 5, 3);
        let before = pop.best_fitness();
        let mut calls = 0;
        let mut eval = |x: &mut [f64]| {
            calls += 1;
            sphere(x)
        };
        let report = de_step(&mut pop, &DeParams::default(), &mut rng, &mut eval).unwrap();
        assert_eq!(report.evaluations, 10);
        assert_eq!(calls, 10);
        assert!(pop.best_fitness() <= before);
    }

    #[test]
    fn de_rejects_small_population() {
        let (mut pop, mut rng) = seeded_population(3, 2, 0);
        assert!(de_step(&mut pop, &DeParams::default(), &mut rng, &mut sphere).is_err());
    }

    #[test]
    fn de_stops_on_budget() {
        let (mut pop, mut rng) = seeded_population(8, 3, 4);
        let mut left = 5;
        let mut eval = |x: &mut [f64]| {
            if left == 0 {
                return Err(Error::BudgetExhausted);
            }
            left -= 1;
            sphere(x)
        };
        let report = de_step(&mut pop, &DeParams::default(), &mut rng, &mut eval).unwrap();
        assert_eq!(report, StepReport { evaluations: 5, completed: false });
    }

    #[test]
    fn llso_two_levels_reevaluates_worse_half() {
        let (mut pop, mut rng) = seeded_population(4, 3, 5);
        let mut calls = 0;
        let mut eval = |x: &mut [f64]| {
            calls += 1;
            sphere(x)
        };
        let params = LlsoParams { levels: 2, phi: 0.4 };
        let report = llso_step(&mut pop, &params, &mut rng, &mut eval).unwrap();
        assert_eq!(report.evaluations, 2);
        assert_eq!(calls, 2);
    }

    #[test]
    fn llso_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = vec![1.0, -2.0, 3.5];
        let original = x.clone();
        let mut v = vec![0.0; 3];
        llso_update(&mut x, &mut v, &original, &original, 0.4, &mut rng);
        assert_eq!(x, original);
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn llso_keeps_best_level() {
        let (mut pop, mut rng) = seeded_population(16, 6, 7);
        let before = pop.best_fitness();
        let best = pop.members[pop.best_index().unwrap()].clone();
        llso_step(&mut pop, &LlsoParams::default(), &mut rng, &mut sphere).unwrap();
        assert!(pop.best_fitness() <= before);
        assert!(pop.members.contains(&best));
    }

    #[test]
    fn llso_rejects_small_population() {
        let (mut pop, mut rng) = seeded_population(7, 2, 0);
        assert!(llso_step(&mut pop, &LlsoParams::default(), &mut rng, &mut sphere).is_err());
    }

    #[test]
    fn initial_sample_in_bounds_and_reproducible() {
        let lower = vec![-5.0; 20];
        let upper = vec![5.0; 20];
        let a = sample_initial(30, &lower, &upper, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_initial(30, &lower, &upper, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.members.iter().flatten().all(|v| (-5.0..=5.0).contains(v)));
        assert!(sample_initial(0, &lower, &upper, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn large_population_shape() {
        let lower = vec![-100.0; 1000];
        let upper = vec![100.0; 1000];
        let pop = sample_initial(500, &lower, &upper, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(pop.len(), 500);
        assert!(pop.members.iter().all(|m| m.len() == 1000));
    }

    #[test]
    fn absorb_prefers_incumbents_on_ties() {
        let mut pop = Population::new(vec![vec![0.0], vec![1.0], vec![2.0]]);
        pop.fitness = vec![3.0, 1.0, 2.0];
        let accepted = pop.absorb(vec![(vec![9.0], 2.0), (vec![8.0], 0.5)]);
        assert_eq!(accepted, 1);
        assert_eq!(pop.members, vec![vec![8.0], vec![1.0], vec![2.0]]);
        assert_eq!(pop.fitness, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn params_validation() {
        let mut p = OptimizerParams::de();
        p.validate().unwrap();
        p.de.f = 0.0;
        assert!(p.validate().is_err());
        let mut p = OptimizerParams::llso();
        p.llso.levels = 1;
        assert!(p.validate().is_err());
    }
}
