//! Multi-space evolutionary search.
//!
//! One population searches the original box-bounded space. A second population
//! searches a PCA-derived simplified space whose members are scored by mapping
//! them back through a learned affine map. Every `G_t` generations the best
//! members are exchanged between the two populations and the simplified
//! population is archived in original coordinates; every `G_r` generations the
//! simplified space is rebuilt from that archive.
//!
//! Every objective call counts against the budget, including back-mapped and
//! transferred solutions. Candidates are clamped into the box before they are
//! evaluated. Evaluation stops hard at `max_fes`, so a run never overshoots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::bench::Objective;
use crate::convergence::{BestTracker, ConvergenceLog};
use crate::error::{Error, Result};
use crate::linalg::{
    columns_to_matrix, learn_affine_map, matrix_to_columns, pca_fit, pca_project, AffineMap,
    PcaModel, DEFAULT_REL_TOL,
};
use crate::optimizers::{self, sample_initial, OptimizerParams, Population};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsesConfig {
    /// Population size of each space (NP).
    pub population: usize,
    /// Requested simplified-space dimension (d_s).
    pub simplified_dim: usize,
    /// Knowledge transfer every this many generations (G_t).
    pub transfer_interval: u64,
    /// Simplified-space reconstruction every this many generations (G_r).
    pub reconstruction_interval: u64,
    /// Elites sent from the simplified space to the original space (Q).
    pub to_original: usize,
    /// Elites sent from the original space to the simplified space (P).
    pub to_simplified: usize,
    pub archive_capacity: usize,
    pub max_fes: u64,
    /// L∞ distance at or below which two archived solutions are duplicates.
    pub dedup_tol: f64,
    /// Relative singular-value cutoff for map learning.
    pub rel_tol: f64,
    pub optimizer: OptimizerParams,
    /// Solver for the simplified space; `None` reuses `optimizer`.
    pub simplified_optimizer: Option<OptimizerParams>,
    /// With `false` only the original-space population runs (no simplified
    /// space, no transfer): the single-space baseline.
    pub multi_space: bool,
}

impl MsesConfig {
    /// Defaults for a problem of dimension `dim`: NP from the solver,
    /// Q = P = ⌈0.2·NP⌉, G_t = 1, G_r = 10, archive 5·NP, d_s = ⌈0.6·dim⌉.
    pub fn for_dim(dim: usize, optimizer: OptimizerParams) -> Self {
        Self::with_population(dim, optimizer, optimizer.kind.default_population())
    }

    pub fn with_population(dim: usize, optimizer: OptimizerParams, population: usize) -> Self {
        let mut config = Self {
            population,
            simplified_dim: default_simplified_dim(dim),
            transfer_interval: 1,
            reconstruction_interval: 10,
            to_original: 0,
            to_simplified: 0,
            archive_capacity: 0,
            max_fes: 3_000_000,
            dedup_tol: 1e-12,
            rel_tol: DEFAULT_REL_TOL,
            optimizer,
            simplified_optimizer: None,
            multi_space: true,
        };
        config.set_population(population);
        config
    }

    /// Sets NP and the quantities that scale with it (Q, P, archive size).
    pub fn set_population(&mut self, population: usize) {
        self.population = population;
        self.to_original = default_transfer_count(population);
        self.to_simplified = default_transfer_count(population);
        self.archive_capacity = 5 * population;
    }

    pub fn single_space(mut self) -> Self {
        self.multi_space = false;
        self
    }

    pub fn simplified_params(&self) -> OptimizerParams {
        self.simplified_optimizer.unwrap_or(self.optimizer)
    }

    /// Evaluations spent by initialization.
    pub fn init_cost(&self) -> u64 {
        let np = self.population as u64;
        if self.multi_space {
            2 * np
        } else {
            np
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.optimizer.validate()?;
        let np = self.population;
        if np < self.optimizer.min_population() {
            return Err(Error::invalid(format!(
                "NP = {np} is below the {} minimum of {}",
                self.optimizer.kind.name(),
                self.optimizer.min_population()
            )));
        }
        if self.max_fes < self.init_cost() {
            return Err(Error::invalid(format!(
                "max_FEs = {} cannot cover initialization ({} evaluations)",
                self.max_fes,
                self.init_cost()
            )));
        }
        if !self.multi_space {
            return Ok(());
        }
        let simplified = self.simplified_params();
        simplified.validate()?;
        if np < simplified.min_population() {
            return Err(Error::invalid("NP is below the simplified-space solver minimum"));
        }
        if self.simplified_dim < 1 || self.simplified_dim >= dim {
            return Err(Error::invalid(format!(
                "d_s = {} must lie in [1, {})",
                self.simplified_dim, dim
            )));
        }
        if !(1..=np).contains(&self.to_original) || !(1..=np).contains(&self.to_simplified) {
            return Err(Error::invalid("Q and P must lie in [1, NP]"));
        }
        if self.transfer_interval < 1 || self.reconstruction_interval < 1 {
            return Err(Error::invalid("G_t and G_r must be at least 1"));
        }
        if self.archive_capacity < np {
            return Err(Error::invalid("archive capacity must be at least NP"));
        }
        if !(self.dedup_tol >= 0.0) {
            return Err(Error::invalid("dedup tolerance must be non-negative"));
        }
        Ok(())
    }
}

pub fn default_simplified_dim(dim: usize) -> usize {
    ((0.6 * dim as f64).ceil() as usize).min(dim.saturating_sub(1)).max(1)
}

fn default_transfer_count(np: usize) -> usize {
    ((0.2 * np as f64).ceil() as usize).max(1)
}

/// Structured record of the engine's periodic events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    Init {
        generation: u64,
        fe: u64,
        effective_ds: usize,
    },
    Transfer {
        generation: u64,
        fe: u64,
        effective_ds: usize,
        /// Objective of each solution injected into the original space.
        to_original: Vec<f64>,
        accepted_in_original: usize,
        /// Objective of each solution injected into the simplified space.
        to_simplified: Vec<f64>,
        accepted_in_simplified: usize,
        /// Best objective in the original population after injection.
        best_in_original: f64,
        archive_len: usize,
    },
    Reconstruction {
        generation: u64,
        fe: u64,
        requested_ds: usize,
        effective_ds: usize,
        archive_len: usize,
    },
    ReconstructionSkipped {
        generation: u64,
        fe: u64,
        archive_len: usize,
    },
}

/// The simplified space and its population.
#[derive(Debug, Clone)]
pub struct SimplifiedSpace {
    pub pca: PcaModel,
    /// Simplified → original.
    pub to_original: AffineMap,
    /// Original → simplified.
    pub to_simplified: AffineMap,
    pub population: Population,
}

impl SimplifiedSpace {
    /// Fits PCA on the columns of `data` and learns both maps from the
    /// (original, projected) pairs. The population is left empty.
    fn build(data: &nalgebra::DMatrix<f64>, k: usize, rel_tol: f64) -> Result<Self> {
        let pca = pca_fit(data, k)?;
        let coords = pca_project(&pca, data)?;
        let to_original = learn_affine_map(&coords, data, rel_tol)?;
        let to_simplified = learn_affine_map(data, &coords, rel_tol)?;
        Ok(Self {
            pca,
            to_original,
            to_simplified,
            population: Population::new(Vec::new()),
        })
    }

    pub fn effective_dim(&self) -> usize {
        self.pca.k()
    }
}

fn eval_original(objective: &dyn Objective, tracker: &mut BestTracker, x: &mut [f64]) -> Result<f64> {
    tracker.reserve()?;
    objective.clamp(x);
    let f = objective.value(x);
    tracker.record(x, f);
    Ok(f)
}

fn eval_simplified(
    objective: &dyn Objective,
    tracker: &mut BestTracker,
    map: &AffineMap,
    q: &[f64],
) -> Result<f64> {
    tracker.reserve()?;
    let mut x = map.apply_point(q)?;
    objective.clamp(&mut x);
    let f = objective.value(&x);
    tracker.record(&x, f);
    Ok(f)
}

/// Live state of one run.
pub struct EngineState<'a> {
    objective: &'a dyn Objective,
    config: MsesConfig,
    /// Generation counter; 1 after initialization, incremented at the start of each generation.
    generation: u64,
    completed_generations: u64,
    tracker: BestTracker,
    pop_original: Population,
    space: Option<SimplifiedSpace>,
    archive: Archive,
    events: Vec<EngineEvent>,
    rng_original: ChaCha8Rng,
    rng_simplified: ChaCha8Rng,
}

/// Samples and evaluates the original population and, in multi-space mode,
/// builds the simplified space from it (2·NP evaluations in total).
pub fn init_run<'a>(objective: &'a dyn Objective, config: &MsesConfig, seed: u64) -> Result<EngineState<'a>> {
    config.validate(objective.dim())?;
    let mut rng_original = ChaCha8Rng::seed_from_u64(seed);
    let mut rng_simplified = ChaCha8Rng::seed_from_u64(seed);
    rng_simplified.set_stream(1);

    let mut tracker = BestTracker::new(config.max_fes, config.population as u64);
    let mut pop_original = sample_initial(
        config.population,
        objective.lower(),
        objective.upper(),
        &mut rng_original,
    )?;
    pop_original.evaluate_all(&mut |x: &mut [f64]| eval_original(objective, &mut tracker, x))?;

    let mut events = Vec::new();
    let space = if config.multi_space {
        let data = columns_to_matrix(&pop_original.members);
        let mut space = SimplifiedSpace::build(&data, config.simplified_dim, config.rel_tol)?;
        let coords = pca_project(&space.pca, &data)?;
        let mut pop = Population::new(matrix_to_columns(&coords));
        let map = &space.to_original;
        pop.evaluate_all(&mut |q: &mut [f64]| eval_simplified(objective, &mut tracker, map, q))?;
        space.population = pop;
        events.push(EngineEvent::Init {
            generation: 1,
            fe: tracker.fe_used(),
            effective_ds: space.effective_dim(),
        });
        Some(space)
    } else {
        None
    };

    Ok(EngineState {
        objective,
        config: *config,
        generation: 1,
        completed_generations: 0,
        tracker,
        pop_original,
        space,
        archive: Archive::new(config.archive_capacity, config.dedup_tol),
        events,
        rng_original,
        rng_simplified,
    })
}

impl<'a> EngineState<'a> {
    pub fn config(&self) -> &MsesConfig {
        &self.config
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn completed_generations(&self) -> u64 {
        self.completed_generations
    }

    pub fn fe_used(&self) -> u64 {
        self.tracker.fe_used()
    }

    pub fn best(&self) -> (&[f64], f64) {
        (self.tracker.best_x(), self.tracker.best_f())
    }

    pub fn log(&self) -> &ConvergenceLog {
        self.tracker.log()
    }

    pub fn original_population(&self) -> &Population {
        &self.pop_original
    }

    pub fn simplified_space(&self) -> Option<&SimplifiedSpace> {
        self.space.as_ref()
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn events(&self) -> &[EngineEvent] {
        &self.events
    }

    /// Clamps `x`, evaluates it and charges one evaluation.
    pub fn evaluate_in_original(&mut self, x: &mut [f64]) -> Result<f64> {
        if x.len() != self.objective.dim() {
            return Err(Error::invalid("evaluate_in_original: dimension mismatch"));
        }
        eval_original(self.objective, &mut self.tracker, x)
    }

    /// Scores a simplified-space point by mapping it back to the original space.
    pub fn evaluate_simplified(&mut self, q: &[f64]) -> Result<f64> {
        let space = self
            .space
            .as_ref()
            .ok_or_else(|| Error::invalid("no simplified space in single-space mode"))?;
        eval_simplified(self.objective, &mut self.tracker, &space.to_original, q)
    }

    /// Advances both populations by one generation and fires the periodic
    /// transfer and reconstruction events, in that order.
    /// Returns [`Error::BudgetExhausted`] when the budget ran out.
    pub fn step_generation(&mut self) -> Result<()> {
        self.tracker.reserve()?;
        self.generation += 1;
        let objective = self.objective;

        let tracker = &mut self.tracker;
        let report = optimizers::step(
            &mut self.pop_original,
            &self.config.optimizer,
            &mut self.rng_original,
            &mut |x: &mut [f64]| eval_original(objective, tracker, x),
        )?;
        if !report.completed {
            return Err(Error::BudgetExhausted);
        }

        if let Some(space) = self.space.as_mut() {
            let map = &space.to_original;
            let tracker = &mut self.tracker;
            let report = optimizers::step(
                &mut space.population,
                &self.config.simplified_params(),
                &mut self.rng_simplified,
                &mut |q: &mut [f64]| eval_simplified(objective, tracker, map, q),
            )?;
            if !report.completed {
                return Err(Error::BudgetExhausted);
            }
            if self.generation % self.config.transfer_interval == 0 {
                self.knowledge_transfer()?;
            }
            if self.generation % self.config.reconstruction_interval == 0 {
                self.reconstruct_space()?;
            }
        }
        self.completed_generations += 1;
        Ok(())
    }

    /// Exchanges elites between the spaces and archives the simplified
    /// population in original coordinates. Costs Q + P evaluations.
    pub fn knowledge_transfer(&mut self) -> Result<()> {
        let objective = self.objective;
        let Some(space) = self.space.as_mut() else {
            return Ok(());
        };

        // simplified → original
        let mut to_original = Vec::with_capacity(self.config.to_original);
        let mut outcome = Ok(());
        for i in select_best(&space.population, self.config.to_original) {
            let mut x = space.to_original.apply_point(&space.population.members[i])?;
            match eval_original(objective, &mut self.tracker, &mut x) {
                Ok(f) => to_original.push((x, f)),
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        let sent_original: Vec<f64> = to_original.iter().map(|(_, f)| *f).collect();
        let accepted_in_original = self.pop_original.absorb(to_original);
        outcome?;

        // original → simplified
        let mut outcome = Ok(());
        let mut to_simplified = Vec::with_capacity(self.config.to_simplified);
        for i in select_best(&self.pop_original, self.config.to_simplified) {
            let q = space.to_simplified.apply_point(&self.pop_original.members[i])?;
            match eval_simplified(objective, &mut self.tracker, &space.to_original, &q) {
                Ok(f) => to_simplified.push((q, f)),
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        let sent_simplified: Vec<f64> = to_simplified.iter().map(|(_, f)| *f).collect();
        let accepted_in_simplified = space.population.absorb(to_simplified);
        outcome?;

        for q in &space.population.members {
            let mut x = space.to_original.apply_point(q)?;
            objective.clamp(&mut x);
            self.archive.insert(x);
        }

        self.events.push(EngineEvent::Transfer {
            generation: self.generation,
            fe: self.tracker.fe_used(),
            effective_ds: space.effective_dim(),
            to_original: sent_original,
            accepted_in_original,
            to_simplified: sent_simplified,
            accepted_in_simplified,
            best_in_original: self.pop_original.best_fitness(),
            archive_len: self.archive.len(),
        });
        Ok(())
    }

    /// Rebuilds the simplified space from the archive, relearns both maps and
    /// re-initializes the simplified population by carrying its members through
    /// the original space into the new space. Costs NP evaluations.
    pub fn reconstruct_space(&mut self) -> Result<()> {
        let objective = self.objective;
        let Some(space) = self.space.as_mut() else {
            return Ok(());
        };
        if self.archive.len() < 2 {
            log::warn!(
                "generation {}: archive holds {} entries, skipping reconstruction",
                self.generation,
                self.archive.len()
            );
            self.events.push(EngineEvent::ReconstructionSkipped {
                generation: self.generation,
                fe: self.tracker.fe_used(),
                archive_len: self.archive.len(),
            });
            return Ok(());
        }

        let carried: Vec<Vec<f64>> = space
            .population
            .members
            .iter()
            .map(|q| {
                let mut x = space.to_original.apply_point(q)?;
                objective.clamp(&mut x);
                Ok(x)
            })
            .collect::<Result<_>>()?;

        let entries: Vec<&[f64]> = self.archive.entries().collect();
        let data = columns_to_matrix(&entries);
        let mut rebuilt = SimplifiedSpace::build(&data, self.config.simplified_dim, self.config.rel_tol)?;
        let members = carried
            .iter()
            .map(|x| rebuilt.to_simplified.apply_point(x))
            .collect::<Result<Vec<_>>>()?;
        rebuilt.population = Population::new(members);
        *space = rebuilt;

        let map = &space.to_original;
        let tracker = &mut self.tracker;
        space
            .population
            .evaluate_all(&mut |q: &mut [f64]| eval_simplified(objective, tracker, map, q))?;

        if space.pca.was_reduced() {
            log::debug!(
                "generation {}: archive rank {} below d_s = {}, simplified dimension reduced",
                self.generation,
                space.pca.rank(),
                self.config.simplified_dim
            );
        }
        self.events.push(EngineEvent::Reconstruction {
            generation: self.generation,
            fe: self.tracker.fe_used(),
            requested_ds: self.config.simplified_dim,
            effective_ds: space.effective_dim(),
            archive_len: self.archive.len(),
        });
        Ok(())
    }

    pub fn into_result(self) -> RunResult {
        let max_fes = self.config.max_fes;
        let generations = self.completed_generations;
        let events = self.events;
        let (best_x, best_f, fe_used, log) = self.tracker.into_parts();
        RunResult {
            best_x,
            best_f,
            fe_used,
            max_fes,
            generations,
            log,
            events,
        }
    }
}

/// Indices of the `count` fittest members, best first.
pub fn select_best(pop: &Population, count: usize) -> Vec<usize> {
    let mut ranking = pop.ranking();
    ranking.truncate(count);
    ranking
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub fe_used: u64,
    pub max_fes: u64,
    /// Generations that ran to completion.
    pub generations: u64,
    pub log: ConvergenceLog,
    pub events: Vec<EngineEvent>,
}

impl RunResult {
    /// Evaluations spent beyond `max_fes`.
    pub fn overshoot(&self) -> u64 {
        self.fe_used.saturating_sub(self.max_fes)
    }

    /// One JSON object per line.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

/// Runs the search until the evaluation budget is spent.
pub fn run(objective: &dyn Objective, config: &MsesConfig, seed: u64) -> Result<RunResult> {
    let mut state = init_run(objective, config, seed)?;
    loop {
        match state.step_generation() {
            Ok(()) => {}
            Err(Error::BudgetExhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(state.into_result())
}

/// The baseline arm: the same loop with only the original-space population.
pub fn run_single_space(objective: &dyn Objective, config: &MsesConfig, seed: u64) -> Result<RunResult> {
    run(objective, &config.single_space(), seed)
}
