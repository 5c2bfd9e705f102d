use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{crossover, mutate, MutationKind};
use super::{
    assign_fitness, fitness_order, hypervolume, tournament, Individual, MogpError, Objectives,
    ParetoArchive, Result,
};
use crate::data::Dataset;
use crate::tree::{FisKind, FuzzyTree, GrowConfig, TreeLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Rank by RMSE alone.
    Single,
    /// Nondominated sorting on (RMSE, parameter count).
    #[default]
    Multi,
}

impl std::fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectiveMode::Single => "single",
            ObjectiveMode::Multi => "multi",
        })
    }
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(ObjectiveMode::Single),
            "multi" => Ok(ObjectiveMode::Multi),
            other => Err(format!("unknown objective mode '{other}' (expected single or multi)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MogpConfig {
    pub pop_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mating_pool: usize,
    pub tournament_size: usize,
    pub generations: usize,
    pub limits: TreeLimits,
    pub kind: FisKind,
    pub mode: ObjectiveMode,
    /// Mutation operators that may be drawn.
    pub mutations: Vec<MutationKind>,
    /// Chance that a grown child slot becomes a terminal.
    pub p_terminal: f64,
}

impl MogpConfig {
    /// Defaults: population 50, crossover 0.8, mutation 0.2, pool 25,
    /// binary tournament, 500 generations.
    pub fn new(limits: TreeLimits, kind: FisKind) -> Self {
        Self {
            pop_size: 50,
            crossover_prob: 0.8,
            mutation_prob: 0.2,
            mating_pool: 25,
            tournament_size: 2,
            generations: 500,
            limits,
            kind,
            mode: ObjectiveMode::Multi,
            mutations: MutationKind::ALL.to_vec(),
            p_terminal: 0.5,
        }
    }

    pub fn grow_config(&self) -> GrowConfig {
        GrowConfig { limits: self.limits, kind: self.kind, p_terminal: self.p_terminal }
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.check()?;
        let bad = |m: &str| Err(MogpError::Config(m.into()));
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if self.mating_pool < 1 || self.tournament_size < 1 {
            return bad("mating_pool and tournament_size must be positive");
        }
        for p in [self.crossover_prob, self.mutation_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.mutations.is_empty() && self.mutation_prob > 0.0 {
            return bad("no mutation operator enabled");
        }
        if !(0.0..=1.0).contains(&self.p_terminal) {
            return bad("p_terminal must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One line of the structure-phase log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Lowest RMSE in the population.
    pub best_rmse: f64,
    /// Smallest parameter count on the rank-0 front.
    pub best_complexity: usize,
    pub front_size: usize,
    /// Area dominated by the rank-0 front.
    pub hypervolume: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub archive: ParetoArchive,
    pub log: Vec<GenerationRecord>,
    /// Hypervolume reference point, fixed from the initial population.
    pub reference: (f64, f64),
}

fn evaluate(data: &Dataset, trees: Vec<FuzzyTree>) -> Result<Vec<Individual>> {
    trees
        .into_par_iter()
        .map(|tree| {
            let rmse = data.tree_rmse(&tree)?;
            let complexity = tree.parameter_count();
            Ok(Individual { tree, objectives: Objectives::new(rmse, complexity), rank: 0, crowding: 0.0 })
        })
        .collect()
}

fn record(generation: usize, pop: &[Individual], reference: (f64, f64)) -> GenerationRecord {
    let front: Vec<Objectives> = pop.iter().filter(|i| i.rank == 0).map(|i| i.objectives).collect();
    GenerationRecord {
        generation,
        best_rmse: pop.iter().map(|i| i.objectives.rmse).fold(f64::INFINITY, f64::min),
        best_complexity: front.iter().map(|o| o.complexity).min().unwrap_or(0),
        front_size: front.len(),
        hypervolume: hypervolume(&front, reference),
    }
}

fn sorted(mut pop: Vec<Individual>, mode: ObjectiveMode) -> Vec<Individual> {
    assign_fitness(&mut pop, mode);
    pop.sort_by(fitness_order);
    pop
}

/// Evolves tree structures on `data` starting from a random population.
pub fn evolve_structure<R: Rng + ?Sized>(data: &Dataset, cfg: &MogpConfig, rng: &mut R) -> Result<Evolution> {
    evolve_structure_from(data, cfg, Vec::new(), rng)
}

/// Like [`evolve_structure`], with `seeds` placed at the front of the initial
/// population (extra seeds beyond the population size are ignored).
pub fn evolve_structure_from<R: Rng + ?Sized>(
    data: &Dataset,
    cfg: &MogpConfig,
    seeds: Vec<FuzzyTree>,
    rng: &mut R,
) -> Result<Evolution> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(MogpError::EmptyPopulation);
    }
    if data.n_features() != cfg.limits.n_features {
        return Err(MogpError::FeatureMismatch { expected: cfg.limits.n_features, found: data.n_features() });
    }
    let grow = cfg.grow_config();
    let mut trees: Vec<FuzzyTree> = seeds.into_iter().take(cfg.pop_size).collect();
    for t in &trees {
        t.validate(&cfg.limits)?;
    }
    while trees.len() < cfg.pop_size {
        trees.push(FuzzyTree::random(&grow, rng));
    }

    let mut pop = sorted(evaluate(data, trees)?, cfg.mode);
    let max_rmse = pop
        .iter()
        .map(|i| i.objectives.rmse)
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let max_complexity = pop.iter().map(|i| i.objectives.complexity).max().unwrap_or(0);
    let reference = (
        if max_rmse > 0.0 { 1.1 * max_rmse } else { 1.0 },
        1.1 * max_complexity as f64,
    );
    let mut log = vec![record(0, &pop, reference)];

    let total = cfg.crossover_prob + cfg.mutation_prob;
    for generation in 1..=cfg.generations {
        let pool: Vec<usize> =
            (0..cfg.mating_pool).map(|_| tournament(&pop, cfg.tournament_size, rng)).collect();
        let mut children = Vec::with_capacity(cfg.pop_size + 1);
        while children.len() < cfg.pop_size {
            let ia = rng.random_range(0..pool.len());
            let ib = if pool.len() > 1 {
                let j = rng.random_range(0..pool.len() - 1);
                if j >= ia { j + 1 } else { j }
            } else {
                ia
            };
            let (a, b) = (&pop[pool[ia]].tree, &pop[pool[ib]].tree);
            let draw: f64 = rng.random();
            if total > 0.0 && draw * total < cfg.crossover_prob {
                let (x, y) = crossover(a, b, &grow, rng);
                children.push(x);
                children.push(y);
            } else if total > 0.0 {
                children.push(mutate(a, &cfg.mutations, &grow, rng).0);
                children.push(mutate(b, &cfg.mutations, &grow, rng).0);
            } else {
                children.push(a.clone());
                children.push(b.clone());
            }
        }
        children.truncate(cfg.pop_size);
        debug_assert!(children.iter().all(|t| t.validate(&cfg.limits).is_ok()));

        let mut combined = pop;
        combined.extend(evaluate(data, children)?);
        let mut survivors = sorted(combined, cfg.mode);
        survivors.truncate(cfg.pop_size);
        pop = sorted(survivors, cfg.mode);
        log.push(record(generation, &pop, reference));
    }

    Ok(Evolution { archive: ParetoArchive::new(pop), log, reference })
}
