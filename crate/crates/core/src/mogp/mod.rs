//! Structure search by nondominated-sorting genetic programming.

mod evolve;
mod operators;

pub use evolve::{evolve_structure, evolve_structure_from, Evolution, GenerationRecord, MogpConfig, ObjectiveMode};
pub use operators::{crossover, mutate, mutate_with, try_crossover, MutationKind};

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::tree::{FuzzyTree, TreeError};

#[derive(Debug, Error)]
pub enum MogpError {
    #[error("archive is empty")]
    EmptyArchive,
    #[error("population is empty")]
    EmptyPopulation,
    #[error("dataset has {found} features but the limits require {expected}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

pub type Result<T> = std::result::Result<T, MogpError>;

/// Training RMSE and parameter count, both minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub rmse: f64,
    pub complexity: usize,
}

impl Objectives {
    pub fn new(rmse: f64, complexity: usize) -> Self {
        Self { rmse, complexity }
    }
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.rmse <= b.rmse
        && a.complexity <= b.complexity
        && (a.rmse < b.rmse || a.complexity < b.complexity)
}

/// Front index of every point (0 = nondominated).
pub fn nondominated_sort(objs: &[Objectives]) -> Vec<usize> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objs[i], &objs[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut front: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut level = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &i in &front {
            rank[i] = level;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        front = next;
        level += 1;
    }
    rank
}

/// Crowding distance of the members of one front.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let keys: [fn(&Objectives) -> (f64, f64); 2] =
        [|o| (o.rmse, o.complexity as f64), |o| (o.complexity as f64, o.rmse)];
    for lex in keys {
        let key = |o: &Objectives| lex(o).0;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (lex(&front[a]), lex(&front[b]));
            x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1))
        });
        let lo = key(&front[order[0]]);
        let hi = key(&front[order[n - 1]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let gap = (key(&front[order[w + 1]]) - key(&front[order[w - 1]])) / range;
            if !gap.is_nan() {
                dist[order[w]] += gap;
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub tree: FuzzyTree,
    pub objectives: Objectives,
    pub rank: usize,
    pub crowding: f64,
}

/// Order used for selection and truncation: lower rank, then larger crowding.
pub fn fitness_order(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Assigns rank and crowding in place. Single-objective mode ranks by RMSE
/// (complexity breaks ties, then position) and leaves crowding at 0.
pub fn assign_fitness(pop: &mut [Individual], mode: ObjectiveMode) {
    match mode {
        ObjectiveMode::Multi => {
            let objs: Vec<Objectives> = pop.iter().map(|i| i.objectives).collect();
            let ranks = nondominated_sort(&objs);
            let fronts = ranks.iter().copied().max().map_or(0, |m| m + 1);
            for f in 0..fronts {
                let members: Vec<usize> = (0..pop.len()).filter(|&i| ranks[i] == f).collect();
                let front: Vec<Objectives> = members.iter().map(|&i| objs[i]).collect();
                for (&i, d) in members.iter().zip(crowding_distance(&front)) {
                    pop[i].rank = f;
                    pop[i].crowding = d;
                }
            }
        }
        ObjectiveMode::Single => {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| {
                let (x, y) = (&pop[a].objectives, &pop[b].objectives);
                x.rmse.total_cmp(&y.rmse).then(x.complexity.cmp(&y.complexity))
            });
            for (r, i) in order.into_iter().enumerate() {
                pop[i].rank = r;
                pop[i].crowding = 0.0;
            }
        }
    }
}

/// `size` uniform picks with replacement; the best by [`fitness_order`]
/// wins and ties go to the earliest pick.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    assert!(!pop.is_empty(), "tournament on an empty population");
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size.max(1) {
        let c = rng.random_range(0..pop.len());
        if fitness_order(&pop[c], &pop[best]) == Ordering::Less {
            best = c;
        }
    }
    best
}

/// Binary tournament.
pub fn binary_tournament<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    tournament(pop, 2, rng)
}

/// Area dominated by `points` inside the box bounded by `reference`.
pub fn hypervolume(points: &[Objectives], reference: (f64, f64)) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|o| (o.rmse, o.complexity as f64))
        .filter(|&(x, y)| x < reference.0 && y < reference.1)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut ceiling = reference.1;
    for (x, y) in pts {
        if y < ceiling {
            area += (reference.0 - x) * (ceiling - y);
            ceiling = y;
        }
    }
    area
}

/// Final population ordered by (rank, -crowding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub individuals: Vec<Individual>,
}

impl ParetoArchive {
    pub fn new(mut individuals: Vec<Individual>) -> Self {
        individuals.sort_by(fitness_order);
        Self { individuals }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn front(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.iter().filter(|i| i.rank == 0)
    }

    /// Rank-0 member with the lowest RMSE; ties go to the smaller tree, then
    /// to the first encountered.
    pub fn pick_best(&self) -> Result<&Individual> {
        let mut best: Option<&Individual> = None;
        for ind in self.front() {
            let better = match best {
                None => true,
                Some(b) => {
                    let (x, y) = (&ind.objectives, &b.objectives);
                    x.rmse < y.rmse || (x.rmse == y.rmse && x.complexity < y.complexity)
                }
            };
            if better {
                best = Some(ind);
            }
        }
        best.ok_or(MogpError::EmptyArchive)
    }

    /// `(rmse, complexity, rank)` rows sorted by rank then RMSE.
    pub fn export_rows(&self) -> Vec<(f64, usize, usize)> {
        let mut rows: Vec<_> = self
            .individuals
            .iter()
            .map(|i| (i.objectives.rmse, i.objectives.complexity, i.rank))
            .collect();
        rows.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.total_cmp(&b.0)).then(a.1.cmp(&b.1)));
        rows
    }
}
