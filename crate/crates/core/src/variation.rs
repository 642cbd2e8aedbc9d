//! Block crossover, bit mutation, mate selection and RMP-gated reproduction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{slot_cardinality, Genotype, BLOCKS_PER_CELL, CELLS, GENOTYPE_LEN};
use crate::error::{Error, Result};
use crate::selection::ObjectiveVector;

/// A genotype bound to the task it is evaluated on (its skill factor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genotype: Genotype,
    pub task: usize,
    pub objectives: Option<ObjectiveVector>,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
}

impl Individual {
    pub fn new(genotype: Genotype, task: usize) -> Individual {
        Individual {
            genotype,
            task,
            objectives: None,
            rank: None,
            crowding: None,
        }
    }

    /// Fresh copy carrying only genotype and task.
    pub fn child(genotype: Genotype, task: usize) -> Individual {
        Individual::new(genotype, task)
    }

    pub fn objectives(&self) -> Result<&ObjectiveVector> {
        self.objectives.as_ref().ok_or(Error::MissingObjectives)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub rmp: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            crossover_prob: 1.0,
            mutation_prob: 0.025,
            rmp: 1.0,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
            ("rmp", self.rmp),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfUnitRange { name, value });
            }
        }
        Ok(())
    }
}

/// Swaps each of the 10 blocks between the parents with probability `pc`.
pub fn block_crossover<R: Rng + ?Sized>(
    p1: &Genotype,
    p2: &Genotype,
    pc: f64,
    rng: &mut R,
) -> (Genotype, Genotype) {
    let mut c1 = *p1;
    let mut c2 = *p2;
    for b in 0..CELLS * BLOCKS_PER_CELL {
        if rng.random_bool(pc) {
            c1.block_mut(b).copy_from_slice(p2.block(b));
            c2.block_mut(b).copy_from_slice(p1.block(b));
        }
    }
    (c1, c2)
}

/// Redraws each slot with probability `pm`, uniformly among the legal values
/// other than the current one.
pub fn bit_mutation<R: Rng + ?Sized>(g: &Genotype, pm: f64, rng: &mut R) -> Genotype {
    let mut out = *g;
    for i in 0..GENOTYPE_LEN {
        if !rng.random_bool(pm) {
            continue;
        }
        let card = slot_cardinality(i);
        if card < 2 {
            continue;
        }
        let cur = out.slot(i);
        let mut v = rng.random_range(0..card - 1);
        if v >= cur {
            v += 1;
        }
        out.set_slot(i, v);
    }
    out
}

/// Shuffles the population and pairs neighbours. Returns index pairs.
pub fn mate_selection<T, R: Rng + ?Sized>(
    population: &[T],
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let n = population.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::OddPopulation(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Which of the three reproduction cases produced a pair of children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reproduction {
    /// Parents share a task: crossover then mutation.
    SameTask,
    /// Cross-task parents, transfer triggered by rmp.
    Transfer,
    /// Cross-task parents, no transfer: each parent mutated on its own.
    MutationOnly,
}

pub fn reproduce<R: Rng + ?Sized>(
    a: &Individual,
    b: &Individual,
    cfg: &VariationConfig,
    rng: &mut R,
) -> (Individual, Individual, Reproduction) {
    let pm = cfg.mutation_prob;
    if a.task == b.task {
        let (g1, g2) = block_crossover(&a.genotype, &b.genotype, cfg.crossover_prob, rng);
        let g1 = bit_mutation(&g1, pm, rng);
        let g2 = bit_mutation(&g2, pm, rng);
        (
            Individual::child(g1, a.task),
            Individual::child(g2, a.task),
            Reproduction::SameTask,
        )
    } else if rng.random_bool(cfg.rmp) {
        let (g1, g2) = block_crossover(&a.genotype, &b.genotype, cfg.crossover_prob, rng);
        let g1 = bit_mutation(&g1, pm, rng);
        let g2 = bit_mutation(&g2, pm, rng);
        let mut pick = || if rng.random_bool(0.5) { a.task } else { b.task };
        let (t1, t2) = (pick(), pick());
        (
            Individual::child(g1, t1),
            Individual::child(g2, t2),
            Reproduction::Transfer,
        )
    } else {
        let g1 = bit_mutation(&a.genotype, pm, rng);
        let g2 = bit_mutation(&b.genotype, pm, rng);
        (
            Individual::child(g1, a.task),
            Individual::child(g2, b.task),
            Reproduction::MutationOnly,
        )
    }
}

pub fn generate_offspring<R: Rng + ?Sized>(
    pair: (&Individual, &Individual),
    cfg: &VariationConfig,
    rng: &mut R,
) -> (Individual, Individual) {
    let (c1, c2, _) = reproduce(pair.0, pair.1, cfg, rng);
    (c1, c2)
}
