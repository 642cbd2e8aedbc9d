//! Simulated weight-sharing supernet, one per task.
//!
//! Weight sharing is modelled at `(cell, block, op slot, operator)`
//! granularity: training an architecture for `n` iterations adds `n` to the
//! counter of every position/operator pair it uses. Validation error decays
//! from an untrained level towards an architecture-specific floor as the
//! mean counter over its op slots grows; larger models have a lower floor
//! but converge more slowly.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{count_macs, count_params, Genotype, Op, SizeModel, NUM_OPS, OP_SLOTS};
use crate::error::{Error, Result};
use crate::rng::{self, Domain, StreamRng};
use crate::selection::ObjectiveVector;
use crate::variation::Individual;

/// Shared-counter slots: one per (op slot position, operator).
pub const COUNTER_LEN: usize = OP_SLOTS * NUM_OPS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    /// Error of an untrained architecture.
    pub untrained_error: f64,
    /// Base convergence time constant, in shared-counter units.
    pub tau0: f64,
    /// Relative slowdown of the largest model: tau = tau0 * (1 + k * capacity).
    pub capacity_slowdown: f64,
    pub final_error_base: f64,
    pub quality_weight: f64,
    pub capacity_weight: f64,
    /// Half-width of the centred uniform validation noise.
    pub noise_scale: f64,
    /// Artificial wall-clock cost of one validation call.
    pub validation_delay_ms: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            untrained_error: 0.9,
            tau0: 50.0,
            capacity_slowdown: 100.0,
            final_error_base: 0.05,
            quality_weight: 0.35,
            capacity_weight: 0.02,
            noise_scale: 0.005,
            validation_delay_ms: 0,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Error::Config {
            field,
            reason: reason.to_string(),
        };
        if !(0.0..=1.0).contains(&self.untrained_error) {
            return Err(bad("simulator.untrained_error", "must lie in [0, 1]"));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(bad("simulator.tau0", "must be positive"));
        }
        for (field, v) in [
            ("simulator.capacity_slowdown", self.capacity_slowdown),
            ("simulator.final_error_base", self.final_error_base),
            ("simulator.quality_weight", self.quality_weight),
            ("simulator.capacity_weight", self.capacity_weight),
            ("simulator.noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(field, "must be a non-negative finite number"));
            }
        }
        Ok(())
    }
}

/// One task's simulated supernet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub task: usize,
    /// Per-operator quality weights in [0, 1], indexed like [`crate::encoding::Op`].
    pub preference: [f64; NUM_OPS],
    /// Accumulated training iterations per (op slot, operator).
    pub counters: Vec<u64>,
    pub sim: SimulatorConfig,
    pub size_model: SizeModel,
    /// Master seed the noise streams are derived from.
    pub seed: u64,
    /// Generation the noise stream is positioned at.
    pub generation: u64,
    #[serde(skip)]
    noise: Option<StreamRng>,
}

impl TaskState {
    pub fn new(
        task: usize,
        preference: [f64; NUM_OPS],
        sim: SimulatorConfig,
        size_model: SizeModel,
        seed: u64,
    ) -> TaskState {
        TaskState {
            task,
            preference,
            counters: vec![0; COUNTER_LEN],
            sim,
            size_model,
            seed,
            generation: 0,
            noise: None,
        }
    }

    pub fn counter(&self, op_slot: usize, op: usize) -> u64 {
        self.counters[op_slot * NUM_OPS + op]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            path: "<task state>".into(),
            reason: e.to_string(),
        })
    }

    pub fn from_json(s: &str) -> Result<TaskState> {
        let state: TaskState = serde_json::from_str(s).map_err(|e| Error::Parse {
            path: "<task state>".into(),
            reason: e.to_string(),
        })?;
        if state.counters.len() != COUNTER_LEN {
            return Err(Error::Parse {
                path: "<task state>".into(),
                reason: format!(
                    "expected {COUNTER_LEN} counters, got {}",
                    state.counters.len()
                ),
            });
        }
        Ok(state)
    }

    /// Mean operator quality over the genotype's op slots.
    pub fn quality(&self, g: &Genotype) -> f64 {
        g.ops()
            .map(|(_, op)| self.preference[op as usize])
            .sum::<f64>()
            / OP_SLOTS as f64
    }

    /// Model size on the fixed `[0, max_params]` reference range.
    pub fn capacity(&self, g: &Genotype) -> f64 {
        let max = self.size_model.max_params();
        if max == 0 {
            return 0.0;
        }
        (count_params(g, &self.size_model) as f64 / max as f64).clamp(0.0, 1.0)
    }

    /// Mean shared counter over the genotype's op slots.
    pub fn progress(&self, g: &Genotype) -> f64 {
        g.ops()
            .map(|(i, op)| self.counter(i, op as usize) as f64)
            .sum::<f64>()
            / OP_SLOTS as f64
    }

    /// Noise-free validation error.
    pub fn expected_error(&self, g: &Genotype) -> f64 {
        let s = &self.sim;
        let q = self.quality(g);
        let c = self.capacity(g);
        let floor =
            s.final_error_base + s.quality_weight * (1.0 - q) + s.capacity_weight * (1.0 - c);
        let tau = s.tau0 * (1.0 + s.capacity_slowdown * c);
        let p = self.progress(g);
        floor + (s.untrained_error - floor) * (-p / tau).exp()
    }

    fn noise_rng(&mut self) -> &mut StreamRng {
        let (seed, task, generation) = (self.seed, self.task as u64, self.generation);
        self.noise
            .get_or_insert_with(|| rng::stream(seed, Domain::Noise, &[task, generation]))
    }
}

/// Per-task training and validation, the extension point for real
/// evaluators. Each implementor owns its task's parameters exclusively.
pub trait TaskEvaluator: Send {
    fn task(&self) -> usize;

    /// Positions any per-generation randomness at `generation`.
    fn begin_generation(&mut self, generation: u64);

    fn train(&mut self, genotypes: &[Genotype], train_n: u64) -> Result<()>;

    fn validate(&mut self, g: &Genotype) -> Result<f64>;

    fn size_model(&self) -> &SizeModel;
}

impl TaskEvaluator for TaskState {
    fn task(&self) -> usize {
        self.task
    }

    fn begin_generation(&mut self, generation: u64) {
        self.generation = generation;
        self.noise = None;
    }

    fn train(&mut self, genotypes: &[Genotype], train_n: u64) -> Result<()> {
        train(self, genotypes, train_n);
        Ok(())
    }

    fn validate(&mut self, g: &Genotype) -> Result<f64> {
        Ok(validate(self, g))
    }

    fn size_model(&self) -> &SizeModel {
        &self.size_model
    }
}

/// Iterations each individual receives: `floor(total / n)`.
pub fn split_budget(total_iterations: u64, n_individuals: usize) -> Result<u64> {
    if n_individuals == 0 {
        return Err(Error::NoIndividuals);
    }
    Ok(total_iterations / n_individuals as u64)
}

pub fn train(state: &mut TaskState, genotypes: &[Genotype], train_n: u64) {
    if train_n == 0 {
        return;
    }
    for g in genotypes {
        for (i, op) in g.ops() {
            state.counters[i * NUM_OPS + op as usize] += train_n;
        }
    }
}

/// Validation error in [0, 1], including one noise draw from the task's
/// current generation stream.
pub fn validate(state: &mut TaskState, g: &Genotype) -> f64 {
    let mean = state.expected_error(g);
    let scale = state.sim.noise_scale;
    let noise = if scale > 0.0 {
        state.noise_rng().random_range(-scale..=scale)
    } else {
        0.0
    };
    if state.sim.validation_delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(state.sim.validation_delay_ms));
    }
    (mean + noise).clamp(0.0, 1.0)
}

/// Generates per-task operator preference vectors in `[0, 1]^5`.
/// Convolutions start in [0.6, 1] with the separable one ranked first,
/// and the parameter-free ops in [0.05, 0.6].
/// With a similarity target every pair of vectors is then driven to that
/// cosine similarity (within 0.02).
pub fn preference_vectors<R: Rng + ?Sized>(
    n_tasks: usize,
    similarity: Option<f64>,
    rng: &mut R,
) -> Result<Vec<[f64; NUM_OPS]>> {
    let mut prefs: Vec<[f64; NUM_OPS]> = (0..n_tasks)
        .map(|_| {
            let mut p: [f64; NUM_OPS] = std::array::from_fn(|k| {
                if Op::ALL[k].is_conv() {
                    rng.random_range(0.6..=1.0)
                } else {
                    rng.random_range(0.05..=0.6)
                }
            });
            let (sep, dil) = (Op::SepConv3x3 as usize, Op::DilConv3x3 as usize);
            if p[dil] > p[sep] {
                p.swap(sep, dil);
            }
            p
        })
        .collect();
    let Some(target) = similarity else {
        return Ok(prefs);
    };
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::OutOfUnitRange {
            name: "similarity",
            value: target,
        });
    }
    if n_tasks < 2 {
        return Ok(prefs);
    }
    let loss = |prefs: &[[f64; NUM_OPS]]| {
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for i in 0..prefs.len() {
            for j in i + 1..prefs.len() {
                let d = cosine(&prefs[i], &prefs[j]) - target;
                worst = worst.max(d.abs());
                total += d * d;
            }
        }
        (total, worst)
    };
    let (mut best, mut worst) = loss(&prefs);
    let mut step = 0.3;
    for iter in 0..200_000 {
        if worst < 0.005 {
            break;
        }
        let t = rng.random_range(0..n_tasks);
        let k = rng.random_range(0..NUM_OPS);
        let old = prefs[t][k];
        prefs[t][k] = (old + rng.random_range(-step..=step)).clamp(0.0, 1.0);
        if prefs[t].iter().all(|&v| v == 0.0) {
            prefs[t][k] = old;
            continue;
        }
        let (cand, cand_worst) = loss(&prefs);
        if cand <= best {
            best = cand;
            worst = cand_worst;
        } else {
            prefs[t][k] = old;
        }
        if iter % 1000 == 999 {
            step = (step * 0.8).max(0.01);
        }
    }
    if worst > 0.02 {
        return Err(Error::Config {
            field: "tasks.similarity",
            reason: format!("could not reach cosine target {target} (off by {worst:.3})"),
        });
    }
    Ok(prefs)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Runs per-task evaluation either inline or on a rayon pool.
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Executor {
        Executor {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `workers <= 1`, or a build without the `parallel` feature, runs tasks
    /// inline in task order.
    pub fn new(workers: usize) -> Result<Executor> {
        #[cfg(feature = "parallel")]
        if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config {
                    field: "workers",
                    reason: e.to_string(),
                })?;
            return Ok(Executor {
                workers,
                pool: Some(pool),
            });
        }
        let _ = workers;
        Ok(Executor::sequential())
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn for_each_task<E, F>(&self, jobs: &mut [(E, Vec<Individual>)], f: F) -> Result<()>
    where
        E: Send,
        F: Fn(&mut E, &mut Vec<Individual>) -> Result<()> + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| {
                jobs.par_iter_mut()
                    .map(|(state, group)| f(state, group))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect()
            });
        }
        jobs.iter_mut()
            .try_for_each(|(state, group)| f(state, group))
    }
}

fn evaluate_task<E: TaskEvaluator>(
    state: &mut E,
    group: &mut [Individual],
    total_iterations: u64,
    generation: u64,
) -> Result<()> {
    if group.is_empty() {
        return Ok(());
    }
    let task = state.task();
    let wrap = |source: Error| Error::Task {
        task,
        source: Box::new(source),
    };
    let train_n = split_budget(total_iterations, group.len()).map_err(wrap)?;
    state.begin_generation(generation);
    let genotypes: Vec<Genotype> = group.iter().map(|ind| ind.genotype).collect();
    state.train(&genotypes, train_n).map_err(wrap)?;
    for ind in group.iter_mut() {
        let error = state.validate(&ind.genotype).map_err(wrap)?;
        let m = state.size_model();
        ind.objectives = Some(ObjectiveVector::raw(
            error,
            count_params(&ind.genotype, m),
            count_macs(&ind.genotype, m),
        ));
        ind.rank = None;
        ind.crowding = None;
    }
    Ok(())
}

/// Trains and validates every task's individuals. `groups[k]` holds the
/// individuals of `states[k]`; tasks run concurrently on `exec` and the
/// result is identical to running them one after another.
pub fn evaluate_generation<E: TaskEvaluator>(
    states: &mut Vec<E>,
    groups: Vec<Vec<Individual>>,
    total_iterations: u64,
    generation: u64,
    exec: &Executor,
) -> Result<Vec<Vec<Individual>>> {
    assert_eq!(
        states.len(),
        groups.len(),
        "one individual group per task state"
    );
    let mut jobs: Vec<(E, Vec<Individual>)> =
        std::mem::take(states).into_iter().zip(groups).collect();
    let outcome = exec.for_each_task(&mut jobs, |state, group| {
        evaluate_task(state, group, total_iterations, generation)
    });
    let (restored, groups): (Vec<E>, Vec<Vec<Individual>>) = jobs.into_iter().unzip();
    *states = restored;
    outcome.map(|_| groups)
}
