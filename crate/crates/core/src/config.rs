//! Run configuration, read from TOML files whose keys mirror the field names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::{SizeModel, NUM_OPS};
use crate::error::{io_err, Error, Result};
use crate::evaluation::SimulatorConfig;
use crate::selection::ObjectiveSet;
use crate::variation::VariationConfig;

/// How the tasks' operator preferences are produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskDefinition {
    /// Target pairwise cosine similarity of generated preference vectors.
    pub similarity: Option<f64>,
    /// Explicit preference vectors, one per task; overrides generation.
    pub preferences: Option<Vec<[f64; NUM_OPS]>>,
    /// Seed for generated preferences; defaults to the run seed so that
    /// variants sharing a seed share their tasks.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in HV tables; defaults to the config file stem.
    pub name: Option<String>,
    pub n_tasks: usize,
    /// Subset of task ids this run searches; all tasks when unset.
    pub active_tasks: Option<Vec<usize>>,
    pub population_size: usize,
    pub generations: usize,
    pub rmp: f64,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub representatives_per_task: usize,
    pub objective_set: ObjectiveSet,
    /// Simulator iterations per task per generation. Defaults to ten per
    /// member of a task's combined parent+offspring pool.
    pub iterations_per_task: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Generations drawn in the scatter plots (the final one is always added).
    pub snapshot_generations: Vec<usize>,
    pub size_model: SizeModel,
    pub simulator: SimulatorConfig,
    pub tasks: TaskDefinition,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: None,
            n_tasks: 2,
            active_tasks: None,
            population_size: 80,
            generations: 100,
            rmp: 1.0,
            crossover_prob: 1.0,
            mutation_prob: 0.025,
            representatives_per_task: 4,
            objective_set: ObjectiveSet::Three,
            iterations_per_task: None,
            seed: 0,
            workers: 1,
            out_dir: PathBuf::from("out"),
            snapshot_generations: vec![0, 2, 4, 6, 8],
            size_model: SizeModel::default(),
            simulator: SimulatorConfig::default(),
            tasks: TaskDefinition::default(),
        }
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("run")
    }

    /// Task ids searched by this run, ascending.
    pub fn active(&self) -> Vec<usize> {
        match &self.active_tasks {
            Some(ids) => {
                let mut ids = ids.clone();
                ids.sort_unstable();
                ids
            }
            None => (0..self.n_tasks).collect(),
        }
    }

    pub fn quota(&self) -> usize {
        self.population_size / self.active().len().max(1)
    }

    pub fn iterations(&self) -> u64 {
        self.iterations_per_task
            .unwrap_or(10 * 2 * self.quota() as u64)
    }

    pub fn variation(&self) -> VariationConfig {
        VariationConfig {
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            rmp: self.rmp,
        }
    }

    /// Everything that defines the tasks themselves; variants compared
    /// against each other must agree on it.
    pub fn task_signature(&self) -> String {
        format!(
            "n_tasks={} tasks={:?} simulator={:?} size_model={:?}",
            self.n_tasks, self.tasks, self.simulator, self.size_model
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tasks == 0 {
            return Err(bad("n_tasks", "must be at least 1"));
        }
        let active = self.active();
        if active.is_empty() {
            return Err(bad("active_tasks", "must name at least one task"));
        }
        if active.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("active_tasks", "contains duplicates"));
        }
        if let Some(&t) = active.iter().find(|&&t| t >= self.n_tasks) {
            return Err(bad(
                "active_tasks",
                format!("task {t} >= n_tasks {}", self.n_tasks),
            ));
        }
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(bad("population_size", "must be even and at least 2"));
        }
        if !self.population_size.is_multiple_of(active.len()) {
            return Err(bad(
                "population_size",
                format!(
                    "{} is not divisible by {} tasks",
                    self.population_size,
                    active.len()
                ),
            ));
        }
        for (field, v) in [
            ("rmp", self.rmp),
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(field, format!("{v} is outside [0, 1]")));
            }
        }
        if self.representatives_per_task == 0 {
            return Err(bad("representatives_per_task", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        if self.size_model.initial_channels == 0 || self.size_model.cell_repetitions == 0 {
            return Err(bad(
                "size_model",
                "channels and repetitions must be positive",
            ));
        }
        if let Some(s) = self.tasks.similarity {
            if !(0.0..=1.0).contains(&s) {
                return Err(bad("tasks.similarity", format!("{s} is outside [0, 1]")));
            }
        }
        if let Some(prefs) = &self.tasks.preferences {
            if prefs.len() != self.n_tasks {
                return Err(bad(
                    "tasks.preferences",
                    format!("expected {} vectors, got {}", self.n_tasks, prefs.len()),
                ));
            }
            if prefs.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad("tasks.preferences", "weights must lie in [0, 1]"));
            }
        }
        self.simulator.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_search_settings() {
        let c = RunConfig::default();
        assert_eq!(c.population_size, 80);
        assert_eq!(
            (c.rmp, c.crossover_prob, c.mutation_prob),
            (1.0, 1.0, 0.025)
        );
        assert_eq!(c.representatives_per_task, 4);
        assert_eq!(c.size_model.initial_channels, 20);
        assert_eq!(c.size_model.cell_repetitions, 1);
        assert_eq!(c.quota(), 40);
        assert_eq!(c.iterations(), 800);
        c.validate().unwrap();
    }

    #[test]
    fn parses_partial_toml() {
        let c = RunConfig::from_toml(
            "n_tasks = 3\npopulation_size = 12\nobjective_set = \"cars-dual\"\n[simulator]\nnoise_scale = 0.0\n[tasks]\nsimilarity = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.n_tasks, 3);
        assert_eq!(c.objective_set, ObjectiveSet::CarsDual);
        assert_eq!(c.simulator.noise_scale, 0.0);
        assert_eq!(c.simulator.tau0, SimulatorConfig::default().tau0);
        assert_eq!(c.tasks.similarity, Some(0.5));
        assert!(RunConfig::from_toml("popsize = 3").is_err());
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid_fields() {
        let check = |f: &dyn Fn(&mut RunConfig), field: &str| {
            let mut c = RunConfig::default();
            f(&mut c);
            match c.validate() {
                Err(Error::Config { field: got, .. }) => assert_eq!(got, field),
                other => panic!("expected error on {field}, got {other:?}"),
            }
        };
        check(&|c| c.population_size = 81, "population_size");
        check(&|c| c.population_size = 0, "population_size");
        check(
            &|c| {
                c.n_tasks = 3;
                c.population_size = 80;
            },
            "population_size",
        );
        check(&|c| c.rmp = 1.5, "rmp");
        check(&|c| c.mutation_prob = -0.1, "mutation_prob");
        check(&|c| c.n_tasks = 0, "n_tasks");
        check(&|c| c.active_tasks = Some(vec![2]), "active_tasks");
        check(&|c| c.active_tasks = Some(vec![0, 0]), "active_tasks");
        check(&|c| c.workers = 0, "workers");
        check(
            &|c| c.tasks.preferences = Some(vec![[0.5; 5]]),
            "tasks.preferences",
        );
        check(&|c| c.simulator.tau0 = 0.0, "simulator.tau0");
    }

    #[test]
    fn single_task_baseline_shape() {
        let c = RunConfig {
            active_tasks: Some(vec![1]),
            population_size: 40,
            ..Default::default()
        };
        c.validate().unwrap();
        assert_eq!(c.active(), vec![1]);
        assert_eq!(c.quota(), 40);
        assert_eq!(c.iterations(), 800);
    }
}
