//! Generation loop: initialisation, mating, reproduction, per-task
//! evaluation and environmental selection, plus multi-variant comparison.
//!
//! Random streams: initial genotypes and task assignment draw from
//! `(seed, Init)`, the mating shuffle of generation `k` from
//! `(seed, Mating, k)`, the offspring of pair `i` from
//! `(seed, Offspring, k, i)` and validation noise from
//! `(seed, Noise, task, k)`. Nothing depends on worker scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::encoding::random_genotype;
use crate::error::{io_err, Error, Result};
use crate::evaluation::{evaluate_generation, preference_vectors, Executor, TaskState};
use crate::metrics::{
    hv_report, pareto_front_2d, select_representatives, FrontRecord, FrontSnapshot, HvRow,
};
use crate::output;
use crate::rng::{self, Domain};
use crate::selection::{environmental_selection, normalize};
use crate::variation::{mate_selection, reproduce, Individual};

/// Everything needed to continue a run after a completed generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: usize,
    pub population: Vec<Individual>,
    pub task_states: Vec<TaskState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub task: usize,
    pub population: Vec<Individual>,
    /// Non-dominated members of the final population in (error, params).
    pub front: Vec<Individual>,
    pub representatives: Vec<Individual>,
}

impl TaskOutcome {
    pub fn front_points(&self) -> Vec<[f64; 2]> {
        self.front
            .iter()
            .map(|i| {
                let o = i.objectives.expect("evaluated");
                [o.error, o.params_raw as f64]
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub tasks: Vec<TaskOutcome>,
    pub hv: Vec<HvRow>,
    pub snapshots: Vec<FrontSnapshot>,
    /// `gen_{k}.csv` contents, one entry per generation.
    pub logs: Vec<String>,
    pub initial_population: Vec<Individual>,
}

/// Where a run writes its artefacts; `None` keeps everything in memory.
fn out_path(out: Option<&Path>, name: &str) -> Option<PathBuf> {
    out.map(|d| d.join(name))
}

fn write(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    if let Some(path) = out_path(out, name) {
        std::fs::write(&path, contents).map_err(io_err(path))?;
    }
    Ok(())
}

fn task_preferences(cfg: &RunConfig) -> Result<Vec<[f64; 5]>> {
    if let Some(p) = &cfg.tasks.preferences {
        return Ok(p.clone());
    }
    let seed = cfg.tasks.seed.unwrap_or(cfg.seed);
    let mut r = rng::stream(seed, Domain::Tasks, &[cfg.n_tasks as u64]);
    preference_vectors(cfg.n_tasks, cfg.tasks.similarity, &mut r)
}

/// Random genotypes dealt round-robin over a shuffled order, so each active
/// task receives exactly `population_size / n_active` individuals, plus a
/// fresh supernet per active task.
pub fn initialize(cfg: &RunConfig) -> Result<(Vec<Individual>, Vec<TaskState>)> {
    cfg.validate()?;
    let active = cfg.active();
    let prefs = task_preferences(cfg)?;
    let mut r = rng::stream(cfg.seed, Domain::Init, &[]);
    let genotypes: Vec<_> = (0..cfg.population_size)
        .map(|_| random_genotype(&mut r))
        .collect();
    let mut order: Vec<usize> = (0..cfg.population_size).collect();
    order.shuffle(&mut r);
    let mut tasks = vec![0usize; cfg.population_size];
    for (k, &i) in order.iter().enumerate() {
        tasks[i] = active[k % active.len()];
    }
    let population = genotypes
        .into_iter()
        .zip(tasks)
        .map(|(g, t)| Individual::new(g, t))
        .collect();
    let states = active
        .iter()
        .map(|&t| TaskState::new(t, prefs[t], cfg.simulator, cfg.size_model, cfg.seed))
        .collect();
    Ok((population, states))
}

struct Engine<'a> {
    cfg: &'a RunConfig,
    active: Vec<usize>,
    states: Vec<TaskState>,
    population: Vec<Individual>,
    exec: Executor,
}

impl<'a> Engine<'a> {
    fn slot_of(&self, task: usize) -> usize {
        self.active
            .binary_search(&task)
            .expect("individual task is active")
    }

    fn group(&self, individuals: Vec<Individual>) -> Vec<Vec<Individual>> {
        let mut groups = vec![Vec::new(); self.active.len()];
        for ind in individuals {
            let s = self.slot_of(ind.task);
            groups[s].push(ind);
        }
        groups
    }

    /// Evaluates parents and offspring per task, then selects each task's
    /// quota from its combined pool.
    fn evaluate_and_select(
        &mut self,
        parents: Vec<Individual>,
        offspring: Vec<Individual>,
        generation: usize,
        quota: Option<usize>,
    ) -> Result<()> {
        let parent_groups = self.group(parents);
        let offspring_groups = self.group(offspring);
        let split: Vec<usize> = parent_groups.iter().map(Vec::len).collect();
        let combined: Vec<Vec<Individual>> = parent_groups
            .into_iter()
            .zip(offspring_groups)
            .map(|(mut p, o)| {
                p.extend(o);
                p
            })
            .collect();
        let evaluated = evaluate_generation(
            &mut self.states,
            combined,
            self.cfg.iterations(),
            generation as u64,
            &self.exec,
        )?;
        let mut next = Vec::with_capacity(self.cfg.population_size);
        for (slot, (mut pool, n_parents)) in evaluated.into_iter().zip(split).enumerate() {
            let task = self.active[slot];
            let wrap = |e: Error| Error::Task {
                task,
                source: Box::new(e),
            };
            normalize(&mut pool).map_err(wrap)?;
            let offspring = pool.split_off(n_parents);
            let keep = quota.unwrap_or(pool.len() + offspring.len());
            let survivors = environmental_selection(pool, offspring, keep, self.cfg.objective_set)
                .map_err(wrap)?;
            next.extend(survivors);
        }
        self.population = next;
        Ok(())
    }

    fn step(&mut self, generation: usize) -> Result<()> {
        let seed = self.cfg.seed;
        let variation = self.cfg.variation();
        let pairs = mate_selection(
            &self.population,
            &mut rng::stream(seed, Domain::Mating, &[generation as u64]),
        )?;
        let mut offspring = Vec::with_capacity(self.population.len());
        for (i, &(a, b)) in pairs.iter().enumerate() {
            let mut r = rng::stream(seed, Domain::Offspring, &[generation as u64, i as u64]);
            let (c1, c2, _) =
                reproduce(&self.population[a], &self.population[b], &variation, &mut r);
            offspring.push(c1);
            offspring.push(c2);
        }
        let parents = std::mem::take(&mut self.population);
        self.evaluate_and_select(parents, offspring, generation, Some(self.cfg.quota()))
    }

    fn snapshot(&self, generation: usize) -> Vec<FrontSnapshot> {
        self.active
            .iter()
            .map(|&task| {
                let members: Vec<&Individual> =
                    self.population.iter().filter(|i| i.task == task).collect();
                FrontSnapshot {
                    generation,
                    task,
                    points: members
                        .iter()
                        .map(|i| {
                            let o = i.objectives.expect("evaluated");
                            [o.error, o.params_norm]
                        })
                        .collect(),
                    params_raw: members
                        .iter()
                        .map(|i| i.objectives.expect("evaluated").params_raw)
                        .collect(),
                }
            })
            .collect()
    }

    fn checkpoint(&self, generation: usize) -> Checkpoint {
        Checkpoint {
            generation,
            population: self.population.clone(),
            task_states: self.states.clone(),
        }
    }
}

/// Runs the search, writing artefacts into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    run_with(cfg, Some(&cfg.out_dir), None)
}

/// Runs the search without touching the filesystem.
pub fn run_in_memory(cfg: &RunConfig) -> Result<RunOutcome> {
    run_with(cfg, None, None)
}

/// Full generation loop. With `resume`, continues from the checkpoint's
/// generation; logs for earlier generations are not regenerated.
pub fn run_with(
    cfg: &RunConfig,
    out: Option<&Path>,
    resume: Option<Checkpoint>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut engine = Engine {
        cfg,
        active: cfg.active(),
        states: Vec::new(),
        population: Vec::new(),
        exec: Executor::new(cfg.workers)?,
    };
    let mut logs = Vec::new();
    let mut snapshots = Vec::new();
    let wants_snapshot = |g: usize| cfg.snapshot_generations.contains(&g) || g == cfg.generations;

    let (start, initial_population) = match resume {
        Some(cp) => {
            if cp
                .task_states
                .iter()
                .map(|s| s.task)
                .ne(engine.active.iter().copied())
            {
                return Err(Error::Config {
                    field: "active_tasks",
                    reason: "checkpoint tasks differ from the config".into(),
                });
            }
            engine.states = cp.task_states;
            engine.population = cp.population;
            (cp.generation + 1, engine.population.clone())
        }
        None => {
            let (population, states) = initialize(cfg)?;
            engine.states = states;
            engine.evaluate_and_select(population, Vec::new(), 0, None)?;
            let log = output::generation_csv(0, &engine.population);
            write(out, "gen_0.csv", &log)?;
            logs.push(log);
            if wants_snapshot(0) {
                snapshots.extend(engine.snapshot(0));
            }
            write_checkpoint(out, &engine.checkpoint(0))?;
            (1, engine.population.clone())
        }
    };

    for generation in start..=cfg.generations {
        engine.step(generation)?;
        let log = output::generation_csv(generation, &engine.population);
        write(out, &format!("gen_{generation}.csv"), &log)?;
        logs.push(log);
        if wants_snapshot(generation) {
            snapshots.extend(engine.snapshot(generation));
        }
        write_checkpoint(out, &engine.checkpoint(generation))?;
    }

    let mut tasks = Vec::new();
    let mut records = Vec::new();
    for &task in &engine.active {
        let population: Vec<Individual> = engine
            .population
            .iter()
            .filter(|i| i.task == task)
            .cloned()
            .collect();
        let points: Vec<[f64; 2]> = population
            .iter()
            .map(|i| {
                let o = i.objectives.expect("evaluated");
                [o.error, o.params_raw as f64]
            })
            .collect();
        let front: Vec<Individual> = pareto_front_2d(&points)
            .into_iter()
            .map(|k| population[k].clone())
            .collect();
        let representatives = select_representatives(&population, cfg.representatives_per_task)?;
        let outcome = TaskOutcome {
            task,
            population,
            front,
            representatives,
        };
        write(
            out,
            &format!("front_task{task}.json"),
            &output::individuals_json(&outcome.front),
        )?;
        write(
            out,
            &format!("representatives_task{task}.json"),
            &output::individuals_json(&outcome.representatives),
        )?;
        let task_snaps: Vec<&FrontSnapshot> = snapshots.iter().filter(|s| s.task == task).collect();
        write(
            out,
            &format!("scatter_task{task}.svg"),
            &output::scatter_svg(
                &format!("{} task {task} ({})", cfg.label(), cfg.objective_set),
                &task_snaps,
            ),
        )?;
        records.push(FrontRecord {
            task,
            run: cfg.label().to_string(),
            seed: cfg.seed,
            points: outcome.front_points(),
        });
        tasks.push(outcome);
    }
    let hv = hv_report(&records)?;
    write(out, "hv.csv", &output::hv_csv(&hv))?;

    Ok(RunOutcome {
        tasks,
        hv,
        snapshots,
        logs,
        initial_population,
    })
}

fn write_checkpoint(out: Option<&Path>, cp: &Checkpoint) -> Result<()> {
    if out.is_none() {
        return Ok(());
    }
    let text = serde_json::to_string(cp).expect("checkpoint serialises");
    write(out, "checkpoint.json", &text)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Mean and sample standard deviation of one variant's HV on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvSummary {
    pub task: usize,
    pub variant: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub rows: Vec<HvRow>,
    pub summary: Vec<HvSummary>,
    pub outcomes: Vec<(String, u64, RunOutcome)>,
}

impl Comparison {
    pub fn mean_hv(&self, variant: &str, task: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.variant == variant && s.task == task)
            .map(|s| s.mean)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every variant over every seed and reports HV against a joint
/// per-task reference point. Variants must share task definitions.
pub fn compare(variants: &[RunConfig], seeds: &[u64], out: Option<&Path>) -> Result<Comparison> {
    if variants.len() < 2 {
        return Err(Error::Config {
            field: "configs",
            reason: "compare needs at least two variants".into(),
        });
    }
    if seeds.is_empty() {
        return Err(Error::Config {
            field: "seeds",
            reason: "at least one seed is required".into(),
        });
    }
    let signature = variants[0].task_signature();
    for v in &variants[1..] {
        if v.task_signature() != signature {
            return Err(Error::TaskMismatch(format!(
                "`{}` and `{}` define different tasks",
                variants[0].label(),
                v.label()
            )));
        }
    }
    let mut names: Vec<String> = Vec::new();
    for v in variants {
        let base = v.label().to_string();
        let mut name = base.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}#{k}");
            k += 1;
        }
        names.push(name);
    }

    let mut outcomes = Vec::new();
    let mut records = Vec::new();
    for (variant, name) in variants.iter().zip(&names) {
        for &seed in seeds {
            let mut cfg = variant.clone();
            cfg.seed = seed;
            cfg.name = Some(name.clone());
            let dir = out.map(|d| d.join(name).join(format!("seed_{seed}")));
            let outcome = run_with(&cfg, dir.as_deref(), None)?;
            for t in &outcome.tasks {
                records.push(FrontRecord {
                    task: t.task,
                    run: name.clone(),
                    seed,
                    points: t.front_points(),
                });
            }
            outcomes.push((name.clone(), seed, outcome));
        }
    }
    let rows = hv_report(&records)?;
    let mut grouped: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        let v = names
            .iter()
            .position(|n| *n == row.run)
            .expect("known variant");
        grouped.entry((row.task, v)).or_default().push(row.hv);
    }
    let summary: Vec<HvSummary> = grouped
        .into_iter()
        .map(|((task, v), values)| {
            let (mean, std) = mean_std(&values);
            HvSummary {
                task,
                variant: names[v].clone(),
                mean,
                std,
                runs: values.len(),
            }
        })
        .collect();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write(Some(dir), "hv.csv", &output::hv_csv(&rows))?;
        write(Some(dir), "hv_summary.csv", &output::summary_csv(&summary))?;
    }
    Ok(Comparison {
        rows,
        summary,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_tasks: usize) -> RunConfig {
        RunConfig {
            n_tasks,
            population_size: 8 * n_tasks,
            generations: 3,
            ..Default::default()
        }
    }

    #[test]
    fn initial_assignment_is_balanced() {
        let (pop, states) = initialize(&RunConfig::default()).unwrap();
        assert_eq!(pop.len(), 80);
        assert_eq!(pop.iter().filter(|i| i.task == 0).count(), 40);
        assert_eq!(states.len(), 2);
        let (pop1, _) = initialize(&RunConfig {
            n_tasks: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(pop1.iter().all(|i| i.task == 0));
        assert_eq!(initialize(&RunConfig::default()).unwrap().0, pop);
    }

    #[test]
    fn generations_zero_reports_initial_population() {
        let cfg = RunConfig {
            generations: 0,
            ..small(2)
        };
        let out = run_in_memory(&cfg).unwrap();
        assert_eq!(out.logs.len(), 1);
        assert_eq!(out.tasks.len(), 2);
        for t in &out.tasks {
            assert_eq!(t.population.len(), 8);
            assert!(t.population.iter().all(|i| i.rank.is_some()));
        }
    }

    #[test]
    fn per_task_sizes_hold_every_generation() {
        let out = run_in_memory(&small(3)).unwrap();
        assert_eq!(out.logs.len(), 4);
        for log in &out.logs {
            let mut counts = [0usize; 3];
            for line in log.lines().skip(1) {
                let task: usize = line.split(',').nth(1).unwrap().parse().unwrap();
                counts[task] += 1;
            }
            assert_eq!(counts, [8, 8, 8]);
        }
    }

    #[test]
    fn active_subset_runs_only_those_tasks() {
        let cfg = RunConfig {
            active_tasks: Some(vec![1]),
            population_size: 8,
            generations: 2,
            ..Default::default()
        };
        let out = run_in_memory(&cfg).unwrap();
        assert_eq!(out.tasks.len(), 1);
        assert_eq!(out.tasks[0].task, 1);
    }

    #[test]
    fn compare_rejects_mismatched_tasks() {
        let a = small(2);
        let mut b = small(2);
        b.tasks.similarity = Some(0.5);
        assert!(matches!(
            compare(&[a.clone(), b], &[1], None),
            Err(Error::TaskMismatch(_))
        ));
        assert!(compare(&[a], &[1], None).is_err());
    }

    #[test]
    fn compare_identical_variants_agree() {
        let mut a = small(2);
        a.name = Some("x".into());
        let cmp = compare(&[a.clone(), a], &[1, 2], None).unwrap();
        assert_eq!(cmp.summary.len(), 4);
        for task in 0..2 {
            assert_eq!(cmp.mean_hv("x", task), cmp.mean_hv("x#2", task));
        }
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
