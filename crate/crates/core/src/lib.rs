//! Multi-objective evolutionary multi-tasking architecture search.
//!
//! Several tasks evolve in one mixed population. Parents from different
//! tasks exchange cell blocks with the random mating probability, each
//! task keeps its own (simulated) weight-sharing supernet, and every task
//! selects survivors by non-dominated sorting over validation error, model
//! size and an auxiliary objective that keeps large models alive.
//!
//! With the default `parallel` feature, per-task training and validation
//! runs on a rayon pool; without it everything runs on the calling thread.
//! Results are identical either way.

pub mod config;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod run;
pub mod selection;
pub mod variation;

pub use config::{RunConfig, TaskDefinition};
pub use encoding::{count_params, decode, encode, random_genotype, Genotype, Op, SizeModel};
pub use error::{Error, Result};
pub use evaluation::{evaluate_generation, Executor, SimulatorConfig, TaskEvaluator, TaskState};
pub use metrics::{
    hv_report, hypervolume_2d, reference_point, select_representatives, ReferencePoint,
};
pub use run::{compare, initialize, run, run_in_memory, run_with, Comparison, RunOutcome};
pub use selection::{
    crowding_distance, dominates, environmental_selection, f_aux, fast_nondominated_sort,
    normalize, ObjectiveSet, ObjectiveVector,
};
pub use variation::{
    bit_mutation, block_crossover, generate_offspring, mate_selection, Individual, VariationConfig,
};
