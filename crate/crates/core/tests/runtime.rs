use std::time::Instant;

use emt_nas::{run_in_memory, RunConfig};

#[test]
fn default_two_task_run_is_fast() {
    let start = Instant::now();
    let out = run_in_memory(&RunConfig::default()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.logs.len(), 101);
    assert_eq!(out.tasks.len(), 2);
    for t in &out.tasks {
        assert_eq!(t.population.len(), 40);
        assert!(!t.representatives.is_empty());
    }
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
}
