use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emt_nas::metrics::{hypervolume_2d, ReferencePoint};
use emt_nas::selection::{
    crowding_distance, environmental_selection, fast_nondominated_sort, normalize,
};
use emt_nas::{random_genotype, Individual, ObjectiveSet, ObjectiveVector};

fn points(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..m).map(|_| r.random()).collect())
        .collect()
}

fn bench_sort(c: &mut Criterion) {
    let mut g = c.benchmark_group("fast_nondominated_sort");
    for n in [80usize, 160, 640] {
        for m in [2usize, 3] {
            let pts = points(n, m, n as u64);
            g.bench_with_input(BenchmarkId::new(format!("{m}obj"), n), &pts, |b, pts| {
                b.iter(|| fast_nondominated_sort(black_box(pts)))
            });
        }
    }
    g.finish();
}

fn bench_crowding(c: &mut Criterion) {
    let pts = points(160, 3, 1);
    c.bench_function("crowding_distance_160x3", |b| {
        b.iter(|| crowding_distance(black_box(&pts)))
    });
}

fn bench_environmental(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut pool: Vec<Individual> = (0..160)
        .map(|_| {
            let mut i = Individual::new(random_genotype(&mut r), 0);
            i.objectives = Some(ObjectiveVector::raw(
                r.random(),
                r.random_range(0..70_000),
                0,
            ));
            i
        })
        .collect();
    normalize(&mut pool).unwrap();
    let mut g = c.benchmark_group("environmental_selection_160_to_80");
    for set in [
        ObjectiveSet::Two,
        ObjectiveSet::Three,
        ObjectiveSet::CarsDual,
    ] {
        g.bench_function(set.name(), |b| {
            b.iter(|| {
                environmental_selection(pool[..80].to_vec(), pool[80..].to_vec(), 80, set).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_hypervolume(c: &mut Criterion) {
    let unit = ReferencePoint(vec![1.0, 1.0]);
    let mut g = c.benchmark_group("hypervolume_2d");
    for n in [40usize, 400, 4000] {
        let pts: Vec<[f64; 2]> = points(n, 2, 7).into_iter().map(|p| [p[0], p[1]]).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| hypervolume_2d(black_box(pts), &unit))
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_sort,
    bench_crowding,
    bench_environmental,
    bench_hypervolume
);
criterion_main!(benches);
