//! Hypervolume, reference points and representative extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::dominates_values;
use crate::variation::Individual;

/// (error, params_norm) points of one task at one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSnapshot {
    pub generation: usize,
    pub task: usize,
    pub points: Vec<[f64; 2]>,
    /// Raw sizes, aligned with `points`, for plots comparable across generations.
    pub params_raw: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint(pub Vec<f64>);

/// Coordinate-wise maximum over every solution in every set.
pub fn reference_point<P: AsRef<[f64]>>(solution_sets: &[&[P]]) -> Result<ReferencePoint> {
    let mut max: Option<Vec<f64>> = None;
    for p in solution_sets.iter().flat_map(|s| s.iter()) {
        let p = p.as_ref();
        match &mut max {
            None => max = Some(p.to_vec()),
            Some(m) => {
                for (a, b) in m.iter_mut().zip(p) {
                    *a = a.max(*b);
                }
            }
        }
    }
    max.map(ReferencePoint).ok_or(Error::EmptySolutionSet)
}

/// Exact 2-D hypervolume (minimisation) by sorting on the first objective
/// and sweeping. Points not strictly better than `reference` in both
/// coordinates contribute nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: &ReferencePoint) -> f64 {
    let (rx, ry) = (reference.0[0], reference.0[1]);
    let mut inside: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < rx && p[1] < ry)
        .collect();
    inside.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut volume = 0.0;
    let mut ceiling = ry;
    for [x, y] in inside {
        if y < ceiling {
            volume += (rx - x) * (ceiling - y);
            ceiling = y;
        }
    }
    volume
}

/// Non-dominated subset of 2-D points, in input order.
pub fn pareto_front_2d(points: &[[f64; 2]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates_values(q, &points[i])))
        .collect()
}

/// One run's final front for one task, as (error, params) points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub task: usize,
    pub run: String,
    pub seed: u64,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvRow {
    pub task: usize,
    pub run: String,
    pub seed: u64,
    #[serde(rename = "HV")]
    pub hv: f64,
}

fn scale(v: f64, r: f64) -> f64 {
    if r > 0.0 {
        v / r
    } else {
        1.0
    }
}

/// Per-task hypervolume of every record. The reference point of a task is
/// the coordinate-wise maximum over all records of that task; coordinates
/// are divided by it so each value lies in [0, 1].
pub fn hv_report(records: &[FrontRecord]) -> Result<Vec<HvRow>> {
    let mut tasks: Vec<usize> = records.iter().map(|r| r.task).collect();
    tasks.sort_unstable();
    tasks.dedup();
    let mut rows = Vec::with_capacity(records.len());
    for task in tasks {
        let sets: Vec<&[[f64; 2]]> = records
            .iter()
            .filter(|r| r.task == task)
            .map(|r| r.points.as_slice())
            .collect();
        let reference = reference_point(&sets)?;
        let unit = ReferencePoint(vec![1.0, 1.0]);
        for rec in records.iter().filter(|r| r.task == task) {
            if rec.points.is_empty() {
                return Err(Error::EmptySolutionSet);
            }
            let scaled: Vec<[f64; 2]> = rec
                .points
                .iter()
                .map(|p| [scale(p[0], reference.0[0]), scale(p[1], reference.0[1])])
                .collect();
            rows.push(HvRow {
                task,
                run: rec.run.clone(),
                seed: rec.seed,
                hv: hypervolume_2d(&scaled, &unit),
            });
        }
    }
    Ok(rows)
}

/// Index of the equal-width size interval holding `params` when
/// `[lo, hi]` is split into `groups` parts. Values outside the range fall
/// into the end intervals.
pub fn size_group(params: u64, lo: u64, hi: u64, groups: usize) -> usize {
    if hi <= lo || params <= lo {
        return 0;
    }
    let offset = (params.min(hi) - lo) as u128;
    let idx = offset * groups as u128 / (hi - lo) as u128;
    (idx as usize).min(groups - 1)
}

/// Splits the population's size range into `groups` equal-width intervals
/// and returns the minimum-error member of each non-empty interval,
/// smallest sizes first. Ties go to the smaller model, then input order.
pub fn select_representatives(population: &[Individual], groups: usize) -> Result<Vec<Individual>> {
    if population.is_empty() || groups == 0 {
        return Ok(Vec::new());
    }
    let objs = population
        .iter()
        .map(|i| i.objectives().copied())
        .collect::<Result<Vec<_>>>()?;
    let lo = objs.iter().map(|o| o.params_raw).min().expect("non-empty");
    let hi = objs.iter().map(|o| o.params_raw).max().expect("non-empty");
    let mut best: Vec<Option<usize>> = vec![None; groups];
    for (i, o) in objs.iter().enumerate() {
        let g = size_group(o.params_raw, lo, hi, groups);
        let better = match best[g] {
            None => true,
            Some(j) => {
                let b = &objs[j];
                o.error < b.error || (o.error == b.error && o.params_raw < b.params_raw)
            }
        };
        if better {
            best[g] = Some(i);
        }
    }
    Ok(best
        .into_iter()
        .flatten()
        .map(|i| population[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Genotype;
    use crate::selection::ObjectiveVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ReferencePoint {
        ReferencePoint(vec![1.0, 1.0])
    }

    #[test]
    fn reference_point_examples() {
        let a = [[0.1, 0.9], [0.5, 0.2]];
        assert_eq!(reference_point(&[&a[..]]).unwrap().0, vec![0.5, 0.9]);
        assert_eq!(reference_point(&[&a[..1]]).unwrap().0, vec![0.1, 0.9]);
        let b = [[0.7, 0.1]];
        let joint = reference_point(&[&a[..], &b[..]]).unwrap();
        let ra = reference_point(&[&a[..]]).unwrap();
        let rb = reference_point(&[&b[..]]).unwrap();
        assert_eq!(joint.0, vec![ra.0[0].max(rb.0[0]), ra.0[1].max(rb.0[1])]);
        let empty: [[f64; 2]; 0] = [];
        assert!(reference_point(&[&empty[..]]).is_err());
    }

    #[test]
    fn hypervolume_examples() {
        assert!((hypervolume_2d(&[[0.2, 0.2]], &unit()) - 0.64).abs() < 1e-12);
        let two = [[0.2, 0.6], [0.6, 0.2]];
        assert!((hypervolume_2d(&two, &unit()) - 0.48).abs() < 1e-12);
        let three = [[0.2, 0.6], [0.6, 0.2], [0.7, 0.7]];
        assert!((hypervolume_2d(&three, &unit()) - 0.48).abs() < 1e-12);
        assert_eq!(hypervolume_2d(&[], &unit()), 0.0);
        assert_eq!(hypervolume_2d(&[[1.0, 0.5], [0.5, 1.2]], &unit()), 0.0);
        assert_eq!(hypervolume_2d(&[[1.0, 1.0]], &unit()), 0.0);
        assert_eq!(hypervolume_2d(&[[0.0, 0.0]], &unit()), 1.0);
    }

    #[test]
    fn hypervolume_monotone_and_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut pts: Vec<[f64; 2]> = (0..12).map(|_| [rng.random(), rng.random()]).collect();
            let hv = hypervolume_2d(&pts, &unit());
            let extra = [rng.random(), rng.random()];
            pts.push(extra);
            assert!(hypervolume_2d(&pts, &unit()) >= hv - 1e-15);
            let full = hypervolume_2d(&pts, &unit());
            pts.reverse();
            pts.push(pts[0]);
            assert!((hypervolume_2d(&pts, &unit()) - full).abs() < 1e-12);
        }
    }

    #[test]
    fn pareto_front_filters_dominated() {
        let pts = [[0.2, 0.6], [0.6, 0.2], [0.7, 0.7], [0.2, 0.6]];
        assert_eq!(pareto_front_2d(&pts), vec![0, 1, 3]);
    }

    #[test]
    fn hv_report_uses_joint_reference() {
        let recs = vec![
            FrontRecord {
                task: 0,
                run: "a".into(),
                seed: 1,
                points: vec![[0.5, 100.0], [1.0, 0.0]],
            },
            FrontRecord {
                task: 0,
                run: "b".into(),
                seed: 1,
                points: vec![[0.0, 0.0]],
            },
            FrontRecord {
                task: 1,
                run: "a".into(),
                seed: 1,
                points: vec![[0.4, 50.0]],
            },
        ];
        let rows = hv_report(&recs).unwrap();
        assert_eq!(rows.len(), 3);
        // task 0 reference (1, 100): run a covers [0.5,1]x... nothing below y=1 except (1,0) on the x bound
        assert_eq!(rows[0].hv, 0.0);
        assert_eq!(rows[1].hv, 1.0);
        // a front equal to its own reference point
        assert_eq!(rows[2].hv, 0.0);
    }

    fn ind(error: f64, params: u64, tag: usize) -> Individual {
        let mut i = Individual::new(Genotype::from_raw([0; 40]), tag);
        i.objectives = Some(ObjectiveVector::raw(error, params, 0));
        i
    }

    #[test]
    fn representatives_one_per_interval() {
        let pop = vec![
            ind(0.5, 0, 0),
            ind(0.4, 30, 1),
            ind(0.3, 60, 2),
            ind(0.2, 100, 3),
        ];
        let reps = select_representatives(&pop, 4).unwrap();
        assert_eq!(
            reps.iter().map(|i| i.task).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );

        let same = vec![ind(0.5, 10, 0), ind(0.3, 10, 1), ind(0.3, 10, 2)];
        let reps = select_representatives(&same, 4).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].task, 1);

        let tie = vec![ind(0.3, 20, 0), ind(0.3, 10, 1), ind(0.9, 100, 2)];
        let reps = select_representatives(&tie, 4).unwrap();
        assert_eq!(reps[0].task, 1);
        assert!(select_representatives(&[], 4).unwrap().is_empty());
    }

    #[test]
    fn size_group_bounds() {
        assert_eq!(size_group(0, 0, 100, 4), 0);
        assert_eq!(size_group(24, 0, 100, 4), 0);
        assert_eq!(size_group(25, 0, 100, 4), 1);
        assert_eq!(size_group(75, 0, 100, 4), 3);
        assert_eq!(size_group(100, 0, 100, 4), 3);
        assert_eq!(size_group(500, 0, 100, 4), 3);
        assert_eq!(size_group(5, 10, 100, 4), 0);
        assert_eq!(size_group(7, 7, 7, 4), 0);
    }
}
