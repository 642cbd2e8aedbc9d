//! Objective assembly, Pareto dominance, fast non-dominated sorting, crowding
//! distance and per-task environmental selection.
//!
//! All objectives are minimised. The auxiliary objective combines normalised
//! size and error so that, at equal error, the larger model scores lower:
//!
//! ```text
//! f_aux = (1 - params_norm) * exp(-(1 - params_norm) * (1 - error_norm))
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variation::Individual;

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub error: f64,
    pub params_raw: u64,
    pub macs_raw: u64,
    pub params_norm: f64,
    pub error_norm: f64,
    pub macs_norm: f64,
    pub f_aux: f64,
}

impl ObjectiveVector {
    /// Raw measurements; the normalised fields are filled by [`normalize`].
    pub fn raw(error: f64, params_raw: u64, macs_raw: u64) -> ObjectiveVector {
        ObjectiveVector {
            error,
            params_raw,
            macs_raw,
            params_norm: 0.5,
            error_norm: 0.5,
            macs_norm: 0.5,
            f_aux: f_aux_unchecked(0.5, 0.5),
        }
    }

    /// Accuracy speed as the reciprocal of model size (size 0 counted as 1).
    pub fn accuracy_speed(&self) -> f64 {
        1.0 / (self.params_raw.max(1) as f64)
    }
}

/// Which objectives drive sorting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveSet {
    /// (error, params)
    Two,
    /// (error, params, f_aux)
    #[default]
    Three,
    /// (error, params, MACs)
    MacsThree,
    /// Two sortings per generation: (error, params) and (error, accuracy speed).
    CarsDual,
}

impl ObjectiveSet {
    pub const ALL: [ObjectiveSet; 4] = [
        ObjectiveSet::Two,
        ObjectiveSet::MacsThree,
        ObjectiveSet::CarsDual,
        ObjectiveSet::Three,
    ];

    /// Objective values used for dominance. For `CarsDual` this is the
    /// primary (error, params) sorting.
    pub fn values(self, ov: &ObjectiveVector) -> Vec<f64> {
        match self {
            ObjectiveSet::Two | ObjectiveSet::CarsDual => vec![ov.error, ov.params_norm],
            ObjectiveSet::Three => vec![ov.error, ov.params_norm, ov.f_aux],
            ObjectiveSet::MacsThree => vec![ov.error, ov.params_norm, ov.macs_norm],
        }
    }

    fn secondary_values(self, ov: &ObjectiveVector) -> Option<Vec<f64>> {
        match self {
            ObjectiveSet::CarsDual => Some(vec![ov.error, ov.accuracy_speed()]),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveSet::Two => "two",
            ObjectiveSet::Three => "three",
            ObjectiveSet::MacsThree => "macs-three",
            ObjectiveSet::CarsDual => "cars-dual",
        }
    }
}

impl fmt::Display for ObjectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ObjectiveSet::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown objective set {s:?}"))
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if !(-UNIT_TOLERANCE..=1.0 + UNIT_TOLERANCE).contains(&value) {
        return Err(Error::OutOfUnitRange { name, value });
    }
    Ok(value.clamp(0.0, 1.0))
}

fn f_aux_unchecked(params_norm: f64, error_norm: f64) -> f64 {
    let small = 1.0 - params_norm;
    small * (-small * (1.0 - error_norm)).exp()
}

pub fn f_aux(params_norm: f64, error_norm: f64) -> Result<f64> {
    let p = check_unit("params_norm", params_norm)?;
    let e = check_unit("error_norm", error_norm)?;
    Ok(f_aux_unchecked(p, e))
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Min-max normalises error, params and MACs over `subpop` (max == min maps
/// to 0.5) and recomputes `f_aux` for every member.
pub fn normalize(subpop: &mut [Individual]) -> Result<()> {
    let mut errors = Vec::with_capacity(subpop.len());
    let mut params = Vec::with_capacity(subpop.len());
    let mut macs = Vec::with_capacity(subpop.len());
    for ind in subpop.iter() {
        let ov = ind.objectives()?;
        errors.push(ov.error);
        params.push(ov.params_raw as f64);
        macs.push(ov.macs_raw as f64);
    }
    let errors = min_max_normalize(&errors);
    let params = min_max_normalize(&params);
    let macs = min_max_normalize(&macs);
    for (i, ind) in subpop.iter_mut().enumerate() {
        let ov = ind.objectives.as_mut().expect("checked above");
        ov.error_norm = errors[i];
        ov.params_norm = params[i];
        ov.macs_norm = macs[i];
        ov.f_aux = f_aux_unchecked(params[i], errors[i]);
    }
    Ok(())
}

/// Pareto dominance for minimisation.
pub fn dominates_values(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector, set: ObjectiveSet) -> bool {
    dominates_values(&set.values(a), &set.values(b))
}

/// Deb's fast non-dominated sort. Returns fronts of point indices, best
/// first, each front in ascending index order.
pub fn fast_nondominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates_values(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_values(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Rank of every point given the fronts from [`fast_nondominated_sort`].
pub fn ranks_from_fronts(fronts: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut ranks = vec![usize::MAX; n];
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            ranks[i] = r;
        }
    }
    ranks
}

/// Crowding distance of every member of one front.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let m = front[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).partial_cmp(&value(b)).unwrap_or(Ordering::Equal));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = value(order[n - 1]) - value(order[0]);
        if range <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    dist
}

/// Rank and crowding of every point, computed front by front.
pub fn rank_and_crowd<P: AsRef<[f64]>>(points: &[P]) -> (Vec<usize>, Vec<f64>) {
    let fronts = fast_nondominated_sort(points);
    let ranks = ranks_from_fronts(&fronts, points.len());
    let mut crowding = vec![0.0; points.len()];
    for front in &fronts {
        let members: Vec<&[f64]> = front.iter().map(|&i| points[i].as_ref()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            crowding[i] = d;
        }
    }
    (ranks, crowding)
}

/// Picks `quota` indices out of `candidates` by rank, then by descending
/// crowding distance on the overflowing front, ties by candidate order.
fn nsga2_pick(points: &[Vec<f64>], candidates: &[usize], quota: usize) -> Vec<usize> {
    let sub: Vec<&[f64]> = candidates.iter().map(|&i| points[i].as_slice()).collect();
    let fronts = fast_nondominated_sort(&sub);
    let mut picked = Vec::with_capacity(quota);
    for front in fronts {
        if picked.len() + front.len() <= quota {
            picked.extend(front.iter().map(|&i| candidates[i]));
            if picked.len() == quota {
                break;
            }
            continue;
        }
        let members: Vec<&[f64]> = front.iter().map(|&i| sub[i]).collect();
        let dist = crowding_distance(&members);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            dist[b]
                .partial_cmp(&dist[a])
                .unwrap_or(Ordering::Equal)
                .then(front[a].cmp(&front[b]))
        });
        let room = quota - picked.len();
        picked.extend(order[..room].iter().map(|&w| candidates[front[w]]));
        break;
    }
    picked
}

/// Selects `quota` survivors from one task's parents and offspring.
///
/// Objectives must already be normalised over the combined pool. Survivors
/// are returned in combined (parents first) order with rank and crowding
/// from the primary sorting attached.
pub fn environmental_selection(
    parents: Vec<Individual>,
    offspring: Vec<Individual>,
    quota: usize,
    set: ObjectiveSet,
) -> Result<Vec<Individual>> {
    let mut combined = parents;
    combined.extend(offspring);
    if quota > combined.len() {
        return Err(Error::QuotaTooLarge {
            quota,
            available: combined.len(),
        });
    }
    let vectors = combined
        .iter()
        .map(|ind| ind.objectives().copied())
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = vectors.iter().map(|ov| set.values(ov)).collect();
    let (ranks, crowding) = rank_and_crowd(&points);

    let all: Vec<usize> = (0..combined.len()).collect();
    let mut keep = match vectors.first().and_then(|ov| set.secondary_values(ov)) {
        None => nsga2_pick(&points, &all, quota),
        Some(_) => {
            let primary_quota = quota.div_ceil(2);
            let mut keep = nsga2_pick(&points, &all, primary_quota);
            let mut taken = vec![false; combined.len()];
            for &i in &keep {
                taken[i] = true;
            }
            let rest: Vec<usize> = all.iter().copied().filter(|&i| !taken[i]).collect();
            let secondary: Vec<Vec<f64>> = vectors
                .iter()
                .map(|ov| set.secondary_values(ov).expect("dual set"))
                .collect();
            keep.extend(nsga2_pick(&secondary, &rest, quota - primary_quota));
            keep
        }
    };
    keep.sort_unstable();

    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    Ok(keep
        .into_iter()
        .map(|i| {
            let mut ind = slots[i].take().expect("index picked once");
            ind.rank = Some(ranks[i]);
            ind.crowding = Some(crowding[i]);
            ind
        })
        .collect())
}
