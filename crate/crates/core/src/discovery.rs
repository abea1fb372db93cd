//! Discovery phase: pick `k` characteristic anchors from a group.
//!
//! Both greedy selectors are 2-approximations. Ties always go to the lowest
//! index so results are reproducible. The brute-force variants enumerate all
//! `C(n, k)` subsets and exist to check the greedy guarantees.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::model::GenerativeModel;
use crate::numerics::{pairwise_distances, Matrix};

pub const BRUTE_FORCE_MAX_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    KDispersion,
    KCenter,
    BruteDispersion,
    BruteCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSpace {
    Pixel,
    LatentMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    /// Minimum pairwise distance (dispersion) or covering radius (center).
    pub objective: f64,
    pub method: SelectionMethod,
}

fn check_instance(d: &Matrix, k: usize) -> Result<usize> {
    let (r, c) = d.dim();
    if r != c || r == 0 {
        return Err(invalid(format!("distance matrix is {r}x{c}, expected non-empty square")));
    }
    if k == 0 || k > r {
        return Err(invalid(format!("k = {k} outside 1..={r}")));
    }
    for i in 0..r {
        if d[[i, i]] != 0.0 {
            return Err(invalid(format!("distance matrix diagonal at {i} is non-zero")));
        }
        for j in (i + 1)..r {
            if !(d[[i, j]] >= 0.0) || (d[[i, j]] - d[[j, i]]).abs() > 1e-10 {
                return Err(invalid(format!(
                    "distance matrix is not symmetric and non-negative at ({i},{j})"
                )));
            }
        }
    }
    Ok(r)
}

/// Minimum pairwise distance within `chosen`; 0 when fewer than two points.
pub fn dispersion_objective(d: &Matrix, chosen: &[usize]) -> f64 {
    chosen
        .iter()
        .tuple_combinations()
        .map(|(&a, &b)| d[[a, b]])
        .reduce(f64::min)
        .unwrap_or(0.0)
}

/// Largest distance from any point to its nearest chosen point.
pub fn covering_radius(d: &Matrix, chosen: &[usize]) -> f64 {
    (0..d.nrows())
        .map(|p| {
            chosen
                .iter()
                .map(|&c| d[[p, c]])
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Greedy max-min dispersion: start from the farthest pair, then repeatedly
/// add the point whose nearest chosen point is farthest away.
pub fn k_dispersion_greedy(d: &Matrix, k: usize) -> Result<SelectionResult> {
    let n = check_instance(d, k)?;
    let mut chosen = Vec::with_capacity(k);
    if n == 1 {
        chosen.push(0);
    } else {
        let (mut bi, mut bj, mut best) = (0, 1, f64::NEG_INFINITY);
        for i in 0..n {
            for j in (i + 1)..n {
                if d[[i, j]] > best {
                    (bi, bj, best) = (i, j, d[[i, j]]);
                }
            }
        }
        chosen.push(bi);
        if k >= 2 {
            chosen.push(bj);
        }
    }
    let mut nearest: Vec<f64> = (0..n)
        .map(|p| chosen.iter().map(|&c| d[[p, c]]).fold(f64::INFINITY, f64::min))
        .collect();
    farthest_first(d, k, &mut chosen, &mut nearest);
    Ok(SelectionResult {
        objective: dispersion_objective(d, &chosen),
        chosen,
        method: SelectionMethod::KDispersion,
    })
}

/// Extends `chosen` to `k` points, each time taking the unchosen point with
/// the largest distance to its nearest chosen point.
fn farthest_first(d: &Matrix, k: usize, chosen: &mut Vec<usize>, nearest: &mut [f64]) {
    let n = d.nrows();
    while chosen.len() < k {
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for p in 0..n {
            if chosen.contains(&p) {
                continue;
            }
            if nearest[p] > best {
                best = nearest[p];
                pick = Some(p);
            }
        }
        let p = pick.expect("k <= n leaves an unchosen point");
        chosen.push(p);
        for q in 0..n {
            nearest[q] = nearest[q].min(d[[q, p]]);
        }
    }
}

/// Greedy k-center: the exact 1-center first, then farthest-first traversal.
pub fn k_center_greedy(d: &Matrix, k: usize) -> Result<SelectionResult> {
    let n = check_instance(d, k)?;
    let eccentricity = |i: usize| (0..n).map(|j| d[[i, j]]).fold(0.0, f64::max);
    let mut first = 0;
    let mut best = eccentricity(0);
    for i in 1..n {
        let e = eccentricity(i);
        if e < best {
            (first, best) = (i, e);
        }
    }
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|p| d[[p, first]]).collect();
    farthest_first(d, k, &mut chosen, &mut nearest);
    Ok(SelectionResult {
        objective: covering_radius(d, &chosen),
        chosen,
        method: SelectionMethod::KCenter,
    })
}

fn brute_force(
    d: &Matrix,
    k: usize,
    objective: impl Fn(&Matrix, &[usize]) -> f64,
    better: impl Fn(f64, f64) -> bool,
    method: SelectionMethod,
) -> Result<SelectionResult> {
    let n = check_instance(d, k)?;
    if n > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::ResourceLimit(format!(
            "exhaustive search over {n} points exceeds the limit of {BRUTE_FORCE_MAX_POINTS}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    // Combinations arrive in lexicographic order, so keeping only strict
    // improvements yields the lexicographically smallest optimum.
    for subset in (0..n).combinations(k) {
        let value = objective(d, &subset);
        if best.as_ref().is_none_or(|(_, b)| better(value, *b)) {
            best = Some((subset, value));
        }
    }
    let (chosen, objective) = best.expect("at least one subset");
    Ok(SelectionResult {
        chosen,
        objective,
        method,
    })
}

pub fn brute_force_dispersion(d: &Matrix, k: usize) -> Result<SelectionResult> {
    brute_force(d, k, dispersion_objective, |a, b| a > b, SelectionMethod::BruteDispersion)
}

pub fn brute_force_center(d: &Matrix, k: usize) -> Result<SelectionResult> {
    brute_force(d, k, covering_radius, |a, b| a < b, SelectionMethod::BruteCenter)
}

pub fn select(d: &Matrix, k: usize, method: SelectionMethod) -> Result<SelectionResult> {
    match method {
        SelectionMethod::KDispersion => k_dispersion_greedy(d, k),
        SelectionMethod::KCenter => k_center_greedy(d, k),
        SelectionMethod::BruteDispersion => brute_force_dispersion(d, k),
        SelectionMethod::BruteCenter => brute_force_center(d, k),
    }
}

/// Distances between the members of `group`, in pixel space or between
/// encoder means.
pub fn group_distances<M: GenerativeModel + ?Sized>(
    model: &M,
    anchors: &[Image],
    group: &[usize],
    space: DistanceSpace,
) -> Result<Matrix> {
    if let Some(&bad) = group.iter().find(|&&i| i >= anchors.len()) {
        return Err(invalid(format!("group index {bad} out of range for {} anchors", anchors.len())));
    }
    let members: Vec<Image> = group.iter().map(|&i| anchors[i].clone()).collect();
    match space {
        DistanceSpace::Pixel => pairwise_distances(&members),
        DistanceSpace::LatentMean => {
            let means: Vec<Vec<f64>> = model
                .encode_batch(&members)?
                .into_iter()
                .map(|g| g.mean)
                .collect();
            pairwise_distances(&means)
        }
    }
}

/// Runs `method` over the members of `group`. Returned indices refer to
/// positions in `anchors`.
pub fn select_from_group<M: GenerativeModel + ?Sized>(
    model: &M,
    anchors: &[Image],
    group: &[usize],
    k: usize,
    method: SelectionMethod,
    space: DistanceSpace,
) -> Result<SelectionResult> {
    if group.is_empty() {
        return Err(invalid("selection group is empty"));
    }
    if k == 0 || k > group.len() {
        return Err(invalid(format!("k = {k} outside 1..={}", group.len())));
    }
    let d = group_distances(model, anchors, group, space)?;
    let mut result = select(&d, k, method)?;
    for c in &mut result.chosen {
        *c = group[*c];
    }
    Ok(result)
}
