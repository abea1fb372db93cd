use std::fmt;

use serde::{Deserialize, Serialize};

use super::InfluenceScore;
use crate::analysis::QuadrantPartition;
use crate::criteria::AnchorScore;
use crate::error::{insufficient, invalid, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Drop non-HIHE points, least representative (highest anchor value) first.
    #[serde(rename = "M_HIHE")]
    MHihe,
    /// Drop the same number of HIHE points, lowest anchor value first.
    #[serde(rename = "M_OTHERS")]
    MOthers,
    #[serde(rename = "M_RANDOM")]
    MRandom,
    /// Drop the lowest TracIn influence scores first.
    #[serde(rename = "M_TRACIN")]
    MTracin,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Self::MHihe, Self::MOthers, Self::MRandom, Self::MTracin];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MHihe => "M_HIHE",
            Self::MOthers => "M_OTHERS",
            Self::MRandom => "M_RANDOM",
            Self::MTracin => "M_TRACIN",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalStep {
    /// 1-based.
    pub step: usize,
    pub removed: usize,
    /// Training positions kept, ascending.
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalSchedule {
    pub scenario: Scenario,
    pub steps: Vec<RemovalStep>,
    /// Set when the source group is smaller than the requested removal count.
    pub cap: Option<usize>,
}

/// Positions of training points in ascending anchor-value order; ties keep
/// index order.
pub fn rank_by_anchor_value(scores: &[AnchorScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].anchor_value.total_cmp(&scores[b].anchor_value));
    order
}

/// Removal count at step `t` of `steps` when `m` points go in total.
pub fn removal_count(t: usize, steps: usize, m: usize) -> usize {
    (t * m).div_ceil(steps)
}

fn schedule_from_priority(
    scenario: Scenario,
    n: usize,
    priority: &[usize],
    counts: &[usize],
    cap: Option<usize>,
) -> RemovalSchedule {
    let steps = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let c = c.min(priority.len());
            let mut removed = vec![false; n];
            for &p in &priority[..c] {
                removed[p] = true;
            }
            RemovalStep {
                step: i + 1,
                removed: c,
                retained: (0..n).filter(|&p| !removed[p]).collect(),
            }
        })
        .collect();
    RemovalSchedule {
        scenario,
        steps,
        cap,
    }
}

/// Builds the removal schedules of the representative-sample study.
///
/// With `m` = number of non-HIHE points, step `t` removes `⌈t·m/steps⌉`
/// points, so the last step of M_HIHE trains on exactly the HIHE group.
/// M_TRACIN is included only when influence scores are supplied.
pub fn build_schedules(
    partition: &QuadrantPartition,
    scores: &[AnchorScore],
    steps: usize,
    seed: u64,
    influence: Option<&[InfluenceScore]>,
) -> Result<Vec<RemovalSchedule>> {
    let n = scores.len();
    if n == 0 {
        return Err(insufficient("no training scores"));
    }
    if steps == 0 {
        return Err(invalid("removal steps must be at least 1"));
    }
    let total = partition.hihe.len() + partition.hile.len() + partition.lihe.len() + partition.lile.len();
    if total != n {
        return Err(invalid(format!("partition covers {total} points but there are {n} scores")));
    }
    if partition.hihe.is_empty() {
        return Err(insufficient("the HIHE group is empty, so M_HIHE would keep no training points"));
    }
    let others = partition.others();
    let m = others.len();
    if m > 0 && steps > m {
        return Err(invalid(format!(
            "{steps} removal steps exceed the {m} removable points"
        )));
    }
    let counts: Vec<usize> = (1..=steps).map(|t| removal_count(t, steps, m)).collect();
    let value = |p: usize| scores[p].anchor_value;

    let mut hihe_priority = others.clone();
    hihe_priority.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));

    let mut others_priority = partition.hihe.clone();
    others_priority.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
    let others_cap = (m > partition.hihe.len()).then_some(partition.hihe.len());

    let mut random_priority: Vec<usize> = (0..n).collect();
    SplitMix64::stream(seed, 0xD20B).shuffle(&mut random_priority);

    let mut schedules = vec![
        schedule_from_priority(Scenario::MHihe, n, &hihe_priority, &counts, None),
        schedule_from_priority(Scenario::MOthers, n, &others_priority, &counts, others_cap),
        schedule_from_priority(Scenario::MRandom, n, &random_priority, &counts, None),
    ];

    if let Some(influence) = influence {
        if influence.len() != n {
            return Err(invalid(format!(
                "{} influence scores for {n} training points",
                influence.len()
            )));
        }
        let mut by_position = vec![f64::NAN; n];
        for s in influence {
            if s.index >= n {
                return Err(invalid(format!("influence index {} out of range", s.index)));
            }
            by_position[s.index] = s.score;
        }
        if by_position.iter().any(|v| !v.is_finite()) {
            return Err(invalid("influence scores must cover every training point with finite values"));
        }
        let mut tracin_priority: Vec<usize> = (0..n).collect();
        tracin_priority.sort_by(|&a, &b| by_position[a].total_cmp(&by_position[b]).then(a.cmp(&b)));
        schedules.push(schedule_from_priority(Scenario::MTracin, n, &tracin_priority, &counts, None));
    }
    Ok(schedules)
}
