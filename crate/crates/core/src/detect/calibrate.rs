use serde::{Deserialize, Serialize};

use crate::alignment::OVERLAP_TOLERANCE_S;
use super::{Direction, RunMerge, ScoreTrack, ScoredItem};

/// Relative tolerance on the achieved region rate.
const RATE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub achieved_per_hour: f64,
    pub target_per_hour: f64,
    /// False when no threshold reaches the target within 5%; `threshold` is
    /// then the closest one found.
    pub within_tolerance: bool,
}

/// Finds the threshold whose mean region rate over `reference` (the caller's
/// known-problem recordings) is closest to `target_per_hour`.
///
/// The region count moves only when the threshold crosses a score, so the
/// candidates are the midpoints between consecutive distinct scores. When
/// several candidates land within 5% of the target, the middle of the widest
/// such stretch wins. A zero target returns the never-firing sentinel
/// (`-inf` or `+inf`).
pub fn calibrate_threshold(reference: &[ScoreTrack], target_per_hour: f64) -> Calibration {
    assert!(target_per_hour >= 0.0, "target rate must be non-negative");
    let direction = reference.first().map_or(Direction::Below, |t| t.direction);
    assert!(reference.iter().all(|t| t.direction == direction), "mixed threshold directions");

    let hours: f64 = reference.iter().map(|t| t.duration_s).sum::<f64>() / 3600.0;
    let rate = |th: f64| {
        if hours <= 0.0 {
            return 0.0;
        }
        reference.iter().map(|t| t.count(th)).sum::<usize>() as f64 / hours
    };
    let result = |threshold: f64, achieved: f64| Calibration {
        threshold,
        achieved_per_hour: achieved,
        target_per_hour,
        within_tolerance: (achieved - target_per_hour).abs() <= RATE_TOLERANCE * target_per_hour,
    };
    if target_per_hour == 0.0 {
        return result(direction.never(), 0.0);
    }

    let mut scores: Vec<f64> = reference
        .iter()
        .flat_map(|t| t.items.iter().filter_map(|it| it.score))
        .filter(|s| s.is_finite())
        .collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    if scores.is_empty() {
        return result(direction.never(), 0.0);
    }

    // edge(j) is the j-th most extreme distinct score, padded by one unit at
    // both ends; thresholds strictly between edge(k) and edge(k + 1) flag
    // exactly the k most extreme scores
    let n = scores.len();
    let edge = |j: usize| -> f64 {
        match direction {
            Direction::Below => match j {
                0 => scores[0] - 1.0,
                j if j > n => scores[n - 1] + 1.0,
                j => scores[j - 1],
            },
            Direction::Above => match j {
                0 => scores[n - 1] + 1.0,
                j if j > n => scores[0] - 1.0,
                j => scores[n - j],
            },
        }
    };

    let counts = region_counts(reference, &scores);
    let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / hours).collect();
    let ok = |r: f64| (r - target_per_hour).abs() <= RATE_TOLERANCE * target_per_hour;

    // Prefer the middle of the widest stretch of acceptable thresholds, so
    // that small perturbations of the scores leave the count where it is.
    let mut widest: Option<(f64, f64)> = None;
    let mut k = 0;
    while k <= n {
        if ok(rates[k]) {
            let first = k;
            while k < n && ok(rates[k + 1]) {
                k += 1;
            }
            let (lo, hi) = (edge(first), edge(k + 1));
            if widest.map_or(true, |(a, b)| (hi - lo).abs() > (b - a).abs()) {
                widest = Some((lo, hi));
            }
        }
        k += 1;
    }
    let threshold = match widest {
        Some((lo, hi)) => 0.5 * (lo + hi),
        None => {
            let k = (0..=n)
                .min_by(|&a, &b| (rates[a] - target_per_hour).abs().total_cmp(&(rates[b] - target_per_hour).abs()))
                .unwrap_or(0);
            0.5 * (edge(k) + edge(k + 1))
        }
    };
    result(threshold, rate(threshold))
}

/// Region count over all tracks at every candidate threshold, in one sweep.
///
/// `counts[k]` is the count when the `k` most extreme distinct scores are
/// flagged. Flagging an item adds a region, or extends one, or bridges two,
/// depending on whether its linked neighbours are already flagged.
fn region_counts(reference: &[ScoreTrack], sorted_scores: &[f64]) -> Vec<usize> {
    let n = sorted_scores.len();
    // rank 0 is flagged at every candidate, n + 1 at none
    let rank_of = |direction: Direction, s: f64| -> usize {
        if !s.is_finite() {
            return if direction.flags(s, 0.0) { 0 } else { n + 1 };
        }
        let i = sorted_scores.partition_point(|&x| x < s);
        match direction {
            Direction::Below => i + 1,
            Direction::Above => n - i,
        }
    };

    let mut events: Vec<(usize, usize, usize)> = Vec::new();
    let mut links: Vec<Vec<bool>> = Vec::with_capacity(reference.len());
    for (t, track) in reference.iter().enumerate() {
        let scored: Vec<(&ScoredItem, f64)> = track.items.iter().filter_map(|it| it.score.map(|s| (it, s))).collect();
        links.push(
            scored
                .windows(2)
                .map(|w| match track.merge {
                    RunMerge::Consecutive => true,
                    RunMerge::Touching => w[1].0.start_s <= w[0].0.end_s + OVERLAP_TOLERANCE_S,
                })
                .collect(),
        );
        for (pos, (_, s)) in scored.iter().enumerate() {
            let rank = rank_of(track.direction, *s);
            if rank <= n {
                events.push((rank, t, pos));
            }
        }
    }
    events.sort_unstable();

    let mut flagged: Vec<Vec<bool>> = links.iter().map(|l| vec![false; l.len() + 1]).collect();
    let mut counts = Vec::with_capacity(n + 1);
    let mut total: isize = 0;
    let mut e = 0;
    for k in 0..=n {
        while e < events.len() && events[e].0 <= k {
            let (_, t, pos) = events[e];
            let (f, l) = (&mut flagged[t], &links[t]);
            let left = pos > 0 && f[pos - 1] && l[pos - 1];
            let right = pos + 1 < f.len() && f[pos + 1] && l[pos];
            total += 1 - left as isize - right as isize;
            f[pos] = true;
            e += 1;
        }
        counts.push(total.max(0) as usize);
    }
    counts
}
