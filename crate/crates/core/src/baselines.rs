//! Channel-clustering baselines (clustering step only).
//!
//! `rossi` splits the YUV V channel into two clusters and keeps the one with
//! the highest mean; `rudz` splits YCbCr Cb into four and keeps the lowest.
//! Neither includes the post-processing of the original methods.

use serde::{Deserialize, Serialize};

use crate::imaging::{rgb_to_ycbcr, rgb_to_yuv_v, BinaryMask, ImageRgb};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterChannel {
    YuvV,
    YcbcrCb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FireRule {
    HighestMean,
    LowestMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub channel: ClusterChannel,
    pub cluster_count: usize,
    pub fire_rule: FireRule,
}

impl ClusterSpec {
    pub const fn rossi() -> Self {
        Self {
            channel: ClusterChannel::YuvV,
            cluster_count: 2,
            fire_rule: FireRule::HighestMean,
        }
    }

    pub const fn rudz() -> Self {
        Self {
            channel: ClusterChannel::YcbcrCb,
            cluster_count: 4,
            fire_rule: FireRule::LowestMean,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Cluster id of each input value.
    pub assignment: Vec<usize>,
    /// Cluster means, ascending.
    pub means: Vec<f64>,
}

impl Clustering {
    pub fn within_cluster_ss(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.assignment)
            .map(|(v, &c)| (v - self.means[c]).powi(2))
            .sum()
    }
}

/// Scalar k-means: globally optimal contiguous segmentation of the sorted
/// distinct values, refined by Lloyd iterations until the assignment is a
/// fixpoint or [`MAX_ITERATIONS`] rounds have run.
pub fn kmeans_1d(values: &[f64], k: usize) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "cluster count must be positive".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("values must be finite".into()));
    }
    let (distinct, weights) = distinct_with_counts(values);
    if distinct.len() < k {
        return Err(Error::DegenerateInput(format!(
            "{} distinct values cannot form {k} clusters",
            distinct.len()
        )));
    }

    let mut means = optimal_segment_means(&distinct, &weights, k);
    let mut assignment = vec![usize::MAX; values.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (v, a) in values.iter().zip(assignment.iter_mut()) {
            let c = nearest(&means, *v);
            if c != *a {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![(0.0f64, 0usize); k];
        for (v, &a) in values.iter().zip(&assignment) {
            sums[a].0 += v;
            sums[a].1 += 1;
        }
        for (m, (s, c)) in means.iter_mut().zip(sums) {
            if c > 0 {
                *m = s / c as f64;
            }
        }
    }
    Ok(Clustering { assignment, means })
}

fn distinct_with_counts(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for v in sorted {
        if distinct.last() == Some(&v) {
            *weights.last_mut().unwrap() += 1.0;
        } else {
            distinct.push(v);
            weights.push(1.0);
        }
    }
    (distinct, weights)
}

/// Weighted sums over prefixes of the distinct values, shifted by their
/// mean to limit cancellation.
struct SegmentCost {
    w: Vec<f64>,
    wx: Vec<f64>,
    wxx: Vec<f64>,
}

impl SegmentCost {
    fn new(values: &[f64], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let shift = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let mut s = Self {
            w: vec![0.0],
            wx: vec![0.0],
            wxx: vec![0.0],
        };
        for (&v, &w) in values.iter().zip(weights) {
            let x = v - shift;
            s.w.push(s.w.last().unwrap() + w);
            s.wx.push(s.wx.last().unwrap() + w * x);
            s.wxx.push(s.wxx.last().unwrap() + w * x * x);
        }
        s
    }

    /// Sum of squared deviations of distinct values `i..=j` from their mean.
    fn cost(&self, i: usize, j: usize) -> f64 {
        let w = self.w[j + 1] - self.w[i];
        let wx = self.wx[j + 1] - self.wx[i];
        let wxx = self.wxx[j + 1] - self.wxx[i];
        (wxx - wx * wx / w).max(0.0)
    }

    fn mean(&self, i: usize, j: usize, values: &[f64], weights: &[f64]) -> f64 {
        let w = self.w[j + 1] - self.w[i];
        values[i..=j]
            .iter()
            .zip(&weights[i..=j])
            .map(|(v, ww)| v * ww)
            .sum::<f64>()
            / w
    }
}

/// Means of the minimum-SSE split of sorted distinct `values` into `k`
/// contiguous segments (dynamic programming with divide-and-conquer over the
/// monotone split points).
fn optimal_segment_means(values: &[f64], weights: &[f64], k: usize) -> Vec<f64> {
    let d = values.len();
    let cost = SegmentCost::new(values, weights);
    // start[c][j]: first index of the last segment when 0..=j forms c + 1 segments
    let mut start = vec![vec![0usize; d]; k];
    let mut prev: Vec<f64> = (0..d).map(|j| cost.cost(0, j)).collect();

    #[allow(clippy::too_many_arguments)]
    fn fill(
        cost: &SegmentCost,
        prev: &[f64],
        cur: &mut [f64],
        start: &mut [usize],
        lo: usize,
        hi: usize,
        opt_lo: usize,
        opt_hi: usize,
    ) {
        if lo > hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let mut best = (f64::INFINITY, opt_lo);
        for i in opt_lo..=opt_hi.min(mid) {
            let v = prev[i - 1] + cost.cost(i, mid);
            if v < best.0 {
                best = (v, i);
            }
        }
        cur[mid] = best.0;
        start[mid] = best.1;
        if mid > lo {
            fill(cost, prev, cur, start, lo, mid - 1, opt_lo, best.1);
        }
        fill(cost, prev, cur, start, mid + 1, hi, best.1, opt_hi);
    }

    for (c, start_c) in start.iter_mut().enumerate().skip(1) {
        let mut cur = vec![f64::INFINITY; d];
        fill(&cost, &prev, &mut cur, start_c, c, d - 1, c, d - 1);
        prev = cur;
    }

    let mut bounds = Vec::with_capacity(k);
    let mut end = d - 1;
    for c in (0..k).rev() {
        let s = if c == 0 { 0 } else { start[c][end] };
        bounds.push((s, end));
        end = s.saturating_sub(1);
    }
    bounds.reverse();
    bounds
        .into_iter()
        .map(|(i, j)| cost.mean(i, j, values, weights))
        .collect()
}

#[inline]
fn nearest(means: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (i, m) in means.iter().enumerate() {
        let d = (v - m).abs();
        if d < bd {
            bd = d;
            best = i;
        }
    }
    best
}

fn channel_values(img: &ImageRgb, channel: ClusterChannel) -> Vec<f64> {
    img.pixels()
        .iter()
        .map(|&p| match channel {
            ClusterChannel::YuvV => rgb_to_yuv_v(p),
            ClusterChannel::YcbcrCb => f64::from(rgb_to_ycbcr(p).cb),
        })
        .collect()
}

/// Marks the pixels of the cluster chosen by `spec.fire_rule`.
pub fn cluster_segment(img: &ImageRgb, spec: &ClusterSpec) -> Result<BinaryMask> {
    if spec.cluster_count < 2 {
        return Err(Error::InvalidParameter(format!(
            "cluster_count must be at least 2, got {}",
            spec.cluster_count
        )));
    }
    let values = channel_values(img, spec.channel);
    let clustering = kmeans_1d(&values, spec.cluster_count)?;
    let pick = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for (i, &m) in clustering.means.iter().enumerate() {
            if better(m, clustering.means[best]) {
                best = i;
            }
        }
        best
    };
    let fire = match spec.fire_rule {
        FireRule::HighestMean => pick(|a, b| a > b),
        FireRule::LowestMean => pick(|a, b| a < b),
    };
    let bits = clustering.assignment.iter().map(|&a| a == fire).collect();
    BinaryMask::new(img.width(), img.height(), bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Best two-way split of sorted values by exhaustive threshold scan.
    fn best_threshold_ss(values: &[f64]) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let ss = |part: &[f64]| {
            let m = part.iter().sum::<f64>() / part.len() as f64;
            part.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        (1..s.len())
            .map(|cut| ss(&s[..cut]) + ss(&s[cut..]))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn separated_clusters() {
        let c = kmeans_1d(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], 2).unwrap();
        assert_eq!(c.means, vec![0.0, 10.0]);
        assert_eq!(c.assignment, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn one_cluster_per_distinct_value() {
        let values = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 3.0];
        let c = kmeans_1d(&values, 3).unwrap();
        assert_eq!(c.means, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.assignment, vec![0, 0, 0, 0, 0, 1, 2, 2]);
    }

    #[test]
    fn too_few_distinct_values() {
        assert!(matches!(
            kmeans_1d(&[4.0; 10], 2),
            Err(Error::DegenerateInput(_))
        ));
        let img = ImageRgb::filled(8, 8, [200, 40, 10]).unwrap();
        assert!(matches!(
            cluster_segment(&img, &ClusterSpec::rudz()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rossi_marks_red_half() {
        let img =
            ImageRgb::from_fn(10, 6, |x, _| if x < 5 { [255, 0, 0] } else { [0, 0, 0] }).unwrap();
        let mask = cluster_segment(&img, &ClusterSpec::rossi()).unwrap();
        for y in 0..6 {
            for x in 0..10 {
                assert_eq!(mask.get(x, y), x < 5);
            }
        }
    }

    #[test]
    fn rudz_marks_lowest_cb() {
        // four distinct Cb levels; blue-free yellow has the lowest Cb
        let colors = [[255, 255, 0], [128, 128, 128], [0, 0, 255], [60, 60, 200]];
        let img = ImageRgb::from_fn(8, 4, |x, y| colors[(x / 2 + y) % 4]).unwrap();
        let mask = cluster_segment(&img, &ClusterSpec::rudz()).unwrap();
        let values = channel_values(&img, ClusterChannel::YcbcrCb);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        for (i, &bit) in mask.bits().iter().enumerate() {
            assert_eq!(bit, values[i] == min);
        }
        let c = kmeans_1d(&values, 4).unwrap();
        let size = c.assignment.iter().filter(|&&a| a == 0).count();
        assert_eq!(mask.popcount(), size);
    }

    #[test]
    fn rejects_single_cluster_spec() {
        let img = ImageRgb::filled(2, 2, [1, 2, 3]).unwrap();
        let spec = ClusterSpec {
            cluster_count: 1,
            ..ClusterSpec::rossi()
        };
        assert!(matches!(
            cluster_segment(&img, &spec),
            Err(Error::InvalidParameter(_))
        ));
    }

    proptest! {
        #[test]
        fn two_means_reach_best_threshold_split(values in proptest::collection::vec(-1000.0f64..1000.0, 2..64)) {
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assume!(distinct.len() >= 2);
            let c = kmeans_1d(&values, 2).unwrap();
            let n = values.len() as f64;
            prop_assert!(c.within_cluster_ss(&values) / n <= best_threshold_ss(&values) / n + 1e-9);
        }

        #[test]
        fn assignments_are_order_isotone(values in proptest::collection::vec(0u8..40, 4..64), k in 2usize..5) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assume!(distinct.len() >= k);
            let c = kmeans_1d(&values, k).unwrap();
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            for w in order.windows(2) {
                prop_assert!(c.assignment[w[0]] <= c.assignment[w[1]]);
            }
            let again = kmeans_1d(&values, k).unwrap();
            prop_assert_eq!(again, c);
        }
    }
}
