//! Exact k-means on the real line.
//!
//! On sorted 1-D data every optimal k-means clustering is a partition into
//! contiguous runs, so the optimum can be found exactly by dynamic
//! programming over split points. Rows of the DP are filled with the
//! divide-and-conquer optimization, which relies on the split points of
//! optimal solutions being monotone (the within-run squared error satisfies
//! the quadrangle inequality). Total work is `O(k n log n)` plus the cost
//! table.

use crate::error::{Error, Result};

/// Above this many points the dense segment-cost table is replaced by
/// prefix sums.
const DENSE_TABLE_LIMIT: usize = 2048;

/// A contiguous partition of sorted points.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index (0-based, nondecreasing) for every point.
    pub assignments: Vec<usize>,
    /// Number of clusters.
    pub k: usize,
    /// Total within-cluster sum of squared deviations.
    pub cost: f64,
}

impl Clustering {
    /// Index of the first point of every cluster.
    pub fn starts(&self) -> Vec<usize> {
        let mut starts = vec![0];
        for i in 1..self.assignments.len() {
            if self.assignments[i] != self.assignments[i - 1] {
                starts.push(i);
            }
        }
        starts
    }

    /// Boundary vector: the start of every cluster after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.starts()[1..].to_vec()
    }
}

/// Optimal contiguous partition of `points` (sorted ascending) into `k`
/// clusters. Among partitions of equal cost the one with the
/// lexicographically smallest boundary vector is returned.
pub fn kmeans1d_exact(points: &[f64], k: usize) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::BadClusterCount { points: n, k });
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("kmeans1d_exact needs finite points sorted ascending".into()));
    }
    let costs = SegmentCosts::new(points);
    Ok(solve(&costs, n, k))
}

fn solve(costs: &SegmentCosts, n: usize, k: usize) -> Clustering {
    // best[j] = optimal cost of splitting points[j..n] into m clusters,
    // for the current m. opt[m][j] is the leftmost optimal end of the
    // first of those clusters.
    let mut best: Vec<f64> = (0..n).map(|j| costs.cost(j, n)).collect();
    let mut opt: Vec<Vec<u32>> = vec![vec![n as u32; n]];
    for m in 2..=k {
        let mut next = vec![f64::INFINITY; n];
        let mut arg = vec![0u32; n];
        // rows j in [0, n - m] have at least m points left
        let row = Row { costs, prev: &best, n, m };
        row.fill(0, n - m, 1, n - m + 1, &mut next, &mut arg);
        best = next;
        opt.push(arg);
    }

    let mut assignments = vec![0; n];
    let mut start = 0;
    for cluster in 0..k {
        let end = opt[k - 1 - cluster][start] as usize;
        assignments[start..end].fill(cluster);
        start = end;
    }
    Clustering { assignments, k, cost: best[0] }
}

struct Row<'a> {
    costs: &'a SegmentCosts,
    prev: &'a [f64],
    n: usize,
    m: usize,
}

impl Row<'_> {
    /// Fills rows `lo..=hi` knowing their leftmost optima lie in
    /// `olo..=ohi`.
    fn fill(&self, lo: usize, hi: usize, olo: usize, ohi: usize, out: &mut [f64], arg: &mut [u32]) {
        if lo > hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let first = olo.max(mid + 1);
        let last = ohi.min(self.n - self.m + 1);
        let mut best = f64::INFINITY;
        let mut best_s = first;
        for s in first..=last {
            let v = self.costs.cost(mid, s) + self.prev[s];
            if v < best {
                best = v;
                best_s = s;
            }
        }
        out[mid] = best;
        arg[mid] = best_s as u32;
        if mid > lo {
            self.fill(lo, mid - 1, olo, best_s, out, arg);
        }
        self.fill(mid + 1, hi, best_s, ohi, out, arg);
    }
}

/// Within-run squared error for any run `[i, j)` of the sorted points.
enum SegmentCosts {
    /// Upper-triangular table filled by running-mean updates; exact zero
    /// for single points and constant runs.
    Dense { n: usize, table: Vec<f64> },
    /// Prefix sums of centered values, for large inputs.
    Prefix { points: Vec<f64>, s1: Vec<f64>, s2: Vec<f64> },
}

impl SegmentCosts {
    fn new(points: &[f64]) -> Self {
        if points.len() <= DENSE_TABLE_LIMIT {
            Self::dense(points)
        } else {
            Self::prefix(points)
        }
    }

    fn dense(points: &[f64]) -> Self {
        let n = points.len();
        let mut table = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (len, &x) in points[i..].iter().enumerate() {
                let count = (len + 1) as f64;
                let delta = x - mean;
                mean += delta / count;
                m2 += delta * (x - mean);
                table[Self::tri(n, i, i + len + 1)] = m2;
            }
        }
        SegmentCosts::Dense { n, table }
    }

    fn prefix(points: &[f64]) -> Self {
        let center = points.iter().sum::<f64>() / points.len() as f64;
        let mut s1 = Vec::with_capacity(points.len() + 1);
        let mut s2 = Vec::with_capacity(points.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &p in points {
            let d = p - center;
            a += d;
            b += d * d;
            s1.push(a);
            s2.push(b);
        }
        SegmentCosts::Prefix { points: points.to_vec(), s1, s2 }
    }

    // Row-major offset of (i, j), 0 <= i < j <= n, in the packed table.
    fn tri(n: usize, i: usize, j: usize) -> usize {
        i * n - i * i.saturating_sub(1) / 2 + (j - i - 1)
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        match self {
            SegmentCosts::Dense { n, table } => table[Self::tri(*n, i, j)],
            SegmentCosts::Prefix { points, s1, s2 } => {
                if points[i] == points[j - 1] {
                    return 0.0;
                }
                let len = (j - i) as f64;
                let a = s1[j] - s1[i];
                let b = s2[j] - s2[i];
                (b - a * a / len).max(0.0)
            }
        }
    }
}
