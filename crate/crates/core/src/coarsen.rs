//! Deterministic coarsening operators: grid&count and cluster&count.
//!
//! Both keep `ceil(p * T)` events of a length-`T` sequence. Grid&count
//! assigns every event to the nearest point of a regular grid over the
//! observation window; cluster&count groups timestamps with exact 1-D
//! k-means. Either way each group collapses through [`merge_events`] and
//! carries the number of original events it absorbed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::kmeans1d_exact;
use crate::sequence::{merge_events, merge_runs, sort_by_time, Event, EventSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarsenMode {
    Grid,
    Cluster,
}

impl fmt::Display for CoarsenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoarsenMode::Grid => "grid",
            CoarsenMode::Cluster => "cluster",
        })
    }
}

impl FromStr for CoarsenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(CoarsenMode::Grid),
            "cluster" => Ok(CoarsenMode::Cluster),
            other => Err(Error::Config(format!("unknown coarsening mode {other:?}"))),
        }
    }
}

/// Which operator to apply and how much of the sequence to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseningSpec {
    pub mode: CoarsenMode,
    /// Retention factor in (0, 1].
    pub p: f64,
    /// Grid window `[t_L, t_R]`; defaults to the span of the sequence.
    pub interval: Option<(f64, f64)>,
    /// Grid mode only: report occupied cells at their grid timestamp
    /// instead of their members' mean time.
    #[serde(default)]
    pub snap_to_grid: bool,
}

impl CoarseningSpec {
    pub fn cluster(p: f64) -> Self {
        CoarseningSpec { mode: CoarsenMode::Cluster, p, interval: None, snap_to_grid: false }
    }

    pub fn grid(p: f64, interval: Option<(f64, f64)>) -> Self {
        CoarseningSpec { mode: CoarsenMode::Grid, p, interval, snap_to_grid: false }
    }

    pub fn validate(&self) -> Result<()> {
        check_retention(self.p)?;
        if let Some((lo, hi)) = self.interval {
            check_interval(lo, hi)?;
        }
        Ok(())
    }
}

/// `ceil(p * n)`, ignoring floating-point noise just above an integer
/// (so 0.7 * 10 gives 7, not 8).
pub fn ceil_count(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

fn check_retention(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::RetentionOutOfRange(p))
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::BadInterval(lo, hi))
    }
}

/// Applies the operator selected by `spec`.
pub fn coarsen(seq: &EventSequence, spec: &CoarseningSpec) -> Result<EventSequence> {
    spec.validate()?;
    match spec.mode {
        CoarsenMode::Cluster => cluster_and_count(seq, spec.p),
        CoarsenMode::Grid => {
            let interval = spec.interval.unwrap_or_else(|| span(seq));
            grid_impl(seq, spec.p, interval, spec.snap_to_grid)
        }
    }
}

fn span(seq: &EventSequence) -> (f64, f64) {
    let first = seq.events.first().map_or(0.0, |e| e.t);
    let last = seq.events.last().map_or(0.0, |e| e.t);
    (first, last)
}

/// Clusters the timestamps into `ceil(p * T)` contiguous groups with exact
/// 1-D k-means and merges each group.
pub fn cluster_and_count(seq: &EventSequence, p: f64) -> Result<EventSequence> {
    check_retention(p)?;
    seq.check_coarsened()?;
    let k = ceil_count(p, seq.len()).clamp(1, seq.len());
    if k == seq.len() && seq.events.windows(2).all(|w| w[0].t < w[1].t) {
        return Ok(seq.clone());
    }
    let times: Vec<f64> = seq.times().collect();
    let clustering = kmeans1d_exact(&times, k)?;
    Ok(seq.with_events(merge_runs(&seq.events, &clustering.starts())))
}

/// Assigns events to the nearest of `ceil(p * T)` evenly spaced grid points
/// on `interval` (ties go to the earlier point) and merges each cell. Empty
/// cells stay in the output at their grid time with count 0.
pub fn grid_and_count(seq: &EventSequence, p: f64, interval: (f64, f64)) -> Result<EventSequence> {
    check_interval(interval.0, interval.1)?;
    grid_impl(seq, p, interval, false)
}

fn grid_impl(seq: &EventSequence, p: f64, (lo, hi): (f64, f64), snap: bool) -> Result<EventSequence> {
    check_retention(p)?;
    seq.check_coarsened()?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::BadInterval(lo, hi));
    }
    let cells = ceil_count(p, seq.len());
    if cells < 2 {
        return Err(Error::GridInapplicable { cells });
    }
    if let Some(e) = seq.events.iter().find(|e| e.t < lo || e.t > hi) {
        return Err(Error::OutsideInterval { t: e.t, lo, hi });
    }
    let grid = grid_points(lo, hi, cells);
    let mut members: Vec<Vec<Event>> = vec![Vec::new(); cells];
    for e in &seq.events {
        members[nearest_point(&grid, e.t)].push(e.clone());
    }
    let r = seq.dim();
    let mut out: Vec<Event> = members
        .iter()
        .zip(&grid)
        .map(|(cell, &g)| {
            if cell.is_empty() {
                Event::empty(g, r)
            } else {
                let mut merged = merge_events(cell);
                if snap {
                    merged.t = g;
                }
                merged
            }
        })
        .collect();
    sort_by_time(&mut out);
    Ok(seq.with_events(out))
}

fn grid_points(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let step = (hi - lo) / (cells - 1) as f64;
    (0..cells).map(|i| if i == cells - 1 { hi } else { lo + i as f64 * step }).collect()
}

/// Index of the grid point closest to `t`; the lower index wins ties.
fn nearest_point(grid: &[f64], t: f64) -> usize {
    // first grid point at or after t
    let upper = grid.partition_point(|&g| g < t);
    if upper == 0 {
        return 0;
    }
    if upper == grid.len() {
        return grid.len() - 1;
    }
    let below = t - grid[upper - 1];
    let above = grid[upper] - t;
    if above < below {
        upper
    } else {
        upper - 1
    }
}
