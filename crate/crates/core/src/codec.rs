//! Feature encoding for event sequences.
//!
//! Real-valued variables are Winsorized to their 2nd/98th training
//! percentiles and standardized with robust statistics computed inside
//! those bounds. Ordinal variables, merge counts and time gaps are
//! thermometer (unary) coded. Missing slots are zero-filled.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Event, EventSequence};

/// Upper edges of the count bins (0,1], (1,2], (2,4], (4,inf).
pub const COUNT_BIN_EDGES: [f64; 3] = [1.0, 2.0, 4.0];

/// Upper edges of the time-gap bins, in hours: (0,0.5], (0.5,2], (2,8],
/// (8,24], (24,72], (72,inf).
pub const TIME_BIN_EDGES: [f64; 5] = [0.5, 2.0, 8.0, 24.0, 72.0];

const LOWER_PERCENTILE: f64 = 2.0;
const UPPER_PERCENTILE: f64 = 98.0;
const MIN_STD: f64 = 1e-8;

const HEADER: &str = "tempclust-codec 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableKind {
    Real,
    Ordinal { levels: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

/// Per-variable layout of the raw event vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<VariableSpec>,
}

impl Schema {
    /// A schema of `r` real-valued variables.
    pub fn all_real(r: usize) -> Self {
        let variables = (0..r)
            .map(|j| VariableSpec { name: format!("x{j}"), kind: VariableKind::Real })
            .collect();
        Schema { variables }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustStats {
    pub p2: f64,
    pub p98: f64,
    pub mean: f64,
    pub std: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Robust location and scale of one variable's training values.
///
/// Mean and (population) standard deviation are taken over the values
/// inside `[p2, p98]`. If no value falls inside the bounds, the clamped
/// values are used instead. A standard deviation below `1e-8` is replaced
/// by 1.
pub fn fit_robust_stats(values: &[f64], var: usize) -> Result<RobustStats> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(Error::UnfitVariable(var));
    }
    sorted.sort_by(f64::total_cmp);
    let p2 = percentile(&sorted, LOWER_PERCENTILE);
    let p98 = percentile(&sorted, UPPER_PERCENTILE);
    let mut kept: Vec<f64> = sorted.iter().copied().filter(|&v| v >= p2 && v <= p98).collect();
    if kept.is_empty() {
        kept = sorted.iter().map(|v| v.clamp(p2, p98)).collect();
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var_ = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var_.sqrt() < MIN_STD { 1.0 } else { var_.sqrt() };
    Ok(RobustStats { p2, p98, mean, std })
}

/// Winsorizes into `[p2, p98]` and standardizes.
pub fn transform_real(value: f64, stats: &RobustStats) -> f64 {
    (value.clamp(stats.p2, stats.p98) - stats.mean) / stats.std
}

/// Thermometer code of level `level` (1-based) out of `levels`: the first
/// `level - 1` of `levels - 1` bits are set.
pub fn unary_encode(level: usize, levels: usize) -> Result<Vec<f64>> {
    if level == 0 || level > levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    Ok((1..levels).map(|b| if b < level { 1.0 } else { 0.0 }).collect())
}

fn bin_level(value: f64, edges: &[f64]) -> usize {
    1 + edges.iter().take_while(|&&e| value > e).count()
}

/// Three-bit code of a merge count. A count of 0 (empty grid cell) shares
/// the first bin.
pub fn encode_count(c: u32) -> Vec<f64> {
    let level = bin_level(f64::from(c), &COUNT_BIN_EDGES);
    unary_encode(level, COUNT_BIN_EDGES.len() + 1).expect("bin level in range")
}

/// Five-bit code of the gap to the previous event, in hours.
pub fn encode_time_gap(dt: f64) -> Result<Vec<f64>> {
    if dt < 0.0 || dt.is_nan() {
        return Err(Error::NegativeGap(dt));
    }
    let level = bin_level(dt, &TIME_BIN_EDGES);
    unary_encode(level, TIME_BIN_EDGES.len() + 1)
}

/// Ordered levels of an ordinal variable.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalSpec {
    levels: Vec<f64>,
}

impl OrdinalSpec {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty()
            || levels.iter().any(|l| !l.is_finite())
            || levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::BadLevels);
        }
        Ok(OrdinalSpec { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// 1-based level nearest to `value`; ties resolve to the lower level.
    /// Averaged (merged) ordinal values land between levels, hence nearest.
    pub fn level_of(&self, value: f64) -> usize {
        let upper = self.levels.partition_point(|&l| l < value);
        if upper == 0 {
            return 1;
        }
        if upper == self.levels.len() {
            return self.levels.len();
        }
        let below = value - self.levels[upper - 1];
        let above = self.levels[upper] - value;
        if above < below {
            upper + 1
        } else {
            upper
        }
    }

    pub fn bits(&self) -> usize {
        self.levels.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodedVariable {
    Real(RobustStats),
    Ordinal(OrdinalSpec),
}

impl EncodedVariable {
    fn width(&self) -> usize {
        match self {
            EncodedVariable::Real(_) => 1,
            EncodedVariable::Ordinal(o) => o.bits(),
        }
    }
}

/// A fitted, immutable event encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCodec {
    variables: Vec<EncodedVariable>,
    count_edges: Vec<f64>,
    time_edges: Vec<f64>,
}

impl FeatureCodec {
    /// Fits real-variable statistics on the given (training) sequences.
    pub fn fit<'a, I>(schema: &Schema, train: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EventSequence>,
    {
        let r = schema.variables.len();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); r];
        for seq in train {
            for e in &seq.events {
                if e.dim() != r {
                    return Err(Error::DimensionMismatch { expected: r, got: e.dim() });
                }
                for (j, col) in columns.iter_mut().enumerate() {
                    if e.mask[j] {
                        col.push(e.x[j]);
                    }
                }
            }
        }
        let variables = schema
            .variables
            .iter()
            .zip(columns)
            .enumerate()
            .map(|(j, (spec, col))| match &spec.kind {
                VariableKind::Real => fit_robust_stats(&col, j).map(EncodedVariable::Real),
                VariableKind::Ordinal { levels } => OrdinalSpec::new(levels.clone()).map(EncodedVariable::Ordinal),
            })
            .collect::<Result<_>>()?;
        Ok(Self::from_parts(variables))
    }

    pub fn from_parts(variables: Vec<EncodedVariable>) -> Self {
        FeatureCodec {
            variables,
            count_edges: COUNT_BIN_EDGES.to_vec(),
            time_edges: TIME_BIN_EDGES.to_vec(),
        }
    }

    pub fn variables(&self) -> &[EncodedVariable] {
        &self.variables
    }

    /// Number of raw variables expected per event.
    pub fn input_dim(&self) -> usize {
        self.variables.len()
    }

    /// Width of one encoded event.
    pub fn width(&self) -> usize {
        self.variables.iter().map(EncodedVariable::width).sum::<usize>()
            + self.count_edges.len()
            + self.time_edges.len()
    }

    fn encode_event(&self, e: &Event, dt: f64, row: &mut [f64]) -> Result<()> {
        let mut k = 0;
        for (j, var) in self.variables.iter().enumerate() {
            match var {
                EncodedVariable::Real(stats) => {
                    row[k] = e.value(j).map_or(0.0, |v| transform_real(v, stats));
                    k += 1;
                }
                EncodedVariable::Ordinal(spec) => {
                    if let Some(v) = e.value(j) {
                        let bits = unary_encode(spec.level_of(v), spec.levels.len())?;
                        row[k..k + bits.len()].copy_from_slice(&bits);
                    }
                    k += spec.bits();
                }
            }
        }
        let count = unary_encode(bin_level(f64::from(e.c), &self.count_edges), self.count_edges.len() + 1)?;
        row[k..k + count.len()].copy_from_slice(&count);
        k += count.len();
        if dt < 0.0 || dt.is_nan() {
            return Err(Error::NegativeGap(dt));
        }
        let gap = unary_encode(bin_level(dt, &self.time_edges), self.time_edges.len() + 1)?;
        row[k..k + gap.len()].copy_from_slice(&gap);
        Ok(())
    }

    /// Encodes every event of `seq` into one row of a `T x width` matrix.
    pub fn featurize(&self, seq: &EventSequence) -> Result<Array2<f64>> {
        let r = seq.dim();
        if r != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: r });
        }
        let d = self.width();
        let mut out = Array2::zeros((seq.len(), d));
        let mut prev_t = None;
        for (i, e) in seq.events.iter().enumerate() {
            if e.dim() != r {
                return Err(Error::DimensionMismatch { expected: r, got: e.dim() });
            }
            let dt = prev_t.map_or(0.0, |p| e.t - p);
            prev_t = Some(e.t);
            let row = out.row_mut(i).into_slice().expect("standard layout");
            self.encode_event(e, dt, row)?;
        }
        Ok(out)
    }

    /// Flat text form; numbers keep 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "count-bins{}", join_nums(&self.count_edges)).unwrap();
        writeln!(s, "time-bins{}", join_nums(&self.time_edges)).unwrap();
        for var in &self.variables {
            match var {
                EncodedVariable::Real(st) => {
                    writeln!(s, "real{}", join_nums(&[st.p2, st.p98, st.mean, st.std])).unwrap()
                }
                EncodedVariable::Ordinal(o) => writeln!(s, "ordinal{}", join_nums(&o.levels)).unwrap(),
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            Some((i, _)) => return Err(parse_err(i, "expected codec header")),
            None => return Err(parse_err(0, "empty codec document")),
        }
        let mut count_edges = None;
        let mut time_edges = None;
        let mut variables = Vec::new();
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let nums: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|e| parse_err(i, &format!("{p:?}: {e}"))))
                .collect::<Result<_>>()?;
            match tag {
                "count-bins" => count_edges = Some(nums),
                "time-bins" => time_edges = Some(nums),
                "real" => {
                    let [p2, p98, mean, std] = nums[..] else {
                        return Err(parse_err(i, "real needs p2 p98 mean std"));
                    };
                    variables.push(EncodedVariable::Real(RobustStats { p2, p98, mean, std }));
                }
                "ordinal" => {
                    let spec = OrdinalSpec::new(nums).map_err(|e| parse_err(i, &e.to_string()))?;
                    variables.push(EncodedVariable::Ordinal(spec));
                }
                other => return Err(parse_err(i, &format!("unknown entry {other:?}"))),
            }
        }
        let edges_ok = |v: &Vec<f64>| v.windows(2).all(|w| w[0] < w[1]);
        let count_edges = count_edges.filter(edges_ok).ok_or_else(|| parse_err(0, "missing count-bins"))?;
        let time_edges = time_edges.filter(edges_ok).ok_or_else(|| parse_err(0, "missing time-bins"))?;
        Ok(FeatureCodec { variables, count_edges, time_edges })
    }
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line: line + 1, msg: msg.to_string() }
}

pub(crate) fn join_nums(values: &[f64]) -> String {
    values.iter().map(|v| format!(" {v:.16e}")).collect()
}
