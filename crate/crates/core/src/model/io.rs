//! Versioned text records for trained models.
//!
//! ```text
//! tempclust-model 1
//! task classification
//! shape <input> <hidden> <outputs>
//! theta <all predictor parameters>
//! mre <grid|cluster>          (ensembles only, with the three lines below)
//! resolutions <p_1 ... p_K>
//! interval <lo> <hi> | interval none
//! beta <b_1> <b_2> <b_3>
//! ```

use std::fmt::Write as _;

use super::mre::{MreModel, DESCRIPTOR_LEN};
use super::reference::ReferencePredictor;
use super::{Model, Task};
use crate::codec::join_nums;
use crate::error::{Error, Result};

const HEADER: &str = "tempclust-model 1";

pub(super) fn write_model(model: &Model) -> String {
    let p = model.predictor();
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "task {}", super::Predictor::task(p)).unwrap();
    writeln!(s, "shape {} {} {}", p.input_dim(), p.hidden_dim(), super::Predictor::outputs(p)).unwrap();
    writeln!(s, "theta{}", join_nums(p.parameters().as_slice().expect("contiguous"))).unwrap();
    if let Model::Mre(m) = model {
        writeln!(s, "mre {}", m.mode).unwrap();
        writeln!(s, "resolutions{}", join_nums(&m.resolutions)).unwrap();
        match m.interval {
            Some((lo, hi)) => writeln!(s, "interval{}", join_nums(&[lo, hi])).unwrap(),
            None => writeln!(s, "interval none").unwrap(),
        }
        writeln!(s, "beta{}", join_nums(&m.beta)).unwrap();
    }
    s
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn numbers(line: usize, parts: &[&str]) -> Result<Vec<f64>> {
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| err(line, format!("{p:?}: {e}"))))
        .collect()
}

pub(super) fn read_model(text: &str) -> Result<Model> {
    let mut task = None;
    let mut shape = None;
    let mut theta = None;
    let mut mode = None;
    let mut resolutions = None;
    let mut interval = None;
    let mut beta = None;
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let Some((&tag, rest)) = parts.split_first() else { continue };
        if !saw_header {
            if line.trim() != HEADER {
                return Err(err(n, "expected model header"));
            }
            saw_header = true;
            continue;
        }
        match tag {
            "task" => task = Some(rest.first().ok_or_else(|| err(n, "missing task"))?.parse::<Task>()?),
            "shape" => {
                let dims: Vec<usize> = rest
                    .iter()
                    .map(|p| p.parse().map_err(|_| err(n, format!("bad dimension {p:?}"))))
                    .collect::<Result<_>>()?;
                let [a, b, c] = dims[..] else { return Err(err(n, "shape needs three dimensions")) };
                shape = Some((a, b, c));
            }
            "theta" => theta = Some(numbers(n, rest)?),
            "mre" => mode = Some(rest.first().ok_or_else(|| err(n, "missing mode"))?.parse()?),
            "resolutions" => resolutions = Some(numbers(n, rest)?),
            "interval" => {
                interval = Some(match rest {
                    ["none"] => None,
                    _ => {
                        let v = numbers(n, rest)?;
                        let [lo, hi] = v[..] else { return Err(err(n, "interval needs two numbers")) };
                        Some((lo, hi))
                    }
                })
            }
            "beta" => {
                let v = numbers(n, rest)?;
                let b: [f64; DESCRIPTOR_LEN] = v.try_into().map_err(|_| err(n, "beta needs three numbers"))?;
                beta = Some(b);
            }
            other => return Err(err(n, format!("unknown entry {other:?}"))),
        }
    }
    if !saw_header {
        return Err(err(1, "empty model document"));
    }
    let task = task.ok_or_else(|| err(0, "missing task"))?;
    let (input, hidden, outputs) = shape.ok_or_else(|| err(0, "missing shape"))?;
    let theta = theta.ok_or_else(|| err(0, "missing theta"))?;
    let predictor = ReferencePredictor::from_parameters(task, input, hidden, outputs, theta)
        .ok_or_else(|| err(0, "theta length does not match shape"))?;
    match mode {
        None => Ok(Model::Single(predictor)),
        Some(mode) => Ok(Model::Mre(MreModel {
            predictor,
            beta: beta.ok_or_else(|| err(0, "missing beta"))?,
            resolutions: resolutions.ok_or_else(|| err(0, "missing resolutions"))?,
            mode,
            interval: interval.ok_or_else(|| err(0, "missing interval"))?,
        })),
    }
}
