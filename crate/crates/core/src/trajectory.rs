//! Time-indexed training records and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One sampled point of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Number of parameter updates applied so far.
    pub step: usize,
    /// Continuous time `step * eta * tau`.
    pub time: f64,
    pub loss: f64,
    pub accuracy: Option<f64>,
    /// Mode overlaps, one per tracked singular mode.
    pub lambdas: Option<Vec<f64>>,
    /// Largest `‖P Pᵀ − I‖_F` over factored pathways.
    pub pp_orth_err: Option<f64>,
    /// Largest principal angle between an output-driven `P` and the
    /// leading output singular subspace.
    pub subspace_angle_max: Option<f64>,
    /// Multiply-accumulates spent on training so far; absent for
    /// trajectories that are not produced by training.
    pub cum_macs: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Number of `lambda_i` columns in the CSV form.
    pub lambda_count: usize,
}

pub const CSV_FIXED_HEAD: [&str; 4] = ["step", "time", "loss", "accuracy"];
pub const CSV_FIXED_TAIL: [&str; 3] = ["pp_orth_err", "subspace_angle_max", "cum_macs"];

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = CSV_FIXED_HEAD.iter().map(|s| s.to_string()).collect();
        cols.extend((1..=self.lambda_count).map(|i| format!("lambda_{i}")));
        cols.extend(CSV_FIXED_TAIL.iter().map(|s| s.to_string()));
        cols.join(",")
    }

    /// CSV with a header row. Absent values are empty fields; floats use
    /// the shortest text that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{},{},{},{}", p.step, p.time, p.loss, opt(p.accuracy));
            for i in 0..self.lambda_count {
                let v = p.lambdas.as_ref().and_then(|l| l.get(i).copied());
                let _ = write!(out, ",{}", opt(v));
            }
            let macs = p.cum_macs.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                ",{},{},{macs}",
                opt(p.pp_orth_err),
                opt(p.subspace_angle_max)
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_metrics_are_empty_fields() {
        let t = Trajectory {
            points: vec![TrajectoryPoint {
                step: 3,
                time: 0.5,
                loss: 0.0,
                accuracy: None,
                lambdas: Some(vec![1.0]),
                pp_orth_err: None,
                subspace_angle_max: Some(0.0),
                cum_macs: Some(7),
            }],
            lambda_count: 2,
        };
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,time,loss,accuracy,lambda_1,lambda_2,pp_orth_err,subspace_angle_max,cum_macs"
        );
        assert_eq!(lines.next().unwrap(), "3,0.5,0,,1,,,0,7");
    }
}
