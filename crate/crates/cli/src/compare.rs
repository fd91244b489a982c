//! Overlap-curve comparison between a simulation and a theory run.

use std::collections::BTreeMap;
use std::path::Path;

use ldfa_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Largest `|Λᵢ_sim − Λᵢ_theory|` over matched rows and modes.
    pub max_deviation: f64,
    /// Largest deviation per mode.
    pub per_mode: Vec<f64>,
    /// Step at which `max_deviation` occurs.
    pub worst_step: Option<usize>,
    /// Rows present in both inputs.
    pub rows_compared: usize,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Overlap rows keyed by step.
type Curves = BTreeMap<usize, Vec<f64>>;

fn curves(traj: &Trajectory) -> Curves {
    traj.points
        .iter()
        .filter_map(|p| Some((p.step, p.lambdas.clone()?)))
        .collect()
}

fn compare_curves(a: &Curves, b: &Curves, tolerance: f64) -> Comparison {
    let mut per_mode: Vec<f64> = Vec::new();
    let mut max_deviation = 0.0;
    let mut worst_step = None;
    let mut rows = 0;
    for (step, la) in a {
        let Some(lb) = b.get(step) else { continue };
        rows += 1;
        let modes = la.len().min(lb.len());
        if per_mode.len() < modes {
            per_mode.resize(modes, 0.0);
        }
        for i in 0..modes {
            let dev = (la[i] - lb[i]).abs();
            per_mode[i] = per_mode[i].max(dev);
            if dev > max_deviation || worst_step.is_none() {
                max_deviation = f64::max(max_deviation, dev);
                worst_step = Some(*step);
            }
        }
    }
    Comparison {
        max_deviation,
        per_mode,
        worst_step,
        rows_compared: rows,
        tolerance,
        within_tolerance: rows > 0 && max_deviation <= tolerance,
    }
}

pub fn compare_trajectories(sim: &Trajectory, theory: &Trajectory, tolerance: f64) -> Comparison {
    compare_curves(&curves(sim), &curves(theory), tolerance)
}

/// Reads the `step` and `lambda_*` columns of a trajectory CSV.
pub fn read_curves(path: &Path) -> Result<Curves, CliError> {
    let csv_err = |detail: String| CliError::Csv {
        path: path.to_path_buf(),
        detail,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let step_col = headers
        .iter()
        .position(|h| h == "step")
        .ok_or_else(|| csv_err("no step column".into()))?;
    let lambda_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("lambda_"))
        .map(|(i, _)| i)
        .collect();
    if lambda_cols.is_empty() {
        return Err(csv_err("no lambda_ columns".into()));
    }
    let mut out = Curves::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let step: usize = field(step_col)
            .parse()
            .map_err(|_| csv_err(format!("row {}: bad step {:?}", row + 1, field(step_col))))?;
        let mut values = Vec::with_capacity(lambda_cols.len());
        for &c in &lambda_cols {
            let text = field(c);
            if text.is_empty() {
                break;
            }
            values.push(
                text.parse::<f64>()
                    .map_err(|_| csv_err(format!("row {}: bad value {text:?}", row + 1)))?,
            );
        }
        if !values.is_empty() {
            out.insert(step, values);
        }
    }
    Ok(out)
}

/// Compares two trajectory CSVs row by row on matching steps.
pub fn compare_files(sim: &Path, theory: &Path, tolerance: f64) -> Result<Comparison, CliError> {
    let a = read_curves(sim)?;
    let b = read_curves(theory)?;
    let cmp = compare_curves(&a, &b, tolerance);
    if cmp.rows_compared == 0 {
        return Err(CliError::Csv {
            path: theory.to_path_buf(),
            detail: format!("no steps in common with {}", sim.display()),
        });
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curves(rows: &[(usize, &[f64])]) -> Curves {
        rows.iter().map(|(s, v)| (*s, v.to_vec())).collect()
    }

    #[test]
    fn only_shared_steps_are_compared() {
        let a = curves(&[(0, &[0.0, 0.0]), (10, &[0.5, 0.2]), (20, &[0.9, 0.4])]);
        let b = curves(&[(0, &[0.0, 0.1]), (20, &[0.7, 0.4]), (30, &[5.0, 5.0])]);
        let cmp = compare_curves(&a, &b, 0.25);
        assert_eq!(cmp.rows_compared, 2);
        assert!((cmp.max_deviation - 0.2).abs() < 1e-12);
        assert_eq!(cmp.worst_step, Some(20));
        assert!((cmp.per_mode[1] - 0.1).abs() < 1e-12);
        assert!(cmp.within_tolerance);
        assert!(!compare_curves(&a, &b, 0.1).within_tolerance);
    }

    #[test]
    fn disjoint_curves_are_never_within_tolerance() {
        let a = curves(&[(0, &[1.0])]);
        let b = curves(&[(5, &[1.0])]);
        let cmp = compare_curves(&a, &b, 1.0);
        assert_eq!(cmp.rows_compared, 0);
        assert!(!cmp.within_tolerance);
    }
}
