//! Rate sweeps over the share of one commonness level.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ExperimentSpec;
use crate::oracle::compare_schemes;

pub const CSV_HEADER: &str = "x,r_cauc,r_cacc,r_cicc,r_cutset";

/// Eleven points `0, 0.1, ..., 1`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0; points];
    }
    (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect()
}

/// `N = K = 10`, `M = 1`, sweeping the share of 2-subfiles.
pub fn figure1_spec() -> ExperimentSpec {
    let mut ratios = vec![0.0; 10];
    ratios[0] = 1.0;
    ExperimentSpec {
        n_files: 10,
        n_users: 10,
        cache_capacity: 1.0,
        file_bits: 1_000_000.0,
        ratios,
        sweep_level: 2,
        grid: unit_grid(11),
    }
}

/// Same library, sweeping the share of subfiles common to all 10 files.
pub fn figure2_spec() -> ExperimentSpec {
    ExperimentSpec {
        sweep_level: 10,
        ..figure1_spec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub xs: Vec<f64>,
    pub cauc: Vec<f64>,
    pub cacc: Vec<f64>,
    pub cicc: Vec<f64>,
    pub cutset: Vec<f64>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "# N={} K={} M={} F={} sweep_level={}\n{CSV_HEADER}\n",
            s.n_files, s.n_users, s.cache_capacity, s.file_bits, s.sweep_level
        );
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.xs[i], self.cauc[i], self.cacc[i], self.cicc[i], self.cutset[i]
            );
        }
        out
    }
}

/// Evaluates every scheme at each grid value of the swept ratio.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    if spec.sweep_level == 0 || spec.sweep_level > spec.n_files {
        return Err(Error::LevelOutOfRange {
            level: spec.sweep_level,
            n_files: spec.n_files,
        });
    }
    if let Some(x) = spec.grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidConfig(format!("sweep value {x} outside [0, 1]")));
    }
    let rows = spec
        .grid
        .par_iter()
        .map(|&x| compare_schemes(&spec.at(x).exact_config()?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        xs: spec.grid.clone(),
        cauc: rows.iter().map(|r| r.cauc).collect(),
        cacc: rows.iter().map(|r| r.cacc).collect(),
        cicc: rows.iter().map(|r| r.cicc).collect(),
        cutset: rows.iter().map(|r| r.cutset).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure1_trends() {
        let r = run_sweep(&figure1_spec()).unwrap();
        assert_eq!(r.len(), 11);
        assert!(r.cicc.iter().all(|c| (c - 4.5).abs() < 1e-9));
        assert!(r.cacc.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn single_point_matches_private_library() {
        let spec = ExperimentSpec {
            grid: vec![0.0],
            ..figure1_spec()
        };
        let r = run_sweep(&spec).unwrap();
        assert!((r.cacc[0] - 4.5).abs() < 1e-9);
        assert!((r.cauc[0] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn csv_is_deterministic() {
        let a = run_sweep(&figure2_spec()).unwrap().to_csv();
        let b = run_sweep(&figure2_spec()).unwrap().to_csv();
        assert_eq!(a, b);
        assert_eq!(a.lines().nth(1), Some(CSV_HEADER));
        assert_eq!(a.lines().count(), 13);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let mut s = figure1_spec();
        s.sweep_level = 11;
        assert!(run_sweep(&s).is_err());
        let mut s = figure1_spec();
        s.grid = vec![1.5];
        assert!(run_sweep(&s).is_err());
    }
}
