use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluation::{evaluate, MonoMStats, QErrorStats};
use crate::relation::Relation;
use crate::workload::Workload;
use crate::{Error, Result};

use super::hyper::{DistanceKind, Hyperparams};
use super::train::train;

pub const GRID_CSV_HEADER: &str =
    "lambda,distance,c,median_qerror,p25_qerror,p75_qerror,mean_monom,std_monom,train_seconds,status";

/// Hyperparameter grid; one run per element of the Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lambda: Vec<f64>,
    pub distance: Vec<DistanceKind>,
    pub c: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lambda: vec![0.1, 0.5, 1.0, 3.0, 10.0],
            distance: vec![DistanceKind::Difference, DistanceKind::Jaccard],
            c: vec![10.0, 1e2, 1e3, 1e4],
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_empty() || self.distance.is_empty() || self.c.is_empty() {
            return Err(Error::Argument("grid needs at least one value for lambda, distance and c".into()));
        }
        Ok(())
    }

    /// `(λ, D, c)` in row order: λ outermost, c innermost.
    pub fn points(&self) -> Vec<(f64, DistanceKind, f64)> {
        let mut out = Vec::with_capacity(self.lambda.len() * self.distance.len() * self.c.len());
        for &l in &self.lambda {
            for &d in &self.distance {
                for &c in &self.c {
                    out.push((l, d, c));
                }
            }
        }
        out
    }
}

pub fn read_grid_json(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let grid: Grid = serde_json::from_str(&text)
        .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
    grid.validate()?;
    Ok(grid)
}

/// Data shared by every run of a grid search.
#[derive(Clone, Copy)]
pub struct GridRun<'a> {
    pub relation: &'a Relation,
    pub train: &'a Workload,
    pub light: &'a Workload,
    pub val: &'a Workload,
    /// Evaluation workload.
    pub complete: &'a Workload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub lambda: f64,
    pub distance: DistanceKind,
    pub c: f64,
    /// Absent for failed runs.
    pub metrics: Option<(QErrorStats, MonoMStats)>,
    pub train_seconds: f64,
    pub status: String,
}

fn run_point(run: GridRun<'_>, hp: &Hyperparams) -> GridRow {
    let result = train(run.relation, run.train, run.light, run.val, hp).and_then(|t| {
        let secs: f64 = t.diagnostics.iter().map(|d| d.wall_time_seconds).sum();
        let report = evaluate(&t.model, run.complete)?;
        Ok((report, secs))
    });
    let (metrics, train_seconds, status) = match result {
        Ok((r, secs)) => (Some((r.qerror, r.monom)), secs, "ok".to_string()),
        Err(e) => (None, 0.0, format!("failed: {e}")),
    };
    GridRow {
        lambda: hp.lambda,
        distance: hp.distance,
        c: hp.c,
        metrics,
        train_seconds,
        status,
    }
}

/// Trains and evaluates one model per grid point. Every run starts from the
/// same `base.seed`, so rows do not depend on `parallel`.
pub fn grid_search(run: GridRun<'_>, grid: &Grid, base: &Hyperparams, parallel: usize) -> Result<Vec<GridRow>> {
    grid.validate()?;
    base.validate()?;
    let configs: Vec<Hyperparams> = grid
        .points()
        .into_iter()
        .map(|(lambda, distance, c)| Hyperparams {
            lambda,
            distance,
            c,
            ..base.clone()
        })
        .collect();
    if parallel <= 1 {
        return Ok(configs.iter().map(|hp| run_point(run, hp)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {parallel} workers: {e}")))?;
    Ok(pool.install(|| configs.par_iter().map(|hp| run_point(run, hp)).collect()))
}

/// Row with the highest mean MonoM for each λ, in order of first appearance.
pub fn best_by_monom_per_lambda(rows: &[GridRow]) -> Vec<&GridRow> {
    let mut best: Vec<&GridRow> = Vec::new();
    for row in rows {
        let Some((_, monom)) = row.metrics else { continue };
        match best.iter_mut().find(|b| b.lambda == row.lambda) {
            Some(b) => {
                if monom.mean > b.metrics.unwrap().1.mean {
                    *b = row;
                }
            }
            None => best.push(row),
        }
    }
    best
}

pub fn write_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(GRID_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let metrics = match r.metrics {
            Some((q, m)) => format!("{},{},{},{},{}", q.median, q.p25, q.p75, m.mean, m.std),
            None => ",,,,".to_string(),
        };
        let status = r.status.replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.lambda, r.distance, r.c, metrics, r.train_seconds, status
        ));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
