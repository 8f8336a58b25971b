//! Sweeps over a resolved experiment and CSV serialization.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigPoint, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimation::{EstimateOptions, EstimateRecord, Simulation};
use crate::lattice::NodeId;
use crate::metrics::MetricKind;

pub const CSV_HEADER: [&str; 21] = [
    "topology", "boundary", "dims", "d", "q", "p_gen", "p_swap", "T", "t_cut", "F_new", "F_min",
    "M", "N", "steps", "window", "node", "metric", "mean", "std", "band6", "steady",
];

/// One CSV line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub topology: String,
    pub boundary: String,
    pub dims: String,
    pub d: usize,
    pub q: f64,
    pub p_gen: f64,
    pub p_swap: f64,
    #[serde(rename = "T")]
    pub coherence_time: f64,
    pub t_cut: u32,
    #[serde(rename = "F_new")]
    pub f_new: f64,
    #[serde(rename = "F_min")]
    pub f_min: f64,
    #[serde(rename = "M")]
    pub max_swap_distance: u32,
    #[serde(rename = "N")]
    pub realizations: usize,
    pub steps: u32,
    pub window: u32,
    pub node: NodeId,
    pub metric: MetricKind,
    pub mean: f64,
    pub std: f64,
    pub band6: f64,
    pub steady: bool,
}

/// Sidecar written next to every CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub version: String,
    pub seed: u64,
    pub q: Vec<f64>,
    pub config: ExperimentConfig,
}

/// Estimates for one parameter point and one grid index, with their rows.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: usize,
    pub q_index: usize,
    pub records: Vec<EstimateRecord>,
    pub rows: Vec<SweepRow>,
}

/// One per-step sample mean, written when `series` is enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub q: f64,
    pub p_gen: f64,
    pub p_swap: f64,
    #[serde(rename = "T")]
    pub coherence_time: f64,
    #[serde(rename = "F_new")]
    pub f_new: f64,
    pub node: NodeId,
    pub metric: MetricKind,
    pub t: usize,
    pub mean: f64,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn series_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("series.csv")
}

/// Runs one `(point, q)` combination. Realizations are seeded from
/// `(config.seed, q_index, realization)`, so the result depends on the grid
/// index but not on other points.
pub fn run_point(config: &ExperimentConfig, point: usize, q_index: usize) -> Result<PointResult> {
    let p = config
        .points
        .get(point)
        .ok_or_else(|| Error::ConfigInvalid(format!("no parameter point {point}")))?;
    let q = *config
        .q
        .get(q_index)
        .ok_or_else(|| Error::ConfigInvalid(format!("no q grid index {q_index}")))?;
    let sim = Simulation::new(config.protocol_config(p, q))?;
    let records = sim.estimate(&EstimateOptions {
        realizations: config.realizations,
        base_seed: config.seed,
        q_index: q_index as u64,
        tracked: config.tracked.clone(),
        symmetry_average: config.symmetry_average,
    })?;
    let rows = records.iter().map(|r| row(config, p, q, r)).collect();
    Ok(PointResult {
        point,
        q_index,
        records,
        rows,
    })
}

fn row(config: &ExperimentConfig, p: &ConfigPoint, q: f64, r: &EstimateRecord) -> SweepRow {
    SweepRow {
        topology: config.topology.name().to_string(),
        boundary: config.boundary.name().to_string(),
        dims: config.boundary.dims_label(),
        d: config.topology.degree(),
        q,
        p_gen: p.hardware.p_gen,
        p_swap: p.hardware.p_swap,
        coherence_time: p.hardware.coherence_time,
        t_cut: p.t_cut,
        f_new: p.hardware.f_new,
        f_min: p.f_min,
        max_swap_distance: p.max_swap_distance,
        realizations: config.realizations,
        steps: p.schedule.steps,
        window: p.schedule.window,
        node: r.node,
        metric: r.metric,
        mean: r.mean,
        std: r.std,
        band6: r.band6,
        steady: r.verdict.success,
    }
}

fn series_rows(result: &PointResult) -> Vec<SeriesRow> {
    result
        .records
        .iter()
        .zip(&result.rows)
        .flat_map(|(record, row)| {
            record
                .series
                .iter()
                .enumerate()
                .map(move |(t, &mean)| SeriesRow {
                    q: row.q,
                    p_gen: row.p_gen,
                    p_swap: row.p_swap,
                    coherence_time: row.coherence_time,
                    f_new: row.f_new,
                    node: row.node,
                    metric: row.metric,
                    t,
                    mean,
                })
        })
        .collect()
}

/// Every point, in point-major then q order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<PointResult>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.points.len() * config.q.len());
    for point in 0..config.points.len() {
        for q_index in 0..config.q.len() {
            out.push(run_point(config, point, q_index)?);
        }
    }
    Ok(out)
}

/// Runs the sweep and writes `path` plus its `.meta.json` sidecar. Nothing is
/// written unless every point succeeds.
pub fn run_sweep(config: &ExperimentConfig, path: &Path) -> Result<Vec<SweepRow>> {
    let results = sweep(config)?;
    let series: Vec<SeriesRow> = if config.series {
        results.iter().flat_map(series_rows).collect()
    } else {
        Vec::new()
    };
    let rows: Vec<SweepRow> = results.into_iter().flat_map(|r| r.rows).collect();
    write_csv(path, &rows)?;
    if config.series {
        let mut writer = csv::Writer::from_path(series_path(path))?;
        for r in &series {
            writer.serialize(r)?;
        }
        writer.flush()?;
    }
    let meta = SweepMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        q: config.q.clone(),
        config: config.clone(),
    };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(rows)
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut writer = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    Ok(rows)
}

pub fn read_meta(csv_path: &Path) -> Result<SweepMeta> {
    Ok(serde_json::from_str(&fs::read_to_string(meta_path(
        csv_path,
    ))?)?)
}

/// Recomputes a row from the sidecar alone.
pub fn rerun(meta: &SweepMeta, row: &SweepRow) -> Result<SweepRow> {
    let config = &meta.config;
    let point = config
        .points
        .iter()
        .position(|p| {
            p.hardware.p_gen == row.p_gen
                && p.hardware.p_swap == row.p_swap
                && p.hardware.coherence_time == row.coherence_time
                && p.hardware.f_new == row.f_new
                && p.t_cut == row.t_cut
                && p.max_swap_distance == row.max_swap_distance
        })
        .ok_or_else(|| Error::ConfigInvalid("row matches no parameter point".into()))?;
    let q_index = meta
        .q
        .iter()
        .position(|&q| q == row.q)
        .ok_or_else(|| Error::ConfigInvalid(format!("q = {} not in the grid", row.q)))?;
    run_point(config, point, q_index)?
        .rows
        .into_iter()
        .find(|r| r.node == row.node && r.metric == row.metric)
        .ok_or_else(|| Error::ConfigInvalid("row node or metric not tracked".into()))
}
