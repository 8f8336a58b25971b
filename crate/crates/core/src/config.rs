//! Experiment description files.
//!
//! A TOML file names the lattice, the hardware and policy parameters, the
//! swap-probability grid and the Monte Carlo settings. Hardware keys may hold
//! a single value or a list; the resolved experiment is the cartesian product
//! of those lists, each point with its own derived `tcut` and `M`. See
//! `docs/config.md` for the schema.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entanglement::{self, HardwareParams, PolicyParams};
use crate::error::{Error, Result};
use crate::estimation::{default_schedule, ProtocolConfig, Schedule, TrackedNodes};
use crate::lattice::{Boundary, NodeId, PhysicalGraph, TopologyKind};
use crate::oracle::DEFAULT_BRANCH_BUDGET;

/// A value or a list of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// An integer or the string `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(u32),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub const AUTO: AutoOr = AutoOr::Auto(AutoTag::Auto);

    pub fn value(self) -> Option<u32> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Value(v) => write!(f, "{v}"),
            AutoOr::Auto(_) => f.write_str("auto"),
        }
    }
}

/// Swap-probability grid: a value, a list, or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QGrid {
    One(f64),
    Many(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl QGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            QGrid::One(q) => Ok(vec![*q]),
            QGrid::Many(qs) => Ok(qs.clone()),
            &QGrid::Range { start, stop, step } => {
                let ordered = step > 0.0 && stop >= start;
                if !ordered {
                    return Err(Error::ConfigInvalid(format!(
                        "q range needs step > 0 and stop >= start, got {start}..{stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Rounding keeps grid points like 0.15 free of accumulated error.
                Ok((0..n)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackedSpec {
    Named(TrackedName),
    List(Vec<NodeId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackedName {
    All,
    Representative,
}

impl TrackedSpec {
    pub fn resolve(&self) -> TrackedNodes {
        match self {
            TrackedSpec::Named(TrackedName::All) => TrackedNodes::All,
            TrackedSpec::Named(TrackedName::Representative) => TrackedNodes::Representative,
            TrackedSpec::List(nodes) => TrackedNodes::List(nodes.clone()),
        }
    }
}

fn default_tracked() -> TrackedSpec {
    TrackedSpec::Named(TrackedName::Representative)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub topology: TopologyKind,
    /// `"finite"` or `"periodic"`.
    pub boundary: String,
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSection {
    pub pgen: OneOrMany<f64>,
    pub pswap: OneOrMany<f64>,
    #[serde(rename = "T")]
    pub coherence_time: OneOrMany<f64>,
    #[serde(rename = "Fnew")]
    pub f_new: OneOrMany<f64>,
    /// `T` and an integer `tcut` are given for `pgen = 1` and scale as `1/pgen`.
    #[serde(default)]
    pub pgen_scaling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(rename = "Fmin")]
    pub f_min: f64,
    #[serde(default = "auto")]
    pub tcut: AutoOr,
    #[serde(rename = "M")]
    pub max_swap_distance: AutoOr,
    pub q: QGrid,
}

fn auto() -> AutoOr {
    AutoOr::AUTO
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(rename = "N")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    pub steps: Option<u32>,
    pub window: Option<u32>,
    #[serde(default = "default_tracked")]
    pub tracked: TrackedSpec,
    /// Node-average on periodic lattices.
    #[serde(default)]
    pub symmetry_average: bool,
    #[serde(default)]
    pub verify: bool,
    /// Also write the per-step sample means next to the CSV.
    #[serde(default)]
    pub series: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_BRANCH_BUDGET
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            budget: DEFAULT_BRANCH_BUDGET,
        }
    }
}

/// The file as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub lattice: LatticeSection,
    pub hardware: HardwareSection,
    pub policy: PolicySection,
    pub mc: McSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

/// One fully resolved hardware/policy combination, without `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub hardware: HardwareParams,
    pub t_cut: u32,
    pub max_swap_distance: u32,
    pub f_min: f64,
    pub schedule: Schedule,
}

/// A validated experiment with every `"auto"` field computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topology: TopologyKind,
    pub boundary: Boundary,
    pub points: Vec<ConfigPoint>,
    pub q: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub tracked: TrackedNodes,
    pub symmetry_average: bool,
    pub verify: bool,
    #[serde(default)]
    pub series: bool,
    pub oracle_budget: u64,
}

impl ExperimentConfig {
    pub fn protocol_config(&self, point: &ConfigPoint, q: f64) -> ProtocolConfig {
        ProtocolConfig {
            topology: self.topology,
            boundary: self.boundary.clone(),
            hardware: point.hardware,
            policy: PolicyParams {
                t_cut: point.t_cut,
                max_swap_distance: point.max_swap_distance,
                f_min: point.f_min,
                q,
            },
            schedule: point.schedule,
            verify: self.verify,
        }
    }

    /// Checks everything a sweep relies on.
    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::ConfigInvalid("the q grid is empty".into()));
        }
        if self.points.is_empty() {
            return Err(Error::ConfigInvalid("no hardware parameter points".into()));
        }
        if self.realizations < 2 {
            return Err(Error::TooFewRealizations(self.realizations));
        }
        let mut checked = BTreeSet::new();
        for point in &self.points {
            for &q in &self.q {
                self.protocol_config(point, q).validate()?;
            }
            if checked.insert(point.max_swap_distance) {
                PhysicalGraph::build(
                    self.topology,
                    self.boundary.clone(),
                    point.max_swap_distance,
                )?;
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    resolve(&raw)
}

/// Reads, resolves and validates an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    resolve(&raw)
}

pub fn resolve(raw: &RawConfig) -> Result<ExperimentConfig> {
    let lattice = &raw.lattice;
    let boundary = match lattice.boundary.as_str() {
        "finite" => Boundary::Finite(lattice.dims.clone()),
        "periodic" => Boundary::Periodic(lattice.dims.clone()),
        other => {
            return Err(Error::ConfigInvalid(format!(
                "boundary must be \"finite\" or \"periodic\", got \"{other}\""
            )))
        }
    };

    let hw = &raw.hardware;
    let policy = &raw.policy;
    let mut points = Vec::new();
    for coherence_time in hw.coherence_time.values() {
        for f_new in hw.f_new.values() {
            for p_gen in hw.pgen.values() {
                for p_swap in hw.pswap.values() {
                    let mut hardware = HardwareParams {
                        p_gen,
                        p_swap,
                        coherence_time,
                        f_new,
                    };
                    let mut t_cut = policy.tcut;
                    if hw.pgen_scaling {
                        if !(p_gen > 0.0 && p_gen <= 1.0) {
                            return Err(Error::InvalidParameter {
                                name: "pgen",
                                value: p_gen,
                                reason: "must lie in (0, 1] with pgen_scaling",
                            });
                        }
                        hardware.coherence_time = coherence_time / p_gen;
                        if let AutoOr::Value(v) = t_cut {
                            t_cut = AutoOr::Value((v as f64 / p_gen + 1e-9).floor() as u32);
                        }
                    }
                    hardware.validate()?;
                    points.push(resolve_point(
                        &hardware,
                        policy.f_min,
                        t_cut,
                        policy.max_swap_distance,
                        lattice.topology,
                        &boundary,
                        &raw.mc,
                    )?);
                }
            }
        }
    }

    let config = ExperimentConfig {
        topology: lattice.topology,
        boundary,
        points,
        q: policy.q.values()?,
        realizations: raw.mc.realizations,
        seed: raw.mc.seed,
        tracked: raw.mc.tracked.resolve(),
        symmetry_average: raw.mc.symmetry_average,
        verify: raw.mc.verify,
        series: raw.mc.series,
        oracle_budget: raw.oracle.budget,
    };
    config.validate()?;
    Ok(config)
}

fn resolve_point(
    hardware: &HardwareParams,
    f_min: f64,
    t_cut: AutoOr,
    max_swap_distance: AutoOr,
    topology: TopologyKind,
    boundary: &Boundary,
    mc: &McSection,
) -> Result<ConfigPoint> {
    let (t, f_new) = (hardware.coherence_time, hardware.f_new);
    let (t_cut, m) = match (t_cut.value(), max_swap_distance.value()) {
        (Some(t_cut), Some(m)) => {
            entanglement::validate(t, t_cut, f_new, f_min, m)?;
            (t_cut, m)
        }
        (None, Some(m)) => (entanglement::max_cutoff(t, f_new, f_min, m)?, m),
        (Some(t_cut), None) => (
            t_cut,
            entanglement::max_swap_distance(t, t_cut, f_new, f_min)?,
        ),
        (None, None) => {
            return Err(Error::ConfigInvalid(
                "tcut and M cannot both be \"auto\"".into(),
            ))
        }
    };
    let default = default_schedule(t_cut, topology, boundary);
    let schedule = Schedule {
        steps: mc.steps.unwrap_or(default.steps),
        window: mc.window.unwrap_or(default.window),
    };
    Ok(ConfigPoint {
        hardware: *hardware,
        t_cut,
        max_swap_distance: m,
        f_min,
        schedule,
    })
}
