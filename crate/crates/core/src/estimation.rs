//! Monte Carlo estimation of steady-state expected metrics.
//!
//! Each realization starts from the no-links state and runs `steps` protocol
//! steps. Sample means over `N` realizations are checked for a steady state
//! over the final `window` steps and the estimate is read at the last step.
//!
//! Metrics are integers, so sums and sums of squares are accumulated exactly.
//! The reduction is therefore independent of how realizations are split
//! across worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{link_fidelity, HardwareParams, PolicyParams};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, NodeId, PhysicalGraph, TopologyKind};
use crate::metrics::{observe_into, MetricKind, MetricSample, NodeBounds};
use crate::protocol::{advance, protocol_step, NetworkState, ProtocolParams, StepScratch};
use crate::rng::{realization_seed, RealizationRng};

/// Tolerance on the fidelity floor in verification mode.
pub const FIDELITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: u32,
    pub window: u32,
}

/// `3 t_cut` steps (`6 t_cut` for finite chains) with a `t_cut` window. The
/// window never drops below two points.
pub fn default_schedule(t_cut: u32, kind: TopologyKind, boundary: &Boundary) -> Schedule {
    let factor = if kind == TopologyKind::Chain && !boundary.is_periodic() {
        6
    } else {
        3
    };
    Schedule {
        steps: factor * t_cut,
        window: t_cut.max(2),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateVerdict {
    pub success: bool,
    pub eps_prime: f64,
    /// Smallest confidence-interval overlap `2 eps' - |X_i - X_j|` in the window.
    pub min_delta: f64,
}

/// Pairwise window test: succeed iff every overlap
/// `2 eps' - |X_i - X_j|` is at least `1.5 eps'`, with `eps' = 3 (b - a) / sqrt(N)`.
pub fn steady_state_check(window: &[f64], a: f64, b: f64, n: usize) -> Result<SteadyStateVerdict> {
    if window.len() < 2 {
        return Err(Error::WindowTooShort(window.len()));
    }
    if n < 1 {
        return Err(Error::TooFewRealizations(n));
    }
    let eps_prime = 3.0 * (b - a) / (n as f64).sqrt();
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let min_delta = 2.0 * eps_prime - (hi - lo);
    Ok(SteadyStateVerdict {
        success: min_delta >= 1.5 * eps_prime,
        eps_prime,
        min_delta,
    })
}

/// Everything needed to run realizations of one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub topology: TopologyKind,
    pub boundary: Boundary,
    pub hardware: HardwareParams,
    pub policy: PolicyParams,
    pub schedule: Schedule,
    /// Per-step fidelity-floor and geometry checks.
    #[serde(default)]
    pub verify: bool,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate(&self.hardware)?;
        if self.schedule.steps < 1 {
            return Err(Error::ConfigInvalid(
                "schedule needs at least one step".into(),
            ));
        }
        if self.schedule.window < 2 || self.schedule.window > self.schedule.steps {
            return Err(Error::ConfigInvalid(format!(
                "steady-state window {} must lie in [2, steps = {}]",
                self.schedule.window, self.schedule.steps
            )));
        }
        Ok(())
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            p_gen: self.hardware.p_gen,
            p_swap: self.hardware.p_swap,
            q: self.policy.q,
            t_cut: self.policy.t_cut,
            max_swap_distance: self.policy.max_swap_distance,
        }
    }
}

/// Which nodes get estimate records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackedNodes {
    All,
    List(Vec<NodeId>),
    /// The node closest to the lattice centre.
    Representative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub node: NodeId,
    pub metric: MetricKind,
    /// Sample mean at the final step.
    pub mean: f64,
    /// Sample standard deviation at the final step.
    pub std: f64,
    /// `6 s / sqrt(N)`.
    pub band6: f64,
    pub verdict: SteadyStateVerdict,
    /// Sample means for every step, `t = 0 .. steps - 1`.
    pub series: Vec<f64>,
}

/// Options for [`Simulation::estimate`].
#[derive(Clone, Debug)]
pub struct EstimateOptions {
    pub realizations: usize,
    pub base_seed: u64,
    pub q_index: u64,
    pub tracked: TrackedNodes,
    /// On periodic lattices, report the node-averaged metric for the
    /// representative node instead of per-node samples.
    pub symmetry_average: bool,
}

/// Time series of one realization, `v[t][node]` and `k[t][node]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizationSeries {
    pub v: Vec<Vec<u32>>,
    pub k: Vec<Vec<u32>>,
}

/// A validated configuration with its lattice and bounds prepared.
#[derive(Debug)]
pub struct Simulation {
    config: ProtocolConfig,
    params: ProtocolParams,
    graph: PhysicalGraph,
    bounds: NodeBounds,
    distances: Option<Vec<Vec<u32>>>,
}

impl Simulation {
    pub fn new(config: ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let graph = PhysicalGraph::build(
            config.topology,
            config.boundary.clone(),
            config.policy.max_swap_distance,
        )?;
        let bounds = NodeBounds::new(&graph, config.policy.t_cut, config.policy.max_swap_distance)?;
        let distances = config.verify.then(|| {
            (0..graph.node_count() as NodeId)
                .map(|i| {
                    graph
                        .distances_from(i, None)
                        .into_iter()
                        .map(|d| d.map_or(u32::MAX, |d| d as u32))
                        .collect()
                })
                .collect()
        });
        Ok(Simulation {
            params: config.protocol_params(),
            config,
            graph,
            bounds,
            distances,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn graph(&self) -> &PhysicalGraph {
        &self.graph
    }

    pub fn bounds(&self) -> &NodeBounds {
        &self.bounds
    }

    pub fn representative(&self) -> NodeId {
        let dims = self.config.boundary.dims();
        let x = dims[0] / 2;
        let y = dims.get(1).map_or(0, |d| d / 2);
        self.graph.node_at(x, y)
    }

    pub fn tracked_nodes(&self, tracked: &TrackedNodes) -> Result<Vec<NodeId>> {
        let n = self.graph.node_count() as NodeId;
        match tracked {
            TrackedNodes::All => Ok((0..n).collect()),
            TrackedNodes::Representative => Ok(vec![self.representative()]),
            TrackedNodes::List(nodes) => {
                if let Some(bad) = nodes.iter().find(|&&i| i >= n) {
                    return Err(Error::ConfigInvalid(format!(
                        "tracked node {bad} out of range (lattice has {n} nodes)"
                    )));
                }
                Ok(nodes.clone())
            }
        }
    }

    /// Runs one realization, calling `observe` after every step.
    pub fn simulate(&self, seed: u64, mut observe: impl FnMut(&MetricSample)) -> Result<()> {
        let n = self.graph.node_count();
        let mut state = NetworkState::empty(n);
        let mut rng = RealizationRng::new(seed, n);
        let mut scratch = StepScratch::default();
        let mut sample = MetricSample::default();
        let mut stamp = Vec::with_capacity(n);
        for step in 0..self.config.schedule.steps {
            if step > 0 {
                advance(&mut state);
            }
            let report = protocol_step(
                &mut state,
                &self.graph,
                &self.params,
                &mut rng,
                &mut scratch,
            )?;
            if self.config.verify {
                if !report.is_balanced() {
                    return Err(Error::Invariant(format!(
                        "unbalanced step report {report:?}"
                    )));
                }
                self.verify_links(&state)?;
            }
            observe_into(&state, &mut sample, &mut stamp);
            self.bounds.check(&sample)?;
            observe(&sample);
        }
        Ok(())
    }

    fn verify_links(&self, state: &NetworkState) -> Result<()> {
        state.check_consistency()?;
        let t = state.t();
        let hw = &self.config.hardware;
        let policy = &self.config.policy;
        for link in state.links() {
            if link.m < 1 || link.m > policy.max_swap_distance {
                return Err(Error::Invariant(format!(
                    "link {link:?} has m outside [1, M]"
                )));
            }
            if link.age(t) >= policy.t_cut as u64 {
                return Err(Error::Invariant(format!(
                    "link {link:?} outlived the cutoff at t={t}"
                )));
            }
            let f = link_fidelity(hw.f_new, link.m, link.birth_sum, t, hw.coherence_time);
            if f < policy.f_min - FIDELITY_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "link {link:?} has fidelity {f} below Fmin {} at t={t}",
                    policy.f_min
                )));
            }
            if let Some(dist) = &self.distances {
                if dist[link.a.node as usize][link.b.node as usize] > link.m {
                    return Err(Error::Invariant(format!(
                        "link {link:?} spans more hops than segments"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn run_realization(&self, seed: u64) -> Result<RealizationSeries> {
        let mut series = RealizationSeries {
            v: Vec::with_capacity(self.config.schedule.steps as usize),
            k: Vec::with_capacity(self.config.schedule.steps as usize),
        };
        self.simulate(seed, |s| {
            series.v.push(s.v.clone());
            series.k.push(s.k.clone());
        })?;
        Ok(series)
    }

    /// Estimates every tracked node's metrics from `N` realizations seeded by
    /// `(base_seed, q_index, realization)`.
    pub fn estimate(&self, options: &EstimateOptions) -> Result<Vec<EstimateRecord>> {
        let n = options.realizations;
        if n < 2 {
            return Err(Error::TooFewRealizations(n));
        }
        let averaged = options.symmetry_average && self.config.boundary.is_periodic();
        let nodes = if averaged {
            vec![self.representative()]
        } else {
            self.tracked_nodes(&options.tracked)?
        };
        let units = nodes.len();
        let steps = self.config.schedule.steps as usize;
        let all_nodes = self.graph.node_count();

        let total = (0..n as u64)
            .into_par_iter()
            .try_fold(
                || Accumulator::new(steps, units),
                |mut acc, r| {
                    let seed = realization_seed(options.base_seed, options.q_index, r);
                    let mut step = 0;
                    self.simulate(seed, |sample| {
                        for metric in MetricKind::ALL {
                            let values = match metric {
                                MetricKind::V => &sample.v,
                                MetricKind::K => &sample.k,
                            };
                            for (unit, &node) in nodes.iter().enumerate() {
                                let x = if averaged {
                                    values.iter().map(|&x| x as u64).sum()
                                } else {
                                    values[node as usize] as u64
                                };
                                acc.add(step, unit, metric, x);
                            }
                        }
                        step += 1;
                    })?;
                    acc.realizations += 1;
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(|| Accumulator::new(steps, units), |a, b| Ok(a.merge(b)))?;

        let divisor = if averaged { all_nodes as f64 } else { 1.0 };
        let window = self.config.schedule.window as usize;
        let mut records = Vec::with_capacity(units * 2);
        for (unit, &node) in nodes.iter().enumerate() {
            for metric in MetricKind::ALL {
                let series: Vec<f64> = (0..steps)
                    .map(|t| total.mean(t, unit, metric) / divisor)
                    .collect();
                let std = total.std(steps - 1, unit, metric) / divisor;
                let verdict = steady_state_check(
                    &series[steps - window..],
                    0.0,
                    self.bounds.get(metric, node) as f64,
                    n,
                )?;
                records.push(EstimateRecord {
                    node,
                    metric,
                    mean: series[steps - 1],
                    std,
                    band6: 6.0 * std / (n as f64).sqrt(),
                    verdict,
                    series,
                });
            }
        }
        Ok(records)
    }
}

/// Runs one realization of `config` from the empty state.
pub fn run_realization(config: &ProtocolConfig, seed: u64) -> Result<RealizationSeries> {
    Simulation::new(config.clone())?.run_realization(seed)
}

/// Exact integer sums per (step, unit, metric).
#[derive(Clone, Debug)]
struct Accumulator {
    realizations: u64,
    units: usize,
    sum: Vec<u64>,
    sumsq: Vec<u128>,
}

impl Accumulator {
    fn new(steps: usize, units: usize) -> Self {
        let len = steps * units * 2;
        Accumulator {
            realizations: 0,
            units,
            sum: vec![0; len],
            sumsq: vec![0; len],
        }
    }

    fn slot(&self, step: usize, unit: usize, metric: MetricKind) -> usize {
        (step * self.units + unit) * 2 + metric.index()
    }

    fn add(&mut self, step: usize, unit: usize, metric: MetricKind, x: u64) {
        let i = self.slot(step, unit, metric);
        self.sum[i] += x;
        self.sumsq[i] += (x as u128) * (x as u128);
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        self.realizations += other.realizations;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(other.sumsq) {
            *a += b;
        }
        self
    }

    fn mean(&self, step: usize, unit: usize, metric: MetricKind) -> f64 {
        self.sum[self.slot(step, unit, metric)] as f64 / self.realizations as f64
    }

    /// Unbiased sample standard deviation, exact to the final division.
    fn std(&self, step: usize, unit: usize, metric: MetricKind) -> f64 {
        let i = self.slot(step, unit, metric);
        let n = self.realizations as u128;
        let s = self.sum[i] as u128;
        let scaled = n * self.sumsq[i] - s * s;
        (scaled as f64 / (n * (n - 1)) as f64).sqrt()
    }
}
