#![allow(dead_code)]

use cdsim::estimation::{
    steady_state_check, EstimateOptions, EstimateRecord, Schedule, Simulation, TrackedNodes,
};
use cdsim::oracle::{enumerate_exact, TinyConfig};
use cdsim::{Boundary, HardwareParams, MetricKind, PolicyParams, ProtocolConfig, TopologyKind};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct Case {
    pub name: &'static str,
    pub topology: TopologyKind,
    pub boundary: Boundary,
    pub p_gen: f64,
    pub p_swap: f64,
    pub q: f64,
    pub t_cut: u32,
    pub max_swap_distance: u32,
    pub steps: u32,
}

impl Case {
    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig {
            topology: self.topology,
            boundary: self.boundary.clone(),
            hardware: HardwareParams {
                p_gen: self.p_gen,
                p_swap: self.p_swap,
                coherence_time: 1000.0,
                f_new: 1.0,
            },
            policy: PolicyParams {
                t_cut: self.t_cut,
                max_swap_distance: self.max_swap_distance,
                f_min: 0.5,
                q: self.q,
            },
            schedule: Schedule {
                steps: self.steps,
                window: 2,
            },
            verify: true,
        }
    }
}

/// Tiny networks whose step distribution can be enumerated exactly.
pub fn tiny_cases() -> Vec<Case> {
    use TopologyKind::*;
    let finite = |d: &[usize]| Boundary::Finite(d.to_vec());
    vec![
        Case {
            name: "pair, lossy generation",
            topology: Chain,
            boundary: finite(&[2]),
            p_gen: 0.6,
            p_swap: 1.0,
            q: 0.5,
            t_cut: 2,
            max_swap_distance: 2,
            steps: 4,
        },
        Case {
            name: "three-node chain",
            topology: Chain,
            boundary: finite(&[3]),
            p_gen: 0.7,
            p_swap: 0.8,
            q: 0.6,
            t_cut: 2,
            max_swap_distance: 2,
            steps: 4,
        },
        Case {
            name: "three-node chain, M = 1",
            topology: Chain,
            boundary: finite(&[3]),
            p_gen: 0.9,
            p_swap: 1.0,
            q: 0.7,
            t_cut: 2,
            max_swap_distance: 1,
            steps: 3,
        },
        Case {
            name: "four-node chain",
            topology: Chain,
            boundary: finite(&[4]),
            p_gen: 0.8,
            p_swap: 0.75,
            q: 0.5,
            t_cut: 2,
            max_swap_distance: 3,
            steps: 3,
        },
        Case {
            name: "four-node ring",
            topology: Chain,
            boundary: Boundary::Periodic(vec![4]),
            p_gen: 0.7,
            p_swap: 0.9,
            q: 0.4,
            t_cut: 1,
            max_swap_distance: 1,
            steps: 3,
        },
        Case {
            name: "2x2 square",
            topology: Square,
            boundary: finite(&[2, 2]),
            p_gen: 0.8,
            p_swap: 0.7,
            q: 0.6,
            t_cut: 1,
            max_swap_distance: 3,
            steps: 3,
        },
        Case {
            name: "2x2 triangular",
            topology: Triangular,
            boundary: finite(&[2, 2]),
            p_gen: 0.7,
            p_swap: 0.8,
            q: 0.5,
            t_cut: 1,
            max_swap_distance: 2,
            steps: 2,
        },
    ]
}

pub fn estimate(
    config: &ProtocolConfig,
    n: usize,
    seed: u64,
    tracked: TrackedNodes,
) -> Vec<EstimateRecord> {
    Simulation::new(config.clone())
        .unwrap()
        .estimate(&EstimateOptions {
            realizations: n,
            base_seed: seed,
            q_index: 0,
            tracked,
            symmetry_average: false,
        })
        .unwrap()
}

/// Largest `|simulated - exact|` in units of `6 s / sqrt(N)`, over every node
/// and metric at the final step. Deterministic entries (zero spread) must match
/// to rounding.
pub fn oracle_discrepancy(case: &Case, n: usize, seed: u64) -> f64 {
    let config = case.config();
    let exact = enumerate_exact(&TinyConfig::new(config.clone()), case.steps as u64 - 1).unwrap();
    let records = estimate(&config, n, seed, TrackedNodes::All);
    let mut worst: f64 = 0.0;
    for r in &records {
        let e = match r.metric {
            MetricKind::V => exact.v[r.node as usize],
            MetricKind::K => exact.k[r.node as usize],
        };
        let diff = (r.mean - e).abs();
        let ratio = if r.band6 > 0.0 {
            diff / r.band6
        } else if diff < 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
    }
    worst
}

/// Mean of `n` draws of a Binomial(`b`, 1/2) count.
fn binomial_mean(rng: &mut Xoshiro256PlusPlus, b: u32, n: usize) -> f64 {
    let mask = (1u64 << b) - 1;
    let total: u64 = (0..n)
        .map(|_| (rng.gen::<u64>() & mask).count_ones() as u64)
        .sum();
    total as f64 / n as f64
}

/// Fraction of `trials` windows of `w` Binomial(`b`, 1/2) sample means
/// (`N = 10^4`) that pass the steady-state check.
pub fn binomial_pass_rate(b: u32, w: usize, trials: usize, seed: u64) -> f64 {
    let n = 10_000;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let passed = (0..trials)
        .filter(|_| {
            let window: Vec<f64> = (0..w).map(|_| binomial_mean(&mut rng, b, n)).collect();
            steady_state_check(&window, 0.0, b as f64, n)
                .unwrap()
                .success
        })
        .count();
    passed as f64 / trials as f64
}
