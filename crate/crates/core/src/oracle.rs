//! Exact expected metrics for tiny configurations.
//!
//! The protocol step is executed unchanged; only its random source is
//! replaced by a replaying enumerator that walks every positive-probability
//! decision path depth-first and weights each leaf with the product of its
//! choice probabilities. After every step, branches that reached the same
//! link configuration are merged.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::ProtocolConfig;
use crate::lattice::{NodeId, PhysicalGraph};
use crate::metrics::observe;
use crate::protocol::{
    advance, protocol_step, Endpoint, Link, LinkId, NetworkState, PoolSlot, ProtocolParams,
    StepRandomness, StepScratch, SwapPool,
};

pub const DEFAULT_BRANCH_BUDGET: u64 = 10_000_000;

/// A protocol configuration small enough to enumerate.
#[derive(Clone, Debug)]
pub struct TinyConfig {
    pub config: ProtocolConfig,
    /// Maximum number of step branches explored in total.
    pub budget: u64,
}

impl TinyConfig {
    pub fn new(config: ProtocolConfig) -> Self {
        TinyConfig {
            config,
            budget: DEFAULT_BRANCH_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactExpectations {
    /// Observation step.
    pub t: u64,
    pub v: Vec<f64>,
    pub k: Vec<f64>,
    /// Step branches explored.
    pub branches: u64,
    /// Total probability of the final distribution; 1 up to rounding.
    pub mass: f64,
    /// Distinct link configurations at the observation step.
    pub states: usize,
}

/// Exact `E[v_i(t)]` and `E[k_i(t)]` after the steps at times `0..=t`,
/// starting from no links.
pub fn enumerate_exact(tiny: &TinyConfig, t: u64) -> Result<ExactExpectations> {
    let config = &tiny.config;
    config.validate()?;
    let graph = PhysicalGraph::build(
        config.topology,
        config.boundary.clone(),
        config.policy.max_swap_distance,
    )?;
    let params = config.protocol_params();
    let n = graph.node_count();

    let mut scratch = StepScratch::default();
    let mut branches = 0u64;
    let mut dist: Vec<(NetworkState, f64)> = vec![(NetworkState::empty(n), 1.0)];
    for step in 0..=t {
        let mut merged: BTreeMap<StateKey, f64> = BTreeMap::new();
        for (state, p) in &dist {
            let mut state = state.clone();
            if step > 0 {
                advance(&mut state);
            }
            for (next, w) in expand(
                &state,
                &graph,
                &params,
                &mut scratch,
                &mut branches,
                tiny.budget,
            )? {
                *merged.entry(StateKey::of(&next)).or_insert(0.0) += p * w;
            }
        }
        dist = merged
            .into_iter()
            .map(|(key, p)| (key.rebuild(n, step), p))
            .collect();
    }

    let mut v = vec![0.0; n];
    let mut k = vec![0.0; n];
    let mut mass = 0.0;
    for (state, p) in &dist {
        let sample = observe(state);
        for i in 0..n {
            v[i] += p * sample.v[i] as f64;
            k[i] += p * sample.k[i] as f64;
        }
        mass += p;
    }
    Ok(ExactExpectations {
        t,
        v,
        k,
        branches,
        mass,
        states: dist.len(),
    })
}

/// Every outcome of one protocol step from `state`, with its probability.
pub fn expand(
    state: &NetworkState,
    graph: &PhysicalGraph,
    params: &ProtocolParams,
    scratch: &mut StepScratch,
    branches: &mut u64,
    budget: u64,
) -> Result<Vec<(NetworkState, f64)>> {
    let mut replay = Replay::default();
    let mut out = Vec::new();
    loop {
        *branches += 1;
        if *branches > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        replay.pos = 0;
        replay.weight = 1.0;
        let mut next = state.clone();
        protocol_step(&mut next, graph, params, &mut replay, scratch)?;
        out.push((next, replay.weight));
        replay.path.truncate(replay.pos);
        if !replay.backtrack() {
            return Ok(out);
        }
    }
}

/// Replays a recorded prefix of choices and extends it with first choices.
#[derive(Debug, Default)]
struct Replay {
    /// `(choice, option count)` per decision.
    path: Vec<(usize, usize)>,
    pos: usize,
    weight: f64,
}

impl Replay {
    fn pick(&mut self, options: usize) -> usize {
        debug_assert!(options > 0);
        let choice = if self.pos < self.path.len() {
            self.path[self.pos].0
        } else {
            self.path.push((0, options));
            0
        };
        self.pos += 1;
        choice
    }

    /// Advances to the next unexplored path; false when none remain.
    fn backtrack(&mut self) -> bool {
        while let Some(last) = self.path.last_mut() {
            if last.0 + 1 < last.1 {
                last.0 += 1;
                return true;
            }
            self.path.pop();
        }
        false
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        let outcome = self.pick(2) == 0;
        self.weight *= if outcome { p } else { 1.0 - p };
        outcome
    }
}

impl StepRandomness for Replay {
    fn generation(&mut self, _channel: usize, p: f64) -> bool {
        self.bernoulli(p)
    }

    fn coin(&mut self, _node: NodeId, p: f64) -> bool {
        self.bernoulli(p)
    }

    /// Branches over unordered pairs `{A, B}`, each weighted by
    /// `P(A then B) + P(B then A)`.
    fn draw_pair(&mut self, _node: NodeId, pool: &SwapPool) -> (PoolSlot, PoolSlot) {
        let pairs = unordered_pairs(pool);
        let (a, b, w) = pairs[self.pick(pairs.len())];
        self.weight *= w;
        (a, b)
    }
}

/// All unordered differently-oriented pairs in `pool` with their draw
/// probabilities under "first uniform, second uniform among other orientations".
pub fn unordered_pairs(pool: &SwapPool) -> Vec<(PoolSlot, PoolSlot, f64)> {
    let n = pool.len() as f64;
    let buckets = pool.buckets();
    let mut pairs = Vec::new();
    for b1 in 0..buckets.len() {
        for b2 in b1 + 1..buckets.len() {
            if buckets[b1].is_empty() || buckets[b2].is_empty() {
                continue;
            }
            let w =
                (1.0 / (n - buckets[b1].len() as f64) + 1.0 / (n - buckets[b2].len() as f64)) / n;
            for p1 in 0..buckets[b1].len() {
                for p2 in 0..buckets[b2].len() {
                    pairs.push((
                        PoolSlot {
                            bucket: b1,
                            pos: p1,
                        },
                        PoolSlot {
                            bucket: b2,
                            pos: p2,
                        },
                        w,
                    ));
                }
            }
        }
    }
    pairs
}

/// Id-free canonical form of a state's links.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct StateKey(Vec<(Endpoint, Endpoint, u32, u64, u64)>);

impl StateKey {
    fn of(state: &NetworkState) -> Self {
        let mut links: Vec<_> = state
            .links()
            .iter()
            .map(|l| {
                let (a, b) = if l.a <= l.b { (l.a, l.b) } else { (l.b, l.a) };
                (a, b, l.m, l.birth_min, l.birth_sum)
            })
            .collect();
        links.sort_unstable();
        StateKey(links)
    }

    fn rebuild(self, node_count: usize, t: u64) -> NetworkState {
        NetworkState::from_links(
            node_count,
            t,
            self.0
                .into_iter()
                .map(|(a, b, m, birth_min, birth_sum)| Link {
                    id: LinkId(0),
                    a,
                    b,
                    m,
                    birth_min,
                    birth_sum,
                }),
        )
    }
}
