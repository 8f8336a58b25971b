//! One time step of the continuous-distribution protocol:
//!
//! 1. discard links whose age reached the cutoff,
//! 2. herald one new link per physical channel with probability `p_gen`,
//! 3. every node pairs differently-oriented links and attempts swaps, all
//!    against the same post-generation snapshot,
//! 4. resolve the recorded junctions into long links globally and discard
//!    links fused from more than `M` elementary links.
//!
//! Randomness enters only through [`StepRandomness`], so the same step code
//! drives both Monte Carlo realizations and exact enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{NodeId, Orientation, PhysicalGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub node: NodeId,
    pub orientation: Orientation,
}

/// An entangled link. Fidelity is not stored; it follows from `m`,
/// `birth_sum` and the observation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub a: Endpoint,
    pub b: Endpoint,
    /// Number of elementary links fused into this one.
    pub m: u32,
    /// Birth time of the oldest constituent segment; the link's age counts from here.
    pub birth_min: u64,
    pub birth_sum: u64,
}

impl Link {
    pub fn age(&self, t: u64) -> u64 {
        t - self.birth_min
    }

    /// Endpoint of this link at `node`.
    pub fn end_at(&self, node: NodeId) -> Option<Endpoint> {
        if self.a.node == node {
            Some(self.a)
        } else if self.b.node == node {
            Some(self.b)
        } else {
            None
        }
    }

    pub fn counterpart(&self, node: NodeId) -> NodeId {
        if self.a.node == node {
            self.b.node
        } else {
            self.a.node
        }
    }

    fn side_at(&self, node: NodeId) -> usize {
        if self.a.node == node {
            0
        } else {
            1
        }
    }

    fn end(&self, side: usize) -> Endpoint {
        if side == 0 {
            self.a
        } else {
            self.b
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub p_gen: f64,
    pub p_swap: f64,
    pub q: f64,
    pub t_cut: u32,
    pub max_swap_distance: u32,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("pgen", self.p_gen), ("pswap", self.p_swap), ("q", self.q)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be a probability in [0, 1]",
                });
            }
        }
        if self.t_cut < 1 {
            return Err(Error::InvalidParameter {
                name: "tcut",
                value: self.t_cut as f64,
                reason: "must be at least 1",
            });
        }
        if self.max_swap_distance < 1 {
            return Err(Error::InvalidParameter {
                name: "M",
                value: self.max_swap_distance as f64,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// One entry of a node's incidence list.
#[derive(Clone, Copy, Debug)]
struct Incident {
    link: u32,
    other: NodeId,
    orientation: Orientation,
}

/// Time counter plus live links, with a per-node incidence index.
#[derive(Clone, Debug)]
pub struct NetworkState {
    t: u64,
    links: Vec<Link>,
    incidence: Vec<Vec<Incident>>,
    next_id: u64,
}

impl NetworkState {
    /// The no-links state at `t = 0`.
    pub fn empty(node_count: usize) -> Self {
        NetworkState {
            t: 0,
            links: Vec::new(),
            incidence: vec![Vec::new(); node_count],
            next_id: 0,
        }
    }

    /// Builds a state from explicit links, assigning fresh ids.
    pub fn from_links(node_count: usize, t: u64, links: impl IntoIterator<Item = Link>) -> Self {
        let mut state = NetworkState::empty(node_count);
        state.t = t;
        for mut link in links {
            link.id = state.fresh_id();
            state.links.push(link);
        }
        state.reindex();
        state
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.incidence.len()
    }

    /// Links incident to `node`.
    pub fn incident(&self, node: NodeId) -> impl Iterator<Item = &Link> {
        self.incidence[node as usize]
            .iter()
            .map(move |e| &self.links[e.link as usize])
    }

    /// Far endpoint node of every link at `node`, with multiplicity.
    pub fn counterparts(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.incidence[node as usize].iter().map(|e| e.other)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.incidence[node as usize].len()
    }

    fn fresh_id(&mut self) -> LinkId {
        let id = LinkId(self.next_id);
        self.next_id += 1;
        id
    }

    fn reindex(&mut self) {
        for list in &mut self.incidence {
            list.clear();
        }
        for (idx, link) in self.links.iter().enumerate() {
            let link_idx = idx as u32;
            self.incidence[link.a.node as usize].push(Incident {
                link: link_idx,
                other: link.b.node,
                orientation: link.a.orientation,
            });
            self.incidence[link.b.node as usize].push(Incident {
                link: link_idx,
                other: link.a.node,
                orientation: link.b.orientation,
            });
        }
    }

    pub fn check_consistency(&self) -> Result<()> {
        let mut expected = vec![0usize; self.incidence.len()];
        for link in &self.links {
            if link.a.node == link.b.node {
                return Err(Error::Invariant(format!(
                    "link {:?} is a self-loop",
                    link.id
                )));
            }
            expected[link.a.node as usize] += 1;
            expected[link.b.node as usize] += 1;
        }
        for (node, list) in self.incidence.iter().enumerate() {
            if list.len() != expected[node]
                || list.iter().any(|e| {
                    let link = &self.links[e.link as usize];
                    link.end_at(node as NodeId).map(|end| end.orientation) != Some(e.orientation)
                        || link.counterpart(node as NodeId) != e.other
                })
            {
                return Err(Error::Invariant(format!(
                    "incidence of node {node} is stale"
                )));
            }
        }
        Ok(())
    }
}

/// Location of a link inside a [`SwapPool`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PoolSlot {
    pub bucket: usize,
    pub pos: usize,
}

/// Links at one node still available for pairing, bucketed by the local
/// orientation of their endpoint.
#[derive(Clone, Debug, Default)]
pub struct SwapPool {
    buckets: [Vec<u32>; Orientation::COUNT],
    len: usize,
    occupied: usize,
}

impl SwapPool {
    pub fn clear(&mut self) {
        for b in &mut self.buckets {
            b.clear();
        }
        self.len = 0;
        self.occupied = 0;
    }

    pub fn push(&mut self, orientation: Orientation, link: u32) {
        let bucket = &mut self.buckets[orientation.index()];
        if bucket.is_empty() {
            self.occupied += 1;
        }
        bucket.push(link);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bucket_len(&self, bucket: usize) -> usize {
        self.buckets[bucket].len()
    }

    pub fn buckets(&self) -> &[Vec<u32>; Orientation::COUNT] {
        &self.buckets
    }

    /// A valid pair exists iff links with at least two orientations remain.
    pub fn can_pair(&self) -> bool {
        self.occupied >= 2
    }

    pub fn get(&self, slot: PoolSlot) -> u32 {
        self.buckets[slot.bucket][slot.pos]
    }

    /// The `index`-th link in bucket order, skipping bucket `skip`.
    pub fn slot_at(&self, mut index: usize, skip: Option<usize>) -> PoolSlot {
        for (bucket, links) in self.buckets.iter().enumerate() {
            if Some(bucket) == skip {
                continue;
            }
            if index < links.len() {
                return PoolSlot { bucket, pos: index };
            }
            index -= links.len();
        }
        panic!("pool index out of range");
    }

    /// Removes two slots from different buckets.
    fn take_pair(&mut self, a: PoolSlot, b: PoolSlot) -> (u32, u32) {
        debug_assert_ne!(a.bucket, b.bucket);
        let la = self.take(a);
        let lb = self.take(b);
        (la, lb)
    }

    fn take(&mut self, slot: PoolSlot) -> u32 {
        let bucket = &mut self.buckets[slot.bucket];
        let link = bucket.swap_remove(slot.pos);
        if bucket.is_empty() {
            self.occupied -= 1;
        }
        self.len -= 1;
        link
    }

    /// Moves everything left in the pool into `out`.
    fn drain_into(&mut self, out: &mut Vec<u32>) {
        for bucket in &mut self.buckets {
            out.append(bucket);
        }
        self.len = 0;
        self.occupied = 0;
    }
}

/// Source of every random decision in a protocol step.
pub trait StepRandomness {
    /// Heralding outcome on channel `channel` (canonical channel order).
    fn generation(&mut self, channel: usize, p: f64) -> bool;

    /// A Bernoulli trial taken by `node`.
    fn coin(&mut self, node: NodeId, p: f64) -> bool;

    /// Draws a first link uniformly from the pool and a second uniformly
    /// among pool links with a different orientation. The pool holds at
    /// least two orientations.
    fn draw_pair(&mut self, node: NodeId, pool: &SwapPool) -> (PoolSlot, PoolSlot);
}

/// What one node did during the swap phase. Entries are indices into the
/// state's link list at the time of selection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JunctionOutcome {
    pub junctions: Vec<(u32, u32)>,
    pub destroyed: Vec<u32>,
    pub untouched: Vec<u32>,
}

impl JunctionOutcome {
    pub fn clear(&mut self) {
        self.junctions.clear();
        self.destroyed.clear();
        self.untouched.clear();
    }

    pub fn link_count(&self) -> usize {
        2 * self.junctions.len() + self.destroyed.len() + self.untouched.len()
    }
}

/// Per-step bookkeeping. Every link present after generation ends up in
/// exactly one of `untouched`, `fused`, `removed_failed`, `removed_cycle`
/// or `removed_self_loop`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    pub removed_cutoff: usize,
    pub generated: usize,
    pub after_generation: usize,
    pub junctions: usize,
    pub untouched: usize,
    pub fused: usize,
    pub removed_failed: usize,
    pub removed_cycle: usize,
    pub removed_self_loop: usize,
    /// Resolved links produced from fused components.
    pub resolved: usize,
    /// Resolved links discarded for exceeding the maximum swap distance.
    pub removed_distance: usize,
}

impl StepReport {
    pub fn is_balanced(&self) -> bool {
        self.untouched
            + self.fused
            + self.removed_failed
            + self.removed_cycle
            + self.removed_self_loop
            == self.after_generation
    }
}

/// Step 1: drop links whose age has reached `t_cut`.
pub fn apply_cutoff(state: &mut NetworkState, t_cut: u32) -> usize {
    let removed = drop_expired(state, t_cut);
    if removed > 0 {
        state.reindex();
    }
    removed
}

fn drop_expired(state: &mut NetworkState, t_cut: u32) -> usize {
    let t = state.t;
    let before = state.links.len();
    state.links.retain(|l| l.age(t) < t_cut as u64);
    before - state.links.len()
}

/// Step 2: one heralding attempt per channel, in canonical channel order.
pub fn generate_links<R: StepRandomness>(
    state: &mut NetworkState,
    graph: &PhysicalGraph,
    p_gen: f64,
    rng: &mut R,
) -> usize {
    let generated = push_generated(state, graph, p_gen, rng);
    if generated > 0 {
        state.reindex();
    }
    generated
}

fn push_generated<R: StepRandomness>(
    state: &mut NetworkState,
    graph: &PhysicalGraph,
    p_gen: f64,
    rng: &mut R,
) -> usize {
    let t = state.t;
    let mut generated = 0;
    for (index, channel) in graph.channels().iter().enumerate() {
        if rng.generation(index, p_gen) {
            let id = state.fresh_id();
            state.links.push(Link {
                id,
                a: Endpoint {
                    node: channel.a,
                    orientation: channel.a_orientation,
                },
                b: Endpoint {
                    node: channel.b,
                    orientation: channel.b_orientation,
                },
                m: 1,
                birth_min: t,
                birth_sum: t,
            });
            generated += 1;
        }
    }
    generated
}

/// Fills `pool` with the links incident to `node`, keyed by local orientation.
pub fn fill_pool(state: &NetworkState, node: NodeId, pool: &mut SwapPool) {
    pool.clear();
    for e in &state.incidence[node as usize] {
        pool.push(e.orientation, e.link);
    }
}

/// Step 3 at one node: repeatedly pair a random link with a random
/// differently-oriented one, attempt with probability `q`, succeed with
/// probability `p_swap`. Pairs that are not attempted are set aside.
pub fn local_swap_selection<R: StepRandomness>(
    node: NodeId,
    pool: &mut SwapPool,
    q: f64,
    p_swap: f64,
    rng: &mut R,
    out: &mut JunctionOutcome,
) {
    out.clear();
    while pool.can_pair() {
        let (first, second) = rng.draw_pair(node, pool);
        debug_assert_ne!(first.bucket, second.bucket, "orientation safety");
        let (a, b) = pool.take_pair(first, second);
        if rng.coin(node, q) {
            if rng.coin(node, p_swap) {
                out.junctions.push((a, b));
            } else {
                out.destroyed.push(a);
                out.destroyed.push(b);
            }
        } else {
            out.untouched.push(a);
            out.untouched.push(b);
        }
    }
    pool.drain_into(&mut out.untouched);
}

const NO_PARTNER: (u32, u8) = (u32::MAX, u8::MAX);

/// Reusable buffers for [`resolve_swaps`].
#[derive(Debug, Default)]
pub struct ResolveScratch {
    partner: Vec<[(u32, u8); 2]>,
    destroyed: Vec<bool>,
    visited: Vec<bool>,
    stack: Vec<u32>,
    members: Vec<u32>,
    next: Vec<Link>,
}

/// Step 4: fuse junction chains into long links, drop components touched by a
/// failed swap, closed loops and self-loops, then drop links with `m > M`.
///
/// `outcomes` is indexed by node and must come from one snapshot of `state`.
pub fn resolve_swaps(
    state: &mut NetworkState,
    outcomes: &[JunctionOutcome],
    max_swap_distance: u32,
    scratch: &mut ResolveScratch,
    report: &mut StepReport,
) -> Result<()> {
    let n = state.links.len();
    scratch.partner.clear();
    scratch.partner.resize(n, [NO_PARTNER; 2]);
    scratch.destroyed.clear();
    scratch.destroyed.resize(n, false);
    scratch.visited.clear();
    scratch.visited.resize(n, false);

    for (node, outcome) in outcomes.iter().enumerate() {
        let node = node as NodeId;
        for &(x, y) in &outcome.junctions {
            let sx = state.links[x as usize].side_at(node);
            let sy = state.links[y as usize].side_at(node);
            if scratch.partner[x as usize][sx] != NO_PARTNER
                || scratch.partner[y as usize][sy] != NO_PARTNER
            {
                return Err(Error::Invariant(format!(
                    "link junctioned twice at node {node}"
                )));
            }
            scratch.partner[x as usize][sx] = (y, sy as u8);
            scratch.partner[y as usize][sy] = (x, sx as u8);
        }
        for &x in &outcome.destroyed {
            scratch.destroyed[x as usize] = true;
        }
    }
    report.junctions = outcomes.iter().map(|o| o.junctions.len()).sum();

    scratch.next.clear();
    for start in 0..n {
        if scratch.visited[start] {
            continue;
        }
        let [p0, p1] = scratch.partner[start];
        if p0 == NO_PARTNER && p1 == NO_PARTNER {
            scratch.visited[start] = true;
            if scratch.destroyed[start] {
                report.removed_failed += 1;
            } else {
                report.untouched += 1;
                scratch.next.push(state.links[start]);
            }
            continue;
        }

        // Collect the component through junction edges.
        scratch.members.clear();
        scratch.stack.clear();
        scratch.stack.push(start as u32);
        scratch.visited[start] = true;
        while let Some(l) = scratch.stack.pop() {
            scratch.members.push(l);
            for (p, _) in scratch.partner[l as usize] {
                if p != u32::MAX && !scratch.visited[p as usize] {
                    scratch.visited[p as usize] = true;
                    scratch.stack.push(p);
                }
            }
        }
        let size = scratch.members.len();

        if scratch
            .members
            .iter()
            .any(|&l| scratch.destroyed[l as usize])
        {
            report.removed_failed += size;
            continue;
        }

        // A path has a member with a free side; a cycle has none.
        let free = scratch.members.iter().find_map(|&l| {
            scratch.partner[l as usize]
                .iter()
                .position(|&p| p == NO_PARTNER)
                .map(|side| (l, side))
        });
        let Some((first, first_side)) = free else {
            report.removed_cycle += size;
            continue;
        };

        let head = state.links[first as usize].end(first_side);
        let (mut cur, mut enter) = (first, first_side);
        let mut m = 0u32;
        let mut birth_min = u64::MAX;
        let mut birth_sum = 0u64;
        let mut walked = 0usize;
        let tail = loop {
            let link = &state.links[cur as usize];
            m += link.m;
            birth_min = birth_min.min(link.birth_min);
            birth_sum += link.birth_sum;
            walked += 1;
            let out = 1 - enter;
            let (next, next_side) = scratch.partner[cur as usize][out];
            if next == u32::MAX {
                break link.end(out);
            }
            if walked > size {
                return Err(Error::Invariant("junction path does not terminate".into()));
            }
            cur = next;
            enter = next_side as usize;
        };
        if walked != size {
            return Err(Error::Invariant(format!(
                "junction component of {size} links resolved through {walked}"
            )));
        }

        if head.node == tail.node {
            report.removed_self_loop += size;
            continue;
        }
        report.fused += size;
        report.resolved += 1;
        let id = state.fresh_id();
        scratch.next.push(Link {
            id,
            a: head,
            b: tail,
            m,
            birth_min,
            birth_sum,
        });
    }

    let before = scratch.next.len();
    scratch.next.retain(|l| l.m <= max_swap_distance);
    report.removed_distance = before - scratch.next.len();

    std::mem::swap(&mut state.links, &mut scratch.next);
    state.reindex();
    Ok(())
}

/// Reusable per-step buffers.
#[derive(Debug, Default)]
pub struct StepScratch {
    pool: SwapPool,
    outcomes: Vec<JunctionOutcome>,
    resolve: ResolveScratch,
}

/// Runs steps 1–4 at the state's current time and leaves the state ready for
/// observation. The caller advances time with [`advance`] after observing.
pub fn protocol_step<R: StepRandomness>(
    state: &mut NetworkState,
    graph: &PhysicalGraph,
    params: &ProtocolParams,
    rng: &mut R,
    scratch: &mut StepScratch,
) -> Result<StepReport> {
    let mut report = StepReport {
        removed_cutoff: drop_expired(state, params.t_cut),
        generated: push_generated(state, graph, params.p_gen, rng),
        ..StepReport::default()
    };
    state.reindex();
    report.after_generation = state.links.len();

    let nodes = graph.node_count();
    scratch
        .outcomes
        .resize_with(nodes, JunctionOutcome::default);
    for node in 0..nodes as NodeId {
        fill_pool(state, node, &mut scratch.pool);
        local_swap_selection(
            node,
            &mut scratch.pool,
            params.q,
            params.p_swap,
            rng,
            &mut scratch.outcomes[node as usize],
        );
        debug_assert_eq!(
            scratch.outcomes[node as usize].link_count(),
            state.degree(node)
        );
    }

    resolve_swaps(
        state,
        &scratch.outcomes,
        params.max_swap_distance,
        &mut scratch.resolve,
        &mut report,
    )?;
    debug_assert!(report.is_balanced());
    debug_assert!(state.check_consistency().is_ok());
    Ok(report)
}

/// Moves the state to the next time step.
pub fn advance(state: &mut NetworkState) {
    state.t += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, TopologyKind};
    use crate::rng::RealizationRng;

    /// Deterministic randomness: coins answer from a fixed rule and pair draws
    /// take the first slot of the first two occupied buckets.
    struct Scripted {
        coins: Vec<bool>,
        next: usize,
    }

    impl StepRandomness for Scripted {
        fn generation(&mut self, _: usize, p: f64) -> bool {
            p >= 1.0
        }
        fn coin(&mut self, _: NodeId, p: f64) -> bool {
            if p <= 0.0 {
                return false;
            }
            if p >= 1.0 {
                return true;
            }
            let c = self.coins[self.next % self.coins.len()];
            self.next += 1;
            c
        }
        fn draw_pair(&mut self, _: NodeId, pool: &SwapPool) -> (PoolSlot, PoolSlot) {
            let a = pool.slot_at(0, None);
            let b = pool.slot_at(0, Some(a.bucket));
            (a, b)
        }
    }

    fn always() -> Scripted {
        Scripted {
            coins: vec![true],
            next: 0,
        }
    }

    fn ep(node: NodeId, orientation: Orientation) -> Endpoint {
        Endpoint { node, orientation }
    }

    fn link(a: Endpoint, b: Endpoint, m: u32, birth: u64) -> Link {
        Link {
            id: LinkId(0),
            a,
            b,
            m,
            birth_min: birth,
            birth_sum: birth * m as u64,
        }
    }

    use Orientation::{East, West};

    #[test]
    fn cutoff_removes_links_at_age_tcut() {
        let mut state = NetworkState::from_links(
            3,
            5,
            [
                link(ep(0, East), ep(1, West), 1, 2),
                link(ep(1, East), ep(2, West), 1, 3),
            ],
        );
        assert_eq!(apply_cutoff(&mut state, 3), 1);
        assert_eq!(state.links().len(), 1);
        assert_eq!(state.links()[0].birth_min, 3);
        let mut empty = NetworkState::empty(3);
        assert_eq!(apply_cutoff(&mut empty, 1), 0);
        assert!(empty.links().is_empty());
    }

    #[test]
    fn generation_counts() {
        let g =
            PhysicalGraph::build(TopologyKind::Square, Boundary::Periodic(vec![6, 6]), 2).unwrap();
        let mut state = NetworkState::empty(g.node_count());
        let mut rng = RealizationRng::new(1, g.node_count());
        assert_eq!(generate_links(&mut state, &g, 1.0, &mut rng), 72);
        let mut state = NetworkState::empty(g.node_count());
        assert_eq!(generate_links(&mut state, &g, 0.0, &mut rng), 0);
        state.check_consistency().unwrap();
    }

    #[test]
    fn generation_rate_within_binomial_band() {
        let g = PhysicalGraph::build(TopologyKind::Chain, Boundary::Finite(vec![2]), 1).unwrap();
        let mut rng = RealizationRng::new(7, 2);
        let steps = 10_000;
        let mut total = 0;
        for _ in 0..steps {
            let mut state = NetworkState::empty(2);
            total += generate_links(&mut state, &g, 0.5, &mut rng);
        }
        let rate = total as f64 / steps as f64;
        assert!((rate - 0.5).abs() <= 0.015, "rate {rate}");
    }

    fn pool_of(orientations: &[Orientation]) -> SwapPool {
        let mut pool = SwapPool::default();
        for (i, &o) in orientations.iter().enumerate() {
            pool.push(o, i as u32);
        }
        pool
    }

    #[test]
    fn selection_without_attempts_leaves_everything_untouched() {
        let mut pool = pool_of(&[West, East, West, East, East]);
        let mut out = JunctionOutcome::default();
        let mut rng = RealizationRng::new(3, 1);
        local_swap_selection(0, &mut pool, 0.0, 1.0, &mut rng, &mut out);
        assert!(out.junctions.is_empty() && out.destroyed.is_empty());
        let mut untouched = out.untouched.clone();
        untouched.sort();
        assert_eq!(untouched, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn selection_needs_two_orientations() {
        let mut pool = pool_of(&[West, West, West]);
        let mut out = JunctionOutcome::default();
        local_swap_selection(0, &mut pool, 1.0, 1.0, &mut always(), &mut out);
        assert!(out.junctions.is_empty());
        assert_eq!(out.untouched.len(), 3);
    }

    #[test]
    fn forced_pairing_makes_one_junction() {
        let mut pool = pool_of(&[West, East]);
        let mut out = JunctionOutcome::default();
        let mut rng = RealizationRng::new(9, 1);
        local_swap_selection(0, &mut pool, 1.0, 1.0, &mut rng, &mut out);
        assert_eq!(out.junctions.len(), 1);
        assert!(out.destroyed.is_empty() && out.untouched.is_empty());
    }

    #[test]
    fn failed_swaps_destroy_both_links() {
        let mut pool = pool_of(&[West, East, East]);
        let mut out = JunctionOutcome::default();
        let mut rng = RealizationRng::new(11, 1);
        local_swap_selection(0, &mut pool, 1.0, 0.0, &mut rng, &mut out);
        assert_eq!(out.destroyed.len(), 2);
        assert_eq!(out.untouched.len(), 1);
    }

    fn outcomes_with(
        node_count: usize,
        entries: &[(usize, JunctionOutcome)],
    ) -> Vec<JunctionOutcome> {
        let mut outcomes = vec![JunctionOutcome::default(); node_count];
        for (node, o) in entries {
            outcomes[*node] = o.clone();
        }
        outcomes
    }

    fn resolve(state: &mut NetworkState, outcomes: &[JunctionOutcome], m: u32) -> StepReport {
        let mut report = StepReport {
            after_generation: state.links().len(),
            ..StepReport::default()
        };
        resolve_swaps(
            state,
            outcomes,
            m,
            &mut ResolveScratch::default(),
            &mut report,
        )
        .unwrap();
        assert!(report.is_balanced());
        report
    }

    #[test]
    fn two_segments_fuse_within_distance() {
        let mut state = NetworkState::from_links(
            3,
            4,
            [
                link(ep(0, East), ep(1, West), 1, 2),
                link(ep(1, East), ep(2, West), 1, 4),
            ],
        );
        let junction = JunctionOutcome {
            junctions: vec![(0, 1)],
            ..Default::default()
        };
        let report = resolve(&mut state, &outcomes_with(3, &[(1, junction)]), 2);
        assert_eq!(report.resolved, 1);
        let fused = state.links()[0];
        assert_eq!((fused.a, fused.b), (ep(0, East), ep(2, West)));
        assert_eq!((fused.m, fused.birth_min, fused.birth_sum), (2, 2, 6));
        assert_eq!(state.degree(1), 0);
    }

    #[test]
    fn fused_link_beyond_distance_is_dropped() {
        let mut state = NetworkState::from_links(
            4,
            4,
            [
                link(ep(0, East), ep(2, West), 2, 3),
                link(ep(2, East), ep(3, West), 1, 4),
            ],
        );
        let junction = JunctionOutcome {
            junctions: vec![(0, 1)],
            ..Default::default()
        };
        let report = resolve(&mut state, &outcomes_with(4, &[(2, junction)]), 2);
        assert_eq!(report.removed_distance, 1);
        assert!(state.links().is_empty());
    }

    #[test]
    fn failed_swap_takes_down_the_connected_chain() {
        // A-B junction at node 1 succeeds, B destroyed at node 2.
        let mut state = NetworkState::from_links(
            4,
            1,
            [
                link(ep(0, East), ep(1, West), 1, 1),
                link(ep(1, East), ep(2, West), 1, 1),
                link(ep(2, East), ep(3, West), 1, 1),
            ],
        );
        let at1 = JunctionOutcome {
            junctions: vec![(0, 1)],
            ..Default::default()
        };
        let at2 = JunctionOutcome {
            destroyed: vec![1, 2],
            ..Default::default()
        };
        let report = resolve(&mut state, &outcomes_with(4, &[(1, at1), (2, at2)]), 3);
        assert_eq!(report.removed_failed, 3);
        assert!(state.links().is_empty());
    }

    #[test]
    fn closed_loop_is_discarded() {
        // two parallel links between nodes 0 and 1 swapped at both ends
        let mut state = NetworkState::from_links(
            2,
            0,
            [
                link(ep(0, East), ep(1, West), 1, 0),
                link(ep(0, Orientation::North), ep(1, Orientation::South), 1, 0),
            ],
        );
        let j = JunctionOutcome {
            junctions: vec![(0, 1)],
            ..Default::default()
        };
        let report = resolve(&mut state, &outcomes_with(2, &[(0, j.clone()), (1, j)]), 4);
        assert_eq!(report.removed_cycle, 2);
        assert!(state.links().is_empty());
    }

    #[test]
    fn path_returning_to_its_start_node_is_discarded() {
        // square plaquette 0-1-3-2-0 with junctions at 1, 3 and 2
        use Orientation::{North, South};
        let mut state = NetworkState::from_links(
            4,
            0,
            [
                link(ep(0, East), ep(1, West), 1, 0),
                link(ep(1, North), ep(3, South), 1, 0),
                link(ep(3, West), ep(2, East), 1, 0),
                link(ep(2, South), ep(0, North), 1, 0),
            ],
        );
        let j = |a, b| JunctionOutcome {
            junctions: vec![(a, b)],
            ..Default::default()
        };
        let outcomes = outcomes_with(4, &[(1, j(0, 1)), (3, j(1, 2)), (2, j(2, 3))]);
        let report = resolve(&mut state, &outcomes, 4);
        assert_eq!(report.removed_self_loop, 4);
        assert!(state.links().is_empty());
    }

    #[test]
    fn double_junction_is_an_invariant_violation() {
        let mut state = NetworkState::from_links(
            3,
            0,
            [
                link(ep(0, East), ep(1, West), 1, 0),
                link(ep(1, East), ep(2, West), 1, 0),
                link(ep(1, Orientation::North), ep(2, Orientation::South), 1, 0),
            ],
        );
        let bad = JunctionOutcome {
            junctions: vec![(0, 1), (0, 2)],
            ..Default::default()
        };
        let err = resolve_swaps(
            &mut state,
            &outcomes_with(3, &[(1, bad)]),
            3,
            &mut ResolveScratch::default(),
            &mut StepReport::default(),
        )
        .unwrap_err();
        assert!(err.is_invariant_violation());
    }

    fn run_steps(
        graph: &PhysicalGraph,
        params: ProtocolParams,
        seed: u64,
        steps: u64,
    ) -> (NetworkState, Vec<StepReport>) {
        let mut state = NetworkState::empty(graph.node_count());
        let mut rng = RealizationRng::new(seed, graph.node_count());
        let mut scratch = StepScratch::default();
        let mut reports = Vec::new();
        for _ in 0..steps {
            reports
                .push(protocol_step(&mut state, graph, &params, &mut rng, &mut scratch).unwrap());
            if state.t() + 1 < steps {
                advance(&mut state);
            }
        }
        (state, reports)
    }

    #[test]
    fn no_swaps_fill_every_port_to_the_cutoff() {
        let g =
            PhysicalGraph::build(TopologyKind::Square, Boundary::Periodic(vec![8, 8]), 3).unwrap();
        let params = ProtocolParams {
            p_gen: 1.0,
            p_swap: 1.0,
            q: 0.0,
            t_cut: 5,
            max_swap_distance: 3,
        };
        let (state, _) = run_steps(&g, params, 1, 9);
        assert!((0..64).all(|i| state.degree(i) == 4 * 5));
    }

    #[test]
    fn full_swapping_on_a_ring_leaves_nothing() {
        let g = PhysicalGraph::build(TopologyKind::Chain, Boundary::Periodic(vec![10]), 3).unwrap();
        let params = ProtocolParams {
            p_gen: 1.0,
            p_swap: 1.0,
            q: 1.0,
            t_cut: 4,
            max_swap_distance: 3,
        };
        let (state, reports) = run_steps(&g, params, 5, 12);
        assert!(state.links().is_empty());
        assert!(reports.iter().all(StepReport::is_balanced));
    }

    #[test]
    fn unit_cutoff_keeps_only_fresh_links() {
        let g = PhysicalGraph::build(TopologyKind::Triangular, Boundary::Periodic(vec![8, 8]), 3)
            .unwrap();
        let params = ProtocolParams {
            p_gen: 0.7,
            p_swap: 0.8,
            q: 0.5,
            t_cut: 1,
            max_swap_distance: 3,
        };
        let (state, _) = run_steps(&g, params, 13, 6);
        assert!(state.links().iter().all(|l| l.birth_min == state.t()));
    }

    #[test]
    fn steps_are_deterministic_and_balanced() {
        let g = PhysicalGraph::build(TopologyKind::Honeycomb, Boundary::Periodic(vec![8, 8]), 3)
            .unwrap();
        let params = ProtocolParams {
            p_gen: 0.9,
            p_swap: 0.75,
            q: 0.6,
            t_cut: 4,
            max_swap_distance: 3,
        };
        let (a, ra) = run_steps(&g, params, 99, 15);
        let (b, rb) = run_steps(&g, params, 99, 15);
        assert_eq!(a.links(), b.links());
        assert_eq!(ra, rb);
        assert!(ra.iter().all(StepReport::is_balanced));
        for l in a.links() {
            assert!(l.m >= 1 && l.m <= 3);
            assert!(l.age(a.t()) < 4);
            assert_ne!(l.a.node, l.b.node);
        }
        a.check_consistency().unwrap();
    }
}
