//! C ABI for the cdsim simulator.
//!
//! Every fallible function returns a [`CdsimStatus`]. On failure a message is
//! kept per thread and can be read with [`cdsim_last_error_message`].
//! Networks are opaque handles created by [`cdsim_network_new`] and released
//! with [`cdsim_network_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cdsim::entanglement::{self, HardwareParams, PolicyParams};
use cdsim::estimation::{default_schedule, EstimateOptions, ProtocolConfig, TrackedNodes};
use cdsim::metrics::{observe_into, MetricSample, NodeBounds};
use cdsim::protocol::{advance, protocol_step, NetworkState, ProtocolParams, StepScratch};
use cdsim::rng::RealizationRng;
use cdsim::{Boundary, Error, MetricKind, PhysicalGraph, Simulation, TopologyKind};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdsimStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameters or configuration rejected, including the cutoff inequality.
    InvalidConfig = 2,
    /// A runtime invariant of the simulation failed.
    InvariantViolation = 3,
    Io = 4,
    BufferTooSmall = 5,
    InvalidUtf8 = 6,
    Panic = 7,
    Other = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdsimTopology {
    Chain = 0,
    Honeycomb = 1,
    Square = 2,
    Triangular = 3,
}

impl From<CdsimTopology> for TopologyKind {
    fn from(t: CdsimTopology) -> Self {
        match t {
            CdsimTopology::Chain => TopologyKind::Chain,
            CdsimTopology::Honeycomb => TopologyKind::Honeycomb,
            CdsimTopology::Square => TopologyKind::Square,
            CdsimTopology::Triangular => TopologyKind::Triangular,
        }
    }
}

/// One parameter point. `ny` is ignored for chains.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CdsimParams {
    pub topology: CdsimTopology,
    pub periodic: bool,
    pub nx: u32,
    pub ny: u32,
    pub p_gen: f64,
    pub p_swap: f64,
    /// Coherence time in time steps.
    pub coherence_time: f64,
    pub f_new: f64,
    pub f_min: f64,
    pub t_cut: u32,
    pub max_swap_distance: u32,
    pub q: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CdsimEstimate {
    pub node: u32,
    pub mean: f64,
    pub std: f64,
    pub band6: f64,
    pub steady: bool,
}

/// Opaque network handle.
pub struct CdsimNetwork {
    graph: PhysicalGraph,
    params: ProtocolParams,
    bounds: NodeBounds,
    state: NetworkState,
    rng: RealizationRng,
    scratch: StepScratch,
    sample: MetricSample,
    stamp: Vec<u32>,
    steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CdsimStatus {
    if e.is_config_error() {
        CdsimStatus::InvalidConfig
    } else if e.is_invariant_violation() {
        CdsimStatus::InvariantViolation
    } else if matches!(e, Error::Io(_) | Error::Csv(_) | Error::Json(_)) {
        CdsimStatus::Io
    } else {
        CdsimStatus::Other
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), CdsimStatus>) -> CdsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdsimStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("panic inside cdsim".into());
            CdsimStatus::Panic
        }
    }
}

fn fail(e: Error) -> CdsimStatus {
    let status = status_of(&e);
    set_last_error(e.to_string());
    status
}

fn null(what: &str) -> CdsimStatus {
    set_last_error(format!("{what} is null"));
    CdsimStatus::NullPointer
}

fn protocol_config(p: &CdsimParams) -> ProtocolConfig {
    let topology = TopologyKind::from(p.topology);
    let mut dims = vec![p.nx as usize];
    if topology != TopologyKind::Chain {
        dims.push(p.ny as usize);
    }
    let boundary = if p.periodic {
        Boundary::Periodic(dims)
    } else {
        Boundary::Finite(dims)
    };
    ProtocolConfig {
        schedule: default_schedule(p.t_cut, topology, &boundary),
        topology,
        boundary,
        hardware: HardwareParams {
            p_gen: p.p_gen,
            p_swap: p.p_swap,
            coherence_time: p.coherence_time,
            f_new: p.f_new,
        },
        policy: PolicyParams {
            t_cut: p.t_cut,
            max_swap_distance: p.max_swap_distance,
            f_min: p.f_min,
            q: p.q,
        },
        verify: false,
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Largest cutoff allowed by the cutoff inequality.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdsim_max_cutoff(
    coherence_time: f64,
    f_new: f64,
    f_min: f64,
    max_swap_distance: u32,
    out: *mut u32,
) -> CdsimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t_cut = entanglement::max_cutoff(coherence_time, f_new, f_min, max_swap_distance)
            .map_err(fail)?;
        *out = t_cut;
        Ok(())
    })
}

/// Largest swap distance allowed by the cutoff inequality for `t_cut`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdsim_max_swap_distance(
    coherence_time: f64,
    t_cut: u32,
    f_new: f64,
    f_min: f64,
    out: *mut u32,
) -> CdsimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out =
            entanglement::max_swap_distance(coherence_time, t_cut, f_new, f_min).map_err(fail)?;
        Ok(())
    })
}

/// Fidelity after `dt` steps of depolarizing decay.
#[no_mangle]
pub extern "C" fn cdsim_decay(f: f64, dt: f64, coherence_time: f64) -> f64 {
    entanglement::decay(f, dt, coherence_time)
}

/// Fidelity of the link produced by swapping two Werner links.
#[no_mangle]
pub extern "C" fn cdsim_swap_fidelity(f1: f64, f2: f64) -> f64 {
    entanglement::swap_fidelity(f1, f2)
}

/// Fidelity at time `t` of a link built from `m` elementary links whose
/// birth times add up to `birth_sum`.
#[no_mangle]
pub extern "C" fn cdsim_link_fidelity(
    f_new: f64,
    m: u32,
    birth_sum: u64,
    t: u64,
    coherence_time: f64,
) -> f64 {
    entanglement::link_fidelity(f_new, m, birth_sum, t, coherence_time)
}

/// Creates an empty network. The first [`cdsim_network_step`] runs time 0.
///
/// # Safety
/// `params` must be null or point to a valid `CdsimParams`; `out` must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_new(
    params: *const CdsimParams,
    seed: u64,
    out: *mut *mut CdsimNetwork,
) -> CdsimStatus {
    guard(|| {
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let config = protocol_config(&*params);
        config.policy.validate(&config.hardware).map_err(fail)?;
        let graph = PhysicalGraph::build(
            config.topology,
            config.boundary.clone(),
            config.policy.max_swap_distance,
        )
        .map_err(fail)?;
        let bounds = NodeBounds::new(&graph, config.policy.t_cut, config.policy.max_swap_distance)
            .map_err(fail)?;
        let n = graph.node_count();
        let network = CdsimNetwork {
            params: config.protocol_params(),
            bounds,
            state: NetworkState::empty(n),
            rng: RealizationRng::new(seed, n),
            scratch: StepScratch::default(),
            sample: MetricSample::default(),
            stamp: Vec::with_capacity(n),
            steps: 0,
            graph,
        };
        *out = Box::into_raw(Box::new(network));
        Ok(())
    })
}

/// Releases a network. Null is ignored.
///
/// # Safety
/// `network` must be null or a handle from [`cdsim_network_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_free(network: *mut CdsimNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Runs one protocol step and checks the metric bounds.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_step(network: *mut CdsimNetwork) -> CdsimStatus {
    guard(|| {
        let net = network.as_mut().ok_or_else(|| null("network"))?;
        if net.steps > 0 {
            advance(&mut net.state);
        }
        protocol_step(
            &mut net.state,
            &net.graph,
            &net.params,
            &mut net.rng,
            &mut net.scratch,
        )
        .map_err(fail)?;
        net.steps += 1;
        observe_into(&net.state, &mut net.sample, &mut net.stamp);
        net.bounds.check(&net.sample).map_err(fail)
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_node_count(network: *const CdsimNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.graph.node_count())
}

/// Number of live links, or 0 for a null handle.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_link_count(network: *const CdsimNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.state.links().len())
}

/// Number of steps run so far.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_steps(network: *const CdsimNetwork) -> u64 {
    network.as_ref().map_or(0, |n| n.steps)
}

/// Copies the per-node virtual neighborhood sizes and virtual degrees after
/// the latest step into `v` and `k`, each holding `len` entries.
///
/// # Safety
/// `network` must be null or a live handle; `v` and `k` must be null or valid
/// for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cdsim_network_metrics(
    network: *const CdsimNetwork,
    v: *mut u32,
    k: *mut u32,
    len: usize,
) -> CdsimStatus {
    guard(|| {
        let net = network.as_ref().ok_or_else(|| null("network"))?;
        if v.is_null() || k.is_null() {
            return Err(null("metric buffer"));
        }
        let n = net.graph.node_count();
        if len < n {
            set_last_error(format!("buffers hold {len} entries, need {n}"));
            return Err(CdsimStatus::BufferTooSmall);
        }
        if net.steps == 0 {
            ptr::write_bytes(v, 0, n);
            ptr::write_bytes(k, 0, n);
        } else {
            ptr::copy_nonoverlapping(net.sample.v.as_ptr(), v, n);
            ptr::copy_nonoverlapping(net.sample.k.as_ptr(), k, n);
        }
        Ok(())
    })
}

/// Steady-state estimates of `v` and `k` for one node from `realizations`
/// independent runs of the default schedule.
///
/// # Safety
/// `params` must be null or valid; `out_v` and `out_k` must be null or valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cdsim_estimate(
    params: *const CdsimParams,
    realizations: usize,
    seed: u64,
    node: u32,
    out_v: *mut CdsimEstimate,
    out_k: *mut CdsimEstimate,
) -> CdsimStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        if out_v.is_null() || out_k.is_null() {
            return Err(null("output"));
        }
        let sim = Simulation::new(protocol_config(params)).map_err(fail)?;
        let records = sim
            .estimate(&EstimateOptions {
                realizations,
                base_seed: seed,
                q_index: 0,
                tracked: TrackedNodes::List(vec![node]),
                symmetry_average: false,
            })
            .map_err(fail)?;
        for r in records {
            let e = CdsimEstimate {
                node: r.node,
                mean: r.mean,
                std: r.std,
                band6: r.band6,
                steady: r.verdict.success,
            };
            match r.metric {
                MetricKind::V => *out_v = e,
                MetricKind::K => *out_k = e,
            }
        }
        Ok(())
    })
}

/// Loads an experiment file, runs it and writes the CSV and its metadata.
///
/// # Safety
/// Both paths must be null or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cdsim_run_sweep(
    config_path: *const c_char,
    csv_path: *const c_char,
) -> CdsimStatus {
    guard(|| {
        let config_path = path_arg(config_path, "config_path")?;
        let csv_path = path_arg(csv_path, "csv_path")?;
        let config = cdsim::load_config(Path::new(config_path)).map_err(fail)?;
        cdsim::run_sweep(&config, Path::new(csv_path)).map_err(fail)?;
        Ok(())
    })
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CdsimStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_last_error(format!("{what} is not valid UTF-8"));
        CdsimStatus::InvalidUtf8
    })
}
