use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cdsim::estimation::default_schedule;
use cdsim::{Boundary, TopologyKind};
use cdsim_ffi::*;

fn square(q: f64) -> CdsimParams {
    CdsimParams {
        topology: CdsimTopology::Square,
        periodic: true,
        nx: 8,
        ny: 8,
        p_gen: 1.0,
        p_swap: 1.0,
        coherence_time: 50.0,
        f_new: 0.9,
        f_min: 0.5,
        t_cut: 11,
        max_swap_distance: 3,
        q,
    }
}

fn last_error() -> String {
    let p = cdsim_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn parameter_relations() {
    let mut out = 0;
    for (t, expected) in [(10.0, 2), (50.0, 11), (100.0, 22)] {
        assert_eq!(
            unsafe { cdsim_max_cutoff(t, 0.9, 0.5, 3, &mut out) },
            CdsimStatus::Ok
        );
        assert_eq!(out, expected);
    }
    assert_eq!(
        unsafe { cdsim_max_swap_distance(50.0, 11, 1.0, 0.5, &mut out) },
        CdsimStatus::Ok
    );
    assert_eq!(out, 4);

    let status = unsafe { cdsim_max_cutoff(50.0, 0.6, 0.5, 2, &mut out) };
    assert_eq!(status, CdsimStatus::InvalidConfig);
    assert!(last_error().contains("infeasible"));
    assert_eq!(
        unsafe { cdsim_max_cutoff(50.0, 0.9, 0.5, 3, ptr::null_mut()) },
        CdsimStatus::NullPointer
    );
}

#[test]
fn fidelity_functions() {
    assert!((cdsim_swap_fidelity(0.9, 0.9) - (0.81 + 0.01 / 3.0)).abs() < 1e-15);
    assert!((cdsim_decay(1.0, 0.0, 10.0) - 1.0).abs() < 1e-15);
    let direct = cdsim_decay(0.9, 4.0, 50.0);
    assert!((cdsim_link_fidelity(0.9, 1, 3, 7, 50.0) - direct).abs() < 1e-15);
}

#[test]
fn network_baseline() {
    let params = square(0.0);
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { cdsim_network_new(&params, 1, &mut net) },
        CdsimStatus::Ok
    );
    let n = unsafe { cdsim_network_node_count(net) };
    assert_eq!(n, 64);
    let (mut v, mut k) = (vec![9u32; n], vec![9u32; n]);
    assert_eq!(
        unsafe { cdsim_network_metrics(net, v.as_mut_ptr(), k.as_mut_ptr(), n) },
        CdsimStatus::Ok
    );
    assert!(v.iter().chain(&k).all(|&x| x == 0));
    for _ in 0..20 {
        assert_eq!(unsafe { cdsim_network_step(net) }, CdsimStatus::Ok);
    }
    assert_eq!(unsafe { cdsim_network_steps(net) }, 20);
    assert_eq!(
        unsafe { cdsim_network_metrics(net, v.as_mut_ptr(), k.as_mut_ptr(), n) },
        CdsimStatus::Ok
    );
    assert!(v.iter().all(|&x| x == 4));
    assert!(k.iter().all(|&x| x == 44));
    assert_eq!(unsafe { cdsim_network_link_count(net) }, 2 * 64 * 11);
    assert_eq!(
        unsafe { cdsim_network_metrics(net, v.as_mut_ptr(), k.as_mut_ptr(), n - 1) },
        CdsimStatus::BufferTooSmall
    );
    unsafe { cdsim_network_free(net) };
    unsafe { cdsim_network_free(ptr::null_mut()) };
}

#[test]
fn network_matches_library_realization() {
    let params = square(0.4);
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { cdsim_network_new(&params, 99, &mut net) },
        CdsimStatus::Ok
    );

    let boundary = Boundary::Periodic(vec![8, 8]);
    let config = cdsim::ProtocolConfig {
        topology: TopologyKind::Square,
        schedule: default_schedule(11, TopologyKind::Square, &boundary),
        boundary,
        hardware: cdsim::HardwareParams {
            p_gen: 1.0,
            p_swap: 1.0,
            coherence_time: 50.0,
            f_new: 0.9,
        },
        policy: cdsim::PolicyParams {
            t_cut: 11,
            max_swap_distance: 3,
            f_min: 0.5,
            q: 0.4,
        },
        verify: false,
    };
    let series = cdsim::estimation::run_realization(&config, 99).unwrap();
    let (mut v, mut k) = (vec![0u32; 64], vec![0u32; 64]);
    for t in 0..series.v.len() {
        assert_eq!(unsafe { cdsim_network_step(net) }, CdsimStatus::Ok);
        unsafe { cdsim_network_metrics(net, v.as_mut_ptr(), k.as_mut_ptr(), 64) };
        assert_eq!(v, series.v[t], "t={t}");
        assert_eq!(k, series.k[t], "t={t}");
    }
    unsafe { cdsim_network_free(net) };
}

#[test]
fn rejected_parameters_report_config_errors() {
    let mut params = square(0.5);
    params.t_cut = 12;
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { cdsim_network_new(&params, 1, &mut net) },
        CdsimStatus::InvalidConfig
    );
    assert!(net.is_null());
    assert!(last_error().contains("-T*ln"));

    let mut params = square(0.5);
    params.nx = 6;
    assert_eq!(
        unsafe { cdsim_network_new(&params, 1, &mut net) },
        CdsimStatus::InvalidConfig
    );
    assert_eq!(
        unsafe { cdsim_network_new(ptr::null(), 1, &mut net) },
        CdsimStatus::NullPointer
    );
}

#[test]
fn estimate_baseline() {
    let params = square(0.0);
    let (mut v, mut k) = (CdsimEstimate::default(), CdsimEstimate::default());
    let status = unsafe { cdsim_estimate(&params, 4, 5, 10, &mut v, &mut k) };
    assert_eq!(status, CdsimStatus::Ok);
    assert_eq!((v.node, v.mean, v.std, v.steady), (10, 4.0, 0.0, true));
    assert_eq!(k.mean, 44.0);
}

#[test]
fn sweep_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        r#"
[lattice]
topology = "chain"
boundary = "finite"
dims = [3]

[hardware]
pgen = 1.0
pswap = 1.0
T = 1000
Fnew = 1.0

[policy]
Fmin = 0.5
tcut = 1
M = 2
q = [0.0, 0.5]

[mc]
N = 10
tracked = "all"
"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let c = CString::new(config.to_str().unwrap()).unwrap();
    let o = CString::new(csv.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { cdsim_run_sweep(c.as_ptr(), o.as_ptr()) },
        CdsimStatus::Ok
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);

    let missing = CString::new("/nonexistent/cfg.toml").unwrap();
    assert_eq!(
        unsafe { cdsim_run_sweep(missing.as_ptr(), o.as_ptr()) },
        CdsimStatus::InvalidConfig
    );
    assert_eq!(
        unsafe { cdsim_run_sweep(ptr::null(), o.as_ptr()) },
        CdsimStatus::NullPointer
    );
}

#[test]
fn header_declares_every_export() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cdsim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "cdsim_last_error_message",
        "cdsim_max_cutoff",
        "cdsim_max_swap_distance",
        "cdsim_decay",
        "cdsim_swap_fidelity",
        "cdsim_link_fidelity",
        "cdsim_network_new",
        "cdsim_network_free",
        "cdsim_network_step",
        "cdsim_network_node_count",
        "cdsim_network_link_count",
        "cdsim_network_steps",
        "cdsim_network_metrics",
        "cdsim_estimate",
        "cdsim_run_sweep",
        "typedef struct CdsimNetwork CdsimNetwork",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = which_cc().expect("no C compiler found on PATH");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        r#"
#include "cdsim.h"
int main(void) {
    CdsimParams p = {CDSIM_TOPOLOGY_SQUARE, true, 8, 8, 1.0, 1.0, 50.0, 0.9, 0.5, 11, 3, 0.0};
    CdsimNetwork *net = NULL;
    if (cdsim_network_new(&p, 1, &net) != CDSIM_STATUS_OK) return 1;
    cdsim_network_step(net);
    cdsim_network_free(net);
    return 0;
}
"#,
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| Command::new(cc).arg("--version").output().is_ok())
}
