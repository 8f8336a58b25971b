//! Werner-state fidelity algebra and the relations between coherence time,
//! cutoff time, generation fidelity, swap distance and minimum fidelity.
//!
//! Internally everything is expressed through the Werner parameter
//! `x = (4F - 1) / 3`: a swap multiplies parameters and decoherence scales
//! them by `exp(-dt / T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack added before flooring the cutoff bound, absorbing representation
/// error when the bound lands on an exact integer.
const FLOOR_SLACK: f64 = 1e-9;

/// Upper limit on the swap distance search; the bound is decreasing in `M`
/// and reaches its limit long before this.
const MAX_SWAP_DISTANCE_SEARCH: u32 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct WernerFidelity {
    x: f64,
}

impl WernerFidelity {
    pub fn from_fidelity(f: f64) -> Self {
        WernerFidelity {
            x: (4.0 * f - 1.0) / 3.0,
        }
    }

    pub fn from_parameter(x: f64) -> Self {
        WernerFidelity { x }
    }

    pub fn fidelity(self) -> f64 {
        0.25 + 0.75 * self.x
    }

    pub fn parameter(self) -> f64 {
        self.x
    }

    pub fn decayed(self, dt: f64, coherence_time: f64) -> Self {
        WernerFidelity {
            x: self.x * (-dt / coherence_time).exp(),
        }
    }

    pub fn swapped(self, other: WernerFidelity) -> Self {
        WernerFidelity {
            x: self.x * other.x,
        }
    }
}

/// Depolarizing decay of a Werner state's fidelity over `dt` time steps.
pub fn decay(f: f64, dt: f64, coherence_time: f64) -> f64 {
    0.25 + (f - 0.25) * (-dt / coherence_time).exp()
}

/// Fidelity of the link produced by swapping two Werner links.
pub fn swap_fidelity(f1: f64, f2: f64) -> f64 {
    f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0
}

/// Fidelity of a link fused from `m` segments born at times summing to
/// `birth_sum`, observed at time `t`, with every segment decaying from its own
/// birth until `t`.
pub fn link_fidelity(f_new: f64, m: u32, birth_sum: u64, t: u64, coherence_time: f64) -> f64 {
    let x_new = WernerFidelity::from_fidelity(f_new).parameter();
    let total_age = (m as u64 * t - birth_sum) as f64;
    0.25 + 0.75 * x_new.powi(m as i32) * (-total_age / coherence_time).exp()
}

/// Natural log of the argument of the cutoff inequality,
/// `ln(3/(4 Fnew - 1) * ((4 Fmin - 1)/3)^(1/M))`.
fn log_argument(f_new: f64, f_min: f64, max_swap_distance: u32) -> f64 {
    let x_new = (4.0 * f_new - 1.0) / 3.0;
    let x_min = (4.0 * f_min - 1.0) / 3.0;
    x_min.ln() / max_swap_distance as f64 - x_new.ln()
}

/// Evaluated right-hand side of the cutoff inequality: the largest real cutoff
/// compatible with `(T, Fnew, Fmin, M)`.
pub fn cutoff_bound(coherence_time: f64, f_new: f64, f_min: f64, max_swap_distance: u32) -> f64 {
    -coherence_time * log_argument(f_new, f_min, max_swap_distance)
}

/// A positive cutoff exists iff the log argument is below 1.
pub fn feasible(f_new: f64, f_min: f64, max_swap_distance: u32) -> bool {
    max_swap_distance >= 1 && log_argument(f_new, f_min, max_swap_distance) < 0.0
}

/// Argument of the logarithm in the cutoff inequality (not its log).
pub fn feasibility_argument(f_new: f64, f_min: f64, max_swap_distance: u32) -> f64 {
    log_argument(f_new, f_min, max_swap_distance).exp()
}

fn check_fidelities(f_new: f64, f_min: f64) -> Result<()> {
    if !(f_new > 0.25 && f_new <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "Fnew",
            value: f_new,
            reason: "must lie in (1/4, 1]",
        });
    }
    if !(0.5..1.0).contains(&f_min) {
        return Err(Error::InvalidParameter {
            name: "Fmin",
            value: f_min,
            reason: "must lie in [1/2, 1)",
        });
    }
    Ok(())
}

fn check_coherence_time(coherence_time: f64) -> Result<()> {
    if !(coherence_time > 0.0 && coherence_time.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "T",
            value: coherence_time,
            reason: "must be positive and finite",
        });
    }
    Ok(())
}

/// Largest integer cutoff satisfying the cutoff inequality.
pub fn max_cutoff(
    coherence_time: f64,
    f_new: f64,
    f_min: f64,
    max_swap_distance: u32,
) -> Result<u32> {
    check_coherence_time(coherence_time)?;
    check_fidelities(f_new, f_min)?;
    if !feasible(f_new, f_min, max_swap_distance) {
        return Err(Error::Infeasible {
            f_new,
            f_min,
            max_swap_distance,
            argument: feasibility_argument(f_new, f_min, max_swap_distance),
        });
    }
    let bound = cutoff_bound(coherence_time, f_new, f_min, max_swap_distance);
    let t_cut = (bound + FLOOR_SLACK).floor();
    if t_cut < 1.0 {
        return Err(Error::CutoffViolation { t_cut: 1, bound });
    }
    Ok(t_cut.min(u32::MAX as f64) as u32)
}

/// Whether `t_cut` satisfies the cutoff inequality for the given parameters.
pub fn satisfies_cutoff(
    coherence_time: f64,
    t_cut: u32,
    f_new: f64,
    f_min: f64,
    max_swap_distance: u32,
) -> bool {
    feasible(f_new, f_min, max_swap_distance)
        && t_cut as f64
            <= cutoff_bound(coherence_time, f_new, f_min, max_swap_distance) + FLOOR_SLACK
}

/// Validates a full parameter set, naming the violated inequality on failure.
pub fn validate(
    coherence_time: f64,
    t_cut: u32,
    f_new: f64,
    f_min: f64,
    max_swap_distance: u32,
) -> Result<()> {
    check_coherence_time(coherence_time)?;
    check_fidelities(f_new, f_min)?;
    if t_cut < 1 {
        return Err(Error::InvalidParameter {
            name: "tcut",
            value: t_cut as f64,
            reason: "must be at least 1",
        });
    }
    if max_swap_distance < 1 {
        return Err(Error::InvalidParameter {
            name: "M",
            value: max_swap_distance as f64,
            reason: "must be at least 1",
        });
    }
    if !feasible(f_new, f_min, max_swap_distance) {
        return Err(Error::Infeasible {
            f_new,
            f_min,
            max_swap_distance,
            argument: feasibility_argument(f_new, f_min, max_swap_distance),
        });
    }
    if !satisfies_cutoff(coherence_time, t_cut, f_new, f_min, max_swap_distance) {
        return Err(Error::CutoffViolation {
            t_cut,
            bound: cutoff_bound(coherence_time, f_new, f_min, max_swap_distance),
        });
    }
    Ok(())
}

/// Largest swap distance `M >= 1` for which `t_cut` still satisfies the
/// cutoff inequality.
pub fn max_swap_distance(coherence_time: f64, t_cut: u32, f_new: f64, f_min: f64) -> Result<u32> {
    check_coherence_time(coherence_time)?;
    check_fidelities(f_new, f_min)?;
    if t_cut < 1 {
        return Err(Error::InvalidParameter {
            name: "tcut",
            value: t_cut as f64,
            reason: "must be at least 1",
        });
    }
    // The bound shrinks as M grows, so scan upward until it first fails.
    if !satisfies_cutoff(coherence_time, t_cut, f_new, f_min, 1) {
        return Err(Error::NoSwapDistance { t_cut });
    }
    let mut m = 1;
    while m < MAX_SWAP_DISTANCE_SEARCH
        && satisfies_cutoff(coherence_time, t_cut, f_new, f_min, m + 1)
    {
        m += 1;
    }
    Ok(m)
}

/// Hardware description of every channel and node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareParams {
    pub p_gen: f64,
    pub p_swap: f64,
    /// Coherence time `T` in time steps.
    pub coherence_time: f64,
    pub f_new: f64,
}

impl HardwareParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("pgen", self.p_gen), ("pswap", self.p_swap)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be a probability in [0, 1]",
                });
            }
        }
        check_coherence_time(self.coherence_time)?;
        if !(self.f_new > 0.25 && self.f_new <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "Fnew",
                value: self.f_new,
                reason: "must lie in (1/4, 1]",
            });
        }
        Ok(())
    }
}

/// Choices made by the protocol designer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub t_cut: u32,
    pub max_swap_distance: u32,
    pub f_min: f64,
    /// Swap attempt probability.
    pub q: f64,
}

impl PolicyParams {
    /// Checks ranges and the cutoff inequality against `hardware`.
    pub fn validate(&self, hardware: &HardwareParams) -> Result<()> {
        hardware.validate()?;
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: self.q,
                reason: "must be a probability in [0, 1]",
            });
        }
        validate(
            hardware.coherence_time,
            self.t_cut,
            hardware.f_new,
            self.f_min,
            self.max_swap_distance,
        )
    }
}
