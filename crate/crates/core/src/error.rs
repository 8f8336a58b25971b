use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimensions: {0}")]
    InvalidDims(String),

    #[error(
        "periodic dimension {dim} is too small for maximum swap distance {max_swap_distance}: \
         need at least {required}"
    )]
    WrapTooSmall {
        dim: usize,
        max_swap_distance: u32,
        required: usize,
    },

    #[error("periodic honeycomb lattices need even dimensions, got {0}x{1}")]
    OddHoneycomb(usize, usize),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "infeasible fidelities: 3/(4*Fnew-1) * ((4*Fmin-1)/3)^(1/M) = {argument:.6} must be < 1 \
         (Fnew={f_new}, Fmin={f_min}, M={max_swap_distance})"
    )]
    Infeasible {
        f_new: f64,
        f_min: f64,
        max_swap_distance: u32,
        argument: f64,
    },

    #[error(
        "cutoff inequality violated: tcut = {t_cut} > -T*ln(3/(4*Fnew-1) * ((4*Fmin-1)/3)^(1/M)) \
         = {bound:.6}"
    )]
    CutoffViolation { t_cut: u32, bound: f64 },

    #[error("no maximum swap distance M >= 1 satisfies the cutoff inequality with tcut = {t_cut}")]
    NoSwapDistance { t_cut: u32 },

    #[error("unsupported physical node degree {0}; expected 2, 3, 4 or 6")]
    UnsupportedDegree(usize),

    #[error("steady-state window must hold at least 2 points, got {0}")]
    WindowTooShort(usize),

    #[error("at least 2 realizations are required, got {0}")]
    TooFewRealizations(usize),

    #[error("enumeration exceeded the branch budget of {budget}")]
    BudgetExceeded { budget: u64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("config invalid: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a bad experiment description rather than a
    /// failure while running it.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidDims(_)
                | Error::WrapTooSmall { .. }
                | Error::OddHoneycomb(..)
                | Error::InvalidParameter { .. }
                | Error::Infeasible { .. }
                | Error::CutoffViolation { .. }
                | Error::NoSwapDistance { .. }
                | Error::UnsupportedDegree(_)
                | Error::WindowTooShort(_)
                | Error::TooFewRealizations(_)
                | Error::Config { .. }
                | Error::ConfigInvalid(_)
        )
    }

    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
