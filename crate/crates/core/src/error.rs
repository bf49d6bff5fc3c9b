use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A case or network failed validation; `field` names the offending entry.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    /// The eliminated (non-generator) part of the network cannot be inverted.
    #[error("singular load subnetwork; islanded buses {buses:?}")]
    SingularNetwork { buses: Vec<usize> },

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("horizon too short: no machine reached a stationary or liberation point")]
    HorizonTooShort,

    #[error("invalid bracket: t_lo = {t_lo} s is {lo_verdict}, t_hi = {t_hi} s is {hi_verdict}")]
    InvalidBracket {
        t_lo: f64,
        lo_verdict: String,
        t_hi: f64,
        hi_verdict: String,
    },

    /// Verdicts along increasing clearing time switched back from unstable to stable.
    #[error(
        "non-monotone stability verdicts: stable at {} s after unstable at {} s",
        fmt_times(stable_at),
        fmt_times(unstable_at)
    )]
    NonMonotone {
        stable_at: Vec<f64>,
        unstable_at: Vec<f64>,
    },

    /// A probe simulation diverged numerically, so no verdict could be formed.
    #[error("simulation diverged at t = {time} s (t_clear = {t_clear} s)")]
    Diverged { t_clear: f64, time: f64 },

    #[error("{0}")]
    Surface(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn fmt_times(times: &[f64]) -> String {
    let list: Vec<String> = times.iter().map(|t| format!("{t:.6}").trim_end_matches('0').trim_end_matches('.').to_string()).collect();
    format!("[{}]", list.join(", "))
}
