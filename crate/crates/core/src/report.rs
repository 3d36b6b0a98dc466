use serde::{Deserialize, Serialize};

/// A real number that may be unbounded. Serialized as a tagged value so
/// reports never carry bare floating-point infinities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Extended {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl Extended {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Extended::PosInfinity
        } else if v == f64::NEG_INFINITY {
            Extended::NegInfinity
        } else {
            Extended::Finite(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::PosInfinity => f64::INFINITY,
            Extended::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

/// One row of an optimizer convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub generation: usize,
    pub best_value: f64,
    pub feasibility_residual: f64,
}

pub type Trace = Vec<TraceEntry>;

/// Bookkeeping attached to every optimizer-backed result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub seed: u64,
    pub generations: usize,
    /// Objective evaluations, outer plus inner.
    pub evaluations: u64,
    pub restarts_used: usize,
}
