use clap::ValueEnum;
use serde::{Deserialize, Serialize};

/// Replica counts and grid resolution for Monte Carlo work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Smoke,
    #[default]
    Default,
    Deep,
}

impl Budget {
    pub fn name(self) -> &'static str {
        match self {
            Self::Smoke => "smoke",
            Self::Default => "default",
            Self::Deep => "deep",
        }
    }

    pub fn replicas(self) -> usize {
        match self {
            Self::Smoke => 500,
            Self::Default => 10_000,
            Self::Deep => 100_000,
        }
    }

    /// Steps per delay interval: h = r0 / cells.
    pub fn cells(self) -> usize {
        match self {
            Self::Smoke => 64,
            Self::Default => 256,
            Self::Deep => 512,
        }
    }

    /// Size of the long-run ensemble approximating μ.
    pub fn ensemble(self) -> usize {
        match self {
            Self::Smoke => 200,
            Self::Default => 1000,
            Self::Deep => 4000,
        }
    }

    /// (outer, inner) sizes for nested estimates of P_t f.
    pub fn nested(self) -> (usize, usize) {
        match self {
            Self::Smoke => (50, 20),
            Self::Default => (200, 100),
            Self::Deep => (500, 200),
        }
    }
}
