//! Weak Galerkin spaces, element operators and global assembly.

mod assemble;
pub mod local;
mod space;

pub use assemble::{assemble, project_qh, stabilizer_energy, v_norm, AssembledSystem};
pub use local::{LocalElement, StabilizerWeights};
pub use space::{WeakFunction, WgSpace};

use crate::error::{Error, Result};

/// Mesh-dependent stabilizer weight γ(h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSchedule {
    Constant(f64),
    /// γ(h) = h^ε
    Power(f64),
    /// γ(h) = -1 / ln h
    Log,
}

impl GammaSchedule {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            GammaSchedule::Constant(c) => c,
            GammaSchedule::Power(eps) => h.powf(eps),
            GammaSchedule::Log => -1.0 / h.ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GammaSchedule::Constant(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidArgument(format!("constant gamma must be positive, got {c}")))
            }
            GammaSchedule::Power(e) if !e.is_finite() => Err(Error::InvalidArgument("gamma exponent must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Whether γ(h) → 0 as h → 0.
    pub fn vanishes(&self) -> bool {
        match *self {
            GammaSchedule::Constant(_) => false,
            GammaSchedule::Power(e) => e > 0.0,
            GammaSchedule::Log => true,
        }
    }

    /// Flag grammar: `const[:c]`, `pow:<eps>`, `log`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid gamma schedule '{s}' (expected const[:c], pow:<eps> or log)"));
        let g = match s.split_once(':') {
            None if s == "const" => GammaSchedule::Constant(1.0),
            None if s == "log" => GammaSchedule::Log,
            Some(("const", c)) => GammaSchedule::Constant(c.parse().map_err(|_| bad())?),
            Some(("pow", e)) => GammaSchedule::Power(e.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        g.validate()?;
        Ok(g)
    }
}

impl std::fmt::Display for GammaSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaSchedule::Constant(c) => write!(f, "const:{c}"),
            GammaSchedule::Power(e) => write!(f, "pow:{e}"),
            GammaSchedule::Log => write!(f, "log"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilizerKind {
    /// γ(h) Σ_T h_T⁻¹ <Q_b w_0 - w_b, Q_b v_0 - v_b>_∂T
    Standard,
    /// (α/3) Σ_T Σ_F h_T⁻² |F|⁻¹ |T| <Q_b w_0 - w_b, Q_b v_0 - v_b>_F
    Skeletal { alpha: f64 },
}

impl StabilizerKind {
    /// Flag grammar: `standard` or `skeletal:<alpha>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid stabilizer '{s}' (expected standard or skeletal:<alpha>)"));
        match s.split_once(':') {
            None if s == "standard" => Ok(StabilizerKind::Standard),
            Some(("skeletal", a)) => {
                let alpha: f64 = a.parse().map_err(|_| bad())?;
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidArgument(format!("skeletal alpha must be >= 0, got {alpha}")));
                }
                Ok(StabilizerKind::Skeletal { alpha })
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for StabilizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilizerKind::Standard => write!(f, "standard"),
            StabilizerKind::Skeletal { alpha } => write!(f, "skeletal:{alpha}"),
        }
    }
}
