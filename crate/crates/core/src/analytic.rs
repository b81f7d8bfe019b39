//! Closed-form retrieval-efficiency limits.
//!
//! These are the oracles the Monte Carlo must approach: a Gaussian collapse
//! for free ballistic motion, motional-narrowing exponential decay when
//! velocity-changing collisions are fast, and a pure-exponential lifetime
//! for spin destruction. The composite form multiplies an appropriate
//! dephasing factor with the lifetime factor and reports which regime it
//! used, flagging the intermediate zone where neither limit is trustworthy.

use serde::Serialize;
use thiserror::Error;

use crate::spinwave::Convention;

/// Upper edge of the motional-narrowing regime: the diffusive form is
/// quantitatively reliable for `|Δk|·σ_v·τ_c` below this.
pub const DIFFUSIVE_REGIME_MAX: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Ballistic (collisionless) dephasing: `exp(−(Δk σ_v t)²)`.
///
/// Follows from averaging `e^{iΔk·v t}` over a Maxwell-Boltzmann velocity
/// distribution; the intensity is the square of that characteristic
/// function, hence the factor-2-free Gaussian with `τ = 1/(Δk σ_v)`.
pub fn ballistic_efficiency(delta_k: f64, sigma_v: f64, t: f64) -> f64 {
    let x = delta_k * sigma_v * t;
    (-x * x).exp()
}

/// Motional-narrowing (diffusive) dephasing: `exp(−2 D Δk² t)` with
/// `D = σ_v² τ_c`.
pub fn diffusive_efficiency(delta_k: f64, diffusion: f64, t: f64) -> f64 {
    (-2.0 * diffusion * delta_k * delta_k * t).exp()
}

/// Spin-destruction lifetime factor. Survival of each atom's coherence is
/// exponential with time constant `tau_s`; the phased-array intensity then
/// loses `e^{−2t/τ_s}` while the per-surviving-excitation form loses a
/// single power of the survival, `e^{−t/τ_s}`.
pub fn lifetime_efficiency(tau_s: f64, t: f64, convention: Convention) -> f64 {
    if tau_s.is_infinite() {
        return 1.0;
    }
    match convention {
        Convention::PhasedArray => (-2.0 * t / tau_s).exp(),
        Convention::SingleExcitation => (-t / tau_s).exp(),
    }
}

/// Which dephasing form [`composite_efficiency`] applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingRegime {
    /// No velocity-changing collisions: Gaussian collapse.
    Ballistic,
    /// `Δk σ_v τ_c < 0.2`: motional narrowing, diffusive exponential.
    Diffusive,
    /// `Δk σ_v τ_c ≥ 0.2` with collisions present: the diffusive form is
    /// still returned but is only an order-of-magnitude estimate here.
    IntermediateApprox,
}

/// Inputs for the composite closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceParams {
    delta_k: f64,
    sigma_v: f64,
    /// Mean time between velocity-changing collisions; zero means none.
    tau_c: f64,
    /// Spin-destruction lifetime; `f64::INFINITY` disables the channel.
    tau_s: f64,
    convention: Convention,
}

impl DecoherenceParams {
    pub fn new(
        delta_k: f64,
        sigma_v: f64,
        tau_c: f64,
        tau_s: f64,
        convention: Convention,
    ) -> Result<Self, AnalyticError> {
        for (name, v) in [("delta_k", delta_k), ("sigma_v", sigma_v), ("tau_c", tau_c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AnalyticError::InvalidParam(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if tau_s.is_nan() || tau_s <= 0.0 {
            return Err(AnalyticError::InvalidParam(format!(
                "tau_s must be positive (or infinite to disable), got {tau_s}"
            )));
        }
        Ok(Self {
            delta_k,
            sigma_v,
            tau_c,
            tau_s,
            convention,
        })
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn sigma_v(&self) -> f64 {
        self.sigma_v
    }

    pub fn tau_c(&self) -> f64 {
        self.tau_c
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Dimensionless regime parameter `Δk σ_v τ_c`.
    pub fn narrowing_parameter(&self) -> f64 {
        self.delta_k * self.sigma_v * self.tau_c
    }
}

/// Composite efficiency value plus the regime that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeEfficiency {
    pub value: f64,
    pub regime: DephasingRegime,
}

/// Product of the regime-selected dephasing factor and the lifetime factor.
pub fn composite_efficiency(params: &DecoherenceParams, t: f64) -> CompositeEfficiency {
    debug_assert!(t.is_finite() && t >= 0.0);
    let (dephasing, regime) = if params.tau_c == 0.0 {
        (
            ballistic_efficiency(params.delta_k, params.sigma_v, t),
            DephasingRegime::Ballistic,
        )
    } else {
        let diffusion = params.sigma_v * params.sigma_v * params.tau_c;
        let value = diffusive_efficiency(params.delta_k, diffusion, t);
        let regime = if params.narrowing_parameter() < DIFFUSIVE_REGIME_MAX {
            DephasingRegime::Diffusive
        } else {
            DephasingRegime::IntermediateApprox
        };
        (value, regime)
    };
    CompositeEfficiency {
        value: dephasing * lifetime_efficiency(params.tau_s, t, params.convention),
        regime,
    }
}
