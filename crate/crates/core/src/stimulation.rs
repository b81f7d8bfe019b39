//! Delayed onset of stimulated Stokes scattering.
//!
//! Mean excitation number under a linear gain/loss rate equation seeded by
//! spontaneous scattering:
//!
//! `n(t) = G·t·φ((G−Γ)t)` with `φ(x) = (eˣ−1)/x`,
//!
//! where `G = g·P` is the pump-power-dependent gain and `Γ` the spin-wave
//! decay rate. Stimulation turns on when `n` crosses a threshold `n_th`;
//! below threshold (`G·(saturation) ≤ n_th`) the crossing never happens and
//! the delay is undefined.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StimulationError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("powers must be positive, finite and strictly ascending")]
    UnsortedPowers,
}

/// Gain/loss rate parameters for one pump power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    gain_per_watt: f64,
    write_power: f64,
    decay_rate: f64,
    threshold: f64,
}

impl RateParams {
    /// `gain_per_watt` in W⁻¹s⁻¹, `write_power` in W, `decay_rate` in s⁻¹,
    /// `threshold` the dimensionless excitation count that defines onset.
    pub fn new(
        gain_per_watt: f64,
        write_power: f64,
        decay_rate: f64,
        threshold: f64,
    ) -> Result<Self, StimulationError> {
        for (name, v) in [
            ("gain_per_watt", gain_per_watt),
            ("write_power", write_power),
            ("decay_rate", decay_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(StimulationError::InvalidParam(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if !(threshold.is_finite() && threshold >= 1.0) {
            return Err(StimulationError::InvalidParam(format!(
                "threshold must be >= 1 excitation, got {threshold}"
            )));
        }
        Ok(Self {
            gain_per_watt,
            write_power,
            decay_rate,
            threshold,
        })
    }

    /// Pump gain `G = g·P`, s⁻¹.
    pub fn gain(&self) -> f64 {
        self.gain_per_watt * self.write_power
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Mean excitation number at time `t ≥ 0`.
    ///
    /// Evaluated through `expm1`, which keeps the `G → Γ` limit (`n = G·t`)
    /// exact instead of cancelling catastrophically.
    pub fn excitation_number(&self, t: f64) -> f64 {
        debug_assert!(t.is_finite() && t >= 0.0);
        let g = self.gain();
        let x = (g - self.decay_rate) * t;
        if x == 0.0 {
            g * t
        } else {
            g * t * (x.exp_m1() / x)
        }
    }

    /// Time at which `n(t)` first reaches the threshold, if it ever does.
    ///
    /// Inverting `n(t) = n_th` gives `t = ln(1 + n_th(G−Γ)/G)/(G−Γ)`. For
    /// `G ≤ Γ` the excitation saturates at `G/(Γ−G)`; when that saturation
    /// is at or below `n_th` the logarithm's argument is non-positive and
    /// there is no crossing: `None`.
    pub fn stimulation_delay(&self) -> Option<f64> {
        let g = self.gain();
        if g <= 0.0 {
            return None;
        }
        let d = g - self.decay_rate;
        if d == 0.0 {
            return Some(self.threshold / g);
        }
        let arg = 1.0 + self.threshold * d / g;
        if arg <= 0.0 {
            None
        } else {
            Some(arg.ln() / d)
        }
    }
}

/// Gain above which a finite delay exists: `G* = Γ·n_th/(n_th+1)`.
///
/// Derived from the saturation condition `G/(Γ−G) > n_th`. At `G = G*`
/// exactly, `n(t)` approaches `n_th` asymptotically and never crosses it.
pub fn threshold_gain(decay_rate: f64, threshold: f64) -> f64 {
    decay_rate * threshold / (threshold + 1.0)
}

/// Delay at each pump power. Powers must be positive, finite and strictly
/// ascending; `None` entries mark sub-threshold powers.
pub fn delay_vs_power(
    gain_per_watt: f64,
    decay_rate: f64,
    threshold: f64,
    powers: &[f64],
) -> Result<Vec<(f64, Option<f64>)>, StimulationError> {
    if !powers.iter().all(|p| p.is_finite() && *p > 0.0) || !powers.windows(2).all(|w| w[0] < w[1])
    {
        return Err(StimulationError::UnsortedPowers);
    }
    powers
        .iter()
        .map(|&p| {
            RateParams::new(gain_per_watt, p, decay_rate, threshold)
                .map(|r| (p, r.stimulation_delay()))
        })
        .collect()
}

/// CSV with header `power_w,delay_s`; an empty second field marks powers
/// with no finite onset.
pub fn delays_to_csv(rows: &[(f64, Option<f64>)]) -> String {
    let mut out = String::from("power_w,delay_s\n");
    for (p, d) in rows {
        match d {
            Some(d) => out.push_str(&format!("{p:e},{d:e}\n")),
            None => out.push_str(&format!("{p:e},\n")),
        }
    }
    out
}
