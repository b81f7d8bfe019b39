//! Thermal atom ensembles and event-driven ballistic transport.
//!
//! Atoms fly in straight lines between discrete events: wall contacts
//! (re-emission plus possible spin destruction) and buffer-gas velocity
//! resets. Between events nothing is integrated numerically, so propagation
//! is exact to floating point and its cost scales with the event rate, not
//! with the requested time step.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{BeamGeometry, BeamProfile, CellGeometry};
use crate::rng::AtomRng;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Inward nudge, as a fraction of the cell radius, applied when an atom sits
/// on the side-wall/end-cap edge where the boundary solve degenerates.
const EDGE_NUDGE: f64 = 1e-12;

/// Hard cap on events per `propagate` call; hitting it means runaway
/// parameters rather than physics.
const MAX_EVENTS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("propagation interval ends at {t_end} before it starts at {t_start}")]
    InvalidInterval { t_start: f64, t_end: f64 },
    #[error("atom stream {stream_id} reached a non-finite state")]
    NumericalFailure { stream_id: u64 },
    #[error("atom stream {stream_id} exceeded {MAX_EVENTS} events in one interval")]
    EventOverflow { stream_id: u64 },
}

/// Temperature and atomic mass, with the derived velocity scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalConfig {
    temperature: f64,
    atomic_mass: f64,
}

impl ThermalConfig {
    pub fn new(temperature: f64, atomic_mass: f64) -> Result<Self, EnsembleError> {
        for (name, v) in [("temperature", temperature), ("atomic_mass", atomic_mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnsembleError::InvalidParam(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            temperature,
            atomic_mass,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn atomic_mass(&self) -> f64 {
        self.atomic_mass
    }

    /// Per-axis Maxwell-Boltzmann standard deviation `√(k_B T/m)`, m/s.
    pub fn sigma_v(&self) -> f64 {
        (BOLTZMANN * self.temperature / self.atomic_mass).sqrt()
    }

    /// Mean speed `√(8 k_B T/(π m))`, m/s.
    pub fn mean_speed(&self) -> f64 {
        (8.0 * BOLTZMANN * self.temperature / (std::f64::consts::PI * self.atomic_mass)).sqrt()
    }
}

/// Wall coating class. The coating fixes the default spin-destruction
/// probability; [`WallModel::new`] can override it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    /// Anti-relaxation coating: ~1e-4 destruction probability per contact.
    Paraffin,
    /// Uncoated glass: every contact destroys the spin state.
    Bare,
}

impl WallKind {
    pub fn default_destruction_prob(&self) -> f64 {
        match self {
            WallKind::Paraffin => 1e-4,
            WallKind::Bare => 1.0,
        }
    }
}

/// How the wall re-emits an atom's velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reflection {
    /// Full thermal accommodation: cosine-law direction, flux-weighted speed.
    DiffuseThermal,
    /// Mirror reflection of the incoming velocity.
    Specular,
}

/// Wall physics: coating, per-contact spin destruction, re-emission law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WallModel {
    kind: WallKind,
    spin_destruction_prob: f64,
    reflection: Reflection,
}

impl WallModel {
    pub fn new(
        kind: WallKind,
        spin_destruction_prob: f64,
        reflection: Reflection,
    ) -> Result<Self, EnsembleError> {
        if !(spin_destruction_prob.is_finite() && (0.0..=1.0).contains(&spin_destruction_prob)) {
            return Err(EnsembleError::InvalidParam(format!(
                "spin_destruction_prob must lie in [0, 1], got {spin_destruction_prob}"
            )));
        }
        Ok(Self {
            kind,
            spin_destruction_prob,
            reflection,
        })
    }

    /// Paraffin coating with its default destruction probability, diffuse.
    pub fn paraffin() -> Self {
        Self {
            kind: WallKind::Paraffin,
            spin_destruction_prob: WallKind::Paraffin.default_destruction_prob(),
            reflection: Reflection::DiffuseThermal,
        }
    }

    /// Bare glass: every contact destroys the spin state, diffuse.
    pub fn bare() -> Self {
        Self {
            kind: WallKind::Bare,
            spin_destruction_prob: WallKind::Bare.default_destruction_prob(),
            reflection: Reflection::DiffuseThermal,
        }
    }

    pub fn kind(&self) -> WallKind {
        self.kind
    }

    pub fn spin_destruction_prob(&self) -> f64 {
        self.spin_destruction_prob
    }

    pub fn reflection(&self) -> Reflection {
        self.reflection
    }
}

/// Buffer-gas model: either none (pure ballistic flight) or strong velocity-
/// randomizing collisions at a Poisson rate. A strong collision redraws the
/// full velocity vector from the thermal distribution; position is untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GasModel {
    None,
    Buffer { velocity_reset_rate: f64 },
}

impl GasModel {
    pub fn buffer(velocity_reset_rate: f64) -> Result<Self, EnsembleError> {
        if !(velocity_reset_rate.is_finite() && velocity_reset_rate >= 0.0) {
            return Err(EnsembleError::InvalidParam(format!(
                "velocity_reset_rate must be non-negative and finite, got {velocity_reset_rate}"
            )));
        }
        Ok(GasModel::Buffer {
            velocity_reset_rate,
        })
    }

    pub fn reset_rate(&self) -> f64 {
        match self {
            GasModel::None => 0.0,
            GasModel::Buffer {
                velocity_reset_rate,
            } => *velocity_reset_rate,
        }
    }
}

/// One atom of the ensemble. `coherent` starts true and is cleared for good
/// the first time a wall contact destroys the spin state; `stream_id` ties
/// the atom to its RNG stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub coherent: bool,
    pub stream_id: u64,
}

/// How initial positions are drawn. This is one half of the double-counting
/// guard for the write-beam profile: either positions are uniform and the
/// profile enters through per-atom weights, or positions follow the profile
/// and the weights stay at one. Never both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSampling {
    /// Uniform over the cell volume; write profile becomes a weight.
    Uniform,
    /// Density follows the write-beam intensity (clipped at the wall);
    /// weights stay at one.
    WriteProfile,
}

/// Draw one atom. Consumes exactly three uniforms (radial, azimuthal, axial)
/// followed by three standard normals (velocity), in that order; the fixed
/// draw count keeps streams aligned across sampling modes.
pub fn sample_atom(
    cell: &CellGeometry,
    beams: &BeamGeometry,
    thermal: &ThermalConfig,
    sampling: PositionSampling,
    stream_id: u64,
    rng: &mut AtomRng,
) -> AtomState {
    let u_radial: f64 = rng.random();
    let u_azimuth: f64 = rng.random();
    let u_axial: f64 = rng.random();

    let r = cell.radius();
    let rho = match sampling {
        PositionSampling::Uniform => r * u_radial.sqrt(),
        PositionSampling::WriteProfile => {
            let w = beams.write_waist();
            if w.is_infinite() {
                r * u_radial.sqrt()
            } else {
                match beams.profile() {
                    // Intensity exp(−2ρ²/w²): invert the CDF of ρ² (a
                    // truncated exponential on [0, R²]), so no rejection
                    // loop and a fixed draw count.
                    BeamProfile::Gaussian => {
                        let q = -(-2.0 * r * r / (w * w)).exp_m1();
                        (-(w * w / 2.0) * (1.0 - u_radial * q).ln()).sqrt()
                    }
                    BeamProfile::TopHat => w.min(r) * u_radial.sqrt(),
                }
            }
        }
    };
    let phi = 2.0 * std::f64::consts::PI * u_azimuth;
    let z = (u_axial - 0.5) * cell.length();

    let sigma = thermal.sigma_v();
    let velocity = sample_thermal_velocity(sigma, rng);

    AtomState {
        position: Vector3::new(rho * phi.cos(), rho * phi.sin(), z),
        velocity,
        coherent: true,
        stream_id,
    }
}

/// Draw `n` atoms on streams `0..n` of `master_seed`.
pub fn sample_ensemble(
    n: usize,
    cell: &CellGeometry,
    beams: &BeamGeometry,
    thermal: &ThermalConfig,
    sampling: PositionSampling,
    master_seed: u64,
) -> Vec<AtomState> {
    (0..n)
        .map(|j| {
            let mut rng = crate::rng::atom_stream(master_seed, j as u64);
            sample_atom(cell, beams, thermal, sampling, j as u64, &mut rng)
        })
        .collect()
}

fn sample_thermal_velocity(sigma: f64, rng: &mut AtomRng) -> Vector3<f64> {
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let n3: f64 = rng.sample(StandardNormal);
    Vector3::new(sigma * n1, sigma * n2, sigma * n3)
}

/// Event counts accumulated over one `propagate` call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub wall_hits: u64,
    pub gas_collisions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WallSurface {
    Side,
    CapPlus,
    CapMinus,
}

/// Time to the side wall along the current velocity, or infinity.
///
/// The quadratic `|xy + v_xy t| = R` always takes the `+` root: for a point
/// inside (or exactly on) the wall that root is the forward exit crossing,
/// and it stays well-conditioned when the atom sits on the wall itself.
fn side_wall_time(position: &Vector3<f64>, velocity: &Vector3<f64>, radius: f64) -> f64 {
    let a = velocity.x * velocity.x + velocity.y * velocity.y;
    if a == 0.0 {
        return f64::INFINITY;
    }
    let b = 2.0 * (position.x * velocity.x + position.y * velocity.y);
    let c = position.x * position.x + position.y * position.y - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return f64::INFINITY;
    }
    let t = (-b + disc.sqrt()) / (2.0 * a);
    if t > 0.0 {
        t
    } else {
        f64::INFINITY
    }
}

/// Time to whichever end cap the axial velocity points at, or infinity.
fn endcap_time(z: f64, vz: f64, half_length: f64) -> (f64, WallSurface) {
    if vz > 0.0 {
        let t = (half_length - z) / vz;
        if t > 0.0 {
            return (t, WallSurface::CapPlus);
        }
    } else if vz < 0.0 {
        let t = (-half_length - z) / vz;
        if t > 0.0 {
            return (t, WallSurface::CapMinus);
        }
    }
    (f64::INFINITY, WallSurface::CapPlus)
}

fn inward_normal(surface: WallSurface, position: &Vector3<f64>, radius: f64) -> Vector3<f64> {
    match surface {
        WallSurface::Side => Vector3::new(-position.x / radius, -position.y / radius, 0.0),
        WallSurface::CapPlus => Vector3::new(0.0, 0.0, -1.0),
        WallSurface::CapMinus => Vector3::new(0.0, 0.0, 1.0),
    }
}

/// Diffuse thermal re-emission from a wall with inward normal `n`.
///
/// The normal component is Rayleigh(σ) (the flux-weighted thermal law, which
/// is exactly what detailed balance requires to keep the bulk distribution
/// Maxwell-Boltzmann) and each tangential component is Normal(0, σ).
/// Consumes one uniform then two standard normals.
fn sample_wall_reemission(
    surface: WallSurface,
    position: &Vector3<f64>,
    radius: f64,
    sigma: f64,
    rng: &mut AtomRng,
) -> Vector3<f64> {
    let n = inward_normal(surface, position, radius);
    let (t1, t2) = match surface {
        WallSurface::Side => (
            Vector3::new(-position.y / radius, position.x / radius, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ),
        WallSurface::CapPlus | WallSurface::CapMinus => {
            (Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0))
        }
    };
    let u: f64 = rng.random();
    let v_n = sigma * (-2.0 * (1.0 - u).ln()).sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    n * v_n + t1 * (sigma * g1) + t2 * (sigma * g2)
}

/// Propagate one atom from `t_start` to `t_end`.
///
/// Wall contacts always consume the spin-destruction uniform, even when the
/// atom is already incoherent or the probability is zero, so trajectories
/// are bitwise identical across destruction probabilities at equal seed.
/// Draw order per event: wall diffuse = destruction uniform, re-emission
/// uniform, two normals; wall specular = destruction uniform; gas reset =
/// three normals. With a buffer gas active, each flight leg additionally
/// consumes one uniform for the exponential collision clock.
pub fn propagate(
    atom: &AtomState,
    t_start: f64,
    t_end: f64,
    cell: &CellGeometry,
    thermal: &ThermalConfig,
    gas: &GasModel,
    rng: &mut AtomRng,
) -> Result<AtomState, EnsembleError> {
    propagate_with_stats(atom, t_start, t_end, cell, thermal, gas, rng).map(|(state, _)| state)
}

/// [`propagate`], also returning event counts.
pub fn propagate_with_stats(
    atom: &AtomState,
    t_start: f64,
    t_end: f64,
    cell: &CellGeometry,
    thermal: &ThermalConfig,
    gas: &GasModel,
    rng: &mut AtomRng,
) -> Result<(AtomState, PropagationStats), EnsembleError> {
    // NaN endpoints fail too, not only reversed intervals.
    if t_end.is_nan() || t_start.is_nan() || t_end < t_start {
        return Err(EnsembleError::InvalidInterval { t_start, t_end });
    }
    let finite = |v: &Vector3<f64>| v.x.is_finite() && v.y.is_finite() && v.z.is_finite();
    if !finite(&atom.position) || !finite(&atom.velocity) {
        return Err(EnsembleError::NumericalFailure {
            stream_id: atom.stream_id,
        });
    }

    let radius = cell.radius();
    let half_length = 0.5 * cell.length();
    let sigma = thermal.sigma_v();
    let p_destroy = cell.wall().spin_destruction_prob();
    let reflection = cell.wall().reflection();
    let gas_rate = gas.reset_rate();

    let mut position = atom.position;
    let mut velocity = atom.velocity;
    let mut coherent = atom.coherent;
    let mut remaining = t_end - t_start;
    let mut stats = PropagationStats::default();
    let mut events: u64 = 0;

    while remaining > 0.0 {
        // Edge degeneracy: on the side-wall/end-cap rim both boundary solves
        // return ~0 and the surface normal is ambiguous; pull the atom
        // inward by EDGE_NUDGE·radius first.
        let rho = position.x.hypot(position.y);
        if radius - rho <= EDGE_NUDGE * radius
            && half_length - position.z.abs() <= EDGE_NUDGE * radius
        {
            if rho > 0.0 {
                let scale = (rho - EDGE_NUDGE * radius) / rho;
                position.x *= scale;
                position.y *= scale;
            }
            position.z -= position.z.signum() * EDGE_NUDGE * radius;
        }

        let t_side = side_wall_time(&position, &velocity, radius);
        let (t_cap, cap_surface) = endcap_time(position.z, velocity.z, half_length);
        let (t_wall, surface) = if t_side <= t_cap {
            (t_side, WallSurface::Side)
        } else {
            (t_cap, cap_surface)
        };
        let t_gas = if gas_rate > 0.0 {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / gas_rate
        } else {
            f64::INFINITY
        };

        if remaining <= t_wall && remaining <= t_gas {
            position += velocity * remaining;
            break;
        }

        if t_gas < t_wall {
            position += velocity * t_gas;
            remaining -= t_gas;
            velocity = sample_thermal_velocity(sigma, rng);
            stats.gas_collisions += 1;
        } else {
            position += velocity * t_wall;
            remaining -= t_wall;
            // Snap exactly onto the surface so the next solve starts from a
            // consistent boundary state.
            match surface {
                WallSurface::Side => {
                    let r_now = position.x.hypot(position.y);
                    if r_now > 0.0 {
                        let scale = radius / r_now;
                        position.x *= scale;
                        position.y *= scale;
                    }
                }
                WallSurface::CapPlus => position.z = half_length,
                WallSurface::CapMinus => position.z = -half_length,
            }
            stats.wall_hits += 1;

            let u: f64 = rng.random();
            if u < p_destroy {
                coherent = false;
            }
            velocity = match reflection {
                Reflection::DiffuseThermal => {
                    sample_wall_reemission(surface, &position, radius, sigma, rng)
                }
                Reflection::Specular => {
                    let n = inward_normal(surface, &position, radius);
                    velocity - n * (2.0 * velocity.dot(&n))
                }
            };
        }

        events += 1;
        if events > MAX_EVENTS {
            return Err(EnsembleError::EventOverflow {
                stream_id: atom.stream_id,
            });
        }
    }

    if !finite(&position) || !finite(&velocity) {
        return Err(EnsembleError::NumericalFailure {
            stream_id: atom.stream_id,
        });
    }
    Ok((
        AtomState {
            position,
            velocity,
            coherent,
            stream_id: atom.stream_id,
        },
        stats,
    ))
}

/// Kinetic-theory mean wall-collision interval `4V/(v̄S)`, s.
///
/// This is the stationary mean time between successive wall contacts of one
/// atom (total flight time over total contacts), not the mean time from a
/// uniform bulk start to the first contact; the latter is geometry-dependent
/// and shorter.
pub fn mean_wall_collision_time(cell: &CellGeometry, thermal: &ThermalConfig) -> f64 {
    4.0 * cell.volume() / (thermal.mean_speed() * cell.surface_area())
}

/// Mean free time between atom-atom collisions, `1/(n σ_cc √2 v̄)`, s.
/// Zero density or cross-section means no collisions: infinity.
pub fn atom_collision_time_estimate(
    density: f64,
    cross_section: f64,
    thermal: &ThermalConfig,
) -> Result<f64, EnsembleError> {
    for (name, v) in [("density", density), ("cross_section", cross_section)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(EnsembleError::InvalidParam(format!(
                "{name} must be non-negative and finite, got {v}"
            )));
        }
    }
    if density == 0.0 || cross_section == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (density * cross_section * std::f64::consts::SQRT_2 * thermal.mean_speed()))
}
