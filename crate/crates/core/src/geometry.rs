//! Beam and cell geometry and the spin-wave mode they define.
//!
//! A write beam scattering into a detected Stokes mode leaves behind a spin
//! wave with wavevector `Δk = k_w − k_s`. Everything downstream (motional
//! dephasing, diffusion narrowing, mode matching) is controlled by `|Δk|`,
//! so this module is the single place where beam angles and frequencies are
//! turned into that wavevector.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::WallModel;

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Phase span across the ensemble, as a fraction of `π`, below which mode
/// dephasing is treated as negligible.
pub const NEGLIGIBLE_PHASE_FRACTION: f64 = 0.1;

const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("direction must be a unit vector, got norm {0}")]
    NonUnitDirection(f64),
    #[error("target wavelength {target} m is not reachable: it must exceed the write wavelength {write} m")]
    UnreachableWavelength { target: f64, write: f64 },
}

fn require_positive(name: &str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidParam(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// A monochromatic beam reduced to what the spin-wave mode cares about:
/// vacuum wavelength and unit propagation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalMode {
    wavelength: f64,
    direction: Vector3<f64>,
}

impl OpticalMode {
    pub fn new(wavelength: f64, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        require_positive("wavelength", wavelength)?;
        let norm = direction.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(GeometryError::NonUnitDirection(norm));
        }
        Ok(Self {
            wavelength,
            direction,
        })
    }

    /// Mode propagating along the cell axis (+z).
    pub fn along_axis(wavelength: f64) -> Result<Self, GeometryError> {
        Self::new(wavelength, Vector3::z())
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    /// `2π/λ`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// `c/λ`, Hz.
    pub fn frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    /// Wavevector `k·d̂`, rad/m.
    pub fn wavevector(&self) -> Vector3<f64> {
        self.direction * self.wavenumber()
    }
}

/// Stokes mode for a given write mode: collected at `detection_angle` from
/// the write direction (rotated about +y, so a +z write tilts into the x-z
/// plane) and red-shifted by the ground-state hyperfine splitting.
///
/// The frequency shift is what keeps the collinear mismatch finite:
/// `k_w − k_s = 2π·Δν_hf/c` even at zero angle.
pub fn stokes_mode(
    write: &OpticalMode,
    detection_angle: f64,
    hyperfine_split: f64,
) -> Result<OpticalMode, GeometryError> {
    if !detection_angle.is_finite() || !(0.0..FRAC_PI_2).contains(&detection_angle) {
        return Err(GeometryError::InvalidParam(format!(
            "detection_angle must lie in [0, pi/2), got {detection_angle}"
        )));
    }
    if !hyperfine_split.is_finite() || hyperfine_split < 0.0 {
        return Err(GeometryError::InvalidParam(format!(
            "hyperfine_split must be non-negative and finite, got {hyperfine_split}"
        )));
    }
    let f_s = write.frequency() - hyperfine_split;
    if f_s <= 0.0 {
        return Err(GeometryError::InvalidParam(format!(
            "hyperfine_split {hyperfine_split} Hz exceeds the write frequency {} Hz",
            write.frequency()
        )));
    }
    let direction =
        Rotation3::from_axis_angle(&Vector3::y_axis(), detection_angle) * write.direction();
    // Renormalize: the rotation is orthogonal but accumulates ~1 ulp.
    OpticalMode::new(SPEED_OF_LIGHT / f_s, direction.normalize())
}

/// Spin-wave mode left in the ensemble after a write/Stokes event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinWaveMode {
    delta_k: Vector3<f64>,
    magnitude: f64,
}

impl SpinWaveMode {
    pub fn from_delta_k(delta_k: Vector3<f64>) -> Self {
        Self {
            delta_k,
            magnitude: delta_k.norm(),
        }
    }

    /// `Δk` vector, rad/m.
    pub fn delta_k(&self) -> Vector3<f64> {
        self.delta_k
    }

    /// `|Δk|`, rad/m.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Spin-wave wavelength `2π/|Δk|`; infinite for a uniform mode.
    pub fn wavelength(&self) -> f64 {
        if self.magnitude == 0.0 {
            f64::INFINITY
        } else {
            2.0 * PI / self.magnitude
        }
    }

    /// A uniform mode (`Δk = 0`) accumulates no motional phase at all.
    pub fn is_uniform(&self) -> bool {
        self.magnitude == 0.0
    }

    /// Phase `Δk·r` imprinted on an atom at position `r`.
    pub fn phase_at(&self, position: &Vector3<f64>) -> f64 {
        self.delta_k.dot(position)
    }
}

/// `Δk = k_w − k_s` for a write/Stokes mode pair.
pub fn spin_wave_mode(write: &OpticalMode, stokes: &OpticalMode) -> SpinWaveMode {
    SpinWaveMode::from_delta_k(write.wavevector() - stokes.wavevector())
}

/// Small-angle approximation `|Δk| ≈ k_w·sin θ`, which drops the hyperfine
/// frequency shift. Useful as a cross-check against [`spin_wave_mode`]; the
/// mismatch vector is placed along +x to match the rotation convention.
pub fn small_angle_spin_wave_mode(
    write_wavelength: f64,
    angle: f64,
) -> Result<SpinWaveMode, GeometryError> {
    require_positive("write_wavelength", write_wavelength)?;
    if !angle.is_finite() || !(0.0..=FRAC_PI_2).contains(&angle) {
        return Err(GeometryError::InvalidParam(format!(
            "angle must lie in [0, pi/2], got {angle}"
        )));
    }
    let magnitude = 2.0 * PI / write_wavelength * angle.sin();
    Ok(SpinWaveMode::from_delta_k(Vector3::new(
        magnitude, 0.0, 0.0,
    )))
}

/// Result of the coarse dephasing estimate `Δk·l` vs. `0.1π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingCheck {
    /// `|Δk|·l`, the phase span across the extent `l`, rad.
    pub phase_span: f64,
    /// True when the span stays below [`NEGLIGIBLE_PHASE_FRACTION`]`·π`.
    pub negligible: bool,
}

/// Whether motional dephasing over an ensemble of extent `extent` (m) can be
/// ignored for this mode.
pub fn dephasing_negligible(mode: &SpinWaveMode, extent: f64) -> DephasingCheck {
    debug_assert!(extent.is_finite() && extent >= 0.0);
    let phase_span = mode.magnitude() * extent;
    DephasingCheck {
        phase_span,
        negligible: phase_span < NEGLIGIBLE_PHASE_FRACTION * PI,
    }
}

/// Largest write/Stokes angle whose spin-wave wavelength still reaches
/// `target_wavelength`, i.e. `arcsin(λ_w / λ_target)` in the small-shift
/// limit. Errors when the target is at or below the write wavelength, which
/// no geometry can reach.
pub fn max_angle_for_wavelength(
    write_wavelength: f64,
    target_wavelength: f64,
) -> Result<f64, GeometryError> {
    require_positive("write_wavelength", write_wavelength)?;
    require_positive("target_wavelength", target_wavelength)?;
    if target_wavelength <= write_wavelength {
        return Err(GeometryError::UnreachableWavelength {
            target: target_wavelength,
            write: write_wavelength,
        });
    }
    Ok((write_wavelength / target_wavelength).asin())
}

/// Cylindrical vapor cell: axis along z, end caps at `z = ±length/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellGeometry {
    length: f64,
    radius: f64,
    wall: WallModel,
}

impl CellGeometry {
    pub fn new(length: f64, radius: f64, wall: WallModel) -> Result<Self, GeometryError> {
        require_positive("cell length", length)?;
        require_positive("cell radius", radius)?;
        Ok(Self {
            length,
            radius,
            wall,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn wall(&self) -> &WallModel {
        &self.wall
    }

    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.length
    }

    /// Total interior surface area (side wall plus both end caps).
    pub fn surface_area(&self) -> f64 {
        2.0 * PI * self.radius * (self.radius + self.length)
    }

    /// True when `r` lies inside or on the boundary.
    pub fn contains(&self, position: &Vector3<f64>) -> bool {
        position.x.hypot(position.y) <= self.radius && position.z.abs() <= 0.5 * self.length
    }
}

/// Transverse beam intensity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamProfile {
    /// Intensity `exp(−2ρ²/w²)`; amplitude `exp(−ρ²/w²)`.
    Gaussian,
    /// Unit amplitude for `ρ ≤ w`, zero outside.
    TopHat,
}

/// Write/read beam layout. Both beams run along the cell axis; the Stokes
/// channel is collected at `detection_angle` from it. An infinite waist is
/// allowed and means a transversely uniform beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamGeometry {
    write_waist: f64,
    read_waist: f64,
    detection_angle: f64,
    profile: BeamProfile,
}

impl BeamGeometry {
    pub fn new(
        write_waist: f64,
        read_waist: f64,
        detection_angle: f64,
        profile: BeamProfile,
    ) -> Result<Self, GeometryError> {
        for (name, w) in [("write_waist", write_waist), ("read_waist", read_waist)] {
            // Infinite waists are legal (no transverse selection); NaN is not.
            if w.is_nan() || w <= 0.0 {
                return Err(GeometryError::InvalidParam(format!(
                    "{name} must be positive, got {w}"
                )));
            }
        }
        if !detection_angle.is_finite() || !(0.0..FRAC_PI_2).contains(&detection_angle) {
            return Err(GeometryError::InvalidParam(format!(
                "detection_angle must lie in [0, pi/2), got {detection_angle}"
            )));
        }
        Ok(Self {
            write_waist,
            read_waist,
            detection_angle,
            profile,
        })
    }

    pub fn write_waist(&self) -> f64 {
        self.write_waist
    }

    pub fn read_waist(&self) -> f64 {
        self.read_waist
    }

    pub fn detection_angle(&self) -> f64 {
        self.detection_angle
    }

    pub fn profile(&self) -> BeamProfile {
        self.profile
    }

    fn amplitude(profile: BeamProfile, waist: f64, rho: f64) -> f64 {
        if waist.is_infinite() {
            return 1.0;
        }
        match profile {
            BeamProfile::Gaussian => (-(rho * rho) / (waist * waist)).exp(),
            BeamProfile::TopHat => {
                if rho <= waist {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Write-beam field amplitude at transverse radius `rho`.
    pub fn write_amplitude(&self, rho: f64) -> f64 {
        Self::amplitude(self.profile, self.write_waist, rho)
    }

    /// Read-beam field amplitude at transverse radius `rho`.
    pub fn read_amplitude(&self, rho: f64) -> f64 {
        Self::amplitude(self.profile, self.read_waist, rho)
    }
}
