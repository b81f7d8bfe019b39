//! JSON scenario schema: the file format the CLI consumes.
//!
//! The schema is strict (unknown keys are rejected everywhere) and
//! validation reports the dotted path of the offending field. Parsed
//! scenarios convert into a [`SimScenario`] plus a time grid; the schema
//! structs themselves serialize back to JSON unchanged, which is how run
//! manifests echo their effective configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{GasModel, PositionSampling, Reflection, ThermalConfig, WallKind, WallModel};
use crate::fitkit::DecayModel;
use crate::geometry::{BeamGeometry, BeamProfile, CellGeometry, SPEED_OF_LIGHT};
use crate::spinwave::{Convention, SimScenario};

/// Default lower edge of a logarithmic grid, as a fraction of `t_max_s`.
pub const DEFAULT_LOG_T_MIN_FRACTION: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

fn ensure(cond: bool, path: &str, message: &str) -> Result<(), ScenarioError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(path, message))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cell: CellSpec,
    pub thermal: ThermalSpec,
    pub optics: OpticsSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub gas: GasSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub stimulation: Option<StimulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub length_m: f64,
    pub radius_m: f64,
    pub wall: WallSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub kind: WallKind,
    /// Overrides the coating default (1e-4 paraffin, 1 bare) when set.
    #[serde(default)]
    pub spin_destruction_prob: Option<f64>,
    #[serde(default = "default_reflection")]
    pub reflection: Reflection,
}

fn default_reflection() -> Reflection {
    Reflection::DiffuseThermal
}

impl WallSpec {
    pub fn destruction_prob(&self) -> f64 {
        self.spin_destruction_prob
            .unwrap_or_else(|| self.kind.default_destruction_prob())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GasKind {
    None,
    Buffer,
}

/// Buffer gas: strong velocity-randomizing collisions at the given rate.
/// The default is a collisionless cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    #[serde(default = "default_gas_kind")]
    pub kind: GasKind,
    #[serde(default)]
    pub velocity_reset_rate_hz: f64,
}

fn default_gas_kind() -> GasKind {
    GasKind::None
}

impl Default for GasSpec {
    fn default() -> Self {
        GasSpec {
            kind: GasKind::None,
            velocity_reset_rate_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub temperature_k: f64,
    pub atomic_mass_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSpec {
    pub write_wavelength_m: f64,
    /// Ground-state hyperfine splitting; defaults to the rubidium-87 value.
    #[serde(default = "default_hyperfine")]
    pub hyperfine_split_hz: f64,
    pub detection_angle_rad: f64,
    pub write_waist_m: f64,
    pub read_waist_m: f64,
    #[serde(default = "default_profile")]
    pub profile: BeamProfile,
}

fn default_hyperfine() -> f64 {
    6.8347e9
}

fn default_profile() -> BeamProfile {
    BeamProfile::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub n_atoms: usize,
    pub seed: u64,
    pub time_grid: TimeGridSpec,
}

fn default_convention() -> Convention {
    Convention::PhasedArray
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_max_s: f64,
    pub n_points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: GridSpacing,
    /// First non-zero point of a log grid; defaults to `t_max_s·1e-5`.
    /// Ignored for linear grids.
    #[serde(default)]
    pub t_min_s: Option<f64>,
}

fn default_spacing() -> GridSpacing {
    GridSpacing::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_convention")]
    pub convention: Convention,
    #[serde(default = "default_fit_models")]
    pub fit_models: Vec<DecayModel>,
}

fn default_fit_models() -> Vec<DecayModel> {
    vec![DecayModel::Exp1, DecayModel::Gauss1, DecayModel::Exp2]
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            convention: default_convention(),
            fit_models: default_fit_models(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulationSpec {
    pub gain_per_watt: f64,
    pub decay_rate_hz: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub powers_w: Vec<f64>,
}

fn default_threshold() -> f64 {
    1e4
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    /// Field-level validation with dotted paths in the error messages.
    /// Successful validation guarantees [`to_sim`](Self::to_sim) and
    /// [`time_grid`](Self::time_grid) succeed.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;

        ensure(
            pos(self.cell.length_m),
            "cell.length_m",
            "must be positive and finite",
        )?;
        ensure(
            pos(self.cell.radius_m),
            "cell.radius_m",
            "must be positive and finite",
        )?;
        let p = self.cell.wall.destruction_prob();
        ensure(
            p.is_finite() && (0.0..=1.0).contains(&p),
            "cell.wall.spin_destruction_prob",
            "must lie in [0, 1]",
        )?;

        ensure(
            self.gas.velocity_reset_rate_hz.is_finite() && self.gas.velocity_reset_rate_hz >= 0.0,
            "gas.velocity_reset_rate_hz",
            "must be non-negative and finite",
        )?;
        ensure(
            self.gas.kind == GasKind::Buffer || self.gas.velocity_reset_rate_hz == 0.0,
            "gas.velocity_reset_rate_hz",
            "must be 0 when gas.kind is none",
        )?;

        ensure(
            pos(self.thermal.temperature_k),
            "thermal.temperature_k",
            "must be positive and finite",
        )?;
        ensure(
            pos(self.thermal.atomic_mass_kg),
            "thermal.atomic_mass_kg",
            "must be positive and finite",
        )?;

        let o = &self.optics;
        ensure(
            pos(o.write_wavelength_m),
            "optics.write_wavelength_m",
            "must be positive and finite",
        )?;
        ensure(
            o.hyperfine_split_hz.is_finite() && o.hyperfine_split_hz >= 0.0,
            "optics.hyperfine_split_hz",
            "must be non-negative and finite",
        )?;
        ensure(
            o.hyperfine_split_hz < SPEED_OF_LIGHT / o.write_wavelength_m,
            "optics.hyperfine_split_hz",
            "must stay below the write frequency",
        )?;
        ensure(
            o.detection_angle_rad.is_finite()
                && (0.0..std::f64::consts::FRAC_PI_2).contains(&o.detection_angle_rad),
            "optics.detection_angle_rad",
            "must lie in [0, pi/2)",
        )?;
        ensure(
            pos(o.write_waist_m),
            "optics.write_waist_m",
            "must be positive and finite",
        )?;
        ensure(
            pos(o.read_waist_m),
            "optics.read_waist_m",
            "must be positive and finite",
        )?;

        ensure(self.sim.n_atoms >= 1, "sim.n_atoms", "must be at least 1")?;
        let g = &self.sim.time_grid;
        ensure(
            pos(g.t_max_s),
            "sim.time_grid.t_max_s",
            "must be positive and finite",
        )?;
        ensure(
            g.n_points >= 2,
            "sim.time_grid.n_points",
            "must be at least 2",
        )?;
        if let Some(t_min) = g.t_min_s {
            ensure(
                pos(t_min) && t_min < g.t_max_s,
                "sim.time_grid.t_min_s",
                "must satisfy 0 < t_min_s < t_max_s",
            )?;
        }

        ensure(
            !self.analysis.fit_models.is_empty(),
            "analysis.fit_models",
            "must name at least one model",
        )?;
        let needed = self
            .analysis
            .fit_models
            .iter()
            .map(|m| m.min_points())
            .max()
            .unwrap_or(0);
        ensure(
            g.n_points >= needed,
            "sim.time_grid.n_points",
            &format!("must be at least {needed} for the requested fit models"),
        )?;

        if let Some(stim) = &self.stimulation {
            ensure(
                stim.gain_per_watt.is_finite() && stim.gain_per_watt >= 0.0,
                "stimulation.gain_per_watt",
                "must be non-negative and finite",
            )?;
            ensure(
                stim.decay_rate_hz.is_finite() && stim.decay_rate_hz >= 0.0,
                "stimulation.decay_rate_hz",
                "must be non-negative and finite",
            )?;
            ensure(
                stim.threshold.is_finite() && stim.threshold >= 1.0,
                "stimulation.threshold",
                "must be at least 1",
            )?;
            ensure(
                !stim.powers_w.is_empty(),
                "stimulation.powers_w",
                "must name at least one power",
            )?;
            ensure(
                stim.powers_w.iter().all(|p| p.is_finite() && *p > 0.0)
                    && stim.powers_w.windows(2).all(|w| w[0] < w[1]),
                "stimulation.powers_w",
                "must be positive, finite and strictly ascending",
            )?;
        }
        Ok(())
    }

    /// Build the simulation input. Runs [`validate`](Self::validate) first.
    pub fn to_sim(&self) -> Result<SimScenario, ScenarioError> {
        self.validate()?;
        let wall = WallModel::new(
            self.cell.wall.kind,
            self.cell.wall.destruction_prob(),
            self.cell.wall.reflection,
        )
        .map_err(|e| invalid("cell.wall", e.to_string()))?;
        let cell = CellGeometry::new(self.cell.length_m, self.cell.radius_m, wall)
            .map_err(|e| invalid("cell", e.to_string()))?;
        let beams = BeamGeometry::new(
            self.optics.write_waist_m,
            self.optics.read_waist_m,
            self.optics.detection_angle_rad,
            self.optics.profile,
        )
        .map_err(|e| invalid("optics", e.to_string()))?;
        let thermal = ThermalConfig::new(self.thermal.temperature_k, self.thermal.atomic_mass_kg)
            .map_err(|e| invalid("thermal", e.to_string()))?;
        let gas = match self.gas.kind {
            GasKind::Buffer if self.gas.velocity_reset_rate_hz > 0.0 => {
                GasModel::buffer(self.gas.velocity_reset_rate_hz)
                    .map_err(|e| invalid("gas.velocity_reset_rate_hz", e.to_string()))?
            }
            _ => GasModel::None,
        };
        Ok(SimScenario {
            cell,
            beams,
            thermal,
            gas,
            write_wavelength: self.optics.write_wavelength_m,
            hyperfine_split: self.optics.hyperfine_split_hz,
            // Uniform positions with the write amplitude folded into the
            // imprint weights; the sampled-density alternative exists for
            // tests but is not a scenario knob.
            sampling: PositionSampling::Uniform,
            convention: self.analysis.convention,
            n_atoms: self.sim.n_atoms,
            seed: self.sim.seed,
        })
    }

    /// Readout time grid, starting at exactly 0.
    ///
    /// Linear grids place `n_points` equidistant points on `[0, t_max]`.
    /// Log grids keep the 0 point and spread the remaining points
    /// geometrically from `t_min_s` (default `t_max·1e-5`) to `t_max`.
    pub fn time_grid(&self) -> Result<Vec<f64>, ScenarioError> {
        self.validate()?;
        let g = &self.sim.time_grid;
        let n = g.n_points;
        let t_max = g.t_max_s;
        let grid = match g.spacing {
            GridSpacing::Linear => (0..n)
                .map(|i| t_max * i as f64 / (n - 1) as f64)
                .collect::<Vec<f64>>(),
            GridSpacing::Log => {
                let t_min = g.t_min_s.unwrap_or(t_max * DEFAULT_LOG_T_MIN_FRACTION);
                let mut grid = Vec::with_capacity(n);
                grid.push(0.0);
                let ratio = t_max / t_min;
                for i in 1..n {
                    // n = 2 degenerates to [0, t_max].
                    let frac = if n > 2 {
                        (i - 1) as f64 / (n - 2) as f64
                    } else {
                        1.0
                    };
                    grid.push(t_min * ratio.powf(frac));
                }
                grid
            }
        };
        debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_json() -> String {
        r#"{
            "cell": {"length_m": 0.05, "radius_m": 2.5e-3, "wall": {"kind": "paraffin"}},
            "thermal": {"temperature_k": 351.15, "atomic_mass_kg": 1.4432e-25},
            "optics": {
                "write_wavelength_m": 795e-9,
                "detection_angle_rad": 0.0349,
                "write_waist_m": 1e-3,
                "read_waist_m": 1e-3
            },
            "sim": {"n_atoms": 1000, "seed": 7, "time_grid": {"t_max_s": 1e-4, "n_points": 40}}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.validate().unwrap();
        assert_eq!(s.cell.wall.destruction_prob(), 1e-4);
        assert_eq!(s.cell.wall.reflection, Reflection::DiffuseThermal);
        assert_eq!(s.optics.hyperfine_split_hz, 6.8347e9);
        assert_eq!(s.optics.profile, BeamProfile::Gaussian);
        assert_eq!(s.gas.kind, GasKind::None);
        assert_eq!(s.gas.velocity_reset_rate_hz, 0.0);
        assert_eq!(s.analysis.convention, Convention::PhasedArray);
        assert_eq!(
            s.analysis.fit_models,
            vec![DecayModel::Exp1, DecayModel::Gauss1, DecayModel::Exp2]
        );
        assert!(s.stimulation.is_none());

        let sim = s.to_sim().unwrap();
        assert_eq!(sim.n_atoms, 1000);
        assert_eq!(sim.seed, 7);
        assert_eq!(sim.sampling, PositionSampling::Uniform);
        assert!(matches!(sim.gas, GasModel::None));
    }

    #[test]
    fn gas_kind_none_forbids_a_reset_rate() {
        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.gas.velocity_reset_rate_hz = 1e6;
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("gas.kind is none"));
        s.gas.kind = GasKind::Buffer;
        s.validate().unwrap();
        assert!(matches!(s.to_sim().unwrap().gas, GasModel::Buffer { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let top = minimal_json().replace("\"cell\"", "\"extra\": 1, \"cell\"");
        let err = Scenario::from_json_str(&top).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");

        let nested = minimal_json().replace("\"length_m\"", "\"lenght_m\"");
        let err = Scenario::from_json_str(&nested).unwrap_err();
        assert!(err.to_string().contains("lenght_m"), "{err}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.cell.radius_m = -1.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().starts_with("cell.radius_m:"), "{err}");

        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.cell.wall.spin_destruction_prob = Some(1.5);
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("cell.wall.spin_destruction_prob"));

        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.sim.time_grid.n_points = 5;
        // exp2 is among the default fit models and needs 7 points.
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("sim.time_grid.n_points"));

        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.stimulation = Some(StimulationSpec {
            gain_per_watt: 1e7,
            decay_rate_hz: 10.0,
            threshold: 1e4,
            powers_w: vec![2e-3, 1e-3],
        });
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("stimulation.powers_w"));
    }

    #[test]
    fn linear_grid_shape() {
        let s = Scenario::from_json_str(&minimal_json()).unwrap();
        let grid = s.time_grid().unwrap();
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], 0.0);
        assert_relative_eq!(grid[39], 1e-4, max_relative = 1e-15);
        let step = grid[1] - grid[0];
        for w in grid.windows(2) {
            assert_relative_eq!(w[1] - w[0], step, max_relative = 1e-9);
        }
    }

    #[test]
    fn log_grid_shape_and_default_floor() {
        let mut s = Scenario::from_json_str(&minimal_json()).unwrap();
        s.sim.time_grid.spacing = GridSpacing::Log;
        let grid = s.time_grid().unwrap();
        assert_eq!(grid[0], 0.0);
        assert_relative_eq!(grid[1], 1e-4 * 1e-5, max_relative = 1e-12);
        assert_relative_eq!(grid[39], 1e-4, max_relative = 1e-12);
        // Geometric: constant ratio between successive non-zero points.
        let r = grid[2] / grid[1];
        for w in grid[1..].windows(2) {
            assert_relative_eq!(w[1] / w[0], r, max_relative = 1e-9);
        }

        s.sim.time_grid.t_min_s = Some(1e-6);
        let grid = s.time_grid().unwrap();
        assert_relative_eq!(grid[1], 1e-6, max_relative = 1e-12);

        s.sim.time_grid.t_min_s = Some(2e-4);
        assert!(s.time_grid().is_err());
    }

    #[test]
    fn scenario_roundtrips_through_json() {
        let s = Scenario::from_json_str(&minimal_json()).unwrap();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back = Scenario::from_json_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn bare_wall_default_probability() {
        let json = minimal_json().replace("\"paraffin\"", "\"bare\"");
        let s = Scenario::from_json_str(&json).unwrap();
        assert_eq!(s.cell.wall.destruction_prob(), 1.0);
    }
}
