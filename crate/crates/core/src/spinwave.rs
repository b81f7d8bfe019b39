//! Spin-wave imprint and retrieval-efficiency estimation.
//!
//! The write process stamps each atom with the local mode phase `Δk·r_j(0)`.
//! Retrieval sums the per-atom emission amplitudes back into the detection
//! mode; atomic motion scrambles the relative phases and wall contacts
//! remove atoms from the sum, which is all the decoherence this model has.
//!
//! The estimator is
//!
//! `A(t) = Σ_j s_j(t) · w_j · u_j(t) · exp(i[Δk·r_j(t) − Δk·r_j(0)])`
//!
//! with `s_j` the survival flag, `w_j` the write weight, and `u_j(t)` the
//! read-beam amplitude at the atom's current position. Efficiencies are
//! ratios against `A(0)` (all atoms alive, all phases zero), so the curve
//! starts at exactly 1.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ensemble::{
    propagate, sample_atom, AtomState, EnsembleError, GasModel, PositionSampling, ThermalConfig,
};
use crate::geometry::{
    spin_wave_mode, stokes_mode, BeamGeometry, CellGeometry, GeometryError, OpticalMode,
    SpinWaveMode,
};
use crate::rng::atom_stream;

/// Number of jackknife blocks used for statistical errors (fewer when the
/// ensemble is smaller than this).
pub const JACKKNIFE_BLOCKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpinWaveError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("ensemble length {got} does not match the record length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("normalization A(0) is zero: no atom carries weight in the detection mode")]
    UndefinedNormalization,
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("propagation: {0}")]
    Propagation(#[from] EnsembleError),
    #[error("csv: {0}")]
    Csv(String),
}

/// Efficiency normalization convention.
///
/// `PhasedArray` is raw mode-matched intensity `|A(t)|²/|A(0)|²`: losing
/// atoms costs two powers of the survival fraction. `SingleExcitation`
/// re-normalizes to the surviving population, so uniform loss costs a single
/// power and pure dephasing is identical between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    PhasedArray,
    SingleExcitation,
}

/// Frozen imprint state: everything retrieval needs about t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveRecord {
    mode: SpinWaveMode,
    phases: Vec<f64>,
    weights: Vec<f64>,
    /// Read-beam amplitudes at the imprint positions; cached so `A(0)` can
    /// be reconstructed without the original ensemble.
    read_weights0: Vec<f64>,
}

impl SpinWaveRecord {
    pub fn new(
        mode: SpinWaveMode,
        phases: Vec<f64>,
        weights: Vec<f64>,
        read_weights0: Vec<f64>,
    ) -> Result<Self, SpinWaveError> {
        if phases.len() != weights.len() || phases.len() != read_weights0.len() {
            return Err(SpinWaveError::InvalidParam(format!(
                "phases ({}), weights ({}) and read weights ({}) must have equal length",
                phases.len(),
                weights.len(),
                read_weights0.len()
            )));
        }
        if !phases.iter().all(|p| p.is_finite()) {
            return Err(SpinWaveError::InvalidParam("non-finite phase".into()));
        }
        for (name, v) in [("weight", &weights), ("read weight", &read_weights0)] {
            if !v.iter().all(|w| w.is_finite() && *w >= 0.0) {
                return Err(SpinWaveError::InvalidParam(format!(
                    "every {name} must be finite and non-negative"
                )));
            }
        }
        Ok(Self {
            mode,
            phases,
            weights,
            read_weights0,
        })
    }

    pub fn mode(&self) -> &SpinWaveMode {
        &self.mode
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Stamp the mode phase onto an ensemble.
///
/// `sampling` is the double-counting guard: with `Uniform` positions the
/// write profile enters here as the weight `w_j`; with `WriteProfile`
/// positions it is already in the density and every weight is 1.
pub fn imprint(
    atoms: &[AtomState],
    mode: &SpinWaveMode,
    beams: &BeamGeometry,
    sampling: PositionSampling,
) -> SpinWaveRecord {
    let mut phases = Vec::with_capacity(atoms.len());
    let mut weights = Vec::with_capacity(atoms.len());
    let mut read0 = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let rho = atom.position.x.hypot(atom.position.y);
        phases.push(mode.phase_at(&atom.position));
        weights.push(match sampling {
            PositionSampling::Uniform => beams.write_amplitude(rho),
            PositionSampling::WriteProfile => 1.0,
        });
        read0.push(beams.read_amplitude(rho));
    }
    SpinWaveRecord {
        mode: *mode,
        phases,
        weights,
        read_weights0: read0,
    }
}

/// Point estimate with a jackknife statistical error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub efficiency: f64,
    pub stat_error: f64,
}

/// Per-block partial sums. `a[i]` is the block's share of `A(t_i)` and
/// `q[i]` its share of `Σ s_j w_j² u_j(0)²`; index 0 is the imprint time,
/// where `a` is real and every atom is alive.
struct BlockSums {
    a: Vec<Complex64>,
    q: Vec<f64>,
}

fn efficiency_from_totals(a: Complex64, a0: f64, q: f64, q0: f64, convention: Convention) -> f64 {
    let base = a.norm_sqr() / (a0 * a0);
    match convention {
        Convention::PhasedArray => base,
        Convention::SingleExcitation => {
            if q > 0.0 {
                base * q0 / q
            } else {
                // Nothing survived: the numerator is exactly zero too.
                0.0
            }
        }
    }
}

/// Totals plus delete-one-block jackknife: `σ² = (B−1)/B · Σ_b (e_b − ē)²`
/// over the leave-one-out replicas `e_b`.
fn estimate_at(blocks: &[BlockSums], index: usize, convention: Convention) -> Estimate {
    let a_tot: Complex64 = blocks.iter().map(|b| b.a[index]).sum();
    let a0_tot: f64 = blocks.iter().map(|b| b.a[0].re).sum();
    let q_tot: f64 = blocks.iter().map(|b| b.q[index]).sum();
    let q0_tot: f64 = blocks.iter().map(|b| b.q[0]).sum();

    let efficiency = efficiency_from_totals(a_tot, a0_tot, q_tot, q0_tot, convention);
    let n_blocks = blocks.len();
    if n_blocks < 2 {
        return Estimate {
            efficiency,
            stat_error: 0.0,
        };
    }

    let mut replicas = Vec::with_capacity(n_blocks);
    for b in blocks {
        let a0 = a0_tot - b.a[0].re;
        if a0 <= 0.0 {
            // Degenerate: one block holds all the weight.
            replicas.push(0.0);
            continue;
        }
        replicas.push(efficiency_from_totals(
            a_tot - b.a[index],
            a0,
            q_tot - b.q[index],
            q0_tot - b.q[0],
            convention,
        ));
    }
    let mean = replicas.iter().sum::<f64>() / n_blocks as f64;
    let ss: f64 = replicas.iter().map(|e| (e - mean) * (e - mean)).sum();
    Estimate {
        efficiency,
        stat_error: ((n_blocks - 1) as f64 / n_blocks as f64 * ss).sqrt(),
    }
}

/// Contiguous jackknife block ranges covering `0..n`.
fn block_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let b = JACKKNIFE_BLOCKS.min(n).max(1);
    (0..b).map(|i| (i * n / b)..((i + 1) * n / b)).collect()
}

/// Retrieval efficiency of `record` against the ensemble state `atoms`.
///
/// `atoms` must be the same atoms (same order) the record was imprinted on,
/// propagated to the readout time.
pub fn retrieval_efficiency(
    record: &SpinWaveRecord,
    atoms: &[AtomState],
    beams: &BeamGeometry,
    convention: Convention,
) -> Result<Estimate, SpinWaveError> {
    if atoms.len() != record.len() {
        return Err(SpinWaveError::LengthMismatch {
            expected: record.len(),
            got: atoms.len(),
        });
    }
    if record.is_empty() {
        return Err(SpinWaveError::InvalidParam("empty record".into()));
    }

    let blocks: Vec<BlockSums> = block_ranges(atoms.len())
        .into_iter()
        .map(|range| {
            let mut sums = BlockSums {
                a: vec![Complex64::ZERO; 2],
                q: vec![0.0; 2],
            };
            for j in range {
                let w = record.weights[j];
                if w == 0.0 {
                    continue;
                }
                let u0 = record.read_weights0[j];
                let base = w * u0;
                sums.a[0] += Complex64::new(base, 0.0);
                sums.q[0] += base * base;

                let atom = &atoms[j];
                let s = if atom.coherent { 1.0 } else { 0.0 };
                let rho = atom.position.x.hypot(atom.position.y);
                let u = beams.read_amplitude(rho);
                let dphi = record.mode.phase_at(&atom.position) - record.phases[j];
                sums.a[1] += Complex64::cis(dphi) * (s * w * u);
                sums.q[1] += s * base * base;
            }
            sums
        })
        .collect();

    let a0_tot: f64 = blocks.iter().map(|b| b.a[0].re).sum();
    if a0_tot <= 0.0 {
        return Err(SpinWaveError::UndefinedNormalization);
    }
    Ok(estimate_at(&blocks, 1, convention))
}

/// Full simulation input for one decay curve. Components are validated at
/// construction time by their own types; this struct only binds them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimScenario {
    pub cell: CellGeometry,
    pub beams: BeamGeometry,
    pub thermal: ThermalConfig,
    pub gas: GasModel,
    pub write_wavelength: f64,
    pub hyperfine_split: f64,
    pub sampling: PositionSampling,
    pub convention: Convention,
    pub n_atoms: usize,
    pub seed: u64,
}

impl SimScenario {
    /// Spin-wave mode implied by the beam layout.
    pub fn mode(&self) -> Result<SpinWaveMode, GeometryError> {
        let write = OpticalMode::along_axis(self.write_wavelength)?;
        let stokes = stokes_mode(&write, self.beams.detection_angle(), self.hyperfine_split)?;
        Ok(spin_wave_mode(&write, &stokes))
    }

    /// SHA-256 of the canonical JSON form; stable across runs and platforms.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serialization cannot fail");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Provenance attached to a simulated curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveMeta {
    pub scenario_digest: String,
    pub n_atoms: usize,
    pub seed: u64,
}

impl CurveMeta {
    /// Meta for curves that did not come from a simulation (synthetic data,
    /// external files).
    pub fn external(label: &str) -> Self {
        CurveMeta {
            scenario_digest: label.to_string(),
            n_atoms: 0,
            seed: 0,
        }
    }
}

/// A retrieval-efficiency decay curve with per-point jackknife errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    times: Vec<f64>,
    efficiency: Vec<f64>,
    stat_error: Vec<f64>,
    meta: CurveMeta,
}

impl DecayCurve {
    /// Structural validation: equal lengths, finite values, strictly
    /// increasing non-negative times, non-negative efficiencies and errors.
    /// The statistical bound `efficiency ≤ 1 + 3·stat_error` holds for
    /// simulated curves but is not enforced here, where synthetic or
    /// externally loaded data must also be representable.
    pub fn new(
        times: Vec<f64>,
        efficiency: Vec<f64>,
        stat_error: Vec<f64>,
        meta: CurveMeta,
    ) -> Result<Self, SpinWaveError> {
        if times.is_empty() || times.len() != efficiency.len() || times.len() != stat_error.len() {
            return Err(SpinWaveError::InvalidParam(format!(
                "curve columns must be non-empty and equally long, got {}/{}/{}",
                times.len(),
                efficiency.len(),
                stat_error.len()
            )));
        }
        if !times.iter().all(|t| t.is_finite() && *t >= 0.0)
            || !times.windows(2).all(|w| w[0] < w[1])
        {
            return Err(SpinWaveError::Grid(
                "times must be finite, non-negative and strictly increasing".into(),
            ));
        }
        if !efficiency.iter().all(|e| e.is_finite() && *e >= 0.0) {
            return Err(SpinWaveError::InvalidParam(
                "efficiencies must be finite and non-negative".into(),
            ));
        }
        if !stat_error.iter().all(|e| e.is_finite() && *e >= 0.0) {
            return Err(SpinWaveError::InvalidParam(
                "statistical errors must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            times,
            efficiency,
            stat_error,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn efficiency(&self) -> &[f64] {
        &self.efficiency
    }

    pub fn stat_error(&self) -> &[f64] {
        &self.stat_error
    }

    pub fn meta(&self) -> &CurveMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t_s,efficiency,stat_err`. Values use the shortest
    /// representation that round-trips exactly, so `from_csv` is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,efficiency,stat_err\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e}\n",
                self.times[i], self.efficiency[i], self.stat_error[i]
            ));
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str, meta: CurveMeta) -> Result<Self, SpinWaveError> {
        let mut lines = text.lines();
        match lines.next() {
            Some("t_s,efficiency,stat_err") => {}
            other => {
                return Err(SpinWaveError::Csv(format!(
                    "expected header 't_s,efficiency,stat_err', got {other:?}"
                )))
            }
        }
        let mut times = Vec::new();
        let mut eff = Vec::new();
        let mut err = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut next = |name: &str| -> Result<f64, SpinWaveError> {
                fields
                    .next()
                    .ok_or_else(|| SpinWaveError::Csv(format!("line {}: missing {name}", ln + 2)))?
                    .parse::<f64>()
                    .map_err(|e| SpinWaveError::Csv(format!("line {}: {name}: {e}", ln + 2)))
            };
            times.push(next("t_s")?);
            eff.push(next("efficiency")?);
            err.push(next("stat_err")?);
            if fields.next().is_some() {
                return Err(SpinWaveError::Csv(format!(
                    "line {}: too many fields",
                    ln + 2
                )));
            }
        }
        Self::new(times, eff, err, meta)
    }
}

fn validate_grid(times: &[f64]) -> Result<(), SpinWaveError> {
    if times.is_empty() {
        return Err(SpinWaveError::Grid("time grid is empty".into()));
    }
    if times[0] != 0.0 {
        return Err(SpinWaveError::Grid(format!(
            "time grid must start at 0, got {}",
            times[0]
        )));
    }
    if !times.iter().all(|t| t.is_finite()) || !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(SpinWaveError::Grid(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Simulate the retrieval-efficiency decay curve of `scenario` on `times`.
///
/// The grid must start at exactly 0 (the imprint moment) and increase
/// strictly. Atoms are partitioned into [`JACKKNIFE_BLOCKS`] contiguous
/// blocks; blocks run in parallel but each block accumulates its atoms in
/// index order and blocks are reduced in index order, so the result is
/// bitwise identical for any thread count.
pub fn decay_curve(scenario: &SimScenario, times: &[f64]) -> Result<DecayCurve, SpinWaveError> {
    validate_grid(times)?;
    if scenario.n_atoms == 0 {
        return Err(SpinWaveError::InvalidParam("n_atoms must be >= 1".into()));
    }
    let mode = scenario.mode()?;
    let n = scenario.n_atoms;
    let n_times = times.len();

    let blocks: Vec<BlockSums> = block_ranges(n)
        .into_par_iter()
        .map(|range| -> Result<BlockSums, SpinWaveError> {
            let mut sums = BlockSums {
                a: vec![Complex64::ZERO; n_times],
                q: vec![0.0; n_times],
            };
            for j in range {
                let mut rng = atom_stream(scenario.seed, j as u64);
                let mut atom = sample_atom(
                    &scenario.cell,
                    &scenario.beams,
                    &scenario.thermal,
                    scenario.sampling,
                    j as u64,
                    &mut rng,
                );
                let rho0 = atom.position.x.hypot(atom.position.y);
                let w = match scenario.sampling {
                    PositionSampling::Uniform => scenario.beams.write_amplitude(rho0),
                    PositionSampling::WriteProfile => 1.0,
                };
                if w == 0.0 {
                    // Outside the write beam: contributes nothing at any
                    // time, and its RNG stream is private, so skipping it
                    // changes no other atom.
                    continue;
                }
                let u0 = scenario.beams.read_amplitude(rho0);
                let phase0 = mode.phase_at(&atom.position);
                let base = w * u0;
                sums.a[0] += Complex64::new(base, 0.0);
                sums.q[0] += base * base;

                for i in 1..n_times {
                    atom = propagate(
                        &atom,
                        times[i - 1],
                        times[i],
                        &scenario.cell,
                        &scenario.thermal,
                        &scenario.gas,
                        &mut rng,
                    )?;
                    let s = if atom.coherent { 1.0 } else { 0.0 };
                    let rho = atom.position.x.hypot(atom.position.y);
                    let u = scenario.beams.read_amplitude(rho);
                    let dphi = mode.phase_at(&atom.position) - phase0;
                    sums.a[i] += Complex64::cis(dphi) * (s * w * u);
                    sums.q[i] += s * base * base;
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let a0_tot: f64 = blocks.iter().map(|b| b.a[0].re).sum();
    if a0_tot <= 0.0 {
        return Err(SpinWaveError::UndefinedNormalization);
    }

    let mut efficiency = Vec::with_capacity(n_times);
    let mut stat_error = Vec::with_capacity(n_times);
    for i in 0..n_times {
        let est = estimate_at(&blocks, i, scenario.convention);
        debug_assert!(
            est.efficiency <= 1.0 + 3.0 * est.stat_error + 1e-9,
            "estimator exceeded its statistical bound at index {i}"
        );
        efficiency.push(est.efficiency);
        stat_error.push(est.stat_error);
    }

    let meta = CurveMeta {
        scenario_digest: scenario.digest(),
        n_atoms: n,
        seed: scenario.seed,
    };
    DecayCurve::new(times.to_vec(), efficiency, stat_error, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_ensemble, WallModel};
    use crate::geometry::{BeamProfile, CellGeometry};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn cell() -> CellGeometry {
        CellGeometry::new(0.05, 2.5e-3, WallModel::paraffin()).unwrap()
    }

    fn thermal() -> ThermalConfig {
        ThermalConfig::new(351.15, 1.4432e-25).unwrap()
    }

    fn wide_beams() -> BeamGeometry {
        BeamGeometry::new(f64::INFINITY, f64::INFINITY, 0.0, BeamProfile::Gaussian).unwrap()
    }

    fn skewed_mode() -> SpinWaveMode {
        let write = OpticalMode::along_axis(795e-9).unwrap();
        let stokes = stokes_mode(&write, 2.0_f64.to_radians(), 6.8347e9).unwrap();
        spin_wave_mode(&write, &stokes)
    }

    #[test]
    fn unpropagated_ensemble_gives_unit_efficiency() {
        let atoms = sample_ensemble(
            500,
            &cell(),
            &wide_beams(),
            &thermal(),
            PositionSampling::Uniform,
            42,
        );
        let record = imprint(
            &atoms,
            &skewed_mode(),
            &wide_beams(),
            PositionSampling::Uniform,
        );
        for convention in [Convention::PhasedArray, Convention::SingleExcitation] {
            let est = retrieval_efficiency(&record, &atoms, &wide_beams(), convention).unwrap();
            assert_eq!(est.efficiency, 1.0);
            assert!(est.stat_error >= 0.0 && est.stat_error < 1e-12);
        }
    }

    #[test]
    fn dead_atoms_leave_the_sum() {
        let atoms = sample_ensemble(
            400,
            &cell(),
            &wide_beams(),
            &thermal(),
            PositionSampling::Uniform,
            7,
        );
        let record = imprint(
            &atoms,
            &skewed_mode(),
            &wide_beams(),
            PositionSampling::Uniform,
        );

        // Kill every atom: phased-array efficiency is exactly zero and the
        // single-excitation form is defined to be zero too.
        let dead: Vec<AtomState> = atoms
            .iter()
            .map(|a| AtomState {
                coherent: false,
                ..*a
            })
            .collect();
        for convention in [Convention::PhasedArray, Convention::SingleExcitation] {
            let est = retrieval_efficiency(&record, &dead, &wide_beams(), convention).unwrap();
            assert_eq!(est.efficiency, 0.0);
        }

        // Kill half: positions unchanged, so there is no dephasing and the
        // two conventions must give f^2 and f exactly (uniform beams).
        let half: Vec<AtomState> = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| AtomState {
                coherent: i % 2 == 0,
                ..*a
            })
            .collect();
        let f = 0.5;
        let phased =
            retrieval_efficiency(&record, &half, &wide_beams(), Convention::PhasedArray).unwrap();
        let single =
            retrieval_efficiency(&record, &half, &wide_beams(), Convention::SingleExcitation)
                .unwrap();
        assert_relative_eq!(phased.efficiency, f * f, max_relative = 1e-12);
        assert_relative_eq!(single.efficiency, f, max_relative = 1e-12);
    }

    #[test]
    fn global_phase_shifts_cancel() {
        let mode = skewed_mode();
        let n = 300;
        let atoms = sample_ensemble(
            n,
            &cell(),
            &wide_beams(),
            &thermal(),
            PositionSampling::Uniform,
            3,
        );
        let record = imprint(&atoms, &mode, &wide_beams(), PositionSampling::Uniform);
        let shifted = SpinWaveRecord::new(
            mode,
            record.phases().iter().map(|p| p + 1.234).collect(),
            record.weights().to_vec(),
            record.read_weights0.clone(),
        )
        .unwrap();

        // Displace atoms a little so the efficiency is non-trivial.
        let moved: Vec<AtomState> = atoms
            .iter()
            .map(|a| AtomState {
                position: a.position + a.velocity * 5e-9,
                ..*a
            })
            .collect();
        let e1 =
            retrieval_efficiency(&record, &moved, &wide_beams(), Convention::PhasedArray).unwrap();
        let e2 =
            retrieval_efficiency(&shifted, &moved, &wide_beams(), Convention::PhasedArray).unwrap();
        assert_relative_eq!(e1.efficiency, e2.efficiency, max_relative = 1e-12);
        assert!(e1.efficiency < 1.0);
    }

    #[test]
    fn mismatched_lengths_and_empty_records_error() {
        let atoms = sample_ensemble(
            10,
            &cell(),
            &wide_beams(),
            &thermal(),
            PositionSampling::Uniform,
            1,
        );
        let record = imprint(
            &atoms,
            &skewed_mode(),
            &wide_beams(),
            PositionSampling::Uniform,
        );
        assert!(matches!(
            retrieval_efficiency(&record, &atoms[..5], &wide_beams(), Convention::PhasedArray),
            Err(SpinWaveError::LengthMismatch {
                expected: 10,
                got: 5
            })
        ));
        assert!(SpinWaveRecord::new(skewed_mode(), vec![0.0], vec![1.0], vec![]).is_err());
    }

    #[test]
    fn zero_normalization_is_an_error() {
        // Top-hat write beam much narrower than the atom cloud, atoms placed
        // outside it by hand.
        let beams = BeamGeometry::new(1e-5, 1e-5, 0.0, BeamProfile::TopHat).unwrap();
        let atoms: Vec<AtomState> = (0..4)
            .map(|j| AtomState {
                position: Vector3::new(2e-3, 0.0, 0.0),
                velocity: Vector3::new(0.0, 0.0, 1.0),
                coherent: true,
                stream_id: j,
            })
            .collect();
        let record = imprint(&atoms, &skewed_mode(), &beams, PositionSampling::Uniform);
        assert!(matches!(
            retrieval_efficiency(&record, &atoms, &beams, Convention::PhasedArray),
            Err(SpinWaveError::UndefinedNormalization)
        ));
    }

    fn tiny_scenario() -> SimScenario {
        SimScenario {
            cell: cell(),
            beams: wide_beams(),
            thermal: thermal(),
            gas: GasModel::None,
            write_wavelength: 795e-9,
            hyperfine_split: 6.8347e9,
            sampling: PositionSampling::Uniform,
            convention: Convention::PhasedArray,
            n_atoms: 200,
            seed: 99,
        }
    }

    #[test]
    fn uniform_mode_with_uniform_beams_stays_at_one() {
        // Δk = 0 and no spin destruction: every point is exactly 1.
        let mut scenario = tiny_scenario();
        scenario.hyperfine_split = 0.0;
        scenario.cell = CellGeometry::new(
            0.05,
            2.5e-3,
            WallModel::new(
                crate::ensemble::WallKind::Paraffin,
                0.0,
                crate::ensemble::Reflection::DiffuseThermal,
            )
            .unwrap(),
        )
        .unwrap();
        let times: Vec<f64> = (0..6).map(|i| i as f64 * 1e-5).collect();
        let curve = decay_curve(&scenario, &times).unwrap();
        for i in 0..curve.len() {
            assert_eq!(curve.efficiency()[i], 1.0);
            assert!(curve.stat_error()[i] < 1e-12);
        }
    }

    #[test]
    fn grid_validation() {
        let scenario = tiny_scenario();
        assert!(matches!(
            decay_curve(&scenario, &[]),
            Err(SpinWaveError::Grid(_))
        ));
        assert!(matches!(
            decay_curve(&scenario, &[1e-6, 2e-6]),
            Err(SpinWaveError::Grid(_))
        ));
        assert!(matches!(
            decay_curve(&scenario, &[0.0, 2e-6, 2e-6]),
            Err(SpinWaveError::Grid(_))
        ));
    }

    #[test]
    fn curve_csv_roundtrips_exactly() {
        let scenario = tiny_scenario();
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 3.3e-9).collect();
        let curve = decay_curve(&scenario, &times).unwrap();
        let csv = curve.to_csv();
        let back = DecayCurve::from_csv(&csv, curve.meta().clone()).unwrap();
        assert_eq!(curve, back);

        assert!(DecayCurve::from_csv("bogus\n1,2,3\n", CurveMeta::external("x")).is_err());
        assert!(DecayCurve::from_csv(
            "t_s,efficiency,stat_err\n0e0,1e0\n",
            CurveMeta::external("x")
        )
        .is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = tiny_scenario();
        let mut b = tiny_scenario();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
