//! Monte Carlo and analytic models of collective spin-wave coherence in a
//! thermal vapor cell.
//!
//! The crate is organized around one pipeline: [`geometry`] fixes the beam
//! and cell layout and the spin-wave wavevector, [`ensemble`] samples thermal
//! atoms and propagates them ballistically with wall and buffer-gas
//! interactions, [`spinwave`] turns trajectories into retrieval-efficiency
//! decay curves, [`analytic`] provides the closed-form limits those curves
//! must approach, [`stimulation`] models delayed stimulated-scattering onset,
//! [`fitkit`] extracts time constants from decay curves, and [`scenario`]
//! binds everything to a JSON configuration schema.

pub mod analytic;
pub mod ensemble;
pub mod fitkit;
pub mod geometry;
pub mod rng;
pub mod scenario;
pub mod spinwave;
pub mod stimulation;
