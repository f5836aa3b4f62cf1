//! Fit linear surrogate models to sampled trajectories of dynamical systems,
//! predict states at arbitrary past or future indexes from the fitted
//! spectrum, and handle nonlinear systems by lifting states through an
//! observable dictionary before fitting.
//!
//! The crate is organized around a small set of layers:
//!
//! - [`numerics`]: dense SVD, eigendecomposition, pseudoinverses and complex
//!   powers, with deterministic ordering and phase conventions.
//! - [`trajectory`]: sampled runs of a system and the snapshot matrices built
//!   from them.
//! - [`dmd`]: the reduced-operator fit, modes, amplitudes, spectra and
//!   predictions.
//! - [`koopman`]: observable dictionaries, lifting, and decoding.
//! - [`systems`]: synthetic generators with closed-form references.
//! - [`model`], [`csv`], [`svg`]: the on-disk formats shared by the CLI and
//!   the browser demo.

pub mod csv;
pub mod dmd;
pub mod koopman;
pub mod model;
pub mod numerics;
pub mod svg;
pub mod systems;
pub mod trajectory;

pub use dmd::{DmdError, DmdModel, ModeKind, Prediction, SpectrumReport, StabilityFlag};
pub use koopman::{Dictionary, DictionarySpec, KoopmanError, KoopmanModel};
pub use model::{AnyModel, ModelError, ModelFile};
pub use numerics::{ComplexMatrix, NumericsError, RankPolicy, RealMatrix};
pub use trajectory::{SnapshotPair, Trajectory, TrajectorySet};
