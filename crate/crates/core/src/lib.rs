//! Spin-orbit coupled boson in a driven double well.
//!
//! The four amplitudes are ordered `(|0,up>, |0,down>, |up,0>, |down,0>)`: the
//! first two live in the right well, the last two in the left. Exact solutions
//! cover the synchronous `sech^2` drive and the asynchronous `tanh`/`sech`
//! drive on its solvable branches; an adaptive integrator handles everything
//! else and serves as the reference for the exact engines.
//!
//! All numerics are generic over [`Real`]; `f64` aliases are exported at the
//! crate root.

pub mod acceptance;
pub mod analysis;
pub mod asynchronous;
pub mod engine;
pub mod error;
pub mod figures;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sync;

pub use analysis::{
    asymptotic_extract, count_extrema, count_peaks, run_scan, EngineChoice, ScanParameter,
    ScanResult, ScanRow, ScanSpec,
};
pub use asynchronous::{
    classify_async_conserving, phase_integrals, AsyncBranch, AsyncConservingCondition,
    AsyncConservingKind, AsyncSolution,
};
pub use engine::{default_horizon, EngineKind, ExactSolution};
pub use error::{Error, Result};
pub use model::{
    hamiltonian_matrix, imbalance, populations, AmplitudeVector, Drive, Epoch, Hamiltonian,
    ModulationProtocol, Observable, PopulationSnapshot, SoCoupling,
};
pub use oracle::{integrate, uniform_grid, IntegratorConfig, Method, PhaseMode, TrajectoryRecord};
pub use scalar::Real;
pub use sync::{classify_sync_condition, eigen_sync, EigenSystem, SyncCondition, SyncSolution};

pub use num_complex::Complex;

pub type Amplitudes = AmplitudeVector<f64>;
pub type Coupling = SoCoupling<f64>;
pub type Protocol = ModulationProtocol<f64>;
pub type Snapshot = PopulationSnapshot<f64>;
pub type Trajectory = TrajectoryRecord<f64>;
pub type SyncSolution64 = SyncSolution<f64>;
pub type AsyncSolution64 = AsyncSolution<f64>;
pub type Complex64 = Complex<f64>;
