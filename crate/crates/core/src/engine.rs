//! Engine selection: which exact solution applies to a protocol, and the
//! fall back to the integrator when none does.

use std::fmt;

use crate::asynchronous::AsyncSolution;
use crate::error::{Error, Result};
use crate::model::{AmplitudeVector, Epoch, ModulationProtocol, SoCoupling};
use crate::oracle::{integrate, IntegratorConfig, TrajectoryRecord};
use crate::scalar::{lit, Real};
use crate::sync::SyncSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EngineKind {
    SyncExact,
    AsyncExact,
    Oracle,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SyncExact => "sync-exact",
            Self::AsyncExact => "async-exact",
            Self::Oracle => "oracle",
        })
    }
}

/// Default time horizon `T = 25 / min(rate, 1)`; gives `rate * T >= 25`.
pub fn default_horizon<T: Real>(protocol: &ModulationProtocol<T>) -> T {
    let rate = protocol.rate().unwrap_or(T::one()).min(T::one());
    lit::<T>(25.0) / rate
}

/// An exact solution fixed by an initial condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactSolution<T> {
    Sync(SyncSolution<T>),
    Async(AsyncSolution<T>),
}

impl<T: Real> ExactSolution<T> {
    /// Builds the exact solution if one applies. The remote past is imposed at
    /// the pulse's exact limit for synchronous drives and at `-horizon` for
    /// asynchronous ones.
    pub fn new(
        coupling: &SoCoupling<T>,
        protocol: &ModulationProtocol<T>,
        state0: &AmplitudeVector<T>,
        epoch: Epoch<T>,
        horizon: T,
    ) -> Result<Self> {
        match protocol {
            ModulationProtocol::SyncSech2 { .. } => {
                SyncSolution::new(coupling, protocol, state0, epoch).map(Self::Sync)
            }
            ModulationProtocol::AsyncTanhSech { .. } => {
                AsyncSolution::new(coupling, protocol, state0, epoch.time(horizon)).map(Self::Async)
            }
            ModulationProtocol::Custom(c) => Err(Error::BranchViolation(format!(
                "no exact solution for custom drive {:?}",
                c.name
            ))),
        }
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Self::Sync(_) => EngineKind::SyncExact,
            Self::Async(_) => EngineKind::AsyncExact,
        }
    }

    pub fn amplitudes(&self, t: T) -> AmplitudeVector<T> {
        match self {
            Self::Sync(s) => s.amplitudes(t),
            Self::Async(s) => s.amplitudes(t),
        }
    }

    /// Exact populations at `t -> -inf` and `t -> +inf`.
    pub fn asymptotic_populations(&self) -> ([T; 4], [T; 4]) {
        match self {
            Self::Sync(s) => (
                s.initial_limit().0.map(|a| a.norm_sqr()),
                s.final_state().0.map(|a| a.norm_sqr()),
            ),
            Self::Async(s) => s.asymptotic_populations(),
        }
    }

    pub fn solver_id(&self) -> String {
        match self {
            Self::Sync(s) => format!("sync-exact({:?} eigen branch)", s.eig.branch),
            Self::Async(s) => format!("async-exact({:?})", s.branch),
        }
    }

    /// Samples the exact solution on `grid`.
    pub fn trajectory(&self, protocol: &ModulationProtocol<T>, grid: &[T]) -> TrajectoryRecord<T> {
        let states: Vec<_> = grid.iter().map(|&t| self.amplitudes(t)).collect();
        let n0 = states.first().map(|s| s.norm2()).unwrap_or(T::one());
        TrajectoryRecord::from_samples(grid.to_vec(), states, protocol.clone(), self.solver_id(), n0)
    }
}

/// Time-domain run on `grid` with the initial state imposed at
/// `epoch.time(horizon)` (which must not exceed the first sample).
pub fn oracle_trajectory<T: Real>(
    coupling: &SoCoupling<T>,
    protocol: &ModulationProtocol<T>,
    state0: &AmplitudeVector<T>,
    epoch: Epoch<T>,
    horizon: T,
    grid: &[T],
) -> Result<TrajectoryRecord<T>> {
    let t0 = epoch.time(horizon);
    let t_end = grid.last().copied().unwrap_or(horizon).max(t0 + T::epsilon());
    let cfg = IntegratorConfig::new(t0, t_end.max(t0 + T::one()));
    integrate(coupling, protocol, state0, &cfg, grid)
}
