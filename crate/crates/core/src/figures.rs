//! Catalogue of the reference figure settings and their trajectory runs.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use crate::analysis::{EngineChoice, ScanParameter, ScanSpec};
use crate::engine::{default_horizon, oracle_trajectory, ExactSolution};
use crate::error::{Error, Result};
use crate::model::{AmplitudeVector, Epoch, ModulationProtocol, Observable, SoCoupling};
use crate::oracle::{uniform_grid, TrajectoryRecord};

pub const DEFAULT_SAMPLES: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FigureId {
    F1a,
    F1b,
    F1c,
    F1d,
    F1e,
    F1f,
    F2a,
    F2b,
    F2c,
    F3a,
    F3b,
    F3c,
    F3d,
}

impl FigureId {
    pub const ALL: [FigureId; 13] = [
        Self::F1a,
        Self::F1b,
        Self::F1c,
        Self::F1d,
        Self::F1e,
        Self::F1f,
        Self::F2a,
        Self::F2b,
        Self::F2c,
        Self::F3a,
        Self::F3b,
        Self::F3c,
        Self::F3d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::F1a => "1a",
            Self::F1b => "1b",
            Self::F1c => "1c",
            Self::F1d => "1d",
            Self::F1e => "1e",
            Self::F1f => "1f",
            Self::F2a => "2a",
            Self::F2b => "2b",
            Self::F2c => "2c",
            Self::F3a => "3a",
            Self::F3b => "3b",
            Self::F3c => "3c",
            Self::F3d => "3d",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "figure id",
                reason: format!("unknown figure {s:?}; expected one of 1a..1f, 2a..2c, 3a..3d"),
            })
    }
}

/// A labelled initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub label: String,
    pub state: AmplitudeVector<f64>,
}

impl InitialCondition {
    fn real(label: &str, a: [f64; 4]) -> Self {
        Self {
            label: label.to_string(),
            state: AmplitudeVector::from_real(a),
        }
    }
}

/// Time-domain figure: one or more trajectories under a fixed drive.
#[derive(Clone, Debug)]
pub struct TrajectoryFigure {
    pub id: FigureId,
    pub title: &'static str,
    pub gamma: f64,
    pub protocol: ModulationProtocol<f64>,
    pub epoch: Epoch<f64>,
    pub initial_conditions: Vec<InitialCondition>,
    /// Columns drawn in the plot description.
    pub plotted: Vec<&'static str>,
}

impl TrajectoryFigure {
    pub fn coupling(&self) -> Result<SoCoupling<f64>> {
        SoCoupling::new(self.gamma)
    }

    pub fn horizon(&self) -> f64 {
        default_horizon(&self.protocol)
    }

    /// Sample times: `[0, T]` for a finite epoch at zero, `[-T, T]` when the
    /// initial state is imposed in the remote past.
    pub fn grid(&self, samples: usize) -> Result<Vec<f64>> {
        let t = self.horizon();
        let lo = match self.epoch {
            Epoch::At(t0) => t0,
            Epoch::MinusInfinity => -t,
        };
        if samples < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 samples, got {samples}")));
        }
        Ok(uniform_grid(lo, t, samples))
    }

    /// Exact and integrated trajectories for one initial condition.
    pub fn run(&self, ic: &InitialCondition, samples: usize) -> Result<FigureRun> {
        let coupling = self.coupling()?;
        let grid = self.grid(samples)?;
        let horizon = self.horizon();
        let exact = ExactSolution::new(&coupling, &self.protocol, &ic.state, self.epoch, horizon)?;
        Ok(FigureRun {
            label: ic.label.clone(),
            exact_traj: exact.trajectory(&self.protocol, &grid),
            oracle: oracle_trajectory(&coupling, &self.protocol, &ic.state, self.epoch, horizon, &grid)?,
            exact,
        })
    }
}

#[derive(Clone, Debug)]
pub struct FigureRun {
    pub label: String,
    pub exact: ExactSolution<f64>,
    pub exact_traj: TrajectoryRecord<f64>,
    pub oracle: TrajectoryRecord<f64>,
}

/// The `upsilon = sqrt(chi^2/4 + epsilon^2)` surface on a square grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFigure {
    pub chi: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl SurfaceFigure {
    /// Rows of `(chi, epsilon, upsilon)`.
    pub fn rows(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.chi.len() * self.epsilon.len());
        for &c in &self.chi {
            for &e in &self.epsilon {
                out.push([c, e, (c * c / 4.0 + e * e).sqrt()]);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum FigureSpec {
    Scan { id: FigureId, title: &'static str, spec: ScanSpec<f64> },
    Trajectory(TrajectoryFigure),
    Surface { id: FigureId, title: &'static str, surface: SurfaceFigure },
}

fn sync(beta: f64, v: f64, omega: f64) -> ModulationProtocol<f64> {
    ModulationProtocol::sync_sech2(beta, v, omega).expect("finite literal")
}

fn asynchronous(epsilon: f64, upsilon: f64, chi: f64) -> ModulationProtocol<f64> {
    ModulationProtocol::async_tanh_sech(epsilon, upsilon, chi).expect("finite literal")
}

fn scan(id: FigureId, title: &'static str, parameter: ScanParameter, lo: f64, hi: f64, gamma: f64, protocol: ModulationProtocol<f64>) -> FigureSpec {
    FigureSpec::Scan {
        id,
        title,
        spec: ScanSpec {
            parameter,
            grid: uniform_grid(lo, hi, 401),
            protocol,
            gamma,
            initial: AmplitudeVector::basis(3),
            epoch: Epoch::At(0.0),
            observables: vec![
                (Observable::Level(3), Observable::Level(1)),
                (Observable::Level(3), Observable::Level(2)),
            ],
            engine: EngineChoice::Auto,
            horizon: None,
        },
    }
}

fn p3_only() -> Vec<InitialCondition> {
    vec![InitialCondition::real("P3=1", [0.0, 0.0, 1.0, 0.0])]
}

/// The five initial conditions shared by the asynchronous spin-conserving
/// figures, sweeping weight from level 3 to level 1.
pub fn conserving_ics() -> Vec<InitialCondition> {
    let h = 0.5;
    let r = 3f64.sqrt() / 2.0;
    vec![
        InitialCondition::real("a3=1", [0.0, 0.0, 1.0, 0.0]),
        InitialCondition::real("a1=1/2,a3=sqrt3/2", [h, 0.0, r, 0.0]),
        InitialCondition::real("a1=a3=1/sqrt2", [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0]),
        InitialCondition::real("a1=sqrt3/2,a3=1/2", [r, 0.0, h, 0.0]),
        InitialCondition::real("a1=1", [1.0, 0.0, 0.0, 0.0]),
    ]
}

pub fn flip_ics() -> Vec<InitialCondition> {
    let h = 0.5;
    let r = 3f64.sqrt() / 2.0;
    vec![
        InitialCondition::real("a4=1", [0.0, 0.0, 0.0, 1.0]),
        InitialCondition::real("a1=1/2,a4=sqrt3/2", [h, 0.0, 0.0, r]),
        InitialCondition::real("a1=a4=1/sqrt2", [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]),
        InitialCondition::real("a1=sqrt3/2,a4=1/2", [r, 0.0, 0.0, h]),
        InitialCondition::real("a1=1", [1.0, 0.0, 0.0, 0.0]),
    ]
}

pub fn ccpi_sync_ics() -> Vec<InitialCondition> {
    let s = f64::sqrt;
    vec![
        InitialCondition::real("red-thick", [0.0, 0.0, s(3.0 / 8.0), s(5.0 / 8.0)]),
        InitialCondition::real("orange-thick", [s(1.0 / 8.0), s(1.0 / 8.0), 0.5, s(0.5)]),
        InitialCondition::real("green-dashed", [0.5, 0.5, s(1.0 / 8.0), s(3.0 / 8.0)]),
        InitialCondition::real("orange-thin", [0.5, s(0.5), s(1.0 / 8.0), s(1.0 / 8.0)]),
        InitialCondition::real("red-thin", [s(3.0 / 8.0), s(5.0 / 8.0), 0.0, 0.0]),
    ]
}

pub fn ccpc_sync_ic() -> InitialCondition {
    let s = f64::sqrt;
    InitialCondition::real("mixed", [s(0.1), s(0.2), s(0.3), s(0.4)])
}

pub fn figure(id: FigureId) -> FigureSpec {
    use FigureId::*;
    let traj = |title, gamma, protocol, epoch, ics, plotted| {
        FigureSpec::Trajectory(TrajectoryFigure {
            id,
            title,
            gamma,
            protocol,
            epoch,
            initial_conditions: ics,
            plotted,
        })
    };
    let z3x = vec!["Z31", "Z32"];
    let probs = vec!["P1", "P2", "P3", "P4"];
    match id {
        F1a => scan(id, "Asymptotic imbalances vs beta", ScanParameter::Beta, -3.0, 3.0, 0.5, sync(0.0, FRAC_PI_2, 1.0)),
        F1b => scan(id, "Asymptotic imbalances vs V/Omega", ScanParameter::VOverOmega, 0.0, 10.0, 1.0, sync(0.0, 1.0, 1.0)),
        F1c => scan(id, "Asymptotic imbalances vs gamma", ScanParameter::Gamma, 0.0, 2.0, 0.0, sync(0.0, FRAC_PI_2, 1.0)),
        F1d => traj("Z31, Z32 with beta = 0.5, gamma = 0.5", 0.5, sync(0.5, FRAC_PI_2, 1.0), Epoch::At(0.0), p3_only(), z3x),
        F1e => traj("Z31, Z32 with gamma = 1, V/Omega = 2", 1.0, sync(0.0, 2.0, 1.0), Epoch::At(0.0), p3_only(), z3x),
        F1f => traj("Z31, Z32 with gamma = 0.35", 0.35, sync(0.0, FRAC_PI_2, 1.0), Epoch::At(0.0), p3_only(), z3x),
        F2a => traj("Populations under CCPC", 0.15, sync(0.0, FRAC_PI_2, 1.0), Epoch::MinusInfinity, vec![ccpc_sync_ic()], probs),
        F2b => traj("Z_LR under CCPI", 0.15, sync(0.0, FRAC_PI_4, 1.0), Epoch::MinusInfinity, ccpi_sync_ics(), vec!["ZLR"]),
        F2c => traj("Equal spin split", 0.25, sync(0.0, FRAC_PI_4, 1.0), Epoch::MinusInfinity, p3_only(), probs),
        F3a => traj("Z31 under asynchronous CCPC", 2.0, asynchronous(1.0, 1.0, 1.0), Epoch::MinusInfinity, conserving_ics(), vec!["Z31"]),
        F3b => traj("Z31 under asynchronous CCPI", 2.0, asynchronous(1.0, 1.0, 2.0), Epoch::MinusInfinity, conserving_ics(), vec!["Z31"]),
        F3c => FigureSpec::Surface {
            id,
            title: "upsilon on the spin-flip solvability surface",
            surface: SurfaceFigure {
                chi: uniform_grid(0.0, 2.0, 41),
                epsilon: uniform_grid(0.0, 2.0, 41),
            },
        },
        F3d => traj("Z41 under spin-flip CCPI", 0.5, asynchronous(0.21f64.sqrt(), 0.5, 0.4), Epoch::MinusInfinity, flip_ics(), vec!["Z41"]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in FigureId::ALL {
            assert_eq!(id.as_str().parse::<FigureId>().unwrap(), id);
        }
        assert!("4a".parse::<FigureId>().is_err());
    }

    #[test]
    fn initial_conditions_are_normalized() {
        let all = conserving_ics()
            .into_iter()
            .chain(flip_ics())
            .chain(ccpi_sync_ics())
            .chain([ccpc_sync_ic()]);
        for ic in all {
            assert!((ic.state.norm2() - 1.0).abs() < 1e-15, "{}", ic.label);
        }
    }

    #[test]
    fn horizons() {
        let FigureSpec::Trajectory(f) = figure(FigureId::F3d) else { panic!() };
        assert_eq!(f.horizon(), 62.5);
        let g = f.grid(5).unwrap();
        assert_eq!(g, vec![-62.5, -31.25, 0.0, 31.25, 62.5]);
        let FigureSpec::Trajectory(f) = figure(FigureId::F1d) else { panic!() };
        assert_eq!(f.grid(3).unwrap(), vec![0.0, 12.5, 25.0]);
    }

    #[test]
    fn surface_rows() {
        let FigureSpec::Surface { surface, .. } = figure(FigureId::F3c) else { panic!() };
        let rows = surface.rows();
        assert_eq!(rows.len(), 41 * 41);
        assert!(rows.iter().any(|r| (r[0] - 0.4).abs() < 1e-12 && (r[1] - 0.45).abs() < 1e-12));
        for r in rows {
            assert!((r[0] * r[0] / 4.0 + r[1] * r[1] - r[2] * r[2]).abs() < 1e-12);
        }
    }
}
