//! Parameter scans of asymptotic imbalances, peak counting and asymptote
//! extraction from trajectories.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::{default_horizon, oracle_trajectory, EngineKind, ExactSolution};
use crate::error::{Error, Result};
use crate::model::{
    imbalance, AmplitudeVector, Epoch, ModulationProtocol, Observable, PopulationSnapshot,
    SoCoupling,
};
use crate::oracle::TrajectoryRecord;
use crate::scalar::{lit, Real};

/// Default prominence threshold for peaks of population curves.
pub const DEFAULT_PROMINENCE: f64 = 0.01;

/// Swept parameter of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParameter {
    Beta,
    /// Sets `V = x * Omega`.
    VOverOmega,
    Gamma,
    /// Sets `upsilon = x * chi`.
    UpsilonOverChi,
}

impl fmt::Display for ScanParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Beta => "beta",
            Self::VOverOmega => "V_over_Omega",
            Self::Gamma => "gamma",
            Self::UpsilonOverChi => "upsilon_over_chi",
        })
    }
}

impl FromStr for ScanParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "beta" => Ok(Self::Beta),
            "V_over_Omega" | "v_over_omega" => Ok(Self::VOverOmega),
            "gamma" => Ok(Self::Gamma),
            "upsilon_over_chi" => Ok(Self::UpsilonOverChi),
            other => Err(Error::InvalidParameter {
                name: "param",
                reason: format!("unknown scan parameter {other:?}"),
            }),
        }
    }
}

/// Engine policy of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EngineChoice {
    /// Exact engine whenever the branch conditions hold, integrator otherwise.
    #[default]
    Auto,
    Oracle,
}

#[derive(Clone, Debug)]
pub struct ScanSpec<T> {
    pub parameter: ScanParameter,
    pub grid: Vec<T>,
    /// Values not swept are taken from here.
    pub protocol: ModulationProtocol<T>,
    pub gamma: T,
    pub initial: AmplitudeVector<T>,
    pub epoch: Epoch<T>,
    pub observables: Vec<(Observable, Observable)>,
    pub engine: EngineChoice,
    /// Time-domain horizon; defaults to `25 / min(rate, 1)`.
    pub horizon: Option<T>,
}

impl<T: Real> ScanSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Err(Error::InvalidParameter { name: "scan", reason });
        if self.grid.is_empty() {
            return invalid("empty grid".into());
        }
        let inc = self.grid.windows(2).all(|w| w[1] > w[0]);
        let dec = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return invalid("grid must be strictly monotone".into());
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return invalid("grid values must be finite".into());
        }
        if self.observables.is_empty() {
            return invalid("no observables requested".into());
        }
        if let Some((s, _)) = self.observables.iter().find(|(s, q)| s == q) {
            return Err(Error::SameObservable(s.to_string()));
        }
        match (self.parameter, &self.protocol) {
            (ScanParameter::Beta | ScanParameter::VOverOmega, ModulationProtocol::SyncSech2 { .. }) => {}
            (ScanParameter::UpsilonOverChi, ModulationProtocol::AsyncTanhSech { .. }) => {}
            (ScanParameter::Gamma, ModulationProtocol::Custom(_)) | (ScanParameter::Gamma, _) => {}
            (p, proto) => {
                return invalid(format!("parameter {p} does not apply to {}", proto.label()));
            }
        }
        self.initial.require_normalized()?;
        Ok(())
    }

    /// Protocol and coupling at one grid value.
    pub fn point(&self, x: T) -> Result<(ModulationProtocol<T>, SoCoupling<T>)> {
        let mut gamma = self.gamma;
        let protocol = match (&self.protocol, self.parameter) {
            (ModulationProtocol::SyncSech2 { v, omega, .. }, ScanParameter::Beta) => {
                ModulationProtocol::sync_sech2(x, *v, *omega)?
            }
            (ModulationProtocol::SyncSech2 { beta, omega, .. }, ScanParameter::VOverOmega) => {
                ModulationProtocol::sync_sech2(*beta, x * *omega, *omega)?
            }
            (ModulationProtocol::AsyncTanhSech { epsilon, chi, .. }, ScanParameter::UpsilonOverChi) => {
                ModulationProtocol::async_tanh_sech(*epsilon, x * *chi, *chi)?
            }
            (p, ScanParameter::Gamma) => {
                gamma = x;
                p.clone()
            }
            (p, param) => {
                return Err(Error::InvalidParameter {
                    name: "scan",
                    reason: format!("parameter {param} does not apply to {}", p.label()),
                })
            }
        };
        Ok((protocol, SoCoupling::new(gamma)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow<T> {
    pub param: T,
    /// One entry per requested observable, `Z_sq(+inf)`; empty on failure.
    pub values: Vec<T>,
    pub engine: EngineKind,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult<T> {
    pub parameter: ScanParameter,
    pub observables: Vec<(Observable, Observable)>,
    pub rows: Vec<ScanRow<T>>,
}

/// Asymptotic populations `P_m(+inf)` for one parameter point.
fn final_populations<T: Real>(
    spec: &ScanSpec<T>,
    protocol: &ModulationProtocol<T>,
    coupling: &SoCoupling<T>,
) -> Result<([T; 4], EngineKind)> {
    let horizon = spec.horizon.unwrap_or_else(|| default_horizon(protocol));
    if spec.engine == EngineChoice::Auto {
        if let Ok(sol) = ExactSolution::new(coupling, protocol, &spec.initial, spec.epoch, horizon) {
            return Ok((sol.asymptotic_populations().1, sol.kind()));
        }
    }
    let t0 = spec.epoch.time(horizon);
    let t_end = horizon.max(t0 + T::one());
    let tr = oracle_trajectory(coupling, protocol, &spec.initial, spec.epoch, horizon, &[t_end])?;
    Ok((tr.snapshots[0].p, EngineKind::Oracle))
}

/// Runs a scan; grid points are evaluated concurrently and rows come back in
/// grid order. A failing point yields a row carrying the error message.
pub fn run_scan<T: Real>(spec: &ScanSpec<T>) -> Result<ScanResult<T>> {
    spec.validate()?;
    let rows = spec
        .grid
        .par_iter()
        .map(|&x| {
            let attempt = spec.point(x).and_then(|(protocol, coupling)| {
                let (p, engine) = final_populations(spec, &protocol, &coupling)?;
                let snap = PopulationSnapshot {
                    t: T::infinity(),
                    p,
                    pl: p[2] + p[3],
                    pr: p[0] + p[1],
                    norm2: p.iter().fold(T::zero(), |a, b| a + *b),
                };
                let values = spec
                    .observables
                    .iter()
                    .map(|(s, q)| imbalance(&snap, *s, *q))
                    .collect::<Result<Vec<_>>>()?;
                Ok((values, engine))
            });
            match attempt {
                Ok((values, engine)) => ScanRow {
                    param: x,
                    values,
                    engine,
                    error: None,
                },
                Err(e) => ScanRow {
                    param: x,
                    values: Vec::new(),
                    engine: EngineKind::Oracle,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ScanResult {
        parameter: spec.parameter,
        observables: spec.observables.clone(),
        rows,
    })
}

/// Counts local maxima inside `window` whose prominence exceeds `prominence`.
///
/// Prominence is the height of the peak above the higher of the two minima
/// reached before the curve climbs above the peak again (or the window ends)
/// on either side. Flat-topped maxima count once; maxima on the window edges
/// are not counted.
pub fn count_peaks<T: Real>(series: &[(T, T)], window: (T, T), prominence: T) -> Result<usize> {
    let (lo, hi) = window;
    let domain = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => {
            return Err(Error::WindowOutOfRange {
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
            })
        }
    };
    if !(lo < hi) || lo < domain.0 || hi > domain.1 {
        return Err(Error::WindowOutOfRange {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(prominence > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "prominence",
            reason: "must be > 0".into(),
        });
    }
    let x: Vec<T> = series
        .iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .map(|(_, v)| *v)
        .collect();
    let n = x.len();
    let mut count = 0;
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let peak = x[i];
                let mut left = peak;
                for k in (0..i).rev() {
                    if x[k] > peak {
                        break;
                    }
                    left = left.min(x[k]);
                }
                let mut right = peak;
                for &v in &x[j + 1..] {
                    if v > peak {
                        break;
                    }
                    right = right.min(v);
                }
                if peak - left.max(right) > prominence {
                    count += 1;
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(count)
}

/// Prominent maxima plus prominent minima.
pub fn count_extrema<T: Real>(series: &[(T, T)], window: (T, T), prominence: T) -> Result<usize> {
    let negated: Vec<_> = series.iter().map(|&(t, v)| (t, -v)).collect();
    Ok(count_peaks(series, window, prominence)? + count_peaks(&negated, window, prominence)?)
}

/// Snapshots at the start and end of a trajectory, plus whether every `P_m`
/// varies by less than `1e-7` over the final tenth of the horizon.
pub fn asymptotic_extract<T: Real>(
    traj: &TrajectoryRecord<T>,
) -> Result<(PopulationSnapshot<T>, PopulationSnapshot<T>, bool)> {
    let (Some(first), Some(last)) = (traj.snapshots.first(), traj.snapshots.last()) else {
        return Err(Error::InvalidGrid("empty trajectory".into()));
    };
    let cut = last.t - lit::<T>(0.1) * (last.t - first.t);
    let tail: Vec<_> = traj.snapshots.iter().filter(|s| s.t >= cut).collect();
    let settled = (0..4).all(|m| {
        let (mn, mx) = tail.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), s| {
            (a.min(s.p[m]), b.max(s.p[m]))
        });
        mx - mn < lit(1e-7)
    });
    Ok((*first, *last, settled))
}

/// Values of one observable along a trajectory, as `(t, Z_sq)` pairs.
pub fn imbalance_series<T: Real>(
    traj: &TrajectoryRecord<T>,
    s: Observable,
    q: Observable,
) -> Result<Vec<(T, T)>> {
    traj.snapshots
        .iter()
        .map(|snap| imbalance(snap, s, q).map(|z| (snap.t, z)))
        .collect()
}

/// Values of one population along a trajectory.
pub fn population_series<T: Real>(traj: &TrajectoryRecord<T>, obs: Observable) -> Vec<(T, T)> {
    traj.snapshots.iter().map(|s| (s.t, s.value(obs))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fig1_spec(parameter: ScanParameter, grid: Vec<f64>, protocol: ModulationProtocol<f64>, gamma: f64) -> ScanSpec<f64> {
        ScanSpec {
            parameter,
            grid,
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
        }
    }

    #[test]
    fn scan_beta_matches_fig_1d_point() {
        let spec = fig1_spec(
            ScanParameter::Beta,
            vec![0.0, 0.25, 0.5, 1.0],
            ModulationProtocol::sync_sech2(0.0, FRAC_PI_2, 1.0).unwrap(),
            0.5,
        );
        let res = run_scan(&spec).unwrap();
        assert_eq!(res.rows.len(), 4);
        let row = &res.rows[2];
        assert_eq!(row.param, 0.5);
        assert_eq!(row.engine, EngineKind::SyncExact);
        assert!((row.values[1] + 0.5456).abs() < 1e-4);
    }

    #[test]
    fn scan_v_over_omega_complete_transfer() {
        let grid: Vec<f64> = (0..3).map(|n| (n as f64 + 0.5) * PI).collect();
        let spec = fig1_spec(
            ScanParameter::VOverOmega,
            grid,
            ModulationProtocol::sync_sech2(0.0, 1.0, 1.0).unwrap(),
            1.0,
        );
        for row in run_scan(&spec).unwrap().rows {
            assert!((row.values[0] + 1.0).abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn scan_gamma_equal_split() {
        let grid = vec![0.25, 0.75, 1.25];
        let spec = fig1_spec(
            ScanParameter::Gamma,
            grid,
            ModulationProtocol::sync_sech2(0.0, FRAC_PI_2, 1.0).unwrap(),
            0.0,
        );
        for row in run_scan(&spec).unwrap().rows {
            assert!((row.values[0] + 0.5).abs() < 1e-12);
            assert!((row.values[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_falls_back_to_oracle_off_branch() {
        let spec = ScanSpec {
            parameter: ScanParameter::Gamma,
            grid: vec![0.3_f64],
            protocol: ModulationProtocol::async_tanh_sech(1.0, 1.0, 1.0).unwrap(),
            gamma: 0.0,
            initial: AmplitudeVector::basis(3),
            epoch: Epoch::MinusInfinity,
            observables: vec![(Observable::Left, Observable::Right)],
            engine: EngineChoice::Auto,
            horizon: Some(20.0),
        };
        let res = run_scan(&spec).unwrap();
        assert_eq!(res.rows[0].engine, EngineKind::Oracle);
        assert!(res.rows[0].values[0].abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn scan_validation() {
        let mut spec = fig1_spec(
            ScanParameter::Beta,
            vec![0.0, 0.0],
            ModulationProtocol::sync_sech2(0.0, FRAC_PI_2, 1.0).unwrap(),
            0.5,
        );
        assert!(run_scan(&spec).is_err());
        spec.grid = vec![];
        assert!(run_scan(&spec).is_err());
        spec.grid = vec![1.0, 0.5, 0.0];
        assert!(run_scan(&spec).is_ok());
        spec.parameter = ScanParameter::UpsilonOverChi;
        assert!(run_scan(&spec).is_err());
    }

    #[test]
    fn peaks_basic() {
        let flat: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 0.3)).collect();
        assert_eq!(count_peaks(&flat, (0.0, 49.0), 0.01).unwrap(), 0);

        let bump: Vec<(f64, f64)> = (0..201)
            .map(|k| {
                let t = -10.0 + 0.1 * k as f64;
                (t, (-t * t).exp())
            })
            .collect();
        assert_eq!(count_peaks(&bump, (-5.0, 5.0), 0.01).unwrap(), 1);
        assert_eq!(count_extrema(&bump, (-5.0, 5.0), 0.01).unwrap(), 1);
        assert!(count_peaks(&bump, (-20.0, 5.0), 0.01).is_err());
        assert!(count_peaks(&bump, (1.0, 1.0), 0.01).is_err());
    }

    #[test]
    fn peaks_respect_prominence_and_plateaus() {
        // two peaks, the second barely above its saddle
        let s = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5), (3.0, 0.505), (4.0, 0.0)];
        assert_eq!(count_peaks(&s, (0.0, 4.0), 0.01).unwrap(), 1);
        assert_eq!(count_peaks(&s, (0.0, 4.0), 0.001).unwrap(), 2);
        let plateau = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 0.0)];
        assert_eq!(count_peaks(&plateau, (0.0, 4.0), 0.01).unwrap(), 1);
    }

    #[test]
    fn extract_settled_trivially_for_static_run() {
        let states = vec![AmplitudeVector::<f64>::basis(2); 11];
        let times: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let p = ModulationProtocol::sync_sech2(0.0, 0.0, 1.0).unwrap();
        let tr = TrajectoryRecord::from_samples(times, states, p, "test", 1.0);
        let (a, b, settled) = asymptotic_extract(&tr).unwrap();
        assert_eq!(a.p, b.p);
        assert!(settled);
    }

    proptest! {
        #[test]
        fn peak_count_invariant_under_shift_and_scale(
            shift in -50.0..50.0_f64,
            scale in 0.1..10.0_f64,
            freq in 0.5..3.0_f64,
        ) {
            let base: Vec<(f64, f64)> = (0..400)
                .map(|k| {
                    let t = -10.0 + 0.05 * k as f64;
                    (t, (freq * t).sin() * (-0.05 * t * t).exp())
                })
                .collect();
            let n0 = count_peaks(&base, (-9.0, 9.0), 0.01).unwrap();
            let moved: Vec<_> = base.iter().map(|&(t, v)| (t + shift, v * scale)).collect();
            let n1 = count_peaks(&moved, (-9.0 + shift, 9.0 + shift), 0.01 * scale).unwrap();
            prop_assert_eq!(n0, n1);
        }
    }
}
