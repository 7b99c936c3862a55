//! Independent numerical integration of `i da/dt = H(t) a`.
//!
//! The right-hand side is built from [`hamiltonian_matrix`] and the protocol's
//! drive at each stage; nothing from the analytic engines is reused. The
//! adaptive method is the Dormand-Prince 5(4) pair with local extrapolation,
//! and the classical fixed-step RK4 is kept as a fallback and for convergence
//! checks. Sample times are hit exactly by clipping the step at each grid
//! point.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{
    hamiltonian_unchecked, populations, AmplitudeVector, ModulationProtocol, PopulationSnapshot,
    SoCoupling,
};
use crate::scalar::{lit, Real};

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method<T> {
    /// Adaptive embedded Runge-Kutta 5(4).
    DormandPrince45,
    /// Classical RK4 with the given nominal step.
    ClassicalRk4 { step: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub method: Method<T>,
    pub t_start: T,
    pub t_end: T,
}

impl<T: Real> IntegratorConfig<T> {
    /// Adaptive defaults: `rel_tol = 1e-11`, `abs_tol = 1e-13`, `max_step = 0.5`.
    pub fn new(t_start: T, t_end: T) -> Self {
        Self {
            rel_tol: lit(1e-11),
            abs_tol: lit(1e-13),
            max_step: lit(0.5),
            method: Method::DormandPrince45,
            t_start,
            t_end,
        }
    }

    pub fn with_method(mut self, method: Method<T>) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.rel_tol > T::zero()) || !(self.abs_tol > T::zero()) {
            return bad("tolerance", "rel_tol and abs_tol must be > 0".into());
        }
        if !(self.max_step > T::zero()) {
            return bad("max_step", "must be > 0".into());
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return bad(
                "horizon",
                format!("need finite t_end > t_start, got [{}, {}]", self.t_start, self.t_end),
            );
        }
        if let Method::ClassicalRk4 { step } = self.method {
            if !(step > T::zero()) {
                return bad("step", "fixed step must be > 0".into());
            }
        }
        Ok(())
    }

    pub fn solver_id(&self) -> String {
        match self.method {
            Method::DormandPrince45 => format!(
                "dopri5(rel_tol={:e}, abs_tol={:e}, max_step={})",
                self.rel_tol.to_f64().unwrap_or(f64::NAN),
                self.abs_tol.to_f64().unwrap_or(f64::NAN),
                self.max_step
            ),
            Method::ClassicalRk4 { step } => format!("rk4(step={step})"),
        }
    }
}

/// Sampled numerical trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub states: Vec<AmplitudeVector<T>>,
    pub snapshots: Vec<PopulationSnapshot<T>>,
    pub protocol: ModulationProtocol<T>,
    pub solver_id: String,
    /// `max_k |norm2(state_k) - norm2(state0)|`, including the initial state.
    pub norm_drift_max: T,
}

impl<T: Real> TrajectoryRecord<T> {
    /// Assembles a record from already computed samples (used for analytic
    /// trajectories as well).
    pub fn from_samples(
        times: Vec<T>,
        states: Vec<AmplitudeVector<T>>,
        protocol: ModulationProtocol<T>,
        solver_id: impl Into<String>,
        reference_norm2: T,
    ) -> Self {
        let snapshots: Vec<_> = times
            .iter()
            .zip(states.iter())
            .map(|(t, s)| populations(s, *t))
            .collect();
        let norm_drift_max = snapshots
            .iter()
            .map(|s| (s.norm2 - reference_norm2).abs())
            .fold(T::zero(), T::max);
        Self {
            times,
            states,
            snapshots,
            protocol,
            solver_id: solver_id.into(),
            norm_drift_max,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

type State<T> = [Complex<T>; 4];

struct Rhs<'a, T> {
    coupling: &'a SoCoupling<T>,
    protocol: &'a ModulationProtocol<T>,
}

impl<T: Real> Rhs<'_, T> {
    #[inline]
    fn eval(&self, t: T, y: &State<T>) -> State<T> {
        let d = self.protocol.drive(t);
        let h = hamiltonian_unchecked(self.coupling, d.upsilon, d.epsilon);
        let mut out = [Complex::new(T::zero(), T::zero()); 4];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, yj) in y.iter().enumerate() {
                acc = acc + *yj * h.m[i][j];
            }
            // -i * acc
            *o = Complex::new(acc.im, -acc.re);
        }
        out
    }
}

#[inline]
fn axpy<T: Real>(y: &State<T>, terms: &[(T, &State<T>)], h: T) -> State<T> {
    let mut out = *y;
    for (c, k) in terms {
        let f = *c * h;
        for i in 0..4 {
            out[i] = out[i] + k[i] * f;
        }
    }
    out
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a, T> {
    rhs: Rhs<'a, T>,
    cfg: IntegratorConfig<T>,
    h: T,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(coupling: &'a SoCoupling<T>, protocol: &'a ModulationProtocol<T>, cfg: IntegratorConfig<T>) -> Self {
        let h = match cfg.method {
            Method::DormandPrince45 => cfg.max_step.min(lit(1e-2)),
            Method::ClassicalRk4 { step } => step,
        };
        Self {
            rhs: Rhs { coupling, protocol },
            cfg,
            h,
        }
    }

    /// Carries `y` from `t` to exactly `target` (either direction).
    fn advance(&mut self, mut y: State<T>, mut t: T, target: T) -> Result<State<T>> {
        if target == t {
            return Ok(y);
        }
        match self.cfg.method {
            Method::ClassicalRk4 { step } => {
                let span = target - t;
                let n = (span.abs() / step).ceil().max(T::one());
                let h = span / n;
                let steps = n.to_usize().unwrap_or(1);
                for k in 0..steps {
                    y = self.rk4_step(&y, t, h);
                    t = if k + 1 == steps { target } else { t + h };
                    check_finite(&y, t)?;
                }
                Ok(y)
            }
            Method::DormandPrince45 => {
                let dir = if target > t { T::one() } else { -T::one() };
                let min_step = lit::<T>(1e-13);
                loop {
                    let remaining = (target - t).abs();
                    if remaining == T::zero() {
                        return Ok(y);
                    }
                    let mut h = self.h.abs().min(self.cfg.max_step);
                    let last = h >= remaining;
                    if last {
                        h = remaining;
                    }
                    let (y_new, err) = self.dp_step(&y, t, h * dir);
                    if err <= T::one() {
                        y = y_new;
                        t = if last { target } else { t + h * dir };
                        check_finite(&y, t)?;
                        let grow = if err == T::zero() {
                            lit(5.0)
                        } else {
                            (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0))
                        };
                        // a step clipped at a grid point must not shrink the next one
                        if !last || grow > T::one() {
                            self.h = h * grow.max(lit(0.2));
                        }
                    } else {
                        let shrink = (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2));
                        self.h = h * shrink;
                        if self.h < min_step * t.abs().max(T::one()) {
                            return Err(Error::StepUnderflow {
                                t: t.to_f64().unwrap_or(f64::NAN),
                            });
                        }
                    }
                }
            }
        }
    }

    fn rk4_step(&self, y: &State<T>, t: T, h: T) -> State<T> {
        let half = lit::<T>(0.5);
        let k1 = self.rhs.eval(t, y);
        let k2 = self.rhs.eval(t + half * h, &axpy(y, &[(half, &k1)], h));
        let k3 = self.rhs.eval(t + half * h, &axpy(y, &[(half, &k2)], h));
        let k4 = self.rhs.eval(t + h, &axpy(y, &[(T::one(), &k3)], h));
        let sixth = lit::<T>(1.0 / 6.0);
        let third = lit::<T>(1.0 / 3.0);
        axpy(y, &[(sixth, &k1), (third, &k2), (third, &k3), (sixth, &k4)], h)
    }

    fn dp_step(&self, y: &State<T>, t: T, h: T) -> (State<T>, T) {
        let l = lit::<T>;
        let f = &self.rhs;
        let k1 = f.eval(t, y);
        let k2 = f.eval(t + l(C2) * h, &axpy(y, &[(l(A21), &k1)], h));
        let k3 = f.eval(t + l(C3) * h, &axpy(y, &[(l(A31), &k1), (l(A32), &k2)], h));
        let k4 = f.eval(
            t + l(C4) * h,
            &axpy(y, &[(l(A41), &k1), (l(A42), &k2), (l(A43), &k3)], h),
        );
        let k5 = f.eval(
            t + l(C5) * h,
            &axpy(y, &[(l(A51), &k1), (l(A52), &k2), (l(A53), &k3), (l(A54), &k4)], h),
        );
        let k6 = f.eval(
            t + h,
            &axpy(
                y,
                &[(l(A61), &k1), (l(A62), &k2), (l(A63), &k3), (l(A64), &k4), (l(A65), &k5)],
                h,
            ),
        );
        let y_new = axpy(
            y,
            &[(l(B1), &k1), (l(B3), &k3), (l(B4), &k4), (l(B5), &k5), (l(B6), &k6)],
            h,
        );
        let k7 = f.eval(t + h, &y_new);
        let err_vec = axpy(
            &[Complex::new(T::zero(), T::zero()); 4],
            &[(l(E1), &k1), (l(E3), &k3), (l(E4), &k4), (l(E5), &k5), (l(E6), &k6), (l(E7), &k7)],
            h,
        );
        let mut acc = T::zero();
        for i in 0..4 {
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].norm().max(y_new[i].norm());
            let r = err_vec[i].norm() / sc;
            acc = acc + r * r;
        }
        (y_new, (acc / l(4.0)).sqrt())
    }
}

fn check_finite<T: Real>(y: &State<T>, t: T) -> Result<()> {
    if y.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState {
            t: t.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Integrates from `cfg.t_start` (where `state0` is imposed) and samples the
/// solution at every time of `sample_grid`.
pub fn integrate<T: Real>(
    coupling: &SoCoupling<T>,
    protocol: &ModulationProtocol<T>,
    state0: &AmplitudeVector<T>,
    cfg: &IntegratorConfig<T>,
    sample_grid: &[T],
) -> Result<TrajectoryRecord<T>> {
    cfg.validate()?;
    let state0 = state0.require_normalized()?;
    validate_grid(sample_grid, cfg.t_start, cfg.t_end)?;

    let mut stepper = Stepper::new(coupling, protocol, *cfg);
    let mut y = state0.0;
    let mut t = cfg.t_start;
    let mut states = Vec::with_capacity(sample_grid.len());
    for &ts in sample_grid {
        y = stepper.advance(y, t, ts)?;
        t = ts;
        states.push(AmplitudeVector(y));
    }
    Ok(TrajectoryRecord::from_samples(
        sample_grid.to_vec(),
        states,
        protocol.clone(),
        cfg.solver_id(),
        state0.norm2(),
    ))
}

/// Propagates a single state from `t_from` to `t_to`; either direction is
/// allowed. The horizon fields of `cfg` are ignored.
pub fn propagate<T: Real>(
    coupling: &SoCoupling<T>,
    protocol: &ModulationProtocol<T>,
    state: &AmplitudeVector<T>,
    t_from: T,
    t_to: T,
    cfg: &IntegratorConfig<T>,
) -> Result<AmplitudeVector<T>> {
    if !(t_from.is_finite() && t_to.is_finite()) {
        return Err(Error::NonFinite("propagation interval"));
    }
    let (lo, hi) = if t_from < t_to { (t_from, t_to) } else { (t_to, t_from) };
    let mut probe = *cfg;
    probe.t_start = lo;
    probe.t_end = hi + T::one();
    probe.validate()?;
    let mut stepper = Stepper::new(coupling, protocol, *cfg);
    stepper.advance(state.0, t_from, t_to).map(AmplitudeVector)
}

fn validate_grid<T: Real>(grid: &[T], t_start: T, t_end: T) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty sample grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("sample times must be strictly increasing".into()));
    }
    if grid[0] < t_start || grid[grid.len() - 1] > t_end {
        return Err(Error::InvalidGrid(format!(
            "samples must lie in [{t_start}, {t_end}]"
        )));
    }
    Ok(())
}

/// `n` uniformly spaced samples covering `[lo, hi]`, endpoints exact.
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "uniform grid needs at least two points");
    let last = n - 1;
    let span = hi - lo;
    (0..n)
        .map(|k| {
            if k == last {
                hi
            } else {
                lo + span * lit::<T>(k as f64) / lit::<T>(last as f64)
            }
        })
        .collect()
}

/// How [`compare_to_analytic`] treats the global phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseMode {
    Strict,
    /// Align one global phase at the first sample, then measure.
    GlobalPhaseInvariant,
}

/// Largest amplitude-vector distance between a trajectory and an analytic
/// evaluator on the trajectory's own sample times.
pub fn compare_to_analytic<T, F>(traj: &TrajectoryRecord<T>, analytic: F, mode: PhaseMode) -> T
where
    T: Real,
    F: Fn(T) -> AmplitudeVector<T>,
{
    let mut phase = Complex::new(T::one(), T::zero());
    if mode == PhaseMode::GlobalPhaseInvariant {
        if let (Some(&t0), Some(s0)) = (traj.times.first(), traj.states.first()) {
            let overlap = analytic(t0).inner(s0);
            if overlap.norm() > T::zero() {
                phase = overlap / overlap.norm();
            }
        }
    }
    traj.times
        .iter()
        .zip(traj.states.iter())
        .map(|(&t, s)| s.distance(&analytic(t).scale(phase)))
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Drive;

    fn zeeman_only(c: f64) -> ModulationProtocol<f64> {
        ModulationProtocol::custom("zeeman", move |_| Drive {
            upsilon: 0.0,
            epsilon: c,
        })
    }

    #[test]
    fn pure_zeeman_phases() {
        let g = SoCoupling::new(0.3).unwrap();
        let a0 = AmplitudeVector::from_real([0.5; 4]);
        let cfg = IntegratorConfig::new(0.0, 10.0);
        let grid = uniform_grid(0.0, 10.0, 11);
        let tr = integrate(&g, &zeeman_only(0.7), &a0, &cfg, &grid).unwrap();
        for (t, s) in tr.times.iter().zip(tr.states.iter()) {
            let down = Complex::from_polar(0.5, -0.7 * t);
            let up = Complex::from_polar(0.5, 0.7 * t);
            let want = AmplitudeVector::new(down, up, down, up);
            assert!(s.distance(&want) < 1e-9, "t={t}");
        }
        for snap in &tr.snapshots {
            for p in snap.p {
                assert!((p - 0.25).abs() < 1e-9);
            }
        }
        assert!(tr.norm_drift_max < 1e-9);
    }

    #[test]
    fn hits_grid_exactly() {
        let g = SoCoupling::new(0.3).unwrap();
        let p = ModulationProtocol::sync_sech2(0.2, 1.0, 1.0).unwrap();
        let grid = vec![-3.0, -1.234_567, 0.1, 2.0];
        let cfg = IntegratorConfig::new(-5.0, 2.0);
        let tr = integrate(&g, &p, &AmplitudeVector::basis(1), &cfg, &grid).unwrap();
        assert_eq!(tr.times, grid);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = SoCoupling::new(0.3).unwrap();
        let p = ModulationProtocol::sync_sech2(0.2, 1.0, 1.0).unwrap();
        let cfg = IntegratorConfig::new(0.0, 1.0);
        let a = AmplitudeVector::basis(1);
        assert!(integrate(&g, &p, &a, &cfg, &[]).is_err());
        assert!(integrate(&g, &p, &a, &cfg, &[0.5, 0.5]).is_err());
        assert!(integrate(&g, &p, &a, &cfg, &[0.5, 2.0]).is_err());
        let bad = AmplitudeVector::from_real([1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            integrate(&g, &p, &bad, &cfg, &[1.0]),
            Err(Error::NotNormalized { .. })
        ));
        let reversed = IntegratorConfig::new(1.0, 0.0);
        assert!(integrate(&g, &p, &a, &reversed, &[0.5]).is_err());
    }

    #[test]
    fn non_finite_drive_aborts() {
        let g = SoCoupling::new(0.3).unwrap();
        let p = ModulationProtocol::custom("blowup", |t: f64| Drive {
            upsilon: if t > 0.5 { f64::NAN } else { 1.0 },
            epsilon: 0.0,
        });
        let cfg = IntegratorConfig::new(0.0, 1.0);
        let r = integrate(&g, &p, &AmplitudeVector::basis(1), &cfg, &[1.0]);
        assert!(matches!(
            r,
            Err(Error::NonFiniteState { .. }) | Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn compare_identity_is_zero() {
        let g = SoCoupling::new(0.3).unwrap();
        let p = ModulationProtocol::sync_sech2(0.2, 1.0, 1.0).unwrap();
        let grid = uniform_grid(0.0, 3.0, 31);
        let cfg = IntegratorConfig::new(0.0, 3.0);
        let tr = integrate(&g, &p, &AmplitudeVector::basis(2), &cfg, &grid).unwrap();
        let lookup = |t: f64| {
            let k = tr.times.iter().position(|x| *x == t).unwrap();
            tr.states[k]
        };
        assert_eq!(compare_to_analytic(&tr, lookup, PhaseMode::Strict), 0.0);
        let shifted = |t: f64| lookup(t).scale(Complex::from_polar(1.0, 0.8));
        assert!(compare_to_analytic(&tr, shifted, PhaseMode::Strict) > 0.5);
        assert!(compare_to_analytic(&tr, shifted, PhaseMode::GlobalPhaseInvariant) < 1e-15);
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(-25.0, 25.0, 2001);
        assert_eq!(g.len(), 2001);
        assert_eq!(g[0], -25.0);
        assert_eq!(g[2000], 25.0);
        assert_eq!(g[1000], 0.0);
    }
}
