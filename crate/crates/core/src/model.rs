//! Four-level model: state amplitudes, drive protocols, the coefficient
//! matrix of the coupled amplitude equations, populations and imbalances.
//!
//! The basis order is fixed everywhere as
//! `(a1, a2, a3, a4) = (|0,up>, |0,down>, |up,0>, |down,0>)`: states 1 and 2
//! sit in the right well, states 3 and 4 in the left well.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, sin_cos_pi, Real};

/// Tolerance for the "normalized" flag on amplitude vectors.
pub const NORM_TOL: f64 = 1e-9;

/// Threshold on `|sin(pi gamma)|`, `|cos(pi gamma) -/+ 1|` and friends used for
/// every branch decision.
pub const BRANCH_TOL: f64 = 1e-9;

/// Complex probability amplitudes of the four Fock states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeVector<T>(pub [Complex<T>; 4]);

impl<T: Real> AmplitudeVector<T> {
    pub fn new(a1: Complex<T>, a2: Complex<T>, a3: Complex<T>, a4: Complex<T>) -> Self {
        Self([a1, a2, a3, a4])
    }

    pub fn from_real(a: [T; 4]) -> Self {
        Self(a.map(|x| Complex::new(x, T::zero())))
    }

    /// Unit amplitude on basis state `k` (1-based).
    pub fn basis(k: usize) -> Self {
        assert!((1..=4).contains(&k), "basis index out of range: {k}");
        let mut a = [Complex::new(T::zero(), T::zero()); 4];
        a[k - 1] = Complex::new(T::one(), T::zero());
        Self(a)
    }

    pub fn zero() -> Self {
        Self([Complex::new(T::zero(), T::zero()); 4])
    }

    pub fn norm2(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm2() - T::one()).abs() < lit(NORM_TOL)
    }

    /// Checks the normalization flag, returning the state unchanged.
    pub fn require_normalized(self) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::NonFinite("amplitude vector"));
        }
        if self.is_normalized() {
            Ok(self)
        } else {
            Err(Error::NotNormalized {
                norm2: self.norm2().to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    /// Rescales to unit norm.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm2().sqrt();
        if !n.is_finite() || n == T::zero() {
            return Err(Error::NotNormalized {
                norm2: self.norm2().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.scale(Complex::new(n.recip(), T::zero())))
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        Self(self.0.map(|a| a * z))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * b
            })
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_sqr())
            .sqrt()
    }
}

impl<T> Index<usize> for AmplitudeVector<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.0[i]
    }
}

/// Effective spin-orbit coupling strength with `sin(pi gamma)` and
/// `cos(pi gamma)` evaluated once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoCoupling<T> {
    gamma: T,
    sin_pg: T,
    cos_pg: T,
}

impl<T: Real> SoCoupling<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        let (sin_pg, cos_pg) = sin_cos_pi(gamma);
        Ok(Self {
            gamma,
            sin_pg,
            cos_pg,
        })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn sin_pg(&self) -> T {
        self.sin_pg
    }

    pub fn cos_pg(&self) -> T {
        self.cos_pg
    }

    /// True when spin-flipping hops vanish (`|sin(pi gamma)| < 1e-9`).
    pub fn is_spin_conserving(&self) -> bool {
        self.sin_pg.abs() < lit(BRANCH_TOL)
    }

    /// `Some(+1 | -1)` when `cos(pi gamma)` equals that value within tolerance.
    pub fn conserving_sign(&self) -> Option<T> {
        unit_sign(self.cos_pg)
    }

    /// `Some(+1 | -1)` when `sin(pi gamma)` equals that value within tolerance.
    pub fn flipping_sign(&self) -> Option<T> {
        unit_sign(self.sin_pg)
    }
}

fn unit_sign<T: Real>(x: T) -> Option<T> {
    let tol = lit::<T>(BRANCH_TOL);
    if (x - T::one()).abs() < tol {
        Some(T::one())
    } else if (x + T::one()).abs() < tol {
        Some(-T::one())
    } else {
        None
    }
}

/// Instantaneous drive values `(upsilon(t), epsilon(t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive<T> {
    pub upsilon: T,
    pub epsilon: T,
}

/// User-supplied drive, only usable with the numerical integrator.
#[derive(Clone)]
pub struct CustomDrive<T> {
    pub name: String,
    pub drive: Arc<dyn Fn(T) -> Drive<T> + Send + Sync>,
}

impl<T> fmt::Debug for CustomDrive<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDrive").field("name", &self.name).finish()
    }
}

/// Instant at which initial amplitudes are imposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Epoch<T> {
    /// A finite time, e.g. `t0 = 0`.
    At(T),
    /// The remote past, realized as the pulse's exact limit by the analytic
    /// engines and as `-T` by time-domain runs.
    MinusInfinity,
}

impl<T: Real> Epoch<T> {
    /// Finite start time, substituting `-horizon` for the remote past.
    pub fn time(&self, horizon: T) -> T {
        match self {
            Self::At(t) => *t,
            Self::MinusInfinity => -horizon,
        }
    }
}

/// Time dependence of the tunneling amplitude and the Zeeman field.
#[derive(Clone, Debug)]
pub enum ModulationProtocol<T> {
    /// `upsilon(t) = V sech^2(Omega t)`, `epsilon(t) = beta upsilon(t)`.
    SyncSech2 { beta: T, v: T, omega: T },
    /// `upsilon(t) = upsilon sech(chi t)`, `epsilon(t) = epsilon tanh(chi t)`.
    AsyncTanhSech { epsilon: T, upsilon: T, chi: T },
    Custom(CustomDrive<T>),
}

impl<T: Real> ModulationProtocol<T> {
    pub fn sync_sech2(beta: T, v: T, omega: T) -> Result<Self> {
        check_finite(&[(beta, "beta"), (v, "V"), (omega, "Omega")])?;
        if omega <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "Omega",
                reason: format!("must be > 0, got {omega}"),
            });
        }
        Ok(Self::SyncSech2 { beta, v, omega })
    }

    pub fn async_tanh_sech(epsilon: T, upsilon: T, chi: T) -> Result<Self> {
        check_finite(&[(epsilon, "epsilon"), (upsilon, "upsilon"), (chi, "chi")])?;
        if chi <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: format!("must be > 0, got {chi}"),
            });
        }
        Ok(Self::AsyncTanhSech {
            epsilon,
            upsilon,
            chi,
        })
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(T) -> Drive<T> + Send + Sync + 'static,
    {
        Self::Custom(CustomDrive {
            name: name.into(),
            drive: Arc::new(f),
        })
    }

    pub fn drive(&self, t: T) -> Drive<T> {
        match self {
            Self::SyncSech2 { beta, v, omega } => {
                let s = sech(*omega * t);
                let upsilon = *v * s * s;
                Drive {
                    upsilon,
                    epsilon: *beta * upsilon,
                }
            }
            Self::AsyncTanhSech {
                epsilon,
                upsilon,
                chi,
            } => Drive {
                upsilon: *upsilon * sech(*chi * t),
                epsilon: *epsilon * (*chi * t).tanh(),
            },
            Self::Custom(c) => (c.drive)(t),
        }
    }

    /// Short identifier used in output metadata.
    pub fn label(&self) -> String {
        match self {
            Self::SyncSech2 { beta, v, omega } => {
                format!("sync_sech2(beta={beta}, V={v}, Omega={omega})")
            }
            Self::AsyncTanhSech {
                epsilon,
                upsilon,
                chi,
            } => format!("async_tanh_sech(epsilon={epsilon}, upsilon={upsilon}, chi={chi})"),
            Self::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// Inverse width of the pulse, when the protocol has one.
    pub fn rate(&self) -> Option<T> {
        match self {
            Self::SyncSech2 { omega, .. } => Some(*omega),
            Self::AsyncTanhSech { chi, .. } => Some(*chi),
            Self::Custom(_) => None,
        }
    }
}

fn check_finite<T: Real>(vals: &[(T, &'static str)]) -> Result<()> {
    match vals.iter().find(|(v, _)| !v.is_finite()) {
        Some((_, name)) => Err(Error::NonFinite(name)),
        None => Ok(()),
    }
}

#[inline]
pub(crate) fn sech<T: Real>(x: T) -> T {
    // cosh overflows to inf for large |x|, giving 0 as required
    x.cosh().recip()
}

/// Real symmetric 4x4 coefficient matrix `H` of `i da/dt = H a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hamiltonian<T> {
    pub m: [[T; 4]; 4],
}

/// Builds the coefficient matrix for instantaneous drive values.
pub fn hamiltonian_matrix<T: Real>(
    coupling: &SoCoupling<T>,
    upsilon: T,
    epsilon: T,
) -> Result<Hamiltonian<T>> {
    check_finite(&[(upsilon, "upsilon"), (epsilon, "epsilon")])?;
    Ok(hamiltonian_unchecked(coupling, upsilon, epsilon))
}

#[inline]
pub(crate) fn hamiltonian_unchecked<T: Real>(
    coupling: &SoCoupling<T>,
    upsilon: T,
    epsilon: T,
) -> Hamiltonian<T> {
    let z = T::zero();
    let uc = upsilon * coupling.cos_pg;
    let us = upsilon * coupling.sin_pg;
    Hamiltonian {
        m: [
            [epsilon, z, -uc, -us],
            [z, -epsilon, us, -uc],
            [-uc, us, epsilon, z],
            [-us, -uc, z, -epsilon],
        ],
    }
}

impl<T: Real> Hamiltonian<T> {
    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.m[i][j], T::zero())
    }

    pub fn to_complex(&self) -> [[Complex<T>; 4]; 4] {
        self.m.map(|row| row.map(|x| Complex::new(x, T::zero())))
    }

    /// Exact conjugate-transpose equality.
    pub fn is_hermitian(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.m[i][j] == self.m[j][i]))
    }

    pub fn apply(&self, a: &AmplitudeVector<T>) -> AmplitudeVector<T> {
        let mut out = [Complex::new(T::zero(), T::zero()); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o = *o + a.0[j] * self.m[i][j];
            }
        }
        AmplitudeVector(out)
    }

    pub fn apply_real(&self, v: &[T; 4]) -> [T; 4] {
        let mut out = [T::zero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o = *o + self.m[i][j] * v[j];
            }
        }
        out
    }
}

/// Occupation probabilities at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationSnapshot<T> {
    pub t: T,
    pub p: [T; 4],
    /// Left well, `P3 + P4`.
    pub pl: T,
    /// Right well, `P1 + P2`.
    pub pr: T,
    pub norm2: T,
}

pub fn populations<T: Real>(state: &AmplitudeVector<T>, t: T) -> PopulationSnapshot<T> {
    let p = state.0.map(|a| a.norm_sqr());
    PopulationSnapshot {
        t,
        p,
        pl: p[2] + p[3],
        pr: p[0] + p[1],
        norm2: p[0] + p[1] + p[2] + p[3],
    }
}

/// A population entering an imbalance: a single level (1..=4) or a well total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    Level(u8),
    Left,
    Right,
}

impl Observable {
    pub fn level(k: u8) -> Result<Self> {
        if (1..=4).contains(&k) {
            Ok(Self::Level(k))
        } else {
            Err(Error::UnknownObservable(k.to_string()))
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Level(k) => write!(f, "{k}"),
            Self::Left => f.write_str("L"),
            Self::Right => f.write_str("R"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L" | "l" => Ok(Self::Left),
            "R" | "r" => Ok(Self::Right),
            other => other
                .parse::<u8>()
                .map_err(|_| Error::UnknownObservable(other.to_string()))
                .and_then(Self::level),
        }
    }
}

impl<T: Real> PopulationSnapshot<T> {
    pub fn value(&self, obs: Observable) -> T {
        match obs {
            Observable::Level(k) => self.p[usize::from(k) - 1],
            Observable::Left => self.pl,
            Observable::Right => self.pr,
        }
    }
}

/// Population imbalance `Z_sq = P_s - P_q`.
pub fn imbalance<T: Real>(snap: &PopulationSnapshot<T>, s: Observable, q: Observable) -> Result<T> {
    if s == q {
        return Err(Error::SameObservable(s.to_string()));
    }
    Ok(snap.value(s) - snap.value(q))
}
