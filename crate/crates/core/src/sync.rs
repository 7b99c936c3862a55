//! Exact engine for synchronous modulation `epsilon(t) = beta upsilon(t)`.
//!
//! With the rescaled time `tau = int upsilon dt` the amplitude equations have
//! the constant coefficient matrix `H_tau = hamiltonian_matrix(gamma, 1, beta)`.
//! Its eigenpairs are known in closed form, so the solution is a superposition
//! of four stationary-like states `vec[m] exp(-i lambda_m tau)`.
//!
//! For the `sech^2` pulse `upsilon(t) = V sech^2(Omega t)` the rescaled time is
//! `tau(t) = (V / Omega) tanh(Omega t)`, which stays bounded, so the state at
//! `t -> +inf` is simply the state at `tau = V / Omega`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::solve_real;
use crate::model::{
    hamiltonian_unchecked, imbalance, populations, AmplitudeVector, Epoch, Hamiltonian,
    ModulationProtocol, Observable, SoCoupling, BRANCH_TOL,
};
use crate::scalar::{lit, Real};

/// Which construction produced an [`EigenSystem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenBranch {
    /// `|sin(pi gamma)| >= 1e-9`: vectors built from `alpha_-/+` and `eta_+/-`.
    ClosedForm,
    /// `sin(pi gamma) = 0`: `H_tau` splits into the `(a1, a3)` and `(a2, a4)`
    /// blocks, each diagonalized on its own.
    Decoupled,
}

/// Auxiliary constants entering the closed-form eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxConstants<T> {
    pub alpha_minus: T,
    pub alpha_plus: T,
    pub eta_minus: T,
    pub eta_plus: T,
}

/// Characteristic values and real eigenvectors `(A_m, B_m, C_m, D_m)` of `H_tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSystem<T> {
    /// `(-r1, +r1, -r3, +r3)` with `r1 = sqrt(1 + beta^2 - 2 beta cos(pi gamma))`
    /// and `r3 = sqrt(1 + beta^2 + 2 beta cos(pi gamma))`.
    pub lambda: [T; 4],
    /// `vec[m] = (A_m, B_m, C_m, D_m)`, unit norm.
    pub vec: [[T; 4]; 4],
    /// `None` on the decoupled branch, where the constants are undefined.
    pub aux: Option<AuxConstants<T>>,
    pub beta: T,
    pub coupling: SoCoupling<T>,
    pub branch: EigenBranch,
}

/// Eigen-decomposition of the rescaled synchronous problem.
pub fn eigen_sync<T: Real>(beta: T, coupling: &SoCoupling<T>) -> Result<EigenSystem<T>> {
    if !beta.is_finite() {
        return Err(Error::NonFinite("beta"));
    }
    let (s, c) = (coupling.sin_pg(), coupling.cos_pg());
    let one = T::one();
    let two = lit::<T>(2.0);
    let r1 = (one + beta * beta - two * beta * c).sqrt();
    let r3 = (one + beta * beta + two * beta * c).sqrt();
    let lambda = [-r1, r1, -r3, r3];

    if s.abs() < lit(BRANCH_TOL) {
        return Ok(decoupled(beta, *coupling, lambda));
    }

    // alpha solves s a^2 + 2 (beta - c) a - s = 0, eta solves
    // s e^2 - 2 (beta + c) e - s = 0; both root pairs multiply to -1, so the
    // root prone to cancellation is taken as -1 / (the other one).
    let d = c - beta;
    let (alpha_minus, alpha_plus) = if d >= T::zero() {
        let ap = (d + r1) / s;
        (-s / (d + r1), ap)
    } else {
        let am = (d - r1) / s;
        (am, s / (r1 - d))
    };
    let e = beta + c;
    let (eta_minus, eta_plus) = if e >= T::zero() {
        let ep = (e + r3) / s;
        (-s / (e + r3), ep)
    } else {
        let em = (e - r3) / s;
        (em, s / (r3 - e))
    };

    let spin_flip_vec = |a: T| {
        let amp = (two + two * a * a).sqrt().recip();
        [amp, amp * a, amp, -amp * a]
    };
    let spin_keep_vec = |h: T| {
        let amp = (two + two * h * h).sqrt().recip();
        [amp, amp * h, -amp, amp * h]
    };

    Ok(EigenSystem {
        lambda,
        vec: [
            spin_flip_vec(alpha_minus),
            spin_flip_vec(alpha_plus),
            spin_keep_vec(eta_plus),
            spin_keep_vec(eta_minus),
        ],
        aux: Some(AuxConstants {
            alpha_minus,
            alpha_plus,
            eta_minus,
            eta_plus,
        }),
        beta,
        coupling: *coupling,
        branch: EigenBranch::ClosedForm,
    })
}

fn decoupled<T: Real>(beta: T, coupling: SoCoupling<T>, lambda: [T; 4]) -> EigenSystem<T> {
    // Block (a1, a3) = [[beta, -c], [-c, beta]], block (a2, a4) = [[-beta, -c], [-c, -beta]].
    // Eigenpairs: beta - c on (1,0,1,0), beta + c on (1,0,-1,0),
    // -beta + c on (0,1,0,-1), -beta - c on (0,1,0,1).
    let h = T::FRAC_1_SQRT_2();
    let z = T::zero();
    let c = coupling.cos_pg();
    let v13_sym = [h, z, h, z];
    let v13_anti = [h, z, -h, z];
    let v24_anti = [z, h, z, -h];
    let v24_sym = [z, h, z, h];

    // lambda1 = -|beta - c|, lambda3 = -|beta + c|
    let (v1, v2) = if beta - c <= z {
        (v13_sym, v24_anti)
    } else {
        (v24_anti, v13_sym)
    };
    let (v3, v4) = if beta + c <= z {
        (v13_anti, v24_sym)
    } else {
        (v24_sym, v13_anti)
    };
    EigenSystem {
        lambda,
        vec: [v1, v2, v3, v4],
        aux: None,
        beta,
        coupling,
        branch: EigenBranch::Decoupled,
    }
}

impl<T: Real> EigenSystem<T> {
    /// The constant matrix of the `tau`-frame equations.
    pub fn h_tau(&self) -> Hamiltonian<T> {
        hamiltonian_unchecked(&self.coupling, T::one(), self.beta)
    }

    /// `||H_tau vec[m] - lambda_m vec[m]||`.
    pub fn residual(&self, m: usize) -> T {
        let hv = self.h_tau().apply_real(&self.vec[m]);
        hv.iter()
            .zip(self.vec[m].iter())
            .fold(T::zero(), |acc, (x, v)| {
                let d = *x - self.lambda[m] * *v;
                acc + d * d
            })
            .sqrt()
    }

    pub fn max_residual(&self) -> T {
        (0..4).map(|m| self.residual(m)).fold(T::zero(), T::max)
    }

    /// Gram matrix `vec[m] . vec[n]`.
    pub fn gram(&self) -> [[T; 4]; 4] {
        let mut g = [[T::zero(); 4]; 4];
        for (m, row) in g.iter_mut().enumerate() {
            for (n, gmn) in row.iter_mut().enumerate() {
                *gmn = (0..4).fold(T::zero(), |acc, k| acc + self.vec[m][k] * self.vec[n][k]);
            }
        }
        g
    }

    /// The stationary-like state `m` at rescaled time `tau`.
    pub fn stationary_state(&self, m: usize, tau: T) -> AmplitudeVector<T> {
        let phase = Complex::from_polar(T::one(), -self.lambda[m] * tau);
        AmplitudeVector(self.vec[m].map(|x| phase * x))
    }
}

/// Superposition coefficients `s_m` fixed by an initial condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuperpositionCoeffs<T> {
    pub s: [Complex<T>; 4],
    /// Rescaled time at which the initial state was imposed.
    pub tau0: T,
}

/// Rescaled time of the `sech^2` pulse, `(V / Omega) tanh(Omega t)`.
pub fn tau_sech2<T: Real>(v: T, omega: T, t: T) -> T {
    v / omega * (omega * t).tanh()
}

/// Solves `sum_m s_m vec[m] exp(-i lambda_m tau0) = state0` for `s`.
///
/// The eigenvector matrix is inverted as a general linear system; no
/// orthogonality is assumed, which keeps degenerate spectra (e.g. `beta = 0`)
/// safe.
pub fn superposition_from_initial<T: Real>(
    eig: &EigenSystem<T>,
    state0: &AmplitudeVector<T>,
    tau0: T,
) -> Result<SuperpositionCoeffs<T>> {
    let state0 = state0.require_normalized()?;
    if !tau0.is_finite() {
        return Err(Error::NonFinite("tau0"));
    }
    let mut m = [[T::zero(); 4]; 4];
    for (k, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = eig.vec[j][k];
        }
    }
    let x = solve_real(m, state0.0).ok_or(Error::Singular("synchronous eigenvector matrix"))?;
    let mut s = x;
    for (j, sj) in s.iter_mut().enumerate() {
        *sj = *sj * Complex::from_polar(T::one(), eig.lambda[j] * tau0);
    }
    Ok(SuperpositionCoeffs { s, tau0 })
}

/// `a_k(tau) = sum_m s_m vec[m]_k exp(-i lambda_m tau)`.
pub fn evolve_sync<T: Real>(
    eig: &EigenSystem<T>,
    coeffs: &SuperpositionCoeffs<T>,
    tau: T,
) -> AmplitudeVector<T> {
    let mut a = [Complex::new(T::zero(), T::zero()); 4];
    for m in 0..4 {
        let w = coeffs.s[m] * Complex::from_polar(T::one(), -eig.lambda[m] * tau);
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = *ak + w * eig.vec[m][k];
        }
    }
    AmplitudeVector(a)
}

/// Exact time-domain solution for a `sech^2` synchronous pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncSolution<T> {
    pub eig: EigenSystem<T>,
    pub coeffs: SuperpositionCoeffs<T>,
    pub v: T,
    pub omega: T,
}

impl<T: Real> SyncSolution<T> {
    /// Fixes the solution by imposing `state0` at `epoch`; the remote past maps
    /// to `tau0 = -V / Omega` exactly.
    pub fn new(
        coupling: &SoCoupling<T>,
        protocol: &ModulationProtocol<T>,
        state0: &AmplitudeVector<T>,
        epoch: Epoch<T>,
    ) -> Result<Self> {
        let ModulationProtocol::SyncSech2 { beta, v, omega } = *protocol else {
            return Err(Error::BranchViolation(format!(
                "synchronous engine needs a sech^2 synchronous protocol, got {}",
                protocol.label()
            )));
        };
        let eig = eigen_sync(beta, coupling)?;
        let tau0 = match epoch {
            Epoch::At(t0) => tau_sech2(v, omega, t0),
            Epoch::MinusInfinity => -v / omega,
        };
        let coeffs = superposition_from_initial(&eig, state0, tau0)?;
        Ok(Self {
            eig,
            coeffs,
            v,
            omega,
        })
    }

    pub fn tau(&self, t: T) -> T {
        tau_sech2(self.v, self.omega, t)
    }

    pub fn amplitudes(&self, t: T) -> AmplitudeVector<T> {
        evolve_sync(&self.eig, &self.coeffs, self.tau(t))
    }

    /// State at `t -> +inf`, i.e. `tau = V / Omega`.
    pub fn final_state(&self) -> AmplitudeVector<T> {
        evolve_sync(&self.eig, &self.coeffs, self.v / self.omega)
    }

    /// State at `t -> -inf`, i.e. `tau = -V / Omega`.
    pub fn initial_limit(&self) -> AmplitudeVector<T> {
        evolve_sync(&self.eig, &self.coeffs, -self.v / self.omega)
    }
}

/// Asymptotic imbalance `Z_sq(+inf)` for a synchronous `sech^2` pulse.
pub fn asymptotic_imbalance_sync<T: Real>(
    protocol: &ModulationProtocol<T>,
    coupling: &SoCoupling<T>,
    state0: &AmplitudeVector<T>,
    epoch: Epoch<T>,
    s: Observable,
    q: Observable,
) -> Result<T> {
    let sol = SyncSolution::new(coupling, protocol, state0, epoch)?;
    let snap = populations(&sol.final_state(), T::infinity());
    imbalance(&snap, s, q)
}

/// Outcome of [`classify_sync_condition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncCondition {
    /// Populations return to their initial values; `2V/Omega = n pi`, `n >= 1`.
    Ccpc(u32),
    /// Left/right well totals swap; `2V/Omega = (n + 1/2) pi`, `n >= 0`.
    Ccpi(u32),
    Neither,
}

/// Checks the conservation / inversion conditions (both need `beta = 0`).
pub fn classify_sync_condition<T: Real>(beta: T, v: T, omega: T, tol: T) -> SyncCondition {
    if !(omega > T::zero()) || !(tol > T::zero()) || beta.abs() > tol {
        return SyncCondition::Neither;
    }
    let pi = T::PI();
    let x = lit::<T>(2.0) * v / omega;
    let half = lit::<T>(0.5);

    let n = (x / pi).round();
    if n >= T::one() && (x - n * pi).abs() <= tol {
        return SyncCondition::Ccpc(n.to_u32().unwrap_or(u32::MAX));
    }
    let m = (x / pi - half).round();
    if m >= T::zero() && (x - (m + half) * pi).abs() <= tol {
        return SyncCondition::Ccpi(m.to_u32().unwrap_or(u32::MAX));
    }
    SyncCondition::Neither
}
