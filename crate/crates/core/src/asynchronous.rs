//! Exact engines for asynchronous modulation
//! `epsilon(t) = epsilon tanh(chi t)`, `upsilon(t) = upsilon sech(chi t)`.
//!
//! Two branches decouple the four amplitudes into pairs:
//!
//! * spin-conserving (`cos(pi gamma) = +/-1`): pairs `(a1, a3)` and `(a2, a4)`,
//!   solved for any drive through the phase integrals of `upsilon` and
//!   `epsilon`;
//! * spin-flipping (`sin(pi gamma) = +/-1`): pairs `(a1, a4)` and `(a2, a3)`,
//!   solved in closed form only on the surface `chi^2/4 + epsilon^2 = upsilon^2`.
//!
//! A coupling of `-1` instead of `+1` is absorbed by flipping the sign of
//! `upsilon`; every function here takes that effective amplitude.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{AmplitudeVector, ModulationProtocol, SoCoupling, BRANCH_TOL};
use crate::scalar::{lit, ln_cosh, Real};

/// Amplitudes of the asynchronous drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsyncParams<T> {
    pub epsilon: T,
    pub upsilon: T,
    pub chi: T,
}

impl<T: Real> AsyncParams<T> {
    pub fn new(epsilon: T, upsilon: T, chi: T) -> Result<Self> {
        if !(epsilon.is_finite() && upsilon.is_finite() && chi.is_finite()) {
            return Err(Error::NonFinite("asynchronous drive parameters"));
        }
        if chi <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: format!("must be > 0, got {chi}"),
            });
        }
        Ok(Self {
            epsilon,
            upsilon,
            chi,
        })
    }

    fn with_sign(self, sign: T) -> Self {
        Self {
            upsilon: self.upsilon * sign,
            ..self
        }
    }
}

/// Antiderivatives of `upsilon(t)` and `epsilon(t)`, both vanishing at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePair<T> {
    /// `(2 upsilon / chi) atan(tanh(chi t / 2))`
    pub phi_u: T,
    /// `(epsilon / chi) ln cosh(chi t)`
    pub phi_e: T,
}

/// Closed-form phase integrals. Both forms saturate smoothly (the `ln cosh`
/// uses `|x| - ln 2 + ln(1 + e^{-2|x|})`), so no overflow occurs at any `t`.
pub fn phase_integrals<T: Real>(epsilon: T, upsilon: T, chi: T, t: T) -> PhasePair<T> {
    let x = chi * t;
    let two = lit::<T>(2.0);
    PhasePair {
        phi_u: two * upsilon / chi * (x / two).tanh().atan(),
        phi_e: epsilon / chi * ln_cosh(x),
    }
}

/// Which amplitude pair a set of constants describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    /// `A+/-` for `(a1, a3)`.
    ConservingA,
    /// `B+/-` for `(a2, a4)`.
    ConservingB,
    /// `C+/-` for `(a1, a4)`.
    FlipC,
    /// `D+/-` for `(a2, a3)`.
    FlipD,
}

impl PairKind {
    /// Zero-based indices of the pair, in the order used by the pair arrays.
    pub fn indices(self) -> [usize; 2] {
        match self {
            Self::ConservingA => [0, 2],
            Self::ConservingB => [1, 3],
            Self::FlipC => [0, 3],
            Self::FlipD => [1, 2],
        }
    }

    pub fn is_conserving(self) -> bool {
        matches!(self, Self::ConservingA | Self::ConservingB)
    }
}

/// Superposition constants of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsyncBranchConstants<T> {
    pub kind: PairKind,
    pub plus: Complex<T>,
    pub minus: Complex<T>,
    pub t_ref: T,
}

fn cis<T: Real>(x: T) -> Complex<T> {
    Complex::from_polar(T::one(), x)
}

/// Constants of the spin-conserving solution from the pair values at `t_ref`.
///
/// `pair0` holds `(a1, a3)` for [`PairKind::ConservingA`] and `(a2, a4)` for
/// [`PairKind::ConservingB`].
pub fn conserving_constants<T: Real>(
    pair0: [Complex<T>; 2],
    kind: PairKind,
    params: &AsyncParams<T>,
    t_ref: T,
) -> Result<AsyncBranchConstants<T>> {
    if !t_ref.is_finite() {
        return Err(Error::NonFinite("t_ref"));
    }
    let ph = phase_integrals(params.epsilon, params.upsilon, params.chi, t_ref);
    let half = lit::<T>(0.5);
    let (sum, diff) = ((pair0[0] + pair0[1]) * half, (pair0[0] - pair0[1]) * half);
    let (plus, minus) = match kind {
        PairKind::ConservingA => (
            sum * cis(-(ph.phi_u - ph.phi_e)),
            diff * cis(ph.phi_u + ph.phi_e),
        ),
        PairKind::ConservingB => (
            sum * cis(-(ph.phi_u + ph.phi_e)),
            diff * cis(ph.phi_u - ph.phi_e),
        ),
        _ => {
            return Err(Error::BranchViolation(format!(
                "{kind:?} is not a spin-conserving pair"
            )))
        }
    };
    Ok(AsyncBranchConstants {
        kind,
        plus,
        minus,
        t_ref,
    })
}

/// Evaluates the spin-conserving pair at time `t`.
pub fn evolve_async_conserving<T: Real>(
    consts: &AsyncBranchConstants<T>,
    params: &AsyncParams<T>,
    t: T,
) -> Result<[Complex<T>; 2]> {
    let ph = phase_integrals(params.epsilon, params.upsilon, params.chi, t);
    let (p, m) = match consts.kind {
        PairKind::ConservingA => (
            consts.plus * cis(ph.phi_u - ph.phi_e),
            consts.minus * cis(-(ph.phi_u + ph.phi_e)),
        ),
        PairKind::ConservingB => (
            consts.plus * cis(ph.phi_u + ph.phi_e),
            consts.minus * cis(-(ph.phi_u - ph.phi_e)),
        ),
        kind => {
            return Err(Error::BranchViolation(format!(
                "{kind:?} constants passed to the spin-conserving engine"
            )))
        }
    };
    Ok([p + m, p - m])
}

/// `|second|^2 - |first|^2` of a spin-conserving pair, `-4 Re(X+ X-* e^{2i phi_u(t)})`
/// (this is `Z31` for pair A and `Z42` for pair B).
pub fn conserving_imbalance<T: Real>(consts: &AsyncBranchConstants<T>, phi_u: T) -> T {
    let two = lit::<T>(2.0);
    -lit::<T>(4.0) * (consts.plus * consts.minus.conj() * cis(two * phi_u)).re
}

/// Limit of `phi_u` as `t -> +inf` (`-` of it for `t -> -inf`).
pub fn phi_u_limit<T: Real>(upsilon: T, chi: T) -> T {
    T::FRAC_PI_2() * upsilon / chi
}

/// Conservation / inversion classes of the spin-conserving branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsyncConservingKind {
    Ccpc,
    Ccpi,
    Neither,
}

/// Classification plus the sign attached to the asymptotic imbalance: for
/// CCPC `Z31 = sign * 4 Re(A+ A-*)` with `sign = -cos(pi upsilon/chi)`, for CCPI
/// `Z31(-inf) = -sign * 4 Im(A+ A-*)` with `sign = sin(pi upsilon/chi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AsyncConservingCondition {
    pub kind: AsyncConservingKind,
    pub sign: Option<i8>,
}

pub fn classify_async_conserving<T: Real>(upsilon: T, chi: T, tol: T) -> AsyncConservingCondition {
    if !(chi > T::zero()) {
        return AsyncConservingCondition {
            kind: AsyncConservingKind::Neither,
            sign: None,
        };
    }
    let (s, c) = crate::scalar::sin_cos_pi(upsilon / chi);
    let sign_of = |x: T| if x > T::zero() { 1 } else { -1 };
    if s.abs() <= tol {
        AsyncConservingCondition {
            kind: AsyncConservingKind::Ccpc,
            sign: Some(-sign_of(c)),
        }
    } else if c.abs() <= tol {
        AsyncConservingCondition {
            kind: AsyncConservingKind::Ccpi,
            sign: Some(sign_of(s)),
        }
    } else {
        AsyncConservingCondition {
            kind: AsyncConservingKind::Neither,
            sign: None,
        }
    }
}

/// `chi^2/4 + epsilon^2 - upsilon^2`; the simple spin-flip solution needs it
/// to vanish.
pub fn check_flip_constraint<T: Real>(epsilon: T, upsilon: T, chi: T) -> T {
    chi * chi / lit(4.0) + epsilon * epsilon - upsilon * upsilon
}

fn require_flip_surface<T: Real>(params: &AsyncParams<T>) -> Result<()> {
    let r = check_flip_constraint(params.epsilon, params.upsilon, params.chi);
    if r.abs() <= lit(BRANCH_TOL) {
        Ok(())
    } else {
        let r = r.to_f64().unwrap_or(f64::NAN);
        Err(Error::BranchViolation(format!(
            "spin-flip constraint chi^2/4 + epsilon^2 - upsilon^2 = 0 violated, residual {r:e}; \
             use the numerical integrator"
        )))
    }
}

/// `sqrt(sech(x)) e^{x/2}` and `sqrt(sech(x)) e^{-x/2}` without overflow.
fn envelope<T: Real>(x: T) -> (T, T) {
    let two = lit::<T>(2.0);
    let up = (two / (T::one() + (-two * x).exp())).sqrt();
    let down = (two / (T::one() + (two * x).exp())).sqrt();
    (up, down)
}

/// Pair matrix `M(t)` with `pair(t) = M(t) (X+, X-)^T` on the spin-flip branch.
fn flip_matrix<T: Real>(kind: PairKind, p: &AsyncParams<T>, t: T) -> [[Complex<T>; 2]; 2] {
    let (gp, gm) = envelope(p.chi * t);
    let e = cis(p.epsilon * t);
    let ei = e.conj();
    let two = lit::<T>(2.0);
    match kind {
        // a1 = k (C+ gm e - C- gp e*), a4 = C+ gp e + C- gm e*,
        // k = -i (chi + 2 i eps) / (2 ups)
        PairKind::FlipC => {
            let k = Complex::new(two * p.epsilon, -p.chi) / (two * p.upsilon);
            [[k * e * gm, -(k * ei * gp)], [e * gp, ei * gm]]
        }
        // a2 = k (D+ gp e - D- gm e*), a3 = D+ gm e + D- gp e*,
        // k = -i (chi - 2 i eps) / (2 ups)
        _ => {
            let k = Complex::new(-two * p.epsilon, -p.chi) / (two * p.upsilon);
            [[k * e * gp, -(k * ei * gm)], [e * gm, ei * gp]]
        }
    }
}

/// Constants `C+/-` (pair `(a1, a4)`) or `D+/-` (pair `(a2, a3)`) from the pair
/// values at `t_ref`.
pub fn flip_constants<T: Real>(
    pair0: [Complex<T>; 2],
    kind: PairKind,
    params: &AsyncParams<T>,
    t_ref: T,
) -> Result<AsyncBranchConstants<T>> {
    if kind.is_conserving() {
        return Err(Error::BranchViolation(format!(
            "{kind:?} is not a spin-flip pair"
        )));
    }
    if !t_ref.is_finite() {
        return Err(Error::NonFinite("t_ref"));
    }
    require_flip_surface(params)?;
    let m = flip_matrix(kind, params, t_ref);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.norm() > T::epsilon()) {
        return Err(Error::Singular("spin-flip pair matrix"));
    }
    let plus = (pair0[0] * m[1][1] - m[0][1] * pair0[1]) / det;
    let minus = (m[0][0] * pair0[1] - m[1][0] * pair0[0]) / det;
    Ok(AsyncBranchConstants {
        kind,
        plus,
        minus,
        t_ref,
    })
}

/// Evaluates the spin-flip pair at time `t`.
pub fn evolve_async_flip<T: Real>(
    consts: &AsyncBranchConstants<T>,
    params: &AsyncParams<T>,
    t: T,
) -> Result<[Complex<T>; 2]> {
    if consts.kind.is_conserving() {
        return Err(Error::BranchViolation(format!(
            "{:?} constants passed to the spin-flip engine",
            consts.kind
        )));
    }
    require_flip_surface(params)?;
    let m = flip_matrix(consts.kind, params, t);
    Ok([
        m[0][0] * consts.plus + m[0][1] * consts.minus,
        m[1][0] * consts.plus + m[1][1] * consts.minus,
    ])
}

/// Exact limits of the pair populations, `(at -inf, at +inf)`, each in pair
/// order. For pair C: `P1(-inf) = P4(+inf) = 2|C+|^2`, `P4(-inf) = P1(+inf) = 2|C-|^2`;
/// for pair D: `P3(-inf) = P2(+inf) = 2|D+|^2`, `P2(-inf) = P3(+inf) = 2|D-|^2`.
pub fn flip_asymptotic_populations<T: Real>(consts: &AsyncBranchConstants<T>) -> ([T; 2], [T; 2]) {
    let two = lit::<T>(2.0);
    let p = two * consts.plus.norm_sqr();
    let m = two * consts.minus.norm_sqr();
    match consts.kind {
        PairKind::FlipC => ([p, m], [m, p]),
        PairKind::FlipD => ([m, p], [p, m]),
        // conserving pairs have no such identity; report the constants' weights
        _ => ([p, m], [p, m]),
    }
}

/// Which decoupling the coupling strength selects.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AsyncBranch<T> {
    /// `cos(pi gamma) = sign`.
    Conserving { sign: T },
    /// `sin(pi gamma) = sign`.
    Flip { sign: T },
}

impl<T: Real> AsyncBranch<T> {
    /// Branch gating on `gamma`; everything else belongs to the integrator.
    pub fn select(coupling: &SoCoupling<T>) -> Result<Self> {
        if let Some(sign) = coupling.conserving_sign() {
            Ok(Self::Conserving { sign })
        } else if let Some(sign) = coupling.flipping_sign() {
            Ok(Self::Flip { sign })
        } else {
            Err(Error::BranchViolation(format!(
                "asynchronous exact solutions need cos(pi gamma) = +/-1 or sin(pi gamma) = +/-1, \
                 gamma = {}",
                coupling.gamma()
            )))
        }
    }
}

/// Full four-amplitude exact solution on one of the asynchronous branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsyncSolution<T> {
    pub branch: AsyncBranch<T>,
    /// Drive parameters with the coupling sign folded into `upsilon`.
    pub params: AsyncParams<T>,
    pub pairs: [AsyncBranchConstants<T>; 2],
}

impl<T: Real> AsyncSolution<T> {
    /// Imposes `state0` at the finite time `t_ref`.
    pub fn new(
        coupling: &SoCoupling<T>,
        protocol: &ModulationProtocol<T>,
        state0: &AmplitudeVector<T>,
        t_ref: T,
    ) -> Result<Self> {
        let ModulationProtocol::AsyncTanhSech {
            epsilon,
            upsilon,
            chi,
        } = *protocol
        else {
            return Err(Error::BranchViolation(format!(
                "asynchronous engine needs a tanh/sech protocol, got {}",
                protocol.label()
            )));
        };
        let state0 = state0.require_normalized()?;
        let branch = AsyncBranch::select(coupling)?;
        let base = AsyncParams::new(epsilon, upsilon, chi)?;
        let pick = |k: PairKind| {
            let [i, j] = k.indices();
            [state0.0[i], state0.0[j]]
        };
        let (params, pairs) = match branch {
            AsyncBranch::Conserving { sign } => {
                let p = base.with_sign(sign);
                let a = conserving_constants(pick(PairKind::ConservingA), PairKind::ConservingA, &p, t_ref)?;
                let b = conserving_constants(pick(PairKind::ConservingB), PairKind::ConservingB, &p, t_ref)?;
                (p, [a, b])
            }
            AsyncBranch::Flip { sign } => {
                let p = base.with_sign(sign);
                let c = flip_constants(pick(PairKind::FlipC), PairKind::FlipC, &p, t_ref)?;
                let d = flip_constants(pick(PairKind::FlipD), PairKind::FlipD, &p, t_ref)?;
                (p, [c, d])
            }
        };
        Ok(Self {
            branch,
            params,
            pairs,
        })
    }

    pub fn amplitudes(&self, t: T) -> AmplitudeVector<T> {
        let mut a = AmplitudeVector::zero();
        for consts in &self.pairs {
            let pair = if consts.kind.is_conserving() {
                evolve_async_conserving(consts, &self.params, t)
            } else {
                evolve_async_flip(consts, &self.params, t)
            }
            .expect("constants were built for this branch");
            let [i, j] = consts.kind.indices();
            a.0[i] = pair[0];
            a.0[j] = pair[1];
        }
        a
    }

    /// Exact populations at `t -> -inf` and `t -> +inf`.
    pub fn asymptotic_populations(&self) -> ([T; 4], [T; 4]) {
        let mut lo = [T::zero(); 4];
        let mut hi = [T::zero(); 4];
        for consts in &self.pairs {
            let [i, j] = consts.kind.indices();
            let (a, b) = if consts.kind.is_conserving() {
                let lim = phi_u_limit(self.params.upsilon, self.params.chi);
                let pair_pop = |phi: T| {
                    let n = lit::<T>(2.0) * (consts.plus.norm_sqr() + consts.minus.norm_sqr());
                    let z = conserving_imbalance(consts, phi);
                    let half = lit::<T>(0.5);
                    [half * (n - z), half * (n + z)]
                };
                (pair_pop(-lim), pair_pop(lim))
            } else {
                flip_asymptotic_populations(consts)
            };
            lo[i] = a[0];
            lo[j] = a[1];
            hi[i] = b[0];
            hi[j] = b[1];
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn params(e: f64, u: f64, x: f64) -> AsyncParams<f64> {
        AsyncParams::new(e, u, x).unwrap()
    }

    #[test]
    fn phases_vanish_at_zero() {
        let p = phase_integrals(0.7, 1.3, 0.4, 0.0);
        assert_eq!((p.phi_u, p.phi_e), (0.0, 0.0));
    }

    #[test]
    fn phases_large_time() {
        let p = phase_integrals(1.0, 1.0, 1.0, 1e4);
        assert_eq!(p.phi_u, FRAC_PI_2);
        assert!((p.phi_e - (1e4 - std::f64::consts::LN_2)).abs() < 1e-9);
        let p = phase_integrals(1.0, 1.0, 1.0, -1e4);
        assert_eq!(p.phi_u, -FRAC_PI_2);
    }

    #[test]
    fn phases_at_one() {
        let p = phase_integrals(1.0, 1.0, 1.0, 1.0);
        assert!((p.phi_u - 2.0 * 0.5_f64.tanh().atan()).abs() < 1e-15);
        assert!((p.phi_u - 0.865_769_483_239_659_1).abs() < 1e-12);
        assert!((p.phi_e - 1.0_f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn conserving_constants_examples() {
        let p = params(1.0, 1.0, 1.0);
        let k = conserving_constants([c(0.0), c(1.0)], PairKind::ConservingA, &p, 0.0).unwrap();
        assert_eq!(k.plus, c(0.5));
        assert_eq!(k.minus, c(-0.5));

        let k = conserving_constants([c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], PairKind::ConservingA, &p, 0.0)
            .unwrap();
        assert!((k.plus - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(k.minus, c(0.0));

        let r3 = 3.0_f64.sqrt() / 2.0;
        let k = conserving_constants([c(0.5), c(r3)], PairKind::ConservingA, &p, -20.0).unwrap();
        assert!((k.plus.norm() - (0.5 + r3) / 2.0).abs() < 1e-15);
        assert!((k.minus.norm() - (r3 - 0.5) / 2.0).abs() < 1e-15);
        let back = evolve_async_conserving(&k, &p, -20.0).unwrap();
        assert!((back[0] - c(0.5)).norm() < 1e-12 && (back[1] - c(r3)).norm() < 1e-12);
        // |A+|^2 + |A-|^2 = half the pair norm
        assert!((k.plus.norm_sqr() + k.minus.norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conserving_pair_b_round_trip() {
        let p = params(0.6, 1.4, 0.8);
        let pair = [Complex::new(0.3, 0.4), Complex::new(-0.5, 0.1)];
        let k = conserving_constants(pair, PairKind::ConservingB, &p, 3.2).unwrap();
        let back = evolve_async_conserving(&k, &p, 3.2).unwrap();
        assert!((back[0] - pair[0]).norm() < 1e-14 && (back[1] - pair[1]).norm() < 1e-14);
    }

    #[test]
    fn conserving_cdt_keeps_populations() {
        let p = params(1.0, 1.0, 1.0);
        let k = conserving_constants([c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], PairKind::ConservingA, &p, 0.0)
            .unwrap();
        for t in [-30.0, -2.0, 0.5, 7.0, 30.0] {
            let a = evolve_async_conserving(&k, &p, t).unwrap();
            assert!((a[0].norm_sqr() - 0.5).abs() < 1e-15);
            assert!((a[1].norm_sqr() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn conserving_full_transfer_from_zero() {
        let p = params(1.0, 1.0, 1.0);
        let k = conserving_constants([c(0.0), c(1.0)], PairKind::ConservingA, &p, 0.0).unwrap();
        let z = conserving_imbalance(&k, phi_u_limit(1.0, 1.0));
        assert!((z + 1.0).abs() < 1e-15);
        let a = evolve_async_conserving(&k, &p, 40.0).unwrap();
        assert!((a[1].norm_sqr() - a[0].norm_sqr() - z).abs() < 1e-15);
    }

    #[test]
    fn conserving_rejects_flip_kind() {
        let p = params(1.0, 1.0, 1.0);
        assert!(conserving_constants([c(1.0), c(0.0)], PairKind::FlipC, &p, 0.0).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_async_conserving(1.0, 1.0, 1e-9).kind, AsyncConservingKind::Ccpc);
        assert_eq!(classify_async_conserving(1.0, 1.0, 1e-9).sign, Some(1));
        assert_eq!(classify_async_conserving(2.0, 1.0, 1e-9).sign, Some(-1));
        assert_eq!(classify_async_conserving(1.0, 2.0, 1e-9).kind, AsyncConservingKind::Ccpi);
        assert_eq!(classify_async_conserving(1.0, 2.0, 1e-9).sign, Some(1));
        assert_eq!(classify_async_conserving(1.0, 3.0, 1e-9).kind, AsyncConservingKind::Neither);
    }

    #[test]
    fn flip_constraint_examples() {
        assert!(check_flip_constraint(0.21_f64.sqrt(), 0.5, 0.4).abs() < 1e-15);
        assert_eq!(check_flip_constraint(0.0, 0.3, 0.6), 0.0);
        assert_eq!(check_flip_constraint(1.0, 1.0, 1.0), 0.25);
    }

    #[test]
    fn flip_constants_basis_start() {
        let p = params(0.21_f64.sqrt(), 0.5, 0.4);
        let k = flip_constants([c(0.0), c(1.0)], PairKind::FlipC, &p, 0.0).unwrap();
        assert!((k.plus - c(0.5)).norm() < 1e-15);
        assert!((k.minus - c(0.5)).norm() < 1e-15);
        let (_, hi) = flip_asymptotic_populations(&k);
        assert!((hi[1] - 0.5).abs() < 1e-15);
        let a = evolve_async_flip(&k, &p, 0.0).unwrap();
        assert!((a[1].norm() - 1.0).abs() < 1e-15 && a[0].norm() < 1e-15);
    }

    #[test]
    fn flip_round_trip_and_bounded_far_out() {
        let p = params(0.21_f64.sqrt(), 0.5, 0.4);
        let pair = [Complex::new(0.2, -0.1), Complex::new(0.6, 0.3)];
        for kind in [PairKind::FlipC, PairKind::FlipD] {
            let k = flip_constants(pair, kind, &p, -62.5).unwrap();
            let back = evolve_async_flip(&k, &p, -62.5).unwrap();
            assert!((back[0] - pair[0]).norm() < 1e-12 && (back[1] - pair[1]).norm() < 1e-12);
            let n0 = pair[0].norm_sqr() + pair[1].norm_sqr();
            for t in [-1e4, -10.0, 0.0, 3.0, 1e4] {
                let a = evolve_async_flip(&k, &p, t).unwrap();
                assert!((a[0].norm_sqr() + a[1].norm_sqr() - n0).abs() < 1e-9, "t={t}");
            }
        }
    }

    #[test]
    fn flip_rejects_off_surface() {
        let p = params(1.0, 1.0, 1.0);
        let r = flip_constants([c(1.0), c(0.0)], PairKind::FlipC, &p, 0.0);
        assert!(matches!(r, Err(Error::BranchViolation(ref m)) if m.contains("residual")));
        let k = AsyncBranchConstants {
            kind: PairKind::FlipC,
            plus: c(0.5),
            minus: c(0.5),
            t_ref: 0.0,
        };
        assert!(evolve_async_flip(&k, &p, 1.0).is_err());
    }

    #[test]
    fn solution_gating() {
        let start = AmplitudeVector::basis(3);
        let proto = ModulationProtocol::async_tanh_sech(1.0, 1.0, 1.0).unwrap();
        let g = SoCoupling::new(0.3).unwrap();
        assert!(matches!(
            AsyncSolution::new(&g, &proto, &start, -25.0),
            Err(Error::BranchViolation(_))
        ));
        let g = SoCoupling::new(1.0).unwrap();
        let s = AsyncSolution::new(&g, &proto, &start, -25.0).unwrap();
        assert_eq!(s.branch, AsyncBranch::Conserving { sign: -1.0 });
        assert_eq!(s.params.upsilon, -1.0);
        let sync = ModulationProtocol::sync_sech2(0.0, 1.0, 1.0).unwrap();
        assert!(AsyncSolution::new(&g, &sync, &start, 0.0).is_err());
    }
}
