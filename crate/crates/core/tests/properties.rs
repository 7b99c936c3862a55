//! Solver-level properties: population control conditions, asymptotic
//! formulas and scan consistency.

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use sodw::analysis::{run_scan, EngineChoice, ScanParameter, ScanSpec};
use sodw::asynchronous::{conserving_imbalance, flip_asymptotic_populations, phase_integrals};
use sodw::figures::{figure, FigureId, FigureSpec};
use sodw::{
    classify_sync_condition, default_horizon, AmplitudeVector, AsyncSolution, Complex, Epoch,
    ExactSolution, ModulationProtocol, Observable, SoCoupling, SyncCondition,
};

fn state() -> impl Strategy<Value = AmplitudeVector<f64>> {
    prop::array::uniform8(-1.0..1.0f64)
        .prop_filter("non-degenerate", |x| x.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|x| {
            AmplitudeVector::new(
                Complex::new(x[0], x[1]),
                Complex::new(x[2], x[3]),
                Complex::new(x[4], x[5]),
                Complex::new(x[6], x[7]),
            )
            .normalized()
            .unwrap()
        })
}

fn endpoints(sol: &ExactSolution<f64>, t: f64) -> ([f64; 4], [f64; 4]) {
    let p = |s: f64| sol.amplitudes(s).0.map(|a| a.norm_sqr());
    (p(-t), p(t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sync_ccpc_restores_every_population(n in 1u32..4, gamma in 0.0..2.0f64, omega in 0.5..2.0f64, a in state()) {
        let v = n as f64 * PI * omega / 2.0;
        prop_assert_eq!(classify_sync_condition(0.0, v, omega, 1e-9), SyncCondition::Ccpc(n));
        let p = ModulationProtocol::sync_sech2(0.0, v, omega).unwrap();
        let t = default_horizon(&p);
        let sol = ExactSolution::new(&SoCoupling::new(gamma).unwrap(), &p, &a, Epoch::MinusInfinity, t).unwrap();
        let (lo, hi) = endpoints(&sol, t);
        for m in 0..4 {
            prop_assert!((lo[m] - hi[m]).abs() < 1e-6);
        }
    }

    #[test]
    fn sync_ccpi_inverts_well_imbalance(n in 0u32..3, gamma in 0.0..2.0f64, omega in 0.5..2.0f64, a in state()) {
        let v = (n as f64 + 0.5) * PI * omega / 2.0;
        prop_assert_eq!(classify_sync_condition(0.0, v, omega, 1e-9), SyncCondition::Ccpi(n));
        let p = ModulationProtocol::sync_sech2(0.0, v, omega).unwrap();
        let t = default_horizon(&p);
        let sol = ExactSolution::new(&SoCoupling::new(gamma).unwrap(), &p, &a, Epoch::MinusInfinity, t).unwrap();
        let (lo, hi) = endpoints(&sol, t);
        let zlr = |p: [f64; 4]| p[2] + p[3] - p[0] - p[1];
        prop_assert!((zlr(lo) + zlr(hi)).abs() < 1e-6);
    }

    #[test]
    fn async_conserving_controls(k in 1u32..4, inverted in any::<bool>(), chi in 0.2..2.0f64, eps in -2.0..2.0f64, a in state()) {
        let ratio = k as f64 - if inverted { 0.5 } else { 0.0 };
        let p = ModulationProtocol::async_tanh_sech(eps, ratio * chi, chi).unwrap();
        let t = default_horizon(&p);
        let sol = ExactSolution::new(&SoCoupling::new(0.0).unwrap(), &p, &a, Epoch::MinusInfinity, t).unwrap();
        let (lo, hi) = endpoints(&sol, t);
        let z31 = |p: [f64; 4]| p[2] - p[0];
        if inverted {
            prop_assert!((z31(lo) + z31(hi)).abs() < 1e-6);
        } else {
            prop_assert!((z31(lo) - z31(hi)).abs() < 1e-6);
        }
    }

    #[test]
    fn conserving_imbalance_formula(eps in -2.0..2.0f64, ups in 0.0..2.0f64, chi in 0.2..2.0f64, a in state(), t in -20.0..20.0f64) {
        let p = ModulationProtocol::async_tanh_sech(eps, ups, chi).unwrap();
        let sol = AsyncSolution::new(&SoCoupling::new(0.0).unwrap(), &p, &a, -5.0).unwrap();
        let phi = phase_integrals(eps, ups, chi, t).phi_u;
        let direct = sol.amplitudes(t).0.map(|x| x.norm_sqr());
        prop_assert!((conserving_imbalance(&sol.pairs[0], phi) - (direct[2] - direct[0])).abs() < 1e-9);
    }

    #[test]
    fn flip_asymptotics_both_pairs(eps in -1.5..1.5f64, chi in 0.2..2.0f64, a in state()) {
        let ups = (chi * chi / 4.0 + eps * eps).sqrt();
        let p = ModulationProtocol::async_tanh_sech(eps, ups, chi).unwrap();
        let t = default_horizon(&p);
        let sol = AsyncSolution::new(&SoCoupling::new(0.5).unwrap(), &p, &a, -t).unwrap();
        let [c, d] = sol.pairs;
        let hi = sol.amplitudes(t).0.map(|x| x.norm_sqr());
        prop_assert!((hi[3] - 2.0 * c.plus.norm_sqr()).abs() < 1e-6);
        prop_assert!((hi[0] - 2.0 * c.minus.norm_sqr()).abs() < 1e-6);
        prop_assert!((hi[1] - 2.0 * d.plus.norm_sqr()).abs() < 1e-6);
        prop_assert!((hi[2] - 2.0 * d.minus.norm_sqr()).abs() < 1e-6);
        let (_, lim) = flip_asymptotic_populations(&d);
        prop_assert!((lim[0] - hi[1]).abs() < 1e-6 && (lim[1] - hi[2]).abs() < 1e-6);
    }
}

#[test]
fn gamma_scan_obeys_sum_rule() {
    let FigureSpec::Scan { spec, .. } = figure(FigureId::F1c) else { panic!() };
    let res = run_scan(&spec).unwrap();
    assert_eq!(res.rows.len(), spec.grid.len());
    for row in &res.rows {
        assert!(row.error.is_none());
        assert!((row.values[0] + row.values[1] + 1.0).abs() < 1e-6, "{row:?}");
        assert!(row.values.iter().all(|z| z.abs() <= 1.0 + 1e-9));
    }
}

#[test]
fn scan_engines_agree() {
    let base = ScanSpec {
        parameter: ScanParameter::Beta,
        grid: vec![-1.5, -0.5, 0.0, 0.5, 1.0, 2.0],
        protocol: ModulationProtocol::sync_sech2(0.0, FRAC_PI_2, 1.0).unwrap(),
        gamma: 0.5,
        initial: AmplitudeVector::basis(3),
        epoch: Epoch::At(0.0),
        observables: vec![
            (Observable::Level(3), Observable::Level(1)),
            (Observable::Left, Observable::Right),
        ],
        engine: EngineChoice::Auto,
        horizon: None,
    };
    let exact = run_scan(&base).unwrap();
    let oracle = run_scan(&ScanSpec { engine: EngineChoice::Oracle, ..base }).unwrap();
    for (e, o) in exact.rows.iter().zip(&oracle.rows) {
        assert_eq!(e.param, o.param);
        assert_eq!(e.engine.to_string(), "sync-exact");
        assert_eq!(o.engine.to_string(), "oracle");
        for (x, y) in e.values.iter().zip(&o.values) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn all_figures_have_settings() {
    for id in FigureId::ALL {
        match figure(id) {
            FigureSpec::Trajectory(f) => {
                assert!(!f.initial_conditions.is_empty());
                f.coupling().unwrap();
            }
            FigureSpec::Scan { spec, .. } => spec.validate().unwrap(),
            FigureSpec::Surface { surface, .. } => assert!(!surface.rows().is_empty()),
        }
    }
}
