use std::path::Path;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use sodw::acceptance::{run_criterion, CriterionReport, CRITERIA};
use sodw::analysis::{run_scan, ScanSpec};
use sodw::asynchronous::check_flip_constraint;
use sodw::figures::{figure, FigureId, FigureRun, FigureSpec, TrajectoryFigure};
use sodw::{
    classify_async_conserving, classify_sync_condition, integrate, uniform_grid, AsyncConservingKind,
    Epoch, ExactSolution, Observable, ScanResult, SoCoupling, SyncCondition, Trajectory,
};

use crate::config::{scan_settings, Config, EngineMode, RunSettings};
use crate::format::g17;
use crate::output::{self, imbalance_column, max_deviation, plot_json, Meta, Series, BASE_COLUMNS};

/// Imbalance columns that a plot needs beyond the base set, e.g. `Z41`.
fn extra_imbalances(columns: &[&str]) -> Result<Vec<(Observable, Observable)>> {
    columns
        .iter()
        .filter(|c| !BASE_COLUMNS.contains(c))
        .map(|c| {
            let pair = c.strip_prefix('Z').ok_or_else(|| anyhow!("unsupported column {c}"))?;
            let mut it = pair.chars().map(|ch| ch.to_string().parse::<Observable>());
            match (it.next(), it.next(), it.next()) {
                (Some(s), Some(q), None) => Ok((s?, q?)),
                _ => bail!("unsupported column {c}"),
            }
        })
        .collect()
}

fn epoch_text(epoch: Epoch<f64>) -> String {
    match epoch {
        Epoch::At(t) => g17(t),
        Epoch::MinusInfinity => "-inf".into(),
    }
}

fn amplitudes_text(a: &sodw::Amplitudes) -> String {
    a.0.iter()
        .map(|z| format!("({}, {})", g17(z.re), g17(z.im)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn figure_cmd(id: &str, out: &Path, samples: usize) -> Result<Vec<std::path::PathBuf>> {
    if id.eq_ignore_ascii_case("all") {
        let mut files = Vec::new();
        for id in FigureId::ALL {
            files.extend(figure_cmd(id.as_str(), out, samples)?);
        }
        return Ok(files);
    }
    let id: FigureId = id.parse()?;
    output::prepare_dir(out)?;
    match figure(id) {
        FigureSpec::Trajectory(fig) => trajectory_figure(&fig, out, samples),
        FigureSpec::Scan { id, title, spec } => {
            let res = run_scan(&spec)?;
            let mut meta = Meta::default();
            meta.push("figure", id).push("title", title).push("gamma", g17(spec.gamma));
            meta.push("protocol", spec.protocol.label());
            scan_outputs(&id.to_string(), title, &spec, &res, out, meta)
        }
        FigureSpec::Surface { id, title, surface } => {
            let mut csv = String::from("chi,epsilon,upsilon\n");
            for r in surface.rows() {
                csv.push_str(&format!("{},{},{}\n", g17(r[0]), g17(r[1]), g17(r[2])));
            }
            let data = format!("{id}_data.csv");
            let mut meta = Meta::default();
            meta.push("figure", id)
                .push("title", title)
                .push("relation", "upsilon = sqrt(chi^2/4 + epsilon^2)")
                .push("chi_range", format!("[{}, {}] x {}", g17(surface.chi[0]), g17(*surface.chi.last().unwrap()), surface.chi.len()))
                .push("epsilon_range", format!("[{}, {}] x {}", g17(surface.epsilon[0]), g17(*surface.epsilon.last().unwrap()), surface.epsilon.len()))
                .push("engine", "closed-form");
            let plot = plot_json(
                title,
                ("chi", "chi"),
                "upsilon",
                &[Series { name: "upsilon(chi, epsilon)".into(), file: data.clone(), column: "upsilon".into() }],
            );
            Ok(vec![
                output::write(out, &data, &csv)?,
                output::write(out, &format!("{id}_plot.json"), &plot)?,
                output::write(out, &format!("{id}_meta.txt"), &meta.into_string())?,
            ])
        }
    }
}

fn trajectory_figure(fig: &TrajectoryFigure, out: &Path, samples: usize) -> Result<Vec<std::path::PathBuf>> {
    let id = fig.id;
    let runs: Vec<FigureRun> = fig
        .initial_conditions
        .par_iter()
        .map(|ic| fig.run(ic, samples))
        .collect::<sodw::Result<_>>()?;
    let extra = extra_imbalances(&fig.plotted)?;
    let multi = runs.len() > 1;
    let mut files = Vec::new();
    let mut series = Vec::new();
    let mut meta = Meta::default();
    meta.push("figure", id)
        .push("title", fig.title)
        .push("gamma", g17(fig.gamma))
        .push("protocol", fig.protocol.label())
        .push("epoch", epoch_text(fig.epoch))
        .push("horizon", g17(fig.horizon()))
        .push("samples", samples);
    for (k, run) in runs.iter().enumerate() {
        let name = if multi {
            format!("{id}_data_ic{}.csv", k + 1)
        } else {
            format!("{id}_data.csv")
        };
        let csv = output::trajectory_csv(&run.exact_traj, Some(&run.oracle), &extra);
        files.push(output::write(out, &name, &csv)?);
        let tag = if multi { format!(" [ic{}: {}]", k + 1, run.label) } else { String::new() };
        for col in &fig.plotted {
            series.push(Series { name: format!("{col} exact{tag}"), file: name.clone(), column: col.to_string() });
            series.push(Series { name: format!("{col} numerical{tag}"), file: name.clone(), column: format!("{col}_num") });
        }
        let p = format!("ic{}", k + 1);
        let (lo, hi) = run.exact.asymptotic_populations();
        meta.push(&format!("{p}.label"), &run.label)
            .push(&format!("{p}.file"), &name)
            .push(&format!("{p}.initial"), amplitudes_text(&fig.initial_conditions[k].state))
            .push(&format!("{p}.engine"), &run.exact_traj.solver_id)
            .push(&format!("{p}.oracle"), &run.oracle.solver_id)
            .push(&format!("{p}.max_deviation"), g17(max_deviation(&run.exact_traj, &run.oracle)))
            .push(&format!("{p}.oracle_norm_drift"), g17(run.oracle.norm_drift_max))
            .push(&format!("{p}.P_minus_inf"), lo.map(g17).join(" "))
            .push(&format!("{p}.P_plus_inf"), hi.map(g17).join(" "));
    }
    let y_label = if fig.plotted.iter().all(|c| c.starts_with('P')) { "P_m(t)" } else { "population imbalance" };
    let plot = plot_json(fig.title, ("t", "t"), y_label, &series);
    files.push(output::write(out, &format!("{id}_plot.json"), &plot)?);
    files.push(output::write(out, &format!("{id}_meta.txt"), &meta.into_string())?);
    Ok(files)
}

fn scan_outputs(
    name: &str,
    title: &str,
    spec: &ScanSpec<f64>,
    res: &ScanResult<f64>,
    out: &Path,
    mut meta: Meta,
) -> Result<Vec<std::path::PathBuf>> {
    let cols: Vec<String> = spec
        .observables
        .iter()
        .map(|&(s, q)| format!("{}_inf", imbalance_column(s, q)))
        .collect();
    let mut csv = format!("param,{},engine\n", cols.join(","));
    let mut failures = 0;
    for row in &res.rows {
        let values: Vec<String> = match &row.error {
            None => row.values.iter().map(|v| g17(*v)).collect(),
            Some(e) => {
                failures += 1;
                meta.push(&format!("error[{}]", g17(row.param)), e);
                vec!["nan".to_string(); cols.len()]
            }
        };
        let engine = if row.error.is_some() { "failed".to_string() } else { row.engine.to_string() };
        csv.push_str(&format!("{},{},{}\n", g17(row.param), values.join(","), engine));
    }
    let data = format!("{name}_data.csv");
    meta.push("parameter", spec.parameter)
        .push("grid", format!("[{}, {}] x {}", g17(spec.grid[0]), g17(*spec.grid.last().unwrap()), spec.grid.len()))
        .push("initial", amplitudes_text(&spec.initial))
        .push("epoch", epoch_text(spec.epoch))
        .push("engine_policy", format!("{:?}", spec.engine))
        .push("failed_points", failures);
    let mut engines: Vec<String> = res.rows.iter().map(|r| r.engine.to_string()).collect();
    engines.sort();
    engines.dedup();
    meta.push("engines", engines.join(" "));
    let series: Vec<Series> = cols
        .iter()
        .map(|c| Series { name: c.clone(), file: data.clone(), column: c.clone() })
        .collect();
    let plot = plot_json(title, (&spec.parameter.to_string(), "param"), "asymptotic imbalance", &series);
    Ok(vec![
        output::write(out, &data, &csv)?,
        output::write(out, &format!("{name}_plot.json"), &plot)?,
        output::write(out, &format!("{name}_meta.txt"), &meta.into_string())?,
    ])
}

fn oracle_run(s: &RunSettings, coupling: &SoCoupling<f64>, grid: &[f64]) -> Result<Trajectory> {
    let cfg = s.integrator(s.start_time(), s.horizon);
    Ok(integrate(coupling, &s.protocol, &s.initial, &cfg, grid)?)
}

pub fn evolve_cmd(s: &RunSettings, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    output::prepare_dir(out)?;
    let coupling = SoCoupling::new(s.gamma)?;
    let grid = uniform_grid(s.start_time(), s.horizon, s.samples);
    let exact = || {
        ExactSolution::new(&coupling, &s.protocol, &s.initial, s.epoch, s.horizon)
            .map(|e| e.trajectory(&s.protocol, &grid))
    };
    let mut meta = Meta::default();
    meta.extend(&s.describe());
    let (primary, overlay) = match s.engine {
        EngineMode::Exact => (
            exact()?,
            None,
        ),
        EngineMode::Oracle => (oracle_run(s, &coupling, &grid)?, None),
        EngineMode::Both => {
            let e = exact()?;
            let o = oracle_run(s, &coupling, &grid)?;
            (e, Some(o))
        }
        EngineMode::Auto => match exact() {
            Ok(e) => (e, None),
            Err(reason) => {
                meta.push("fallback_reason", reason);
                (oracle_run(s, &coupling, &grid)?, None)
            }
        },
    };
    meta.push("solver", &primary.solver_id);
    if let Some(o) = &overlay {
        meta.push("oracle", &o.solver_id);
        meta.push("max_deviation", g17(max_deviation(&primary, o)));
        meta.push("oracle_norm_drift", g17(o.norm_drift_max));
    }
    meta.push("norm_drift", g17(primary.norm_drift_max));
    let last = primary.snapshots.last().expect("at least two samples");
    meta.push("P_final", last.p.map(g17).join(" "));

    let data = format!("{}_data.csv", s.name);
    let csv = output::trajectory_csv(&primary, overlay.as_ref(), &[]);
    let mut series: Vec<Series> = ["Z31", "Z32", "ZLR"]
        .iter()
        .map(|c| Series { name: c.to_string(), file: data.clone(), column: c.to_string() })
        .collect();
    if overlay.is_some() {
        series.extend(["Z31", "Z32", "ZLR"].iter().map(|c| Series {
            name: format!("{c} numerical"),
            file: data.clone(),
            column: format!("{c}_num"),
        }));
    }
    let plot = plot_json(&s.protocol.label(), ("t", "t"), "population imbalance", &series);
    Ok(vec![
        output::write(out, &data, &csv)?,
        output::write(out, &format!("{}_plot.json", s.name), &plot)?,
        output::write(out, &format!("{}_meta.txt", s.name), &meta.into_string())?,
    ])
}

pub fn scan_cmd(cfg: &Config, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    output::prepare_dir(out)?;
    let s = scan_settings(cfg)?;
    let spec = ScanSpec {
        parameter: s.parameter,
        grid: s.grid.clone(),
        protocol: s.run.protocol.clone(),
        gamma: s.run.gamma,
        initial: s.run.initial,
        epoch: s.run.epoch,
        observables: s.observables.clone(),
        engine: s.choice,
        horizon: Some(s.run.horizon),
    };
    let res = run_scan(&spec)?;
    let mut meta = Meta::default();
    meta.extend(&s.run.describe());
    for key in ["param", "from", "to", "points", "grid", "observables"] {
        if let Some(v) = cfg.get(key) {
            meta.push(key, v);
        }
    }
    let title = format!("asymptotic imbalances vs {}", s.parameter);
    scan_outputs(&s.run.name, &title, &spec, &res, out, meta)
}

/// Parameters accepted by `classify`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClassifyArgs {
    pub beta: Option<f64>,
    pub v: Option<f64>,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub upsilon: Option<f64>,
    pub chi: Option<f64>,
    pub gamma: Option<f64>,
    pub tol: f64,
}

fn residual_text(r: f64) -> String {
    if r.abs() < 1e-15 {
        "0".into()
    } else {
        format!("{r:.3e}")
    }
}

pub fn classify_report(a: &ClassifyArgs) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let pi = std::f64::consts::PI;
    if let Some(v) = a.v {
        let beta = a.beta.unwrap_or(0.0);
        let omega = a.omega.unwrap_or(1.0);
        let x = 2.0 * v / omega / pi;
        let line = match classify_sync_condition(beta, v, omega, a.tol) {
            SyncCondition::Ccpc(n) => format!("CCPC n={n} (synchronous, 2V/Omega = n pi, residual {})", residual_text((x - n as f64) * pi)),
            SyncCondition::Ccpi(n) => format!(
                "CCPI n={n} (synchronous, 2V/Omega = (n+1/2) pi, residual {})",
                residual_text((x - n as f64 - 0.5) * pi)
            ),
            SyncCondition::Neither if beta.abs() > a.tol => {
                format!("neither (synchronous): beta = {beta} must vanish for CCPC/CCPI")
            }
            SyncCondition::Neither => format!("neither (synchronous): 2V/Omega = {} pi", g17(x)),
        };
        lines.push(line);
    }
    if let (Some(ups), Some(chi)) = (a.upsilon, a.chi) {
        let c = classify_async_conserving(ups, chi, a.tol);
        let sign = c.sign.map(|s| format!(", sign {s:+}")).unwrap_or_default();
        lines.push(match c.kind {
            AsyncConservingKind::Ccpc => format!("CCPC (async, spin-conserving), upsilon/chi = {}{sign}", g17(ups / chi)),
            AsyncConservingKind::Ccpi => format!("CCPI (async, spin-conserving), upsilon/chi = {}{sign}", g17(ups / chi)),
            AsyncConservingKind::Neither => {
                format!("neither (async, spin-conserving): upsilon/chi = {}", g17(ups / chi))
            }
        });
        let eps = a.epsilon.unwrap_or(0.0);
        let r = check_flip_constraint(eps, ups, chi);
        if r.abs() <= a.tol {
            lines.push(format!("flip-constraint satisfied, residual {}", residual_text(r)));
        } else {
            lines.push(format!("flip-constraint violated, residual {}", residual_text(r)));
        }
    }
    if let Some(g) = a.gamma {
        let c = SoCoupling::new(g)?;
        let kind = if c.is_spin_conserving() {
            "spin-conserving tunneling only"
        } else if c.flipping_sign().is_some() {
            "spin-flipping tunneling only"
        } else {
            "mixed spin-conserving and spin-flipping tunneling"
        };
        lines.push(format!("gamma = {}: {kind}", g17(g)));
    }
    if lines.is_empty() {
        bail!("nothing to classify; pass --v [--beta --omega] and/or --upsilon --chi [--epsilon] and/or --gamma");
    }
    Ok(lines)
}

pub fn verify_cmd(only: &[u8]) -> Result<Vec<CriterionReport>> {
    let ids: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|(i, _)| *i).collect()
    } else {
        only.to_vec()
    };
    ids.iter()
        .map(|&i| run_criterion(i).ok_or_else(|| anyhow!("no acceptance criterion {i}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extra_columns() {
        assert!(extra_imbalances(&["Z31", "P1", "ZLR"]).unwrap().is_empty());
        assert_eq!(
            extra_imbalances(&["Z41"]).unwrap(),
            vec![(Observable::Level(4), Observable::Level(1))]
        );
        assert!(extra_imbalances(&["Q"]).is_err());
    }

    #[test]
    fn classify_examples() {
        let pi = std::f64::consts::PI;
        let sync = classify_report(&ClassifyArgs { beta: Some(0.0), v: Some(pi / 2.0), omega: Some(1.0), tol: 1e-9, ..Default::default() }).unwrap();
        assert!(sync[0].starts_with("CCPC n=1"), "{sync:?}");
        let asy = classify_report(&ClassifyArgs { upsilon: Some(1.0), chi: Some(2.0), tol: 1e-9, ..Default::default() }).unwrap();
        assert!(asy[0].starts_with("CCPI (async, spin-conserving)"), "{asy:?}");
        let flip = classify_report(&ClassifyArgs {
            epsilon: Some(0.21f64.sqrt()),
            upsilon: Some(0.5),
            chi: Some(0.4),
            tol: 1e-9,
            ..Default::default()
        })
        .unwrap();
        assert!(flip.contains(&"flip-constraint satisfied, residual 0".to_string()), "{flip:?}");
        assert!(classify_report(&ClassifyArgs { tol: 1e-9, ..Default::default() }).is_err());
    }
}
