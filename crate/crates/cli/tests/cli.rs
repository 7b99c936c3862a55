use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sodw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sodw"))
        .args(args)
        .env_remove("SODW_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Column values of a CSV file keyed by header name.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn figure_1d_final_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = sodw(&["figure", "--id", "1d", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("1d_data.csv"));
    assert_eq!(
        header[..13].join(","),
        "t,P1,P2,P3,P4,Z31,Z32,ZLR,norm2,P1_num,P2_num,P3_num,P4_num"
    );
    assert_eq!(rows.len(), 2001);
    let z32 = column(&header, &rows, "Z32");
    let z31 = column(&header, &rows, "Z31");
    assert!((z32.last().unwrap() + 0.5456).abs() < 2e-3);
    assert!((z31.last().unwrap() - 0.2272).abs() < 2e-3);
    let meta = fs::read_to_string(dir.path().join("1d_meta.txt")).unwrap();
    assert!(meta.contains("ic1.engine = sync-exact"));
    let plot: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("1d_plot.json")).unwrap()).unwrap();
    assert_eq!(plot["x"]["column"], "t");
    assert!(plot["series"].as_array().unwrap().len() >= 2);
}

#[test]
fn figure_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(sodw(&["figure", "--id", "3a", "--out", d.path().to_str().unwrap(), "--samples", "401"]).status.success());
    }
    for k in 1..=5 {
        let name = format!("3a_data_ic{k}.csv");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn multi_ic_figures_have_inverted_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    for (id, col) in [("2b", "ZLR"), ("3d", "Z41")] {
        let out = sodw(&["figure", "--id", id, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
        for k in 1..=5 {
            let (header, rows) = read_csv(&dir.path().join(format!("{id}_data_ic{k}.csv")));
            for c in [col.to_string(), format!("{col}_num")] {
                let z = column(&header, &rows, &c);
                assert!((z[0] + z[z.len() - 1]).abs() < 1e-6, "{id} ic{k} {c}");
            }
        }
    }
}

#[test]
fn scan_and_surface_figures() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sodw(&["figure", "--id", "1c", "--out", dir.path().to_str().unwrap()]).status.success());
    let (header, rows) = read_csv(&dir.path().join("1c_data.csv"));
    assert_eq!(header.join(","), "param,Z31_inf,Z32_inf,engine");
    let (z31, z32) = (column(&header, &rows, "Z31_inf"), column(&header, &rows, "Z32_inf"));
    for (a, b) in z31.iter().zip(&z32) {
        assert!((a + b + 1.0).abs() < 1e-6);
    }
    assert!(rows.iter().all(|r| r[3] == "sync-exact"));

    assert!(sodw(&["figure", "--id", "3c", "--out", dir.path().to_str().unwrap()]).status.success());
    let (header, rows) = read_csv(&dir.path().join("3c_data.csv"));
    assert_eq!(header.join(","), "chi,epsilon,upsilon");
    assert_eq!(rows.len(), 41 * 41);
}

#[test]
fn unknown_figure_is_rejected() {
    let out = sodw(&["figure", "--id", "4a", "--out", "."]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown figure"));
}

#[test]
fn default_output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sodw"))
        .args(["figure", "--id", "1e", "--samples", "11"])
        .env("SODW_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("1e_data.csv").exists());
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn evolve_both_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "name = both\nprotocol = sync\nbeta = 0.3\nV = 1.2\nOmega = 0.8\ngamma = 0.37\na1 = sqrt(0.5)\na4 = 0, sqrt(0.5)\nsamples = 301\n",
    );
    let d = dir.path().to_str().unwrap();
    let out = sodw(&["evolve", "--config", &cfg, "--engine", "both", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = fs::read_to_string(dir.path().join("both_meta.txt")).unwrap();
    let dev: f64 = meta
        .lines()
        .find_map(|l| l.strip_prefix("max_deviation = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-6, "{dev}");
    let (header, _) = read_csv(&dir.path().join("both_data.csv"));
    assert!(header.contains(&"P4_num".to_string()));
}

#[test]
fn evolve_exact_refuses_off_surface() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flip.cfg", "protocol = async\nepsilon = 0.3\nupsilon = 0.5\nchi = 0.4\ngamma = 0.5\n");
    let out = sodw(&["evolve", "--config", &cfg, "--engine", "exact", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("residual"), "{err}");

    let out = sodw(&["evolve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let meta = fs::read_to_string(dir.path().join("evolve_meta.txt")).unwrap();
    assert!(meta.contains("fallback_reason"));
}

#[test]
fn evolve_without_tunneling_is_static() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.cfg", "protocol = async\nepsilon = 1\nupsilon = 0\nchi = 1\ngamma = 0.3\na2 = 0.6\na3 = 0.8\n");
    let out = sodw(&["evolve", "--config", &cfg, "--engine", "oracle", "--out", dir.path().to_str().unwrap(), "--set", "samples=51"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("evolve_data.csv"));
    assert_eq!(rows.len(), 51);
    for (name, want) in [("P1", 0.0), ("P2", 0.36), ("P3", 0.64), ("P4", 0.0)] {
        for v in column(&header, &rows, name) {
            assert!((v - want).abs() < 1e-9, "{name} {v}");
        }
    }
}

#[test]
fn evolve_rejects_unnormalized_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "protocol = sync\nV = 1\na1 = 0.5\na2 = 0.5\n");
    let out = sodw(&["evolve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("norm"));
}

#[test]
fn scan_command_writes_rows_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scan.cfg",
        "name = vscan\nprotocol = sync\nV = 1\ngamma = 1\nepoch = 0\nparam = V_over_Omega\ngrid = pi/2, 3*pi/2, 5*pi/2\nobservables = 31, LR\n",
    );
    let out = sodw(&["scan", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("vscan_data.csv"));
    assert_eq!(header.join(","), "param,Z31_inf,ZLR_inf,engine");
    let params = column(&header, &rows, "param");
    assert!(params.windows(2).all(|w| w[0] < w[1]));
    for z in column(&header, &rows, "Z31_inf") {
        assert!((z + 1.0).abs() < 1e-9);
    }
}

#[test]
fn classify_examples() {
    let out = stdout(&sodw(&["classify", "--beta", "0", "--v", "pi/2", "--omega", "1"]));
    assert!(out.starts_with("CCPC n=1"), "{out}");
    let out = stdout(&sodw(&["classify", "--upsilon", "1", "--chi", "2"]));
    assert!(out.starts_with("CCPI (async, spin-conserving)"), "{out}");
    let out = stdout(&sodw(&["classify", "--epsilon", "sqrt(0.21)", "--upsilon", "0.5", "--chi", "0.4"]));
    assert!(out.contains("flip-constraint satisfied, residual 0"), "{out}");
}

#[test]
fn verify_single_criterion() {
    let out = sodw(&["verify", "--only", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("[PASS]"));
    assert!(text.contains("1/1 criteria passed"));
}

#[test]
fn figure_all_writes_every_figure() {
    let dir = tempfile::tempdir().unwrap();
    let out = sodw(&["figure", "--id", "all", "--samples", "101", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for id in ["1a", "1b", "1c", "1d", "1e", "1f", "2a", "2b", "2c", "3a", "3b", "3c", "3d"] {
        assert!(dir.path().join(format!("{id}_meta.txt")).exists(), "missing {id}");
        assert!(dir.path().join(format!("{id}_plot.json")).exists(), "missing {id}");
    }
}
