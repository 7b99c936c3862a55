use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;
use sodw::{imbalance, Observable, Snapshot, Trajectory};

use crate::format::g17;

pub const BASE_COLUMNS: [&str; 9] = ["t", "P1", "P2", "P3", "P4", "Z31", "Z32", "ZLR", "norm2"];

/// Imbalance column name, e.g. `Z41` or `ZLR`.
pub fn imbalance_column(s: Observable, q: Observable) -> String {
    format!("Z{s}{q}")
}

fn imbalance_value(snap: &Snapshot, pair: (Observable, Observable)) -> f64 {
    imbalance(snap, pair.0, pair.1).expect("distinct observables")
}

/// Trajectory table: the base columns from `primary`, any `extra`
/// imbalances, then `P1_num..P4_num`, `Z31_num`, `Z32_num`, `ZLR_num` and
/// `<extra>_num` from `overlay`.
pub fn trajectory_csv(primary: &Trajectory, overlay: Option<&Trajectory>, extra: &[(Observable, Observable)]) -> String {
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(extra.iter().map(|&(s, q)| imbalance_column(s, q)));
    if overlay.is_some() {
        header.extend((1..=4).map(|m| format!("P{m}_num")));
        header.extend(["Z31_num", "Z32_num", "ZLR_num"].map(String::from));
        header.extend(extra.iter().map(|&(s, q)| format!("{}_num", imbalance_column(s, q))));
    }
    let mut out = header.join(",");
    out.push('\n');
    let l = |k| Observable::Level(k);
    for (i, snap) in primary.snapshots.iter().enumerate() {
        let mut row = vec![snap.t, snap.p[0], snap.p[1], snap.p[2], snap.p[3]];
        row.push(imbalance_value(snap, (l(3), l(1))));
        row.push(imbalance_value(snap, (l(3), l(2))));
        row.push(imbalance_value(snap, (Observable::Left, Observable::Right)));
        row.push(snap.norm2);
        row.extend(extra.iter().map(|&pair| imbalance_value(snap, pair)));
        if let Some(o) = overlay {
            let num = &o.snapshots[i];
            row.extend(num.p);
            row.push(imbalance_value(num, (l(3), l(1))));
            row.push(imbalance_value(num, (l(3), l(2))));
            row.push(imbalance_value(num, (Observable::Left, Observable::Right)));
            row.extend(extra.iter().map(|&pair| imbalance_value(num, pair)));
        }
        let cells: Vec<String> = row.into_iter().map(g17).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Largest amplitude distance between two runs sampled on the same grid.
pub fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}

pub struct Series {
    pub name: String,
    pub file: String,
    pub column: String,
}

pub fn plot_json(title: &str, x: (&str, &str), y_label: &str, series: &[Series]) -> String {
    let series: Vec<_> = series
        .iter()
        .map(|s| json!({ "name": s.name, "file": s.file, "column": s.column }))
        .collect();
    let doc = json!({
        "title": title,
        "x": { "label": x.0, "column": x.1 },
        "y": { "label": y_label },
        "series": series,
    });
    serde_json::to_string_pretty(&doc).expect("plain JSON values") + "\n"
}

/// `key = value` sidecar describing a run.
#[derive(Default)]
pub struct Meta {
    text: String,
}

impl Meta {
    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        writeln!(self.text, "{key} = {value}").expect("write to string");
        self
    }

    pub fn extend(&mut self, pairs: &[(String, String)]) -> &mut Self {
        for (k, v) in pairs {
            self.push(k, v);
        }
        self
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}
