//! File outputs. Every file opens with `# mhdbl <version> config <hash>`
//! (CSV) or carries `version` and `config_hash` keys (JSON).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::VERSION;
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceReport, OrderTable, SweepResult, LIFESPAN_EXPONENT};
use crate::grid::GridSpec;
use crate::model::Regime;
use crate::solver::{EnergyRow, Snapshot};

pub const ENERGY_COLUMNS: [&str; 8] = [
    "t",
    "E",
    "D",
    "breach4",
    "breach8",
    "warmup",
    "dt",
    "min_h_or_q",
];

/// Provenance stamped into every file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub version: String,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            version: VERSION.into(),
            config_hash: config_hash.into(),
        }
    }

    fn header(&self) -> String {
        format!("# mhdbl {} config {}\n", self.version, self.config_hash)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        k => Error::Io(std::io::Error::other(format!("{k:?}"))),
    }
}

/// Append-only CSV writer for the per-step energy log. Rows are flushed as
/// they arrive; [`EnergyLog::finish`] or [`EnergyLog::abort`] appends the
/// trailer that tells a complete file from a partial one.
pub struct EnergyLog {
    out: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl EnergyLog {
    pub fn create(path: &Path, stamp: &Stamp) -> Result<Self> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(stamp.header().as_bytes())?;
        let mut out = csv::Writer::from_writer(f);
        out.write_record(ENERGY_COLUMNS).map_err(csv_err)?;
        out.flush()?;
        Ok(Self { out, rows: 0 })
    }

    pub fn append(&mut self, r: &EnergyRow) -> Result<()> {
        let flag = |b: bool| if b { "1" } else { "0" };
        self.out
            .write_record([
                r.t.to_string(),
                r.e.to_string(),
                r.d.to_string(),
                flag(r.breach4).into(),
                flag(r.breach8).into(),
                flag(r.warmup).into(),
                r.dt.to_string(),
                r.min_h_or_q.to_string(),
            ])
            .map_err(csv_err)?;
        self.out.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn trailer(mut self, line: String) -> Result<()> {
        self.out.flush()?;
        let mut f = self
            .out
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn finish(self, termination: &str) -> Result<()> {
        self.trailer(format!("# complete: {termination}\n"))
    }

    /// Marks the file as partial.
    pub fn abort(self, reason: &str) -> Result<()> {
        self.trailer(format!("# incomplete: {}\n", reason.replace('\n', " ")))
    }
}

/// Energy log rows back from a file written by [`EnergyLog`].
pub fn read_energy_log(path: &Path) -> Result<Vec<EnergyRow>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| {
                Error::Construction(format!(
                    "{}: bad value in column {}",
                    path.display(),
                    ENERGY_COLUMNS[k]
                ))
            })
        };
        rows.push(EnergyRow {
            t: num(0)?,
            e: num(1)?,
            d: num(2)?,
            breach4: num(3)? != 0.0,
            breach8: num(4)? != 0.0,
            warmup: num(5)? != 0.0,
            dt: num(6)?,
            min_h_or_q: num(7)?,
            f: 0.0,
            wall_residual: None,
        });
    }
    Ok(rows)
}

pub fn component_names(regime: Regime) -> &'static [&'static str] {
    match regime {
        Regime::Isentropic => &["u", "h_tilde"],
        Regime::NonIsentropic => &["u_tilde", "theta_tilde", "q_tilde"],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub regime: Regime,
    pub step: usize,
    pub t: f64,
    pub grid: GridSpec,
    /// Column-major: entry `i * ny + j` is `(x_i, y_j)`.
    pub layout: String,
    pub fields: Vec<NamedField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedField {
    pub name: String,
    pub values: Vec<f64>,
}

impl SnapshotFile {
    pub fn new(stamp: &Stamp, regime: Regime, grid: GridSpec, snap: &Snapshot) -> Self {
        Self {
            stamp: stamp.clone(),
            regime,
            step: snap.step,
            t: snap.t,
            grid,
            layout: "column-major (x outer, y inner)".into(),
            fields: component_names(regime)
                .iter()
                .zip(&snap.comps)
                .map(|(n, f)| NamedField {
                    name: (*n).into(),
                    values: f.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

impl SnapshotFile {
    /// The stored components, checked against the expected regime and grid.
    pub fn comps(&self, regime: Regime, grid: &GridSpec) -> Result<Vec<crate::grid::Field>> {
        let names = component_names(regime);
        let mut errs = Vec::new();
        if self.regime != regime {
            errs.push(format!(
                "snapshot regime {:?} differs from {:?}",
                self.regime, regime
            ));
        }
        if self.grid != *grid {
            errs.push(format!(
                "snapshot grid {:?} differs from {:?}",
                self.grid, grid
            ));
        }
        let got: Vec<&str> = self.fields.iter().map(|f| f.name.as_str()).collect();
        if got != names {
            errs.push(format!("snapshot fields {got:?} differ from {names:?}"));
        }
        if let Some(f) = self.fields.iter().find(|f| f.values.len() != grid.len()) {
            errs.push(format!(
                "snapshot field {} has {} values, the grid {}",
                f.name,
                f.values.len(),
                grid.len()
            ));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(self
            .fields
            .iter()
            .map(|f| crate::grid::Field::from_vec(grid, f.values.clone()))
            .collect())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn write_snapshot(
    dir: &Path,
    stamp: &Stamp,
    regime: Regime,
    grid: GridSpec,
    snap: &Snapshot,
) -> Result<PathBuf> {
    let path = dir.join(format!("snapshot_{:06}.json", snap.step));
    write_json(&path, &SnapshotFile::new(stamp, regime, grid, snap))?;
    Ok(path)
}

/// A JSON report with the provenance keys in front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub report: T,
}

fn write_csv(path: &Path, stamp: &Stamp, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(stamp.header().as_bytes())?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `sweep.json` (the full result) and `sweep.csv` (`eps, T` pairs).
pub fn write_sweep(dir: &Path, stamp: &Stamp, result: &SweepResult) -> Result<()> {
    write_json(
        &dir.join("sweep.json"),
        &Stamped {
            stamp: stamp.clone(),
            report: result,
        },
    )?;
    let rows = result
        .entries
        .iter()
        .map(|e| {
            vec![
                e.epsilon.to_string(),
                opt(e.t_breach4),
                opt(e.t_breach8),
                e.termination.clone(),
                e.steps.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("sweep.csv"),
        stamp,
        &["epsilon", "t_breach4", "t_breach8", "termination", "steps"],
        rows,
    )
}

/// `plot_energy.csv`: `E / eps^2` and `D / eps^2` against `t`.
pub fn plot_energy(dir: &Path, stamp: &Stamp, rows: &[EnergyRow], eps: f64) -> Result<PathBuf> {
    let s = if eps > 0.0 { 1.0 / (eps * eps) } else { 1.0 };
    let path = dir.join("plot_energy.csv");
    write_csv(
        &path,
        stamp,
        &["t", "E_over_eps2", "D_over_eps2"],
        rows.iter()
            .map(|r| {
                vec![
                    r.t.to_string(),
                    (r.e * s).to_string(),
                    (r.d * s).to_string(),
                ]
            })
            .collect(),
    )?;
    Ok(path)
}

/// `plot_lifespan.csv`: `ln eps`, `ln T` (empty without a breach) and the
/// reference line `ln C_fit - (4/3) ln eps`.
pub fn plot_lifespan(dir: &Path, stamp: &Stamp, result: &SweepResult) -> Result<PathBuf> {
    let c_fit = result.theorem.as_ref().map(|t| t.c_fit);
    let path = dir.join("plot_lifespan.csv");
    write_csv(
        &path,
        stamp,
        &["ln_eps", "ln_T_breach4", "ln_reference"],
        result
            .entries
            .iter()
            .map(|e| {
                let le = e.epsilon.ln();
                vec![
                    le.to_string(),
                    opt(e.t_breach4.map(f64::ln)),
                    opt(c_fit.map(|c| c.ln() + LIFESPAN_EXPONENT * le)),
                ]
            })
            .collect(),
    )?;
    Ok(path)
}

/// `plot_orders.csv`: one row per ladder entry with the order against the previous one.
pub fn plot_orders(dir: &Path, stamp: &Stamp, reports: &[ConvergenceReport]) -> Result<PathBuf> {
    let mut rows = Vec::new();
    let regime = |r: Regime| match r {
        Regime::Isentropic => "isentropic",
        Regime::NonIsentropic => "non-isentropic",
    };
    for rep in reports {
        for (ladder, table) in [("space", &rep.space), ("time", &rep.time)] {
            rows.extend(order_rows(regime(rep.regime), ladder, table));
        }
    }
    let path = dir.join("plot_orders.csv");
    write_csv(
        &path,
        stamp,
        &[
            "regime",
            "ladder",
            "param",
            "l2",
            "linf",
            "order_l2",
            "order_linf",
        ],
        rows,
    )?;
    Ok(path)
}

fn order_rows(regime: &str, ladder: &str, t: &OrderTable) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let o =
                |v: &Option<Vec<f64>>| opt(k.checked_sub(1).and_then(|j| v.as_ref().map(|v| v[j])));
            vec![
                regime.into(),
                ladder.into(),
                r.param.to_string(),
                r.l2.to_string(),
                r.linf.to_string(),
                o(&t.orders_l2),
                o(&t.orders_linf),
            ]
        })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
