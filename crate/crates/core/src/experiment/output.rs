use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::correlation::GridShape;
use crate::error::{Error, Result};

use super::run::ResultRow;
use super::spec::{ExperimentSpec, Scheme, Sweep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" => Ok(Format::JsonLines),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

/// Output columns in order. Unit suffixes: `_dBm`, `_W` (watts), `_bits`,
/// `_lambda` (wavelengths); unsuffixed numeric columns are dimensionless.
pub const COLUMNS: [&str; 25] = [
    "experiment",
    "sweep_index",
    "power_dBm",
    "bs_grid",
    "m",
    "rho",
    "ris_grid",
    "n",
    "spacing_lambda",
    "scheme",
    "kgr_bits",
    "kgr_std_bits",
    "draws",
    "x_W",
    "q_W",
    "t",
    "mc_trials",
    "mc_closed_form_bits",
    "mc_estimate_bits",
    "mc_stderr_bits",
    "f_lower_W",
    "f_upper_W",
    "achieved_W",
    "seed",
    "version",
];

enum Cell {
    Text(String),
    Real(f64),
    Int(u64),
    Empty,
}

impl Cell {
    fn opt(v: Option<f64>) -> Cell {
        v.map(Cell::Real).unwrap_or(Cell::Empty)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Real(v) => fmt_real(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Text(s) => serde_json::to_string(s).expect("string serializes"),
            Cell::Real(v) if v.is_finite() => fmt_real(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Real(_) | Cell::Empty => "null".to_owned(),
        }
    }
}

/// Twelve significant digits in scientific notation.
fn fmt_real(v: f64) -> String {
    format!("{v:.11e}")
}

fn cells(r: &ResultRow) -> Vec<Cell> {
    vec![
        Cell::Text(r.experiment.clone()),
        Cell::Int(r.sweep_index as u64),
        Cell::Real(r.power_dbm),
        Cell::Text(r.bs_grid.to_string()),
        Cell::Int(r.m() as u64),
        Cell::Real(r.rho),
        Cell::Text(r.ris_grid.to_string()),
        Cell::Int(r.n() as u64),
        Cell::Real(r.spacing_lambda),
        Cell::Text(r.scheme.name().to_owned()),
        Cell::Real(r.kgr_bits),
        Cell::Real(r.kgr_std_bits),
        Cell::Int(r.draws as u64),
        Cell::Real(r.x_watts),
        Cell::Real(r.q_watts),
        Cell::Real(r.t),
        Cell::Int(r.mc_trials as u64),
        Cell::opt(r.mc_closed_form_bits),
        Cell::opt(r.mc_estimate_bits),
        Cell::opt(r.mc_stderr_bits),
        Cell::Real(r.f_lower_watts),
        Cell::Real(r.f_upper_watts),
        Cell::Real(r.achieved_watts),
        Cell::Int(r.seed),
        Cell::Text(r.version.clone()),
    ]
}

/// Encode rows in memory.
pub fn write_rows(rows: &[ResultRow], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for r in rows {
                w.write_record(cells(r).iter().map(Cell::csv)).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        }
        Format::JsonLines => {
            for r in rows {
                out.push('{');
                for (i, (name, cell)) in COLUMNS.iter().zip(cells(r)).enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "\"{name}\":{}", cell.json());
                }
                out.push_str("}\n");
            }
        }
    }
    out
}

/// Write rows to `path` through a temporary file and an atomic rename, so a
/// failed run never leaves a truncated result file behind.
pub fn emit(rows: &[ResultRow], path: &Path, format: Format) -> Result<()> {
    write_atomic(path, write_rows(rows, format).as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut tmp = PathBuf::from(path);
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    tmp.set_file_name(name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

fn parse_grid(s: &str) -> Option<GridShape> {
    let (h, v) = s.split_once('x')?;
    GridShape::new(h.parse().ok()?, v.parse().ok()?).ok()
}

fn row_from_fields(get: &dyn Fn(&str) -> Option<String>) -> std::result::Result<ResultRow, String> {
    let text = |k: &str| get(k).ok_or_else(|| format!("missing `{k}`"));
    let real = |k: &str| -> std::result::Result<f64, String> {
        text(k)?.parse::<f64>().map_err(|e| format!("`{k}`: {e}"))
    };
    let opt = |k: &str| -> std::result::Result<Option<f64>, String> {
        match get(k) {
            None => Ok(None),
            Some(s) if s.is_empty() => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|e| format!("`{k}`: {e}")),
        }
    };
    let int = |k: &str| -> std::result::Result<u64, String> {
        text(k)?.parse::<u64>().map_err(|e| format!("`{k}`: {e}"))
    };
    let grid = |k: &str| -> std::result::Result<GridShape, String> {
        parse_grid(&text(k)?).ok_or_else(|| format!("`{k}` is not a grid like 4x4"))
    };
    let scheme = text("scheme")?;
    Ok(ResultRow {
        experiment: text("experiment")?,
        sweep_index: int("sweep_index")? as usize,
        power_dbm: real("power_dBm")?,
        bs_grid: grid("bs_grid")?,
        rho: real("rho")?,
        ris_grid: grid("ris_grid")?,
        spacing_lambda: real("spacing_lambda")?,
        scheme: Scheme::from_name(&scheme).ok_or_else(|| format!("unknown scheme `{scheme}`"))?,
        kgr_bits: real("kgr_bits")?,
        kgr_std_bits: real("kgr_std_bits")?,
        draws: int("draws")? as usize,
        x_watts: real("x_W")?,
        q_watts: real("q_W")?,
        t: real("t")?,
        mc_trials: int("mc_trials")? as usize,
        mc_closed_form_bits: opt("mc_closed_form_bits")?,
        mc_estimate_bits: opt("mc_estimate_bits")?,
        mc_stderr_bits: opt("mc_stderr_bits")?,
        f_lower_watts: real("f_lower_W")?,
        f_upper_watts: real("f_upper_W")?,
        achieved_watts: real("achieved_W")?,
        seed: int("seed")?,
        version: text("version")?,
    })
}

/// Read rows back from a file written by [`emit`].
pub fn parse_rows(path: &Path, format: Format) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_str(&text, format).map_err(|reason| parse_err(path, reason))
}

pub(crate) fn parse_str(text: &str, format: Format) -> std::result::Result<Vec<ResultRow>, String> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let header = rdr.headers().map_err(|e| e.to_string())?.clone();
            if header.iter().ne(COLUMNS.iter().copied()) {
                return Err("unexpected header".to_owned());
            }
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| e.to_string())?;
                let get = |k: &str| {
                    let idx = COLUMNS.iter().position(|c| *c == k)?;
                    rec.get(idx).map(str::to_owned)
                };
                rows.push(row_from_fields(&get).map_err(|e| format!("row {}: {e}", i + 1))?);
            }
        }
        Format::JsonLines => {
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let obj: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
                let get = |k: &str| match obj.get(k)? {
                    serde_json::Value::Null => None,
                    serde_json::Value::String(s) => Some(s.clone()),
                    v => Some(v.to_string()),
                };
                rows.push(row_from_fields(&get).map_err(|e| format!("line {}: {e}", i + 1))?);
            }
        }
    }
    Ok(rows)
}

/// Gnuplot script drawing KGR curves from a CSV written by [`emit`].
pub fn plot_script(spec: &ExperimentSpec, data_file: &str) -> String {
    let col = |name: &str| COLUMNS.iter().position(|c| *c == name).unwrap() + 1;
    let (x_col, x_label, group_col, groups): (usize, &str, Option<usize>, Vec<String>) = match &spec.sweep {
        Sweep::Power { .. } => (col("power_dBm"), "P (dBm)", None, vec![]),
        Sweep::RisElements { spacings, .. } => (
            col("n"),
            "RIS elements N",
            Some(col("spacing_lambda")),
            spacings.iter().map(|s| format!("{s:.11e}")).collect(),
        ),
        Sweep::BsAntennas { rho, .. } => (
            col("m"),
            "BS antennas M",
            Some(col("rho")),
            rho.iter().map(|r| format!("{r:.11e}")).collect(),
        ),
    };
    let scheme_col = col("scheme");
    let kgr_col = col("kgr_bits");
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script for {}", spec.name);
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set xlabel '{x_label}'");
    let _ = writeln!(s, "set ylabel 'KGR (bits/probe)'");
    let mut curves = Vec::new();
    for scheme in &spec.schemes {
        let name = scheme.name();
        match group_col {
            None => curves.push(format!(
                "'{data_file}' every ::1 using (strcol({scheme_col}) eq '{name}' ? ${x_col} : NaN):{kgr_col} with linespoints title '{name}'"
            )),
            Some(g) => {
                for value in &groups {
                    curves.push(format!(
                        "'{data_file}' every ::1 using ((strcol({scheme_col}) eq '{name}' && strcol({g}) eq '{value}') ? ${x_col} : NaN):{kgr_col} with linespoints title '{name} {}'",
                        value.parse::<f64>().unwrap_or(0.0)
                    ));
                }
            }
        }
    }
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}
