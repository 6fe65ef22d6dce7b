//! Signal file formats.
//!
//! * `raw-f64`: little-endian IEEE-754 doubles, column-major (all of channel 0,
//!   then all of channel 1, ...), with a mandatory JSON sidecar at
//!   `<path>.json` holding `{"n": N, "c": C}`.
//! * `csv`: one row per sample, one column per channel, `,` delimiter, `.`
//!   decimal separator, no header unless requested.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalFormat {
    RawF64,
    Csv,
}

impl SignalFormat {
    /// `.csv` means CSV, anything else raw-f64.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SignalFormat::Csv,
            _ => SignalFormat::RawF64,
        }
    }
}

impl FromStr for SignalFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "raw-f64" | "raw" => Ok(SignalFormat::RawF64),
            "csv" => Ok(SignalFormat::Csv),
            other => Err(format!(
                "unknown format '{other}' (expected raw-f64 or csv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub c: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_signal(path: &Path, format: SignalFormat, header: bool) -> Result<MultichannelSignal> {
    match format {
        SignalFormat::RawF64 => load_raw(path),
        SignalFormat::Csv => load_csv(path, header),
    }
}

pub fn save_signal(
    sig: &MultichannelSignal,
    path: &Path,
    format: SignalFormat,
    header: bool,
) -> Result<()> {
    match format {
        SignalFormat::RawF64 => save_raw(sig, path),
        SignalFormat::Csv => save_csv(sig, path, header),
    }
}

fn load_raw(path: &Path) -> Result<MultichannelSignal> {
    let side_path = sidecar_path(path);
    let side_text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::parse(&side_path, format!("bad sidecar: {e}")))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Shape(format!(
            "{}: {} bytes is not a whole number of doubles",
            path.display(),
            bytes.len()
        )));
    }
    let expected = side.n.saturating_mul(side.c);
    if bytes.len() / 8 != expected {
        return Err(Error::Shape(format!(
            "{}: sidecar declares n={} c={} ({} values) but file holds {}",
            path.display(),
            side.n,
            side.c,
            expected,
            bytes.len() / 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    MultichannelSignal::from_column_major(data, side.n, side.c)
}

fn save_raw(sig: &MultichannelSignal, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(sig.len() * sig.n_channels() * 8);
    for x in sig.to_column_major() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        n: sig.len(),
        c: sig.n_channels(),
    };
    let side_path = sidecar_path(path);
    fs::write(&side_path, serde_json::to_string(&side)?).map_err(|e| Error::io(&side_path, e))
}

fn load_csv(path: &Path, header: bool) -> Result<MultichannelSignal> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .skip(usize::from(header));
    for (lineno, line) in lines {
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>().map_err(|_| {
                    Error::parse(
                        path,
                        format!("line {}: non-numeric cell '{cell}'", lineno + 1),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Shape(format!(
                    "{}: line {} has {} columns, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::parse(path, "no data rows"));
    }
    let c = rows[0].len();
    let mut data = vec![0.0; n * c];
    for (i, row) in rows.iter().enumerate() {
        for (ch, &x) in row.iter().enumerate() {
            data[ch * n + i] = x;
        }
    }
    MultichannelSignal::from_column_major(data, n, c)
}

fn save_csv(sig: &MultichannelSignal, path: &Path, header: bool) -> Result<()> {
    let c = sig.n_channels();
    let mut out = String::with_capacity(sig.len() * c * 25);
    if header {
        let names: Vec<String> = (0..c).map(|i| format!("ch{i}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for i in 0..sig.len() {
        for ch in 0..c {
            if ch > 0 {
                out.push(',');
            }
            // 17 significant digits round-trip every finite double.
            write!(out, "{:.16e}", sig.channel(ch).samples()[i]).expect("write to String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
