//! Spectrum CSV files and atomic file output.
//!
//! A spectrum CSV starts with `# key: value` comment lines (the axis keys
//! `t_min_ns`, `t_max_ns` and `bins` among them) followed by the columns
//! `t_bin_center_ns,counts`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::montecarlo::{EnergySpectrum, TimeEnergyHistogram, UniformAxis};

pub const SPECTRUM_COLUMNS: &str = "t_bin_center_ns,counts";
pub const ENERGY_COLUMNS: &str = "e_bin_center_kev,counts";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// SHA-256 of `bytes` as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        what: "json",
        message: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn header_lines(out: &mut String, header: &[(String, String)]) {
    for (k, v) in header {
        // one physical line per entry
        let v = v.replace('\n', " ");
        let _ = writeln!(out, "# {k}: {v}");
    }
}

/// Delay spectrum as CSV; `header` entries come first, then the axis keys.
pub fn spectrum_csv(hist: &TimeEnergyHistogram, header: &[(String, String)]) -> String {
    let mut out = String::new();
    header_lines(&mut out, header);
    let a = hist.time_axis;
    let axis_keys = [
        ("t_min_ns".to_string(), a.min.to_string()),
        ("t_max_ns".to_string(), a.max.to_string()),
        ("bins".to_string(), a.bins.to_string()),
        (
            "units".to_string(),
            "t_bin_center_ns: ns; counts: events per bin".to_string(),
        ),
    ];
    header_lines(&mut out, &axis_keys);
    out.push_str(SPECTRUM_COLUMNS);
    out.push('\n');
    for (i, c) in hist.time_counts.iter().enumerate() {
        let _ = writeln!(out, "{},{}", a.center(i), c);
    }
    out
}

/// Energy spectrum of one delay window as CSV.
pub fn energy_csv(
    spectrum: &EnergySpectrum,
    axis: &UniformAxis,
    header: &[(String, String)],
) -> String {
    let mut out = String::new();
    header_lines(&mut out, header);
    let w = &spectrum.window;
    let keys = [
        (
            "delay_window".to_string(),
            format!("{} [{}, {}) ns", w.name, w.t_min_ns, w.t_max_ns),
        ),
        ("e_min_kev".to_string(), axis.min.to_string()),
        ("e_max_kev".to_string(), axis.max.to_string()),
        ("bins".to_string(), axis.bins.to_string()),
        ("overflow".to_string(), spectrum.overflow.to_string()),
        (
            "units".to_string(),
            "e_bin_center_kev: keV; counts: events per bin".to_string(),
        ),
    ];
    header_lines(&mut out, &keys);
    out.push_str(ENERGY_COLUMNS);
    out.push('\n');
    for (i, c) in spectrum.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{}", axis.center(i), c);
    }
    out
}

/// Parsed spectrum CSV: histogram plus its header entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub hist: TimeEnergyHistogram,
    pub header: BTreeMap<String, String>,
}

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        what: "spectrum csv",
        message: message.into(),
    }
}

pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumFile> {
    let mut header = BTreeMap::new();
    let mut centers = Vec::new();
    let mut counts = Vec::new();
    let mut seen_columns = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !seen_columns {
            if line != SPECTRUM_COLUMNS {
                return Err(format_err(format!(
                    "line {}: expected column header {SPECTRUM_COLUMNS:?}, got {line:?}",
                    lineno + 1
                )));
            }
            seen_columns = true;
            continue;
        }
        let (t, c) = line
            .split_once(',')
            .ok_or_else(|| format_err(format!("line {}: expected two columns", lineno + 1)))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| format_err(format!("line {}: bad time {t:?}", lineno + 1)))?;
        let c: u64 = c.trim().parse().map_err(|_| {
            format_err(format!(
                "line {}: counts must be a nonnegative integer, got {c:?}",
                lineno + 1
            ))
        })?;
        centers.push(t);
        counts.push(c);
    }
    if !seen_columns || counts.is_empty() {
        return Err(format_err("no data rows"));
    }
    let axis = match (
        header.get("t_min_ns"),
        header.get("t_max_ns"),
        header.get("bins"),
    ) {
        (Some(a), Some(b), Some(n)) => {
            let parse = |s: &String| {
                s.parse::<f64>()
                    .map_err(|_| format_err(format!("bad axis value {s:?}")))
            };
            let bins = n
                .parse::<usize>()
                .map_err(|_| format_err(format!("bad bin count {n:?}")))?;
            UniformAxis::new(parse(a)?, parse(b)?, bins)?
        }
        _ => {
            // infer from uniformly spaced centers
            if centers.len() < 2 {
                return Err(format_err(
                    "need t_min_ns/t_max_ns/bins header or at least two rows",
                ));
            }
            let w = (centers[centers.len() - 1] - centers[0]) / (centers.len() - 1) as f64;
            UniformAxis::new(
                centers[0] - 0.5 * w,
                centers[centers.len() - 1] + 0.5 * w,
                centers.len(),
            )?
        }
    };
    if counts.len() != axis.bins {
        return Err(format_err(format!(
            "{} rows for {} bins",
            counts.len(),
            axis.bins
        )));
    }
    let tol = 1e-6 * axis.width();
    for (i, &t) in centers.iter().enumerate() {
        if (t - axis.center(i)).abs() > tol {
            return Err(format_err(format!(
                "row {i}: center {t} does not match the axis ({})",
                axis.center(i)
            )));
        }
    }
    let mut hist = TimeEnergyHistogram::from_time_counts(axis, counts)?;
    hist.metadata.config_hash = header.get("config_hash").cloned();
    if let Some(seed) = header.get("seed").and_then(|s| s.parse().ok()) {
        hist.metadata.seed = seed;
    }
    Ok(SpectrumFile { hist, header })
}

pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumFile> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_spectrum_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist() -> TimeEnergyHistogram {
        let axis = UniformAxis::new(-20.0, 1000.0, 1200).unwrap();
        let counts = (0..1200).map(|i| (i * 7 % 13) as u64).collect();
        TimeEnergyHistogram::from_time_counts(axis, counts).unwrap()
    }

    #[test]
    fn round_trip() {
        let h = hist();
        let text = spectrum_csv(
            &h,
            &[
                ("seed".into(), "7".into()),
                ("config_hash".into(), "abc".into()),
            ],
        );
        let back = parse_spectrum_csv(&text).unwrap();
        assert_eq!(back.hist.time_counts, h.time_counts);
        assert_eq!(back.hist.time_axis, h.time_axis);
        assert_eq!(back.hist.metadata.seed, 7);
        assert_eq!(back.header["config_hash"], "abc");
    }

    #[test]
    fn axis_inferred_without_header() {
        let text = "t_bin_center_ns,counts\n0.5,1\n1.5,2\n2.5,3\n";
        let f = parse_spectrum_csv(text).unwrap();
        assert_eq!(f.hist.time_axis, UniformAxis::new(0.0, 3.0, 3).unwrap());
    }

    #[test]
    fn malformed_files_are_rejected() {
        for text in [
            "",
            "time,counts\n0.5,1\n",
            "t_bin_center_ns,counts\n0.5,-1\n1.5,2\n",
            "t_bin_center_ns,counts\n0.5\n",
            "# t_min_ns: 0\n# t_max_ns: 3\n# bins: 4\nt_bin_center_ns,counts\n0.5,1\n1.5,2\n2.5,3\n",
        ] {
            let err = parse_spectrum_csv(text).unwrap_err();
            assert!(err.is_validation(), "{text:?}: {err}");
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
