//! Artifact writers. Every file carries the config hash and the library
//! version, and identical inputs give identical bytes.
//!
//! * JSON: `{"meta": {...}, "result": ...}`, pretty-printed.
//! * CSV: `#`-prefixed meta lines, one header line, then rows.
//! * gnuplot: `#`-prefixed meta and column lines, then two numeric columns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub version: String,
}

impl Meta {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            version: wigner_clt::VERSION.to_string(),
        }
    }

    fn comment_lines(&self) -> String {
        format!(
            "# command: {}\n# config_hash: {}\n# version: {}\n",
            self.command, self.config_hash, self.version
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

/// What to write; the variant fixes the format.
pub enum Payload<'a> {
    Json(serde_json::Value),
    Csv {
        header: &'a [&'a str],
        rows: &'a [Vec<String>],
    },
    Gnuplot {
        columns: (&'a str, &'a str),
        points: &'a [(f64, f64)],
    },
}

impl Payload<'_> {
    pub fn format(&self) -> Format {
        match self {
            Payload::Json(_) => Format::Json,
            Payload::Csv { .. } => Format::Csv,
            Payload::Gnuplot { .. } => Format::Gnuplot,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    meta: Meta,
    result: T,
}

/// Renders a payload to its exact file contents.
pub fn render(payload: &Payload<'_>, meta: &Meta) -> Result<String, CliError> {
    Ok(match payload {
        Payload::Json(v) => {
            let mut s = serde_json::to_string_pretty(&Envelope {
                meta: meta.clone(),
                result: v,
            })?;
            s.push('\n');
            s
        }
        Payload::Csv { header, rows } => {
            let mut s = meta.comment_lines();
            s.push_str(&header.join(","));
            s.push('\n');
            for r in rows.iter() {
                if r.len() != header.len() {
                    return Err(CliError::Validation(format!(
                        "CSV row has {} fields, header has {}",
                        r.len(),
                        header.len()
                    )));
                }
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s
        }
        Payload::Gnuplot { columns, points } => {
            let mut s = meta.comment_lines();
            let _ = writeln!(s, "# columns: {} {}", columns.0, columns.1);
            for (x, y) in points.iter() {
                let _ = writeln!(s, "{x:e} {y:e}");
            }
            s
        }
    })
}

/// Writes `payload` to `dir/name`, creating `dir` if needed.
pub fn emit_report(dir: &Path, name: &str, payload: &Payload<'_>, meta: &Meta) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, render(payload, meta)?)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// Serializes any result into a JSON payload.
pub fn json_payload<T: Serialize>(value: &T) -> Result<Payload<'static>, CliError> {
    Ok(Payload::Json(serde_json::to_value(value)?))
}

/// Reads back the `result` part of a JSON artifact.
pub fn read_json_result<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Meta, T), CliError> {
    let text = fs::read_to_string(path)?;
    let env: Envelope<T> = serde_json::from_str(&text)?;
    Ok((env.meta, env.result))
}

/// Shortest round-trip formatting used in CSV cells.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta::new("theory", "ab".repeat(32))
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Summary {
        variance: f64,
        label: String,
    }

    #[test]
    fn same_payload_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![vec!["1".to_string(), num(0.1)]];
        let p = Payload::Csv {
            header: &["a", "b"],
            rows: &rows,
        };
        let a = emit_report(dir.path(), "x.csv", &p, &meta()).unwrap();
        let first = fs::read(&a).unwrap();
        emit_report(dir.path(), "x.csv", &p, &meta()).unwrap();
        assert_eq!(first, fs::read(&a).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains(&"ab".repeat(32)) && text.contains(wigner_clt::VERSION));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Summary {
            variance: 0.1 + 0.2,
            label: "x".into(),
        };
        let path = emit_report(dir.path(), "s.json", &json_payload(&s).unwrap(), &meta()).unwrap();
        let (m, back): (Meta, Summary) = read_json_result(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(m, meta());
    }

    #[test]
    fn gnuplot_has_two_numeric_columns() {
        let pts = [(0.5, 1.25), (-1.0, 3e-7)];
        let text = render(
            &Payload::Gnuplot {
                columns: ("x", "y"),
                points: &pts,
            },
            &meta(),
        )
        .unwrap();
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line.split_whitespace().map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 2);
        }
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
    }

    #[test]
    fn ragged_csv_rejected() {
        let rows = vec![vec!["1".to_string()]];
        let p = Payload::Csv {
            header: &["a", "b"],
            rows: &rows,
        };
        assert!(render(&p, &meta()).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&blocker.join("sub"), "a.json", &json_payload(&1).unwrap(), &meta()).unwrap_err();
        assert!(matches!(err, CliError::Output(_)));
    }
}
