use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::config::OutputFormat;
use super::CliError;
use crate::sampler::SampleSet;

/// Column names: `x1_0 … x1_{d−1}`, then `x2_0 …` for full states.
pub fn column_names(width: usize, dim: usize) -> Vec<String> {
    (0..width)
        .map(|i| format!("x{}_{}", i / dim + 1, i % dim))
        .collect()
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders samples from several chains, in chain order.
pub fn render_samples(chains: &[(usize, &SampleSet)], dim: usize, format: OutputFormat) -> String {
    let width = chains.first().map_or(dim, |(_, s)| s.width());
    let names = column_names(width, dim);
    let mut out = String::new();
    if format == OutputFormat::Csv {
        out.push_str("chain,step");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
    }
    for (chain, samples) in chains {
        for (i, step) in samples.steps().iter().enumerate() {
            let row = samples.row(i);
            match format {
                OutputFormat::Csv => {
                    let _ = write!(out, "{chain},{step}");
                    for v in row {
                        out.push(',');
                        out.push_str(&format_value(*v));
                    }
                }
                OutputFormat::Jsonl => {
                    let _ = write!(out, "{{\"chain\":{chain},\"step\":{step}");
                    for (n, v) in names.iter().zip(row) {
                        let _ = write!(out, ",\"{n}\":{}", format_value(*v));
                    }
                    out.push('}');
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// `s.csv` → `s.report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = SampleSet::from_rows(2, &[vec![0.1, -2.0]]);
        let text = render_samples(&[(3, &s)], 2, OutputFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "chain,step,x1_0,x1_1");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "3");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.1);
        assert_eq!(fields[3].parse::<f64>().unwrap(), -2.0);
    }

    #[test]
    fn jsonl_parses() {
        let s = SampleSet::from_rows(1, &[vec![1.5], vec![-0.25]]);
        let text = render_samples(&[(0, &s)], 1, OutputFormat::Jsonl);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["x1_0"].is_number());
            assert_eq!(v["chain"], 0);
        }
    }

    #[test]
    fn full_state_names() {
        assert_eq!(
            column_names(6, 2),
            ["x1_0", "x1_1", "x2_0", "x2_1", "x3_0", "x3_1"]
        );
    }

    #[test]
    fn values_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -1e-300,
            6.02e23,
            f64::MIN_POSITIVE,
            f64::MAX,
        ] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
