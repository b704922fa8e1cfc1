//! CSV emission and ingestion with atomic writes.
//!
//! Floating-point values are written with 17 significant digits so files
//! round-trip bit-stably, and every writer goes through a temp-file rename
//! so failures never leave partial output behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use qlyap_core::simulator::{SampleFlags, Trajectory};

use crate::CliError;

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `content` to `path` via a temp file in the same directory.
pub fn atomic_write(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("mkdir {}: {e}", parent.display())))?;
        }
    }
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)
            .map_err(|e| CliError::runtime(format!("create {}: {e}", tmp.display())))?;
        f.write_all(content.as_bytes())
            .map_err(|e| CliError::runtime(format!("write {}: {e}", tmp.display())))?;
        f.flush()
            .map_err(|e| CliError::runtime(format!("flush {}: {e}", tmp.display())))?;
    }
    fs::rename(&tmp, path)
        .map_err(|e| CliError::runtime(format!("rename to {}: {e}", path.display())))?;
    Ok(())
}

/// Header for an `m`-channel trajectory file.
pub fn trajectory_header(m: usize) -> String {
    let mut cols = vec!["t".to_string(), "fidelity".to_string(), "V".to_string()];
    for k in 1..=m {
        cols.push(format!("u_{k}"));
    }
    for k in 1..=m {
        cols.push(format!("T_{k}"));
    }
    cols.push("mode".into());
    cols.push("flags".into());
    cols.join(",")
}

/// Render a trajectory as CSV, optionally prefixing each row with a label
/// column (used by the comparison command).
pub fn trajectory_csv(traj: &Trajectory, label: Option<&str>) -> String {
    let m = traj.peak_control.len();
    let mut out = String::new();
    match label {
        Some(_) => out.push_str(&format!("law,{}\n", trajectory_header(m))),
        None => out.push_str(&format!("{}\n", trajectory_header(m))),
    }
    for s in &traj.samples {
        let mut fields = Vec::with_capacity(2 * m + 5);
        if let Some(l) = label {
            fields.push(l.to_string());
        }
        fields.push(fmt_f64(s.t));
        fields.push(fmt_f64(s.fidelity));
        fields.push(fmt_f64(s.v));
        for k in 0..m {
            fields.push(fmt_f64(s.u[k]));
        }
        for k in 0..m {
            fields.push(fmt_f64(s.tk[k]));
        }
        fields.push(s.mode.name().to_string());
        fields.push(s.flags.render());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Rows of several labelled trajectories merged under one header.
pub fn comparison_csv(entries: &[(String, &Trajectory)]) -> Result<String, CliError> {
    let m = entries
        .first()
        .map(|(_, t)| t.peak_control.len())
        .ok_or_else(|| CliError::validation("nothing to compare".into()))?;
    let mut out = format!("law,{}\n", trajectory_header(m));
    for (label, traj) in entries {
        let body = trajectory_csv(traj, Some(label));
        // skip the per-trajectory header line
        out.push_str(body.split_once('\n').map(|(_, b)| b).unwrap_or(""));
    }
    Ok(out)
}

/// Parsed numeric view of a trajectory CSV.
#[derive(Debug, Clone)]
pub struct TrajectoryCsv {
    pub channels: usize,
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t: f64,
    pub fidelity: f64,
    pub v: f64,
    pub u: Vec<f64>,
    pub tk: Vec<f64>,
    pub mode: String,
    pub flags: SampleFlags,
}

/// Parse and schema-check a trajectory CSV produced by this tool.
pub fn parse_trajectory_csv(text: &str) -> Result<TrajectoryCsv, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::validation("empty trajectory file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[0] != "t" || cols[1] != "fidelity" || cols[2] != "V" {
        return Err(CliError::validation(format!(
            "unexpected trajectory header `{header}`"
        )));
    }
    let m = cols.iter().filter(|c| c.starts_with("u_")).count();
    let expected: Vec<String> = {
        let mut v = vec!["t".into(), "fidelity".into(), "V".into()];
        for k in 1..=m {
            v.push(format!("u_{k}"));
        }
        for k in 1..=m {
            v.push(format!("T_{k}"));
        }
        v.push("mode".into());
        v.push("flags".into());
        v
    };
    if cols != expected.iter().map(|s| s.as_str()).collect::<Vec<_>>() {
        return Err(CliError::validation(format!(
            "trajectory header mismatch: `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected.len() {
            return Err(CliError::validation(format!(
                "row {} has {} fields, expected {}",
                idx + 2,
                fields.len(),
                expected.len()
            )));
        }
        let num = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|e| {
                CliError::validation(format!("row {}: bad number `{s}`: {e}", idx + 2))
            })
        };
        rows.push(TrajectoryRow {
            t: num(fields[0])?,
            fidelity: num(fields[1])?,
            v: num(fields[2])?,
            u: fields[3..3 + m]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_, _>>()?,
            tk: fields[3 + m..3 + 2 * m]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_, _>>()?,
            mode: fields[3 + 2 * m].to_string(),
            flags: SampleFlags::parse(fields[3 + 2 * m + 1]),
        });
    }
    if rows.is_empty() {
        return Err(CliError::validation(
            "trajectory file has no data rows".into(),
        ));
    }
    Ok(TrajectoryCsv { channels: m, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_roundtrips() {
        for x in [0.1, 1.0 / 3.0, 9.37930068805e0, -2.5e-13, 1.7e8] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn header_shapes() {
        assert_eq!(trajectory_header(1), "t,fidelity,V,u_1,T_1,mode,flags");
        assert_eq!(
            trajectory_header(3),
            "t,fidelity,V,u_1,u_2,u_3,T_1,T_2,T_3,mode,flags"
        );
    }

    #[test]
    fn parse_rejects_foreign_headers() {
        assert!(parse_trajectory_csv("time,fid\n1,2\n").is_err());
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("t,fidelity,V,u_1,T_1,mode,flags\n").is_err());
    }
}
