//! CSV cube ingestion and report emission.
//!
//! Cubes travel as long-format CSV: a metadata line `# margin=...`, a
//! header `s1,..,sd,t,value`, then one row per lattice cell with 1-based
//! coordinates. The lattice must be complete; everything downstream
//! assumes dense regular grids. Structured results are written as JSON
//! objects tagged `"schema": "maxstab/1"`; tabular output (qq tables,
//! probability fields) as plain CSV.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::MaxstabError;
use crate::grid::{Margin, ObsCube};
use crate::Result;

/// Schema tag stamped into every JSON report.
pub const SCHEMA: &str = "maxstab/1";
/// At most this many missing cells are spelled out in the error.
const MAX_MISSING_SHOWN: usize = 10;

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> MaxstabError {
    MaxstabError::Data {
        reason: format!("{}:{line}: {msg}", path.display()),
    }
}

/// Read a dense observation cube from long-format CSV.
///
/// Expected layout:
///
/// ```text
/// # margin=frechet
/// s1,s2,t,value
/// 1,1,1,0.83
/// ...
/// ```
///
/// The spatial dimension comes from the header; grid side and series
/// length from the coordinate ranges, which must start at 1 and be gap
/// free. Duplicate or missing cells are data errors (missing cells are
/// listed, at most ten).
pub fn read_cube(path: impl AsRef<Path>) -> Result<ObsCube> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MaxstabError::Data {
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut reader = BufReader::new(file);

    // Metadata line: "# margin=raw|gumbel|frechet".
    let mut meta = String::new();
    reader
        .read_line(&mut meta)
        .map_err(|e| data_err(path, 1, e))?;
    let margin = parse_margin_line(meta.trim())
        .ok_or_else(|| data_err(path, 1, format!("expected '# margin=raw|gumbel|frechet', got '{}'", meta.trim())))?;

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let d = headers.len().checked_sub(2).filter(|&d| d > 0).ok_or_else(|| {
        data_err(path, 2, "header must be s1,..,sd,t,value with at least one spatial axis")
    })?;
    for (j, name) in headers.iter().enumerate() {
        let expect = if j < d {
            format!("s{}", j + 1)
        } else if j == d {
            "t".to_string()
        } else {
            "value".to_string()
        };
        if name != expect {
            return Err(data_err(
                path,
                2,
                format!("header column {} is '{name}', expected '{expect}'", j + 1),
            ));
        }
    }

    // First pass: collect rows, track coordinate ranges.
    let mut rows: Vec<(Vec<usize>, usize, f64)> = Vec::new();
    let mut max_s = vec![0usize; d];
    let mut max_t = 0usize;
    for (i, rec) in csv_reader.records().enumerate() {
        let line = i + 3; // metadata + header occupy lines 1-2
        let rec = rec?;
        if rec.len() != d + 2 {
            return Err(data_err(path, line, format!("{} fields, expected {}", rec.len(), d + 2)));
        }
        let mut s = Vec::with_capacity(d);
        for j in 0..d {
            let c: usize = rec[j]
                .parse()
                .map_err(|_| data_err(path, line, format!("bad coordinate '{}'", &rec[j])))?;
            if c == 0 {
                return Err(data_err(path, line, "coordinates are 1-based"));
            }
            max_s[j] = max_s[j].max(c);
            s.push(c - 1);
        }
        let t: usize = rec[d]
            .parse()
            .map_err(|_| data_err(path, line, format!("bad time index '{}'", &rec[d])))?;
        if t == 0 {
            return Err(data_err(path, line, "time indices are 1-based"));
        }
        max_t = max_t.max(t);
        let v: f64 = rec[d + 1]
            .parse()
            .map_err(|_| data_err(path, line, format!("bad value '{}'", &rec[d + 1])))?;
        if !v.is_finite() {
            return Err(data_err(path, line, format!("non-finite value {v}")));
        }
        rows.push((s, t - 1, v));
    }
    if rows.is_empty() {
        return Err(data_err(path, 3, "no data rows"));
    }
    let m = max_s[0];
    if max_s.iter().any(|&mx| mx != m) {
        return Err(MaxstabError::Data {
            reason: format!(
                "{}: spatial axes span different ranges {:?}; the grid must be a cube",
                path.display(),
                max_s
            ),
        });
    }

    // Second pass: fill the dense cube, catching duplicates and gaps.
    let n_loc = m.pow(d as u32);
    let n = n_loc * max_t;
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (s, t, v) in rows {
        let mut loc = 0usize;
        for &c in &s {
            loc = loc * m + c;
        }
        let idx = loc * max_t + t;
        if seen[idx] {
            return Err(MaxstabError::Data {
                reason: format!(
                    "{}: duplicate cell s={:?}, t={}",
                    path.display(),
                    s.iter().map(|c| c + 1).collect::<Vec<_>>(),
                    t + 1
                ),
            });
        }
        seen[idx] = true;
        values[idx] = v;
    }
    let n_missing = seen.iter().filter(|&&b| !b).count();
    if n_missing > 0 {
        let mut shown = Vec::new();
        for (idx, &b) in seen.iter().enumerate() {
            if b {
                continue;
            }
            let (mut loc, t) = (idx / max_t, idx % max_t);
            let mut coords = vec![0usize; d];
            for j in (0..d).rev() {
                coords[j] = loc % m + 1;
                loc /= m;
            }
            shown.push(format!("s={coords:?}, t={}", t + 1));
            if shown.len() == MAX_MISSING_SHOWN {
                break;
            }
        }
        return Err(MaxstabError::IncompleteLattice { n_missing, shown });
    }
    ObsCube::new(d, m, max_t, margin, values)
}

fn parse_margin_line(line: &str) -> Option<Margin> {
    let rest = line.strip_prefix('#')?.trim().strip_prefix("margin=")?;
    match rest.trim() {
        "raw" => Some(Margin::Raw),
        "gumbel" => Some(Margin::Gumbel),
        "frechet" => Some(Margin::Frechet),
        _ => None,
    }
}

/// Write a cube in the long format accepted by [`read_cube`].
pub fn write_cube(cube: &ObsCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| MaxstabError::Data {
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# margin={}", cube.margin().as_str())?;
    let d = cube.spatial_dim();
    for j in 0..d {
        write!(w, "s{},", j + 1)?;
    }
    writeln!(w, "t,value")?;
    let m = cube.m();
    let t_len = cube.t_len();
    let mut coords = vec![0usize; d];
    for loc in 0..cube.n_locations() {
        let mut rem = loc;
        for j in (0..d).rev() {
            coords[j] = rem % m + 1;
            rem /= m;
        }
        for t in 0..t_len {
            for c in &coords {
                write!(w, "{c},")?;
            }
            writeln!(w, "{},{}", t + 1, cube.values()[loc * t_len + t])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialize a report as pretty JSON with the `"schema"` tag injected at
/// the top level. Key order is deterministic, so identical runs produce
/// byte-identical files.
pub fn write_report<T: Serialize>(obj: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = report_json(obj)?;
    let file = File::create(path).map_err(|e| MaxstabError::Data {
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &json)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// The JSON value that [`write_report`] emits.
pub fn report_json<T: Serialize>(obj: &T) -> Result<serde_json::Value> {
    let mut value = serde_json::to_value(obj)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("schema".into(), serde_json::Value::String(SCHEMA.into()));
        }
        None => {
            return Err(MaxstabError::InvalidInput {
                reason: "reports must serialize to JSON objects".into(),
            });
        }
    }
    Ok(value)
}

/// Write aligned numeric columns as CSV. All columns must share one
/// length; zero-length columns produce a header-only file.
pub fn write_table(path: impl AsRef<Path>, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let path = path.as_ref();
    if headers.len() != columns.len() {
        return Err(MaxstabError::InvalidInput {
            reason: format!("{} headers for {} columns", headers.len(), columns.len()),
        });
    }
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(MaxstabError::InvalidInput {
            reason: "table columns have unequal lengths".into(),
        });
    }
    let file = File::create(path).map_err(|e| MaxstabError::Data {
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", headers.join(","))?;
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::DepParams;
    use crate::simulate::{simulate_grid_cube, SimConfig, SimMethod};
    use std::fs;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("maxstab-io-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn hand_written_cube_round_trips() {
        let p = tmp("hand.csv");
        fs::write(
            &p,
            "# margin=gumbel\n\
             s1,s2,t,value\n\
             1,1,1,0.5\n1,1,2,-0.25\n1,2,1,3.0\n1,2,2,4.5\n\
             2,1,1,-1.0\n2,1,2,2.0\n2,2,1,0.125\n2,2,2,7.0\n",
        )
        .unwrap();
        let cube = read_cube(&p).unwrap();
        assert_eq!(cube.spatial_dim(), 2);
        assert_eq!(cube.m(), 2);
        assert_eq!(cube.t_len(), 2);
        assert_eq!(cube.margin(), Margin::Gumbel);
        assert_eq!(cube.value(&[0, 1], 1), 4.5);
        // Row order in the file does not matter.
        let p2 = tmp("hand_shuffled.csv");
        fs::write(
            &p2,
            "# margin=gumbel\n\
             s1,s2,t,value\n\
             2,2,2,7.0\n1,1,1,0.5\n2,1,2,2.0\n1,2,2,4.5\n\
             1,1,2,-0.25\n2,2,1,0.125\n1,2,1,3.0\n2,1,1,-1.0\n",
        )
        .unwrap();
        assert_eq!(read_cube(&p2).unwrap(), cube);
        // Write then read: identical cube.
        let p3 = tmp("hand_rewritten.csv");
        write_cube(&cube, &p3).unwrap();
        assert_eq!(read_cube(&p3).unwrap(), cube);
    }

    #[test]
    fn missing_and_duplicate_cells_are_rejected() {
        let p = tmp("missing.csv");
        fs::write(
            &p,
            "# margin=raw\ns1,t,value\n1,1,1.0\n1,2,2.0\n2,1,3.0\n",
        )
        .unwrap();
        match read_cube(&p) {
            Err(MaxstabError::IncompleteLattice { n_missing, shown }) => {
                assert_eq!(n_missing, 1);
                assert_eq!(shown.len(), 1);
                assert!(shown[0].contains("t=2"), "{shown:?}");
            }
            other => panic!("expected IncompleteLattice, got {other:?}"),
        }
        let p = tmp("dup.csv");
        fs::write(
            &p,
            "# margin=raw\ns1,t,value\n1,1,1.0\n1,1,2.0\n2,1,3.0\n2,2,1.0\n1,2,5.0\n",
        )
        .unwrap();
        assert!(matches!(read_cube(&p), Err(MaxstabError::Data { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let p = tmp("badval.csv");
        fs::write(&p, "# margin=raw\ns1,t,value\n1,1,1.0\n1,2,oops\n").unwrap();
        match read_cube(&p) {
            Err(MaxstabError::Data { reason }) => assert!(reason.contains(":4:"), "{reason}"),
            other => panic!("expected Data error, got {other:?}"),
        }
        let p = tmp("badmargin.csv");
        fs::write(&p, "margin=raw\ns1,t,value\n1,1,1.0\n").unwrap();
        assert!(matches!(read_cube(&p), Err(MaxstabError::Data { .. })));
        let p = tmp("badheader.csv");
        fs::write(&p, "# margin=raw\nx,t,value\n1,1,1.0\n").unwrap();
        match read_cube(&p) {
            Err(MaxstabError::Data { reason }) => assert!(reason.contains("expected 's1'"), "{reason}"),
            other => panic!("expected Data error, got {other:?}"),
        }
        let p = tmp("zerocoord.csv");
        fs::write(&p, "# margin=raw\ns1,t,value\n0,1,1.0\n1,1,1.0\n").unwrap();
        assert!(matches!(read_cube(&p), Err(MaxstabError::Data { .. })));
    }

    #[test]
    fn simulated_cube_survives_a_round_trip_bit_for_bit() {
        let params = DepParams::new(vec![0.6, 0.75, 4.8], vec![0.95, 0.95, 0.2]).unwrap();
        let cfg = SimConfig {
            method: SimMethod::TruncatedSpectral,
            n_poisson_max: 300,
            seed: 42,
            replicates: 1,
        };
        let cube = simulate_grid_cube(&params, 3, 8, &cfg).unwrap().pop().unwrap();
        let p = tmp("sim.csv");
        write_cube(&cube, &p).unwrap();
        let back = read_cube(&p).unwrap();
        // Shortest round-trip float formatting: bitwise equality.
        assert_eq!(cube, back);
        // And a second write is byte-identical.
        let p2 = tmp("sim2.csv");
        write_cube(&back, &p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn reports_carry_schema_and_round_trip() {
        #[derive(Serialize)]
        struct Demo {
            a: f64,
            b: Vec<u32>,
        }
        let p = tmp("demo.json");
        write_report(&Demo { a: 1.5, b: vec![1, 2] }, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["a"], 1.5);
        assert_eq!(v["b"][1], 2);
        // Equal runs produce byte-identical files.
        let p2 = tmp("demo2.json");
        write_report(&Demo { a: 1.5, b: vec![1, 2] }, &p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        // Non-object payloads are refused (nowhere to put the tag).
        assert!(report_json(&vec![1, 2, 3]).is_err());
    }

    #[test]
    fn tables_handle_empty_and_mismatched_columns() {
        let p = tmp("empty.csv");
        write_table(&p, &["q", "obs"], &[&[], &[]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "q,obs\n");
        let p = tmp("tab.csv");
        write_table(&p, &["x", "y"], &[&[1.0, 2.5], &[3.0, -0.5]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x,y\n1,3\n2.5,-0.5\n");
        assert!(write_table(&p, &["x"], &[&[1.0], &[2.0]]).is_err());
        assert!(write_table(&p, &["x", "y"], &[&[1.0], &[2.0, 3.0]]).is_err());
    }
}
