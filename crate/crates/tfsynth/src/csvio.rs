//! Per-video trajectory CSVs with a JSON metadata sidecar.
//!
//! `<stem>.csv` has the header `frame,<features...>,<labels...>` and one row
//! per frame; `<stem>.json` names the video, its frame rate, paired features
//! and which columns are labels.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tfsynth_core::data::TrajectoryTable;
use tfsynth_core::dsl::FeatureSpace;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub video_id: String,
    pub fps: u32,
    /// Pairs of feature names measured on each of two animals.
    #[serde(default)]
    pub feature_pairs: Vec<[String; 2]>,
    pub label_columns: Vec<String>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))
}

/// Reads `path` and its sidecar into a validated table.
pub fn ingest_csv(path: &Path) -> Result<TrajectoryTable> {
    let meta = read_sidecar(&sidecar_path(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::input(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("frame") {
        return Err(CliError::input(path, "missing header: first column must be `frame`"));
    }
    let mut label_cols = Vec::new();
    for name in &meta.label_columns {
        match header.iter().position(|h| h == name) {
            Some(i) => label_cols.push(i),
            None => return Err(CliError::input(path, format!("missing header: label column `{name}`"))),
        }
    }
    let feature_cols: Vec<usize> = (1..header.len()).filter(|i| !label_cols.contains(i)).collect();
    if feature_cols.is_empty() {
        return Err(CliError::input(path, "no feature columns"));
    }
    let names: Vec<String> = feature_cols.iter().map(|&i| header[i].clone()).collect();
    let mut pairs = Vec::new();
    for [a, b] in &meta.feature_pairs {
        let find = |n: &str| {
            names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| CliError::input(path, format!("paired feature `{n}` is not a column")))
        };
        pairs.push([find(a)?, find(b)?]);
    }

    let mut values = Vec::new();
    let mut labels: Vec<Vec<bool>> = vec![Vec::new(); label_cols.len()];
    for (r, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = r + 2;
        let record = record.map_err(|e| CliError::input(path, format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::input(
                path,
                format!("row {row}: {} cells, header has {}", record.len(), header.len()),
            ));
        }
        let frame: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| CliError::input(path, format!("row {row}, column `frame`: not a frame index")))?;
        if frame != r {
            return Err(CliError::input(path, format!("row {row}, column `frame`: expected {r}, found {frame}")));
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(path, format!("row {row}, column `{}`: non-numeric value `{cell}`", header[c]))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(path, format!("row {row}, column `{}`: missing value", header[c])));
            }
            values.push(v);
        }
        for (k, &c) in label_cols.iter().enumerate() {
            let l = match record[c].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(CliError::input(
                        path,
                        format!("row {row}, column `{}`: label `{other}` is not 0 or 1", header[c]),
                    ))
                }
            };
            labels[k].push(l);
        }
    }
    let features = FeatureSpace::new(names).with_pairs(pairs);
    TrajectoryTable::new(meta.video_id, meta.fps, features, values, meta.label_columns, labels)
        .map_err(|e| CliError::input(path, e.to_string()))
}

/// Writes `<dir>/<video_id>.csv` and its sidecar; returns the CSV path.
pub fn export_csv(table: &TrajectoryTable, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(format!("{}.csv", table.video_id));
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::input(&path, e.to_string()))?;
    let ioerr = |e: csv::Error| CliError::input(&path, e.to_string());
    let mut header = vec!["frame".to_string()];
    header.extend(table.features.names.iter().cloned());
    header.extend(table.label_names.iter().cloned());
    w.write_record(&header).map_err(ioerr)?;
    for i in 0..table.frames() {
        let mut rec = vec![i.to_string()];
        // `Display` for f64 prints the shortest string that reads back exactly.
        rec.extend(table.row(i).iter().map(|v| v.to_string()));
        rec.extend(table.labels.iter().map(|c| if c[i] { "1" } else { "0" }.to_string()));
        w.write_record(&rec).map_err(ioerr)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let names = &table.features.names;
    let meta = Sidecar {
        video_id: table.video_id.clone(),
        fps: table.fps,
        feature_pairs: table
            .features
            .pairs
            .iter()
            .map(|[a, b]| [names[*a].clone(), names[*b].clone()])
            .collect(),
        label_columns: table.label_names.clone(),
    };
    crate::write_json(&sidecar_path(&path), &meta)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, csv: &str, sidecar: &str) -> PathBuf {
        let p = dir.join("v.csv");
        fs::write(&p, csv).unwrap();
        fs::write(dir.join("v.json"), sidecar).unwrap();
        p
    }

    const META: &str = r#"{"video_id":"v","fps":30,"feature_pairs":[["a_res","a_int"]],"label_columns":["attack"]}"#;

    #[test]
    fn two_rows() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "frame,a_res,a_int,attack\n0,1.5,2,0\n1,-3,4e-3,1\n", META);
        let t = ingest_csv(&p).unwrap();
        assert_eq!(t.frames(), 2);
        assert_eq!(t.features.names, ["a_res", "a_int"]);
        assert_eq!(t.features.pairs, [[0, 1]]);
        assert_eq!(t.row(1), [-3.0, 4e-3]);
        assert_eq!(t.labels, [vec![false, true]]);
    }

    #[test]
    fn errors_name_row_and_column() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "frame,a_res,a_int,attack\n0,1,2,0\n1,3,4,2\n", META);
        let e = ingest_csv(&p).unwrap_err().to_string();
        assert!(e.contains("row 3") && e.contains("attack"), "{e}");

        let p = write(d.path(), "frame,a_res,a_int,attack\n0,1,x,0\n", META);
        let e = ingest_csv(&p).unwrap_err().to_string();
        assert!(e.contains("row 2") && e.contains("a_int") && e.contains("non-numeric"), "{e}");

        let p = write(d.path(), "frame,a_res,a_int,attack\n0,1,,0\n", META);
        assert!(ingest_csv(&p).unwrap_err().to_string().contains("a_int"));

        let p = write(d.path(), "a_res,a_int,attack\n1,2,0\n", META);
        assert!(ingest_csv(&p).unwrap_err().to_string().contains("missing header"));

        let p = write(d.path(), "frame,a_res,a_int\n0,1,2\n", META);
        assert!(ingest_csv(&p).unwrap_err().to_string().contains("missing header"));
        assert_eq!(ingest_csv(&p).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn round_trip_is_exact() {
        let d = tempfile::tempdir().unwrap();
        let vals = vec![0.1, -1e-300, 12345.678901234567, f64::MIN_POSITIVE, 1.0 / 3.0, -0.0];
        let t = TrajectoryTable::new(
            "clip",
            30,
            FeatureSpace::new(vec!["x".into(), "y".into()]).with_pairs(vec![[0, 1]]),
            vals,
            vec!["a".into(), "b".into()],
            vec![vec![true, false, true], vec![false, false, true]],
        )
        .unwrap();
        let p = export_csv(&t, d.path()).unwrap();
        let back = ingest_csv(&p).unwrap();
        assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), t.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back, t);
    }
}
