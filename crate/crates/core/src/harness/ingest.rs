//! Trajectory files.
//!
//! CSV: header `trajectory_id,time_index,x0,...,x{n-1}`, one row per state.
//! JSON: array of `{"trajectory_id": .., "time_index": .., "state": [..]}`.
//! Rows may come in any order; trajectories are returned sorted by id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scalar::Scalar;
use crate::stl::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    Json,
}

impl TrajectoryFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::Json
        } else {
            Self::Csv
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "")]
struct Record<T: Scalar> {
    trajectory_id: String,
    time_index: usize,
    state: Vec<T>,
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn ingest_trajectories<T: Scalar>(
    path: &Path,
    format: Option<TrajectoryFormat>,
) -> Result<Vec<Trajectory<T>>, HarnessError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let r = BufReader::new(f);
    match format.unwrap_or_else(|| TrajectoryFormat::from_path(path)) {
        TrajectoryFormat::Csv => read_trajectories_csv(r),
        TrajectoryFormat::Json => read_trajectories_json(r),
    }
}

pub fn read_trajectories_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<Trajectory<T>>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let ok = header.len() >= 3
        && &header[0] == "trajectory_id"
        && &header[1] == "time_index"
        && header.iter().skip(2).enumerate().all(|(i, h)| h == format!("x{i}"));
    if !ok {
        return Err(HarnessError::Schema(format!(
            "expected header trajectory_id,time_index,x0,..., got '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let cell = |k: usize| -> &str { row.get(k).unwrap_or("") };
        let time_index = cell(1).parse().map_err(|_| HarnessError::Cell {
            line,
            column: "time_index".into(),
            text: cell(1).to_string(),
        })?;
        let state = (2..header.len())
            .map(|k| {
                cell(k).parse::<T>().map_err(|_| HarnessError::Cell {
                    line,
                    column: header[k].to_string(),
                    text: cell(k).to_string(),
                })
            })
            .collect::<Result<Vec<T>, _>>()?;
        records.push(Record {
            trajectory_id: cell(0).to_string(),
            time_index,
            state,
        });
    }
    assemble(records)
}

pub fn read_trajectories_json<T: Scalar, R: Read>(reader: R) -> Result<Vec<Trajectory<T>>, HarnessError> {
    let records: Vec<Record<T>> = serde_json::from_reader(reader)?;
    assemble(records)
}

fn assemble<T: Scalar>(records: Vec<Record<T>>) -> Result<Vec<Trajectory<T>>, HarnessError> {
    let mut groups: BTreeMap<String, BTreeMap<usize, Vec<T>>> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.trajectory_id.clone()).or_default();
        if g.insert(r.time_index, r.state).is_some() {
            return Err(HarnessError::Duplicate {
                id: r.trajectory_id,
                time: r.time_index,
            });
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (id, states) in groups {
        if let Some(tau) = states.keys().enumerate().find(|&(pos, &tau)| pos != tau).map(|(_, &tau)| tau) {
            return Err(HarnessError::Schema(format!(
                "trajectory '{id}' has a gap before time index {tau}"
            )));
        }
        let x = Trajectory::new(states.into_values().collect())
            .map_err(|e| HarnessError::Schema(format!("trajectory '{id}': {e}")))?;
        out.push(x.with_id(id));
    }
    if let Some(first) = out.first() {
        if let Some(x) = out.iter().find(|x| x.len() != first.len() || x.dim() != first.dim()) {
            return Err(HarnessError::Ragged {
                id: x.id().unwrap_or_default().to_string(),
                len: x.len(),
                dim: x.dim(),
                expected_len: first.len(),
                expected_dim: first.dim(),
            });
        }
    }
    Ok(out)
}

fn id_or_index<T: Scalar>(x: &Trajectory<T>, i: usize) -> String {
    x.id().map_or_else(|| i.to_string(), str::to_string)
}

pub fn write_trajectories_csv<T: Scalar, W: Write>(xs: &[Trajectory<T>], w: W) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(w);
    let dim = xs.first().map_or(0, Trajectory::dim);
    let mut header = vec!["trajectory_id".to_string(), "time_index".to_string()];
    header.extend((0..dim).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    for (i, x) in xs.iter().enumerate() {
        let id = id_or_index(x, i);
        for (tau, s) in x.states().enumerate() {
            let mut row = vec![id.clone(), tau.to_string()];
            row.extend(s.iter().map(ToString::to_string));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| io_err(Path::new("<writer>"), e))?;
    Ok(())
}

pub fn write_trajectories_json<T: Scalar, W: Write>(xs: &[Trajectory<T>], w: W) -> Result<(), HarnessError> {
    let records: Vec<Record<T>> = xs
        .iter()
        .enumerate()
        .flat_map(|(i, x)| {
            let id = id_or_index(x, i);
            x.states()
                .enumerate()
                .map(move |(tau, s)| Record {
                    trajectory_id: id.clone(),
                    time_index: tau,
                    state: s.to_vec(),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    serde_json::to_writer(w, &records)?;
    Ok(())
}

/// Writes trajectories, choosing the format from the extension.
pub fn write_trajectories<T: Scalar>(xs: &[Trajectory<T>], path: &Path) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let w = BufWriter::new(f);
    match TrajectoryFormat::from_path(path) {
        TrajectoryFormat::Csv => write_trajectories_csv(xs, w),
        TrajectoryFormat::Json => write_trajectories_json(xs, w),
    }
}
