//! Score sets as single-column CSV or JSON arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{ConformalError, Provenance, ScoreSet};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ScoreIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: expected a single numeric column, got '{text}'")]
    Parse { line: usize, text: String },
    #[error(transparent)]
    Scores(#[from] ConformalError),
}

fn open(path: &Path) -> Result<BufReader<File>, ScoreIoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| ScoreIoError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn create(path: &Path) -> Result<BufWriter<File>, ScoreIoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ScoreIoError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Reads one score per row; a non-numeric first row is taken as a header.
pub fn read_scores_csv<T: Scalar, R: Read>(reader: R) -> Result<ScoreSet<T>, ScoreIoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let text = rec.iter().collect::<Vec<_>>().join(",");
        if rec.len() != 1 {
            return Err(ScoreIoError::Parse { line: i + 1, text });
        }
        match rec[0].parse::<T>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(ScoreIoError::Parse { line: i + 1, text }),
        }
    }
    Ok(ScoreSet::new(out, Provenance::External)?)
}

pub fn read_scores_json<T: Scalar, R: Read>(reader: R) -> Result<ScoreSet<T>, ScoreIoError> {
    let v: Vec<T> = serde_json::from_reader(reader)?;
    Ok(ScoreSet::new(v, Provenance::External)?)
}

/// Reads a score file, choosing JSON for a `.json` extension and CSV otherwise.
pub fn read_scores<T: Scalar>(path: &Path) -> Result<ScoreSet<T>, ScoreIoError> {
    let r = open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_scores_json(r)
    } else {
        read_scores_csv(r)
    }
}

pub fn write_scores_csv<T: Scalar, W: Write>(
    scores: &ScoreSet<T>,
    mut w: W,
) -> Result<(), ScoreIoError> {
    let io = |source| ScoreIoError::Io {
        path: "<writer>".into(),
        source,
    };
    writeln!(w, "score").map_err(io)?;
    for s in scores.values() {
        writeln!(w, "{s}").map_err(io)?;
    }
    Ok(())
}

pub fn write_scores_json<T: Scalar, W: Write>(
    scores: &ScoreSet<T>,
    w: W,
) -> Result<(), ScoreIoError> {
    serde_json::to_writer(w, scores.values())?;
    Ok(())
}

/// Writes `bin_lo,bin_hi,count` rows for plotting.
pub fn write_histogram_csv<T: Scalar>(
    scores: &ScoreSet<T>,
    bins: usize,
    path: &Path,
) -> Result<(), ScoreIoError> {
    let h = scores.histogram(bins);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([
            h.edges[i].to_string(),
            h.edges[i + 1].to_string(),
            c.to_string(),
        ])?;
    }
    w.flush().map_err(|source| ScoreIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_header() {
        let a: ScoreSet<f64> = read_scores_csv("score\n1.5\n-2\n\n3e1\n".as_bytes()).unwrap();
        assert_eq!(a.values(), &[1.5, -2.0, 30.0]);
        let b: ScoreSet<f64> = read_scores_csv("1\n2\n".as_bytes()).unwrap();
        assert_eq!(b.values(), &[1.0, 2.0]);
        assert!(matches!(
            read_scores_csv::<f64, _>("1\nx\n".as_bytes()),
            Err(ScoreIoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_scores_csv::<f64, _>("1,2\n".as_bytes()),
            Err(ScoreIoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_scores_csv::<f64, _>("score\n".as_bytes()),
            Err(ScoreIoError::Scores(ConformalError::Empty))
        ));
    }

    #[test]
    fn csv_and_json_agree() {
        let s = ScoreSet::new(vec![0.1f64, -3.25, 7.0], Provenance::External).unwrap();
        let mut c = Vec::new();
        write_scores_csv(&s, &mut c).unwrap();
        let mut j = Vec::new();
        write_scores_json(&s, &mut j).unwrap();
        let from_csv: ScoreSet<f64> = read_scores_csv(c.as_slice()).unwrap();
        let from_json: ScoreSet<f64> = read_scores_json(j.as_slice()).unwrap();
        assert_eq!(from_csv, s);
        assert_eq!(from_json, s);
    }
}
