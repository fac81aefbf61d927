use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use viewfuse::learn::ScoreVector;
use viewfuse::tensorio::{read_frame_any, read_tensor, SequenceMeta, VideoSequence};
use viewfuse::{Error, Result};

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

/// A video is either a directory of PGM/PPM frames (taken in file-name
/// order) or an RPT1 tensor of shape `[n, h, w]` or `[n, c, h, w]`.
pub fn load_video(path: &Path) -> Result<VideoSequence> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")));
        files.sort();
        if files.is_empty() {
            return Err(invalid(format!("{} holds no .pgm or .ppm frames", path.display())));
        }
        let frames = files.iter().map(read_frame_any).collect::<Result<Vec<_>>>()?;
        VideoSequence::new(frames, SequenceMeta::default())
    } else {
        let t = read_tensor(path)?;
        let meta = t.sequence_meta().unwrap_or_default();
        VideoSequence::new(t.to_frames()?, meta)
    }
}

/// Sibling file `<stem>.config.json` next to an output path.
pub fn config_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.config.json"))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// One row of a scores file: sequence id, true class and class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub seq_id: String,
    pub label: usize,
    pub scores: ScoreVector,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => invalid(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let c = rows.first().map_or(0, |r| r.scores.len());
    let header = ["seq_id".to_string(), "label".to_string()]
        .into_iter()
        .chain((0..c).map(|k| format!("p{k}")));
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let record = [r.seq_id.clone(), r.label.to_string()]
            .into_iter()
            .chain(r.scores.scores.iter().map(|p| p.to_string()));
        w.write_record(record).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "seq_id" || &header[1] != "label" {
        return Err(invalid(format!(
            "{}: header must be seq_id,label,p0,...",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| invalid(format!("{} row {}: {what}", path.display(), i + 1));
        let label = record[1]
            .trim()
            .parse()
            .map_err(|_| bad("label is not a class index"))?;
        let scores = record
            .iter()
            .skip(2)
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad("score is not a number")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ScoreRow {
            seq_id: record[0].trim().to_string(),
            label,
            scores: ScoreVector::new(scores),
        });
    }
    if rows.is_empty() {
        return Err(invalid(format!("{}: no score rows", path.display())));
    }
    Ok(rows)
}

/// Reads several score files and checks they list the same sequences in
/// the same order with the same labels.
pub fn read_aligned_scores(paths: &[PathBuf]) -> Result<Vec<Vec<ScoreRow>>> {
    let tables = paths.iter().map(|p| read_scores(p)).collect::<Result<Vec<_>>>()?;
    let first = tables
        .first()
        .ok_or_else(|| invalid("at least one --scores file is required"))?;
    for (t, path) in tables.iter().zip(paths).skip(1) {
        let same = t.len() == first.len()
            && t.iter()
                .zip(first)
                .all(|(a, b)| a.seq_id == b.seq_id && a.label == b.label);
        if !same {
            return Err(Error::Shape(format!(
                "{} does not list the same sequences and labels as {}",
                path.display(),
                paths[0].display()
            )));
        }
    }
    Ok(tables)
}

/// Overrides labels from a manifest, keyed by sequence id.
pub fn labels_from_manifest(rows: &[ScoreRow], classes: &BTreeMap<String, usize>) -> Result<Vec<usize>> {
    rows.iter()
        .map(|r| {
            classes
                .get(&r.seq_id)
                .copied()
                .ok_or_else(|| invalid(format!("sequence {} is not in the labels manifest", r.seq_id)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip() {
        let rows = vec![
            ScoreRow {
                seq_id: "a".into(),
                label: 1,
                scores: ScoreVector::new(vec![0.1, 0.9]),
            },
            ScoreRow {
                seq_id: "b".into(),
                label: 0,
                scores: ScoreVector::new(vec![1.0 / 3.0, 2.0 / 3.0]),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scores(&p, &rows).unwrap();
        assert_eq!(read_scores(&p).unwrap(), rows);
    }

    #[test]
    fn config_path_sits_beside_output() {
        assert_eq!(
            config_path(Path::new("out/report.json")),
            PathBuf::from("out/report.config.json")
        );
        assert_eq!(config_path(Path::new("corpus")), PathBuf::from("corpus.config.json"));
    }
}
