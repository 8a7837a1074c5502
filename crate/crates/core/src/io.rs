//! File formats: model JSON, JSONL trajectories and datasets, CSV reports.
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{LowRankMDP, Trajectory};
use crate::oracles::{Transition, TransitionDataset};

/// Version stamped into every JSON document and CSV header.
pub const SCHEMA_VERSION: u32 = 1;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn save_model(path: &Path, model: &LowRankMDP) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<LowRankMDP> {
    read_json(path)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, &item)?;
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// One episode per line.
pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    write_jsonl(path, trajectories)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    read_jsonl(path)
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    h: usize,
    x: usize,
    a: usize,
    xp: usize,
}

/// One `{h, x, a, xp}` triple per line, levels in order.
pub fn write_dataset(path: &Path, data: &TransitionDataset) -> Result<()> {
    let lines = data
        .levels
        .iter()
        .enumerate()
        .flat_map(|(h, l)| l.iter().map(move |t| DatasetLine { h, x: t.x, a: t.a, xp: t.xp }));
    write_jsonl(path, lines)
}

/// Reads a dataset; the number of levels is `max h + 1` unless `horizon` is
/// given, in which case larger tags are rejected.
pub fn read_dataset(path: &Path, horizon: Option<usize>) -> Result<TransitionDataset> {
    let lines: Vec<DatasetLine> = read_jsonl(path)?;
    let levels = horizon.unwrap_or_else(|| lines.iter().map(|l| l.h + 1).max().unwrap_or(0));
    let mut data = TransitionDataset::with_horizon(levels);
    for l in lines {
        if l.h >= levels {
            return Err(Error::InvalidArgument(format!("level tag {} outside [0, {levels})", l.h)));
        }
        data.levels[l.h].push(Transition { x: l.x, a: l.a, xp: l.xp });
    }
    Ok(data)
}

/// CSV with a leading `# lowrank <name> v<SCHEMA_VERSION>` comment line.
pub fn csv_bytes<T: Serialize>(name: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    writeln!(bytes, "# lowrank {name} v{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(bytes);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_csv<T: Serialize>(path: &Path, name: &str, rows: &[T]) -> Result<()> {
    write_atomic(path, &csv_bytes(name, rows)?)
}

/// Reads a CSV written by [`write_csv`], skipping the schema line.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}
