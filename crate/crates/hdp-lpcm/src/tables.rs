//! Plain comma-separated tables with a header row. Indices in every table
//! are one-based; floats use the shortest representation that reads back
//! exactly.

use std::path::Path;

use hdp_lpcm_core::{LabelSequences, LatentPositions};

use crate::error::{Error, Result};

/// A table under construction.
#[derive(Debug)]
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("writing to memory")
    }
}

/// Exact decimal text of a float, switching to exponent form for very large
/// or small magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn labels_table(labels: &LabelSequences) -> Vec<u8> {
    let mut table = Table::new(&["t", "actor", "group"]);
    for t in 0..labels.n_times() {
        for i in 0..labels.n_actors() {
            table.row([(t + 1).to_string(), (i + 1).to_string(), (labels.get(t, i) + 1).to_string()]);
        }
    }
    table.into_bytes()
}

pub fn coordinate_header(first: &[&str], dim: usize) -> Vec<String> {
    first.iter().map(|s| s.to_string()).chain((1..=dim).map(|d| format!("x{d}"))).collect()
}

pub fn positions_table(positions: &LatentPositions) -> Vec<u8> {
    let header = coordinate_header(&["t", "actor"], positions.dim());
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for t in 0..positions.n_times() {
        for i in 0..positions.n_actors() {
            let mut row = vec![(t + 1).to_string(), (i + 1).to_string()];
            row.extend(positions.get(t, i).iter().map(|&v| num(v)));
            table.row(row);
        }
    }
    table.into_bytes()
}

/// Reads a `t,actor,group` table into zero-based labels.
pub fn read_labels_table(path: &Path) -> Result<LabelSequences> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse { line, message: format!("{}: expected t,actor,group", path.display()) });
        }
        let mut v = [0usize; 3];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .trim()
                .parse()
                .ok()
                .filter(|&x| x > 0)
                .ok_or_else(|| Error::Parse { line, message: format!("{}: {field:?} is not a positive integer", path.display()) })?;
        }
        entries.push(v.map(|x| x - 1));
    }
    let n_times = entries.iter().map(|e| e[0] + 1).max().unwrap_or(0);
    let n_actors = entries.iter().map(|e| e[1] + 1).max().unwrap_or(0);
    if entries.len() != n_times * n_actors {
        return Err(Error::Input(format!("{}: expected one row per (t, actor) pair", path.display())));
    }
    let mut labels = LabelSequences::constant(n_times, n_actors, usize::MAX);
    for [t, i, g] in entries {
        labels.set(t, i, g);
    }
    if labels.as_slice().contains(&usize::MAX) {
        return Err(Error::Input(format!("{}: duplicate (t, actor) rows", path.display())));
    }
    Ok(labels)
}
