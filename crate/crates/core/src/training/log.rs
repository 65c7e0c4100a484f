use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One optimisation step of the loss log. Terms a stage does not compute are
/// written as empty fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: usize,
    pub l_hr: Option<f64>,
    pub l_epi: Option<f64>,
    pub total: f64,
    pub lr: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Writes the whole log, replacing any existing file.
pub(crate) fn write_loss_log(path: &Path, records: &[LossRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if records.is_empty() {
        w.write_record(["step", "epoch", "l_hr", "l_epi", "total", "lr"])
            .map_err(|e| csv_err(path, e))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_loss_log(path: &Path) -> Result<Vec<LossRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}
