//! Series ingestion, train/validation/test splits and mean normalization.

use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::NodeSignalSeries;
use crate::error::{Error, Result};
use crate::harness::synth::SyntheticSpec;

/// Reads a series CSV: a header row of node labels, then one numeric row per time step.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<NodeSignalSeries> {
    read_series(File::open(path)?)
}

pub fn read_series<R: Read>(r: R) -> Result<NodeSignalSeries> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let labels: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if labels.is_empty() || (labels.len() == 1 && labels[0].is_empty()) {
        return Err(Error::EmptyInput("series file has no header".into()));
    }
    let n = labels.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        if rec.len() != n {
            return Err(Error::RaggedRow {
                row,
                expected: n,
                found: rec.len(),
            });
        }
        for (column, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                column,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column });
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("series file has no data rows".into()));
    }
    NodeSignalSeries::new(DMatrix::from_row_slice(rows, n, &data))?.with_labels(labels)
}

/// Writes the series with a header of labels (`n0, n1, ...` when unlabeled).
pub fn write_series<W: Write>(series: &NodeSignalSeries, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let header: Vec<String> = match series.labels() {
        Some(l) => l.to_vec(),
        None => (0..series.node_count()).map(|i| format!("n{i}")).collect(),
    };
    wr.write_record(&header)?;
    for t in 0..series.len() {
        wr.write_record(series.values().row(t).iter().map(|v| format!("{v:?}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// Zero-based, half-open time ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    /// Steps 1-40 train, 41-60 validation, the rest test.
    pub fn short_series(len: usize) -> Self {
        Splits {
            train: 0..40,
            validation: 40..60,
            test: 60..len,
        }
    }

    /// Steps 1-200 train, 201-400 validation, the rest test.
    pub fn long_series(len: usize) -> Self {
        Splits {
            train: 0..200,
            validation: 200..400,
            test: 400..len,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        let ok = !self.train.is_empty()
            && !self.test.is_empty()
            && self.train.start <= self.train.end
            && self.train.end <= self.validation.start
            && self.validation.start <= self.validation.end
            && self.validation.end <= self.test.start
            && self.test.end <= len;
        if !ok {
            return Err(Error::Config(format!(
                "splits {:?}/{:?}/{:?} must be non-empty, ordered, disjoint and within {len} steps",
                self.train, self.validation, self.test
            )));
        }
        Ok(())
    }
}

/// Divides each node by its train-split mean. Nodes with a zero mean pass through unscaled.
pub fn normalize_by_train_mean(series: &NodeSignalSeries, splits: &Splits) -> Result<NodeSignalSeries> {
    let train = &splits.train;
    if train.is_empty() || train.end > series.len() {
        return Err(Error::Config(format!("train split {train:?} is empty or exceeds the series")));
    }
    let mut values = series.values().clone();
    for i in 0..series.node_count() {
        let mean = values.column(i).rows_range(train.clone()).mean();
        if mean == 0.0 {
            warn!("node {i} has zero train mean; left unnormalized");
            continue;
        }
        values.column_mut(i).unscale_mut(mean);
    }
    let out = NodeSignalSeries::new(values)?;
    match series.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub source: DataSource,
    /// Defaults to the short-series layout.
    #[serde(default)]
    pub splits: Option<Splits>,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}
