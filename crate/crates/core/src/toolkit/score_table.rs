//! Score tables: CSV rows of anchor scores behind a `#`-prefixed JSON
//! metadata line.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{classify, QuadrantPartition, Thresholds};
use crate::criteria::{AnchorScore, Quadrant};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMetadata {
    pub model_checksum: String,
    pub anchor_count: usize,
    pub thresholds: Option<Thresholds>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub metadata: TableMetadata,
    pub rows: Vec<AnchorScore>,
}

/// Hex SHA-256 of a byte string, used to tie tables to the model file.
pub fn checksum(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl ScoreTable {
    pub fn new(model_checksum: String, rows: Vec<AnchorScore>, config: serde_json::Value) -> Result<Self> {
        let table = Self {
            metadata: TableMetadata { model_checksum, anchor_count: rows.len(), thresholds: None, config },
            rows,
        };
        table.check()?;
        Ok(table)
    }

    /// Stores the thresholds and relabels every row from them.
    pub fn apply_thresholds(&mut self, thresholds: Thresholds) -> Result<QuadrantPartition> {
        let partition = classify(&mut self.rows, &thresholds)?;
        self.metadata.thresholds = Some(thresholds);
        Ok(partition)
    }

    pub fn partition(&self) -> Result<QuadrantPartition> {
        if self.metadata.thresholds.is_none() {
            return Err(invalid("score table has not been classified"));
        }
        QuadrantPartition::from_labels(&self.rows)
    }

    /// Row count, ids, anchor values and quadrant labels must all agree
    /// with the metadata.
    pub fn check(&self) -> Result<()> {
        if self.rows.len() != self.metadata.anchor_count {
            return Err(invalid(format!(
                "table has {} rows but metadata records {} anchors",
                self.rows.len(),
                self.metadata.anchor_count
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.anchor_id != i {
                return Err(invalid(format!("row {i} carries anchor id {}", row.anchor_id)));
            }
            let rebuilt = AnchorScore::new(i, row.intrinsic, row.extrinsic)?;
            if rebuilt.anchor_value != row.anchor_value {
                return Err(invalid(format!("row {i}: anchor value is not intrinsic + extrinsic")));
            }
            let expected = match &self.metadata.thresholds {
                Some(t) => t.quadrant_of(row),
                None => Quadrant::Unset,
            };
            if row.quadrant != expected {
                return Err(invalid(format!(
                    "row {i}: quadrant {} disagrees with stored thresholds ({expected})",
                    row.quadrant
                )));
            }
        }
        Ok(())
    }

    pub fn to_writer(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.metadata)?)?;
        let mut csv = csv::Writer::from_writer(out);
        for row in &self.rows {
            csv.serialize(row).map_err(csv_error)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.to_writer(&mut out)?;
        Ok(out)
    }

    pub fn from_reader(input: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format { offset: 0, message: "missing '# ' metadata line".into() })?;
        let metadata: TableMetadata = serde_json::from_str(json.trim_end())?;
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<Vec<AnchorScore>, _>>()
            .map_err(csv_error)?;
        let table = Self { metadata, rows };
        table.check()?;
        Ok(table)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format { offset, message: format!("{other:?}") },
    }
}
