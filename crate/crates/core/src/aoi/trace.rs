use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One feature: generated at slot `generated`, delivered at slot `delivered`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub generated: u64,
    pub delivered: u64,
}

/// Generation and delivery slots of every feature, per source.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryTrace {
    sources: Vec<Vec<Delivery>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TraceRow {
    source_id: usize,
    #[serde(rename = "G")]
    generated: u64,
    #[serde(rename = "D")]
    delivered: u64,
}

impl DeliveryTrace {
    /// Generation times must be non-decreasing within a source and no
    /// feature may arrive before it was generated.
    pub fn new(sources: Vec<Vec<Delivery>>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidTrace("trace has no sources".into()));
        }
        for (l, deliveries) in sources.iter().enumerate() {
            for (i, d) in deliveries.iter().enumerate() {
                if d.delivered < d.generated {
                    return Err(Error::InvalidTrace(format!(
                        "source {}: feature {i} delivered at {} before generation at {}",
                        l + 1,
                        d.delivered,
                        d.generated
                    )));
                }
                if i > 0 && deliveries[i - 1].generated > d.generated {
                    return Err(Error::InvalidTrace(format!(
                        "source {}: generation times decrease at feature {i}",
                        l + 1
                    )));
                }
            }
        }
        Ok(Self { sources })
    }

    /// Single-source trace from parallel generation and delivery lists.
    pub fn single(generated: &[u64], delivered: &[u64]) -> Result<Self> {
        if generated.len() != delivered.len() {
            return Err(Error::DimensionMismatch {
                expected: generated.len(),
                found: delivered.len(),
            });
        }
        let d = generated
            .iter()
            .zip(delivered)
            .map(|(&g, &d)| Delivery {
                generated: g,
                delivered: d,
            })
            .collect();
        Self::new(vec![d])
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn deliveries(&self, source: usize) -> &[Delivery] {
        &self.sources[source]
    }

    /// Reads `source_id,G,D` rows; ids are one-based and the source count is
    /// the largest id.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut sources: Vec<Vec<Delivery>> = Vec::new();
        for row in rdr.deserialize() {
            let row: TraceRow = row?;
            if row.source_id == 0 {
                return Err(Error::InvalidTrace("source ids start at 1".into()));
            }
            if sources.len() < row.source_id {
                sources.resize(row.source_id, Vec::new());
            }
            sources[row.source_id - 1].push(Delivery {
                generated: row.generated,
                delivered: row.delivered,
            });
        }
        Self::new(sources)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (l, deliveries) in self.sources.iter().enumerate() {
            for d in deliveries {
                w.serialize(TraceRow {
                    source_id: l + 1,
                    generated: d.generated,
                    delivered: d.delivered,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
