use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aoi::AgeVector;
use crate::error::{Error, Result};
use crate::loss::OutcomeSpace;

/// One training entry: features, their ages, and the target at slot `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub t: i64,
    pub features: Vec<String>,
    pub ages: Vec<usize>,
    pub target: String,
}

impl Record {
    pub fn age_vector(&self) -> AgeVector {
        AgeVector::new(self.ages.clone())
    }
}

/// Time-indexed rows with declared (or inferred) outcome spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
    feature_spaces: Vec<OutcomeSpace>,
    target_space: OutcomeSpace,
    /// Free-form provenance, e.g. quantizer edges.
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl Dataset {
    /// Spaces left as `None` are inferred from the values present: sorted
    /// unique labels, with numeric levels for an all-numeric target.
    pub fn new(
        records: Vec<Record>,
        feature_spaces: Option<Vec<OutcomeSpace>>,
        target_space: Option<OutcomeSpace>,
    ) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::InvalidDataset("no rows".into()));
        };
        let m = first.features.len();
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != m || r.ages.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features and {} ages, expected {m}",
                    r.features.len(),
                    r.ages.len()
                )));
            }
            if i > 0 && records[i - 1].t >= r.t {
                return Err(Error::InvalidDataset(format!(
                    "t not strictly increasing at row {i}"
                )));
            }
        }
        let feature_spaces = match feature_spaces {
            Some(s) => s,
            None => (0..m)
                .map(|l| infer_categorical(records.iter().map(|r| r.features[l].as_str())))
                .collect::<Result<_>>()?,
        };
        if feature_spaces.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: feature_spaces.len(),
            });
        }
        let target_space = match target_space {
            Some(s) => s,
            None => infer_target(records.iter().map(|r| r.target.as_str()))?,
        };
        for (i, r) in records.iter().enumerate() {
            for (l, x) in r.features.iter().enumerate() {
                if feature_spaces[l].position(x).is_none() {
                    return Err(Error::InvalidDataset(format!(
                        "row {i}: x_{} value {x:?} outside declared space",
                        l + 1
                    )));
                }
            }
            if target_space.position(&r.target).is_none() {
                return Err(Error::InvalidDataset(format!(
                    "row {i}: y value {:?} outside declared space",
                    r.target
                )));
            }
        }
        Ok(Self {
            records,
            feature_spaces,
            target_space,
            metadata: BTreeMap::new(),
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_sources(&self) -> usize {
        self.feature_spaces.len()
    }

    pub fn feature_space(&self, source: usize) -> &OutcomeSpace {
        &self.feature_spaces[source]
    }

    pub fn feature_spaces(&self) -> &[OutcomeSpace] {
        &self.feature_spaces
    }

    pub fn target_space(&self) -> &OutcomeSpace {
        &self.target_space
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Re-validates the rows against new spaces.
    pub fn with_spaces(
        self,
        feature_spaces: Vec<OutcomeSpace>,
        target_space: OutcomeSpace,
    ) -> Result<Self> {
        let metadata = self.metadata;
        let mut d = Self::new(self.records, Some(feature_spaces), Some(target_space))?;
        d.metadata = metadata;
        Ok(d)
    }

    /// Reads `t,x_1..x_m,age_1..age_m,y` with spaces inferred.
    pub fn from_csv_reader<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let records = read_records(reader, delimiter)?;
        Self::new(records, None, None)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, b',')
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header(self.num_sources()))?;
        for r in &self.records {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.features.iter().cloned());
            rec.extend(r.ages.iter().map(|a| a.to_string()));
            rec.push(r.target.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|l| format!("x_{l}")));
    h.extend((1..=m).map(|l| format!("age_{l}")));
    h.push("y".into());
    h
}

/// Parses rows without building spaces; used before quantization, when
/// columns may still hold raw numbers.
pub fn read_records<R: Read>(reader: R, delimiter: u8) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if cols.len() < 4 || (cols.len() - 2) % 2 != 0 {
        return Err(Error::InvalidDataset(format!("unexpected header {cols:?}")));
    }
    let m = (cols.len() - 2) / 2;
    if cols != header(m) {
        return Err(Error::InvalidDataset(format!(
            "header must be {}, found {}",
            header(m).join(","),
            cols.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let int = |s: &str, what: &str| -> Result<i64> {
            s.parse().map_err(|_| {
                Error::InvalidDataset(format!("row {i}: {what} {s:?} is not an integer"))
            })
        };
        let t = int(&rec[0], "t")?;
        let features = (1..=m).map(|c| rec[c].to_string()).collect();
        let ages = (m + 1..=2 * m)
            .map(|c| {
                let a = int(&rec[c], "age")?;
                usize::try_from(a)
                    .map_err(|_| Error::InvalidDataset(format!("row {i}: negative age {a}")))
            })
            .collect::<Result<_>>()?;
        out.push(Record {
            t,
            features,
            ages,
            target: rec[2 * m + 1].to_string(),
        });
    }
    Ok(out)
}

fn infer_categorical<'a>(values: impl Iterator<Item = &'a str>) -> Result<OutcomeSpace> {
    let set: BTreeSet<&str> = values.collect();
    OutcomeSpace::categorical(set)
}

fn infer_target<'a>(values: impl Iterator<Item = &'a str> + Clone) -> Result<OutcomeSpace> {
    let set: BTreeSet<&str> = values.collect();
    let numeric: Option<Vec<(f64, &str)>> = set
        .iter()
        .map(|s| s.parse::<f64>().ok().map(|v| (v, *s)))
        .collect();
    match numeric {
        Some(mut pairs) if pairs.iter().all(|(v, _)| v.is_finite()) => {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (levels, labels): (Vec<f64>, Vec<String>) =
                pairs.into_iter().map(|(v, s)| (v, s.to_string())).unzip();
            OutcomeSpace::with_levels(labels, levels)
        }
        _ => OutcomeSpace::categorical(set),
    }
}
