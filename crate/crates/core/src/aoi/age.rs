use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::distribution::{AgeDistribution, AgeVector};
use super::trace::DeliveryTrace;

/// Age of each source at each slot of `[start, start + len)`.
/// `None` marks slots before the source's first delivery.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeProcess {
    start: usize,
    ages: Vec<Vec<Option<u64>>>,
}

impl AgeProcess {
    pub fn new(start: usize, ages: Vec<Vec<Option<u64>>>) -> Result<Self> {
        let Some(first) = ages.first() else {
            return Err(Error::InvalidParameter {
                name: "ages".into(),
                reason: "no sources".into(),
            });
        };
        for a in &ages {
            if a.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: a.len(),
                });
            }
        }
        Ok(Self { start, ages })
    }

    pub fn num_sources(&self) -> usize {
        self.ages.len()
    }

    /// First slot covered.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.ages[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ages of `source` from slot `start()` on.
    pub fn source(&self, source: usize) -> &[Option<u64>] {
        &self.ages[source]
    }

    /// Age vector at absolute slot `t`, if every source is defined there.
    pub fn at(&self, t: usize) -> Option<AgeVector> {
        let i = t.checked_sub(self.start)?;
        self.ages
            .iter()
            .map(|a| a.get(i).copied().flatten().map(|v| v as usize))
            .collect::<Option<Vec<_>>>()
            .map(AgeVector::new)
    }

    /// Drops leading slots until every source has been delivered once.
    pub fn trim_warmup(&self) -> AgeProcess {
        let skip = self
            .ages
            .iter()
            .map(|a| a.iter().position(Option::is_some).unwrap_or(a.len()))
            .max()
            .unwrap_or(0);
        AgeProcess {
            start: self.start + skip,
            ages: self.ages.iter().map(|a| a[skip..].to_vec()).collect(),
        }
    }

    /// CSV with columns `t, age_1..age_m`; undefined ages are empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.num_sources()).map(|l| format!("age_{l}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![(self.start + i).to_string()];
            rec.extend(
                self.ages
                    .iter()
                    .map(|a| a[i].map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let m = rdr.headers()?.len().saturating_sub(1);
        let mut ages = vec![Vec::new(); m];
        let mut start = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let t: usize = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad slot {:?}", &rec[0])))?;
            let s = *start.get_or_insert(t);
            if t != s + i {
                return Err(Error::Parse(format!(
                    "slots must be consecutive, found {t}"
                )));
            }
            for (l, a) in ages.iter_mut().enumerate() {
                let cell = &rec[l + 1];
                a.push(if cell.is_empty() {
                    None
                } else {
                    Some(
                        cell.parse()
                            .map_err(|_| Error::Parse(format!("bad age {cell:?}")))?,
                    )
                });
            }
        }
        Self::new(start.unwrap_or(0), ages)
    }
}

/// `age_l(t) = t - max{G : D <= t}` for `t` in `0..horizon`.
pub fn age_process(trace: &DeliveryTrace, horizon: usize) -> Result<AgeProcess> {
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon".into(),
            reason: "must be positive".into(),
        });
    }
    let mut ages = Vec::with_capacity(trace.num_sources());
    for l in 0..trace.num_sources() {
        let mut by_delivery: Vec<_> = trace.deliveries(l).to_vec();
        by_delivery.sort_by_key(|d| d.delivered);
        let mut newest: Option<u64> = None;
        let mut next = 0;
        let mut row = Vec::with_capacity(horizon);
        for t in 0..horizon as u64 {
            while next < by_delivery.len() && by_delivery[next].delivered <= t {
                let g = by_delivery[next].generated;
                newest = Some(newest.map_or(g, |u| u.max(g)));
                next += 1;
            }
            row.push(newest.map(|u| t - u));
        }
        ages.push(row);
    }
    AgeProcess::new(0, ages)
}

/// Relative frequency of each age vector over the covered slots.
pub fn empirical_age_distribution(ages: &AgeProcess) -> Result<AgeDistribution> {
    let mut counts = std::collections::BTreeMap::new();
    for i in 0..ages.len() {
        let mut v = Vec::with_capacity(ages.num_sources());
        for (l, a) in ages.ages.iter().enumerate() {
            match a[i] {
                Some(x) => v.push(x as usize),
                None => {
                    return Err(Error::WarmupNotTrimmed {
                        source_index: l + 1,
                        slot: ages.start + i,
                    })
                }
            }
        }
        *counts.entry(v).or_insert(0usize) += 1;
    }
    if counts.is_empty() {
        return Err(Error::InvalidParameter {
            name: "ages".into(),
            reason: "no slots".into(),
        });
    }
    AgeDistribution::from_counts(counts.into_iter().map(|(v, c)| (AgeVector::new(v), c)))
}

/// Whether `a_l(t) <= b_l(t)` at every source and slot.
pub fn sample_path_dominates(a: &AgeProcess, b: &AgeProcess) -> Result<bool> {
    if a.num_sources() != b.num_sources() {
        return Err(Error::DimensionMismatch {
            expected: a.num_sources(),
            found: b.num_sources(),
        });
    }
    if a.start != b.start || a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "slots {}..{} vs {}..{}",
            a.start,
            a.start + a.len(),
            b.start,
            b.start + b.len()
        )));
    }
    for (l, (x, y)) in a.ages.iter().zip(&b.ages).enumerate() {
        for (i, (p, q)) in x.iter().zip(y).enumerate() {
            match (p, q) {
                (Some(p), Some(q)) => {
                    if p > q {
                        return Ok(false);
                    }
                }
                _ => {
                    return Err(Error::WarmupNotTrimmed {
                        source_index: l + 1,
                        slot: a.start + i,
                    })
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_example() {
        let t = DeliveryTrace::single(&[0, 3], &[1, 5]).unwrap();
        let a = age_process(&t, 7).unwrap();
        assert_eq!(
            a.source(0),
            &[None, Some(1), Some(2), Some(3), Some(4), Some(2), Some(3)]
        );
    }

    #[test]
    fn instant_delivery_is_fresh() {
        let g: Vec<u64> = (0..6).collect();
        let a = age_process(&DeliveryTrace::single(&g, &g).unwrap(), 6).unwrap();
        assert!(a.source(0).iter().all(|&x| x == Some(0)));
    }

    #[test]
    fn single_event_grows() {
        let a = age_process(&DeliveryTrace::single(&[0], &[0]).unwrap(), 4).unwrap();
        assert_eq!(a.source(0), &[Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn stale_arrival_does_not_reset() {
        // Feature generated at 2 arrives first, the one from 1 arrives later.
        let t = DeliveryTrace::single(&[1, 2], &[6, 3]).unwrap();
        let a = age_process(&t, 8).unwrap();
        assert_eq!(a.source(0)[6], Some(4));
    }

    #[test]
    fn warmup_must_be_trimmed() {
        let t = DeliveryTrace::single(&[0, 3], &[1, 5]).unwrap();
        let a = age_process(&t, 7).unwrap();
        assert!(matches!(
            empirical_age_distribution(&a),
            Err(Error::WarmupNotTrimmed {
                source_index: 1,
                slot: 0
            })
        ));
        let d = empirical_age_distribution(&a.trim_warmup()).unwrap();
        // ages 1,2,3,4,2,3 over six slots
        assert_eq!(d.prob(&AgeVector::new(vec![2])), 2.0 / 6.0);
        assert_eq!(d.prob(&AgeVector::new(vec![4])), 1.0 / 6.0);
    }

    #[test]
    fn dominance_is_pointwise() {
        let a = AgeProcess::new(0, vec![vec![Some(1), Some(3)]]).unwrap();
        let b = AgeProcess::new(0, vec![vec![Some(2), Some(2)]]).unwrap();
        assert!(sample_path_dominates(&a, &a).unwrap());
        assert!(!sample_path_dominates(&a, &b).unwrap());
    }

    #[test]
    fn csv_renders_sentinel_as_empty() {
        let t = DeliveryTrace::single(&[0, 3], &[1, 5]).unwrap();
        let a = age_process(&t, 3).unwrap();
        let mut out = Vec::new();
        a.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "t,age_1\n0,\n1,1\n2,2\n");
        assert_eq!(AgeProcess::from_csv_reader(text.as_bytes()).unwrap(), a);
    }
}
