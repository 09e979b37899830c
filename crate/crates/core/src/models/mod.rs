//! Model backends, data generators and dataset files.

pub mod cem;
pub mod cox_cs;
pub mod generate;
pub mod plm;
pub mod spline;

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use cem::{CEMDataset, CemVariant};
use cox_cs::CSDataset;
use plm::PLMDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CoxCs,
    CemNormal,
    CemExponential,
    Plm,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::CoxCs => "cox-cs",
            ModelKind::CemNormal => "cem-normal",
            ModelKind::CemExponential => "cem-exponential",
            ModelKind::Plm => "plm",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        [ModelKind::CoxCs, ModelKind::CemNormal, ModelKind::CemExponential, ModelKind::Plm]
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::Config(format!("unknown model '{tag}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelDataset {
    CoxCs(CSDataset),
    Cem(CEMDataset),
    Plm(PLMDataset),
}

const HEADER_PREFIX: &str = "# model=";

impl ModelDataset {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelDataset::CoxCs(_) => ModelKind::CoxCs,
            ModelDataset::Cem(d) => match d.variant {
                CemVariant::ConditionalNormal => ModelKind::CemNormal,
                CemVariant::ConditionalExponential => ModelKind::CemExponential,
            },
            ModelDataset::Plm(_) => ModelKind::Plm,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ModelDataset::CoxCs(d) => d.len(),
            ModelDataset::Cem(d) => d.len(),
            ModelDataset::Plm(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One header line `# model=<tag>`, then headerless rows with columns
    /// `y,delta,z…` (Cox) or `y,w…,z` (others).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER_PREFIX}{}", self.kind().tag())?;
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let fmt = |v: f64| format!("{v:?}");
        match self {
            ModelDataset::CoxCs(d) => {
                for i in 0..d.len() {
                    let mut rec = vec![fmt(d.y[i]), if d.delta[i] { "1".into() } else { "0".into() }];
                    rec.extend(d.z[i].iter().map(|v| fmt(*v)));
                    wr.write_record(&rec)?;
                }
            }
            ModelDataset::Cem(d) => {
                for i in 0..d.len() {
                    let mut rec = vec![fmt(d.y[i])];
                    rec.extend(d.w[i].iter().map(|v| fmt(*v)));
                    rec.push(fmt(d.z[i]));
                    wr.write_record(&rec)?;
                }
            }
            ModelDataset::Plm(d) => {
                for i in 0..d.len() {
                    let mut rec = vec![fmt(d.y[i])];
                    rec.extend(d.w[i].iter().map(|v| fmt(*v)));
                    rec.push(fmt(d.z[i]));
                    wr.write_record(&rec)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let tag = first
            .trim()
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::Config(format!("dataset header must start with '{HEADER_PREFIX}'")))?;
        let kind = ModelKind::from_tag(tag.trim())?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("data row {}: '{f}' is not a number", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() < 3 {
                return Err(Error::Config(format!("data row {} has {} columns, need >= 3", line + 1, row.len())));
            }
            rows.push(row);
        }
        let split = |rows: &[Vec<f64>]| -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
            let y = rows.iter().map(|r| r[0]).collect();
            let w = rows.iter().map(|r| r[1..r.len() - 1].to_vec()).collect();
            let z = rows.iter().map(|r| r[r.len() - 1]).collect();
            (y, w, z)
        };
        Ok(match kind {
            ModelKind::CoxCs => {
                let y = rows.iter().map(|r| r[0]).collect();
                let delta = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| match r[1] {
                        v if v == 1.0 => Ok(true),
                        v if v == 0.0 => Ok(false),
                        v => Err(Error::Config(format!("data row {}: delta = {v} not in {{0, 1}}", i + 1))),
                    })
                    .collect::<Result<Vec<bool>>>()?;
                let z = rows.iter().map(|r| r[2..].to_vec()).collect();
                ModelDataset::CoxCs(CSDataset::new(y, delta, z)?)
            }
            ModelKind::CemNormal | ModelKind::CemExponential => {
                let (y, w, z) = split(&rows);
                let variant = if kind == ModelKind::CemNormal {
                    CemVariant::ConditionalNormal
                } else {
                    CemVariant::ConditionalExponential
                };
                ModelDataset::Cem(CEMDataset::new(y, w, z, variant)?)
            }
            ModelKind::Plm => {
                let (y, w, z) = split(&rows);
                ModelDataset::Plm(PLMDataset::new(y, w, z)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        for kind in [ModelKind::CoxCs, ModelKind::CemNormal, ModelKind::CemExponential, ModelKind::Plm] {
            let d = generate::generate(kind, 25, &[0.5, 1.0], 2).unwrap();
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            assert!(String::from_utf8_lossy(&buf).starts_with(&format!("# model={}\n", kind.tag())));
            let back = ModelDataset::read_csv(buf.as_slice()).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(ModelDataset::read_csv("y,w,z\n1,2,3\n".as_bytes()).is_err());
        assert!(ModelDataset::read_csv("# model=nope\n1,2,3\n".as_bytes()).is_err());
    }
}
