//! The inference path: fill, discretize, hash, cross and score one row at a
//! time with caller-owned scratch buffers.

use std::io::{Read, Write};
use std::time::Instant;

use serde::Serialize;

use super::artifact::ProducerArtifact;
use crate::error::{Error, Result};
use crate::features::{bin_index, hash_base, hash_bin, BaseFieldId, BaseSource, CrossHasher, HashConfig};
use crate::lr::{auc_checked, logloss, sigmoid, EvalMetric};
use crate::tabular::{read_csv, FeatureSchema, FieldKind, RawValue};

#[derive(Debug, Clone)]
enum BasePlan {
    Token { column: usize, fill: String },
    Bin { column: usize, fill: f64, min: f64, max: f64, granularity: u32 },
}

#[derive(Debug, Clone)]
enum MemberPlan {
    Base(usize),
    Cross(CrossHasher),
}

/// Per-thread buffers reused across rows.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    base: Vec<u32>,
    encoded: Vec<u32>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// A loaded artifact prepared for fast row scoring. Immutable and `Sync`;
/// share it across threads and give each thread its own [`Scratch`].
#[derive(Debug, Clone)]
pub struct Producer {
    schema: FeatureSchema,
    hash: HashConfig,
    base: Vec<BasePlan>,
    members: Vec<MemberPlan>,
    bias: f64,
    weights: Vec<Vec<f32>>,
}

impl Producer {
    pub fn new(artifact: &ProducerArtifact) -> Result<Self> {
        let mut base = Vec::with_capacity(artifact.base_fields.len());
        for bf in &artifact.base_fields {
            base.push(match bf.source {
                BaseSource::Categorical { column } => BasePlan::Token {
                    column,
                    fill: artifact.fill_rules.token(column).to_string(),
                },
                BaseSource::Binned { column, granularity } => {
                    let b = artifact.discretization.binning_for(column).ok_or_else(|| {
                        Error::Corrupt(format!("no binning recorded for column {column}"))
                    })?;
                    BasePlan::Bin {
                        column,
                        fill: artifact.fill_rules.numeric(column),
                        min: b.min,
                        max: b.max,
                        granularity,
                    }
                }
            });
        }
        let members = artifact
            .feature_set
            .members()
            .iter()
            .map(|m| {
                if m.is_original() {
                    MemberPlan::Base(m.constituents()[0].index())
                } else {
                    MemberPlan::Cross(CrossHasher::new(m, &artifact.hash))
                }
            })
            .collect();
        let b = artifact.hash.bucket_count as usize;
        Ok(Self {
            schema: artifact.schema.clone(),
            hash: artifact.hash,
            base,
            members,
            bias: artifact.model.bias,
            weights: artifact.model.weights.iter().map(|w| w.to_dense_f32(b)).collect(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_fields(&self) -> usize {
        self.members.len()
    }

    /// Schema position of the field called `name`.
    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    /// Buckets of every feature-set member for one raw row in schema order.
    /// Missing cells take the recorded fill values.
    pub fn transform_row<'s>(&self, row: &[RawValue<'_>], scratch: &'s mut Scratch) -> Result<&'s [u32]> {
        if row.len() != self.schema.fields.len() {
            return Err(Error::FieldMismatch(format!(
                "row has {} values, schema has {} fields",
                row.len(),
                self.schema.fields.len()
            )));
        }
        scratch.base.clear();
        for (i, plan) in self.base.iter().enumerate() {
            let id = BaseFieldId(i as u32);
            let bucket = match plan {
                BasePlan::Token { column, fill } => match row[*column] {
                    RawValue::Cat(t) => hash_base(id, t.as_bytes(), &self.hash),
                    RawValue::Missing => hash_base(id, fill.as_bytes(), &self.hash),
                    RawValue::Num(_) => return Err(kind_error(&self.schema, *column)),
                },
                BasePlan::Bin {
                    column,
                    fill,
                    min,
                    max,
                    granularity,
                } => {
                    let v = match row[*column] {
                        RawValue::Num(v) => v,
                        RawValue::Missing => *fill,
                        RawValue::Cat(_) => return Err(kind_error(&self.schema, *column)),
                    };
                    hash_bin(id, bin_index(v, *min, *max, *granularity), &self.hash)
                }
            };
            scratch.base.push(bucket);
        }
        scratch.encoded.clear();
        for m in &self.members {
            let b = match m {
                MemberPlan::Base(i) => scratch.base[*i],
                MemberPlan::Cross(h) => h.bucket(&scratch.base),
            };
            scratch.encoded.push(b);
        }
        Ok(&scratch.encoded)
    }

    /// Score an already encoded row, summing in member order after the bias.
    #[inline]
    pub fn score_encoded(&self, encoded: &[u32]) -> f64 {
        let mut z = self.bias;
        for (w, &b) in self.weights.iter().zip(encoded) {
            z += f64::from(w[b as usize]);
        }
        sigmoid(z)
    }

    pub fn predict_row(&self, row: &[RawValue<'_>], scratch: &mut Scratch) -> Result<f64> {
        let encoded = self.transform_row(row, scratch)?;
        Ok(self.score_encoded(encoded))
    }

    /// Probabilities for many rows, in input order.
    pub fn predict_batch(&self, rows: &[Vec<RawValue<'_>>]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::new();
        rows.iter().map(|r| self.predict_row(r, &mut scratch)).collect()
    }

    /// Stream a CSV (header required, label optional) to a one-column
    /// `probability` CSV. Returns the row count.
    pub fn score_csv<R: Read, W: Write>(&self, input: R, output: W) -> Result<usize> {
        self.stream_csv(input, output, &["probability"], |p, encoded, out| {
            out.clear();
            out.push(format!("{}", p.score_encoded(encoded)));
        })
    }

    /// Stream a CSV to per-member bucket ids, one column per feature-set member.
    pub fn transform_csv<R: Read, W: Write>(&self, input: R, output: W, header: &[String]) -> Result<usize> {
        let names: Vec<&str> = header.iter().map(String::as_str).collect();
        self.stream_csv(input, output, &names, |_, encoded, out| {
            out.clear();
            out.extend(encoded.iter().map(u32::to_string));
        })
    }

    fn stream_csv<R: Read, W: Write>(
        &self,
        input: R,
        output: W,
        header: &[&str],
        mut emit: impl FnMut(&Self, &[u32], &mut Vec<String>),
    ) -> Result<usize> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let head = rdr.headers()?.clone();
        let positions: Vec<usize> = self
            .schema
            .fields
            .iter()
            .map(|f| {
                head.iter()
                    .position(|h| h.trim() == f.name)
                    .ok_or_else(|| Error::Schema(format!("input has no column for field `{}`", f.name)))
            })
            .collect::<Result<_>>()?;
        let mut wtr = csv::Writer::from_writer(output);
        wtr.write_record(header)?;
        let mut record = csv::StringRecord::new();
        let mut scratch = Scratch::new();
        let mut cells: Vec<String> = Vec::new();
        let mut n = 0;
        while rdr.read_record(&mut record)? {
            let row: Vec<RawValue<'_>> = self
                .schema
                .fields
                .iter()
                .zip(&positions)
                .map(|(f, &p)| RawValue::parse(record.get(p).unwrap_or(""), f.kind))
                .collect();
            let encoded = self.transform_row(&row, &mut scratch)?;
            emit(self, encoded, &mut cells);
            wtr.write_record(&cells)?;
            n += 1;
        }
        wtr.flush()?;
        Ok(n)
    }

    /// AUC and logloss on a labeled CSV.
    pub fn evaluate_csv<R: Read>(&self, input: R) -> Result<EvalMetric> {
        let table = read_csv(input, &self.schema, true)?;
        let mut scratch = Scratch::new();
        let mut row = Vec::with_capacity(self.schema.fields.len());
        let mut probs = Vec::with_capacity(table.n_rows());
        for r in 0..table.n_rows() {
            table.row_into(r, &mut row);
            probs.push(self.predict_row(&row, &mut scratch)?);
        }
        let a = auc_checked(&probs, &table.labels);
        Ok(EvalMetric {
            auc: a.auc,
            logloss: logloss(&probs, &table.labels),
            degenerate: a.degenerate,
        })
    }
}

fn kind_error(schema: &FeatureSchema, column: usize) -> Error {
    let f = &schema.fields[column];
    let expected = match f.kind {
        FieldKind::Numerical => "numerical",
        FieldKind::Categorical => "categorical",
    };
    Error::FieldMismatch(format!("field `{}` expects a {expected} value", f.name))
}

/// Per-row transform + predict latency percentiles, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyReport {
    pub rows: usize,
    pub repetitions: usize,
    pub p50_ns: f64,
    pub p95_ns: f64,
    pub p99_ns: f64,
    pub mean_ns: f64,
    pub rows_per_sec: f64,
}

/// Time every row individually over `repetitions` passes after one warm-up
/// pass. Needs at least 1,000 rows.
pub fn bench_latency(producer: &Producer, rows: &[Vec<RawValue<'_>>], repetitions: usize) -> Result<LatencyReport> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if rows.len() < 1000 {
        return Err(Error::InvalidArgument(format!(
            "latency benchmark needs at least 1000 rows, got {}",
            rows.len()
        )));
    }
    let mut scratch = Scratch::new();
    let mut sink = 0.0;
    for r in rows {
        sink += producer.predict_row(r, &mut scratch)?;
    }
    let mut samples = Vec::with_capacity(rows.len() * repetitions);
    let wall = Instant::now();
    for _ in 0..repetitions {
        for r in rows {
            let t = Instant::now();
            sink += producer.predict_row(r, &mut scratch)?;
            samples.push(t.elapsed().as_nanos() as f64);
        }
    }
    let total = wall.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    samples.sort_by(f64::total_cmp);
    let pct = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    Ok(LatencyReport {
        rows: rows.len(),
        repetitions,
        p50_ns: pct(0.50),
        p95_ns: pct(0.95),
        p99_ns: pct(0.99),
        mean_ns: samples.iter().sum::<f64>() / samples.len() as f64,
        rows_per_sec: samples.len() as f64 / total,
    })
}
