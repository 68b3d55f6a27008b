//! Tabular ingestion: schema, CSV loading, missing-value filling, the
//! train/validation split, equal-size data blocks and the cached `b_sum` lane.

use std::collections::HashSet;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CrossFeature;
use crate::lr::{DesignView, LRModel};

/// Token substituted for a missing categorical cell.
pub const MISSING_TOKEN: &str = "__MISSING__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Numerical,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub name: String,
    pub kind: FieldKind,
}

/// Column declarations plus the name of the binary label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub fields: Vec<FieldDef>,
    pub label: String,
}

impl FeatureSchema {
    pub fn new(fields: Vec<FieldDef>, label: impl Into<String>) -> Result<Self> {
        let schema = Self {
            fields,
            label: label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: Self =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid schema JSON: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(Error::Schema("schema declares no fields".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.fields {
            if f.name.is_empty() {
                return Err(Error::Schema("empty field name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate field name `{}`", f.name)));
            }
        }
        if seen.contains(self.label.as_str()) {
            return Err(Error::Schema(format!(
                "label `{}` is also declared as a feature field",
                self.label
            )));
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

/// One column of raw values; `None` is the missing marker.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numerical(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numerical(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numerical(v) => RawColumn::Numerical(rows.iter().map(|&r| v[r]).collect()),
            RawColumn::Categorical(v) => {
                RawColumn::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

/// A loaded table, stored column-major. `labels` is empty for unlabeled input.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: FeatureSchema,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(self.labels.len(), RawColumn::len)
    }

    pub fn has_labels(&self) -> bool {
        !self.labels.is_empty() || self.n_rows() == 0
    }

    /// Rows `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&r| self.labels[r]).collect()
            },
        }
    }

    /// Borrowed view of one row, in schema order.
    pub fn row(&self, r: usize) -> Vec<RawValue<'_>> {
        let mut out = Vec::with_capacity(self.columns.len());
        self.row_into(r, &mut out);
        out
    }

    pub fn row_into<'a>(&'a self, r: usize, out: &mut Vec<RawValue<'a>>) {
        out.clear();
        for c in &self.columns {
            out.push(match c {
                RawColumn::Numerical(v) => v[r].map_or(RawValue::Missing, RawValue::Num),
                RawColumn::Categorical(v) => {
                    v[r].as_deref().map_or(RawValue::Missing, RawValue::Cat)
                }
            });
        }
    }
}

/// A single raw cell as seen by the inference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawValue<'a> {
    Num(f64),
    Cat(&'a str),
    Missing,
}

impl<'a> RawValue<'a> {
    /// Interpret a CSV cell according to the column kind.
    pub fn parse(cell: &'a str, kind: FieldKind) -> Self {
        match kind {
            FieldKind::Numerical => parse_number(cell).map_or(RawValue::Missing, RawValue::Num),
            FieldKind::Categorical if cell.is_empty() => RawValue::Missing,
            FieldKind::Categorical => RawValue::Cat(cell),
        }
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_label(cell: &str, row: usize) -> Result<u8> {
    match cell.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::NonBinaryLabel {
            row,
            value: other.to_string(),
        }),
    }
}

/// Load a labeled CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, true)
}

/// Read CSV from any reader. With `require_label = false` a missing label
/// column yields an unlabeled table; a present one is still validated.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, require_label: bool) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let position = |name: &str| header.iter().position(|h| h.trim() == name);

    let mut field_pos = Vec::with_capacity(schema.fields.len());
    for f in &schema.fields {
        let pos = position(&f.name).ok_or_else(|| {
            Error::Schema(format!("header has no column for field `{}`", f.name))
        })?;
        field_pos.push(pos);
    }
    let label_pos = position(&schema.label);
    if require_label && label_pos.is_none() {
        return Err(Error::MissingLabel(schema.label.clone()));
    }

    let mut columns: Vec<RawColumn> = schema
        .fields
        .iter()
        .map(|f| match f.kind {
            FieldKind::Numerical => RawColumn::Numerical(Vec::new()),
            FieldKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();

    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        for (col, &pos) in columns.iter_mut().zip(&field_pos) {
            let cell = record.get(pos).unwrap_or("");
            match col {
                RawColumn::Numerical(v) => v.push(parse_number(cell)),
                RawColumn::Categorical(v) => {
                    v.push(if cell.is_empty() { None } else { Some(cell.to_string()) })
                }
            }
        }
        if let Some(lp) = label_pos {
            labels.push(parse_label(record.get(lp).unwrap_or(""), row)?);
        }
        row += 1;
    }
    Ok(RawTable {
        schema: schema.clone(),
        columns,
        labels,
    })
}

/// Replacement value for one field's missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillRule {
    Median(f64),
    Token(String),
}

/// Per-field fill rules in schema order, replayed verbatim at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRules {
    pub rules: Vec<FillRule>,
}

impl FillRules {
    /// Medians are taken over `rows` only (the training split).
    pub fn fit(table: &RawTable, rows: &[usize]) -> Result<Self> {
        let mut rules = Vec::with_capacity(table.columns.len());
        for (col, def) in table.columns.iter().zip(&table.schema.fields) {
            rules.push(match col {
                RawColumn::Numerical(v) => {
                    let observed: Vec<f64> = rows.iter().filter_map(|&r| v[r]).collect();
                    FillRule::Median(
                        median(observed).ok_or_else(|| Error::DegenerateColumn(def.name.clone()))?,
                    )
                }
                RawColumn::Categorical(_) => FillRule::Token(MISSING_TOKEN.to_string()),
            });
        }
        Ok(Self { rules })
    }

    pub fn apply(&self, table: &mut RawTable) {
        for (col, rule) in table.columns.iter_mut().zip(&self.rules) {
            match (col, rule) {
                (RawColumn::Numerical(v), FillRule::Median(m)) => {
                    v.iter_mut().filter(|x| x.is_none()).for_each(|x| *x = Some(*m))
                }
                (RawColumn::Categorical(v), FillRule::Token(t)) => v
                    .iter_mut()
                    .filter(|x| x.is_none())
                    .for_each(|x| *x = Some(t.clone())),
                _ => unreachable!("fill rule kind always follows the schema"),
            }
        }
    }

    pub fn numeric(&self, field: usize) -> f64 {
        match &self.rules[field] {
            FillRule::Median(m) => *m,
            FillRule::Token(_) => f64::NAN,
        }
    }

    pub fn token(&self, field: usize) -> &str {
        match &self.rules[field] {
            FillRule::Token(t) => t,
            FillRule::Median(_) => MISSING_TOKEN,
        }
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Fit fill rules on every row of `table` and apply them.
pub fn fill_missing(mut table: RawTable) -> Result<(RawTable, FillRules)> {
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    let rules = FillRules::fit(&table, &rows)?;
    rules.apply(&mut table);
    Ok((table, rules))
}

/// Seeded shuffle, then the first `round(fraction * rows)` indices become
/// the validation split. Returns `(train, validation)`.
pub fn split_train_validation(
    table: &RawTable,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    split_indices(table.n_rows(), fraction, seed)
}

pub fn split_indices(n_rows: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if n_rows < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 rows to split, got {n_rows}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_valid = (fraction * n_rows as f64).round() as usize;
    let train = idx.split_off(n_valid);
    Ok((train, idx))
}

/// How many blocks to cut the training rows into, given the candidate count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockRule {
    pub small_data_threshold: usize,
    pub small_multiplier: usize,
    pub large_multiplier: usize,
}

impl Default for BlockRule {
    fn default() -> Self {
        Self {
            small_data_threshold: 500_000,
            small_multiplier: 2,
            large_multiplier: 5,
        }
    }
}

/// `ceil(log2 n)`, with `n <= 1` mapping to 0.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Blocks consumed by a full successive-halving run over `n` arms:
/// `sum_{k=0}^{ceil(log2 n)-1} 2^k`.
pub fn halving_budget(n: usize) -> usize {
    (1usize << ceil_log2(n)) - 1
}

/// Disjoint, contiguous, near-equal ranges over the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub ranges: Vec<Range<usize>>,
    pub warnings: Vec<String>,
}

impl BlockPartition {
    pub fn block_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn equal(n_rows: usize, n_blocks: usize) -> Self {
        let ranges = (0..n_blocks)
            .map(|i| (i * n_rows / n_blocks)..((i + 1) * n_rows / n_blocks))
            .collect();
        Self {
            ranges,
            warnings: Vec::new(),
        }
    }
}

pub fn partition_blocks(n_rows: usize, n_candidates: usize, rule: &BlockRule) -> Result<BlockPartition> {
    if n_candidates == 0 {
        return Err(Error::InvalidArgument("n_candidates must be at least 1".into()));
    }
    let budget = halving_budget(n_candidates);
    let multiplier = if n_rows < rule.small_data_threshold {
        rule.small_multiplier
    } else {
        rule.large_multiplier
    };
    let mut n_blocks = (multiplier * budget).max(1);
    let mut warnings = Vec::new();
    if n_rows < n_blocks {
        warnings.push(format!(
            "{n_rows} training rows cannot fill {n_blocks} blocks; using {n_rows}"
        ));
        log::warn!("{}", warnings.last().unwrap());
        n_blocks = n_rows;
    }
    let mut partition = BlockPartition::equal(n_rows, n_blocks);
    partition.warnings = warnings;
    Ok(partition)
}

/// Cached frozen partial scores (`bias + w_s . x_s`) for every training and
/// validation row. Training rows carry the stamp of the update that last wrote
/// them so field-wise training can refuse stale values.
#[derive(Debug, Clone)]
pub struct BsumCache {
    pub train: Vec<f64>,
    pub train_stamp: Vec<u32>,
    pub valid: Vec<f64>,
    stamp: u32,
}

/// Read-only view handed to field-wise training.
#[derive(Debug, Clone, Copy)]
pub struct BsumLane<'a> {
    pub values: &'a [f64],
    pub stamps: &'a [u32],
    pub expected: u32,
}

impl BsumLane<'_> {
    pub fn check(&self, range: &Range<usize>) -> Result<()> {
        for row in range.clone() {
            let found = self.stamps[row];
            if found != self.expected {
                return Err(Error::StaleBsum {
                    row,
                    expected: self.expected,
                    found,
                });
            }
        }
        Ok(())
    }
}

impl BsumCache {
    /// All-zero cache, current for the empty model.
    pub fn new(n_train: usize, n_valid: usize) -> Self {
        Self {
            train: vec![0.0; n_train],
            train_stamp: vec![0; n_train],
            valid: vec![0.0; n_valid],
            stamp: 0,
        }
    }

    pub fn stamp(&self) -> u32 {
        self.stamp
    }

    pub fn lane(&self) -> BsumLane<'_> {
        BsumLane {
            values: &self.train,
            stamps: &self.train_stamp,
            expected: self.stamp,
        }
    }

    /// Recompute `b_sum` for the rows in `blocks` and for every validation
    /// row from `model`. `train`/`valid` columns align with `feature_set`.
    pub fn update(
        &mut self,
        model: &LRModel,
        feature_set: &[CrossFeature],
        train: &DesignView<'_>,
        blocks: &[Range<usize>],
        valid: &DesignView<'_>,
    ) -> Result<()> {
        let slots = model.slots_for(feature_set)?;
        if train.columns.len() != feature_set.len() || valid.columns.len() != feature_set.len() {
            return Err(Error::FieldMismatch(format!(
                "{} feature-set members but {} train / {} validation columns",
                feature_set.len(),
                train.columns.len(),
                valid.columns.len()
            )));
        }
        self.stamp += 1;
        let partial = |cols: &[&[u32]], row: usize| {
            let mut z = model.bias;
            for (col, &slot) in cols.iter().zip(&slots) {
                z += model.weights[slot].get(col[row]);
            }
            z
        };
        for range in blocks {
            for row in range.clone() {
                self.train[row] = partial(&train.columns, row);
                self.train_stamp[row] = self.stamp;
            }
        }
        for row in 0..self.valid.len() {
            self.valid[row] = partial(&valid.columns, row);
        }
        Ok(())
    }
}

/// Convenience wrapper matching the pipeline vocabulary.
pub fn update_bsum(
    cache: &mut BsumCache,
    model: &LRModel,
    feature_set: &[CrossFeature],
    train: &DesignView<'_>,
    blocks: &[Range<usize>],
    valid: &DesignView<'_>,
) -> Result<()> {
    cache.update(model, feature_set, train, blocks, valid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FieldDef {
                    name: "age".into(),
                    kind: FieldKind::Numerical,
                },
                FieldDef {
                    name: "job".into(),
                    kind: FieldKind::Categorical,
                },
            ],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn loads_two_rows() {
        let csv = "age,job,y\n30,admin,1\n41,tech,0\n";
        let t = read_csv(csv.as_bytes(), &schema(), true).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.labels, vec![1, 0]);
    }

    #[test]
    fn empty_numeric_cell_is_missing() {
        let csv = "age,job,y\n,admin,1\nabc,tech,0\n";
        let t = read_csv(csv.as_bytes(), &schema(), true).unwrap();
        assert_eq!(t.columns[0], RawColumn::Numerical(vec![None, None]));
    }

    #[test]
    fn label_two_is_rejected() {
        let csv = "age,job,y\n30,admin,2\n";
        let err = read_csv(csv.as_bytes(), &schema(), true).unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { row: 0, .. }), "{err}");
    }

    #[test]
    fn missing_label_column() {
        let csv = "age,job\n30,admin\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(), true).unwrap_err(),
            Error::MissingLabel(_)
        ));
        let t = read_csv(csv.as_bytes(), &schema(), false).unwrap();
        assert!(t.labels.is_empty());
    }

    #[test]
    fn header_mismatch() {
        let csv = "age,role,y\n30,admin,1\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(), true).unwrap_err(),
            Error::Schema(_)
        ));
    }

    #[test]
    fn quoted_cells() {
        let csv = "age,job,y\n30,\"admin, senior\",1\n";
        let t = read_csv(csv.as_bytes(), &schema(), true).unwrap();
        assert_eq!(
            t.columns[1],
            RawColumn::Categorical(vec![Some("admin, senior".into())])
        );
    }

    #[test]
    fn duplicate_schema_names() {
        let f = FieldDef {
            name: "a".into(),
            kind: FieldKind::Numerical,
        };
        assert!(FeatureSchema::new(vec![f.clone(), f], "y").is_err());
    }

    fn table(age: Vec<Option<f64>>, job: Vec<Option<&str>>) -> RawTable {
        let n = age.len();
        RawTable {
            schema: schema(),
            columns: vec![
                RawColumn::Numerical(age),
                RawColumn::Categorical(job.into_iter().map(|s| s.map(String::from)).collect()),
            ],
            labels: vec![0; n],
        }
    }

    #[test]
    fn fill_uses_median_and_token() {
        let t = table(vec![Some(1.0), None, Some(3.0)], vec![Some("a"), None, Some("b")]);
        let (filled, rules) = fill_missing(t).unwrap();
        assert_eq!(rules.rules[0], FillRule::Median(2.0));
        assert_eq!(filled.columns[0], RawColumn::Numerical(vec![Some(1.0), Some(2.0), Some(3.0)]));
        assert_eq!(
            filled.columns[1],
            RawColumn::Categorical(vec![Some("a".into()), Some(MISSING_TOKEN.into()), Some("b".into())])
        );
    }

    #[test]
    fn fill_without_missing_is_identity() {
        let t = table(vec![Some(5.0), Some(1.0)], vec![Some("a"), Some("b")]);
        let (filled, rules) = fill_missing(t.clone()).unwrap();
        assert_eq!(filled, t);
        assert_eq!(rules.rules.len(), 2);
    }

    #[test]
    fn all_missing_numeric_is_degenerate() {
        let t = table(vec![None, None], vec![Some("a"), Some("b")]);
        assert!(matches!(fill_missing(t).unwrap_err(), Error::DegenerateColumn(_)));
    }

    #[test]
    fn fill_is_idempotent() {
        let t = table(
            vec![Some(4.0), None, Some(1.0), Some(7.0), None, Some(2.5)],
            vec![None, Some("x"), None, Some("y"), Some("x"), None],
        );
        let (once, r1) = fill_missing(t).unwrap();
        let (twice, r2) = fill_missing(once.clone()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(r1, r2);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, va) = split_indices(100, 0.2, 7).unwrap();
        assert_eq!((tr.len(), va.len()), (80, 20));
        let (tr2, va2) = split_indices(100, 0.2, 7).unwrap();
        assert_eq!((tr, va), (tr2, va2));
        let (tr, va) = split_indices(100, 0.2, 7).unwrap();
        let mut all: Vec<usize> = tr.into_iter().chain(va).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split_indices(100, 0.0, 1).is_err());
        assert!(split_indices(100, 1.0, 1).is_err());
        assert!(split_indices(9, 0.2, 1).is_err());
    }

    #[test]
    fn block_counts() {
        let rule = BlockRule::default();
        assert_eq!(halving_budget(8), 7);
        assert_eq!(partition_blocks(10_000, 8, &rule).unwrap().block_count(), 14);
        assert_eq!(partition_blocks(10_000, 1, &rule).unwrap().block_count(), 1);
        assert_eq!(partition_blocks(600_000, 8, &rule).unwrap().block_count(), 35);
        let small = partition_blocks(5, 8, &rule).unwrap();
        assert_eq!(small.block_count(), 5);
        assert_eq!(small.warnings.len(), 1);
        assert!(partition_blocks(10, 0, &rule).is_err());
    }

    #[test]
    fn blocks_cover_rows() {
        let p = partition_blocks(1003, 8, &BlockRule::default()).unwrap();
        let sizes: Vec<usize> = p.ranges.iter().map(|r| r.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1);
        let mut covered: Vec<usize> = p.ranges.iter().flat_map(|r| r.clone()).collect();
        covered.sort_unstable();
        assert_eq!(covered, (0..1003).collect::<Vec<_>>());
    }

    #[test]
    fn stale_lane_detected() {
        let cache = BsumCache::new(4, 2);
        let mut lane = cache.lane();
        assert!(lane.check(&(0..4)).is_ok());
        lane.expected = 3;
        assert!(matches!(lane.check(&(0..4)), Err(Error::StaleBsum { .. })));
    }

    fn bsum_fixture() -> (LRModel, Vec<CrossFeature>, Vec<Vec<u32>>, Vec<u8>) {
        use crate::features::BaseFieldId;
        let fields = vec![CrossFeature::single(BaseFieldId(0)), CrossFeature::single(BaseFieldId(1))];
        let cols = vec![vec![0, 1, 0, 1], vec![2, 2, 3, 3]];
        (LRModel::zeros(fields.clone(), Default::default()), fields, cols, vec![0, 1, 0, 1])
    }

    #[test]
    fn bsum_of_zero_model_is_zero() {
        let (model, fields, cols, labels) = bsum_fixture();
        let view = DesignView {
            columns: cols.iter().map(Vec::as_slice).collect(),
            labels: &labels,
        };
        let mut cache = BsumCache::new(4, 4);
        cache.train = vec![9.0; 4];
        cache.update(&model, &fields, &view, &[0..4], &view).unwrap();
        assert_eq!(cache.train, vec![0.0; 4]);
        assert_eq!(cache.valid, vec![0.0; 4]);
        assert!(cache.lane().check(&(0..4)).is_ok());
    }

    #[test]
    fn bsum_adds_bias_and_weights() {
        let (mut model, fields, cols, labels) = bsum_fixture();
        model.bias = 0.7;
        model.weights[0].set(1, 0.1);
        let view = DesignView {
            columns: cols.iter().map(Vec::as_slice).collect(),
            labels: &labels,
        };
        let mut cache = BsumCache::new(4, 4);
        cache.update(&model, &fields, &view, &[1..2], &view).unwrap();
        assert_eq!(cache.train[1], 0.7 + 0.1);
        assert!((cache.train[1] - 0.8).abs() < 1e-15);
        // Rows outside the scheduled blocks keep their old stamp.
        assert!(cache.lane().check(&(1..2)).is_ok());
        assert!(cache.lane().check(&(0..1)).is_err());
        assert_eq!(cache.valid, vec![0.7, 0.7 + 0.1, 0.7, 0.7 + 0.1]);
    }

    #[test]
    fn bsum_update_is_idempotent() {
        let (mut model, fields, cols, labels) = bsum_fixture();
        model.bias = -0.25;
        model.weights[1].set(3, 1.5);
        let view = DesignView {
            columns: cols.iter().map(Vec::as_slice).collect(),
            labels: &labels,
        };
        let mut cache = BsumCache::new(4, 4);
        cache.update(&model, &fields, &view, &[0..4], &view).unwrap();
        let (t, v) = (cache.train.clone(), cache.valid.clone());
        cache.update(&model, &fields, &view, &[0..4], &view).unwrap();
        assert_eq!((cache.train.clone(), cache.valid.clone()), (t, v));
        assert_eq!(cache.stamp(), 2);
    }
}
