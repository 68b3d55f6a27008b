//! Turning a filled raw table into hashed bucket columns, one per base field.

use serde::{Deserialize, Serialize};

use super::discretize::{bin_index, DiscretizationSpec};
use super::hash::{hash_base, hash_bin, CrossHasher, HashConfig};
use super::{BaseFieldId, CrossFeature};
use crate::error::{Error, Result};
use crate::lr::DesignView;
use crate::tabular::{RawColumn, RawTable};

/// Where a base field's values come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSource {
    Categorical { column: usize },
    Binned { column: usize, granularity: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseField {
    pub name: String,
    pub source: BaseSource,
}

/// Bucket ids per base field (column-major) and the labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodedData {
    pub columns: Vec<Vec<u32>>,
    pub labels: Vec<u8>,
}

impl EncodedData {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Bucket column of `cross` over every row.
    pub fn cross_column(&self, cross: &CrossFeature, hash: &HashConfig) -> Vec<u32> {
        if cross.is_original() {
            return self.columns[cross.constituents()[0].index()].clone();
        }
        let hasher = CrossHasher::new(cross, hash);
        (0..self.n_rows())
            .map(|row| hasher.bucket_with(|id| self.columns[id as usize][row]))
            .collect()
    }

    /// View over base columns only (every member must be original).
    pub fn base_view(&self) -> DesignView<'_> {
        DesignView {
            columns: self.columns.iter().map(Vec::as_slice).collect(),
            labels: &self.labels,
        }
    }
}

/// Encode every row of a filled table. Missing cells are rejected.
pub fn encode_table(
    table: &RawTable,
    base: &[BaseField],
    spec: &DiscretizationSpec,
    hash: &HashConfig,
) -> Result<EncodedData> {
    let n = table.n_rows();
    let mut columns = Vec::with_capacity(base.len());
    for (i, field) in base.iter().enumerate() {
        let id = BaseFieldId(i as u32);
        let col = match (&field.source, table.columns.get(field.source_column())) {
            (BaseSource::Categorical { .. }, Some(RawColumn::Categorical(values))) => values
                .iter()
                .map(|v| {
                    v.as_deref()
                        .map(|t| hash_base(id, t.as_bytes(), hash))
                        .ok_or_else(|| missing(&field.name))
                })
                .collect::<Result<Vec<u32>>>()?,
            (BaseSource::Binned { column, granularity }, Some(RawColumn::Numerical(values))) => {
                let b = spec.binning_for(*column).ok_or_else(|| {
                    Error::FieldMismatch(format!("no binning for numeric column {column}"))
                })?;
                values
                    .iter()
                    .map(|v| {
                        v.map(|x| hash_bin(id, bin_index(x, b.min, b.max, *granularity), hash))
                            .ok_or_else(|| missing(&field.name))
                    })
                    .collect::<Result<Vec<u32>>>()?
            }
            _ => {
                return Err(Error::FieldMismatch(format!(
                    "base field `{}` does not match its source column",
                    field.name
                )))
            }
        };
        debug_assert_eq!(col.len(), n);
        columns.push(col);
    }
    Ok(EncodedData {
        columns,
        labels: table.labels.clone(),
    })
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(format!("field `{name}` has a missing value; fill the table first"))
}

impl BaseField {
    pub fn source_column(&self) -> usize {
        match self.source {
            BaseSource::Categorical { column } | BaseSource::Binned { column, .. } => column,
        }
    }
}
