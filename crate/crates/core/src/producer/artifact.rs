//! The artifact container.
//!
//! ```text
//! "ACXF" | version: u32 LE | section count: u32 LE | section*
//! section = tag: [u8; 4] | payload length: u64 LE | CRC-32 of payload: u32 LE | payload
//! ```
//!
//! Sections, in order: `SCHM` (schema JSON), `RULE` (fill rules,
//! discretization, hashing, base fields, feature set, bias, hyper-parameters
//! and metadata as JSON) and `WGHT` (one block of `bucket_count` little-endian
//! `f32` per feature-set member, in member order).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BaseField, DiscretizationSpec, FeatureSet, HashConfig};
use crate::lr::{FieldWeights, LRHyperParams, LRModel};
use crate::tabular::{FeatureSchema, FillRules};

pub const MAGIC: [u8; 4] = *b"ACXF";
pub const FORMAT_VERSION: u32 = 1;

const TAG_SCHEMA: [u8; 4] = *b"SCHM";
const TAG_RULES: [u8; 4] = *b"RULE";
const TAG_WEIGHTS: [u8; 4] = *b"WGHT";

/// Run facts stored alongside the model. No wall-clock time is recorded
/// unless `SOURCE_DATE_EPOCH` is set, so identical fits give identical bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactMetadata {
    pub seed: u64,
    pub base_auc: f64,
    pub solution_auc: f64,
    pub iterations: usize,
    pub stop_reason: Option<String>,
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProducerArtifact {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub fill_rules: FillRules,
    pub discretization: DiscretizationSpec,
    pub hash: HashConfig,
    pub base_fields: Vec<BaseField>,
    pub feature_set: FeatureSet,
    /// Fields equal the feature-set members; weights are `f32`-exact.
    pub model: LRModel,
    pub metadata: ArtifactMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesSection {
    fill_rules: FillRules,
    discretization: DiscretizationSpec,
    hash: HashConfig,
    base_fields: Vec<BaseField>,
    feature_set: FeatureSet,
    bias: f64,
    hyper: LRHyperParams,
    metadata: ArtifactMetadata,
}

impl ProducerArtifact {
    /// Assemble an artifact; the model is rounded to `f32` storage precision.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schema: FeatureSchema,
        fill_rules: FillRules,
        discretization: DiscretizationSpec,
        hash: HashConfig,
        base_fields: Vec<BaseField>,
        feature_set: FeatureSet,
        model: &LRModel,
        metadata: ArtifactMetadata,
    ) -> Result<Self> {
        let slots = model.slots_for(feature_set.members())?;
        let q = model.quantized();
        let model = LRModel {
            bias: q.bias,
            fields: feature_set.members().to_vec(),
            weights: slots.iter().map(|&s| q.weights[s].clone()).collect(),
            hyper: q.hyper,
        };
        let artifact = Self {
            format_version: FORMAT_VERSION,
            schema,
            fill_rules,
            discretization,
            hash,
            base_fields,
            feature_set,
            model,
            metadata,
        };
        artifact.validate()?;
        Ok(artifact)
    }

    fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        self.hash.validate()?;
        let corrupt = |m: String| Err(Error::Corrupt(m));
        if self.fill_rules.rules.len() != self.schema.fields.len() {
            return corrupt("fill rules do not match the schema".into());
        }
        if self.feature_set.n_original() != self.base_fields.len() {
            return corrupt("feature set and base fields disagree".into());
        }
        if self.base_fields.iter().any(|b| b.source_column() >= self.schema.fields.len()) {
            return corrupt("base field refers to a column outside the schema".into());
        }
        if self.model.fields != self.feature_set.members() {
            return corrupt("model fields differ from the feature set".into());
        }
        let b = self.hash.bucket_count;
        if self.model.weights.iter().flat_map(FieldWeights::iter).any(|(k, _)| k >= b) {
            return corrupt("weight bucket out of range".into());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let schema = serde_json::to_vec(&self.schema)?;
        let rules = serde_json::to_vec(&RulesSection {
            fill_rules: self.fill_rules.clone(),
            discretization: self.discretization.clone(),
            hash: self.hash,
            base_fields: self.base_fields.clone(),
            feature_set: self.feature_set.clone(),
            bias: self.model.bias,
            hyper: self.model.hyper,
            metadata: self.metadata.clone(),
        })?;
        let b = self.hash.bucket_count as usize;
        let mut weights = Vec::with_capacity(self.model.weights.len() * b * 4);
        for w in &self.model.weights {
            for v in w.to_dense_f32(b) {
                weights.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sections = [(TAG_SCHEMA, schema), (TAG_RULES, rules), (TAG_WEIGHTS, weights)];
        let mut out = Vec::with_capacity(12 + sections.iter().map(|(_, p)| p.len() + 16).sum::<usize>());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (tag, payload) in &sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
            out.extend_from_slice(payload);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        match cur.take(4) {
            Some(m) if m == MAGIC => {}
            _ => return Err(Error::BadMagic),
        }
        let header = |c: &mut Cursor<'_>| c.u32().ok_or_else(|| Error::Checksum("header".into()));
        let version = header(&mut cur)?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = header(&mut cur)?;
        let (mut schema, mut rules, mut weights) = (None, None, None);
        for _ in 0..count {
            let tag: [u8; 4] = cur
                .take(4)
                .ok_or_else(|| Error::Checksum("section table".into()))?
                .try_into()
                .expect("four bytes");
            let name = String::from_utf8_lossy(&tag).into_owned();
            let len = cur.u64().ok_or_else(|| Error::Checksum(name.clone()))?;
            let crc = cur.u32().ok_or_else(|| Error::Checksum(name.clone()))?;
            let payload = usize::try_from(len)
                .ok()
                .and_then(|l| cur.take(l))
                .ok_or_else(|| Error::Checksum(name.clone()))?;
            if crc32fast::hash(payload) != crc {
                return Err(Error::Checksum(name));
            }
            let slot = match tag {
                TAG_SCHEMA => &mut schema,
                TAG_RULES => &mut rules,
                TAG_WEIGHTS => &mut weights,
                _ => return Err(Error::Corrupt(format!("unknown section `{name}`"))),
            };
            if slot.replace(payload).is_some() {
                return Err(Error::Corrupt(format!("duplicate section `{name}`")));
            }
        }
        if cur.pos != bytes.len() {
            return Err(Error::Corrupt("trailing bytes after the last section".into()));
        }
        let missing = |t: &str| Error::Corrupt(format!("missing section `{t}`"));
        let schema: FeatureSchema = serde_json::from_slice(schema.ok_or_else(|| missing("SCHM"))?)?;
        let rules: RulesSection = serde_json::from_slice(rules.ok_or_else(|| missing("RULE"))?)?;
        let weights = weights.ok_or_else(|| missing("WGHT"))?;

        rules.hash.validate()?;
        let b = rules.hash.bucket_count as usize;
        let members = rules.feature_set.members().to_vec();
        if weights.len() != members.len() * b * 4 {
            return Err(Error::Corrupt(format!(
                "weight section has {} bytes, expected {}",
                weights.len(),
                members.len() * b * 4
            )));
        }
        let model_weights = weights
            .chunks_exact(b * 4)
            .map(|chunk| {
                let dense: Vec<f32> = chunk
                    .chunks_exact(4)
                    .map(|x| f32::from_le_bytes(x.try_into().expect("four bytes")))
                    .collect();
                FieldWeights::from_dense_f32(&dense)
            })
            .collect();
        let artifact = Self {
            format_version: version,
            schema,
            fill_rules: rules.fill_rules,
            discretization: rules.discretization,
            hash: rules.hash,
            base_fields: rules.base_fields,
            feature_set: rules.feature_set,
            model: LRModel {
                bias: rules.bias,
                fields: members,
                weights: model_weights,
                hyper: rules.hyper,
            },
            metadata: rules.metadata,
        };
        artifact.validate()?;
        Ok(artifact)
    }

    /// Write atomically: a temporary sibling is renamed over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().expect("eight bytes")))
    }
}
