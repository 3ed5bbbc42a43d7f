//! Run configuration: one TOML file with `[dataset]`, `[embeddings]`,
//! `[model]`, `[train]` and `[run]` tables, plus `section.key=value`
//! overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use graphrel::data::presets::preset;
use graphrel::data::{Anchor, DataFormat, DatasetSpec, Document};
use graphrel::decoder::DecodeMode;
use graphrel::embeddings::ProviderSpec;
use graphrel::model::ModelConfig;
use graphrel::training::TrainConfig;
use graphrel::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::io::read_documents;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub embeddings: ProviderSpec,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub run: RunSection,
}

/// Either a named preset or an explicit schema; explicit keys win over the
/// preset. Label lists left empty are collected from the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DataFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_structured: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tags: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
    pub train: PathBuf,
    pub dev: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_h: usize,
    pub d_tag: usize,
    pub l_psi: usize,
    pub l_phi: usize,
    pub d_lstm: usize,
    pub d_edge: usize,
    pub d_rel: usize,
    pub top_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode: Option<DecodeMode>,
    pub init_seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            d_h: 300,
            d_tag: 100,
            l_psi: 1,
            l_phi: 1,
            d_lstm: 300,
            d_edge: 256,
            d_rel: 128,
            top_k: 3,
            decode: None,
            init_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seeds: vec![0], out_dir: PathBuf::from("runs") }
    }
}

fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| Error::Usage(format!("override {key:?} must look like section.key")))?;
    // Values parse as TOML literals; anything else is taken as a string.
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(t) = entry else {
        return Err(Error::Usage(format!("{section} is not a table")));
    };
    t.insert(field.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path`, applies `key=value` overrides, validates everything and
    /// makes relative paths relative to the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override {o:?} must look like section.key=value")))?;
            set_path(&mut table, k.trim(), v.trim())?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.train.validate()?;
        if cfg.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.train);
        fix(&mut self.dataset.dev);
        if let Some(t) = &mut self.dataset.test {
            fix(t);
        }
        if let ProviderSpec::Precomputed { path, .. } = &mut self.embeddings {
            fix(path);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot echo configuration: {e}")))
    }

    fn format(&self) -> Result<DataFormat> {
        match (self.dataset.format, &self.dataset.preset) {
            (Some(f), _) => Ok(f),
            (None, Some(name)) => Ok(lookup_preset(name)?.format),
            (None, None) => Err(Error::Config("dataset needs either a preset or a format".into())),
        }
    }

    /// Loads the train and dev splits and builds the dataset schema.
    pub fn load_data(&self) -> Result<(DatasetSpec, Vec<Document>, Vec<Document>)> {
        let format = self.format()?;
        let train = read_documents(&self.dataset.train, Some(format))?;
        let dev = read_documents(&self.dataset.dev, Some(format))?;
        let spec = self.dataset_spec(format, train.iter().chain(&dev))?;
        for d in train.iter().chain(&dev) {
            d.validate(Some(&spec))?;
        }
        Ok((spec, train, dev))
    }

    /// Loads the optional test split, checked against `spec`.
    pub fn load_test(&self, spec: &DatasetSpec) -> Result<Option<Vec<Document>>> {
        let Some(path) = &self.dataset.test else {
            return Ok(None);
        };
        let docs = read_documents(path, Some(spec.format))?;
        for d in &docs {
            d.validate(Some(spec))?;
        }
        Ok(Some(docs))
    }

    fn dataset_spec<'a>(&self, format: DataFormat, docs: impl Iterator<Item = &'a Document> + Clone) -> Result<DatasetSpec> {
        let d = &self.dataset;
        let mut spec = match &d.preset {
            Some(name) => lookup_preset(name)?.spec(docs.clone()),
            None => DatasetSpec::infer(d.name.as_deref().unwrap_or("custom"), format, docs.clone()),
        };
        if let Some(n) = &d.name {
            spec.name = n.clone();
        }
        spec.format = format;
        if let Some(l) = &d.entity_labels {
            spec.entity_labels = l.clone();
        }
        if let Some(l) = &d.relation_labels {
            spec.relation_labels = l.clone();
        }
        if let Some(v) = d.tree_structured {
            spec.tree_structured = v;
        }
        if let Some(v) = d.oracle_tags {
            spec.oracle_tags = v;
        }
        if let Some(a) = d.anchor {
            spec.anchor = a;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn model_config(&self, spec: DatasetSpec, seed: u64) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            dataset: spec,
            embeddings: self.embeddings.clone(),
            d_h: m.d_h,
            d_tag: m.d_tag,
            l_psi: m.l_psi,
            l_phi: m.l_phi,
            d_lstm: m.d_lstm,
            d_edge: m.d_edge,
            d_rel: m.d_rel,
            top_k: m.top_k,
            decode: m.decode,
            init_seed: m.init_seed.wrapping_add(seed),
        }
    }
}

pub fn lookup_preset(name: &str) -> Result<&'static graphrel::data::presets::Preset> {
    preset(name).ok_or_else(|| Error::Config(format!("unknown dataset preset {name:?}")))
}
