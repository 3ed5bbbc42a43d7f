//! Joint training of tagger and scorer.

mod loss;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{encode_graph, Document, EncodedGraph};
use crate::embeddings::ProviderKind;
use crate::error::{Error, Result};
use crate::evaluation::{exact_micro_f1, Prf, TripleSet};
use crate::model::ParserModel;
use crate::numerics::{AdamW, Graph, Tensor};

pub use loss::{compute_loss, loss_of_scores, LossValues, LossVars};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub eval_every: usize,
    /// Tag loss weight; forced to 0 with oracle tags.
    pub lambda1: f64,
    pub lambda2: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Global gradient-norm clipping, off by default.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 8,
            max_steps: 3000,
            eval_every: 500,
            lambda1: 0.1,
            lambda2: 1.0,
            weight_decay: 0.0,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 {
            return bad("batch_size, max_steps and eval_every must be positive".into());
        }
        if self.max_steps % self.eval_every != 0 {
            return bad(format!(
                "eval_every ({}) must divide max_steps ({})",
                self.eval_every, self.max_steps
            ));
        }
        if !(self.lr > 0.0) || !(self.lambda1 >= 0.0) || !(self.lambda2 > 0.0) || !(self.weight_decay >= 0.0) {
            return bad(format!("invalid learning rate, loss weights or decay: {self:?}"));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive".into());
        }
        Ok(())
    }

    pub fn eval_events(&self) -> usize {
        self.max_steps / self.eval_every
    }
}

/// One line of the metric log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub step: usize,
    pub split: String,
    pub loss: LossValues,
    pub prf: Option<Prf>,
}

pub const METRIC_HEADER: &str = "step,split,L_tag,L_edge,L_rel,L,micro_P,micro_R,micro_F1";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRIC_HEADER}\n");
    for r in rows {
        let l = &r.loss;
        write!(out, "{},{},{},{},{},{}", r.step, r.split, l.tag, l.edge, l.rel, l.total).unwrap();
        match &r.prf {
            Some(p) => writeln!(out, ",{},{},{}", p.precision, p.recall, p.f1).unwrap(),
            None => out.push_str(",,,\n"),
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub log: Vec<MetricRow>,
    pub best_step: usize,
    pub best_f1: f64,
    /// Relations the encoder could not attach (training split).
    pub dropped_relations: usize,
}

/// A split encoded once, with frozen features cached.
struct Prepared<'a> {
    docs: &'a [Document],
    graphs: Vec<EncodedGraph>,
    features: Vec<Option<Tensor>>,
}

fn prepare<'a>(model: &ParserModel, docs: &'a [Document]) -> Result<Prepared<'a>> {
    let spec = &model.config.dataset;
    let frozen = model.embedder.provider.kind() != ProviderKind::TrainableLookup;
    let graphs = docs.iter().map(|d| encode_graph(d, spec)).collect::<Result<Vec<_>>>()?;
    let features = docs
        .iter()
        .map(|d| frozen.then(|| model.word_features(d)).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { docs, graphs, features })
}

/// Dev loss (per-document mean) and exact-match scores.
pub fn evaluate(model: &ParserModel, docs: &[Document], lambda1: f64, lambda2: f64) -> Result<(LossValues, Prf)> {
    let prepared = prepare(model, docs)?;
    evaluate_prepared(model, &prepared, lambda1, lambda2)
}

fn evaluate_prepared(model: &ParserModel, p: &Prepared, lambda1: f64, lambda2: f64) -> Result<(LossValues, Prf)> {
    let mut loss = LossValues::default();
    let mut pred: Vec<(String, TripleSet)> = Vec::with_capacity(p.docs.len());
    let mut gold = Vec::with_capacity(p.docs.len());
    let inv = 1.0 / p.docs.len().max(1) as f64;
    for ((doc, graph), feats) in p.docs.iter().zip(&p.graphs).zip(&p.features) {
        let mut g = Graph::new();
        let fwd = model.forward(&mut g, doc, graph, feats.as_ref())?;
        let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, graph, lambda1, lambda2)?;
        loss.add_scaled(&l.values(&g), inv);
        let prediction = model.decode(&g, &fwd, graph)?;
        pred.push((doc.id.clone(), prediction.triples));
        gold.push((doc.id.clone(), doc.gold_triples()));
    }
    Ok((loss, exact_micro_f1(&pred, &gold)?.micro))
}

/// Mini-batch AdamW training with periodic dev evaluation. The model ends
/// up holding the parameters of the best dev evaluation. With `out_dir`,
/// `last.json`, `best.json` and `metrics.csv` are written there.
pub fn train(
    model: &mut ParserModel,
    cfg: &TrainConfig,
    train_docs: &[Document],
    dev_docs: &[Document],
    out_dir: Option<&Path>,
    mut on_eval: impl FnMut(&MetricRow),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_docs.is_empty() {
        return Err(Error::usage("training split is empty"));
    }
    let lambda1 = if model.oracle_tags() { 0.0 } else { cfg.lambda1 };
    let train = prepare(model, train_docs)?;
    let dev = prepare(model, dev_docs)?;
    let dropped_relations = train.graphs.iter().map(|g| g.dropped_relations).sum();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }

    let optimizer = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut log = Vec::new();
    let mut running = LossValues::default();
    let mut running_docs = 0usize;
    let mut best: Option<(usize, f64, std::collections::BTreeMap<String, Tensor>)> = None;
    let scale = 1.0 / cfg.batch_size as f64;

    for step in 1..=cfg.max_steps {
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order = (0..train.docs.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            let mut g = Graph::new();
            let fwd = model.forward(&mut g, &train.docs[i], &train.graphs[i], train.features[i].as_ref())?;
            let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, &train.graphs[i], lambda1, cfg.lambda2)?;
            let values = l.values(&g);
            if !values.total.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at step {step} on document {}",
                    train.docs[i].id
                )));
            }
            running.add_scaled(&values, 1.0);
            running_docs += 1;
            let scaled = g.scale(l.total, scale);
            let grads = g.backward(scaled)?;
            model.store.accumulate(&g, &grads);
        }
        if let Some(c) = cfg.clip_norm {
            model.store.clip_grad_norm(c);
        }
        optimizer.step(&mut model.store)?;

        if step % cfg.eval_every == 0 {
            let mut train_loss = LossValues::default();
            train_loss.add_scaled(&running, 1.0 / running_docs as f64);
            running = LossValues::default();
            running_docs = 0;
            let train_row = MetricRow {
                step,
                split: "train".into(),
                loss: train_loss,
                prf: None,
            };
            on_eval(&train_row);
            log.push(train_row);

            let (dev_loss, prf) = evaluate_prepared(model, &dev, lambda1, cfg.lambda2)?;
            let dev_row = MetricRow {
                step,
                split: "dev".into(),
                loss: dev_loss,
                prf: Some(prf),
            };
            on_eval(&dev_row);
            log.push(dev_row);

            let improved = best.as_ref().is_none_or(|(_, f, _)| prf.f1 > *f);
            if improved {
                best = Some((step, prf.f1, model.store.snapshot()));
            }
            if let Some(dir) = out_dir {
                let meta = json!({"step": step, "dev_f1": prf.f1, "train": cfg});
                let ck = model.checkpoint(meta)?;
                ck.save(&dir.join("last.json"))?;
                if improved {
                    ck.save(&dir.join("best.json"))?;
                }
                fs::write(dir.join("metrics.csv"), metrics_csv(&log))?;
            }
        }
    }

    let (best_step, best_f1, params) = best.expect("max_steps is a positive multiple of eval_every");
    model.store.restore(&params)?;
    Ok(TrainReport {
        log,
        best_step,
        best_f1,
        dropped_relations,
    })
}

#[cfg(test)]
mod tests;
