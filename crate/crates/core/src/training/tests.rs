use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::toy::{generate_toy, ToyConfig};
use crate::decoder::ScorePack;
use crate::embeddings::ProviderSpec;
use crate::model::ModelConfig;
use crate::numerics::finite_diff_check;

fn model_config(l_psi: usize, l_phi: usize, oracle: bool) -> ModelConfig {
    let mut dataset = crate::data::toy::toy_spec();
    dataset.oracle_tags = oracle;
    ModelConfig {
        dataset,
        embeddings: ProviderSpec::HashRandom { seed: 1, d_f: 6 },
        d_h: 3,
        d_tag: 3,
        l_psi,
        l_phi,
        d_lstm: 3,
        d_edge: 4,
        d_rel: 3,
        top_k: 2,
        decode: None,
        init_seed: 5,
    }
}

fn tiny_docs(n: usize, max_words: usize) -> Vec<Document> {
    generate_toy(&ToyConfig {
        n_train: n,
        n_dev: 0,
        min_words: 4,
        max_words,
        min_entities: 2,
        max_entities: 3,
        seed: 3,
    })
    .train
}

fn gold_pack(graph: &EncodedGraph, n_rel: usize) -> (ScorePack, Tensor) {
    let n = graph.node_count();
    let neg = f64::NEG_INFINITY;
    let mut s_edge = Tensor::full(&[n, n], neg);
    let mut s_rel = Tensor::full(&[n, n, n_rel], neg);
    for i in 1..n {
        let h = graph.gold_heads[i];
        s_edge.set(i, h, 0.0);
        s_rel.data_mut()[(i * n + h) * n_rel + graph.gold_relations[i]] = 0.0;
    }
    let tags = Tensor::one_hot(&graph.gold_tags, 7).unwrap().map(|v| if v == 1.0 { 0.0 } else { neg });
    (
        ScorePack {
            s_edge,
            s_rel,
            aux_edge: vec![],
        },
        tags,
    )
}

#[test]
fn perfect_scores_give_zero_loss() {
    let docs = tiny_docs(1, 6);
    let spec = crate::data::toy::toy_spec();
    let graph = encode_graph(&docs[0], &spec).unwrap();
    let (mut sp, tags) = gold_pack(&graph, 5);
    sp.aux_edge.push(sp.s_edge.clone());
    let l = loss_of_scores(&sp, Some(&tags), &graph, 0.1, 1.0).unwrap();
    assert_eq!(l, LossValues::default());
}

#[test]
fn uniform_edges_cost_n_log_n() {
    let docs = tiny_docs(1, 6);
    let graph = encode_graph(&docs[0], &crate::data::toy::toy_spec()).unwrap();
    let n = graph.node_count();
    let (mut sp, _) = gold_pack(&graph, 5);
    sp.s_edge = Tensor::zeros(&[n, n]);
    for i in 0..n {
        sp.s_edge.set(i, i, f64::NEG_INFINITY);
    }
    let l = loss_of_scores(&sp, None, &graph, 0.1, 1.0).unwrap();
    let words = (n - 1) as f64;
    assert!((l.edge - words * words.ln()).abs() < 1e-12);
    assert_eq!(l.tag, 0.0);
}

#[test]
fn zero_tag_weight_ignores_tagger_outputs() {
    let docs = tiny_docs(1, 6);
    let graph = encode_graph(&docs[0], &crate::data::toy::toy_spec()).unwrap();
    let (sp, _) = gold_pack(&graph, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = graph.node_count();
    let a = Tensor::new(vec![n, 7], (0..n * 7).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    let b = a.map(|v| v * 2.0 - 1.0);
    let la = loss_of_scores(&sp, Some(&a), &graph, 0.0, 1.0).unwrap();
    let lb = loss_of_scores(&sp, Some(&b), &graph, 0.0, 1.0).unwrap();
    assert_eq!(la.total, lb.total);
    assert_ne!(la.tag, lb.tag);
}

/// Central differences over every parameter entry against the gradients
/// accumulated in the store.
fn param_grad_error(model: &mut ParserModel, doc: &Document, lambda1: f64) -> f64 {
    let graph = encode_graph(doc, &model.config.dataset).unwrap();
    let loss_at = |m: &ParserModel| -> f64 {
        let mut g = Graph::new();
        let fwd = m.forward(&mut g, doc, &graph, None).unwrap();
        let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, &graph, lambda1, 1.0).unwrap();
        g.value(l.total).item()
    };
    let mut g = Graph::new();
    let fwd = model.forward(&mut g, doc, &graph, None).unwrap();
    let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, &graph, lambda1, 1.0).unwrap();
    let grads = g.backward(l.total).unwrap();
    model.store.zero_grad();
    model.store.accumulate(&g, &grads);
    let ids: Vec<_> = model.store.ids().collect();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = model.store.get(id).grad.clone();
        for k in 0..model.store.value(id).len() {
            let orig = model.store.value(id).data()[k];
            model.store.get_mut(id).value.data_mut()[k] = orig + eps;
            let up = loss_at(model);
            model.store.get_mut(id).value.data_mut()[k] = orig - eps;
            let down = loss_at(model);
            model.store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.as_ref().map_or(0.0, |t| t.data()[k]);
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
        }
    }
    model.store.zero_grad();
    worst
}

#[test]
fn pipeline_parameter_gradients() {
    let docs = tiny_docs(4, 4);
    let doc = docs.iter().find(|d| d.words.len() == 4).expect("a 4-word document");
    for (l_psi, l_phi) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for lambda1 in [0.0, 0.1] {
            let mut model = ParserModel::new(model_config(l_psi, l_phi, false)).unwrap();
            let err = param_grad_error(&mut model, doc, lambda1);
            assert!(err < 1e-4, "l_psi={l_psi} l_phi={l_phi} lambda1={lambda1}: {err}");
        }
    }
}

#[test]
fn pipeline_input_gradients() {
    let docs = tiny_docs(4, 4);
    let doc = docs.iter().find(|d| d.words.len() == 4).unwrap();
    let model = ParserModel::new(model_config(1, 1, false)).unwrap();
    let graph = encode_graph(doc, &model.config.dataset).unwrap();
    let x = model.word_features(doc).unwrap();
    let err = finite_diff_check(
        |g, x| {
            let root = g.param(&model.store, model.embedder.root);
            let feats = g.concat_rows(&[root, x])?;
            let out = model.tagger.forward(g, &model.store, feats)?;
            let tags = g.value(out.logits).argmax_last();
            let e_tag = model.tagger.tag_embed(g, &model.store, &tags)?;
            let input = g.concat_cols(&[e_tag, feats])?;
            let scores = model.scorer.forward(g, &model.store, input)?;
            Ok(compute_loss(g, &scores, Some(out.logits), &graph, 0.1, 1.0)?.total)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn oracle_mode_leaves_tagger_without_gradient() {
    let docs = tiny_docs(1, 6);
    let model = ParserModel::new(model_config(0, 0, true)).unwrap();
    let mut store = model.store.clone();
    let graph = encode_graph(&docs[0], &model.config.dataset).unwrap();
    let mut g = Graph::new();
    let fwd = model.forward(&mut g, &docs[0], &graph, None).unwrap();
    assert!(fwd.tag_logits.is_none());
    assert_eq!(fwd.tags, graph.gold_tags);
    let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, &graph, 0.0, 1.0).unwrap();
    let grads = g.backward(l.total).unwrap();
    store.accumulate(&g, &grads);
    for id in [model.tagger.classifier.weight, model.tagger.lstm.forward.input_weight] {
        assert!(store.get(id).grad.is_none());
    }
    assert!(store.get(model.tagger.embed.weight).grad.is_some());
}

#[test]
fn accumulated_batch_gradient_is_the_mean() {
    let docs = tiny_docs(2, 6);
    let model = ParserModel::new(model_config(1, 0, false)).unwrap();
    let graphs: Vec<_> = docs.iter().map(|d| encode_graph(d, &model.config.dataset).unwrap()).collect();
    let mut separate = model.store.clone();
    for (d, gr) in docs.iter().zip(&graphs) {
        let mut g = Graph::new();
        let fwd = model.forward(&mut g, d, gr, None).unwrap();
        let l = compute_loss(&mut g, &fwd.scores, fwd.tag_logits, gr, 0.1, 1.0).unwrap();
        let half = g.scale(l.total, 0.5);
        let grads = g.backward(half).unwrap();
        separate.accumulate(&g, &grads);
    }
    let mut joint = model.store.clone();
    let mut g = Graph::new();
    let mut totals = Vec::new();
    for (d, gr) in docs.iter().zip(&graphs) {
        let fwd = model.forward(&mut g, d, gr, None).unwrap();
        totals.push(compute_loss(&mut g, &fwd.scores, fwd.tag_logits, gr, 0.1, 1.0).unwrap().total);
    }
    let sum = g.add(totals[0], totals[1]).unwrap();
    let mean = g.scale(sum, 0.5);
    let grads = g.backward(mean).unwrap();
    joint.accumulate(&g, &grads);
    for id in model.store.ids() {
        let (a, b) = (&separate.get(id).grad, &joint.get(id).grad);
        match (a, b) {
            (Some(a), Some(b)) => {
                for (x, y) in a.data().iter().zip(b.data()) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
            (None, None) => {}
            _ => panic!("gradient presence differs"),
        }
    }
}

#[test]
fn eval_schedule_and_determinism() {
    let c = generate_toy(&ToyConfig {
        n_train: 12,
        n_dev: 4,
        ..ToyConfig::default()
    });
    let cfg = TrainConfig {
        batch_size: 2,
        max_steps: 6,
        eval_every: 2,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let run = |out: Option<&Path>| {
        let mut model = ParserModel::new(model_config(1, 1, false)).unwrap();
        let mut seen = 0;
        let report = train(&mut model, &cfg, &c.train, &c.dev, out, |_| seen += 1).unwrap();
        assert_eq!(seen, 6);
        report
    };
    let a = run(Some(dir.path()));
    let b = run(None);
    assert_eq!(a.log.iter().filter(|r| r.split == "dev").count(), 3);
    assert_eq!(metrics_csv(&a.log), metrics_csv(&b.log));
    assert!(metrics_csv(&a.log).starts_with(METRIC_HEADER));
    for name in ["best.json", "last.json", "metrics.csv"] {
        assert!(dir.path().join(name).exists());
    }
    let ck = crate::numerics::checkpoint::Checkpoint::load(&dir.path().join("best.json")).unwrap();
    let restored = ParserModel::from_checkpoint(&ck).unwrap();
    assert_eq!(restored.config, model_config(1, 1, false));
    for r in &a.log {
        assert!(r.loss.tag >= 0.0 && r.loss.edge >= 0.0 && r.loss.rel >= 0.0 && r.loss.total >= 0.0);
    }
}

#[test]
fn config_checks() {
    assert_eq!(TrainConfig::default().eval_events(), 6);
    let bad = TrainConfig {
        eval_every: 7,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    let mut model = ParserModel::new(model_config(0, 0, false)).unwrap();
    let err = train(&mut model, &TrainConfig::default(), &[], &[], None, |_| {});
    assert!(matches!(err, Err(Error::Usage(_))));
}
