use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{encode_graph, parse_conllu, toy, Anchor, DataFormat, Document, EntitySpan, NodeRef, RelationTriple};

fn pack(s_edge: Vec<Vec<f64>>, n_rel: usize) -> ScorePack {
    let n = s_edge.len();
    ScorePack {
        s_edge: Tensor::from_rows(&s_edge).unwrap(),
        s_rel: Tensor::zeros(&[n, n, n_rel]),
        aux_edge: vec![],
    }
}

fn random_energy(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { f64::NEG_INFINITY } else { rng.random_range(-5.0..5.0) })
                .collect()
        })
        .collect()
}

const NEG: f64 = f64::NEG_INFINITY;

#[test]
fn greedy_takes_row_argmax() {
    let sp = pack(vec![vec![NEG, 0.0, 0.0], vec![0.0, NEG, 0.5], vec![NEG, 2.0, NEG]], 1);
    let pr = greedy_decode(&sp).unwrap();
    assert_eq!(pr.heads, vec![0, 2, 1]);
    assert!(!pr.valid_tree);
    let sp = pack(vec![vec![NEG, 0.0, 0.0], vec![3.0, NEG, 0.5], vec![NEG, 2.0, 1.0]], 1);
    assert_eq!(greedy_decode(&sp).unwrap().heads[2], 1);
}

#[test]
fn greedy_matches_row_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let e = random_energy(&mut rng, 6);
        let pr = greedy_decode(&pack(e.clone(), 2)).unwrap();
        for i in 1..6 {
            let mut best = 0;
            for j in 0..6 {
                if e[i][j] > e[i][best] {
                    best = j;
                }
            }
            assert_eq!(pr.heads[i], best);
        }
    }
}

#[test]
fn energy_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 3;
    let r = 2;
    let mut sp = pack(random_energy(&mut rng, n), r);
    for v in sp.s_rel.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let energy = build_energy(&sp, 10.0).unwrap();
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| 10.0 * sp.s_edge.at(i, j)).collect();
        let z: f64 = row.iter().filter(|v| v.is_finite()).map(|v| v.exp()).sum();
        for j in 0..n {
            if i == j {
                assert_eq!(energy[i][j], NEG);
                continue;
            }
            let rels: Vec<f64> = (0..r).map(|k| 10.0 * sp.s_rel.at3(i, j, k)).collect();
            let zr: f64 = rels.iter().map(|v| v.exp()).sum();
            let best = rels.iter().map(|v| v - zr.ln()).fold(NEG, f64::max);
            let expected = row[j] - z.ln() + best;
            assert!((energy[i][j] - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn energy_limits() {
    let sp = pack(vec![vec![NEG, 0.0, 0.0], vec![1.0, NEG, 0.0], vec![0.0, 2.0, NEG]], 1);
    let e = build_energy(&sp, 1e3).unwrap();
    assert!(e[1][0].abs() < 1e-12);
    assert!(e[1][2] < -900.0);
    // A single relation label contributes nothing.
    let e1 = build_energy(&sp, 1.0).unwrap();
    let z = (1f64.exp() + 1.0).ln();
    assert!((e1[1][0] - (1.0 - z)).abs() < 1e-12);
    assert!(build_energy(&sp, 0.0).is_err());
}

#[test]
fn single_word_is_forced() {
    let sp = pack(vec![vec![NEG, 0.0], vec![0.3, NEG]], 3);
    let pr = mst_decode_with(&sp, true, 10.0).unwrap();
    assert_eq!(pr.heads, vec![0, 0]);
}

#[test]
fn contraction_matches_brute_force() {
    // Nodes 1 and 2 prefer each other, forming a cycle.
    let e = vec![vec![NEG, NEG, NEG], vec![1.0, NEG, 5.0], vec![3.0, 6.0, NEG]];
    let (heads, total) = max_arborescence(&e, false).unwrap();
    let (bf, bf_total) = brute_force_arborescence(&e, false).unwrap();
    assert_eq!(total, bf_total);
    assert_eq!(heads, bf);
    assert_eq!(heads, vec![0, 2, 0]);
}

#[test]
fn unattachable_node_is_a_decode_error() {
    let e = vec![vec![NEG, 0.0, 0.0], vec![1.0, NEG, NEG], vec![NEG, NEG, NEG]];
    assert!(matches!(max_arborescence(&e, false), Err(Error::Decode(_))));
}

#[test]
fn brute_force_contracts() {
    let e = vec![vec![NEG, 0.0], vec![1.0, NEG]];
    assert_eq!(brute_force_arborescence(&e, true).unwrap(), (vec![0, 0], 1.0));
    let flat: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { NEG } else { 0.0 }).collect())
        .collect();
    assert_eq!(brute_force_arborescence(&flat, false).unwrap().0, vec![0, 0, 0, 0]);
    assert_eq!(brute_force_arborescence(&flat, true).unwrap().0, vec![0, 0, 1, 1]);
    let big = vec![vec![0.0; 9]; 9];
    assert!(matches!(brute_force_arborescence(&big, false), Err(Error::Size(_))));
}

#[test]
fn brute_force_shift_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let e = random_energy(&mut rng, 4);
        let shifted: Vec<Vec<f64>> = e.iter().map(|r| r.iter().map(|v| v + 3.5).collect()).collect();
        assert_eq!(
            brute_force_arborescence(&e, false).unwrap().0,
            brute_force_arborescence(&shifted, false).unwrap().0
        );
    }
}

#[test]
fn mst_equals_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 3..=6 {
        for trial in 0..200 {
            let e = random_energy(&mut rng, n);
            let single = trial % 2 == 0;
            let (heads, total) = max_arborescence(&e, single).unwrap();
            let (_, best) = brute_force_arborescence(&e, single).unwrap();
            assert_eq!(total, best, "n={n} trial={trial}");
            assert!(is_valid_tree(&heads, single));
        }
    }
}

#[test]
fn valid_tree_cases() {
    assert!(is_valid_tree(&[0, 0, 1, 2], true));
    assert!(!is_valid_tree(&[0, 0, 3, 2], false));
    assert!(!is_valid_tree(&[0, 0, 0], true));
    assert!(is_valid_tree(&[0, 0, 0], false));
    assert!(!is_valid_tree(&[0, 1], false));
    assert!(!is_valid_tree(&[0, 5], false));
}

#[test]
fn mst_beats_greedy_when_greedy_is_a_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..300 {
        let mut sp = pack(random_energy(&mut rng, 5), 3);
        for v in sp.s_rel.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let g = greedy_decode(&sp).unwrap();
        let m = mst_decode_with(&sp, false, 10.0).unwrap();
        assert!(is_valid_tree(&m.heads, false));
        if g.valid_tree {
            let e = build_energy(&sp, 10.0).unwrap();
            assert!(tree_energy(&e, &m.heads) >= tree_energy(&e, &g.heads));
            checked += 1;
        }
    }
    assert!(checked > 0);
}

proptest! {
    #[test]
    fn shift_leaves_mst_unchanged(seed in any::<u64>(), n in 2usize..7, c in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_energy(&mut rng, n);
        let shifted: Vec<Vec<f64>> = e.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
        prop_assert_eq!(max_arborescence(&e, true).unwrap().0, max_arborescence(&shifted, true).unwrap().0);
    }
}

#[test]
fn chunk_repair() {
    let tags = ["O", "I-per", "I-per", "O", "B-loc", "I-loc", "B-loc"];
    assert_eq!(bio_chunk(&tags, 2), (1, 3, Some("per".to_string())));
    assert_eq!(bio_chunk(&tags, 5), (4, 6, Some("loc".to_string())));
    assert_eq!(bio_chunk(&tags, 6), (6, 7, Some("loc".to_string())));
    assert_eq!(bio_chunk(&tags, 0), (0, 1, None));
    let mixed = ["B-per", "I-org", "I-org"];
    assert_eq!(bio_chunk(&mixed, 2), (1, 3, Some("org".to_string())));
}

fn round_trip(doc: &Document, spec: &DatasetSpec) {
    let g = encode_graph(doc, spec).unwrap();
    let sp = ScorePack::from_gold(&g, spec.relation_vocab().len());
    let pr = decode(&sp, spec).unwrap();
    assert_eq!(pr.heads, g.gold_heads);
    let got = extract_triples(&pr, &g, spec, &g.gold_tags);
    assert_eq!(got, doc.gold_triples(), "document {}", doc.id);
}

#[test]
fn all_relations_none_gives_no_triples() {
    let c = toy::generate_toy(&toy::ToyConfig { n_train: 1, n_dev: 0, ..Default::default() });
    let g = encode_graph(&c.train[0], &c.spec).unwrap();
    let pr = ParseResult {
        heads: g.gold_heads.clone(),
        relations: vec![0; g.node_count()],
        mode: DecodeMode::Greedy,
        valid_tree: true,
    };
    assert!(extract_triples(&pr, &g, &c.spec, &g.gold_tags).is_empty());
}

#[test]
fn gold_round_trip_relation_corpus() {
    let c = toy::generate_toy(&toy::ToyConfig { n_train: 50, n_dev: 0, ..Default::default() });
    for d in &c.train {
        round_trip(d, &c.spec);
    }
}

#[test]
fn gold_round_trip_dependency_corpus() {
    let text = "1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n\
                2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_\n\
                3\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_\n\
                4\tloudly\tloudly\tADV\tRB\t_\t3\tadvmod\t_\t_\n";
    let docs = parse_conllu(text).unwrap();
    let spec = DatasetSpec::infer("ud", DataFormat::Conllu, &docs);
    round_trip(&docs[0], &spec);
}

#[test]
fn first_word_anchor_round_trip() {
    let doc = Document {
        id: "x".into(),
        text: "Ann Lee lives in New York".into(),
        words: ["Ann", "Lee", "lives", "in", "New", "York"].map(String::from).to_vec(),
        entities: vec![
            EntitySpan { start: 0, end: 2, label: "per".into() },
            EntitySpan { start: 4, end: 6, label: "loc".into() },
        ],
        triples: vec![RelationTriple {
            head: NodeRef::Entity(0),
            tail: NodeRef::Entity(1),
            label: "liveIn".into(),
        }],
        word_tags: None,
    };
    let mut spec = DatasetSpec {
        name: "c".into(),
        format: DataFormat::JsonTriples,
        entity_labels: vec!["per".into(), "loc".into()],
        relation_labels: vec!["liveIn".into()],
        tree_structured: false,
        oracle_tags: false,
        anchor: Anchor::Last,
    };
    round_trip(&doc, &spec);
    spec.anchor = Anchor::First;
    round_trip(&doc, &spec);
}

#[test]
fn prediction_record_serializes() {
    let c = toy::generate_toy(&toy::ToyConfig { n_train: 1, n_dev: 0, ..Default::default() });
    let g = encode_graph(&c.train[0], &c.spec).unwrap();
    let sp = ScorePack::from_gold(&g, 5);
    let pr = greedy_decode(&sp).unwrap();
    let triples = extract_triples(&pr, &g, &c.spec, &g.gold_tags);
    let rec = PredictionRecord::new(&g.doc_id, &pr, &c.spec.relation_vocab(), triples);
    let line = serde_json::to_string(&rec).unwrap();
    assert!(line.contains("\"valid_tree\":"));
    let back: PredictionRecord = serde_json::from_str(&line).unwrap();
    assert_eq!(back, rec);
}
