//! BiLSTM word tagger and the tag-embedding projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::layers::{BiLstm, Linear};
use crate::numerics::{Graph, ParamStore, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub d_f: usize,
    pub d_h: usize,
    pub n_tags: usize,
    pub d_tag: usize,
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_f == 0 || self.d_h == 0 || self.n_tags == 0 || self.d_tag == 0 {
            return Err(Error::config(format!("tagger dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub struct TaggerOutput {
    /// BiLSTM states, `|V| × 2·d_h`.
    pub hidden: Var,
    /// Unnormalized tag scores, `|V| × |T|`.
    pub logits: Var,
}

#[derive(Clone, Debug)]
pub struct Tagger {
    pub config: TaggerConfig,
    pub lstm: BiLstm,
    pub classifier: Linear,
    /// Affine map from one-hot tags to dense tag features.
    pub embed: Linear,
}

impl Tagger {
    pub fn new(config: TaggerConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let lstm = BiLstm::new(store, "tagger.lstm", config.d_f, config.d_h, rng)?;
        let classifier = Linear::new(store, "tagger.classifier", 2 * config.d_h, config.n_tags, rng)?;
        let embed = Linear::new(store, "tagger.embed", config.n_tags, config.d_tag, rng)?;
        Ok(Tagger {
            config,
            lstm,
            classifier,
            embed,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<TaggerOutput> {
        let shape = g.shape(x);
        if shape.len() != 2 || shape[1] != self.config.d_f {
            return Err(Error::config(format!(
                "tagger expects {} input features, got shape {shape:?}",
                self.config.d_f
            )));
        }
        let hidden = self.lstm.run(g, store, x)?;
        let logits = self.classifier.forward(g, store, hidden)?;
        Ok(TaggerOutput { hidden, logits })
    }

    /// Dense features for hard tag choices. The one-hot input is a
    /// constant, so nothing flows back into the tagger from here.
    pub fn tag_embed(&self, g: &mut Graph, store: &ParamStore, tags: &[usize]) -> Result<Var> {
        let one_hot = g.constant(Tensor::one_hot(tags, self.config.n_tags)?);
        self.embed.forward(g, store, one_hot)
    }
}

/// Row-wise argmax of tag probabilities or logits, ties to the lowest index.
pub fn hard_tags(y: &Tensor) -> Vec<usize> {
    y.argmax_last()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, ParamStore};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n_tags: usize) -> (Tagger, ParamStore) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = TaggerConfig {
            d_f: 5,
            d_h: 3,
            n_tags,
            d_tag: 4,
        };
        (Tagger::new(cfg, &mut store, &mut rng).unwrap(), store)
    }

    fn input(n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(vec![n, 5], (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn probabilities_are_normalized() {
        let (t, store) = setup(7);
        let mut g = Graph::new();
        let x = g.input(input(6, 1));
        let out = t.forward(&mut g, &store, x).unwrap();
        let y = g.softmax(out.logits);
        for r in 0..6 {
            assert!((g.value(y).lane(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(g.shape(out.hidden), &[6, 6]);
    }

    #[test]
    fn zero_classifier_is_uniform() {
        let (t, mut store) = setup(4);
        for id in [t.classifier.weight, t.classifier.bias] {
            store.get_mut(id).value.data_mut().fill(0.0);
        }
        let mut g = Graph::new();
        let x = g.input(input(3, 2));
        let out = t.forward(&mut g, &store, x).unwrap();
        let y = g.softmax(out.logits);
        assert!(g.value(y).data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn wrong_input_width() {
        let (t, store) = setup(3);
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[2, 4]));
        assert!(matches!(t.forward(&mut g, &store, x), Err(Error::Config(_))));
    }

    #[test]
    fn reversal_swaps_directions() {
        let (t, store) = setup(3);
        let x = input(5, 3);
        let rev_rows: Vec<Vec<f64>> = (0..5).rev().map(|r| x.lane(r).to_vec()).collect();
        let xr = Tensor::from_rows(&rev_rows).unwrap();
        let mut g = Graph::new();
        let a = g.input(x);
        let b = g.input(xr);
        // Swap the two LSTMs so the forward pass reads the reversed input.
        let ha = t.forward(&mut g, &store, a).unwrap().hidden;
        let swapped = BiLstm {
            forward: t.lstm.backward.clone(),
            backward: t.lstm.forward.clone(),
        };
        let hb = swapped.run(&mut g, &store, b).unwrap();
        let (va, vb) = (g.value(ha).clone(), g.value(hb).clone());
        for r in 0..5 {
            let ra = va.lane(r);
            let rb = vb.lane(4 - r);
            assert_eq!(&ra[..3], &rb[3..]);
            assert_eq!(&ra[3..], &rb[..3]);
        }
    }

    #[test]
    fn tag_embedding_is_weight_row_plus_bias() {
        let (t, store) = setup(3);
        let y = Tensor::from_rows(&[vec![0.1, 0.7, 0.2], vec![0.2, 0.5, 0.3], vec![0.6, 0.3, 0.1]]).unwrap();
        let tags = hard_tags(&y);
        assert_eq!(tags, vec![1, 1, 0]);
        let mut g = Graph::new();
        let e = t.tag_embed(&mut g, &store, &tags).unwrap();
        let w = store.value(t.embed.weight);
        let b = store.value(t.embed.bias);
        let e = g.value(e);
        for c in 0..4 {
            assert!((e.at(0, c) - (w.at(1, c) + b.data()[c])).abs() < 1e-15);
        }
        assert_eq!(e.lane(0), e.lane(1));

        // Perturbing probabilities without changing the argmax changes nothing.
        let y2 = y.map(|p| p * 0.9 + 0.01);
        assert_eq!(hard_tags(&y2), tags);
    }

    #[test]
    fn tagging_loss_gradient() {
        let (t, store) = setup(3);
        let gold = [0usize, 2, 1, 1];
        let err = finite_diff_check(
            |g, x| {
                let out = t.forward(g, &store, x)?;
                let lp = g.log_softmax(out.logits);
                let picked = g.pick(lp, &gold)?;
                let m = g.mean(picked);
                Ok(g.scale(m, -1.0))
            },
            &input(4, 9),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
