//! Affine, MLP and LSTM building blocks shared by the tagger and scorer.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

/// `y = x · W + b` with `W: in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Linear {
            weight: store.xavier(format!("{name}.weight"), &[d_in, d_out], d_in, d_out, rng)?,
            bias: store.zeros(format!("{name}.bias"), &[d_out])?,
            d_in,
            d_out,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

/// One ELU hidden layer followed by a linear output layer.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Mlp {
            hidden: Linear::new(store, &format!("{name}.hidden"), d_in, d_hidden, rng)?,
            output: Linear::new(store, &format!("{name}.output"), d_hidden, d_out, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.hidden.forward(g, store, x)?;
        let h = g.elu(h);
        self.output.forward(g, store, h)
    }
}

/// Single-direction LSTM; gate order is input, forget, candidate, output.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
    pub d_hidden: usize,
}

impl Lstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let four = 4 * d_hidden;
        let input_weight =
            store.xavier(format!("{name}.input_weight"), &[d_in, four], d_in, four, rng)?;
        let hidden_weight = store.xavier(
            format!("{name}.hidden_weight"),
            &[d_hidden, four],
            d_hidden,
            four,
            rng,
        )?;
        let mut bias = Tensor::zeros(&[four]);
        bias.data_mut()[d_hidden..2 * d_hidden].fill(1.0);
        let bias = store.add(format!("{name}.bias"), bias)?;
        Ok(Lstm {
            input_weight,
            hidden_weight,
            bias,
            d_hidden,
        })
    }

    /// Runs over the rows of `x` (`n × d_in`), in reverse when `reverse` is
    /// set. Output row `t` is always the state after reading row `t`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, reverse: bool) -> Result<Var> {
        let n = g.shape(x)[0];
        let h = self.d_hidden;
        let wx = g.param(store, self.input_weight);
        let wh = g.param(store, self.hidden_weight);
        let b = g.param(store, self.bias);
        let projected = g.matmul(x, wx)?;
        let projected = g.add_row(projected, b)?;

        let mut hidden = g.constant(Tensor::zeros(&[1, h]));
        let mut cell = g.constant(Tensor::zeros(&[1, h]));
        let mut states = vec![hidden; n];
        let order: Vec<usize> = if reverse {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        };
        for t in order {
            let xt = g.select_rows(projected, &[t])?;
            let recur = g.matmul(hidden, wh)?;
            let gates = g.add(xt, recur)?;
            let i = g.slice_cols(gates, 0, h)?;
            let f = g.slice_cols(gates, h, 2 * h)?;
            let c_hat = g.slice_cols(gates, 2 * h, 3 * h)?;
            let o = g.slice_cols(gates, 3 * h, 4 * h)?;
            let i = g.sigmoid(i);
            let f = g.sigmoid(f);
            let c_hat = g.tanh(c_hat);
            let o = g.sigmoid(o);
            let keep = g.mul(f, cell)?;
            let write = g.mul(i, c_hat)?;
            cell = g.add(keep, write)?;
            let squashed = g.tanh(cell);
            hidden = g.mul(o, squashed)?;
            states[t] = hidden;
        }
        g.concat_rows(&states)
    }
}

/// Bidirectional LSTM: forward states ⊕ backward states per row.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: Lstm::new(store, &format!("{name}.fwd"), d_in, d_hidden, rng)?,
            backward: Lstm::new(store, &format!("{name}.bwd"), d_in, d_hidden, rng)?,
        })
    }

    pub fn d_out(&self) -> usize {
        2 * self.forward.d_hidden
    }

    pub fn run(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let f = self.forward.forward(g, store, x, false)?;
        let b = self.backward.forward(g, store, x, true)?;
        g.concat_cols(&[f, b])
    }
}

/// Stacked BiLSTM layers; zero layers is the identity.
#[derive(Clone, Debug, Default)]
pub struct StackedBiLstm {
    pub layers: Vec<BiLstm>,
}

impl StackedBiLstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        layers: usize,
        d_in: usize,
        d_hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(layers);
        let mut d = d_in;
        for l in 0..layers {
            out.push(BiLstm::new(store, &format!("{name}.{l}"), d, d_hidden, rng)?);
            d = 2 * d_hidden;
        }
        Ok(StackedBiLstm { layers: out })
    }

    pub fn d_out(&self, d_in: usize) -> usize {
        self.layers.last().map_or(d_in, BiLstm::d_out)
    }

    pub fn run(&self, g: &mut Graph, store: &ParamStore, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            x = layer.run(g, store, x)?;
        }
        Ok(x)
    }
}
