use rand::Rng;

use crate::error::{Error, Result};

use super::tape::{Tape, Tensor, Var};

/// Additive attention: `e_i = v · tanh(h_i·W1 + s·W2)`, weights
/// `softmax(e)`, context `Σ α_i h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `hidden x attention`, applied to encoder states.
    pub w1: Tensor,
    /// `hidden x attention`, applied to the decoder state.
    pub w2: Tensor,
    /// `attention`
    pub v: Tensor,
}

impl AttentionParams {
    pub fn init(hidden: usize, width: usize, rng: &mut impl Rng) -> Self {
        let hb = 1.0 / (hidden as f64).sqrt();
        let ab = 1.0 / (width as f64).sqrt();
        Self {
            w1: Tensor::uniform(vec![hidden, width], hb, rng),
            w2: Tensor::uniform(vec![hidden, width], hb, rng),
            v: Tensor::uniform(vec![width], ab, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn width(&self) -> usize {
        self.w1.cols()
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> AttentionVars {
        AttentionVars {
            w1: tape.leaf(self.w1.clone(), requires_grad),
            w2: tape.leaf(self.w2.clone(), requires_grad),
            v: tape.leaf(self.v.clone(), requires_grad),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub w1: Var,
    pub w2: Var,
    pub v: Var,
}

impl AttentionVars {
    /// `states·W1`, shared by every decoder step of a sentence.
    pub fn project_keys(&self, tape: &mut Tape, states: Var) -> Var {
        tape.matmul(states, self.w1)
    }

    /// Returns `(context, weights)`.
    pub fn attend(&self, tape: &mut Tape, keys: Var, states: Var, query: Var) -> (Var, Var) {
        let q = tape.vecmat(query, self.w2);
        let pre = tape.add_rows(keys, q);
        let act = tape.tanh(pre);
        let scores = tape.matvec(act, self.v);
        let weights = tape.softmax(scores);
        let context = tape.vecmat(weights, states);
        (context, weights)
    }
}

/// Attention of one decoder state over the encoder states. Returns the
/// context vector and the weights.
pub fn attention(
    params: &AttentionParams,
    decoder_state: &[f64],
    encoder_states: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = params.hidden();
    if encoder_states.is_empty() {
        return Err(Error::InvalidArgument("attention over zero encoder states".into()));
    }
    if decoder_state.len() != h || encoder_states.iter().any(|s| s.len() != h) {
        return Err(Error::ShapeMismatch {
            op: "attention",
            expected: format!("vectors of width {h}"),
            found: format!(
                "decoder {} / encoder {:?}",
                decoder_state.len(),
                encoder_states.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        });
    }
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let rows: Vec<Var> = encoder_states
        .iter()
        .map(|s| tape.constant(Tensor::vector(s.clone())))
        .collect();
    let states = tape.stack(&rows);
    let keys = vars.project_keys(&mut tape, states);
    let query = tape.constant(Tensor::vector(decoder_state.to_vec()));
    let (context, weights) = vars.attend(&mut tape, keys, states, query);
    tape.check()?;
    Ok((tape.value(context).data().to_vec(), tape.value(weights).data().to_vec()))
}
