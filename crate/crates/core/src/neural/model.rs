use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::text::{TokenSequence, Vocabulary, END_ID, PAD_ID, START_ID};

use super::attention::{AttentionParams, AttentionVars};
use super::gru::{GruParams, GruVars, GRU_PARAM_NAMES};
use super::tape::{Tape, Tensor, Var};

/// Sizes of the auto-encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub attention: usize,
    /// Longest target the decoder is trained on, not counting `<end>`.
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 50,
            hidden: 64,
            attention: 32,
            max_len: 20,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 || self.attention == 0 || self.max_len == 0 {
            return Err(Error::InvalidArgument(format!("model sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Encoder states of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    /// Final encoder hidden state, after reading `<end>`.
    pub intrinsic: Vec<f64>,
    /// One hidden state per input position, `<end>` included.
    pub states: Vec<Vec<f64>>,
}

/// Teacher-forced decoding result.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// Mean cross-entropy over the target tokens and `<end>`.
    pub loss: f64,
    pub step_losses: Vec<f64>,
    /// The target was longer than `max_len` and was cut.
    pub truncated: bool,
}

/// Gradients aligned with [`EncoderModel::parameter_names`]. The embedding
/// entry is `None` while it is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub grads: Vec<Option<Vec<f64>>>,
}

impl ModelGradients {
    pub fn zeros_like(model: &EncoderModel) -> Self {
        let grads = model
            .parameters()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (i != 0 || !model.frozen_embedding).then(|| vec![0.0; t.len()]))
            .collect();
        Self { grads }
    }

    pub fn add_assign(&mut self, other: &ModelGradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            if let (Some(a), Some(b)) = (a, b) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// GRU encoder, attentive GRU decoder and output projection sharing one
/// word-embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub(crate) config: ModelConfig,
    pub(crate) vocab: Vocabulary,
    pub(crate) frozen_embedding: bool,
    pub embedding: Tensor,
    pub encoder: GruParams,
    pub decoder: GruParams,
    pub attention: AttentionParams,
    /// `hidden x |V|`
    pub output_w: Tensor,
    /// `|V|`
    pub output_b: Tensor,
}

struct Bound {
    embedding: Var,
    encoder: GruVars,
    decoder: GruVars,
    attention: AttentionVars,
    output_w: Var,
    output_b: Var,
}

impl Bound {
    fn vars(&self) -> Vec<Var> {
        let mut v = vec![self.embedding];
        v.extend(self.encoder.all());
        v.extend(self.decoder.all());
        v.extend([self.attention.w1, self.attention.w2, self.attention.v]);
        v.extend([self.output_w, self.output_b]);
        v
    }
}

impl EncoderModel {
    /// Random weights. Rows of `embeddings` are copied for the tokens it
    /// covers (matched by string); other rows are drawn uniformly.
    pub fn new(
        vocab: Vocabulary,
        config: ModelConfig,
        embeddings: Option<&EmbeddingTable>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(table) = embeddings {
            if table.dim() != config.embed_dim {
                return Err(Error::ShapeMismatch {
                    op: "EncoderModel::new",
                    expected: format!("embedding width {}", config.embed_dim),
                    found: format!("{}", table.dim()),
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vocab.len();
        let d = config.embed_dim;
        let h = config.hidden;
        let ebound = 1.0 / (d as f64).sqrt();
        let mut emb = vec![0.0; v * d];
        for (id, row) in emb.chunks_mut(d).enumerate() {
            let found = embeddings.and_then(|t| vocab.token(id).and_then(|tok| t.get(tok)));
            match found {
                Some(vec) => row.copy_from_slice(vec),
                None => row.iter_mut().for_each(|x| *x = rng.gen_range(-ebound..=ebound)),
            }
        }
        let hb = 1.0 / (h as f64).sqrt();
        let encoder = GruParams::init(d, h, &mut rng);
        let decoder = GruParams::init(d + h, h, &mut rng);
        let attention = AttentionParams::init(h, config.attention, &mut rng);
        let output_w = Tensor::uniform(vec![h, v], hb, &mut rng);
        Ok(Self {
            config,
            vocab,
            frozen_embedding: false,
            embedding: Tensor::new(vec![v, d], emb)?,
            encoder,
            decoder,
            attention,
            output_w,
            output_b: Tensor::zeros(vec![v]),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn is_embedding_frozen(&self) -> bool {
        self.frozen_embedding
    }

    /// A frozen embedding receives no gradient and is never updated.
    pub fn set_embedding_frozen(&mut self, frozen: bool) {
        self.frozen_embedding = frozen;
    }

    pub fn parameter_names() -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for part in ["encoder", "decoder"] {
            names.extend(GRU_PARAM_NAMES.iter().map(|p| format!("{part}.{p}")));
        }
        names.extend(["attention.w1", "attention.w2", "attention.v", "output.w", "output.b"].map(String::from));
        names
    }

    /// Every weight tensor, in [`parameter_names`](Self::parameter_names) order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.encoder.tensors());
        p.extend(self.decoder.tensors());
        p.extend([&self.attention.w1, &self.attention.w2, &self.attention.v]);
        p.extend([&self.output_w, &self.output_b]);
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.encoder.tensors_mut());
        p.extend(self.decoder.tensors_mut());
        p.extend([&mut self.attention.w1, &mut self.attention.w2, &mut self.attention.v]);
        p.extend([&mut self.output_w, &mut self.output_b]);
        p
    }

    fn bind(&self, tape: &mut Tape, grad: bool) -> Bound {
        Bound {
            embedding: tape.leaf(self.embedding.clone(), grad && !self.frozen_embedding),
            encoder: self.encoder.bind(tape, grad),
            decoder: self.decoder.bind(tape, grad),
            attention: self.attention.bind(tape, grad),
            output_w: tape.leaf(self.output_w.clone(), grad),
            output_b: tape.leaf(self.output_b.clone(), grad),
        }
    }

    fn ids(&self, seq: &TokenSequence) -> Result<Vec<usize>> {
        if seq.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
        }
        Ok(self.vocab.encode(seq))
    }

    /// Runs the encoder over `ids` followed by `<end>`; returns the stacked
    /// states and the final one.
    fn run_encoder(&self, tape: &mut Tape, b: &Bound, ids: &[usize]) -> (Var, Var) {
        let mut h = tape.constant(Tensor::zeros(vec![self.config.hidden]));
        let mut states = Vec::with_capacity(ids.len() + 1);
        for &id in ids.iter().chain([END_ID].iter()) {
            let x = tape.gather(b.embedding, id);
            h = b.encoder.step(tape, x, h);
            states.push(h);
        }
        (tape.stack(&states), h)
    }

    fn decoder_step(&self, tape: &mut Tape, b: &Bound, keys: Var, states: Var, prev: usize, s: Var) -> (Var, Var) {
        let (context, _) = b.attention.attend(tape, keys, states, s);
        let emb = tape.gather(b.embedding, prev);
        let x = tape.concat(emb, context);
        let s = b.decoder.step(tape, x, s);
        let proj = tape.vecmat(s, b.output_w);
        let logits = tape.add(proj, b.output_b);
        (s, logits)
    }

    pub fn encode(&self, seq: &TokenSequence) -> Result<Encoding> {
        let ids = self.ids(seq)?;
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false);
        let (states, last) = self.run_encoder(&mut tape, &b, &ids);
        tape.check()?;
        let stacked = tape.value(states);
        Ok(Encoding {
            intrinsic: tape.value(last).data().to_vec(),
            states: (0..stacked.rows()).map(|i| stacked.row(i).to_vec()).collect(),
        })
    }

    /// The sentence's intrinsic vector: the final encoder state.
    pub fn intrinsic(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        Ok(self.encode(seq)?.intrinsic)
    }

    fn teacher_forced_on(
        &self,
        tape: &mut Tape,
        b: &Bound,
        input: &[usize],
        target: &[usize],
    ) -> (Var, Vec<Var>, bool) {
        let (states, last) = self.run_encoder(tape, b, input);
        let keys = b.attention.project_keys(tape, states);
        let truncated = target.len() > self.config.max_len;
        let kept = &target[..target.len().min(self.config.max_len)];
        let mut s = last;
        let mut prev = START_ID;
        let mut losses = Vec::with_capacity(kept.len() + 1);
        for &y in kept.iter().chain([END_ID].iter()) {
            let (next, logits) = self.decoder_step(tape, b, keys, states, prev, s);
            s = next;
            losses.push(tape.cross_entropy(logits, y));
            prev = y;
        }
        let loss = tape.mean(&losses);
        (loss, losses, truncated)
    }

    /// Encodes `input` and scores the decoder on `target` with teacher
    /// forcing.
    pub fn teacher_forced(&self, input: &TokenSequence, target: &TokenSequence) -> Result<DecodeOutcome> {
        let (input, target) = (self.ids(input)?, self.ids(target)?);
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false);
        let (loss, steps, truncated) = self.teacher_forced_on(&mut tape, &b, &input, &target);
        tape.check()?;
        Ok(DecodeOutcome {
            loss: tape.value(loss).data()[0],
            step_losses: steps.iter().map(|&v| tape.value(v).data()[0]).collect(),
            truncated,
        })
    }

    /// Reconstruction loss of `seq`.
    pub fn loss(&self, seq: &TokenSequence) -> Result<DecodeOutcome> {
        self.teacher_forced(seq, seq)
    }

    /// Reconstruction loss of `seq` and its gradient.
    pub fn loss_and_gradients(&self, seq: &TokenSequence) -> Result<(DecodeOutcome, ModelGradients)> {
        let ids = self.ids(seq)?;
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, true);
        let (loss, steps, truncated) = self.teacher_forced_on(&mut tape, &b, &ids, &ids);
        tape.check()?;
        let g = tape.backward(loss);
        let grads = b
            .vars()
            .into_iter()
            .zip(self.parameters())
            .enumerate()
            .map(|(i, (v, t))| {
                if i == 0 && self.frozen_embedding {
                    None
                } else {
                    Some(g.get(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
                }
            })
            .collect();
        let outcome = DecodeOutcome {
            loss: tape.value(loss).data()[0],
            step_losses: steps.iter().map(|&v| tape.value(v).data()[0]).collect(),
            truncated,
        };
        Ok((outcome, ModelGradients { grads }))
    }

    /// Greedy decoding from the encoding of `seq`, at most `max_len` tokens.
    /// `<pad>` and `<start>` are never emitted; ties go to the lowest id.
    pub fn reconstruct(&self, seq: &TokenSequence) -> Result<Vec<String>> {
        let ids = self.ids(seq)?;
        let mut tape = Tape::new();
        let b = self.bind(&mut tape, false);
        let (states, last) = self.run_encoder(&mut tape, &b, &ids);
        let keys = b.attention.project_keys(&mut tape, states);
        let mut s = last;
        let mut prev = START_ID;
        let mut out = Vec::new();
        for _ in 0..=self.config.max_len {
            let (next, logits) = self.decoder_step(&mut tape, &b, keys, states, prev, s);
            s = next;
            let z = tape.value(logits).data();
            let mut best = END_ID;
            for id in (0..z.len()).filter(|&id| id != PAD_ID && id != START_ID) {
                if z[id] > z[best] || (z[id] == z[best] && id < best) {
                    best = id;
                }
            }
            if best == END_ID || out.len() == self.config.max_len {
                break;
            }
            out.push(self.vocab.token(best).expect("id from logits").to_string());
            prev = best;
        }
        tape.check()?;
        Ok(out)
    }
}
