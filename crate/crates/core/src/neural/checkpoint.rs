//! Single-file model checkpoints: a UTF-8 header of `key=value` lines, a line
//! holding only `end`, then every parameter as little-endian `f64` in header
//! order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::Vocabulary;

use super::model::{EncoderModel, ModelConfig};
use super::tape::Tensor;

const MAGIC: &str = "capeval-checkpoint 1";
const END_MARKER: &[u8] = b"\nend\n";

pub fn save_checkpoint(model: &EncoderModel, path: &Path) -> Result<()> {
    let c = model.config();
    let mut header = format!(
        "{MAGIC}\nembed_dim={}\nhidden={}\nattention={}\nmax_len={}\nembedding_frozen={}\nvocab.size={}\nvocab.sha256={}\n",
        c.embed_dim,
        c.hidden,
        c.attention,
        c.max_len,
        model.is_embedding_frozen(),
        model.vocab().len(),
        model.vocab().digest(),
    );
    for (id, token) in model.vocab().tokens().iter().enumerate() {
        header.push_str(&format!("vocab.{id}={token}\n"));
    }
    for (name, tensor) in EncoderModel::parameter_names().iter().zip(model.parameters()) {
        let shape: Vec<String> = tensor.shape().iter().map(usize::to_string).collect();
        header.push_str(&format!("array={name} {}\n", shape.join("x")));
    }
    header.push_str("end\n");
    let mut bytes = header.into_bytes();
    for tensor in model.parameters() {
        for v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn bad(message: impl Into<String>) -> Error {
    Error::Checkpoint(message.into())
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderModel> {
    let bytes = fs::read(path)?;
    let split = bytes
        .windows(END_MARKER.len())
        .position(|w| w == END_MARKER)
        .ok_or_else(|| bad("header terminator not found"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let mut body = &bytes[split + END_MARKER.len()..];

    let mut lines = header.split('\n');
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint file or unsupported version"));
    }
    let mut fields: HashMap<&str, &str> = HashMap::new();
    let mut vocab_tokens: Vec<(usize, &str)> = Vec::new();
    let mut arrays: Vec<(&str, Vec<usize>)> = Vec::new();
    for line in lines {
        let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
        if key == "array" {
            let (name, shape) = value.split_once(' ').ok_or_else(|| bad(format!("malformed array {value:?}")))?;
            let shape = shape
                .split('x')
                .map(|s| s.parse().map_err(|_| bad(format!("bad shape {shape:?}"))))
                .collect::<Result<Vec<usize>>>()?;
            arrays.push((name, shape));
        } else if let Some(id) = key.strip_prefix("vocab.").and_then(|k| k.parse::<usize>().ok()) {
            vocab_tokens.push((id, value));
        } else {
            fields.insert(key, value);
        }
    }
    let num = |key: &str| -> Result<usize> {
        fields
            .get(key)
            .ok_or_else(|| bad(format!("missing {key}")))?
            .parse()
            .map_err(|_| bad(format!("{key} is not a number")))
    };
    let config = ModelConfig {
        embed_dim: num("embed_dim")?,
        hidden: num("hidden")?,
        attention: num("attention")?,
        max_len: num("max_len")?,
    };
    let frozen = match fields.get("embedding_frozen") {
        Some(&"true") => true,
        Some(&"false") => false,
        _ => return Err(bad("missing embedding_frozen")),
    };
    if vocab_tokens.len() != num("vocab.size")? || vocab_tokens.iter().enumerate().any(|(i, (id, _))| i != *id) {
        return Err(bad("vocabulary listing is incomplete or out of order"));
    }
    let vocab = Vocabulary::from_tokens(vocab_tokens.iter().skip(4).map(|(_, t)| *t));
    if vocab.tokens().iter().map(String::as_str).ne(vocab_tokens.iter().map(|(_, t)| *t)) {
        return Err(bad("reserved vocabulary entries do not match"));
    }
    if Some(&vocab.digest().as_str()) != fields.get("vocab.sha256") {
        return Err(bad("vocabulary checksum mismatch"));
    }

    let mut model = EncoderModel::new(vocab, config, None, 0)?;
    model.set_embedding_frozen(frozen);
    let names = EncoderModel::parameter_names();
    if arrays.len() != names.len() {
        return Err(bad(format!("expected {} arrays, found {}", names.len(), arrays.len())));
    }
    for ((name, shape), (expected, param)) in arrays.into_iter().zip(names.iter().zip(model.parameters_mut())) {
        if name != expected || shape != param.shape() {
            return Err(bad(format!(
                "array {name} {shape:?} does not match {expected} {:?}",
                param.shape()
            )));
        }
        let need = param.len() * 8;
        if body.len() < need {
            return Err(bad(format!("data for {name} is truncated")));
        }
        let values: Vec<f64> = body[..need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *param = Tensor::new(param.shape().to_vec(), values)?;
        body = &body[need..];
    }
    if !body.is_empty() {
        return Err(bad(format!("{} trailing bytes", body.len())));
    }
    Ok(model)
}
