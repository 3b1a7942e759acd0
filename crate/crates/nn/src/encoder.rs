//! Bidirectional transformer encoder with BERT's layout and parameter names,
//! so locally available uncased checkpoints load without conversion.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor, D};
use serde::{Deserialize, Serialize};
use sabia_core::SeededRng;

use crate::layers::{dropout, gelu, DropoutRng, Embedding, LayerNorm, Linear};
use crate::params::{Init, ParamStore};
use crate::tokenizer::WordPiece;
use crate::{Error, Result};

pub const TINY: &str = "tiny";
pub const BASE_UNCASED: &str = "bert-base-uncased";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    pub type_vocab_size: usize,
    pub layer_norm_eps: f64,
    pub hidden_dropout_prob: f64,
    pub attention_probs_dropout_prob: f64,
}

impl EncoderConfig {
    /// Random-init test encoder: 2 layers, width 64.
    pub fn tiny(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden_size: 64,
            num_hidden_layers: 2,
            num_attention_heads: 4,
            intermediate_size: 256,
            max_position_embeddings: 512,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
            hidden_dropout_prob: 0.1,
            attention_probs_dropout_prob: 0.1,
        }
    }

    pub fn base_uncased() -> Self {
        EncoderConfig {
            vocab_size: 30522,
            hidden_size: 768,
            num_hidden_layers: 12,
            num_attention_heads: 12,
            intermediate_size: 3072,
            max_position_embeddings: 512,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
            hidden_dropout_prob: 0.1,
            attention_probs_dropout_prob: 0.1,
        }
    }

    /// Read a HuggingFace `config.json`; unknown fields are ignored.
    pub fn from_hf_json(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Hf {
            vocab_size: usize,
            hidden_size: usize,
            num_hidden_layers: usize,
            num_attention_heads: usize,
            intermediate_size: usize,
            #[serde(default = "default_positions")]
            max_position_embeddings: usize,
            #[serde(default = "default_types")]
            type_vocab_size: usize,
            #[serde(default = "default_eps")]
            layer_norm_eps: f64,
            #[serde(default = "default_dropout")]
            hidden_dropout_prob: f64,
            #[serde(default = "default_dropout")]
            attention_probs_dropout_prob: f64,
            #[serde(default)]
            hidden_act: Option<String>,
        }
        fn default_positions() -> usize {
            512
        }
        fn default_types() -> usize {
            2
        }
        fn default_eps() -> f64 {
            1e-12
        }
        fn default_dropout() -> f64 {
            0.1
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let hf: Hf = serde_json::from_str(&text).map_err(|e| Error::checkpoint(path, e.to_string()))?;
        if let Some(act) = hf.hidden_act.as_deref() {
            if act != "gelu" {
                return Err(Error::checkpoint(path, format!("unsupported activation {act:?}")));
            }
        }
        let cfg = EncoderConfig {
            vocab_size: hf.vocab_size,
            hidden_size: hf.hidden_size,
            num_hidden_layers: hf.num_hidden_layers,
            num_attention_heads: hf.num_attention_heads,
            intermediate_size: hf.intermediate_size,
            max_position_embeddings: hf.max_position_embeddings,
            type_vocab_size: hf.type_vocab_size,
            layer_norm_eps: hf.layer_norm_eps,
            hidden_dropout_prob: hf.hidden_dropout_prob,
            attention_probs_dropout_prob: hf.attention_probs_dropout_prob,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.num_attention_heads == 0 || self.hidden_size % self.num_attention_heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {} must be a positive multiple of the head count {}",
                self.hidden_size, self.num_attention_heads
            )));
        }
        Ok(())
    }
}

struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

pub struct Encoder {
    pub config: EncoderConfig,
    word: Embedding,
    position: Embedding,
    token_type: Embedding,
    embed_norm: LayerNorm,
    layers: Vec<Layer>,
}

impl Encoder {
    /// Build under the `bert.` prefix, taking preloaded weights when present.
    pub fn new(store: &mut ParamStore, config: &EncoderConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let w = Init::Normal(0.02);
        let linear = |store: &mut ParamStore, name: &str, i: usize, o: usize, rng: &mut SeededRng| {
            Linear::with_init(store, name, i, o, w, Init::Zeros, rng)
        };
        let eps = config.layer_norm_eps;
        let word = Embedding::new(store, "bert.embeddings.word_embeddings", config.vocab_size, h, w, rng)?;
        let position = Embedding::new(
            store,
            "bert.embeddings.position_embeddings",
            config.max_position_embeddings,
            h,
            w,
            rng,
        )?;
        let token_type = Embedding::new(store, "bert.embeddings.token_type_embeddings", config.type_vocab_size, h, w, rng)?;
        let embed_norm = LayerNorm::new(store, "bert.embeddings.LayerNorm", h, eps, rng)?;
        let mut layers = Vec::with_capacity(config.num_hidden_layers);
        for i in 0..config.num_hidden_layers {
            let p = format!("bert.encoder.layer.{i}");
            layers.push(Layer {
                query: linear(store, &format!("{p}.attention.self.query"), h, h, rng)?,
                key: linear(store, &format!("{p}.attention.self.key"), h, h, rng)?,
                value: linear(store, &format!("{p}.attention.self.value"), h, h, rng)?,
                attn_out: linear(store, &format!("{p}.attention.output.dense"), h, h, rng)?,
                attn_norm: LayerNorm::new(store, &format!("{p}.attention.output.LayerNorm"), h, eps, rng)?,
                intermediate: linear(store, &format!("{p}.intermediate.dense"), h, config.intermediate_size, rng)?,
                output: linear(store, &format!("{p}.output.dense"), config.intermediate_size, h, rng)?,
                out_norm: LayerNorm::new(store, &format!("{p}.output.LayerNorm"), h, eps, rng)?,
            });
        }
        Ok(Encoder {
            config: config.clone(),
            word,
            position,
            token_type,
            embed_norm,
            layers,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    /// Word-embedding lookup, the point where token attributions are taken.
    pub fn word_embeddings(&self, ids: &Tensor) -> Result<Tensor> {
        self.word.forward(ids)
    }

    /// `[b, t]` ids and mask to `[b, t, hidden]`. `words` replaces the
    /// word-embedding lookup when given.
    pub fn forward(&self, ids: &Tensor, mask: &Tensor, words: Option<&Tensor>, rng: &mut DropoutRng) -> Result<Tensor> {
        let (b, t) = ids.dims2()?;
        if t > self.config.max_position_embeddings {
            return Err(Error::Config(format!(
                "sequence length {t} exceeds {} positions",
                self.config.max_position_embeddings
            )));
        }
        let h = self.config.hidden_size;
        let words = match words {
            Some(w) => w.clone(),
            None => self.word.forward(ids)?,
        };
        let pos = self.position.table.narrow(0, 0, t)?.unsqueeze(0)?;
        let typ = self.token_type.table.narrow(0, 0, 1)?.unsqueeze(0)?;
        let x = words.broadcast_add(&pos)?.broadcast_add(&typ)?;
        let mut x = dropout(&self.embed_norm.forward(&x)?, self.config.hidden_dropout_prob, rng)?;

        let dtype = x.dtype();
        // additive mask: 0 on tokens, -10000 on padding
        let bias = ((mask.to_dtype(dtype)? - 1.0)? * 10000.0)?.reshape((b, 1, 1, t))?;
        let heads = self.config.num_attention_heads;
        let d = h / heads;
        let scale = 1.0 / (d as f64).sqrt();
        let split = |y: Tensor| -> Result<Tensor> { Ok(y.reshape((b, t, heads, d))?.transpose(1, 2)?.contiguous()?) };
        for layer in &self.layers {
            let q = split(layer.query.forward(&x)?)?;
            let k = split(layer.key.forward(&x)?)?;
            let v = split(layer.value.forward(&x)?)?;
            let scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?.broadcast_add(&bias)?;
            let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
            let probs = dropout(&probs, self.config.attention_probs_dropout_prob, rng)?;
            let ctx = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, t, h))?;
            let attn = dropout(&layer.attn_out.forward(&ctx)?, self.config.hidden_dropout_prob, rng)?;
            let attn = layer.attn_norm.forward(&(attn + &x)?)?;
            let inter = gelu(&layer.intermediate.forward(&attn)?)?;
            let out = dropout(&layer.output.forward(&inter)?, self.config.hidden_dropout_prob, rng)?;
            x = layer.out_norm.forward(&(out + attn)?)?;
        }
        Ok(x)
    }
}

/// Where an encoder's weights and vocabulary come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderSource {
    Tiny,
    Directory(PathBuf),
}

/// `tiny`, a local directory, or a hub identifier already present in the
/// local HuggingFace cache. Nothing is downloaded.
pub fn resolve_checkpoint(id: &str) -> Result<EncoderSource> {
    if id.eq_ignore_ascii_case(TINY) {
        return Ok(EncoderSource::Tiny);
    }
    let p = PathBuf::from(id);
    if p.is_dir() {
        return Ok(EncoderSource::Directory(p));
    }
    let hub = std::env::var_os("HF_HOME")
        .map(|h| PathBuf::from(h).join("hub"))
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache/huggingface/hub")));
    if let Some(hub) = hub {
        let snapshots = hub.join(format!("models--{}", id.replace('/', "--"))).join("snapshots");
        if let Ok(entries) = std::fs::read_dir(&snapshots) {
            let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
            dirs.sort();
            if let Some(d) = dirs.into_iter().find(|d| d.join("config.json").exists()) {
                return Ok(EncoderSource::Directory(d));
            }
        }
    }
    Err(Error::Config(format!(
        "encoder checkpoint {id:?} is neither `tiny`, a directory, nor in the local HuggingFace cache; \
         download it (config.json, vocab.txt, model.safetensors) and pass the directory"
    )))
}

/// Map checkpoint tensor names onto this crate's `bert.`-prefixed names.
pub fn canonical_tensor_name(name: &str) -> Option<String> {
    let stripped = name.strip_prefix("bert.").unwrap_or(name);
    if !(stripped.starts_with("embeddings.") || stripped.starts_with("encoder.")) {
        return None;
    }
    let renamed = if let Some(p) = stripped.strip_suffix(".gamma") {
        format!("{p}.weight")
    } else if let Some(p) = stripped.strip_suffix(".beta") {
        format!("{p}.bias")
    } else {
        stripped.to_string()
    };
    Some(format!("bert.{renamed}"))
}

/// Config, tokenizer and (renamed) weights of a checkpoint directory.
pub fn load_pretrained(dir: &Path) -> Result<(EncoderConfig, WordPiece, HashMap<String, Tensor>)> {
    let config = EncoderConfig::from_hf_json(&dir.join("config.json"))?;
    let tokenizer = WordPiece::from_file(&dir.join("vocab.txt"))?;
    let weights_path = dir.join("model.safetensors");
    if !weights_path.exists() {
        return Err(Error::checkpoint(dir, "model.safetensors not found (only safetensors weights are supported)"));
    }
    let raw = candle_core::safetensors::load(&weights_path, &candle_core::Device::Cpu)?;
    let mut weights = HashMap::new();
    for (name, t) in raw {
        if let Some(n) = canonical_tensor_name(&name) {
            weights.insert(n, t.to_dtype(DType::F32)?);
        }
    }
    if !weights.contains_key("bert.embeddings.word_embeddings.weight") {
        return Err(Error::checkpoint(&weights_path, "no BERT embedding weights found"));
    }
    Ok((config, tokenizer, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sabia_core::seeded_rng;

    #[test]
    fn tiny_forward_shape_and_mask_effect() {
        let mut store = ParamStore::new(DType::F32);
        let mut rng = seeded_rng(1);
        let enc = Encoder::new(&mut store, &EncoderConfig::tiny(100), &mut rng).unwrap();
        let dev = store.device().clone();
        let ids = Tensor::new(&[[2u32, 10, 11, 3, 0, 0], [2, 12, 3, 0, 0, 0]], &dev).unwrap();
        let mask = Tensor::new(&[[1u32, 1, 1, 1, 0, 0], [1, 1, 1, 0, 0, 0]], &dev).unwrap();
        let y = enc.forward(&ids, &mask, None, &mut None).unwrap();
        assert_eq!(y.dims(), &[2, 6, 64]);

        // changing a padded id must not move the real positions
        let ids2 = Tensor::new(&[[2u32, 10, 11, 3, 50, 51], [2, 12, 3, 0, 0, 0]], &dev).unwrap();
        let y2 = enc.forward(&ids2, &mask, None, &mut None).unwrap();
        let a = y.narrow(1, 0, 4).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = y2.narrow(1, 0, 4).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-5));
    }

    #[test]
    fn tensor_names_are_canonicalized() {
        assert_eq!(
            canonical_tensor_name("bert.encoder.layer.0.attention.output.LayerNorm.gamma").as_deref(),
            Some("bert.encoder.layer.0.attention.output.LayerNorm.weight")
        );
        assert_eq!(
            canonical_tensor_name("embeddings.word_embeddings.weight").as_deref(),
            Some("bert.embeddings.word_embeddings.weight")
        );
        assert_eq!(canonical_tensor_name("cls.predictions.bias"), None);
        assert_eq!(canonical_tensor_name("bert.pooler.dense.weight"), None);
    }

    #[test]
    fn unknown_checkpoint_is_a_config_error() {
        assert_eq!(resolve_checkpoint("TINY").unwrap(), EncoderSource::Tiny);
        assert!(resolve_checkpoint("no-such/model-anywhere").is_err());
    }
}
