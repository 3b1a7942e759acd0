//! The hybrid classifier: transformer token vectors feed a BiLSTM, whose
//! per-step outputs go through parallel valid 1-D convolutions (one bank per
//! kernel size), ReLU, global max over time, concatenation, dropout and a
//! 5-way affine layer. The encoder is fine-tuned end to end with Adam.
//!
//! The same model type also carries the encoder-only baseline head
//! (dropout + affine on the start-token vector).

use std::collections::HashMap;

use candle_core::{DType, Tensor, Var, D};
use candle_nn::Optimizer;
use serde::{Deserialize, Serialize};
use sabia_core::{argmax, seeded_rng, Corpus, Label, SeededRng};

use crate::encoder::{load_pretrained, resolve_checkpoint, Encoder, EncoderConfig, EncoderSource, BASE_UNCASED};
use crate::layers::{dropout, global_max_pool, relu, softmax_rows, BiLstm, Conv1d, DropoutRng, Linear, Lstm};
use crate::params::ParamStore;
use crate::tokenizer::{Encoding, WordPiece};
use crate::training::{self, accuracy, inverse_frequency_weights, LoopSpec};
pub use crate::training::{weighted_cross_entropy, EpochStats};
use crate::{Error, Result};

/// Learning rate used with the random-init tiny encoder, which has nothing
/// pretrained to preserve and needs larger steps.
pub const TINY_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// BiLSTM + convolution banks + affine.
    Hybrid,
    /// Affine on the start-token vector.
    Cls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SabiaConfig {
    /// `tiny`, a checkpoint directory, or a hub id present in the local cache.
    pub checkpoint: String,
    pub max_len: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub bidirectional: bool,
    pub kernels: Vec<usize>,
    pub cnn_channels: usize,
    pub seed: u64,
    /// Weight the loss by inverse class frequency.
    pub class_weights: bool,
    /// Exclude convolution windows that touch padding from the max pool.
    pub mask_pooling: bool,
}

impl Default for SabiaConfig {
    fn default() -> Self {
        SabiaConfig {
            checkpoint: BASE_UNCASED.to_string(),
            max_len: 128,
            batch_size: 16,
            learning_rate: 2e-5,
            epochs: 4,
            dropout: 0.3,
            lstm_hidden: 128,
            lstm_layers: 1,
            bidirectional: true,
            kernels: vec![2, 3, 4],
            cnn_channels: 128,
            seed: 80,
            class_weights: false,
            mask_pooling: false,
        }
    }
}

impl SabiaConfig {
    /// Defaults with the tiny encoder and its learning rate.
    pub fn tiny() -> Self {
        SabiaConfig {
            checkpoint: crate::encoder::TINY.to_string(),
            learning_rate: TINY_LEARNING_RATE,
            ..SabiaConfig::default()
        }
    }

    pub fn is_tiny(&self) -> bool {
        self.checkpoint.eq_ignore_ascii_case(crate::encoder::TINY)
    }

    /// Width of the pooled feature vector.
    pub fn concat_width(&self) -> usize {
        self.cnn_channels * self.kernels.len()
    }

    pub fn recurrent_width(&self) -> usize {
        if self.bidirectional {
            2 * self.lstm_hidden
        } else {
            self.lstm_hidden
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("cnn_channels", self.cnn_channels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.kernels.is_empty() || self.kernels.contains(&0) {
            return Err(Error::Config("kernels must be a nonempty list of positive sizes".into()));
        }
        if self.kernels.iter().any(|&k| k > self.max_len) {
            return Err(Error::Config(format!("every kernel must fit in max_len {}", self.max_len)));
        }
        if self.max_len < 2 {
            return Err(Error::Config("max_len must leave room for the two special tokens".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Tensor shapes recorded at each stage of a forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShapeTrace(pub Vec<(String, Vec<usize>)>);

impl ShapeTrace {
    fn record(trace: &mut Option<&mut ShapeTrace>, stage: impl Into<String>, t: &Tensor) {
        if let Some(tr) = trace.as_deref_mut() {
            tr.0.push((stage.into(), t.dims().to_vec()));
        }
    }

    pub fn get(&self, stage: &str) -> Option<&[usize]> {
        self.0.iter().find(|(s, _)| s == stage).map(|(_, d)| d.as_slice())
    }

    pub fn stages(&self) -> Vec<&str> {
        self.0.iter().map(|(s, _)| s.as_str()).collect()
    }
}

enum Recurrent {
    Bi(BiLstm),
    Uni(Lstm),
}

/// BiLSTM, convolution banks, max pool, dropout and the output layer.
pub struct HybridHead {
    recurrent: Vec<Recurrent>,
    convs: Vec<Conv1d>,
    fc: Linear,
    dropout: f64,
    mask_pooling: bool,
}

impl HybridHead {
    pub fn new(store: &mut ParamStore, d_in: usize, config: &SabiaConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut recurrent = Vec::with_capacity(config.lstm_layers);
        let mut width = d_in;
        for layer in 0..config.lstm_layers {
            let prefix = format!("head.lstm.{layer}");
            recurrent.push(if config.bidirectional {
                Recurrent::Bi(BiLstm::new(store, &prefix, width, config.lstm_hidden, rng)?)
            } else {
                Recurrent::Uni(Lstm::new(store, &format!("{prefix}.forward"), width, config.lstm_hidden, rng)?)
            });
            width = config.recurrent_width();
        }
        let mut convs = Vec::with_capacity(config.kernels.len());
        for &k in &config.kernels {
            convs.push(Conv1d::new(store, &format!("head.conv_k{k}"), width, config.cnn_channels, k, rng)?);
        }
        let fc = Linear::new(store, "head.fc", config.concat_width(), Label::COUNT, rng)?;
        Ok(HybridHead {
            recurrent,
            convs,
            fc,
            dropout: config.dropout,
            mask_pooling: config.mask_pooling,
        })
    }

    /// `[b, t, d]` token vectors to `[b, 5]` logits. `mask` is only read
    /// when pooling is masked.
    pub fn forward(
        &self,
        x: &Tensor,
        mask: &Tensor,
        rng: &mut DropoutRng,
        trace: &mut Option<&mut ShapeTrace>,
    ) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.recurrent {
            h = match layer {
                Recurrent::Bi(bi) => bi.run(&h)?.0,
                Recurrent::Uni(lstm) => Tensor::stack(&lstm.forward(&h, false)?, 1)?,
            };
        }
        ShapeTrace::record(trace, "bilstm", &h);
        let h = h.transpose(1, 2)?.contiguous()?;
        ShapeTrace::record(trace, "permute", &h);
        let real_lens: Option<Vec<usize>> = if self.mask_pooling {
            Some(mask.to_dtype(DType::U32)?.to_vec2::<u32>()?.iter().map(|row| row.iter().filter(|&&m| m != 0).count()).collect())
        } else {
            None
        };
        let mut pooled = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let c = conv.forward(&h)?;
            ShapeTrace::record(trace, format!("conv_k{}", conv.kernel), &c);
            let mut c = relu(&c)?;
            if let Some(lens) = &real_lens {
                // ReLU output is non-negative, so zeroing a window drops it from the max
                let (b, _, positions) = c.dims3()?;
                let keep: Vec<f32> = lens
                    .iter()
                    .flat_map(|&len| (0..positions).map(move |j| if j + conv.kernel <= len { 1.0 } else { 0.0 }))
                    .collect();
                let keep = Tensor::from_vec(keep, (b, 1, positions), c.device())?.to_dtype(c.dtype())?;
                c = c.broadcast_mul(&keep)?;
            }
            let p = global_max_pool(&c)?;
            ShapeTrace::record(trace, format!("pool_k{}", conv.kernel), &p);
            pooled.push(p);
        }
        let cat = Tensor::cat(&pooled, 1)?;
        ShapeTrace::record(trace, "concat", &cat);
        let logits = self.fc.forward(&dropout(&cat, self.dropout, rng)?)?;
        ShapeTrace::record(trace, "logits", &logits);
        Ok(logits)
    }
}

struct ClsHead {
    fc: Linear,
    dropout: f64,
}

enum Head {
    Hybrid(HybridHead),
    Cls(ClsHead),
}

pub struct SabiaModel {
    pub config: SabiaConfig,
    pub head_kind: HeadKind,
    pub encoder_config: EncoderConfig,
    /// Output order of the logits.
    pub labels: [Label; Label::COUNT],
    pub history: Vec<EpochStats>,
    tokenizer: WordPiece,
    store: ParamStore,
    encoder: Encoder,
    head: Head,
}

/// One token's attribution score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub position: usize,
    pub score: f64,
}

impl SabiaModel {
    /// Fresh model: the encoder comes from `config.checkpoint`, everything
    /// else is initialized from `config.seed`.
    pub fn new(config: &SabiaConfig, head_kind: HeadKind) -> Result<Self> {
        config.validate()?;
        let (encoder_config, tokenizer, weights) = encoder_parts(&config.checkpoint)?;
        let mut rng = seeded_rng(config.seed);
        Self::build(config, head_kind, encoder_config, tokenizer, weights, DType::F32, &mut rng)
    }

    /// Assemble from explicit parts. `weights` overrides initial values by name.
    pub fn build(
        config: &SabiaConfig,
        head_kind: HeadKind,
        encoder_config: EncoderConfig,
        tokenizer: WordPiece,
        weights: HashMap<String, Tensor>,
        dtype: DType,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        if tokenizer.vocab_size() > encoder_config.vocab_size {
            return Err(Error::Config(format!(
                "tokenizer has {} entries but the encoder only {}",
                tokenizer.vocab_size(),
                encoder_config.vocab_size
            )));
        }
        if config.max_len > encoder_config.max_position_embeddings {
            return Err(Error::Config(format!(
                "max_len {} exceeds the encoder's {} positions",
                config.max_len, encoder_config.max_position_embeddings
            )));
        }
        let mut store = ParamStore::new(dtype);
        store.preload(weights);
        let encoder = Encoder::new(&mut store, &encoder_config, rng)?;
        let d = encoder_config.hidden_size;
        let head = match head_kind {
            HeadKind::Hybrid => Head::Hybrid(HybridHead::new(&mut store, d, config, rng)?),
            HeadKind::Cls => Head::Cls(ClsHead {
                fc: Linear::new(&mut store, "head.fc", d, Label::COUNT, rng)?,
                dropout: config.dropout,
            }),
        };
        Ok(SabiaModel {
            config: config.clone(),
            head_kind,
            encoder_config,
            labels: Label::ALL,
            history: Vec::new(),
            tokenizer,
            store,
            encoder,
            head,
        })
    }

    pub fn tokenizer(&self) -> &WordPiece {
        &self.tokenizer
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn n_parameters(&self) -> usize {
        self.store.n_parameters()
    }

    /// Subword ids and attention masks, `[n, max_len]`.
    pub fn encode<S: AsRef<str>>(&self, texts: &[S]) -> Encoding {
        self.tokenizer.encode(texts, self.config.max_len)
    }

    /// Encoding as `u32` tensors `(ids, mask)`.
    pub fn tensors(&self, enc: &Encoding) -> Result<(Tensor, Tensor)> {
        let dev = self.store.device();
        let (b, t) = (enc.batch_size(), enc.max_len());
        let ids = Tensor::from_vec(enc.ids.concat(), (b, t), dev)?;
        let mask = Tensor::from_vec(enc.mask.concat(), (b, t), dev)?;
        Ok((ids, mask))
    }

    /// Logits `[b, 5]`. Dropout is active only when `rng` is given.
    pub fn forward(&self, ids: &Tensor, mask: &Tensor, rng: &mut DropoutRng) -> Result<Tensor> {
        self.forward_inner(ids, mask, None, rng, &mut None)
    }

    /// Inference forward pass that also records every intermediate shape.
    pub fn forward_traced(&self, ids: &Tensor, mask: &Tensor) -> Result<(Tensor, ShapeTrace)> {
        let mut trace = ShapeTrace::default();
        let logits = self.forward_inner(ids, mask, None, &mut None, &mut Some(&mut trace))?;
        Ok((logits, trace))
    }

    fn forward_inner(
        &self,
        ids: &Tensor,
        mask: &Tensor,
        words: Option<&Tensor>,
        rng: &mut DropoutRng,
        trace: &mut Option<&mut ShapeTrace>,
    ) -> Result<Tensor> {
        let (b, t) = ids.dims2()?;
        if mask.dims() != [b, t] {
            return Err(Error::Config(format!("mask shape {:?} does not match ids {:?}", mask.dims(), ids.dims())));
        }
        ShapeTrace::record(trace, "input_ids", ids);
        let x = self.encoder.forward(ids, mask, words, rng)?;
        ShapeTrace::record(trace, "encoder", &x);
        match &self.head {
            Head::Hybrid(h) => h.forward(&x, mask, rng, trace),
            Head::Cls(h) => {
                let cls = x.narrow(1, 0, 1)?.squeeze(1)?;
                ShapeTrace::record(trace, "cls", &cls);
                let logits = h.fc.forward(&dropout(&cls, h.dropout, rng)?)?;
                ShapeTrace::record(trace, "logits", &logits);
                Ok(logits)
            }
        }
    }

    /// Labels and class probabilities, in input order.
    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Result<(Vec<Label>, Vec<Vec<f64>>)> {
        let mut labels = Vec::with_capacity(texts.len());
        let mut probs = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size.max(1)) {
            let (ids, mask) = self.tensors(&self.encode(chunk))?;
            let logits = self.forward(&ids, &mask, &mut None)?;
            for row in softmax_rows(&logits)? {
                labels.push(self.labels[argmax(&row)]);
                probs.push(row);
            }
        }
        Ok((labels, probs))
    }

    /// Top-`k` subword tokens by the L2 norm of the predicted-class logit's
    /// gradient with respect to their word embedding.
    pub fn explain(&self, text: &str, k: usize) -> Result<Vec<TokenScore>> {
        let enc = self.encode(&[text]);
        let (ids, mask) = self.tensors(&enc)?;
        let words = Var::from_tensor(&self.encoder.word_embeddings(&ids)?.detach())?;
        let logits = self.forward_inner(&ids, &mask, Some(words.as_tensor()), &mut None, &mut None)?;
        let row = logits.to_dtype(DType::F64)?.squeeze(0)?.to_vec1::<f64>()?;
        let predicted = argmax(&row);
        let grads = logits.narrow(1, predicted, 1)?.sum_all()?.backward()?;
        let g = grads
            .get(words.as_tensor())
            .ok_or_else(|| Error::Training("no gradient reached the word embeddings".into()))?;
        let norms = g.sqr()?.sum(D::Minus1)?.sqrt()?.squeeze(0)?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        let mut scores: Vec<TokenScore> = enc.ids[0]
            .iter()
            .zip(&enc.mask[0])
            .enumerate()
            .filter(|(_, (&id, &m))| m != 0 && !self.tokenizer.is_special(id))
            .map(|(pos, (&id, _))| TokenScore {
                token: self.tokenizer.token(id).to_string(),
                position: pos,
                score: norms[pos],
            })
            .collect();
        scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.position.cmp(&b.position)));
        scores.truncate(k);
        Ok(scores)
    }

    /// Overwrite parameter values from a safetensors file.
    pub fn load_weights(&self, path: &std::path::Path) -> Result<()> {
        self.store.load_values(path)
    }

    fn train(&mut self, train: &Corpus, dev: Option<&Corpus>, rng: &mut SeededRng) -> Result<()> {
        let labels = train.labels()?;
        let counts = train.class_counts();
        if let Some(missing) = Label::ALL.iter().find(|l| counts[l.code()] == 0) {
            return Err(Error::Training(format!("training corpus has no {missing} posts; all five classes are required")));
        }
        let enc = self.encode(&train.texts());
        let targets: Vec<usize> = labels.iter().map(|l| l.code()).collect();
        let dev_data = dev.map(|d| d.labels().map(|y| (d.texts().into_iter().map(str::to_string).collect::<Vec<_>>(), y)));
        let dev_data = dev_data.transpose()?;
        let spec = LoopSpec {
            targets: &targets,
            weights: if self.config.class_weights { inverse_frequency_weights(&counts) } else { [1.0; Label::COUNT] },
            epochs: self.config.epochs,
            batch_size: self.config.batch_size,
            dtype: self.store.dtype(),
        };
        let mut opt = candle_nn::AdamW::new(
            self.store.vars(),
            candle_nn::ParamsAdamW {
                lr: self.config.learning_rate,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
        )?;
        let this = &*self;
        let history = training::run(
            spec,
            &mut opt,
            rng,
            |batch, rng| {
                let sub = Encoding {
                    ids: batch.iter().map(|&i| enc.ids[i].clone()).collect(),
                    mask: batch.iter().map(|&i| enc.mask[i].clone()).collect(),
                };
                let (ids, mask) = this.tensors(&sub)?;
                this.forward(&ids, &mask, &mut Some(rng))
            },
            || match &dev_data {
                Some((texts, ys)) if !texts.is_empty() => Ok(Some(accuracy(&this.predict(texts)?.0, ys))),
                _ => Ok(None),
            },
        )?;
        self.history.extend(history);
        Ok(())
    }
}

/// Encoder config, tokenizer and pretrained weights (none for `tiny`).
pub fn encoder_parts(checkpoint: &str) -> Result<(EncoderConfig, WordPiece, HashMap<String, Tensor>)> {
    match resolve_checkpoint(checkpoint)? {
        EncoderSource::Tiny => {
            let tok = WordPiece::tiny();
            Ok((EncoderConfig::tiny(tok.vocab_size()), tok, HashMap::new()))
        }
        EncoderSource::Directory(dir) => load_pretrained(&dir),
    }
}

fn check_corpus(train: &Corpus) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    Ok(())
}

/// Fine-tune the hybrid model end to end. The per-epoch history is kept
/// in `model.history`.
pub fn fine_tune(config: &SabiaConfig, train: &Corpus, dev: Option<&Corpus>) -> Result<SabiaModel> {
    check_corpus(train)?;
    train_with_head(config, HeadKind::Hybrid, train, dev)
}

/// Fine-tune the encoder with a start-token classification head.
pub fn train_encoder_baseline(config: &SabiaConfig, train: &Corpus, dev: Option<&Corpus>) -> Result<SabiaModel> {
    check_corpus(train)?;
    train_with_head(config, HeadKind::Cls, train, dev)
}

fn train_with_head(config: &SabiaConfig, head: HeadKind, train: &Corpus, dev: Option<&Corpus>) -> Result<SabiaModel> {
    config.validate()?;
    let (encoder_config, tokenizer, weights) = encoder_parts(&config.checkpoint)?;
    // weights first, then shuffling and dropout, all from one stream
    let mut rng = seeded_rng(config.seed);
    let mut model = SabiaModel::build(config, head, encoder_config, tokenizer, weights, DType::F32, &mut rng)?;
    model.train(train, dev, &mut rng)?;
    Ok(model)
}

/// Labels and probability rows for `texts`.
pub fn predict_sabia<S: AsRef<str>>(model: &SabiaModel, texts: &[S]) -> Result<(Vec<Label>, Vec<Vec<f64>>)> {
    model.predict(texts)
}

pub fn explain(model: &SabiaModel, text: &str, k: usize) -> Result<Vec<TokenScore>> {
    model.explain(text, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sabia_core::AnnotatedPost;

    fn small_config() -> SabiaConfig {
        SabiaConfig {
            max_len: 16,
            lstm_hidden: 8,
            cnn_channels: 4,
            batch_size: 4,
            epochs: 1,
            ..SabiaConfig::tiny()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SabiaConfig::default().validate().is_ok());
        assert_eq!(SabiaConfig::default().concat_width(), 384);
        assert_eq!(SabiaConfig::default().recurrent_width(), 256);
        let bad = SabiaConfig { kernels: vec![], ..SabiaConfig::tiny() };
        assert!(bad.validate().is_err());
        let bad = SabiaConfig { dropout: 1.0, ..SabiaConfig::tiny() };
        assert!(bad.validate().is_err());
        let bad = SabiaConfig { max_len: 3, ..SabiaConfig::tiny() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_text_gives_finite_logits() {
        let model = SabiaModel::new(&small_config(), HeadKind::Hybrid).unwrap();
        let (_, probs) = model.predict(&["", "   "]).unwrap();
        for row in probs {
            assert!(row.iter().all(|p| p.is_finite()));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert!(model.predict::<&str>(&[]).unwrap().0.is_empty());
    }

    #[test]
    fn masked_pooling_only_affects_padded_inputs() {
        let plain = SabiaModel::new(&small_config(), HeadKind::Hybrid).unwrap();
        let masked = SabiaModel::new(&SabiaConfig { mask_pooling: true, ..small_config() }, HeadKind::Hybrid).unwrap();
        let full = ["selling oxy tonight hit me up for the best prices in town right now ok"];
        assert_eq!(plain.encode(&full).mask[0].iter().sum::<u32>(), 16);
        assert_eq!(plain.predict(&full).unwrap().1, masked.predict(&full).unwrap().1);
        let short = ["selling oxy"];
        assert_ne!(plain.predict(&short).unwrap().1, masked.predict(&short).unwrap().1);
    }

    #[test]
    fn missing_class_is_rejected() {
        let posts = vec![
            AnnotatedPost::new("a", "selling oxy", Some(Label::Dealer)),
            AnnotatedPost::new("b", "clean for a year", Some(Label::RecoveredUser)),
        ];
        let corpus = Corpus::new(posts).unwrap();
        assert!(matches!(fine_tune(&small_config(), &corpus, None), Err(Error::Training(_))));
        assert!(matches!(fine_tune(&small_config(), &Corpus::default(), None), Err(Error::Training(_))));
    }

    #[test]
    fn explain_scores_are_sorted_and_clamped() {
        let model = SabiaModel::new(&small_config(), HeadKind::Hybrid).unwrap();
        let all = model.explain("selling oxy tonight", 100).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(all.iter().all(|s| s.score >= 0.0));
        assert_eq!(model.explain("selling oxy tonight", 1).unwrap().len(), 1);
    }
}
