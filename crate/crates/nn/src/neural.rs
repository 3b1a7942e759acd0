//! CNN and BiLSTM baselines over frozen pretrained word vectors, trained
//! with plain SGD on cleaned token sequences.

use std::path::Path;

use candle_core::{DType, Tensor};
use candle_nn::Optimizer;
use serde::{Deserialize, Serialize};
use sabia_core::features::{load_embeddings, toy_embeddings, EmbeddingTable};
use sabia_core::preprocess::Preprocessor;
use sabia_core::{argmax, seeded_rng, AnnotatedPost, Corpus, Label, SeededRng};

use crate::layers::{global_max_pool, relu, softmax_rows, BiLstm, Conv1d, Linear};
use crate::params::ParamStore;
use crate::training::{self, EpochStats, LoopSpec};
use crate::{Error, Result};

/// Embedding source naming the bundled 50-dimensional toy table.
pub const TOY_EMBEDDINGS: &str = "toy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    #[default]
    Cnn,
    Bilstm,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Cnn => "cnn",
            Arch::Bilstm => "bilstm",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Arch::Cnn),
            "bilstm" | "lstm" => Ok(Arch::Bilstm),
            other => Err(Error::Config(format!("unknown architecture `{other}` (expected cnn or bilstm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub arch: Arch,
    /// Vector file path, or `toy` for the bundled table.
    pub embeddings: String,
    /// Dimension expected in the vector file; the toy table is always 50.
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lstm_units: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            arch: Arch::Cnn,
            embeddings: TOY_EMBEDDINGS.to_string(),
            embedding_dim: 300,
            learning_rate: 0.1,
            epochs: 5,
            batch_size: 32,
            lstm_units: 128,
            filters: 128,
            kernel_size: 5,
            max_len: 128,
            seed: 80,
        }
    }
}

impl NeuralConfig {
    pub fn new(arch: Arch) -> Self {
        NeuralConfig { arch, ..NeuralConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("lstm_units", self.lstm_units),
            ("filters", self.filters),
            ("kernel_size", self.kernel_size),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_len < self.kernel_size {
            return Err(Error::Config(format!(
                "max_len {} is shorter than kernel_size {}",
                self.max_len, self.kernel_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    /// Load the configured vector table. Relative paths resolve against `base`.
    pub fn load_embeddings(&self, base: Option<&Path>) -> Result<EmbeddingTable> {
        if self.embeddings.eq_ignore_ascii_case(TOY_EMBEDDINGS) {
            return Ok(toy_embeddings());
        }
        let path = Path::new(&self.embeddings);
        let path = match base {
            Some(b) if path.is_relative() => b.join(path),
            _ => path.to_path_buf(),
        };
        Ok(load_embeddings(&path, self.embedding_dim)?)
    }
}

/// Output head over `[b, t, dim]` word vectors.
pub enum BaselineHead {
    Cnn { conv: Conv1d, fc: Linear },
    Bilstm { lstm: BiLstm, fc: Linear },
}

impl BaselineHead {
    pub fn new(store: &mut ParamStore, config: &NeuralConfig, dim: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(match config.arch {
            Arch::Cnn => BaselineHead::Cnn {
                conv: Conv1d::new(store, "cnn.conv", dim, config.filters, config.kernel_size, rng)?,
                fc: Linear::new(store, "cnn.fc", config.filters, Label::COUNT, rng)?,
            },
            Arch::Bilstm => BaselineHead::Bilstm {
                lstm: BiLstm::new(store, "bilstm.lstm", dim, config.lstm_units, rng)?,
                fc: Linear::new(store, "bilstm.fc", 2 * config.lstm_units, Label::COUNT, rng)?,
            },
        })
    }

    /// Logits `[b, 5]`. `keep[b, t]` (1 on real tokens) limits the BiLSTM
    /// to each post's own tokens; the CNN pools over every position.
    pub fn forward(&self, x: &Tensor, keep: &Tensor) -> Result<Tensor> {
        match self {
            BaselineHead::Cnn { conv, fc } => {
                let h = x.transpose(1, 2)?.contiguous()?;
                let pooled = global_max_pool(&relu(&conv.forward(&h)?)?)?;
                fc.forward(&pooled)
            }
            BaselineHead::Bilstm { lstm, fc } => {
                let (_, last) = lstm.run_masked(x, Some(keep))?;
                fc.forward(&last)
            }
        }
    }

    /// CNN feature map before pooling, `[b, filters, t - k + 1]`.
    pub fn feature_map(&self, x: &Tensor) -> Result<Option<Tensor>> {
        match self {
            BaselineHead::Cnn { conv, .. } => Ok(Some(relu(&conv.forward(&x.transpose(1, 2)?.contiguous()?)?)?)),
            BaselineHead::Bilstm { .. } => Ok(None),
        }
    }
}

pub struct NeuralModel {
    pub config: NeuralConfig,
    /// Output order of the logits.
    pub labels: [Label; Label::COUNT],
    pub history: Vec<EpochStats>,
    embeddings: EmbeddingTable,
    preprocessor: Preprocessor,
    store: ParamStore,
    head: BaselineHead,
}

impl NeuralModel {
    /// Untrained model with weights drawn from `rng`.
    pub fn build(
        config: &NeuralConfig,
        embeddings: EmbeddingTable,
        preprocessor: Preprocessor,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(DType::F32);
        let head = BaselineHead::new(&mut store, config, embeddings.dim(), rng)?;
        Ok(NeuralModel {
            config: config.clone(),
            labels: Label::ALL,
            history: Vec::new(),
            embeddings,
            preprocessor,
            store,
            head,
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.embeddings
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    /// Cleaned tokens, truncated to `max_len`.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut t = self.preprocessor.clean(text);
        t.truncate(self.config.max_len);
        t
    }

    /// `[b, t, dim]` vectors with zero padding, and the keep mask. The CNN
    /// always sees `t = max_len`; the BiLSTM batch stops at its longest
    /// post, since masked trailing steps cannot change its final states.
    pub fn inputs(&self, docs: &[Vec<String>]) -> Result<(Tensor, Tensor)> {
        let d = self.embeddings.dim();
        let t = match self.config.arch {
            Arch::Cnn => self.config.max_len,
            Arch::Bilstm => docs.iter().map(Vec::len).max().unwrap_or(0).clamp(1, self.config.max_len),
        };
        let mut data = vec![0.0f32; docs.len() * t * d];
        let mut keep = vec![0.0f32; docs.len() * t];
        for (i, doc) in docs.iter().enumerate() {
            for (j, tok) in doc.iter().take(t).enumerate() {
                let at = (i * t + j) * d;
                data[at..at + d].copy_from_slice(self.embeddings.lookup(tok));
                keep[i * t + j] = 1.0;
            }
        }
        let dev = self.store.device();
        let x = Tensor::from_vec(data, (docs.len(), t, d), dev)?.to_dtype(self.store.dtype())?;
        let keep = Tensor::from_vec(keep, (docs.len(), t), dev)?.to_dtype(self.store.dtype())?;
        Ok((x, keep))
    }

    pub fn forward(&self, x: &Tensor, keep: &Tensor) -> Result<Tensor> {
        self.head.forward(x, keep)
    }

    pub fn head(&self) -> &BaselineHead {
        &self.head
    }

    /// Labels and class probabilities for raw texts.
    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Result<(Vec<Label>, Vec<Vec<f64>>)> {
        let mut labels = Vec::with_capacity(texts.len());
        let mut probs = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size) {
            let docs: Vec<Vec<String>> = chunk.iter().map(|t| self.tokens(t.as_ref())).collect();
            let (x, keep) = self.inputs(&docs)?;
            for row in softmax_rows(&self.forward(&x, &keep)?)? {
                labels.push(self.labels[argmax(&row)]);
                probs.push(row);
            }
        }
        Ok((labels, probs))
    }

    pub fn load_weights(&self, path: &Path) -> Result<()> {
        self.store.load_values(path)
    }
}

/// Train with the vector table named in `config`.
pub fn train_neural(config: &NeuralConfig, corpus: &Corpus, preprocessor: &Preprocessor) -> Result<NeuralModel> {
    let table = config.load_embeddings(None)?;
    train_neural_with(config, table, corpus, preprocessor, None)
}

/// Train on an already loaded table, optionally scoring `dev` each epoch.
pub fn train_neural_with(
    config: &NeuralConfig,
    embeddings: EmbeddingTable,
    corpus: &Corpus,
    preprocessor: &Preprocessor,
    dev: Option<&Corpus>,
) -> Result<NeuralModel> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    let labels = corpus.labels()?;
    let mut rng = seeded_rng(config.seed);
    let mut model = NeuralModel::build(config, embeddings, preprocessor.clone(), &mut rng)?;
    let docs: Vec<Vec<String>> = corpus.iter().map(|p| model.tokens(&p.text)).collect();
    if docs.iter().all(Vec::is_empty) {
        return Err(Error::Training("every post is empty after cleaning".into()));
    }
    let oov = docs.iter().flatten().filter(|t| !model.embeddings.contains(t)).count();
    let total: usize = docs.iter().map(Vec::len).sum();
    log::info!("{} of {} training tokens are out of vocabulary", oov, total);

    let targets: Vec<usize> = labels.iter().map(|l| l.code()).collect();
    let dev_data = dev.map(|d| d.labels().map(|y| (d.texts().into_iter().map(str::to_string).collect::<Vec<_>>(), y)));
    let dev_data = dev_data.transpose()?;
    let spec = LoopSpec {
        targets: &targets,
        weights: [1.0; Label::COUNT],
        epochs: config.epochs,
        batch_size: config.batch_size,
        dtype: model.store.dtype(),
    };
    let mut opt = candle_nn::SGD::new(model.store.vars(), config.learning_rate)?;
    let this = &model;
    let history = training::run(
        spec,
        &mut opt,
        &mut rng,
        |batch, _| {
            let sub: Vec<Vec<String>> = batch.iter().map(|&i| docs[i].clone()).collect();
            let (x, keep) = this.inputs(&sub)?;
            this.forward(&x, &keep)
        },
        || match &dev_data {
            Some((texts, ys)) if !texts.is_empty() => Ok(Some(training::accuracy(&this.predict(texts)?.0, ys))),
            _ => Ok(None),
        },
    )?;
    model.history = history;
    Ok(model)
}

/// Predicted label per post, in order.
pub fn predict_neural(model: &NeuralModel, posts: &[AnnotatedPost]) -> Result<Vec<Label>> {
    let texts: Vec<&str> = posts.iter().map(|p| p.text.as_str()).collect();
    Ok(model.predict(&texts)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sabia_core::Lexicon;

    fn model(arch: Arch, max_len: usize) -> NeuralModel {
        let cfg = NeuralConfig { max_len, ..NeuralConfig::new(arch) };
        let pre = Preprocessor::with_defaults(Lexicon::starter());
        NeuralModel::build(&cfg, toy_embeddings(), pre, &mut seeded_rng(1)).unwrap()
    }

    #[test]
    fn defaults_and_validation() {
        let c = NeuralConfig::default();
        assert_eq!((c.learning_rate, c.epochs, c.batch_size, c.lstm_units, c.filters, c.kernel_size), (0.1, 5, 32, 128, 128, 5));
        assert!(NeuralConfig { max_len: 4, ..c.clone() }.validate().is_err());
        assert!(NeuralConfig { learning_rate: 0.0, ..c }.validate().is_err());
        assert_eq!("BiLSTM".parse::<Arch>().unwrap(), Arch::Bilstm);
    }

    #[test]
    fn cnn_shapes() {
        let m = model(Arch::Cnn, 16);
        let x = Tensor::zeros((2, 16, 50), DType::F32, &candle_core::Device::Cpu).unwrap();
        let keep = Tensor::ones((2, 16), DType::F32, &candle_core::Device::Cpu).unwrap();
        assert_eq!(m.head().feature_map(&x).unwrap().unwrap().dims(), &[2, 128, 12]);
        assert_eq!(m.forward(&x, &keep).unwrap().dims(), &[2, 5]);
    }

    #[test]
    fn short_and_empty_posts_still_predict() {
        for arch in [Arch::Cnn, Arch::Bilstm] {
            let m = model(arch, 8);
            let (labels, probs) = m.predict(&["oxy", "", "selling percs cheap tonight dm me"]).unwrap();
            assert_eq!(labels.len(), 3);
            assert!(probs.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-6));
            assert!(m.predict::<&str>(&[]).unwrap().0.is_empty());
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        let pre = Preprocessor::with_defaults(Lexicon::starter());
        let err = train_neural(&NeuralConfig::default(), &Corpus::default(), &pre).err().expect("empty corpus must fail");
        assert!(matches!(err, Error::Training(_)));
    }
}
