//! Checkpoint directories: `weights.safetensors`, a `config.json` manifest
//! (model kind, configs, label order, training history), the tokenizer
//! vocabulary or cleaning setup, and a `model_card.txt`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use candle_core::DType;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sabia_core::preprocess::{PreprocessConfig, Preprocessor};
use sabia_core::{seeded_rng, Corpus, Label, Lexicon};

use crate::encoder::EncoderConfig;
use crate::neural::{NeuralConfig, NeuralModel};
use crate::sabia::{HeadKind, SabiaConfig, SabiaModel};
use crate::tokenizer::WordPiece;
use crate::training::EpochStats;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const MANIFEST_FILE: &str = "config.json";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LEXICON_FILE: &str = "lexicon.csv";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const MODEL_CARD_FILE: &str = "model_card.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sabia,
    Encoder,
    Cnn,
    Bilstm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: ModelKind,
    pub labels: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sabia: Option<SabiaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neural: Option<NeuralConfig>,
    #[serde(default)]
    pub history: Vec<EpochStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_hash: Option<String>,
}

pub enum Checkpoint {
    Sabia(SabiaModel),
    Neural(NeuralModel),
}

/// SHA-256 over `id \t label \t text \n` for every post, in order.
pub fn data_hash(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    for p in corpus {
        h.update(p.id.as_bytes());
        h.update(b"\t");
        h.update(p.label.map(Label::name).unwrap_or("").as_bytes());
        h.update(b"\t");
        h.update(p.text.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn model_card(manifest: &Manifest, seed: u64, n_parameters: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind: {}", serde_json::to_value(manifest.kind).unwrap_or_default().as_str().unwrap_or(""));
    let _ = writeln!(s, "seed: {seed}");
    let _ = writeln!(s, "data_sha256: {}", manifest.data_hash.as_deref().unwrap_or("unknown"));
    let _ = writeln!(s, "parameters: {n_parameters}");
    let _ = writeln!(s, "labels: {}", manifest.labels.iter().map(|l| l.name()).collect::<Vec<_>>().join(", "));
    for e in &manifest.history {
        let _ = write!(s, "epoch {}: loss {:.6} train_accuracy {:.4}", e.epoch, e.loss, e.train_accuracy);
        if let Some(d) = e.dev_accuracy {
            let _ = write!(s, " dev_accuracy {d:.4}");
        }
        s.push('\n');
    }
    s
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn save_sabia(model: &SabiaModel, dir: &Path, data_hash: Option<&str>) -> Result<()> {
    prepare(dir)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: match model.head_kind {
            HeadKind::Hybrid => ModelKind::Sabia,
            HeadKind::Cls => ModelKind::Encoder,
        },
        labels: model.labels.to_vec(),
        sabia: Some(model.config.clone()),
        encoder: Some(model.encoder_config.clone()),
        neural: None,
        history: model.history.clone(),
        data_hash: data_hash.map(str::to_string),
    };
    model.store().save(&dir.join(WEIGHTS_FILE))?;
    write(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    write(&dir.join(VOCAB_FILE), model.tokenizer().vocab_text())?;
    write(&dir.join(MODEL_CARD_FILE), model_card(&manifest, model.config.seed, model.n_parameters()))
}

pub fn save_neural(model: &NeuralModel, dir: &Path, data_hash: Option<&str>) -> Result<()> {
    prepare(dir)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: match model.config.arch {
            crate::neural::Arch::Cnn => ModelKind::Cnn,
            crate::neural::Arch::Bilstm => ModelKind::Bilstm,
        },
        labels: model.labels.to_vec(),
        sabia: None,
        encoder: None,
        neural: Some(model.config.clone()),
        history: model.history.clone(),
        data_hash: data_hash.map(str::to_string),
    };
    model.store().save(&dir.join(WEIGHTS_FILE))?;
    write(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    write(&dir.join(LEXICON_FILE), model.preprocessor().lexicon().to_csv())?;
    write(&dir.join(PREPROCESS_FILE), serde_json::to_string_pretty(model.preprocessor().config())?)?;
    write(&dir.join(MODEL_CARD_FILE), model_card(&manifest, model.config.seed, model.store().n_parameters()))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let m: Manifest = serde_json::from_str(&read(&path)?).map_err(|e| Error::checkpoint(&path, e.to_string()))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::checkpoint(&path, format!("unsupported format version {}", m.format_version)));
    }
    if m.labels != Label::ALL {
        return Err(Error::checkpoint(&path, "label order differs from the five-class taxonomy"));
    }
    Ok(m)
}

fn missing(dir: &Path, what: &str) -> Error {
    Error::checkpoint(dir.join(MANIFEST_FILE), format!("manifest lacks the {what} section"))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let m = read_manifest(dir)?;
    match m.kind {
        ModelKind::Sabia | ModelKind::Encoder => {
            let config = m.sabia.ok_or_else(|| missing(dir, "sabia"))?;
            let encoder = m.encoder.ok_or_else(|| missing(dir, "encoder"))?;
            let head = if m.kind == ModelKind::Sabia { HeadKind::Hybrid } else { HeadKind::Cls };
            let tokenizer = WordPiece::from_file(&dir.join(VOCAB_FILE))?;
            let mut rng = seeded_rng(config.seed);
            let mut model = SabiaModel::build(&config, head, encoder, tokenizer, HashMap::new(), DType::F32, &mut rng)?;
            model.load_weights(&dir.join(WEIGHTS_FILE))?;
            model.history = m.history;
            Ok(Checkpoint::Sabia(model))
        }
        ModelKind::Cnn | ModelKind::Bilstm => {
            let config = m.neural.ok_or_else(|| missing(dir, "neural"))?;
            let lexicon = Lexicon::from_reader(read(&dir.join(LEXICON_FILE))?.as_bytes(), &dir.join(LEXICON_FILE))?;
            let pre_path = dir.join(PREPROCESS_FILE);
            let pre_config: PreprocessConfig =
                serde_json::from_str(&read(&pre_path)?).map_err(|e| Error::checkpoint(&pre_path, e.to_string()))?;
            let table = config.load_embeddings(None)?;
            let mut rng = seeded_rng(config.seed);
            let mut model = NeuralModel::build(&config, table, Preprocessor::new(lexicon, pre_config), &mut rng)?;
            model.load_weights(&dir.join(WEIGHTS_FILE))?;
            model.history = m.history;
            Ok(Checkpoint::Neural(model))
        }
    }
}

pub fn load_sabia(dir: &Path) -> Result<SabiaModel> {
    match load_checkpoint(dir)? {
        Checkpoint::Sabia(m) => Ok(m),
        Checkpoint::Neural(_) => Err(Error::checkpoint(dir, "not a transformer checkpoint")),
    }
}

pub fn load_neural(dir: &Path) -> Result<NeuralModel> {
    match load_checkpoint(dir)? {
        Checkpoint::Neural(m) => Ok(m),
        Checkpoint::Sabia(_) => Err(Error::checkpoint(dir, "not a CNN/BiLSTM checkpoint")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sabia_core::AnnotatedPost;

    #[test]
    fn hash_depends_on_labels_and_text() {
        let a = Corpus::new(vec![AnnotatedPost::new("1", "x", Some(Label::Dealer))]).unwrap();
        let b = Corpus::new(vec![AnnotatedPost::new("1", "x", Some(Label::NonUser))]).unwrap();
        assert_eq!(data_hash(&a).len(), 64);
        assert_ne!(data_hash(&a), data_hash(&b));
        assert_eq!(data_hash(&a), data_hash(&a.clone()));
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Io { .. })));
    }
}
