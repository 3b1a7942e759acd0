//! Training, checkpointing and prediction behind one interface for every
//! model family.
//!
//! Neural and transformer checkpoints use the `sabia-nn` layout. Classical
//! checkpoints share its file names: `config.json` manifest, `model.bin`
//! blob, `tfidf.json`, `lexicon.csv`, `preprocess.json` and
//! `model_card.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sabia_core::baselines::{train_classical, Algorithm, ClassicalConfig, ClassicalModel};
use sabia_core::features::{fit_tfidf, TfidfModel};
use sabia_core::preprocess::{PreprocessConfig, Preprocessor};
use sabia_core::{Corpus, Label, Lexicon};
use sabia_nn::checkpoint::{
    self, data_hash, LEXICON_FILE, MANIFEST_FILE, MODEL_CARD_FILE, PREPROCESS_FILE,
};
use sabia_nn::neural::{train_neural_with, NeuralModel};
use sabia_nn::sabia::{fine_tune, train_encoder_baseline, SabiaModel, TokenScore};

use crate::config::{ModelChoice, RunConfig};
use crate::error::{Failure, Outcome};

pub const CLASSICAL_BLOB_FILE: &str = "model.bin";
pub const TFIDF_FILE: &str = "tfidf.json";
pub const CLASSICAL_FORMAT_VERSION: u32 = 1;

/// TF-IDF features feeding a classical classifier.
pub struct ClassicalPipeline {
    pub preprocessor: Preprocessor,
    pub tfidf: TfidfModel,
    pub model: ClassicalModel,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassicalManifest {
    format_version: u32,
    kind: String,
    algorithm: Algorithm,
    labels: Vec<Label>,
    seed: u64,
    #[serde(default)]
    data_hash: Option<String>,
}

impl ClassicalPipeline {
    pub fn fit(config: &ClassicalConfig, corpus: &Corpus, preprocessor: Preprocessor) -> Outcome<Self> {
        config.effective_params().map_err(|e| Failure::Usage(e.to_string()))?;
        let docs: Vec<Vec<String>> = corpus.iter().map(|p| preprocessor.clean(&p.text)).collect();
        let tfidf = fit_tfidf(&docs)?;
        let x = tfidf.transform_all(&docs);
        let model = train_classical(config, &x, &corpus.labels()?)?;
        Ok(ClassicalPipeline {
            preprocessor,
            tfidf,
            model,
        })
    }

    /// Labels plus raw scores spread over the five classes; classes absent
    /// from training score negative infinity.
    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Outcome<(Vec<Label>, Vec<Vec<f64>>)> {
        let mut labels = Vec::with_capacity(texts.len());
        let mut scores = Vec::with_capacity(texts.len());
        for t in texts {
            let x = self.tfidf.transform(&self.preprocessor.clean(t.as_ref()));
            let raw = self.model.scores(&x);
            let mut full = vec![f64::NEG_INFINITY; Label::COUNT];
            for (c, s) in self.model.classes.iter().zip(&raw) {
                full[c.code()] = *s;
            }
            labels.push(self.model.classes[sabia_core::argmax(&raw)]);
            scores.push(full);
        }
        Ok((labels, scores))
    }

    pub fn save(&self, dir: &Path, data_hash: Option<&str>) -> Outcome<()> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let manifest = ClassicalManifest {
            format_version: CLASSICAL_FORMAT_VERSION,
            kind: "classical".into(),
            algorithm: self.model.config.algorithm,
            labels: Label::ALL.to_vec(),
            seed: self.model.config.seed,
            data_hash: data_hash.map(str::to_string),
        };
        write(&dir.join(MANIFEST_FILE), json(&manifest)?)?;
        write(&dir.join(CLASSICAL_BLOB_FILE), self.model.to_blob())?;
        write(&dir.join(TFIDF_FILE), json(&self.tfidf)?)?;
        write(&dir.join(LEXICON_FILE), self.preprocessor.lexicon().to_csv())?;
        write(&dir.join(PREPROCESS_FILE), json(self.preprocessor.config())?)?;
        let mut card = String::new();
        let _ = writeln!(card, "kind: classical");
        let _ = writeln!(card, "algorithm: {}", manifest.algorithm);
        let _ = writeln!(card, "seed: {}", manifest.seed);
        let _ = writeln!(card, "data_sha256: {}", data_hash.unwrap_or("unknown"));
        let _ = writeln!(card, "features: {}", self.model.n_features);
        let _ = writeln!(
            card,
            "classes: {}",
            self.model.classes.iter().map(|l| l.name()).collect::<Vec<_>>().join(", ")
        );
        for (k, v) in self.model.config.effective_params()? {
            let _ = writeln!(card, "param {k}: {v:?}");
        }
        write(&dir.join(MODEL_CARD_FILE), card)
    }

    pub fn load(dir: &Path) -> Outcome<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let manifest: ClassicalManifest = parse(&mpath)?;
        if manifest.format_version != CLASSICAL_FORMAT_VERSION {
            return Err(Failure::Data(format!(
                "{}: unsupported format version {}",
                mpath.display(),
                manifest.format_version
            )));
        }
        let blob_path = dir.join(CLASSICAL_BLOB_FILE);
        let blob = std::fs::read(&blob_path).map_err(|e| io(&blob_path, e))?;
        let model = ClassicalModel::from_blob(&blob).map_err(|e| Failure::from(e).at(&blob_path))?;
        let tfidf: TfidfModel = parse(&dir.join(TFIDF_FILE))?;
        if tfidf.dim() != model.n_features {
            return Err(Failure::Data(format!(
                "{}: {} features but the model expects {}",
                dir.join(TFIDF_FILE).display(),
                tfidf.dim(),
                model.n_features
            )));
        }
        let lex_path = dir.join(LEXICON_FILE);
        let lex_text = std::fs::read_to_string(&lex_path).map_err(|e| io(&lex_path, e))?;
        let lexicon = Lexicon::from_reader(lex_text.as_bytes(), &lex_path)?;
        let pre: PreprocessConfig = parse(&dir.join(PREPROCESS_FILE))?;
        Ok(ClassicalPipeline {
            preprocessor: Preprocessor::new(lexicon, pre),
            tfidf,
            model,
        })
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome<()> {
    std::fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn json<T: Serialize + ?Sized>(value: &T) -> Outcome<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Any trained model the command line can produce.
pub enum TrainedModel {
    Classical(ClassicalPipeline),
    Neural(NeuralModel),
    /// hybrid head or encoder-only baseline
    Transformer(SabiaModel),
}

/// Train the model `choice` on `train`, scoring `dev` per epoch where the
/// family supports it.
pub fn train_model(choice: ModelChoice, cfg: &RunConfig, train: &Corpus, dev: Option<&Corpus>) -> Outcome<TrainedModel> {
    match choice {
        ModelChoice::Classical(algo) => {
            let pre = cfg.preprocessor(cfg.load_lexicon()?);
            Ok(TrainedModel::Classical(ClassicalPipeline::fit(&cfg.classical_config(algo), train, pre)?))
        }
        ModelChoice::Neural(arch) => {
            let ncfg = cfg.neural_config(arch);
            ncfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let table = ncfg.load_embeddings(None)?;
            let pre = cfg.preprocessor(cfg.load_lexicon()?);
            Ok(TrainedModel::Neural(train_neural_with(&ncfg, table, train, &pre, dev)?))
        }
        ModelChoice::Sabia | ModelChoice::Encoder => {
            let scfg = cfg.sabia_config();
            scfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let model = if choice == ModelChoice::Sabia {
                fine_tune(&scfg, train, dev)?
            } else {
                train_encoder_baseline(&scfg, train, dev)?
            };
            Ok(TrainedModel::Transformer(model))
        }
    }
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Classical(p) => p.model.config.algorithm.name(),
            TrainedModel::Neural(m) => m.config.arch.name(),
            TrainedModel::Transformer(m) => match m.head_kind {
                sabia_nn::sabia::HeadKind::Hybrid => "sabia",
                sabia_nn::sabia::HeadKind::Cls => "encoder",
            },
        }
    }

    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Outcome<(Vec<Label>, Vec<Vec<f64>>)> {
        match self {
            TrainedModel::Classical(p) => p.predict(texts),
            TrainedModel::Neural(m) => Ok(m.predict(texts)?),
            TrainedModel::Transformer(m) => Ok(m.predict(texts)?),
        }
    }

    pub fn predict_labels(&self, corpus: &Corpus) -> Outcome<Vec<Label>> {
        Ok(self.predict(&corpus.texts())?.0)
    }

    /// Token attributions; transformer models only.
    pub fn explain(&self, text: &str, k: usize) -> Outcome<Vec<TokenScore>> {
        match self {
            TrainedModel::Transformer(m) => Ok(m.explain(text, k)?),
            _ => Err(Failure::Usage(format!(
                "explain needs a sabia or encoder checkpoint, got {}",
                self.kind()
            ))),
        }
    }

    pub fn save(&self, dir: &Path, train: &Corpus) -> Outcome<()> {
        let hash = data_hash(train);
        match self {
            TrainedModel::Classical(p) => p.save(dir, Some(&hash)),
            TrainedModel::Neural(m) => Ok(checkpoint::save_neural(m, dir, Some(&hash))?),
            TrainedModel::Transformer(m) => Ok(checkpoint::save_sabia(m, dir, Some(&hash))?),
        }
    }

    /// Load any checkpoint directory written by [`TrainedModel::save`].
    pub fn load(dir: &Path) -> Outcome<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let head: serde_json::Value = parse(&mpath)?;
        match head.get("kind").and_then(|k| k.as_str()) {
            Some("classical") => Ok(TrainedModel::Classical(ClassicalPipeline::load(dir)?)),
            Some(_) => match checkpoint::load_checkpoint(dir)? {
                checkpoint::Checkpoint::Neural(m) => Ok(TrainedModel::Neural(m)),
                checkpoint::Checkpoint::Sabia(m) => Ok(TrainedModel::Transformer(m)),
            },
            None => Err(Failure::Data(format!("{}: manifest has no `kind`", mpath.display()))),
        }
    }
}

/// One prediction as written to `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    /// finite scores only, keyed by class name
    pub scores: BTreeMap<Label, f64>,
}

impl Prediction {
    pub fn new(id: &str, label: Label, scores: &[f64]) -> Self {
        let scores = Label::ALL
            .iter()
            .zip(scores)
            .filter(|(_, s)| s.is_finite())
            .map(|(l, s)| (*l, *s))
            .collect();
        Prediction {
            id: id.to_string(),
            label,
            scores,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sabia_core::corpus::generate_synthetic;

    fn corpus(per_class: usize) -> Corpus {
        let counts = Label::ALL.iter().map(|l| (*l, per_class)).collect();
        generate_synthetic(&counts, &Lexicon::starter(), 5)
    }

    #[test]
    fn classical_checkpoint_round_trip() {
        let train = corpus(12);
        let cfg = RunConfig::default();
        let model = train_model(ModelChoice::Classical(Algorithm::Logreg), &cfg, &train, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path(), &train).unwrap();
        let back = TrainedModel::load(dir.path()).unwrap();
        assert_eq!(back.kind(), "logreg");
        let texts = train.texts();
        let (a, sa) = model.predict(&texts).unwrap();
        let (b, sb) = back.predict(&texts).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let card = std::fs::read_to_string(dir.path().join(MODEL_CARD_FILE)).unwrap();
        assert!(card.contains("data_sha256: ") && !card.contains("unknown"));
    }

    #[test]
    fn bad_classical_parameter_is_a_usage_error() {
        let mut cfg = RunConfig::default();
        cfg.set("classical.depth", "3", Path::new(".")).unwrap();
        let err = train_model(ModelChoice::Classical(Algorithm::Logreg), &cfg, &corpus(3), None)
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), 1, "{err}");
    }

    #[test]
    fn explain_rejects_classical_models() {
        let train = corpus(3);
        let model = train_model(ModelChoice::Classical(Algorithm::Majority), &RunConfig::default(), &train, None).unwrap();
        assert_eq!(model.explain("selling oxy", 3).err().unwrap().exit_code(), 1);
    }

    #[test]
    fn missing_manifest_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = TrainedModel::load(dir.path()).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("config.json"));
    }

    #[test]
    fn prediction_drops_absent_classes() {
        let p = Prediction::new("x", Label::Dealer, &[f64::NEG_INFINITY, 0.5, 1.0, f64::NEG_INFINITY, 0.1]);
        assert_eq!(p.scores.len(), 3);
        let line = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Prediction>(&line).unwrap(), p);
    }
}
