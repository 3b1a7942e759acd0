//! Run configuration: a plain-text `key = value` file covering every module
//! setting, with command-line overrides layered on top.
//!
//! Format rules:
//! - one `key = value` pair per line; blank lines and lines starting with
//!   `#` are ignored;
//! - lists are comma separated (`sabia.kernels = 2,3,4`);
//! - booleans accept `true/false`, `yes/no`, `1/0`;
//! - relative paths resolve against the directory holding the file
//!   (against the working directory for command-line overrides);
//! - unknown keys are an error.
//!
//! [`RunConfig::to_text`] writes every key with its effective value, so a
//! snapshot loaded back reproduces the run that wrote it.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sabia_core::baselines::{Algorithm, ClassicalConfig, ParamValue, Params};
use sabia_core::evaluate::Averaging;
use sabia_core::ingest::{IngestConfig, Source};
use sabia_core::lexicon::load_lexicon;
use sabia_core::preprocess::{PreprocessConfig, Preprocessor};
use sabia_core::{CorpusFormat, Lexicon, SplitSpec};
use sabia_nn::encoder::TINY;
use sabia_nn::neural::{Arch, NeuralConfig, TOY_EMBEDDINGS};
use sabia_nn::sabia::{SabiaConfig, TINY_LEARNING_RATE};

/// File name of the snapshot written next to every run's outputs.
pub const SNAPSHOT_FILE: &str = "effective_config.txt";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{origin}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct ConfigError {
    /// config file path, or `command line`
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    /// CSV lexicon; the bundled starter lexicon when absent
    pub lexicon: Option<PathBuf>,
    /// `None` guesses from the file extension
    pub corpus_format: Option<CorpusFormat>,
    pub ingest: IngestConfig,
    pub english_threshold: f64,
    pub synth_per_class: usize,
    pub train_fraction: f64,
    pub stratified: bool,
    pub model: String,
    /// overrides for the chosen classical algorithm
    pub classical: Params,
    pub neural: NeuralConfig,
    pub sabia: SabiaConfig,
    pub averaging: Averaging,
    pub heatmap: bool,
    pub explain_k: usize,
    explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 80,
            lexicon: None,
            corpus_format: None,
            ingest: IngestConfig::default(),
            english_threshold: 0.10,
            synth_per_class: 40,
            train_fraction: 0.8,
            stratified: true,
            model: "sabia".into(),
            classical: Params::new(),
            neural: NeuralConfig::default(),
            sabia: SabiaConfig::default(),
            averaging: Averaging::Weighted,
            heatmap: false,
            explain_k: 5,
            explicit: BTreeSet::new(),
        }
    }
}

const NEURAL_KEYS: [&str; 9] = [
    "embeddings",
    "embedding_dim",
    "learning_rate",
    "epochs",
    "batch_size",
    "lstm_units",
    "filters",
    "kernel_size",
    "max_len",
];

const SABIA_KEYS: [&str; 13] = [
    "encoder",
    "max_len",
    "batch_size",
    "learning_rate",
    "epochs",
    "dropout",
    "lstm_hidden",
    "lstm_layers",
    "bidirectional",
    "kernels",
    "cnn_channels",
    "class_weights",
    "mask_pooling",
];

fn num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("invalid value {v:?}: {e}"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(num).collect()
}

fn resolve(base: &Path, v: &str) -> PathBuf {
    let p = Path::new(v);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Encoder ids that look like paths are resolved; hub ids and `tiny` are not.
fn resolve_encoder(base: &Path, v: &str) -> String {
    if v.eq_ignore_ascii_case(TINY) || !(v.contains('/') || v.contains('\\') || v.starts_with('.')) {
        return v.to_string();
    }
    let local = resolve(base, v);
    if local.exists() || v.starts_with('.') {
        local.display().to_string()
    } else {
        // `org/model` hub ids also contain a slash
        v.to_string()
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parse a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, &base, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, base, "<config>")?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str, base: &Path, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError {
                origin: origin.to_string(),
                line: Some(i + 1),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            self.set(key.trim(), value.trim(), base).map_err(err)?;
        }
        Ok(())
    }

    /// Apply a `key=value` override given on the command line.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            origin: "command line".into(),
            line: None,
            message,
        };
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {assignment:?}")))?;
        let cwd = std::env::current_dir().unwrap_or_default();
        self.set(key.trim(), value.trim(), &cwd).map_err(err)
    }

    /// Set one key. `base` anchors relative paths.
    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        let wrap = |e: String| format!("{key}: {e}");
        match key {
            "seed" => self.seed = num(v).map_err(wrap)?,
            "lexicon" => self.lexicon = (!v.is_empty() && v != "starter").then(|| resolve(base, v)),
            "corpus.format" => {
                self.corpus_format = match v {
                    "" | "auto" => None,
                    f => Some(f.parse::<CorpusFormat>().map_err(|e| wrap(e.to_string()))?),
                }
            }
            "ingest.subreddits" => {
                self.ingest.subreddits = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "ingest.window_start" => self.ingest.window_start = num(v).map_err(wrap)?,
            "ingest.window_end" => self.ingest.window_end = num(v).map_err(wrap)?,
            "ingest.rate_limit" => self.ingest.rate_limit = num(v).map_err(wrap)?,
            "ingest.max_pages" => self.ingest.max_pages = num(v).map_err(wrap)?,
            "ingest.fixture" => {
                self.ingest.source = if v.is_empty() {
                    Source::Live
                } else {
                    Source::Fixture(resolve(base, v))
                }
            }
            "preprocess.english_threshold" => {
                let t: f64 = num(v).map_err(wrap)?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(wrap(format!("{t} outside [0, 1]")));
                }
                self.english_threshold = t;
            }
            "synth.per_class" => self.synth_per_class = num(v).map_err(wrap)?,
            "split.train_fraction" => self.train_fraction = num(v).map_err(wrap)?,
            "split.stratified" => self.stratified = boolean(v).map_err(wrap)?,
            "model" => {
                ModelChoice::from_str(v).map_err(wrap)?;
                self.model = v.to_ascii_lowercase();
            }
            "eval.averaging" => self.averaging = v.parse().map_err(|e: sabia_core::Error| wrap(e.to_string()))?,
            "eval.heatmap" => self.heatmap = boolean(v).map_err(wrap)?,
            "explain.k" => self.explain_k = num(v).map_err(wrap)?,
            k if k.starts_with("classical.") => {
                let name = &k["classical.".len()..];
                if name.is_empty() {
                    return Err("empty classical parameter name".into());
                }
                self.classical.insert(name.to_string(), ParamValue::parse(v));
            }
            k if k.starts_with("neural.") => self.set_neural(&k["neural.".len()..], v, base).map_err(wrap)?,
            k if k.starts_with("sabia.") => self.set_sabia(&k["sabia.".len()..], v, base).map_err(wrap)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    fn set_neural(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        let n = &mut self.neural;
        match key {
            "embeddings" => {
                n.embeddings = if v.eq_ignore_ascii_case(TOY_EMBEDDINGS) {
                    TOY_EMBEDDINGS.into()
                } else {
                    resolve(base, v).display().to_string()
                }
            }
            "embedding_dim" => n.embedding_dim = num(v)?,
            "learning_rate" => n.learning_rate = num(v)?,
            "epochs" => n.epochs = num(v)?,
            "batch_size" => n.batch_size = num(v)?,
            "lstm_units" => n.lstm_units = num(v)?,
            "filters" => n.filters = num(v)?,
            "kernel_size" => n.kernel_size = num(v)?,
            "max_len" => n.max_len = num(v)?,
            _ => return Err(format!("unknown key (expected one of {})", NEURAL_KEYS.join(", "))),
        }
        Ok(())
    }

    fn set_sabia(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        let s = &mut self.sabia;
        match key {
            "encoder" => s.checkpoint = resolve_encoder(base, v),
            "max_len" => s.max_len = num(v)?,
            "batch_size" => s.batch_size = num(v)?,
            "learning_rate" => s.learning_rate = num(v)?,
            "epochs" => s.epochs = num(v)?,
            "dropout" => s.dropout = num(v)?,
            "lstm_hidden" => s.lstm_hidden = num(v)?,
            "lstm_layers" => s.lstm_layers = num(v)?,
            "bidirectional" => s.bidirectional = boolean(v)?,
            "kernels" => s.kernels = list(v)?,
            "cnn_channels" => s.cnn_channels = num(v)?,
            "class_weights" => s.class_weights = boolean(v)?,
            "mask_pooling" => s.mask_pooling = boolean(v)?,
            _ => return Err(format!("unknown key (expected one of {})", SABIA_KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn model_choice(&self) -> ModelChoice {
        ModelChoice::from_str(&self.model).expect("validated on set")
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
            stratified: self.stratified,
        }
    }

    pub fn load_lexicon(&self) -> sabia_core::Result<Lexicon> {
        match &self.lexicon {
            Some(p) => load_lexicon(p),
            None => Ok(Lexicon::starter()),
        }
    }

    pub fn preprocessor(&self, lexicon: Lexicon) -> Preprocessor {
        let mut cfg = PreprocessConfig::for_lexicon(&lexicon);
        cfg.english_threshold = self.english_threshold;
        Preprocessor::new(lexicon, cfg)
    }

    pub fn classical_config(&self, algorithm: Algorithm) -> ClassicalConfig {
        ClassicalConfig {
            algorithm,
            params: self.classical.clone(),
            seed: self.seed,
        }
    }

    pub fn neural_config(&self, arch: Arch) -> NeuralConfig {
        NeuralConfig {
            arch,
            seed: self.seed,
            ..self.neural.clone()
        }
    }

    /// The hybrid/encoder settings actually used. With the tiny encoder and
    /// no explicit learning rate, the tiny-encoder rate applies.
    pub fn sabia_config(&self) -> SabiaConfig {
        let mut s = SabiaConfig {
            seed: self.seed,
            ..self.sabia.clone()
        };
        if s.is_tiny() && !self.is_explicit("sabia.learning_rate") {
            s.learning_rate = TINY_LEARNING_RATE;
        }
        s
    }

    /// Every key with its effective value, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("seed", self.seed.to_string());
        put(
            "lexicon",
            self.lexicon.as_ref().map_or("starter".into(), |p| p.display().to_string()),
        );
        put(
            "corpus.format",
            match self.corpus_format {
                None => "auto".into(),
                Some(CorpusFormat::Jsonl) => "jsonl".into(),
                Some(CorpusFormat::Csv) => "csv".into(),
            },
        );
        put("ingest.subreddits", self.ingest.subreddits.join(","));
        put("ingest.window_start", self.ingest.window_start.to_string());
        put("ingest.window_end", self.ingest.window_end.to_string());
        put("ingest.rate_limit", self.ingest.rate_limit.to_string());
        put("ingest.max_pages", self.ingest.max_pages.to_string());
        put(
            "ingest.fixture",
            match &self.ingest.source {
                Source::Live => String::new(),
                Source::Fixture(p) => p.display().to_string(),
            },
        );
        put("preprocess.english_threshold", self.english_threshold.to_string());
        put("synth.per_class", self.synth_per_class.to_string());
        put("split.train_fraction", self.train_fraction.to_string());
        put("split.stratified", self.stratified.to_string());
        put("model", self.model.clone());
        for (k, v) in &self.classical {
            let v = match v {
                ParamValue::Number(x) => x.to_string(),
                ParamValue::Text(t) => t.clone(),
            };
            put(&format!("classical.{k}"), v);
        }
        let n = &self.neural;
        put("neural.embeddings", n.embeddings.clone());
        put("neural.embedding_dim", n.embedding_dim.to_string());
        put("neural.learning_rate", n.learning_rate.to_string());
        put("neural.epochs", n.epochs.to_string());
        put("neural.batch_size", n.batch_size.to_string());
        put("neural.lstm_units", n.lstm_units.to_string());
        put("neural.filters", n.filters.to_string());
        put("neural.kernel_size", n.kernel_size.to_string());
        put("neural.max_len", n.max_len.to_string());
        let s = self.sabia_config();
        put("sabia.encoder", s.checkpoint.clone());
        put("sabia.max_len", s.max_len.to_string());
        put("sabia.batch_size", s.batch_size.to_string());
        put("sabia.learning_rate", s.learning_rate.to_string());
        put("sabia.epochs", s.epochs.to_string());
        put("sabia.dropout", s.dropout.to_string());
        put("sabia.lstm_hidden", s.lstm_hidden.to_string());
        put("sabia.lstm_layers", s.lstm_layers.to_string());
        put("sabia.bidirectional", s.bidirectional.to_string());
        put("sabia.kernels", join(&s.kernels));
        put("sabia.cnn_channels", s.cnn_channels.to_string());
        put("sabia.class_weights", s.class_weights.to_string());
        put("sabia.mask_pooling", s.mask_pooling.to_string());
        put(
            "eval.averaging",
            match self.averaging {
                Averaging::Macro => "macro".into(),
                Averaging::Weighted => "weighted".into(),
            },
        );
        put("eval.heatmap", self.heatmap.to_string());
        put("explain.k", self.explain_k.to_string());
        out
    }

    /// Snapshot text; `header` lines are written as comments.
    pub fn to_text(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            s.push_str("# ");
            s.push_str(h);
            s.push('\n');
        }
        for (k, v) in self.entries() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn write_snapshot(&self, dir: &Path, header: &[String]) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(SNAPSHOT_FILE);
        std::fs::write(&path, self.to_text(header))?;
        Ok(path)
    }
}

/// What `train` builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Classical(Algorithm),
    Neural(Arch),
    /// encoder + BiLSTM + convolution banks
    Sabia,
    /// encoder with an affine head on the start token
    Encoder,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Classical(a) => a.name(),
            ModelChoice::Neural(a) => a.name(),
            ModelChoice::Sabia => "sabia",
            ModelChoice::Encoder => "encoder",
        }
    }
}

impl FromStr for ModelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sabia" => Ok(ModelChoice::Sabia),
            "encoder" | "bert" => Ok(ModelChoice::Encoder),
            "cnn" => Ok(ModelChoice::Neural(Arch::Cnn)),
            "bilstm" => Ok(ModelChoice::Neural(Arch::Bilstm)),
            other => other.parse::<Algorithm>().map(ModelChoice::Classical).map_err(|_| {
                format!("unknown model {s:?} (expected logreg, gboost, forest, tree, svm, majority, cnn, bilstm, encoder or sabia)")
            }),
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::from_text(
            "# demo\nseed = 7\nsabia.kernels = 3, 5\nsabia.encoder = tiny\nclassical.C = 2.5\n\neval.heatmap = yes\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sabia.kernels, vec![3, 5]);
        assert!(cfg.heatmap);
        assert_eq!(cfg.classical["C"], ParamValue::Number(2.5));
        assert_eq!(cfg.sabia_config().seed, 7);
    }

    #[test]
    fn unknown_key_names_file_and_line() {
        let err = RunConfig::from_text("seed = 1\nsabia.depth = 3\n", Path::new(".")).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("sabia.depth"), "{err}");
        let err = RunConfig::from_text("colour = red\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown key `colour`"));
        assert!(RunConfig::from_text("just words\n", Path::new(".")).is_err());
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let cfg = RunConfig::from_text(
            "lexicon = lex/terms.csv\ningest.fixture = /abs/dump.jsonl\nneural.embeddings = vec.txt\nsabia.encoder = ./enc\n",
            Path::new("/runs/a"),
        )
        .unwrap();
        assert_eq!(cfg.lexicon.as_deref(), Some(Path::new("/runs/a/lex/terms.csv")));
        assert_eq!(cfg.ingest.source, Source::Fixture("/abs/dump.jsonl".into()));
        assert_eq!(cfg.neural.embeddings, "/runs/a/vec.txt");
        assert_eq!(cfg.sabia.checkpoint, "/runs/a/./enc");
        let hub = RunConfig::from_text("sabia.encoder = bert-base-uncased\n", Path::new("/x")).unwrap();
        assert_eq!(hub.sabia.checkpoint, "bert-base-uncased");
    }

    #[test]
    fn tiny_encoder_gets_its_own_rate_unless_set() {
        let cfg = RunConfig::from_text("sabia.encoder = tiny\n", Path::new(".")).unwrap();
        assert_eq!(cfg.sabia_config().learning_rate, TINY_LEARNING_RATE);
        let cfg = RunConfig::from_text("sabia.encoder = tiny\nsabia.learning_rate = 0.05\n", Path::new(".")).unwrap();
        assert_eq!(cfg.sabia_config().learning_rate, 0.05);
        assert_eq!(RunConfig::default().sabia_config().learning_rate, 2e-5);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::from_text(
            "seed = 11\nsabia.encoder = tiny\nsplit.train_fraction = 0.75\nclassical.max_features = log2\nmodel = forest\n",
            Path::new("/r"),
        )
        .unwrap();
        cfg.set_override("neural.epochs=9").unwrap();
        let text = cfg.to_text(&["sabia train".into()]);
        let back = RunConfig::from_text(&text, Path::new("/elsewhere")).unwrap();
        assert_eq!(back.entries(), cfg.entries());
        assert_eq!(back.sabia_config(), cfg.sabia_config());
        assert_eq!(back.model_choice(), ModelChoice::Classical(Algorithm::Forest));
    }

    #[test]
    fn bad_values_rejected() {
        for bad in [
            "seed = -1",
            "split.stratified = maybe",
            "model = perceptron",
            "preprocess.english_threshold = 1.5",
            "sabia.kernels = 2,x",
            "eval.averaging = micro",
        ] {
            assert!(RunConfig::from_text(bad, Path::new(".")).is_err(), "{bad}");
        }
    }

    #[test]
    fn model_names() {
        for name in ["logreg", "gboost", "forest", "svm", "tree", "majority", "cnn", "bilstm", "encoder", "sabia"] {
            let m: ModelChoice = name.parse().unwrap();
            assert_eq!(m.name(), name);
        }
    }
}
