//! Failure classes of a command and their exit codes.

use std::path::Path;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// bad flags, config keys or values
    #[error("usage: {0}")]
    Usage(String),
    /// unreadable or malformed input
    #[error("data: {0}")]
    Data(String),
    /// training diverged, backend failure, network trouble
    #[error("runtime: {0}")]
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    /// Prefix the message with `path` unless it already names it.
    pub fn at(self, path: &Path) -> Self {
        let p = path.display().to_string();
        let wrap = |m: String| if m.contains(&p) { m } else { format!("{p}: {m}") };
        match self {
            Failure::Usage(m) => Failure::Usage(wrap(m)),
            Failure::Data(m) => Failure::Data(wrap(m)),
            Failure::Runtime(m) => Failure::Runtime(wrap(m)),
        }
    }
}

impl From<sabia_core::Error> for Failure {
    fn from(e: sabia_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<sabia_nn::Error> for Failure {
    fn from(e: sabia_nn::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_failure_class() {
        assert_eq!(Failure::Usage("x".into()).exit_code(), 1);
        let data: Failure = sabia_core::Error::Unlabeled("p1".into()).into();
        assert_eq!(data.exit_code(), 2);
        let runtime: Failure = sabia_core::Error::SingleClass(1).into();
        assert_eq!(runtime.exit_code(), 3);
    }

    #[test]
    fn path_prefix_added_once() {
        let f = Failure::Data("bad row".into()).at(Path::new("a.csv"));
        assert_eq!(f.to_string(), "data: a.csv: bad row");
        let f = Failure::Data("a.csv:3: bad".into()).at(Path::new("a.csv"));
        assert_eq!(f.to_string(), "data: a.csv:3: bad");
    }
}
