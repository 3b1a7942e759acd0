use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// Behavior class of a post. The integer codes are part of the on-disk
/// contract and must not be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Dealer = 0,
    ActiveUser = 1,
    RecoveredUser = 2,
    PrescriptionUser = 3,
    NonUser = 4,
}

impl Label {
    pub const COUNT: usize = 5;

    pub const ALL: [Label; Label::COUNT] = [
        Label::Dealer,
        Label::ActiveUser,
        Label::RecoveredUser,
        Label::PrescriptionUser,
        Label::NonUser,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Label> {
        Label::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Dealer => "Dealer",
            Label::ActiveUser => "ActiveUser",
            Label::RecoveredUser => "RecoveredUser",
            Label::PrescriptionUser => "PrescriptionUser",
            Label::NonUser => "NonUser",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Label::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
