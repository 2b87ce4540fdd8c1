//! The ten supported caption languages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unsupported language: {0:?}")]
pub struct UnsupportedLanguage(pub String);

/// A supported language. Serialized as its ISO 639-1 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Language {
    English,
    Portuguese,
    Spanish,
    French,
    German,
    Dutch,
    Italian,
    Chinese,
    Korean,
    Russian,
}

impl Language {
    pub const ALL: [Language; 10] = [
        Language::English,
        Language::Portuguese,
        Language::Spanish,
        Language::French,
        Language::German,
        Language::Dutch,
        Language::Italian,
        Language::Chinese,
        Language::Korean,
        Language::Russian,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::Portuguese => "pt",
            Language::Spanish => "es",
            Language::French => "fr",
            Language::German => "de",
            Language::Dutch => "nl",
            Language::Italian => "it",
            Language::Chinese => "zh",
            Language::Korean => "ko",
            Language::Russian => "ru",
        }
    }

    /// English name, as substituted into prompt templates.
    pub fn name(self) -> &'static str {
        match self {
            Language::English => "English",
            Language::Portuguese => "Portuguese",
            Language::Spanish => "Spanish",
            Language::French => "French",
            Language::German => "German",
            Language::Dutch => "Dutch",
            Language::Italian => "Italian",
            Language::Chinese => "Chinese",
            Language::Korean => "Korean",
            Language::Russian => "Russian",
        }
    }

    /// Languages tokenized per character rather than per word.
    pub fn is_cjk(self) -> bool {
        matches!(self, Language::Chinese | Language::Korean)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = UnsupportedLanguage;

    /// Accepts either the two-letter code or the English name, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        Language::ALL
            .into_iter()
            .find(|l| l.code().eq_ignore_ascii_case(needle) || l.name().eq_ignore_ascii_case(needle))
            .ok_or_else(|| UnsupportedLanguage(s.to_string()))
    }
}

impl TryFrom<String> for Language {
    type Error = UnsupportedLanguage;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Language> for String {
    fn from(value: Language) -> Self {
        value.code().to_string()
    }
}
