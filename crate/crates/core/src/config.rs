//! Build configuration, read from an optional `key = value` file and
//! overridden by command-line flags.
//!
//! ```text
//! corpus = captions.csv
//! embedding.en = wiki.en.vec
//! lemmas.en = lemmas-en.tsv
//! M = 5
//! mode = replacement
//! nw = 10
//! ne = 2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusFormat, LexiconOptions};
use crate::error::{Error, Result};
use crate::index::IndexConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub corpus: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub default_lang: String,
    pub embeddings: BTreeMap<String, PathBuf>,
    pub lemmas: BTreeMap<String, PathBuf>,
    pub lexicon: LexiconOptions,
    pub index: IndexConfig,
    pub output: PathBuf,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            format: None,
            default_lang: "en".into(),
            embeddings: BTreeMap::new(),
            lemmas: BTreeMap::new(),
            lexicon: LexiconOptions::default(),
            index: IndexConfig::default(),
            output: PathBuf::from("bundle"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value {value:?} for {key}")))
}

/// Split `lang=path` as given to repeated `--embedding` / `--lemmas` flags.
pub fn parse_lang_path(spec: &str) -> Result<(String, PathBuf)> {
    let (lang, path) = spec
        .split_once('=')
        .filter(|(l, p)| !l.trim().is_empty() && !p.trim().is_empty())
        .ok_or_else(|| Error::InvalidConfig(format!("expected LANG=PATH, found {spec:?}")))?;
    Ok((lang.trim().to_ascii_lowercase(), PathBuf::from(path.trim())))
}

impl BuildConfig {
    /// Apply one `key = value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        match key {
            "corpus" => self.corpus = Some(path()),
            "format" => self.format = Some(value.parse()?),
            "default_lang" => self.default_lang = value.to_ascii_lowercase(),
            "min_df" => self.lexicon.min_df = parse_value(key, value)?,
            "max_df_ratio" => self.lexicon.max_df_ratio = parse_value(key, value)?,
            "M" | "m" => self.index.m = parse_value(key, value)?,
            "mode" => self.index.mode = value.parse()?,
            "metric" => self.index.metric = value.parse()?,
            "nw" => self.index.nw = parse_value(key, value)?,
            "ne" => self.index.ne = parse_value(key, value)?,
            "cache_k" | "K" => self.index.cache_k = parse_value(key, value)?,
            "positive_only" => self.index.positive_only = parse_value(key, value)?,
            "output" => self.output = path(),
            _ => {
                if let Some(lang) = key.strip_prefix("embedding.") {
                    self.embeddings.insert(lang.to_ascii_lowercase(), path());
                } else if let Some(lang) = key.strip_prefix("lemmas.") {
                    self.lemmas.insert(lang.to_ascii_lowercase(), path());
                } else {
                    return Err(Error::InvalidConfig(format!("unknown config key {key:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = Self::default();
        config.apply_text(&text, base)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedRow {
                row: i + 1,
                message: "expected key = value".into(),
            })?;
            let value = value.trim().trim_matches('"');
            self.set(key.trim(), value, base)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.is_none() {
            return Err(Error::InvalidConfig("no corpus given".into()));
        }
        if self.embeddings.is_empty() {
            return Err(Error::InvalidConfig("no embedding files given".into()));
        }
        self.lexicon.validate()?;
        self.index.validate()
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        if let Some(format) = self.format {
            return Ok(format);
        }
        let corpus = self.corpus.as_deref().unwrap_or(Path::new(""));
        CorpusFormat::from_extension(corpus)
            .ok_or_else(|| Error::InvalidConfig(format!("cannot infer corpus format of {}; pass --format", corpus.display())))
    }
}
