//! Corpus ingestion, tokenization and lexicon construction.
//!
//! Documents are reduced to sets of language-tagged lexicon terms (`"en:school"`).
//! Occurrence is binary: a term appearing twice in a document is recorded once.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_segmentation::UnicodeSegmentation;

use crate::embedding::EmbeddingRegistry;
use crate::error::{Error, Result};

/// Separator between the language code and the word form of a lexicon term.
pub const TAG_SEPARATOR: char = ':';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

/// An ordered collection of at least two documents with unique ids.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    positions: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.len() < 2 {
            return Err(Error::CorpusTooSmall(documents.len()));
        }
        let mut positions = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if positions.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self {
            documents,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, index: usize) -> Option<&Document> {
        self.documents.get(index)
    }

    /// Position of the document with the given id.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    /// Sorted set of languages used by the corpus.
    pub fn languages(&self) -> BTreeSet<&str> {
        self.documents.iter().map(|d| d.lang.as_str()).collect()
    }

    /// Content hash over ids, languages and texts in corpus order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for doc in &self.documents {
            for field in [&doc.id, &doc.lang, &doc.text] {
                hasher.update((field.len() as u64).to_le_bytes());
                hasher.update(field.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess the format from a file extension (`.csv`, `.jsonl`, `.ndjson`).
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            other => Err(Error::InvalidConfig(format!(
                "unknown corpus format {other:?} (expected csv or jsonl)"
            ))),
        }
    }
}

/// Read a corpus from CSV (with header) or JSON lines.
///
/// Recognised fields are `id`, `text`, `lang` and `image_url`; anything else
/// lands in `meta`. A missing id is replaced by the zero-based row index and a
/// missing language by `default_lang`.
pub fn load_corpus<R: Read>(source: R, format: CorpusFormat, default_lang: &str) -> Result<Corpus> {
    let documents = match format {
        CorpusFormat::Csv => read_csv(source, default_lang)?,
        CorpusFormat::Jsonl => read_jsonl(source, default_lang)?,
    };
    Corpus::new(documents)
}

struct RawRow {
    id: Option<String>,
    text: Option<String>,
    lang: Option<String>,
    image_url: Option<String>,
    meta: BTreeMap<String, String>,
}

fn finish_row(raw: RawRow, index: usize, row: usize, default_lang: &str) -> Result<Document> {
    let text = raw.text.ok_or_else(|| Error::MalformedRow {
        row,
        message: "missing required field \"text\"".into(),
    })?;
    let lang = raw
        .lang
        .filter(|l| !l.trim().is_empty())
        .unwrap_or_else(|| default_lang.to_string());
    let lang = lang.trim().to_ascii_lowercase();
    if lang.contains(TAG_SEPARATOR) || lang.chars().any(char::is_whitespace) {
        return Err(Error::MalformedRow {
            row,
            message: format!("invalid language code {lang:?}"),
        });
    }
    Ok(Document {
        id: raw
            .id
            .filter(|id| !id.is_empty())
            .unwrap_or_else(|| index.to_string()),
        text,
        lang,
        image_url: raw.image_url.filter(|u| !u.is_empty()),
        meta: raw.meta,
    })
}

fn read_csv<R: Read>(source: R, default_lang: &str) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let mut documents = Vec::new();
    for (index, record) in reader.records().enumerate() {
        // header is row 1
        let row = index + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let mut raw = RawRow {
            id: None,
            text: None,
            lang: None,
            image_url: None,
            meta: BTreeMap::new(),
        };
        for (name, value) in headers.iter().zip(record.iter()) {
            let value = value.to_string();
            match name {
                "id" => raw.id = Some(value),
                "text" => raw.text = Some(value),
                "lang" => raw.lang = Some(value),
                "image_url" => raw.image_url = Some(value),
                _ => {
                    raw.meta.insert(name.to_string(), value);
                }
            }
        }
        documents.push(finish_row(raw, index, row, default_lang)?);
    }
    Ok(documents)
}

fn read_jsonl<R: Read>(source: R, default_lang: &str) -> Result<Vec<Document>> {
    let reader = BufReader::new(source);
    let mut documents = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let row = line_no + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow { row, message };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let serde_json::Value::Object(fields) = value else {
            return Err(malformed("expected a JSON object".into()));
        };
        let mut raw = RawRow {
            id: None,
            text: None,
            lang: None,
            image_url: None,
            meta: BTreeMap::new(),
        };
        for (key, value) in fields {
            let value = match value {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Number(n) => n.to_string(),
                _ => return Err(malformed(format!("field {key:?} must be a scalar"))),
            };
            match key.as_str() {
                "id" => raw.id = Some(value),
                "text" => raw.text = Some(value),
                "lang" => raw.lang = Some(value),
                "image_url" => raw.image_url = Some(value),
                _ => {
                    raw.meta.insert(key, value);
                }
            }
        }
        documents.push(finish_row(raw, documents.len(), row, default_lang)?);
    }
    Ok(documents)
}

/// Surface form to lemma lookup for one language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaTable(HashMap<String, String>);

impl LemmaTable {
    /// Parse a `surface<TAB>lemma` file. Surfaces are lowercased on load.
    pub fn from_reader<R: Read>(source: R) -> Result<Self> {
        let mut table = HashMap::new();
        for (line_no, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line_no + 1;
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| Error::MalformedRow {
                row,
                message: "expected surface<TAB>lemma".into(),
            })?;
            let lemma = lemma.trim();
            if lemma.is_empty() || !is_clean_token(lemma) {
                return Err(Error::MalformedRow {
                    row,
                    message: format!("invalid lemma {lemma:?}"),
                });
            }
            table.insert(surface.trim().to_lowercase(), lemma.to_string());
        }
        Ok(Self(table))
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.0.get(surface).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries sorted by surface form.
    pub fn entries(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<_> = self.0.iter().map(|(s, l)| (s.as_str(), l.as_str())).collect();
        out.sort_unstable();
        out
    }
}

impl FromIterator<(String, String)> for LemmaTable {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

fn is_clean_token(token: &str) -> bool {
    !token.chars().any(|c| c.is_whitespace() || c == TAG_SEPARATOR)
}

/// Build the language-tagged form of a word.
pub fn tag_term(lang: &str, word: &str) -> String {
    format!("{lang}{TAG_SEPARATOR}{word}")
}

/// Split a tagged term into `(lang, word)`.
pub fn split_term(term: &str) -> Option<(&str, &str)> {
    term.split_once(TAG_SEPARATOR)
}

/// Tokenize `text` into language-tagged word forms.
///
/// Whitespace-delimited chunks starting with `#` or `http` are dropped; the rest
/// is segmented on Unicode word boundaries, lowercased and passed through the
/// lemma table when one is given.
pub fn tokenize(text: &str, lang: &str, lemmas: Option<&LemmaTable>) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if chunk.starts_with('#') || chunk.get(..4).is_some_and(|p| p.eq_ignore_ascii_case("http")) {
            continue;
        }
        let lowered = chunk.to_lowercase();
        for word in lowered.unicode_words() {
            // UAX #29 keeps "a:b" together
            for piece in word.split(TAG_SEPARATOR).filter(|p| !p.is_empty()) {
                let form = lemmas.and_then(|t| t.get(piece)).unwrap_or(piece);
                out.push(tag_term(lang, form));
            }
        }
    }
    out
}

/// Per-language lemma tables applied during tokenization.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    lemmas: BTreeMap<String, LemmaTable>,
}

impl Tokenizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_lemmas(mut self, lang: impl Into<String>, table: LemmaTable) -> Self {
        self.lemmas.insert(lang.into(), table);
        self
    }

    pub fn lemma_tables(&self) -> &BTreeMap<String, LemmaTable> {
        &self.lemmas
    }

    pub fn tokenize(&self, text: &str, lang: &str) -> Vec<String> {
        tokenize(text, lang, self.lemmas.get(lang))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconOptions {
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        Self {
            min_df: 2,
            max_df_ratio: 1.0,
        }
    }
}

impl LexiconOptions {
    pub fn validate(&self) -> Result<()> {
        if self.min_df < 1 {
            return Err(Error::InvalidConfig("min_df must be at least 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(Error::InvalidConfig("max_df_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Sorted vocabulary of tagged terms with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: Vec<String>,
    term_to_id: HashMap<String, u32>,
    df: Vec<u32>,
}

impl Lexicon {
    /// Assemble a lexicon from `(term, df)` pairs; terms are sorted and must be unique.
    pub fn from_entries(mut entries: Vec<(String, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        entries.sort_unstable();
        let mut terms = Vec::with_capacity(entries.len());
        let mut df = Vec::with_capacity(entries.len());
        let mut term_to_id = HashMap::with_capacity(entries.len());
        for (id, (term, count)) in entries.into_iter().enumerate() {
            if term_to_id.insert(term.clone(), id as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate lexicon term {term:?}")));
            }
            terms.push(term);
            df.push(count);
        }
        Ok(Self {
            terms,
            term_to_id,
            df,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.term_to_id.get(term).copied()
    }

    pub fn df(&self) -> &[u32] {
        &self.df
    }

    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (term, df) in self.terms.iter().zip(&self.df) {
            hasher.update(term.as_bytes());
            hasher.update(b"\t");
            hasher.update(df.to_le_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Build the lexicon as corpus vocabulary intersected with embedding vocabulary,
/// filtered by document frequency.
pub fn build_lexicon(
    corpus: &Corpus,
    tokenizer: &Tokenizer,
    embeddings: &EmbeddingRegistry,
    options: &LexiconOptions,
) -> Result<Lexicon> {
    options.validate()?;
    for lang in corpus.languages() {
        if !embeddings.has_language(lang) {
            return Err(Error::MissingEmbedding(lang.to_string()));
        }
    }
    let mut df: HashMap<String, u32> = HashMap::new();
    for doc in corpus.documents() {
        let unique: HashSet<String> = tokenizer.tokenize(&doc.text, &doc.lang).into_iter().collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    let entries: Vec<(String, u32)> = df
        .into_iter()
        .filter(|(term, count)| {
            *count as usize >= options.min_df
                && (*count as f64) / n <= options.max_df_ratio
                && embeddings.contains(term)
        })
        .collect();
    Lexicon::from_entries(entries)
}

/// A document as a strictly ascending set of lexicon ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDocument {
    pub doc_id: String,
    pub term_ids: Vec<u32>,
}

impl EncodedDocument {
    /// True when no token of the document survived lexicon filtering.
    pub fn is_empty(&self) -> bool {
        self.term_ids.is_empty()
    }
}

impl fmt::Display for EncodedDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}", self.doc_id, self.term_ids)
    }
}

/// Encode a single text against the lexicon.
pub fn encode_text(text: &str, lang: &str, tokenizer: &Tokenizer, lexicon: &Lexicon) -> Vec<u32> {
    let ids: BTreeSet<u32> = tokenizer
        .tokenize(text, lang)
        .iter()
        .filter_map(|t| lexicon.id(t))
        .collect();
    ids.into_iter().collect()
}

pub fn encode_documents(corpus: &Corpus, tokenizer: &Tokenizer, lexicon: &Lexicon) -> Vec<EncodedDocument> {
    corpus
        .documents()
        .iter()
        .map(|doc| EncodedDocument {
            doc_id: doc.id.clone(),
            term_ids: encode_text(&doc.text, &doc.lang, tokenizer, lexicon),
        })
        .collect()
}
