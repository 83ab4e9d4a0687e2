//! The persisted index bundle: corpus, lexicon, neighbor function and the
//! neighbor cache, written as a directory of plain files.
//!
//! ```text
//! bundle/
//!   bundle.json               metadata and configuration
//!   documents.jsonl           one document (with its term ids) per line
//!   lexicon.tsv               term<TAB>df, sorted by term
//!   lemmas.tsv                lang<TAB>surface<TAB>lemma
//!   neighbor_function.jsonl   cached term neighbors
//!   neighbors.jsonl           cached document neighbors
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::BuildConfig;
use crate::corpus::{
    build_lexicon, encode_documents, encode_text, load_corpus, Corpus, Document, EncodedDocument, LemmaTable, Lexicon,
    LexiconOptions, Tokenizer,
};
use crate::embedding::{build_neighbor_function, EmbeddingRegistry, LexiconVectors, Mode, NeighborFunction};
use crate::error::{Error, Result};
use crate::graph::{build_graph, graph_report, ConnectivityReport, MetricsOptions, RecGraph};
use crate::index::{read_cache, DualIndex, IndexConfig, NeighborList};

pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "bundle.json";
const DOCUMENTS_FILE: &str = "documents.jsonl";
const LEXICON_FILE: &str = "lexicon.tsv";
const LEMMAS_FILE: &str = "lemmas.tsv";
const NEIGHBOR_FUNCTION_FILE: &str = "neighbor_function.jsonl";
const NEIGHBORS_FILE: &str = "neighbors.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    /// Unix seconds.
    pub created_at: u64,
    /// Hash of the build inputs and configuration, when built from files.
    pub input_hash: Option<String>,
    pub corpus_hash: String,
    pub lexicon_hash: String,
    pub n: usize,
    pub lexicon_size: usize,
    pub dim: usize,
    pub empty_documents: usize,
    pub default_lang: String,
    pub lexicon_options: LexiconOptions,
    pub config: IndexConfig,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    #[serde(flatten)]
    document: Document,
    term_ids: Vec<u32>,
}

/// Everything needed to serve neighbors, search and metrics for one corpus.
#[derive(Debug)]
pub struct Bundle {
    pub meta: BundleMeta,
    pub corpus: Corpus,
    pub tokenizer: Tokenizer,
    pub lexicon: Lexicon,
    pub encoded: Vec<EncodedDocument>,
    pub neighbor_function: NeighborFunction,
    pub index: DualIndex,
    other_mode: OnceLock<DualIndex>,
}

/// Summary of a build, for display.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildSummary {
    pub n: usize,
    pub lexicon_size: usize,
    pub dim: usize,
    pub empty_documents: usize,
    pub seconds: f64,
    pub skipped: bool,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn bundle_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Bundle {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl Bundle {
    /// Run the full pipeline on an in-memory corpus and registry.
    pub fn build(
        corpus: Corpus,
        tokenizer: Tokenizer,
        registry: &EmbeddingRegistry,
        lexicon_options: &LexiconOptions,
        config: &IndexConfig,
        default_lang: &str,
    ) -> Result<Self> {
        config.validate()?;
        let lexicon = build_lexicon(&corpus, &tokenizer, registry, lexicon_options)?;
        let encoded = encode_documents(&corpus, &tokenizer, &lexicon);
        let vectors = LexiconVectors::new(&lexicon, registry, config.metric)?;
        let neighbor_function = build_neighbor_function(&vectors, config.m, config.mode)?;
        let index = DualIndex::build(&encoded, lexicon.len(), &neighbor_function, config)?;
        let meta = BundleMeta {
            format_version: FORMAT_VERSION,
            created_at: now(),
            input_hash: None,
            corpus_hash: corpus.content_hash(),
            lexicon_hash: lexicon.content_hash(),
            n: corpus.len(),
            lexicon_size: lexicon.len(),
            dim: registry.dim().unwrap_or(0),
            empty_documents: encoded.iter().filter(|d| d.is_empty()).count(),
            default_lang: default_lang.to_string(),
            lexicon_options: *lexicon_options,
            config: config.clone(),
        };
        Ok(Self {
            meta,
            corpus,
            tokenizer,
            lexicon,
            encoded,
            neighbor_function,
            index,
            other_mode: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.meta.config
    }

    /// Index for either mode; the non-configured one is built on first use.
    pub fn index_for_mode(&self, mode: Mode) -> Result<&DualIndex> {
        if mode == self.meta.config.mode {
            return Ok(&self.index);
        }
        if let Some(index) = self.other_mode.get() {
            return Ok(index);
        }
        let config = IndexConfig {
            mode,
            ..self.meta.config.clone()
        };
        let index = DualIndex::build(&self.encoded, self.lexicon.len(), &self.neighbor_function, &config)?;
        Ok(self.other_mode.get_or_init(|| index))
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.corpus
            .position(id)
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))
    }

    pub fn neighbors(&self, id: &str, nw: usize, ne: usize) -> Result<NeighborList> {
        self.index.dual_neighbors(self.position(id)?, nw, ne)
    }

    pub fn graph(&self, nw: usize, ne: usize, mode: Mode) -> Result<RecGraph> {
        build_graph(self.index_for_mode(mode)?, nw, ne)
    }

    pub fn metrics(&self, nw: usize, ne: usize, mode: Mode, options: &MetricsOptions) -> Result<ConnectivityReport> {
        let g = self.graph(nw, ne, mode)?;
        Ok(graph_report(&g, nw, ne, mode, options))
    }

    /// Lexicon ids of a free-text query.
    pub fn encode_query(&self, text: &str, lang: Option<&str>) -> Vec<u32> {
        let lang = lang.unwrap_or(&self.meta.default_lang).to_ascii_lowercase();
        encode_text(text, &lang, &self.tokenizer, &self.lexicon)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };

        let mut out = create(DOCUMENTS_FILE)?;
        for (doc, enc) in self.corpus.documents().iter().zip(&self.encoded) {
            serde_json::to_writer(
                &mut out,
                &DocumentRecord {
                    document: doc.clone(),
                    term_ids: enc.term_ids.clone(),
                },
            )?;
            out.write_all(b"\n")?;
        }
        out.flush()?;

        let mut out = create(LEXICON_FILE)?;
        for (term, df) in self.lexicon.terms().iter().zip(self.lexicon.df()) {
            writeln!(out, "{term}\t{df}")?;
        }
        out.flush()?;

        let mut out = create(LEMMAS_FILE)?;
        for (lang, table) in self.tokenizer.lemma_tables() {
            for (surface, lemma) in table.entries() {
                writeln!(out, "{lang}\t{surface}\t{lemma}")?;
            }
        }
        out.flush()?;

        let mut out = create(NEIGHBOR_FUNCTION_FILE)?;
        self.neighbor_function.write_jsonl(&mut out, &self.meta.lexicon_hash)?;
        out.flush()?;

        let mut out = create(NEIGHBORS_FILE)?;
        self.index.write_cache(&mut out)?;
        out.flush()?;

        // metadata last: its presence marks a complete bundle
        let mut out = create(META_FILE)?;
        serde_json::to_writer_pretty(&mut out, &self.meta)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read_meta(dir: &Path) -> Result<BundleMeta> {
        let path = dir.join(META_FILE);
        // a missing bundle is a wrong path, not a corrupt bundle
        let file = File::open(&path)?;
        let meta: BundleMeta =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| bundle_error(&path, e.to_string()))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(bundle_error(&path, format!("unsupported format version {}", meta.format_version)));
        }
        Ok(meta)
    }

    /// Load a saved bundle. Anything unreadable after `bundle.json` is
    /// reported as [`Error::Bundle`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta = Self::read_meta(dir)?;
        Self::load_parts(dir, meta).map_err(|e| match e {
            Error::Bundle { .. } => e,
            other => bundle_error(dir, other.to_string()),
        })
    }

    fn load_parts(dir: &Path, meta: BundleMeta) -> Result<Self> {
        let open = |name: &str| -> Result<(PathBuf, BufReader<File>)> {
            let path = dir.join(name);
            let file = File::open(&path).map_err(|e| bundle_error(&path, e.to_string()))?;
            Ok((path, BufReader::new(file)))
        };

        let (path, reader) = open(DOCUMENTS_FILE)?;
        let mut documents = Vec::with_capacity(meta.n);
        let mut encoded = Vec::with_capacity(meta.n);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let record: DocumentRecord =
                serde_json::from_str(&line).map_err(|e| bundle_error(&path, format!("line {}: {e}", i + 1)))?;
            encoded.push(EncodedDocument {
                doc_id: record.document.id.clone(),
                term_ids: record.term_ids,
            });
            documents.push(record.document);
        }
        let corpus = Corpus::new(documents)?;

        let (path, reader) = open(LEXICON_FILE)?;
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let parsed = line.split_once('\t').and_then(|(t, df)| Some((t.to_string(), df.parse::<u32>().ok()?)));
            entries.push(parsed.ok_or_else(|| bundle_error(&path, format!("line {}: expected term<TAB>df", i + 1)))?);
        }
        let lexicon = Lexicon::from_entries(entries)?;
        if lexicon.content_hash() != meta.lexicon_hash {
            return Err(bundle_error(&path, "lexicon hash does not match bundle.json"));
        }

        let (path, reader) = open(LEMMAS_FILE)?;
        let mut lemmas: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.splitn(3, '\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(lang), Some(surface), Some(lemma)) => lemmas
                    .entry(lang.to_string())
                    .or_default()
                    .push((surface.to_string(), lemma.to_string())),
                _ => return Err(bundle_error(&path, format!("line {}: expected lang<TAB>surface<TAB>lemma", i + 1))),
            }
        }
        let tokenizer = lemmas.into_iter().fold(Tokenizer::new(), |t, (lang, entries)| {
            t.with_lemmas(lang, entries.into_iter().collect::<LemmaTable>())
        });

        let (path, reader) = open(NEIGHBOR_FUNCTION_FILE)?;
        let (header, neighbor_function) = NeighborFunction::read_jsonl(reader)?;
        if header.lexicon_hash != meta.lexicon_hash || neighbor_function.len() != lexicon.len() {
            return Err(bundle_error(&path, "neighbor function does not match the lexicon"));
        }

        let (path, reader) = open(NEIGHBORS_FILE)?;
        let (header, cache) = read_cache(reader, &corpus.documents().iter().map(|d| d.id.clone()).collect::<Vec<_>>())?;
        if header.config != meta.config {
            return Err(bundle_error(&path, "neighbor cache was built with a different configuration"));
        }
        let index = DualIndex::with_cache(&encoded, lexicon.len(), &neighbor_function, &meta.config, cache)?;

        Ok(Self {
            meta,
            corpus,
            tokenizer,
            lexicon,
            encoded,
            neighbor_function,
            index,
            other_mode: OnceLock::new(),
        })
    }
}

fn hash_file(hasher: &mut Sha256, label: &str, path: &Path) -> Result<()> {
    hasher.update(label.as_bytes());
    hasher.update(b"\0");
    let mut file = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let read = file.read(&mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    hasher.update(b"\0");
    Ok(())
}

/// Hash of every input file and the configuration that shapes the bundle.
pub fn input_hash(config: &BuildConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    let corpus = config.corpus.as_deref().ok_or_else(|| Error::InvalidConfig("no corpus given".into()))?;
    hash_file(&mut hasher, "corpus", corpus)?;
    for (lang, path) in &config.embeddings {
        hash_file(&mut hasher, &format!("embedding.{lang}"), path)?;
    }
    for (lang, path) in &config.lemmas {
        hash_file(&mut hasher, &format!("lemmas.{lang}"), path)?;
    }
    let shape = serde_json::json!({
        "format": config.format,
        "default_lang": config.default_lang,
        "lexicon": config.lexicon,
        "index": config.index,
        "version": FORMAT_VERSION,
    });
    hasher.update(shape.to_string().as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

/// Build a bundle from files and write it to `config.output`.
///
/// Nothing is rebuilt when the existing bundle was made from identical inputs.
pub fn build_from_files(config: &BuildConfig, force: bool) -> Result<BuildSummary> {
    config.validate()?;
    let started = Instant::now();
    let hash = input_hash(config)?;
    if !force {
        if let Ok(meta) = Bundle::read_meta(&config.output) {
            if meta.input_hash.as_deref() == Some(hash.as_str()) {
                return Ok(BuildSummary {
                    n: meta.n,
                    lexicon_size: meta.lexicon_size,
                    dim: meta.dim,
                    empty_documents: meta.empty_documents,
                    seconds: started.elapsed().as_secs_f64(),
                    skipped: true,
                });
            }
        }
    }

    let corpus_path = config.corpus.as_deref().expect("validated");
    let corpus = load_corpus(File::open(corpus_path)?, config.corpus_format()?, &config.default_lang)?;
    for lang in corpus.languages() {
        if !config.embeddings.contains_key(lang) {
            return Err(Error::MissingEmbedding(lang.to_string()));
        }
    }
    let mut tokenizer = Tokenizer::new();
    for (lang, path) in &config.lemmas {
        tokenizer = tokenizer.with_lemmas(lang.clone(), LemmaTable::from_reader(File::open(path)?)?);
    }

    // only words that occur in the corpus are worth keeping in memory
    let mut vocab: HashMap<String, HashSet<String>> = HashMap::new();
    for doc in corpus.documents() {
        let words = vocab.entry(doc.lang.clone()).or_default();
        for term in tokenizer.tokenize(&doc.text, &doc.lang) {
            if let Some((_, word)) = crate::corpus::split_term(&term) {
                words.insert(word.to_string());
            }
        }
    }
    let mut registry = EmbeddingRegistry::new();
    for lang in corpus.languages() {
        let path = &config.embeddings[lang];
        let reader = BufReader::new(File::open(path)?);
        registry.load(lang, reader, vocab.get(lang)).map_err(|e| match e {
            Error::EmbeddingParse { line, message } => Error::EmbeddingParse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
    }

    let mut bundle = Bundle::build(
        corpus,
        tokenizer,
        &registry,
        &config.lexicon,
        &config.index,
        &config.default_lang,
    )?;
    bundle.meta.input_hash = Some(hash);
    bundle.save(&config.output)?;
    Ok(BuildSummary {
        n: bundle.meta.n,
        lexicon_size: bundle.meta.lexicon_size,
        dim: bundle.meta.dim,
        empty_documents: bundle.meta.empty_documents,
        seconds: started.elapsed().as_secs_f64(),
        skipped: false,
    })
}
