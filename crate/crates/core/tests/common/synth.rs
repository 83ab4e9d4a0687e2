//! Synthetic corpora with matching word vectors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dualneighbors::corpus::{Corpus, Document};
use dualneighbors::embedding::{EmbeddingRegistry, VectorTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};

#[derive(Debug, Clone)]
pub struct SynthDoc {
    pub id: String,
    pub lang: String,
    pub text: String,
    pub image_url: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    pub docs: Vec<SynthDoc>,
    /// Per language, `(word, vector)` rows in file order.
    pub vectors: BTreeMap<String, Vec<(String, Vec<f32>)>>,
    pub dim: usize,
}

pub struct FixtureFiles {
    pub corpus: PathBuf,
    pub embeddings: BTreeMap<String, PathBuf>,
}

impl SynthCorpus {
    pub fn corpus(&self) -> Corpus {
        Corpus::new(
            self.docs
                .iter()
                .map(|d| Document {
                    id: d.id.clone(),
                    text: d.text.clone(),
                    lang: d.lang.clone(),
                    image_url: d.image_url.clone(),
                    meta: BTreeMap::new(),
                })
                .collect(),
        )
        .unwrap()
    }

    pub fn registry(&self) -> EmbeddingRegistry {
        let mut reg = EmbeddingRegistry::new();
        for (lang, rows) in &self.vectors {
            reg.insert(lang.clone(), VectorTable::from_rows(self.dim, rows.clone()).unwrap())
                .unwrap();
        }
        reg
    }

    pub fn vector(&self, lang: &str, word: &str) -> Option<&[f32]> {
        self.vectors
            .get(lang)?
            .iter()
            .find(|(w, _)| w == word)
            .map(|(_, v)| v.as_slice())
    }

    /// Write `corpus.jsonl` and one `<lang>.vec` per language into `dir`.
    pub fn write_files(&self, dir: &Path) -> FixtureFiles {
        fs::create_dir_all(dir).unwrap();
        let mut jsonl = String::new();
        for d in &self.docs {
            let mut row = serde_json::json!({"id": d.id, "text": d.text, "lang": d.lang});
            if let Some(url) = &d.image_url {
                row["image_url"] = url.clone().into();
            }
            jsonl.push_str(&row.to_string());
            jsonl.push('\n');
        }
        let corpus = dir.join("corpus.jsonl");
        fs::write(&corpus, jsonl).unwrap();
        let mut embeddings = BTreeMap::new();
        for (lang, rows) in &self.vectors {
            let mut text = format!("{} {}\n", rows.len(), self.dim);
            for (word, v) in rows {
                text.push_str(word);
                for x in v {
                    write!(text, " {x}").unwrap();
                }
                text.push('\n');
            }
            let path = dir.join(format!("{lang}.vec"));
            fs::write(&path, text).unwrap();
            embeddings.insert(lang.clone(), path);
        }
        FixtureFiles { corpus, embeddings }
    }
}

fn round4(x: f64) -> f32 {
    // values survive a text round trip unchanged
    format!("{x:.4}").parse().unwrap()
}

/// Small random corpus for oracle comparisons.
///
/// Words are plain ASCII tokens; `integer_vectors` draws coordinates from
/// {-2..2} so exact distance ties occur and exercise tie-breaking.
pub fn random_corpus(seed: u64, n: usize, vocab_per_lang: usize, dim: usize, langs: &[&str], integer_vectors: bool) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut vectors = BTreeMap::new();
    for lang in langs {
        let mut rows = Vec::new();
        for w in 0..vocab_per_lang {
            let v: Vec<f32> = (0..dim)
                .map(|_| {
                    if integer_vectors {
                        rng.gen_range(-2i32..=2) as f32
                    } else {
                        round4(normal.sample(&mut rng))
                    }
                })
                .collect();
            rows.push((format!("{lang}w{w}"), v));
        }
        vectors.insert(lang.to_string(), rows);
    }
    let zipf = Zipf::new(vocab_per_lang as u64 + 20, 1.05).unwrap();
    let mut docs = Vec::new();
    for i in 0..n {
        let lang = langs[rng.gen_range(0..langs.len())];
        let len = rng.gen_range(0..9);
        let mut words = Vec::new();
        for _ in 0..len {
            // ranks past the vocabulary are out-of-embedding tokens
            let r = zipf.sample(&mut rng) as usize - 1;
            words.push(format!("{lang}w{r}"));
        }
        if i % 17 == 3 && i > 0 {
            // exact duplicates create score ties
            let prev: &SynthDoc = &docs[i - 1];
            if prev.lang == lang {
                words = prev.text.split(' ').map(str::to_string).collect();
            }
        }
        docs.push(SynthDoc {
            id: format!("doc{i}"),
            lang: lang.to_string(),
            text: words.join(" "),
            image_url: None,
        });
    }
    SynthCorpus { docs, vectors, dim }
}

/// Bilingual topic-structured corpus with aligned vectors.
///
/// Concepts cluster around topic centers; each concept has one or two surface
/// forms per language whose vectors are the concept vector plus small noise,
/// so translations sit close together across languages.
pub fn bilingual_topics(seed: u64, n_docs: usize, topics: usize, concepts_per_topic: usize, dim: usize) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let spread = Normal::new(0.0, 0.6).unwrap();
    let align = Normal::new(0.0, 0.15).unwrap();
    let general = 100;
    let langs = ["en", "fr"];

    let centers: Vec<Vec<f64>> = (0..topics).map(|_| (0..dim).map(|_| unit.sample(&mut rng)).collect()).collect();
    let mut concept_vecs: Vec<Vec<f64>> = Vec::new();
    for center in &centers {
        for _ in 0..concepts_per_topic {
            concept_vecs.push(center.iter().map(|c| c + spread.sample(&mut rng)).collect());
        }
    }
    for _ in 0..general {
        concept_vecs.push((0..dim).map(|_| unit.sample(&mut rng)).collect());
    }
    // surface forms per (language, concept)
    let mut forms: BTreeMap<&str, Vec<Vec<String>>> = BTreeMap::new();
    let mut vectors = BTreeMap::new();
    for lang in langs {
        let mut rows = Vec::new();
        let mut lang_forms = Vec::new();
        for (c, cv) in concept_vecs.iter().enumerate() {
            let count = if rng.gen_bool(0.3) { 2 } else { 1 };
            let mut names = Vec::new();
            for k in 0..count {
                let word = format!("{}{c}{}", &lang[..1], ["", "x"][k]);
                let v: Vec<f32> = cv.iter().map(|x| round4(x + align.sample(&mut rng))).collect();
                rows.push((word.clone(), v));
                names.push(word);
            }
            lang_forms.push(names);
        }
        // function words, frequent and close together
        for s in 0..8 {
            let word = format!("{}stop{s}", &lang[..1]);
            let v: Vec<f32> = (0..dim).map(|_| round4(0.2 * unit.sample(&mut rng))).collect();
            rows.push((word, v));
        }
        vectors.insert(lang.to_string(), rows);
        forms.insert(lang, lang_forms);
    }

    let topic_zipf = Zipf::new(topics as u64, 1.0).unwrap();
    let concept_zipf = Zipf::new(concepts_per_topic as u64, 1.1).unwrap();
    let general_zipf = Zipf::new(general as u64, 1.0).unwrap();
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let lang = langs[i % 2];
        let topic = topic_zipf.sample(&mut rng) as usize - 1;
        let len = rng.gen_range(4..=10);
        let mut words = Vec::new();
        for _ in 0..len {
            let concept = if rng.gen_bool(0.75) {
                topic * concepts_per_topic + concept_zipf.sample(&mut rng) as usize - 1
            } else {
                topics * concepts_per_topic + general_zipf.sample(&mut rng) as usize - 1
            };
            let names = &forms[lang][concept];
            words.push(names.choose(&mut rng).unwrap().clone());
        }
        for s in 0..8 {
            if rng.gen_bool(0.25) {
                words.push(format!("{}stop{s}", &lang[..1]));
            }
        }
        words.shuffle(&mut rng);
        docs.push(SynthDoc {
            id: format!("{lang}{i}"),
            lang: lang.to_string(),
            text: words.join(" "),
            image_url: None,
        });
    }
    SynthCorpus { docs, vectors, dim }
}

/// Parallel bilingual fixture: translation pairs are mutual nearest
/// neighbors and every topic has three English and three French documents.
pub fn parallel_fixture() -> SynthCorpus {
    let dim = 4;
    let topics = 4;
    let words_per_topic = 3;
    let mut vectors: BTreeMap<String, Vec<(String, Vec<f32>)>> = BTreeMap::new();
    for t in 0..topics {
        for w in 0..words_per_topic {
            let mut base = vec![0.0f32; dim];
            base[t] = 10.0 * (w as f32 + 1.0);
            let mut fr = base.clone();
            fr[(t + 1) % dim] += 0.1;
            vectors.entry("en".into()).or_default().push((format!("en{t}w{w}"), base));
            vectors.entry("fr".into()).or_default().push((format!("fr{t}w{w}"), fr));
        }
    }
    let mut docs = Vec::new();
    for t in 0..topics {
        for (k, pair) in [(0, 1), (1, 2), (0, 2)].iter().enumerate() {
            for lang in ["en", "fr"] {
                docs.push(SynthDoc {
                    id: format!("{lang}-{t}-{k}"),
                    lang: lang.into(),
                    text: format!("{lang}{t}w{} {lang}{t}w{}", pair.0, pair.1),
                    image_url: (lang == "en").then(|| format!("https://img.example/{t}-{k}.jpg")),
                });
            }
        }
    }
    SynthCorpus { docs, vectors, dim }
}

/// Headline-like bilingual corpus.
///
/// Like [`bilingual_topics`] but every document also carries a few tokens
/// from a long tail of rare names, shared by both languages, so word overlap
/// between documents is sparse and document norms vary widely.
pub fn bilingual_headlines(seed: u64, n_docs: usize, rare_pool: usize, rare_per_doc: usize) -> SynthCorpus {
    let mut synth = bilingual_topics(seed, n_docs, 50, 40, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e61_6d65);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let align = Normal::new(0.0, 0.15).unwrap();
    let names: Vec<Vec<f64>> = (0..rare_pool)
        .map(|_| (0..synth.dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    for (lang, rows) in synth.vectors.iter_mut() {
        for (k, v) in names.iter().enumerate() {
            let noisy = v.iter().map(|x| round4(x + align.sample(&mut rng))).collect();
            rows.push((format!("{}name{k}", &lang[..1]), noisy));
        }
    }
    let zipf = Zipf::new(rare_pool as u64, 1.0).unwrap();
    for doc in &mut synth.docs {
        let count = rng.gen_range(0..=rare_per_doc);
        for _ in 0..count {
            let k = zipf.sample(&mut rng) as usize - 1;
            write!(doc.text, " {}name{k}", &doc.lang[..1]).unwrap();
        }
    }
    synth
}
