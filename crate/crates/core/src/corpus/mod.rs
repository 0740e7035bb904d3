//! Corpus ingestion and text preprocessing.
//!
//! Raw documents are scrubbed (advertisement spans, company names, special
//! characters), split on whitespace, filtered against the 25 Fry words and
//! Porter-stemmed. The stemmed tokens of a corpus define its [`Vocabulary`].

mod porter;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: document id is empty")]
    EmptyId { line: u64 },
    #[error("vocabulary is empty: no document has any terms")]
    EmptyVocabulary,
    #[error("invalid scrub rules: {0}")]
    Rules(String),
}

/// One game (or other item) as ingested: title, description and optional category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl RawDocument {
    pub fn new(id: &str, title: &str, description: &str, label: Option<&str>) -> Self {
        Self {
            id: id.to_string(),
            title: title.to_string(),
            description: description.to_string(),
            label: label.map(str::to_string),
        }
    }
}

/// Characters replaced by whitespace during scrubbing, besides line feed and
/// carriage return.
pub const REMOVED_CHARS: &[char] = &[
    '?', '*', '_', '@', '-', '+', '!', '=', '®', '™', '•', '…', '“', '”', '~', '&', '—', '.', ',',
    '#', '‘', '’', '(', ')', ':', '©', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '/',
];

/// Fry's 25 most frequent English words.
pub const STOP_WORDS: [&str; 25] = [
    "the", "of", "and", "a", "to", "in", "is", "you", "that", "it", "he", "was", "for", "on",
    "are", "as", "with", "his", "they", "i", "at", "be", "this", "have", "from",
];

/// Publishers whose names mislead the classifier (e.g. "fish" in Big Fish).
pub const DEFAULT_COMPANY_NAMES: &[&str] = &[
    "Big Fish",
    "Electronic Arts",
    "Activision",
    "NaturalMotion",
    "PlayFirst",
    "SEGA",
    "Imperial Game Studio",
];

/// Cross-promotion boilerplate appended to descriptions.
pub const DEFAULT_AD_PATTERNS: &[&str] = &[
    "Don't miss our other exciting games!",
    "Don’t miss our other exciting games!",
];

/// Scrubbing configuration.
///
/// `remove_chars` always holds the built-in character list; the JSON config
/// file only carries the two phrase lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrubRules {
    #[serde(skip, default = "default_remove_chars")]
    pub remove_chars: BTreeSet<char>,
    #[serde(default)]
    pub company_names: Vec<String>,
    #[serde(default)]
    pub ad_patterns: Vec<String>,
}

fn default_remove_chars() -> BTreeSet<char> {
    REMOVED_CHARS.iter().copied().chain(['\n', '\r']).collect()
}

impl Default for ScrubRules {
    /// Built-in characters plus the shipped company and advertisement lists.
    fn default() -> Self {
        Self {
            remove_chars: default_remove_chars(),
            company_names: DEFAULT_COMPANY_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ad_patterns: DEFAULT_AD_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ScrubRules {
    /// Character stripping only; no phrase deletion.
    pub fn chars_only() -> Self {
        Self {
            remove_chars: default_remove_chars(),
            company_names: Vec::new(),
            ad_patterns: Vec::new(),
        }
    }

    /// Reads `{"company_names": [...], "ad_patterns": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(text).map_err(|e| CorpusError::Rules(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// A scrubbed, stemmed token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<String>,
}

/// Sorted, densely indexed set of stemmed terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(terms: Vec<String>) -> Self {
        let set: BTreeSet<String> = terms.into_iter().collect();
        let terms: Vec<String> = set.into_iter().collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { terms, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses from the file extension; anything other than `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct CsvRecord {
    id: String,
    title: String,
    description: String,
    #[serde(default)]
    label: Option<String>,
}

/// Loads a corpus, preserving record order.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawDocument>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let records = match format {
        CorpusFormat::Csv => read_csv(file)?,
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)).map_err(|e| match e {
            ReadError::Io(source) => io_err(source),
            ReadError::Corpus(e) => e,
        })?,
    };
    validate_ids(&records)?;
    Ok(records.into_iter().map(|(_, d)| d).collect())
}

enum ReadError {
    Io(std::io::Error),
    Corpus(CorpusError),
}

fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<(u64, RawDocument)>, CorpusError> {
    let malformed = |e: csv::Error| CorpusError::Malformed {
        line: e.position().map(|p| p.line()).unwrap_or(1),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(malformed)?.clone();
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(malformed)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let rec: CsvRecord =
            record
                .deserialize(Some(&headers))
                .map_err(|e| CorpusError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
        out.push((
            line,
            RawDocument {
                id: rec.id,
                title: rec.title,
                description: rec.description,
                label: rec.label.filter(|l| !l.is_empty()),
            },
        ));
    }
    Ok(out)
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<(u64, RawDocument)>, ReadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(ReadError::Io)?;
        let lineno = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| {
            ReadError::Corpus(CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })
        })?;
        out.push((lineno, doc));
    }
    Ok(out)
}

fn validate_ids(records: &[(u64, RawDocument)]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (line, doc) in records {
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId { line: *line });
        }
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                line: *line,
                id: doc.id.clone(),
            });
        }
    }
    Ok(())
}

/// Parses JSONL text already in memory.
pub fn parse_jsonl(text: &str) -> Result<Vec<RawDocument>, CorpusError> {
    let records = read_jsonl(text.as_bytes()).map_err(|e| match e {
        ReadError::Io(e) => CorpusError::Malformed {
            line: 0,
            message: e.to_string(),
        },
        ReadError::Corpus(e) => e,
    })?;
    validate_ids(&records)?;
    Ok(records.into_iter().map(|(_, d)| d).collect())
}

/// Parses CSV text already in memory.
pub fn parse_csv(text: &str) -> Result<Vec<RawDocument>, CorpusError> {
    let records = read_csv(text.as_bytes())?;
    validate_ids(&records)?;
    Ok(records.into_iter().map(|(_, d)| d).collect())
}

/// Lowercases, deletes advertisement spans and company names, then replaces
/// each run of removed characters (together with surrounding whitespace) by
/// a single space. Repeats until nothing changes, so the result is a fixed
/// point of the rules.
pub fn scrub_text(text: &str, rules: &ScrubRules) -> String {
    let ads: Vec<String> = lowered_phrases(&rules.ad_patterns);
    let companies: Vec<String> = lowered_phrases(&rules.company_names);
    let mut current = text.to_lowercase();
    loop {
        let mut next = current.clone();
        for phrase in ads.iter().chain(&companies) {
            next = next.replace(phrase.as_str(), "");
        }
        next = strip_chars(&next, &rules.remove_chars);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn lowered_phrases(phrases: &[String]) -> Vec<String> {
    phrases
        .iter()
        .map(|p| p.to_lowercase())
        .filter(|p| !p.is_empty())
        .collect()
}

fn strip_chars(text: &str, remove: &BTreeSet<char>) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if !remove.contains(&chars[i]) && !chars[i].is_whitespace() {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let start = i;
        let mut hit = false;
        while i < chars.len() && (remove.contains(&chars[i]) || chars[i].is_whitespace()) {
            hit |= remove.contains(&chars[i]);
            i += 1;
        }
        if hit {
            out.push(' ');
        } else {
            out.extend(&chars[start..i]);
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

pub fn remove_stopwords(tokens: Vec<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !is_stop_word(t)).collect()
}

/// Title and description joined by one space, then scrub, tokenize,
/// stop-word removal and stemming.
pub fn preprocess(doc: &RawDocument, rules: &ScrubRules) -> CleanDocument {
    let text = format!("{} {}", doc.title, doc.description);
    let tokens = remove_stopwords(tokenize(&scrub_text(&text, rules)))
        .iter()
        .map(|t| stem(t))
        .filter(|t| !t.is_empty())
        .collect();
    CleanDocument {
        id: doc.id.clone(),
        tokens,
        label: doc.label.clone(),
    }
}

pub fn preprocess_all(docs: &[RawDocument], rules: &ScrubRules) -> Vec<CleanDocument> {
    docs.iter().map(|d| preprocess(d, rules)).collect()
}

pub fn build_vocabulary(docs: &[CleanDocument]) -> Result<Vocabulary, CorpusError> {
    let terms: BTreeSet<&str> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().map(String::as_str))
        .collect();
    if terms.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Ok(Vocabulary::from(
        terms.into_iter().map(str::to_string).collect::<Vec<_>>(),
    ))
}
