//! Lexical diversity: unique n-gram counts versus data size, and token
//! frequency tables for word-cloud style comparisons.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::task::{LabeledExample, Source};

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("requested size {size} but the dataset has {available} examples")]
    SizeExceedsDataset { size: usize, available: usize },
    #[error("sizes must be strictly increasing")]
    UnsortedSizes,
    #[error("n-gram order must be >= 1")]
    ZeroOrder,
    #[error("top_k must be >= 1")]
    ZeroTopK,
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenization {
    /// Lowercased whitespace-separated words.
    #[default]
    Word,
    /// Lowercased characters, whitespace runs collapsed to one space.
    Char,
}

pub fn tokenize(text: &str, mode: Tokenization) -> Vec<String> {
    let lower = text.to_lowercase();
    match mode {
        Tokenization::Word => lower.split_whitespace().map(str::to_string).collect(),
        Tokenization::Char => lower
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .chars()
            .map(String::from)
            .collect(),
    }
}

fn add_windows(seen: &mut HashSet<Vec<String>>, text: &str, n: usize, mode: Tokenization) {
    let tokens = tokenize(text, mode);
    for window in tokens.windows(n) {
        if !seen.contains(window) {
            seen.insert(window.to_vec());
        }
    }
}

/// Distinct word-level n-grams across `texts`; windows never cross texts.
pub fn unique_ngrams<S: AsRef<str>>(texts: &[S], n: usize) -> usize {
    unique_ngrams_with(texts, n, Tokenization::Word)
}

pub fn unique_ngrams_with<S: AsRef<str>>(texts: &[S], n: usize, mode: Tokenization) -> usize {
    if n == 0 {
        return 0;
    }
    let mut seen = HashSet::new();
    for t in texts {
        add_windows(&mut seen, t.as_ref(), n, mode);
    }
    seen.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Real,
    Synthetic,
    Mixed,
}

impl Cohort {
    pub fn of(dataset: &[LabeledExample]) -> Self {
        let real = dataset.iter().filter(|e| e.source == Source::Real).count();
        match real {
            r if r == dataset.len() => Cohort::Real,
            0 => Cohort::Synthetic,
            _ => Cohort::Mixed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::Real => "real",
            Cohort::Synthetic => "synthetic",
            Cohort::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub data_size: usize,
    pub unique_ngram_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiversityCurve {
    pub points: Vec<CurvePoint>,
    pub n: usize,
    pub cohort: Cohort,
}

/// Unique n-gram counts on nested prefixes of one seeded shuffle, so the
/// curve never decreases.
pub fn diversity_curve(
    dataset: &[LabeledExample],
    sizes: &[usize],
    n: usize,
    rng_seed: u64,
) -> Result<DiversityCurve, DiversityError> {
    diversity_curve_with(dataset, sizes, n, rng_seed, Tokenization::Word)
}

pub fn diversity_curve_with(
    dataset: &[LabeledExample],
    sizes: &[usize],
    n: usize,
    rng_seed: u64,
    mode: Tokenization,
) -> Result<DiversityCurve, DiversityError> {
    if n == 0 {
        return Err(DiversityError::ZeroOrder);
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiversityError::UnsortedSizes);
    }
    if let Some(&size) = sizes.last().filter(|&&s| s > dataset.len()) {
        return Err(DiversityError::SizeExceedsDataset {
            size,
            available: dataset.len(),
        });
    }

    let order = SplitMix64::new(rng_seed).permutation(dataset.len());
    let mut seen = HashSet::new();
    let mut taken = 0;
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        for &i in &order[taken..size] {
            add_windows(&mut seen, &dataset[i].text, n, mode);
        }
        taken = size;
        points.push(CurvePoint {
            data_size: size,
            unique_ngram_count: seen.len(),
        });
    }
    Ok(DiversityCurve {
        points,
        n,
        cohort: Cohort::of(dataset),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub cohort: String,
    /// Sorted by count descending, then token ascending.
    pub entries: Vec<(String, usize)>,
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
    "doing", "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "it's", "its", "itself", "just", "me",
    "more", "most", "my", "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other",
    "our", "out", "over", "own", "same", "she", "so", "some", "such", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "would", "you", "your",
];

pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// One stopword per line; blank lines and `#` comments ignored.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>, DiversityError> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

pub fn token_frequencies<S: AsRef<str>>(
    texts: &[S],
    top_k: usize,
    stopwords: &HashSet<String>,
    cohort: &str,
) -> Result<FrequencyTable, DiversityError> {
    if top_k == 0 {
        return Err(DiversityError::ZeroTopK);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for raw in text.as_ref().to_lowercase().split_whitespace() {
            let token = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if token.chars().count() <= 1 || stopwords.contains(token) {
                continue;
            }
            *counts.entry(token.to_string()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(top_k);
    Ok(FrequencyTable {
        cohort: cohort.to_string(),
        entries,
    })
}

/// Columns: `cohort,n,data_size,unique_ngrams`.
pub fn write_curves_csv(path: &Path, curves: &[DiversityCurve]) -> Result<(), DiversityError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cohort", "n", "data_size", "unique_ngrams"])?;
    for curve in curves {
        for p in &curve.points {
            w.write_record([
                curve.cohort.as_str().to_string(),
                curve.n.to_string(),
                p.data_size.to_string(),
                p.unique_ngram_count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns: `token,count`.
pub fn write_frequencies_csv(path: &Path, table: &FrequencyTable) -> Result<(), DiversityError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["token", "count"])?;
    for (token, count) in &table.entries {
        w.write_record([token.as_str(), &count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
