//! Dataset ingestion and validation.
//!
//! Corpora are CSV files (RFC-4180, UTF-8, header row) or JSON lines, one
//! sentence per row with its gold label, the number of annotators who voted
//! on it, and the fraction of them that agreed with the majority label.
//! Extra columns are ignored so shared-task files load unmodified.
//!
//! Agreement follows majority-vote semantics: `agreement * num_votes` is the
//! count of annotators matching the gold label, so it must be (near-)integral
//! and at least half of `num_votes`. Exactly tied votes have no majority
//! label and are rejected.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::util::fmt_f64;

/// Absolute tolerance when checking that `agreement * num_votes` is a whole
/// number of annotators; 2/3 and friends are not exactly representable.
pub const VOTE_INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: malformed record: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}, field `{field}`: cannot parse {value:?}")]
    Parse {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: {reason}")]
    InvariantViolation { row: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One sentence with its gold label and annotation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedExample {
    pub text: String,
    /// Gold (majority) label, 1 = causal.
    pub label: u8,
    /// Number of annotators who voted on this sentence.
    pub num_votes: u32,
    /// Fraction of annotators agreeing with the gold label, in (0.5, 1].
    pub agreement: f64,
}

impl AnnotatedExample {
    pub fn new(text: impl Into<String>, label: u8, num_votes: u32, agreement: f64) -> Result<Self, String> {
        let example = AnnotatedExample {
            text: text.into(),
            label,
            num_votes,
            agreement,
        };
        example.validate()?;
        Ok(example)
    }

    /// Checks the field invariants, returning the reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.label > 1 {
            return Err(format!("label must be 0 or 1, got {}", self.label));
        }
        if self.num_votes < 1 {
            return Err("num_votes must be at least 1".to_string());
        }
        if !self.agreement.is_finite() || !(0.5..=1.0).contains(&self.agreement) {
            return Err(format!(
                "agreement must lie in [0.5, 1.0], got {}",
                self.agreement
            ));
        }
        let raw = self.agreement * self.num_votes as f64;
        if (raw - raw.round()).abs() > VOTE_INTEGRALITY_TOL {
            return Err(format!(
                "agreement * num_votes = {raw} is not a whole number of annotators"
            ));
        }
        let agreeing = raw.round() as u32;
        if 2 * agreeing == self.num_votes {
            return Err(format!(
                "tied vote ({agreeing} of {}) has no majority label",
                self.num_votes
            ));
        }
        Ok(())
    }

    /// Number of annotators agreeing with the gold label (`num_votes * agreement`).
    pub fn agreeing_votes(&self) -> u32 {
        (self.agreement * self.num_votes as f64).round() as u32
    }
}

/// Immutable, ordered collection of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<AnnotatedExample>,
    source_path: Option<PathBuf>,
}

impl Dataset {
    /// Validates every example (rows reported 1-based).
    pub fn new(examples: Vec<AnnotatedExample>) -> Result<Self, DataError> {
        for (i, example) in examples.iter().enumerate() {
            example
                .validate()
                .map_err(|reason| DataError::InvariantViolation { row: i + 1, reason })?;
        }
        Ok(Dataset {
            examples,
            source_path: None,
        })
    }

    pub fn examples(&self) -> &[AnnotatedExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedExample> {
        self.examples.iter()
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }
}

/// Column names used by the CSV and JSON-lines loaders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub text: String,
    pub label: String,
    pub votes: String,
    pub agreement: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            text: "text".to_string(),
            label: "label".to_string(),
            votes: "num_votes".to_string(),
            agreement: "agreement".to_string(),
        }
    }
}

fn parse_label(row: usize, value: &str) -> Result<u8, DataError> {
    let bad = || DataError::Parse {
        row,
        field: "label",
        value: value.to_string(),
    };
    let x: f64 = value.trim().parse().map_err(|_| bad())?;
    if x == 0.0 {
        Ok(0)
    } else if x == 1.0 {
        Ok(1)
    } else {
        Err(bad())
    }
}

fn parse_votes(row: usize, value: &str) -> Result<u32, DataError> {
    let trimmed = value.trim();
    let bad = || DataError::Parse {
        row,
        field: "num_votes",
        value: value.to_string(),
    };
    if let Ok(n) = trimmed.parse::<u32>() {
        return Ok(n);
    }
    // Tolerate float-formatted counts ("3.0") from spreadsheet exports.
    let x: f64 = trimmed.parse().map_err(|_| bad())?;
    if x.is_finite() && x >= 0.0 && (x - x.round()).abs() <= VOTE_INTEGRALITY_TOL && x.round() <= u32::MAX as f64 {
        Ok(x.round() as u32)
    } else {
        Err(bad())
    }
}

fn parse_agreement(row: usize, value: &str) -> Result<f64, DataError> {
    value.trim().parse().map_err(|_| DataError::Parse {
        row,
        field: "agreement",
        value: value.to_string(),
    })
}

fn validated(row: usize, example: AnnotatedExample) -> Result<AnnotatedExample, DataError> {
    example
        .validate()
        .map_err(|reason| DataError::InvariantViolation { row, reason })?;
    Ok(example)
}

/// Parses CSV from any reader. Rows are numbered 1-based excluding the header.
pub fn from_csv_reader<R: Read>(reader: R, cols: &ColumnSpec) -> Result<Vec<AnnotatedExample>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Malformed {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let text_at = column(&cols.text)?;
    let label_at = column(&cols.label)?;
    let votes_at = column(&cols.votes)?;
    let agreement_at = column(&cols.agreement)?;

    let mut examples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let field = |at: usize, name: &'static str| {
            record.get(at).ok_or(DataError::Parse {
                row,
                field: name,
                value: "<missing>".to_string(),
            })
        };
        let example = AnnotatedExample {
            text: field(text_at, "text")?.to_string(),
            label: parse_label(row, field(label_at, "label")?)?,
            num_votes: parse_votes(row, field(votes_at, "num_votes")?)?,
            agreement: parse_agreement(row, field(agreement_at, "agreement")?)?,
        };
        examples.push(validated(row, example)?);
    }
    Ok(examples)
}

/// Parses JSON lines: one object per line with the configured keys, blank
/// lines skipped. Rows are numbered 1-based by line.
pub fn from_jsonl_reader<R: Read>(reader: R, cols: &ColumnSpec) -> Result<Vec<AnnotatedExample>, DataError> {
    let mut examples = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let lookup = |key: &str| {
            value
                .get(key)
                .ok_or_else(|| DataError::MissingColumn(key.to_string()))
        };
        let text_value = lookup(&cols.text)?;
        let text = text_value
            .as_str()
            .ok_or_else(|| DataError::Parse {
                row,
                field: "text",
                value: text_value.to_string(),
            })?
            .to_string();
        let label = parse_label(row, &json_number_string(lookup(&cols.label)?))?;
        let num_votes = parse_votes(row, &json_number_string(lookup(&cols.votes)?))?;
        let agreement = parse_agreement(row, &json_number_string(lookup(&cols.agreement)?))?;
        let example = AnnotatedExample {
            text,
            label,
            num_votes,
            agreement,
        };
        examples.push(validated(row, example)?);
    }
    Ok(examples)
}

fn json_number_string(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads a CSV dataset from disk; `cols` defaults to
/// `text,label,agreement,num_votes`.
pub fn load_csv(path: impl AsRef<Path>, cols: &ColumnSpec) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let examples = from_csv_reader(file, cols)?;
    Ok(Dataset {
        examples,
        source_path: Some(path.to_path_buf()),
    })
}

/// Loads a JSON-lines dataset from disk.
pub fn load_jsonl(path: impl AsRef<Path>, cols: &ColumnSpec) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let examples = from_jsonl_reader(file, cols)?;
    Ok(Dataset {
        examples,
        source_path: Some(path.to_path_buf()),
    })
}

/// Writes the default CSV schema. Agreement is printed with 17 significant
/// digits so reloading reproduces the exact f64.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| DataError::Io {
        path: "<writer>".to_string(),
        message: e.to_string(),
    };
    wtr.write_record(["text", "label", "agreement", "num_votes"])
        .map_err(io_err)?;
    for example in ds.iter() {
        wtr.write_record([
            example.text.as_str(),
            &example.label.to_string(),
            &fmt_f64(example.agreement),
            &example.num_votes.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| DataError::Io {
        path: "<writer>".to_string(),
        message: e.to_string(),
    })
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_csv(ds, file)
}

/// Counts of (causal, non-causal) examples.
pub fn class_balance(ds: &Dataset) -> (usize, usize) {
    let causal = ds.iter().filter(|e| e.label == 1).count();
    (causal, ds.len() - causal)
}

/// Default vocabulary for [`synth_corpus`]: the first half are cue tokens
/// that only appear in positive sentences, the second half fillers.
pub fn synth_vocab() -> Vec<&'static str> {
    vec![
        // cues
        "because", "caused", "therefore", "hence", "thus", "led", "triggered", "resulted",
        "sparked", "prompted",
        // fillers
        "the", "strike", "workers", "protest", "tuesday", "city", "police", "march", "union",
        "demands",
    ]
}

/// Generates a linearly separable token-pattern corpus with simulated
/// annotations.
///
/// The first half of `vocab` are cue tokens: every positive sentence contains
/// exactly one, negatives contain none, so unigram features separate the
/// classes (modulo hash collisions, which the default dimension makes
/// vanishingly rare). Each example gets `num_votes` drawn from {1, 3, 5};
/// each simulated annotator flips the pattern label with probability
/// `flip_prob`, the stored label is the majority vote and `agreement` the
/// fraction that voted with it. Deterministic for a fixed seed.
pub fn synth_corpus(seed: u64, size: usize, vocab: &[&str], flip_prob: f64) -> Result<Dataset, DataError> {
    if size < 1 {
        return Err(DataError::InvalidParameter("size must be at least 1".to_string()));
    }
    if !flip_prob.is_finite() || !(0.0..=0.5).contains(&flip_prob) {
        return Err(DataError::InvalidParameter(format!(
            "flip_prob must lie in [0, 0.5], got {flip_prob}"
        )));
    }
    if vocab.len() < 2 {
        return Err(DataError::InvalidParameter(
            "vocab needs at least one cue and one filler token".to_string(),
        ));
    }
    let (cues, fillers) = vocab.split_at(vocab.len() / 2);
    let mut rng = rng::seeded(seed);
    let vote_choices = [1u32, 3, 5];

    let mut examples = Vec::with_capacity(size);
    for _ in 0..size {
        let pattern_label = rng::below(&mut rng, 2) == 1;
        let mut tokens: Vec<&str> = Vec::new();
        let filler_count = 3 + rng::below(&mut rng, 5) as usize;
        for _ in 0..filler_count {
            tokens.push(rng::choose(&mut rng, fillers));
        }
        if pattern_label {
            let at = rng::below(&mut rng, tokens.len() as u64 + 1) as usize;
            tokens.insert(at, rng::choose(&mut rng, cues));
        }

        let num_votes = *rng::choose(&mut rng, &vote_choices);
        let mut votes_for_pattern = 0u32;
        for _ in 0..num_votes {
            if !rng::bernoulli(&mut rng, flip_prob) {
                votes_for_pattern += 1;
            }
        }
        // num_votes is odd, so there is always a strict majority.
        let majority_is_pattern = 2 * votes_for_pattern > num_votes;
        let label = u8::from(majority_is_pattern == pattern_label);
        let agreeing = votes_for_pattern.max(num_votes - votes_for_pattern);
        let agreement = f64::from(agreeing) / f64::from(num_votes);

        examples.push(AnnotatedExample {
            text: tokens.join(" "),
            label,
            num_votes,
            agreement,
        });
    }
    Dataset::new(examples)
}
