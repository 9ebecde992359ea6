//! Annotation-aware cross-entropy losses and their analytic gradients.
//!
//! Three batch losses over predicted causality probabilities:
//!
//! * **vanilla** — plain cross-entropy toward the gold label, averaged over
//!   the batch; annotation metadata is ignored.
//! * **noisy** — every annotator's vote is treated as a training signal: a
//!   sentence with `n` votes and agreement `r` contributes `n` times the
//!   mixture of cross-entropy toward the gold label (weight `r`) and toward
//!   the flipped label (weight `1 - r`), normalized by the total vote count.
//!   For a single sentence with gold label 1 this is minimized at
//!   `y_pred = r`, i.e. a form of label smoothing driven by disagreement.
//! * **refined** — disagreeing votes are dropped: each sentence contributes
//!   cross-entropy toward the gold label weighted by its count of agreeing
//!   annotators `n * r`, normalized by the batch total of those counts.
//!
//! Normalizers are computed per batch, exactly as defined, so a sentence's
//! gradient contribution depends on which batch it lands in (unlike a plain
//! per-example mean). Each loss is computed as
//! `sum_i (weight_i / total_weight) * term_i`; keeping the per-example
//! coefficient in that ratio form makes the documented reduction identities
//! (noisy = vanilla when every `r = 1` and votes are equal, refined = vanilla
//! at `M = 1`, invariance of refined under doubling all vote counts) hold
//! bit-for-bit, not just approximately.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::AnnotatedExample;
use crate::util::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("length mismatch: {left} predictions vs {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid target at index {index}: {reason}")]
    InvalidTarget { index: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Selects which batch loss a run trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Vanilla,
    Noisy,
    Refined,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Vanilla, LossKind::Noisy, LossKind::Refined];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Vanilla => "vanilla",
            LossKind::Noisy => "noisy",
            LossKind::Refined => "refined",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(LossKind::Vanilla),
            "noisy" => Ok(LossKind::Noisy),
            "refined" => Ok(LossKind::Refined),
            other => Err(format!("unknown loss `{other}` (expected vanilla, noisy or refined)")),
        }
    }
}

/// Per-sentence training targets for one batch: gold labels, vote counts and
/// agreement fractions, all of equal length `M >= 1`.
///
/// Unlike the dataset loader this does not require `n * r` to be a whole
/// vote count, so targets can be assembled for any `(n, r)` combination when
/// probing the losses.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTarget {
    labels: Vec<u8>,
    votes: Vec<u32>,
    agreements: Vec<f64>,
}

impl BatchTarget {
    pub fn new(labels: Vec<u8>, votes: Vec<u32>, agreements: Vec<f64>) -> Result<Self, LossError> {
        if labels.is_empty() {
            return Err(LossError::InvalidParameter("batch must be nonempty".to_string()));
        }
        if votes.len() != labels.len() {
            return Err(LossError::LengthMismatch {
                left: labels.len(),
                right: votes.len(),
            });
        }
        if agreements.len() != labels.len() {
            return Err(LossError::LengthMismatch {
                left: labels.len(),
                right: agreements.len(),
            });
        }
        for i in 0..labels.len() {
            if labels[i] > 1 {
                return Err(LossError::InvalidTarget {
                    index: i,
                    reason: format!("label must be 0 or 1, got {}", labels[i]),
                });
            }
            if votes[i] < 1 {
                return Err(LossError::InvalidTarget {
                    index: i,
                    reason: "num_votes must be at least 1".to_string(),
                });
            }
            if !agreements[i].is_finite() || !(0.5..=1.0).contains(&agreements[i]) {
                return Err(LossError::InvalidTarget {
                    index: i,
                    reason: format!("agreement must lie in [0.5, 1.0], got {}", agreements[i]),
                });
            }
        }
        Ok(BatchTarget {
            labels,
            votes,
            agreements,
        })
    }

    pub fn from_examples(examples: &[AnnotatedExample]) -> Result<Self, LossError> {
        BatchTarget::new(
            examples.iter().map(|e| e.label).collect(),
            examples.iter().map(|e| e.num_votes).collect(),
            examples.iter().map(|e| e.agreement).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn votes(&self) -> &[u32] {
        &self.votes
    }

    pub fn agreements(&self) -> &[f64] {
        &self.agreements
    }
}

/// Predicted probabilities, clamped into `[EPS, 1 - EPS]` on construction so
/// no logarithm ever sees 0 or 1. NaN inputs pass through and surface as a
/// non-finite loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities(Vec<f64>);

impl Probabilities {
    pub const EPS: f64 = 1e-12;

    pub fn new(raw: Vec<f64>) -> Self {
        Probabilities(
            raw.into_iter()
                .map(|p| p.clamp(Self::EPS, 1.0 - Self::EPS))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn ensure_lengths(p: &Probabilities, t: &BatchTarget) -> Result<(), LossError> {
    if p.len() != t.len() {
        return Err(LossError::LengthMismatch {
            left: p.len(),
            right: t.len(),
        });
    }
    Ok(())
}

/// Batch weight of one sentence under the given loss.
fn example_weight(kind: LossKind, votes: u32, agreement: f64) -> f64 {
    match kind {
        LossKind::Vanilla => 1.0,
        LossKind::Noisy => f64::from(votes),
        LossKind::Refined => f64::from(votes) * agreement,
    }
}

/// Unweighted per-sentence loss term.
fn example_term(kind: LossKind, label: u8, agreement: f64, p: f64) -> f64 {
    match kind {
        LossKind::Vanilla | LossKind::Refined => {
            if label == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        }
        LossKind::Noisy => {
            let toward_one = p.ln();
            let toward_zero = (1.0 - p).ln();
            if label == 1 {
                -(agreement * toward_one + (1.0 - agreement) * toward_zero)
            } else {
                -(agreement * toward_zero + (1.0 - agreement) * toward_one)
            }
        }
    }
}

/// Derivative of [`example_term`] with respect to `p`.
fn example_term_derivative(kind: LossKind, label: u8, agreement: f64, p: f64) -> f64 {
    match kind {
        LossKind::Vanilla | LossKind::Refined => {
            if label == 1 {
                -1.0 / p
            } else {
                1.0 / (1.0 - p)
            }
        }
        LossKind::Noisy => {
            if label == 1 {
                -agreement / p + (1.0 - agreement) / (1.0 - p)
            } else {
                agreement / (1.0 - p) - (1.0 - agreement) / p
            }
        }
    }
}

fn total_weight(kind: LossKind, t: &BatchTarget) -> f64 {
    (0..t.len())
        .map(|i| example_weight(kind, t.votes[i], t.agreements[i]))
        .sum()
}

/// Value of the selected batch loss.
pub fn batch_loss(kind: LossKind, p: &Probabilities, t: &BatchTarget) -> Result<f64, LossError> {
    ensure_lengths(p, t)?;
    let total = total_weight(kind, t);
    let mut loss = 0.0;
    for (i, &pred) in p.as_slice().iter().enumerate() {
        let coefficient = example_weight(kind, t.votes[i], t.agreements[i]) / total;
        loss += coefficient * example_term(kind, t.labels[i], t.agreements[i], pred);
    }
    Ok(loss)
}

/// Mean cross-entropy toward the gold labels (annotation metadata unused).
pub fn vanilla_ce(p: &Probabilities, t: &BatchTarget) -> Result<f64, LossError> {
    batch_loss(LossKind::Vanilla, p, t)
}

/// Vote-weighted cross-entropy counting agreeing and disagreeing annotators,
/// normalized by the batch's total vote count.
pub fn noisy_ce(p: &Probabilities, t: &BatchTarget) -> Result<f64, LossError> {
    batch_loss(LossKind::Noisy, p, t)
}

/// Cross-entropy toward the gold label weighted by agreeing votes only,
/// normalized by the batch's total count of agreeing votes.
pub fn refined_ce(p: &Probabilities, t: &BatchTarget) -> Result<f64, LossError> {
    batch_loss(LossKind::Refined, p, t)
}

/// Exact partial derivatives of the selected batch loss with respect to each
/// prediction, batch normalizer included.
pub fn grad_wrt_pred(kind: LossKind, p: &Probabilities, t: &BatchTarget) -> Result<Vec<f64>, LossError> {
    ensure_lengths(p, t)?;
    let total = total_weight(kind, t);
    Ok(p.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &pred)| {
            let coefficient = example_weight(kind, t.votes[i], t.agreements[i]) / total;
            coefficient * example_term_derivative(kind, t.labels[i], t.agreements[i], pred)
        })
        .collect())
}

/// One row of a loss profile: the single-sentence loss at `y_pred`, for a
/// curve parameterized by `agreement`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub agreement: f64,
    pub y_pred: f64,
    pub loss: f64,
}

/// Sweeps the single-sentence loss over a uniform `y_pred` grid on
/// `[EPS, 1 - EPS]`, one curve per agreement value, in the given order.
///
/// For the noisy loss with gold label 1 the curve for agreement `r` bottoms
/// out at the grid point nearest `r`; its minimum slides away from 1 as
/// agreement drops. Label 0 mirrors this, and the refined/vanilla curves are
/// monotone with their minimum pinned at the boundary.
pub fn loss_profile(
    kind: LossKind,
    y_true: u8,
    num_votes: u32,
    r_values: &[f64],
    grid: usize,
) -> Result<Vec<ProfilePoint>, LossError> {
    if grid < 3 {
        return Err(LossError::InvalidParameter(format!(
            "grid must be at least 3, got {grid}"
        )));
    }
    if y_true > 1 {
        return Err(LossError::InvalidParameter(format!(
            "y_true must be 0 or 1, got {y_true}"
        )));
    }
    if r_values.is_empty() {
        return Err(LossError::InvalidParameter("need at least one agreement value".to_string()));
    }
    let mut points = Vec::with_capacity(r_values.len() * grid);
    for &agreement in r_values {
        let target = BatchTarget::new(vec![y_true], vec![num_votes], vec![agreement])
            .map_err(|e| LossError::InvalidParameter(e.to_string()))?;
        for step in 0..grid {
            let fraction = step as f64 / (grid - 1) as f64;
            let y_pred = Probabilities::EPS + (1.0 - 2.0 * Probabilities::EPS) * fraction;
            let p = Probabilities::new(vec![y_pred]);
            let loss = batch_loss(kind, &p, &target)?;
            points.push(ProfilePoint {
                agreement,
                y_pred: p.as_slice()[0],
                loss,
            });
        }
    }
    Ok(points)
}

/// Emits profile rows as `r,y_pred,loss` CSV with full-precision floats.
pub fn write_profile_csv<W: Write>(points: &[ProfilePoint], mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "r,y_pred,loss")?;
    for point in points {
        writeln!(
            writer,
            "{},{},{}",
            fmt_f64(point.agreement),
            fmt_f64(point.y_pred),
            fmt_f64(point.loss)
        )?;
    }
    Ok(())
}
