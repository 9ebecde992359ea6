//! Finite-difference verification of the analytic loss gradients.
//!
//! The oracle side only ever calls the loss *values*: central differences
//! `(L(p + h) - L(p - h)) / 2h` are compared against `grad_wrt_pred`, so a
//! bug in the analytic derivatives cannot hide in the check. Batches are
//! drawn from the same target grid the losses are specified over (labels in
//! {0,1}, votes in {1,3,5}, agreement in {0.5, 0.6, 2/3, 0.8, 1}), with
//! predictions kept away from the clamp boundary so the difference quotient
//! is well defined.

use std::fmt;

use crate::losses::{batch_loss, grad_wrt_pred, BatchTarget, LossKind, Probabilities};
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Number of random batches per loss kind.
    pub trials: usize,
    pub seed: u64,
    /// Central-difference step.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Entries with |analytic gradient| at or below this are skipped.
    pub gradient_floor: f64,
    /// Batch sizes are drawn from 1..=max_batch.
    pub max_batch: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            trials: 1000,
            seed: 42,
            step: 1e-6,
            tolerance: 1e-5,
            gradient_floor: 1e-8,
            max_batch: 8,
        }
    }
}

/// The single worst entry seen while checking one loss kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstEntry {
    pub trial: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: LossKind,
    pub trials: usize,
    pub entries_checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub worst: Option<WorstEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: max relative error {:.3e} over {} gradient entries ({} batches): {}",
            self.kind,
            self.max_rel_error,
            self.entries_checked,
            self.trials,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

const R_CHOICES: [f64; 5] = [0.5, 0.6, 2.0 / 3.0, 0.8, 1.0];
const N_CHOICES: [u32; 3] = [1, 3, 5];

fn random_case(rng: &mut rng::SeededRng, max_batch: usize) -> (BatchTarget, Probabilities) {
    let m = 1 + rng::below(rng, max_batch as u64) as usize;
    let mut labels = Vec::with_capacity(m);
    let mut votes = Vec::with_capacity(m);
    let mut agreements = Vec::with_capacity(m);
    let mut preds = Vec::with_capacity(m);
    for _ in 0..m {
        labels.push(rng::below(rng, 2) as u8);
        votes.push(*rng::choose(rng, &N_CHOICES));
        agreements.push(*rng::choose(rng, &R_CHOICES));
        preds.push(0.01 + 0.98 * rng::unit_f64(rng));
    }
    (
        BatchTarget::new(labels, votes, agreements).expect("generated targets are valid"),
        Probabilities::new(preds),
    )
}

fn central_difference(kind: LossKind, preds: &[f64], target: &BatchTarget, index: usize, step: f64) -> f64 {
    let mut plus = preds.to_vec();
    plus[index] += step;
    let mut minus = preds.to_vec();
    minus[index] -= step;
    let loss_plus = batch_loss(kind, &Probabilities::new(plus), target).expect("lengths match");
    let loss_minus = batch_loss(kind, &Probabilities::new(minus), target).expect("lengths match");
    (loss_plus - loss_minus) / (2.0 * step)
}

/// Checks an arbitrary gradient function against central differences.
/// Exposed so a deliberately broken gradient can be fed in to prove the
/// harness catches it.
pub fn check_kind_with<G>(kind: LossKind, cfg: &GradCheckConfig, gradient: G) -> GradCheckReport
where
    G: Fn(&Probabilities, &BatchTarget) -> Vec<f64>,
{
    let mut rng = rng::seeded(cfg.seed);
    let mut report = GradCheckReport {
        kind,
        trials: cfg.trials,
        entries_checked: 0,
        max_rel_error: 0.0,
        tolerance: cfg.tolerance,
        worst: None,
    };
    for trial in 0..cfg.trials {
        let (target, preds) = random_case(&mut rng, cfg.max_batch);
        let analytic = gradient(&preds, &target);
        for (index, &entry) in analytic.iter().enumerate() {
            if entry.abs() <= cfg.gradient_floor {
                continue;
            }
            let numeric = central_difference(kind, preds.as_slice(), &target, index, cfg.step);
            let rel_error = (entry - numeric).abs() / entry.abs().max(numeric.abs());
            report.entries_checked += 1;
            if rel_error > report.max_rel_error {
                report.max_rel_error = rel_error;
                report.worst = Some(WorstEntry {
                    trial,
                    index,
                    analytic: entry,
                    numeric,
                    rel_error,
                });
            }
        }
    }
    report
}

/// Checks the crate's analytic gradient for one loss kind.
pub fn check_kind(kind: LossKind, cfg: &GradCheckConfig) -> GradCheckReport {
    check_kind_with(kind, cfg, |p, t| {
        grad_wrt_pred(kind, p, t).expect("lengths match")
    })
}

/// Runs the finite-difference suite for all loss kinds.
pub fn check_all(cfg: &GradCheckConfig) -> Vec<GradCheckReport> {
    LossKind::ALL.iter().map(|&kind| check_kind(kind, cfg)).collect()
}
