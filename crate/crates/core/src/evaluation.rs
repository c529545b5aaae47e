//! Model-facing metrics: target selection accuracy, reference resolution
//! accuracy and exact match grouped by gold referent count, the REF/TSEL
//! correlation, and mean ± sd summaries over seeds.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::pearson;
use crate::math;
use crate::model::{GroundingModel, ModelError, ModelExample};
use crate::scenario::{Player, ViewMask, VIEW_SIZE};
use crate::selfplay::SuccessRow;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyTestSplit,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefOutcome {
    pub predicted: ViewMask,
    pub gold: ViewMask,
}

impl RefOutcome {
    /// Entity decisions (of 7) that match the gold set.
    pub fn correct_entities(&self) -> usize {
        VIEW_SIZE - ((self.predicted.0 ^ self.gold.0) & ViewMask::ALL.0).count_ones() as usize
    }

    pub fn exact(&self) -> bool {
        self.predicted == self.gold
    }
}

/// Predictions of one example (one dialogue from one player's perspective).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub dialogue_id: String,
    pub player: Player,
    pub tsel_correct: Option<bool>,
    pub refs: Vec<RefOutcome>,
}

impl ExampleOutcome {
    pub fn ref_entity_accuracy(&self) -> Option<f64> {
        (!self.refs.is_empty()).then(|| {
            self.refs.iter().map(RefOutcome::correct_entities).sum::<usize>() as f64 / (VIEW_SIZE * self.refs.len()) as f64
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub referents: usize,
    pub count: usize,
    pub entity_accuracy: Option<f64>,
    pub exact_match: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tsel_accuracy: Option<f64>,
    pub tsel_examples: usize,
    pub ref_entity_accuracy: Option<f64>,
    pub ref_exact_match: Option<f64>,
    pub ref_markables: usize,
    /// One row per gold referent count 0..=7.
    pub grouped: Vec<GroupRow>,
    /// Pearson ρ between per-example REF entity accuracy and TSEL success;
    /// `None` when either series has zero variance.
    pub ref_tsel_correlation: Option<f64>,
    pub correlation_examples: usize,
}

/// Aggregates per-example outcomes into a report.
pub fn score_outcomes(outcomes: &[ExampleOutcome]) -> Result<EvalReport, EvalError> {
    let tsel: Vec<bool> = outcomes.iter().filter_map(|o| o.tsel_correct).collect();
    let refs: Vec<&RefOutcome> = outcomes.iter().flat_map(|o| &o.refs).collect();
    if tsel.is_empty() && refs.is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let mut grouped: Vec<GroupRow> = (0..=VIEW_SIZE)
        .map(|referents| GroupRow { referents, count: 0, entity_accuracy: None, exact_match: None })
        .collect();
    let mut correct = [0usize; VIEW_SIZE + 1];
    let mut exact = [0usize; VIEW_SIZE + 1];
    for r in &refs {
        let g = r.gold.len();
        grouped[g].count += 1;
        correct[g] += r.correct_entities();
        exact[g] += usize::from(r.exact());
    }
    for row in &mut grouped {
        row.entity_accuracy = ratio(correct[row.referents], VIEW_SIZE * row.count);
        row.exact_match = ratio(exact[row.referents], row.count);
    }

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for o in outcomes {
        if let (Some(acc), Some(t)) = (o.ref_entity_accuracy(), o.tsel_correct) {
            xs.push(acc);
            ys.push(if t { 1.0 } else { 0.0 });
        }
    }
    Ok(EvalReport {
        tsel_accuracy: ratio(tsel.iter().filter(|t| **t).count(), tsel.len()),
        tsel_examples: tsel.len(),
        ref_entity_accuracy: ratio(correct.iter().sum(), VIEW_SIZE * refs.len()),
        ref_exact_match: ratio(exact.iter().sum(), refs.len()),
        ref_markables: refs.len(),
        grouped,
        ref_tsel_correlation: pearson(&xs, &ys),
        correlation_examples: xs.len(),
    })
}

/// Outcome of one example: TSEL argmax against the player's selection and
/// REF predictions thresholded at 0.5.
pub fn example_outcome(model: &GroundingModel, ex: &ModelExample) -> Result<ExampleOutcome, ModelError> {
    let p = model.predict(ex)?;
    let tsel_correct = match (p.tsel, ex.target) {
        (Some(probs), Some(t)) => Some(argmax(&probs) == t),
        _ => None,
    };
    let refs = match p.refs {
        Some(rows) => ex
            .refs
            .iter()
            .zip(rows)
            .map(|(r, probs)| RefOutcome {
                predicted: ViewMask::from_positions((0..VIEW_SIZE).filter(|&i| probs[i] > 0.5)),
                gold: r.gold,
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(ExampleOutcome { dialogue_id: ex.dialogue_id.clone(), player: ex.player, tsel_correct, refs })
}

pub fn evaluate_model(model: &GroundingModel, examples: &[ModelExample]) -> Result<(EvalReport, Vec<ExampleOutcome>), EvalError> {
    let outcomes = examples.iter().map(|e| example_outcome(model, e)).collect::<Result<Vec<_>, _>>()?;
    Ok((score_outcomes(&outcomes)?, outcomes))
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

/// Pearson correlation between per-unit REF accuracy and binary TSEL success.
pub fn ref_tsel_correlation(ref_accuracy: &[f64], tsel_success: &[bool]) -> Option<f64> {
    let ys: Vec<f64> = tsel_success.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    pearson(ref_accuracy, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub n: usize,
}

pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Some(MeanSd { mean, sd: math::sqrt(var), n })
}

/// One row of the model-results table: metrics over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub seeds: usize,
    pub tsel_accuracy: Option<MeanSd>,
    pub ref_entity_accuracy: Option<MeanSd>,
    pub ref_exact_match: Option<MeanSd>,
    pub ref_tsel_correlation: Option<MeanSd>,
    /// Selfplay success per shared-entity count.
    pub selfplay: Vec<(usize, MeanSd)>,
}

pub fn summarize_seeds(variant: &str, reports: &[EvalReport], selfplay: &[Vec<SuccessRow>]) -> VariantSummary {
    let col = |f: &dyn Fn(&EvalReport) -> Option<f64>| mean_sd(&reports.iter().filter_map(f).collect::<Vec<_>>());
    let mut ks: Vec<usize> = selfplay.iter().flatten().map(|r| r.num_shared).collect();
    ks.sort_unstable();
    ks.dedup();
    let selfplay = ks
        .into_iter()
        .filter_map(|k| {
            let rates: Vec<f64> = selfplay.iter().flatten().filter(|r| r.num_shared == k).map(|r| r.rate).collect();
            mean_sd(&rates).map(|m| (k, m))
        })
        .collect();
    VariantSummary {
        variant: variant.into(),
        seeds: reports.len(),
        tsel_accuracy: col(&|r| r.tsel_accuracy),
        ref_entity_accuracy: col(&|r| r.ref_entity_accuracy),
        ref_exact_match: col(&|r| r.ref_exact_match),
        ref_tsel_correlation: col(&|r| r.ref_tsel_correlation),
        selfplay,
    }
}

/// One row of the grouped REF table: metrics over seeds for one gold count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub referents: usize,
    pub entity_accuracy: Option<MeanSd>,
    pub exact_match: Option<MeanSd>,
    pub count: Option<MeanSd>,
}

pub fn summarize_groups(reports: &[EvalReport]) -> Vec<GroupSummary> {
    (0..=VIEW_SIZE)
        .map(|g| {
            let rows: Vec<&GroupRow> = reports.iter().filter_map(|r| r.grouped.get(g)).collect();
            GroupSummary {
                referents: g,
                entity_accuracy: mean_sd(&rows.iter().filter_map(|r| r.entity_accuracy).collect::<Vec<_>>()),
                exact_match: mean_sd(&rows.iter().filter_map(|r| r.exact_match).collect::<Vec<_>>()),
                count: mean_sd(&rows.iter().map(|r| r.count as f64).collect::<Vec<_>>()),
            }
        })
        .collect()
}
