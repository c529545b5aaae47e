//! Rayon-backed batch workers. Work items run concurrently but results are
//! collected and reduced in input order, so every output matches the
//! sequential implementation exactly.

use commonground::evaluation::{example_outcome, score_outcomes, EvalError, EvalReport, ExampleOutcome};
use commonground::model::{example_gradient, GradientBackend, GroundingModel, LossBreakdown, ModelError, ModelExample};
use commonground::neural::Gradients;
use commonground::selfplay::{game_rng, run_game, GameAgent, GameTranscript, ProtocolConfig, SelfplayError};
use commonground::tagger::{score_tags, tagger_example_gradient, Tag, Tagger, TaggerBackend, TaggerError, TaggerMetrics, TaggingExample};
use commonground::Scenario;
use rayon::prelude::*;

/// Installs the global worker pool; `None` lets rayon pick.
pub fn configure_threads(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl GradientBackend for Parallel {
    fn batch_gradient(
        &self,
        model: &GroundingModel,
        batch: &[&ModelExample],
        seeds: &[u64],
    ) -> Result<(Gradients, LossBreakdown), ModelError> {
        let scale = 1.0 / batch.len() as f64;
        let parts: Vec<(Gradients, LossBreakdown)> = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(ex, seed)| example_gradient(model, ex, *seed, scale))
            .collect::<Result<_, _>>()?;
        let mut total = model.store().gradients();
        let mut loss = LossBreakdown::default();
        for (g, l) in &parts {
            total.add(g);
            loss.merge(l);
        }
        Ok((total, loss))
    }

    fn evaluate(&self, model: &GroundingModel, examples: &[ModelExample]) -> Result<LossBreakdown, ModelError> {
        let parts: Vec<LossBreakdown> =
            examples.par_iter().map(|ex| model.example_loss(ex, None, None, 1.0)).collect::<Result<_, _>>()?;
        let mut loss = LossBreakdown::default();
        for l in &parts {
            loss.merge(l);
        }
        Ok(loss)
    }
}

impl TaggerBackend for Parallel {
    fn batch_gradient(
        &self,
        tagger: &Tagger,
        batch: &[&TaggingExample],
        seeds: &[u64],
    ) -> Result<(Gradients, f64), TaggerError> {
        let scale = 1.0 / batch.len() as f64;
        let parts: Vec<(Gradients, f64)> = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(ex, seed)| tagger_example_gradient(tagger, ex, *seed, scale))
            .collect::<Result<_, _>>()?;
        let mut total = tagger.store().gradients();
        let mut loss = 0.0;
        for (g, l) in &parts {
            total.add(g);
            loss += l * scale;
        }
        Ok((total, loss))
    }

    fn evaluate(&self, tagger: &Tagger, examples: &[TaggingExample]) -> TaggerMetrics {
        let pairs: Vec<(Vec<Tag>, Vec<Tag>)> =
            examples.par_iter().map(|e| (tagger.tag_ids(&e.tokens), e.tags.clone())).collect();
        score_tags(&pairs)
    }
}

pub fn evaluate_model(model: &GroundingModel, examples: &[ModelExample]) -> Result<(EvalReport, Vec<ExampleOutcome>), EvalError> {
    let outcomes: Vec<ExampleOutcome> =
        examples.par_iter().map(|e| example_outcome(model, e)).collect::<Result<_, _>>()?;
    Ok((score_outcomes(&outcomes)?, outcomes))
}

/// Plays game `i` on `scenarios[i]` with fresh agents from `make` and the
/// game's own rng stream.
pub fn run_batch<A, F>(make: F, scenarios: &[Scenario], protocol: &ProtocolConfig) -> Result<Vec<GameTranscript>, SelfplayError>
where
    A: GameAgent,
    F: Fn() -> (A, A) + Sync,
{
    protocol.validate()?;
    Ok(scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (mut a, mut b) = make();
            run_game(i, &mut a, &mut b, s, protocol, &mut game_rng(protocol, i))
        })
        .collect())
}
