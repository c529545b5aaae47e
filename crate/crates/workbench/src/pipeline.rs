//! End-to-end workflows shared by the CLI and the acceptance suite.

use std::collections::BTreeMap;

use commonground::agreement::{span_agreement, GoldReferents, SpanAgreement, SpanSet};
use commonground::corpus::DatasetSplit;
use commonground::model::{build_examples, train, EpochRecord, GroundingModel, ModelConfig, ModelExample, TrainOutcome, Vocab};
use commonground::scenario::{generate_scenarios, ScenarioConfig, SizeRange};
use commonground::selfplay::{GameTranscript, ModelAgent, ProtocolConfig, ScriptedAgent, ScriptedPolicy};
use commonground::tagger::{tagging_examples, train_tagger, Tagger, TaggerConfig, TaggerEpoch, TaggerOutcome, TaggingExample};
use commonground::{AnnotatedCorpus, Scenario};

use crate::error::{Error, Result};
use crate::parallel::{run_batch, Parallel};

/// Size range spanned by the corpus entities; falls back to `fallback` when
/// all sizes are equal.
pub fn corpus_sizes(corpus: &AnnotatedCorpus, fallback: SizeRange) -> SizeRange {
    let sizes = corpus.scenarios().iter().flat_map(|s| s.entities.iter().map(|e| e.size));
    let (min, max) = sizes.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if min.is_finite() && max > min {
        SizeRange { min, max }
    } else {
        fallback
    }
}

/// Vocabulary over the training dialogues.
pub fn train_vocab(corpus: &AnnotatedCorpus, split: &DatasetSplit) -> Vocab {
    let train = corpus.subset(&split.train);
    Vocab::build(train.vocabulary().keys().map(String::as_str))
}

#[derive(Debug, Clone)]
pub struct ModelData {
    pub vocab: Vocab,
    pub sizes: SizeRange,
    pub train: Vec<ModelExample>,
    pub valid: Vec<ModelExample>,
    pub test: Vec<ModelExample>,
}

pub fn model_data(corpus: &AnnotatedCorpus, gold: &GoldReferents, split: &DatasetSplit, sizes: SizeRange) -> Result<ModelData> {
    let vocab = train_vocab(corpus, split);
    let part = |ids: &[String]| build_examples(&corpus.subset(ids), gold, &vocab, sizes);
    Ok(ModelData {
        train: part(&split.train)?,
        valid: part(&split.valid)?,
        test: part(&split.test)?,
        vocab,
        sizes,
    })
}

pub fn train_model(config: ModelConfig, data: &ModelData, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    let model = GroundingModel::new(config, data.vocab.clone())?;
    Ok(train(model, &data.train, &data.valid, &Parallel, on_epoch)?)
}

#[derive(Debug, Clone)]
pub struct TaggingData {
    pub vocab: Vocab,
    pub train: Vec<TaggingExample>,
    pub valid: Vec<TaggingExample>,
    pub test: Vec<TaggingExample>,
}

pub fn tagging_data(corpus: &AnnotatedCorpus, split: &DatasetSplit) -> Result<TaggingData> {
    let vocab = train_vocab(corpus, split);
    let part = |ids: &[String]| tagging_examples(&corpus.subset(ids), &vocab);
    Ok(TaggingData { train: part(&split.train)?, valid: part(&split.valid)?, test: part(&split.test)?, vocab })
}

pub fn train_markable_tagger(config: TaggerConfig, data: &TaggingData, on_epoch: &mut dyn FnMut(&TaggerEpoch)) -> Result<TaggerOutcome> {
    let tagger = Tagger::new(config, data.vocab.clone())?;
    Ok(train_tagger(tagger, &data.train, &data.valid, &Parallel, on_epoch)?)
}

/// `games` scenarios per shared count, in the order of `shared`, with ids
/// `K<k>_<index>`.
pub fn selfplay_scenarios(config: &ScenarioConfig, shared: &[usize], games: usize, seed: u64) -> Result<Vec<Scenario>> {
    let mut out = Vec::with_capacity(shared.len() * games);
    for &k in shared {
        for (i, mut s) in generate_scenarios(config, k, games, seed)?.into_iter().enumerate() {
            s.id = format!("K{k}_{i:04}");
            out.push(s);
        }
    }
    Ok(out)
}

/// Selfplay between two copies of `model`.
pub fn play_model(model: &GroundingModel, sizes: SizeRange, scenarios: &[Scenario], protocol: &ProtocolConfig) -> Result<Vec<GameTranscript>> {
    Ok(run_batch(|| (ModelAgent::new(model, sizes), ModelAgent::new(model, sizes)), scenarios, protocol)?)
}

/// Games between two scripted agents following `policy`.
pub fn play_scripted(policy: ScriptedPolicy, scenarios: &[Scenario], protocol: &ProtocolConfig) -> Result<Vec<GameTranscript>> {
    Ok(run_batch(|| (ScriptedAgent::new(policy), ScriptedAgent::new(policy)), scenarios, protocol)?)
}

/// Per-dialogue markable spans from several annotators: dialogue id →
/// one span list per annotator, with utterance indices local to the dialogue.
pub type SpanAnnotations = BTreeMap<String, Vec<SpanSet>>;

/// Start/end agreement over all multiply-annotated dialogues. Every dialogue
/// must carry the same number of annotators.
pub fn markable_span_agreement(corpus: &AnnotatedCorpus, spans: &SpanAnnotations) -> Result<SpanAgreement> {
    let coders = spans.values().map(Vec::len).max().unwrap_or(0);
    let mut lengths = Vec::new();
    let mut merged: Vec<SpanSet> = vec![Vec::new(); coders];
    for (id, per_annotator) in spans {
        let d = corpus
            .dialogue(id)
            .ok_or_else(|| Error::Usage(format!("span annotations name unknown dialogue {id}")))?;
        if per_annotator.len() != coders {
            return Err(Error::Usage(format!("dialogue {id} has {} span annotators, expected {coders}", per_annotator.len())));
        }
        let offset = lengths.len();
        lengths.extend(d.utterances().map(|u| u.tokens.len()));
        for (a, set) in per_annotator.iter().enumerate() {
            merged[a].extend(set.iter().map(|&(u, s, e)| (u + offset, s, e)));
        }
    }
    Ok(span_agreement(&lengths, &merged)?)
}
