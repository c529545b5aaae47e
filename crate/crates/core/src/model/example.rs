use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::vocab::{Vocab, EOS, SELECTION, THEM, YOU};
use super::ModelError;
use crate::agreement::GoldReferents;
use crate::corpus::{AnnotatedCorpus, Dialogue};
use crate::scenario::{normalized_view, NormalizedEntity, Player, SizeRange, ViewMask, VIEW_SIZE};

/// A REF target: three stream positions forming the query and the gold set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefQuery {
    pub markable_id: String,
    pub start: usize,
    pub end: usize,
    pub utterance_end: usize,
    pub gold: ViewMask,
}

impl RefQuery {
    pub fn positions(&self) -> [usize; 3] {
        [self.start, self.end, self.utterance_end]
    }
}

/// One dialogue serialized from one player's perspective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExample {
    pub dialogue_id: String,
    pub player: Player,
    pub entities: Vec<NormalizedEntity>,
    pub tokens: Vec<usize>,
    /// `predict[t]` marks `tokens[t]` as a next-token target.
    pub predict: Vec<bool>,
    pub refs: Vec<RefQuery>,
    /// View position of the player's selection.
    pub target: Option<usize>,
    /// Stream position of the first token of each utterance.
    pub utterance_starts: Vec<usize>,
}

impl ModelExample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dial_targets(&self) -> usize {
        self.predict.iter().skip(1).filter(|p| **p).count()
    }
}

/// Serializes `dialogue` for `player`: each message becomes
/// `[YOU:|THEM:, tokens…, <eos>]`, and the stream ends with the first
/// selector's speaker token followed by `<selection>`. Speaker tokens are
/// inputs only; every other token is a next-token target. REF queries cover
/// the player's own non-generic markables with a non-dropped gold entry.
pub fn build_example(
    corpus: &AnnotatedCorpus,
    gold: &GoldReferents,
    dialogue: &Dialogue,
    player: Player,
    vocab: &Vocab,
    sizes: SizeRange,
) -> Result<ModelExample, ModelError> {
    let scenario = corpus.scenario_of(dialogue);
    let entities = normalized_view(scenario, player, sizes)?;
    if entities.len() != VIEW_SIZE {
        return Err(ModelError::WrongEntityCount(entities.len()));
    }
    let marker = |speaker: Player| vocab.id(if speaker == player { YOU } else { THEM });

    let mut tokens = Vec::new();
    let mut predict = Vec::new();
    let mut starts = Vec::new();
    let mut ends = Vec::new();
    for u in dialogue.utterances() {
        tokens.push(marker(u.speaker));
        predict.push(false);
        starts.push(tokens.len());
        for t in u.tokens {
            tokens.push(vocab.id(t));
            predict.push(true);
        }
        ends.push(tokens.len());
        tokens.push(vocab.id(EOS));
        predict.push(true);
    }
    if let Some(first) = dialogue.first_selector() {
        tokens.push(marker(first));
        predict.push(false);
        tokens.push(vocab.id(SELECTION));
        predict.push(true);
    }

    let view = scenario.view(player);
    let target = dialogue.selection(player).and_then(|id| view.position_of(id));

    let mut refs = Vec::new();
    for m in corpus.markables_of(&dialogue.id) {
        if m.speaker != player || m.flags.generic {
            continue;
        }
        let Some(mask) = gold.referents(&m.id) else { continue };
        let (Some(&s), Some(&e)) = (starts.get(m.utterance_index), ends.get(m.utterance_index)) else {
            return Err(ModelError::MarkableOutOfStream(m.id.clone()));
        };
        if m.end_token == 0 || s + m.end_token > e {
            return Err(ModelError::MarkableOutOfStream(m.id.clone()));
        }
        refs.push(RefQuery {
            markable_id: m.id.clone(),
            start: s + m.start_token,
            end: s + m.end_token - 1,
            utterance_end: e,
            gold: mask,
        });
    }

    Ok(ModelExample {
        dialogue_id: dialogue.id.to_string(),
        player,
        entities,
        tokens,
        predict,
        refs,
        target,
        utterance_starts: starts,
    })
}

/// Both perspectives of every dialogue, in dialogue order.
pub fn build_examples(
    corpus: &AnnotatedCorpus,
    gold: &GoldReferents,
    vocab: &Vocab,
    sizes: SizeRange,
) -> Result<Vec<ModelExample>, ModelError> {
    let mut out = Vec::with_capacity(2 * corpus.dialogues().len());
    for d in corpus.dialogues() {
        for p in [Player::A, Player::B] {
            out.push(build_example(corpus, gold, d, p, vocab, sizes)?);
        }
    }
    Ok(out)
}
