//! Annotated dialogue corpus: dialogues, markables and referent judgements,
//! integrity validation, automatic referent propagation, statistics and
//! dataset splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scenario::{Player, Scenario, ScenarioError, ViewMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Message { speaker: Player, tokens: Vec<String> },
    Selection { speaker: Player, entity_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub scenario_id: String,
    pub events: Vec<Event>,
    /// Task success: both players selected the same entity.
    pub outcome: bool,
}

/// A message of a dialogue, addressed by its index among message events.
#[derive(Debug, Clone, Copy)]
pub struct Utterance<'a> {
    pub speaker: Player,
    pub tokens: &'a [String],
}

impl Dialogue {
    pub fn utterances(&self) -> impl Iterator<Item = Utterance<'_>> {
        self.events.iter().filter_map(|e| match e {
            Event::Message { speaker, tokens } => Some(Utterance { speaker: *speaker, tokens }),
            Event::Selection { .. } => None,
        })
    }

    pub fn utterance(&self, index: usize) -> Option<Utterance<'_>> {
        self.utterances().nth(index)
    }

    pub fn selection(&self, player: Player) -> Option<u32> {
        self.events.iter().find_map(|e| match e {
            Event::Selection { speaker, entity_id } if *speaker == player => Some(*entity_id),
            _ => None,
        })
    }

    /// The player whose selection event comes first.
    pub fn first_selector(&self) -> Option<Player> {
        self.events.iter().find_map(|e| match e {
            Event::Selection { speaker, .. } => Some(*speaker),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkableFlags {
    pub generic: bool,
    pub all_referents: bool,
    pub no_referent: bool,
}

impl MarkableFlags {
    fn count(&self) -> usize {
        self.generic as usize + self.all_referents as usize + self.no_referent as usize
    }
}

/// A referring-expression span `[start_token, end_token)` inside one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Markable {
    pub id: String,
    pub dialogue_id: String,
    pub utterance_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub speaker: Player,
    #[serde(default)]
    pub flags: MarkableFlags,
    #[serde(default)]
    pub anaphora_of: Option<String>,
    #[serde(default)]
    pub cataphora_of: Option<String>,
}

impl Markable {
    pub fn overlaps(&self, other: &Markable) -> bool {
        self.dialogue_id == other.dialogue_id
            && self.utterance_index == other.utterance_index
            && self.start_token < other.end_token
            && other.start_token < self.end_token
    }

    /// Referents are not collected from annotators for these markables.
    pub fn is_automatic(&self) -> bool {
        self.flags.all_referents || self.flags.no_referent || self.anaphora_of.is_some() || self.cataphora_of.is_some()
    }

    pub fn link(&self) -> Option<&str> {
        self.anaphora_of.as_deref().or(self.cataphora_of.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferentJudgement {
    pub markable_id: String,
    pub annotator_id: String,
    /// Entity ids from the speaker's view.
    pub referents: BTreeSet<u32>,
    #[serde(default)]
    pub ambiguous: bool,
    #[serde(default)]
    pub unidentifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{kind} {id}: unknown {target} {target_id}")]
    Dangling { kind: &'static str, id: String, target: &'static str, target_id: String },
    #[error("scenario {id}: {source}")]
    Scenario { id: String, source: ScenarioError },
    #[error("dialogue {id}: {reason}")]
    Dialogue { id: String, reason: String },
    #[error("markable {id}: {reason}")]
    Markable { id: String, reason: String },
    #[error("markables {first} and {second} overlap")]
    Overlap { first: String, second: String },
    #[error("judgement of markable {markable} by {annotator}: {reason}")]
    Judgement { markable: String, annotator: String, reason: String },
    #[error("markable {id} has {count} judgements, at least {min} required")]
    TooFewJudgements { id: String, count: usize, min: usize },
    #[error("cyclic anaphora/cataphora link through markable {0}")]
    CyclicLink(String),
    #[error("markable {id} links to generic markable {target}")]
    LinkToGeneric { id: String, target: String },
    #[error("split needs at least 10 dialogues, got {0}")]
    TooSmallToSplit(usize),
}

fn markable_err(m: &Markable, reason: impl ToString) -> CorpusError {
    CorpusError::Markable { id: m.id.clone(), reason: reason.to_string() }
}

/// Validation knobs applied on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationPolicy {
    /// Minimum judgement count for any markable that has judgements.
    pub min_judgements: usize,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        ValidationPolicy { min_judgements: 3 }
    }
}

/// A validated, immutable corpus. Element order is preserved from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCorpus {
    scenarios: Vec<Scenario>,
    dialogues: Vec<Dialogue>,
    markables: Vec<Markable>,
    judgements: Vec<ReferentJudgement>,
    scenario_index: BTreeMap<String, usize>,
    dialogue_index: BTreeMap<String, usize>,
    markable_index: BTreeMap<String, usize>,
    judgements_by_markable: BTreeMap<String, Vec<usize>>,
    markables_by_dialogue: BTreeMap<String, Vec<usize>>,
    vocabulary: BTreeMap<String, usize>,
}

fn index_by<T>(
    items: &[T],
    kind: &'static str,
    key: impl Fn(&T) -> &str,
) -> Result<BTreeMap<String, usize>, CorpusError> {
    let mut index = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        if index.insert(key(item).to_string(), i).is_some() {
            return Err(CorpusError::DuplicateId { kind, id: key(item).to_string() });
        }
    }
    Ok(index)
}

impl AnnotatedCorpus {
    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), Vec::new(), Vec::new()).expect("empty corpus is valid")
    }

    pub fn new(
        scenarios: Vec<Scenario>,
        dialogues: Vec<Dialogue>,
        markables: Vec<Markable>,
        judgements: Vec<ReferentJudgement>,
    ) -> Result<Self, CorpusError> {
        Self::with_policy(scenarios, dialogues, markables, judgements, ValidationPolicy::default())
    }

    pub fn with_policy(
        scenarios: Vec<Scenario>,
        dialogues: Vec<Dialogue>,
        markables: Vec<Markable>,
        judgements: Vec<ReferentJudgement>,
        policy: ValidationPolicy,
    ) -> Result<Self, CorpusError> {
        let scenario_index = index_by(&scenarios, "scenario", |s| &s.id)?;
        let dialogue_index = index_by(&dialogues, "dialogue", |d| &d.id)?;
        let markable_index = index_by(&markables, "markable", |m| &m.id)?;

        for s in &scenarios {
            s.check_structure().map_err(|source| CorpusError::Scenario { id: s.id.clone(), source })?;
        }

        let mut vocabulary = BTreeMap::new();
        for d in &dialogues {
            let scenario = scenario_index.get(&d.scenario_id).map(|&i| &scenarios[i]).ok_or_else(|| {
                CorpusError::Dangling {
                    kind: "dialogue",
                    id: d.id.clone(),
                    target: "scenario",
                    target_id: d.scenario_id.clone(),
                }
            })?;
            validate_dialogue(d, scenario)?;
            for u in d.utterances() {
                for t in u.tokens {
                    *vocabulary.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }

        let mut markables_by_dialogue: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, m) in markables.iter().enumerate() {
            let d = dialogue_index.get(&m.dialogue_id).map(|&i| &dialogues[i]).ok_or_else(|| CorpusError::Dangling {
                kind: "markable",
                id: m.id.clone(),
                target: "dialogue",
                target_id: m.dialogue_id.clone(),
            })?;
            validate_markable(m, d)?;
            markables_by_dialogue.entry(m.dialogue_id.clone()).or_default().push(i);
        }
        for m in &markables {
            for target in [&m.anaphora_of, &m.cataphora_of].into_iter().flatten() {
                let t = markable_index.get(target).map(|&i| &markables[i]).ok_or_else(|| CorpusError::Dangling {
                    kind: "markable",
                    id: m.id.clone(),
                    target: "markable",
                    target_id: target.clone(),
                })?;
                if t.dialogue_id != m.dialogue_id || t.utterance_index != m.utterance_index {
                    return Err(markable_err(m, "link leaves its utterance"));
                }
                if t.id == m.id {
                    return Err(CorpusError::CyclicLink(m.id.clone()));
                }
            }
        }
        for idxs in markables_by_dialogue.values_mut() {
            idxs.sort_by_key(|&i| (markables[i].utterance_index, markables[i].start_token));
            for w in idxs.windows(2) {
                let (a, b) = (&markables[w[0]], &markables[w[1]]);
                if a.overlaps(b) {
                    return Err(CorpusError::Overlap { first: a.id.clone(), second: b.id.clone() });
                }
            }
        }

        let mut judgements_by_markable: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, j) in judgements.iter().enumerate() {
            let jerr = |reason: &str| CorpusError::Judgement {
                markable: j.markable_id.clone(),
                annotator: j.annotator_id.clone(),
                reason: reason.to_string(),
            };
            let m = markable_index.get(&j.markable_id).map(|&i| &markables[i]).ok_or_else(|| jerr("unknown markable"))?;
            let d = &dialogues[dialogue_index[&m.dialogue_id]];
            let view = scenarios[scenario_index[&d.scenario_id]].view(m.speaker);
            if j.referents.len() > view.visible.len() || j.referents.iter().any(|id| !view.contains(*id)) {
                return Err(jerr("referent outside the speaker's view"));
            }
            let list = judgements_by_markable.entry(j.markable_id.clone()).or_default();
            if list.iter().any(|&k| judgements[k].annotator_id == j.annotator_id) {
                return Err(jerr("duplicate annotator"));
            }
            list.push(i);
        }
        for (id, list) in &judgements_by_markable {
            if list.len() < policy.min_judgements {
                return Err(CorpusError::TooFewJudgements {
                    id: id.clone(),
                    count: list.len(),
                    min: policy.min_judgements,
                });
            }
        }

        Ok(AnnotatedCorpus {
            scenarios,
            dialogues,
            markables,
            judgements,
            scenario_index,
            dialogue_index,
            markable_index,
            judgements_by_markable,
            markables_by_dialogue,
            vocabulary,
        })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn markables(&self) -> &[Markable] {
        &self.markables
    }

    pub fn judgements(&self) -> &[ReferentJudgement] {
        &self.judgements
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenario_index.get(id).map(|&i| &self.scenarios[i])
    }

    pub fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        self.dialogue_index.get(id).map(|&i| &self.dialogues[i])
    }

    pub fn markable(&self, id: &str) -> Option<&Markable> {
        self.markable_index.get(id).map(|&i| &self.markables[i])
    }

    pub fn scenario_of(&self, dialogue: &Dialogue) -> &Scenario {
        &self.scenarios[self.scenario_index[&dialogue.scenario_id]]
    }

    /// Markables of a dialogue ordered by utterance and start token.
    pub fn markables_of(&self, dialogue_id: &str) -> impl Iterator<Item = &Markable> {
        self.markables_by_dialogue
            .get(dialogue_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.markables[i])
    }

    pub fn judgements_of(&self, markable_id: &str) -> impl Iterator<Item = &ReferentJudgement> {
        self.judgements_by_markable
            .get(markable_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.judgements[i])
    }

    /// Markables that carry at least one judgement, in corpus order.
    pub fn judged_markables(&self) -> impl Iterator<Item = &Markable> {
        self.markables.iter().filter(|m| self.judgements_by_markable.contains_key(&m.id))
    }

    /// Token → occurrence count over all messages.
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Tokens covered by a markable span.
    pub fn markable_tokens(&self, m: &Markable) -> &[String] {
        let d = self.dialogue(&m.dialogue_id).expect("validated");
        &d.utterance(m.utterance_index).expect("validated").tokens[m.start_token..m.end_token]
    }

    /// The speaker's view-position mask for a judgement's referents.
    pub fn judgement_mask(&self, j: &ReferentJudgement) -> ViewMask {
        let m = self.markable(&j.markable_id).expect("validated");
        let view = self.scenario_of(self.dialogue(&m.dialogue_id).expect("validated")).view(m.speaker);
        ViewMask::from_ids(view, &j.referents).expect("validated")
    }

    /// Sub-corpus restricted to the given dialogues; scenarios are kept only
    /// when referenced.
    pub fn subset(&self, dialogue_ids: &[String]) -> AnnotatedCorpus {
        let keep: BTreeSet<&str> = dialogue_ids.iter().map(String::as_str).collect();
        let dialogues: Vec<Dialogue> = self.dialogues.iter().filter(|d| keep.contains(d.id.as_str())).cloned().collect();
        let scenario_ids: BTreeSet<&str> = dialogues.iter().map(|d| d.scenario_id.as_str()).collect();
        let scenarios = self.scenarios.iter().filter(|s| scenario_ids.contains(s.id.as_str())).cloned().collect();
        let markables: Vec<Markable> =
            self.markables.iter().filter(|m| keep.contains(m.dialogue_id.as_str())).cloned().collect();
        let markable_ids: BTreeSet<&str> = markables.iter().map(|m| m.id.as_str()).collect();
        let judgements =
            self.judgements.iter().filter(|j| markable_ids.contains(j.markable_id.as_str())).cloned().collect();
        AnnotatedCorpus::with_policy(scenarios, dialogues, markables, judgements, ValidationPolicy { min_judgements: 0 })
            .expect("subset of a valid corpus is valid")
    }

    pub fn into_parts(self) -> (Vec<Scenario>, Vec<Dialogue>, Vec<Markable>, Vec<ReferentJudgement>) {
        (self.scenarios, self.dialogues, self.markables, self.judgements)
    }
}

fn validate_dialogue(d: &Dialogue, scenario: &Scenario) -> Result<(), CorpusError> {
    let derr = |reason: &str| CorpusError::Dialogue { id: d.id.clone(), reason: reason.to_string() };
    let mut selections = [None, None];
    for e in &d.events {
        if let Event::Selection { speaker, entity_id } = e {
            let slot = &mut selections[speaker.index()];
            if slot.is_some() {
                return Err(derr("more than one selection by a player"));
            }
            if !scenario.view(*speaker).contains(*entity_id) {
                return Err(derr("selected entity not visible to its selector"));
            }
            *slot = Some(*entity_id);
        }
    }
    match selections {
        [Some(a), Some(b)] => {
            if d.outcome != (a == b) {
                return Err(derr("outcome disagrees with the selections"));
            }
            Ok(())
        }
        _ => Err(derr("each player must select exactly once")),
    }
}

fn validate_markable(m: &Markable, d: &Dialogue) -> Result<(), CorpusError> {
    let u = d.utterance(m.utterance_index).ok_or_else(|| markable_err(m, "utterance index out of range"))?;
    if m.start_token >= m.end_token {
        return Err(markable_err(m, "end_token must exceed start_token"));
    }
    if m.end_token > u.tokens.len() {
        return Err(markable_err(m, "span exceeds the utterance"));
    }
    if m.speaker != u.speaker {
        return Err(markable_err(m, "speaker differs from the utterance speaker"));
    }
    if m.flags.count() > 1 {
        return Err(markable_err(m, "more than one flag set"));
    }
    Ok(())
}

/// Referent assignment of one markable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoldEntry {
    Referents(ViewMask),
    /// A majority of annotators found the referents unidentifiable.
    Dropped,
}

/// Assigns referents to flagged and linked markables.
///
/// `base` holds the assignments of manually judged markables. Links are
/// followed transitively; a link to a markable without an assignment yields
/// no entry. Generic markables get no entry.
pub fn propagate_auto_referents(
    corpus: &AnnotatedCorpus,
    base: &BTreeMap<String, GoldEntry>,
) -> Result<BTreeMap<String, GoldEntry>, CorpusError> {
    let mut out = BTreeMap::new();
    for m in corpus.markables() {
        if m.flags.generic || !m.is_automatic() {
            continue;
        }
        if let Some(entry) = resolve_auto(corpus, base, m)? {
            out.insert(m.id.clone(), entry);
        }
    }
    Ok(out)
}

fn resolve_auto(
    corpus: &AnnotatedCorpus,
    base: &BTreeMap<String, GoldEntry>,
    start: &Markable,
) -> Result<Option<GoldEntry>, CorpusError> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut current = start;
    loop {
        if !seen.insert(current.id.as_str()) {
            return Err(CorpusError::CyclicLink(current.id.clone()));
        }
        if current.flags.no_referent {
            return Ok(Some(GoldEntry::Referents(ViewMask::EMPTY)));
        }
        if current.flags.all_referents {
            return Ok(Some(GoldEntry::Referents(ViewMask::ALL)));
        }
        match current.link() {
            Some(target) => {
                let next = corpus.markable(target).expect("validated link");
                if next.flags.generic {
                    return Err(CorpusError::LinkToGeneric { id: current.id.clone(), target: next.id.clone() });
                }
                current = next;
            }
            None => {
                if current.id == start.id {
                    return Ok(None);
                }
                return Ok(base.get(&current.id).copied());
            }
        }
    }
}

/// Counts behind the markable-detection and referent-identification tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub markables: usize,
    pub generic: usize,
    pub all_referents: usize,
    pub no_referent: usize,
    pub anaphora: usize,
    pub cataphora: usize,
    /// markables − all_referents − no_referent − anaphora − cataphora
    pub manual_markables: usize,
    pub judged_markables: usize,
    pub judgements: usize,
    pub ambiguous_pct: f64,
    pub unidentifiable_pct: f64,
    pub vocabulary_size: usize,
}

pub fn corpus_stats(corpus: &AnnotatedCorpus) -> CorpusStats {
    let ms = corpus.markables();
    let count = |f: &dyn Fn(&Markable) -> bool| ms.iter().filter(|m| f(m)).count();
    let all_referents = count(&|m| m.flags.all_referents);
    let no_referent = count(&|m| m.flags.no_referent);
    let anaphora = count(&|m| m.anaphora_of.is_some());
    let cataphora = count(&|m| m.cataphora_of.is_some());
    let js = corpus.judgements();
    let pct = |n: usize| if js.is_empty() { 0.0 } else { 100.0 * n as f64 / js.len() as f64 };
    CorpusStats {
        dialogues: corpus.dialogues().len(),
        markables: ms.len(),
        generic: count(&|m| m.flags.generic),
        all_referents,
        no_referent,
        anaphora,
        cataphora,
        manual_markables: ms.len().saturating_sub(all_referents + no_referent + anaphora + cataphora),
        judged_markables: corpus.judged_markables().count(),
        judgements: js.len(),
        ambiguous_pct: pct(js.iter().filter(|j| j.ambiguous).count()),
        unidentifiable_pct: pct(js.iter().filter(|j| j.unidentifiable).count()),
        vocabulary_size: corpus.vocabulary().len(),
    }
}

/// Dialogue-level train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles dialogue ids with `seed`; validation and test each get `⌊N/10⌋`.
pub fn split_dataset(dialogue_ids: &[String], seed: u64) -> Result<DatasetSplit, CorpusError> {
    let n = dialogue_ids.len();
    if n < 10 {
        return Err(CorpusError::TooSmallToSplit(n));
    }
    let mut ids = dialogue_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut rng::seeded(seed));
    let tenth = n / 10;
    let test = ids.split_off(n - tenth);
    let valid = ids.split_off(n - 2 * tenth);
    Ok(DatasetSplit { train: ids, valid, test })
}
