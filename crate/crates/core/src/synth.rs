//! Templated synthetic corpora with noisy referent judgements.
//!
//! Dialogues follow a fixed propose/confirm protocol: one player describes an
//! entity of their view by size, color and location; the partner confirms
//! when the entity is shared and otherwise rejects and proposes one of their
//! own. Every corpus passes [`AnnotatedCorpus`] validation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedCorpus, CorpusError, Dialogue, Event, Markable, MarkableFlags, ReferentJudgement};
use crate::rng::{self, Rng};
use crate::scenario::{generate_scenario, normalize_entity, Player, Scenario, ScenarioConfig, ScenarioError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dialogues: usize,
    /// Shared-entity counts drawn uniformly per scenario.
    pub shared: Vec<usize>,
    pub annotators: usize,
    /// Probability that a judgement flips one entity's membership.
    pub noise: f64,
    pub unidentifiable_rate: f64,
    pub ambiguous_rate: f64,
    /// Probability that the second selector picks a random entity.
    pub failure_rate: f64,
    pub max_rounds: usize,
    pub scenario: ScenarioConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dialogues: 100,
            shared: vec![4, 5, 6],
            annotators: 3,
            noise: 0.05,
            unidentifiable_rate: 0.02,
            ambiguous_rate: 0.05,
            failure_rate: 0.1,
            max_rounds: 4,
            scenario: ScenarioConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("synthetic corpus needs at least one shared-entity count and one annotator")]
    InvalidConfig,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub fn size_word(normalized_size: f64) -> &'static str {
    match normalized_size {
        s if s < -0.5 => "tiny",
        s if s < 0.0 => "small",
        s if s < 0.5 => "medium",
        _ => "large",
    }
}

pub fn color_word(color: f64) -> &'static str {
    match color {
        c if c < 64.0 => "black",
        c if c < 128.0 => "dark",
        c if c < 192.0 => "grey",
        _ => "light",
    }
}

struct Builder<'a> {
    id: String,
    scenario: &'a Scenario,
    config: &'a SynthConfig,
    events: Vec<Event>,
    markables: Vec<Markable>,
    judgements: Vec<ReferentJudgement>,
    utterances: usize,
}

impl Builder<'_> {
    fn say(&mut self, speaker: Player, words: &[&str]) -> usize {
        self.events.push(Event::Message { speaker, tokens: words.iter().map(|w| w.to_string()).collect() });
        self.utterances += 1;
        self.utterances - 1
    }

    fn mark(&mut self, speaker: Player, utterance: usize, span: (usize, usize), flags: MarkableFlags, link: Option<String>) -> String {
        let id = format!("{}_M{}", self.id, self.markables.len());
        self.markables.push(Markable {
            id: id.clone(),
            dialogue_id: self.id.clone(),
            utterance_index: utterance,
            start_token: span.0,
            end_token: span.1,
            speaker,
            flags,
            anaphora_of: link,
            cataphora_of: None,
        });
        id
    }

    fn judge(&mut self, rng: &mut Rng, markable: &str, speaker: Player, referents: &[u32]) {
        let view = &self.scenario.view(speaker).visible;
        let pool: Vec<usize> = (0..self.config.annotators.max(3) + 2).collect();
        let chosen: Vec<usize> = pool.choose_multiple(rng, self.config.annotators).copied().collect();
        for a in chosen {
            let mut set: BTreeSet<u32> = referents.iter().copied().collect();
            let unidentifiable = rng.random::<f64>() < self.config.unidentifiable_rate;
            if unidentifiable {
                set.clear();
            } else if rng.random::<f64>() < self.config.noise {
                let flip = *view.choose(rng).expect("non-empty view");
                if !set.remove(&flip) {
                    set.insert(flip);
                }
            }
            self.judgements.push(ReferentJudgement {
                markable_id: markable.to_string(),
                annotator_id: format!("annotator{a}"),
                referents: set,
                ambiguous: rng.random::<f64>() < self.config.ambiguous_rate,
                unidentifiable,
            });
        }
    }

    fn describe(&self, speaker: Player, entity_id: u32) -> [&'static str; 4] {
        let view = self.scenario.view(speaker);
        let e = self.scenario.entity(entity_id).expect("visible entity");
        let n = normalize_entity(e, view, self.config.scenario.sizes()).expect("visible entity");
        let vertical = if n.y < 0.0 { "top" } else { "bottom" };
        let horizontal = if n.x < 0.0 { "left" } else { "right" };
        [size_word(n.size), color_word(e.color), vertical, horizontal]
    }
}

fn synth_dialogue(id: String, scenario: &Scenario, config: &SynthConfig, rng: &mut Rng) -> (Dialogue, Vec<Markable>, Vec<ReferentJudgement>) {
    let mut b = Builder {
        id,
        scenario,
        config,
        events: Vec::new(),
        markables: Vec::new(),
        judgements: Vec::new(),
        utterances: 0,
    };
    let shared = scenario.shared_ids();

    if rng.random::<f64>() < 0.15 {
        let u = b.say(Player::A, &["i", "see", "many", "dots"]);
        b.mark(Player::A, u, (2, 4), MarkableFlags { generic: true, ..Default::default() }, None);
    }
    if rng.random::<f64>() < 0.1 {
        let u = b.say(Player::B, &["all", "my", "dots", "are", "close", "together"]);
        b.mark(Player::B, u, (0, 3), MarkableFlags { all_referents: true, ..Default::default() }, None);
    }

    let mut speaker = Player::A;
    let mut agreed = None;
    for round in 0..config.max_rounds {
        let view = &scenario.view(speaker).visible;
        let proposal = if round + 1 == config.max_rounds {
            *shared.choose(rng).expect("shared entities")
        } else {
            *view.choose(rng).expect("non-empty view")
        };
        let [size, color, vertical, horizontal] = b.describe(speaker, proposal);
        let mut words = vec!["i", "have", "a", size, color, "dot", "on", "the", vertical, horizontal];
        let with_anaphora = rng.random::<f64>() < 0.3;
        if with_anaphora {
            words.extend([",", "pick", "it"]);
        }
        let u = b.say(speaker, &words);
        let m = b.mark(speaker, u, (2, 6), MarkableFlags::default(), None);
        b.judge(rng, &m, speaker, &[proposal]);
        if with_anaphora {
            b.mark(speaker, u, (12, 13), MarkableFlags::default(), Some(m));
        }

        let partner = speaker.other();
        if shared.contains(&proposal) {
            let [size, color, ..] = b.describe(partner, proposal);
            let u = b.say(partner, &["yes", "i", "see", "the", size, color, "one"]);
            let m = b.mark(partner, u, (3, 7), MarkableFlags::default(), None);
            b.judge(rng, &m, partner, &[proposal]);
            agreed = Some(proposal);
            break;
        }
        if rng.random::<f64>() < 0.3 {
            let u = b.say(partner, &["no", ",", "i", "have", "no", color, "dot", "there"]);
            b.mark(partner, u, (4, 7), MarkableFlags { no_referent: true, ..Default::default() }, None);
        } else {
            b.say(partner, &["no", "i", "do", "not", "see", "that"]);
        }
        speaker = partner;
    }
    let target = agreed.unwrap_or_else(|| *shared.choose(rng).expect("shared entities"));

    let first = if rng.random::<bool>() { Player::A } else { Player::B };
    let second_choice = if rng.random::<f64>() < config.failure_rate {
        *scenario.view(first.other()).visible.choose(rng).expect("non-empty view")
    } else {
        target
    };
    b.events.push(Event::Selection { speaker: first, entity_id: target });
    b.events.push(Event::Selection { speaker: first.other(), entity_id: second_choice });
    let dialogue = Dialogue {
        id: b.id.clone(),
        scenario_id: scenario.id.clone(),
        events: b.events,
        outcome: second_choice == target,
    };
    (dialogue, b.markables, b.judgements)
}

/// Generates a validated corpus. Dialogue `i` draws from its own stream, so
/// a corpus of `n` dialogues is a prefix of any larger one with the same seed.
pub fn synthesize(config: &SynthConfig) -> Result<AnnotatedCorpus, SynthError> {
    if config.shared.is_empty() || config.annotators == 0 {
        return Err(SynthError::InvalidConfig);
    }
    let mut scenarios = Vec::new();
    let mut dialogues = Vec::new();
    let mut markables = Vec::new();
    let mut judgements = Vec::new();
    for i in 0..config.dialogues {
        let mut rng = rng::stream(config.seed, 0x5e, i as u64);
        let k = *config.shared.choose(&mut rng).expect("non-empty");
        let mut scenario = generate_scenario(&config.scenario, k, &mut rng)?;
        scenario.id = format!("S{i:05}");
        let (d, m, j) = synth_dialogue(format!("D{i:05}"), &scenario, config, &mut rng);
        scenarios.push(scenario);
        dialogues.push(d);
        markables.extend(m);
        judgements.extend(j);
    }
    Ok(AnnotatedCorpus::new(scenarios, dialogues, markables, judgements)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::aggregate_gold;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let config = SynthConfig { dialogues: 30, seed: 7, ..Default::default() };
        let a = synthesize(&config).unwrap();
        let b = synthesize(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dialogues().len(), 30);
        let gold = aggregate_gold(&a).unwrap();
        assert!(!gold.entries.is_empty());
        for m in a.markables() {
            if !m.flags.generic {
                assert!(gold.get(&m.id).is_some(), "{}", m.id);
            }
        }
    }

    #[test]
    fn prefix_property() {
        let small = synthesize(&SynthConfig { dialogues: 5, ..Default::default() }).unwrap();
        let large = synthesize(&SynthConfig { dialogues: 8, ..Default::default() }).unwrap();
        assert_eq!(small.dialogues(), &large.dialogues()[..5]);
    }

    #[test]
    fn attribute_words() {
        assert_eq!(color_word(0.0), "black");
        assert_eq!(color_word(255.0), "light");
        assert_eq!(size_word(-1.0), "tiny");
        assert_eq!(size_word(1.0), "large");
    }
}
