//! The collaborative referring game between two agents: alternating
//! utterances sampled token by token, then one selection per agent.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::model::{GroundingModel, IncrementalState, ModelError, EOS, SELECTION, THEM, YOU};
use crate::rng::{self, Rng};
use crate::scenario::{normalized_view, Player, Scenario, ScenarioError, SizeRange, View};
use crate::tagger::Tagger;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub temperature: f64,
    pub max_utterances: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { temperature: 0.25, max_utterances: 20, max_tokens: 30, seed: 0 }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), SelfplayError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) || self.max_utterances == 0 || self.max_tokens == 0 {
            return Err(SelfplayError::InvalidProtocol);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelfplayError {
    #[error("temperature must be positive and limits non-zero")]
    InvalidProtocol,
    #[error("distribution is not finite after tempering")]
    NonFinite,
    #[error("agent failure: {0}")]
    Agent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Distribution proportional to `p_i^(1/τ)`.
pub fn tempered(probs: &[f64], temperature: f64) -> Result<Vec<f64>, SelfplayError> {
    if temperature.is_nan() || temperature <= 0.0 || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(SelfplayError::NonFinite);
    }
    let logs: Vec<f64> = probs.iter().map(|&p| if p > 0.0 { math::ln(p) / temperature } else { f64::NEG_INFINITY }).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(SelfplayError::NonFinite);
    }
    let w: Vec<f64> = logs.iter().map(|l| math::exp(l - max)).collect();
    let z: f64 = w.iter().sum();
    if !(z.is_finite() && z > 0.0) {
        return Err(SelfplayError::NonFinite);
    }
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Samples an index with probability proportional to `p_i^(1/τ)`.
pub fn sample_token(probs: &[f64], temperature: f64, rng: &mut Rng) -> Result<usize, SelfplayError> {
    let p = tempered(probs, temperature)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > 0.0 {
            acc += v;
            last = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

/// A game participant. Both agents observe every token of the shared
/// transcript, speaker markers included, from their own perspective.
pub trait GameAgent {
    fn reset(&mut self, scenario: &Scenario, player: Player) -> Result<(), SelfplayError>;
    fn observe(&mut self, token: &str) -> Result<(), SelfplayError>;
    fn next_token(&mut self, temperature: f64, rng: &mut Rng) -> Result<String, SelfplayError>;
    /// World id of the selected entity.
    fn select(&mut self, rng: &mut Rng) -> Result<u32, SelfplayError>;
}

impl<T: GameAgent + ?Sized> GameAgent for Box<T> {
    fn reset(&mut self, scenario: &Scenario, player: Player) -> Result<(), SelfplayError> {
        (**self).reset(scenario, player)
    }

    fn observe(&mut self, token: &str) -> Result<(), SelfplayError> {
        (**self).observe(token)
    }

    fn next_token(&mut self, temperature: f64, rng: &mut Rng) -> Result<String, SelfplayError> {
        (**self).next_token(temperature, rng)
    }

    fn select(&mut self, rng: &mut Rng) -> Result<u32, SelfplayError> {
        (**self).select(rng)
    }
}

/// Agent backed by a grounding model with DIAL and TSEL heads.
#[derive(Debug, Clone)]
pub struct ModelAgent<'m> {
    model: &'m GroundingModel,
    sizes: SizeRange,
    state: Option<(IncrementalState, View)>,
}

impl<'m> ModelAgent<'m> {
    pub fn new(model: &'m GroundingModel, sizes: SizeRange) -> ModelAgent<'m> {
        ModelAgent { model, sizes, state: None }
    }

    fn state(&mut self) -> Result<&mut (IncrementalState, View), SelfplayError> {
        self.state.as_mut().ok_or_else(|| SelfplayError::Agent("agent used before reset".into()))
    }
}

impl GameAgent for ModelAgent<'_> {
    fn reset(&mut self, scenario: &Scenario, player: Player) -> Result<(), SelfplayError> {
        let entities = normalized_view(scenario, player, self.sizes)?;
        let state = self.model.start(&entities)?;
        self.state = Some((state, scenario.view(player).clone()));
        Ok(())
    }

    fn observe(&mut self, token: &str) -> Result<(), SelfplayError> {
        let id = self.model.vocab().id(token);
        let model = self.model;
        let (state, _) = self.state()?;
        model.feed(state, id);
        Ok(())
    }

    fn next_token(&mut self, temperature: f64, rng: &mut Rng) -> Result<String, SelfplayError> {
        let model = self.model;
        let (state, _) = self.state()?;
        let mut p = model.next_token_probs(state)?;
        for (i, v) in p.iter_mut().enumerate() {
            if model.vocab().is_control_input(i) {
                *v = 0.0;
            }
        }
        let id = sample_token(&p, temperature, rng)?;
        Ok(model.vocab().token(id).to_string())
    }

    fn select(&mut self, _rng: &mut Rng) -> Result<u32, SelfplayError> {
        let model = self.model;
        let (state, view) = self.state()?;
        let p = model.selection_probs(state)?;
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        Ok(view.visible[best])
    }
}

/// Selection rule of a [`ScriptedAgent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScriptedPolicy {
    /// The lowest-id entity visible to both players.
    LowestShared,
    /// The entity at this position of the agent's own view.
    Position(usize),
    /// A uniformly random entity of the agent's own view.
    UniformRandom,
}

/// Emits the selection token immediately and selects by policy.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    policy: ScriptedPolicy,
    view: Vec<u32>,
    shared: Vec<u32>,
}

impl ScriptedAgent {
    pub fn new(policy: ScriptedPolicy) -> ScriptedAgent {
        ScriptedAgent { policy, view: Vec::new(), shared: Vec::new() }
    }
}

impl GameAgent for ScriptedAgent {
    fn reset(&mut self, scenario: &Scenario, player: Player) -> Result<(), SelfplayError> {
        self.view.clone_from(&scenario.view(player).visible);
        self.shared = scenario.shared_ids();
        Ok(())
    }

    fn observe(&mut self, _token: &str) -> Result<(), SelfplayError> {
        Ok(())
    }

    fn next_token(&mut self, _temperature: f64, _rng: &mut Rng) -> Result<String, SelfplayError> {
        Ok(SELECTION.into())
    }

    fn select(&mut self, rng: &mut Rng) -> Result<u32, SelfplayError> {
        let pick = match self.policy {
            ScriptedPolicy::LowestShared => self.shared.iter().min().copied(),
            ScriptedPolicy::Position(i) => self.view.get(i).copied(),
            ScriptedPolicy::UniformRandom => (!self.view.is_empty()).then(|| self.view[rng.random_range(0..self.view.len())]),
        };
        pick.ok_or_else(|| SelfplayError::Agent("nothing to select".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub speaker: Player,
    pub tokens: Vec<String>,
}

/// Referents predicted for a detected markable of a transcript message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedReferents {
    pub utterance_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub speaker: Player,
    pub referents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub game: usize,
    pub scenario_id: String,
    pub num_shared: usize,
    pub messages: Vec<TranscriptMessage>,
    /// Selected world entity ids of A and B.
    pub selections: Option<[u32; 2]>,
    pub success: bool,
    /// The utterance cap ended the dialogue before a selection token.
    pub forced: bool,
    pub aborted: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub referents: Vec<PredictedReferents>,
}

fn play<A: GameAgent + ?Sized, B: GameAgent + ?Sized>(
    a: &mut A,
    b: &mut B,
    scenario: &Scenario,
    protocol: &ProtocolConfig,
    rng: &mut Rng,
    messages: &mut Vec<TranscriptMessage>,
) -> Result<([u32; 2], bool), SelfplayError> {
    a.reset(scenario, Player::A)?;
    b.reset(scenario, Player::B)?;
    let mut speaker = Player::A;
    let mut ended = false;
    for _ in 0..protocol.max_utterances {
        match speaker {
            Player::A => {
                a.observe(YOU)?;
                b.observe(THEM)?;
            }
            Player::B => {
                a.observe(THEM)?;
                b.observe(YOU)?;
            }
        }
        let mut tokens = Vec::new();
        loop {
            if tokens.len() == protocol.max_tokens {
                a.observe(EOS)?;
                b.observe(EOS)?;
                break;
            }
            let tok = match speaker {
                Player::A => a.next_token(protocol.temperature, rng)?,
                Player::B => b.next_token(protocol.temperature, rng)?,
            };
            a.observe(&tok)?;
            b.observe(&tok)?;
            if tok == EOS {
                break;
            }
            if tok == SELECTION {
                ended = true;
                break;
            }
            tokens.push(tok);
        }
        messages.push(TranscriptMessage { speaker, tokens });
        if ended {
            break;
        }
        speaker = speaker.other();
    }
    let sa = a.select(rng)?;
    let sb = b.select(rng)?;
    Ok(([sa, sb], !ended))
}

/// Plays one game. Agent errors end the game as an aborted, unsuccessful
/// transcript carrying the cause.
pub fn run_game<A: GameAgent + ?Sized, B: GameAgent + ?Sized>(
    game: usize,
    a: &mut A,
    b: &mut B,
    scenario: &Scenario,
    protocol: &ProtocolConfig,
    rng: &mut Rng,
) -> GameTranscript {
    let mut messages = Vec::new();
    let result = play(a, b, scenario, protocol, rng, &mut messages);
    let mut t = GameTranscript {
        game,
        scenario_id: scenario.id.clone(),
        num_shared: scenario.num_shared,
        messages,
        selections: None,
        success: false,
        forced: false,
        aborted: None,
        referents: Vec::new(),
    };
    match result {
        Ok((sel, forced)) => {
            t.selections = Some(sel);
            t.success = sel[0] == sel[1];
            t.forced = forced;
        }
        Err(e) => t.aborted = Some(e.to_string()),
    }
    t
}

/// Rng of game `index` in a batch.
pub fn game_rng(protocol: &ProtocolConfig, index: usize) -> Rng {
    rng::stream(protocol.seed, 0x9a3e, index as u64)
}

/// Plays one game per scenario with fresh agents from `make`, sequentially.
pub fn run_batch<A: GameAgent, F: FnMut() -> (A, A)>(
    mut make: F,
    scenarios: &[Scenario],
    protocol: &ProtocolConfig,
) -> Result<Vec<GameTranscript>, SelfplayError> {
    protocol.validate()?;
    Ok(scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (mut a, mut b) = make();
            run_game(i, &mut a, &mut b, s, protocol, &mut game_rng(protocol, i))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub num_shared: usize,
    pub games: usize,
    pub successes: usize,
    pub forced: usize,
    pub aborted: usize,
    pub rate: f64,
}

/// Success rate per shared-entity count, ascending.
pub fn summarize(transcripts: &[GameTranscript]) -> Vec<SuccessRow> {
    let mut rows: BTreeMap<usize, SuccessRow> = BTreeMap::new();
    for t in transcripts {
        let row = rows.entry(t.num_shared).or_insert(SuccessRow {
            num_shared: t.num_shared,
            games: 0,
            successes: 0,
            forced: 0,
            aborted: 0,
            rate: 0.0,
        });
        row.games += 1;
        row.successes += usize::from(t.success);
        row.forced += usize::from(t.forced);
        row.aborted += usize::from(t.aborted.is_some());
    }
    rows.into_values()
        .map(|mut r| {
            r.rate = r.successes as f64 / r.games as f64;
            r
        })
        .collect()
}

/// Expected success of two agents that select uniformly and independently
/// from their own views: `(k/7)² · (1/k) = k/49`.
pub fn random_selection_success(num_shared: usize) -> f64 {
    num_shared as f64 / 49.0
}

/// Detects markables in every message with `tagger` and predicts their
/// referents with the REF head of `model` from the speaker's perspective.
pub fn predict_transcript_referents(
    transcript: &GameTranscript,
    scenario: &Scenario,
    tagger: &Tagger,
    model: &GroundingModel,
    sizes: SizeRange,
) -> Result<Vec<PredictedReferents>, SelfplayError> {
    let mut out = Vec::new();
    for speaker in [Player::A, Player::B] {
        let entities = normalized_view(scenario, speaker, sizes)?;
        let view = scenario.view(speaker);
        let vocab = model.vocab();
        let mut state = model.start(&entities)?;
        let mut spans = vec![];
        for (ui, m) in transcript.messages.iter().enumerate() {
            model.feed(&mut state, vocab.id(if m.speaker == speaker { YOU } else { THEM }));
            let start = state.len();
            for t in &m.tokens {
                model.feed(&mut state, vocab.id(t));
            }
            let eos = state.len();
            model.feed(&mut state, vocab.id(EOS));
            if m.speaker == speaker {
                for (s, e) in tagger.tag_utterance(&m.tokens) {
                    spans.push((ui, s, e, [start + s, start + e - 1, eos]));
                }
            }
        }
        for (ui, s, e, pos) in spans {
            let p = model.ref_probs(&state, pos)?;
            let referents = (0..p.len()).filter(|&i| p[i] > 0.5).map(|i| view.visible[i]).collect();
            out.push(PredictedReferents { utterance_index: ui, start_token: s, end_token: e, speaker, referents });
        }
    }
    out.sort_by_key(|r| (r.utterance_index, r.start_token));
    Ok(out)
}
