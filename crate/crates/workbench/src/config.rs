//! Versioned `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! version = 1
//! seed = 0
//! model.variant = TSEL-REF-DIAL
//! model.hidden_dim = 256
//! selfplay.temperature = 0.25
//! ```
//!
//! Every key is optional except `version`; missing keys keep their defaults.
//! `seed` is copied into every component. Command-line `--set key=value`
//! pairs are applied after the file, and `--seed` after those.

use std::path::Path;
use std::str::FromStr;

use commonground::corpus::ValidationPolicy;
use commonground::model::{ModelConfig, Variant};
use commonground::scenario::ScenarioConfig;
use commonground::selfplay::ProtocolConfig;
use commonground::synth::SynthConfig;
use commonground::tagger::TaggerConfig;

use crate::error::{Error, Result};
use crate::io::read_to_string;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub model: ModelConfig,
    pub tagger: TaggerConfig,
    pub protocol: ProtocolConfig,
    pub synth: SynthConfig,
    pub min_judgements: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut c = ExperimentConfig {
            seed: 0,
            scenario: ScenarioConfig::default(),
            model: ModelConfig::default(),
            tagger: TaggerConfig::default(),
            protocol: ProtocolConfig::default(),
            synth: SynthConfig::default(),
            min_judgements: ValidationPolicy::default().min_judgements,
        };
        c.set_seed(0);
        c
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String> {
    value.trim().parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value.split(',').map(parse).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.scenario.seed = seed;
        self.model.seed = seed;
        self.tagger.seed = seed;
        self.protocol.seed = seed;
        self.synth.seed = seed;
    }

    pub fn policy(&self) -> ValidationPolicy {
        ValidationPolicy { min_judgements: self.min_judgements }
    }

    /// Assigns one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let s = &mut self.scenario;
        let m = &mut self.model;
        let t = &mut self.tagger;
        let p = &mut self.protocol;
        let y = &mut self.synth;
        match key.trim() {
            "version" => {
                let version: u32 = parse(v)?;
                if version != CONFIG_VERSION {
                    return Err(format!("unsupported config version {version}"));
                }
            }
            "seed" => self.set_seed(parse(v)?),
            "scenario.world_min" => s.world_bounds[0] = parse(v)?,
            "scenario.world_max" => s.world_bounds[1] = parse(v)?,
            "scenario.view_radius" => s.view_radius = parse(v)?,
            "scenario.center_distance" => {
                let d: Vec<f64> = parse_list(v)?;
                s.center_distance = d.try_into().map_err(|_| "expected three distances".to_string())?;
            }
            "scenario.size_min" => s.size_min = parse(v)?,
            "scenario.size_max" => s.size_max = parse(v)?,
            "scenario.min_separation" => s.min_separation = parse(v)?,
            "scenario.max_attempts" => s.max_attempts = parse(v)?,
            "scenario.draws_per_entity" => s.draws_per_entity = parse(v)?,
            "model.variant" => m.variant = v.parse::<Variant>().map_err(|e| e.to_string())?,
            "model.token_dim" => m.token_dim = parse(v)?,
            "model.hidden_dim" => m.hidden_dim = parse(v)?,
            "model.attr_dim" => m.attr_dim = parse(v)?,
            "model.rel_dim" => m.rel_dim = parse(v)?,
            "model.attention_dim" => m.attention_dim = parse(v)?,
            "model.dropout" => m.dropout = parse(v)?,
            "model.loss_tsel" => m.loss_weights.tsel = parse(v)?,
            "model.loss_ref" => m.loss_weights.reference = parse(v)?,
            "model.loss_dial" => m.loss_weights.dial = parse(v)?,
            "model.lr" => m.optimizer.lr = parse(v)?,
            "model.beta1" => m.optimizer.beta1 = parse(v)?,
            "model.beta2" => m.optimizer.beta2 = parse(v)?,
            "model.eps" => m.optimizer.eps = parse(v)?,
            "model.clip" => m.clip = parse(v)?,
            "model.epochs" => m.epochs = parse(v)?,
            "model.batch_size" => m.batch_size = parse(v)?,
            "model.patience" => m.patience = parse(v)?,
            "tagger.token_dim" => t.token_dim = parse(v)?,
            "tagger.hidden_dim" => t.hidden_dim = parse(v)?,
            "tagger.dropout" => t.dropout = parse(v)?,
            "tagger.lr" => t.optimizer.lr = parse(v)?,
            "tagger.clip" => t.clip = parse(v)?,
            "tagger.epochs" => t.epochs = parse(v)?,
            "tagger.batch_size" => t.batch_size = parse(v)?,
            "tagger.patience" => t.patience = parse(v)?,
            "selfplay.temperature" => p.temperature = parse(v)?,
            "selfplay.max_utterances" => p.max_utterances = parse(v)?,
            "selfplay.max_tokens" => p.max_tokens = parse(v)?,
            "synth.dialogues" => y.dialogues = parse(v)?,
            "synth.shared" => y.shared = parse_list(v)?,
            "synth.annotators" => y.annotators = parse(v)?,
            "synth.noise" => y.noise = parse(v)?,
            "synth.unidentifiable_rate" => y.unidentifiable_rate = parse(v)?,
            "synth.ambiguous_rate" => y.ambiguous_rate = parse(v)?,
            "synth.failure_rate" => y.failure_rate = parse(v)?,
            "synth.max_rounds" => y.max_rounds = parse(v)?,
            "validation.min_judgements" => self.min_judgements = parse(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        self.synth.scenario = self.scenario.clone();
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.scenario;
        let m = &self.model;
        let t = &self.tagger;
        let p = &self.protocol;
        let y = &self.synth;
        vec![
            ("version", CONFIG_VERSION.to_string()),
            ("seed", self.seed.to_string()),
            ("scenario.world_min", s.world_bounds[0].to_string()),
            ("scenario.world_max", s.world_bounds[1].to_string()),
            ("scenario.view_radius", s.view_radius.to_string()),
            ("scenario.center_distance", join(&s.center_distance)),
            ("scenario.size_min", s.size_min.to_string()),
            ("scenario.size_max", s.size_max.to_string()),
            ("scenario.min_separation", s.min_separation.to_string()),
            ("scenario.max_attempts", s.max_attempts.to_string()),
            ("scenario.draws_per_entity", s.draws_per_entity.to_string()),
            ("model.variant", m.variant.to_string()),
            ("model.token_dim", m.token_dim.to_string()),
            ("model.hidden_dim", m.hidden_dim.to_string()),
            ("model.attr_dim", m.attr_dim.to_string()),
            ("model.rel_dim", m.rel_dim.to_string()),
            ("model.attention_dim", m.attention_dim.to_string()),
            ("model.dropout", m.dropout.to_string()),
            ("model.loss_tsel", m.loss_weights.tsel.to_string()),
            ("model.loss_ref", m.loss_weights.reference.to_string()),
            ("model.loss_dial", m.loss_weights.dial.to_string()),
            ("model.lr", m.optimizer.lr.to_string()),
            ("model.beta1", m.optimizer.beta1.to_string()),
            ("model.beta2", m.optimizer.beta2.to_string()),
            ("model.eps", m.optimizer.eps.to_string()),
            ("model.clip", m.clip.to_string()),
            ("model.epochs", m.epochs.to_string()),
            ("model.batch_size", m.batch_size.to_string()),
            ("model.patience", m.patience.to_string()),
            ("tagger.token_dim", t.token_dim.to_string()),
            ("tagger.hidden_dim", t.hidden_dim.to_string()),
            ("tagger.dropout", t.dropout.to_string()),
            ("tagger.lr", t.optimizer.lr.to_string()),
            ("tagger.clip", t.clip.to_string()),
            ("tagger.epochs", t.epochs.to_string()),
            ("tagger.batch_size", t.batch_size.to_string()),
            ("tagger.patience", t.patience.to_string()),
            ("selfplay.temperature", p.temperature.to_string()),
            ("selfplay.max_utterances", p.max_utterances.to_string()),
            ("selfplay.max_tokens", p.max_tokens.to_string()),
            ("synth.dialogues", y.dialogues.to_string()),
            ("synth.shared", join(&y.shared)),
            ("synth.annotators", y.annotators.to_string()),
            ("synth.noise", y.noise.to_string()),
            ("synth.unidentifiable_rate", y.unidentifiable_rate.to_string()),
            ("synth.ambiguous_rate", y.ambiguous_rate.to_string()),
            ("synth.failure_rate", y.failure_rate.to_string()),
            ("synth.max_rounds", y.max_rounds.to_string()),
            ("validation.min_judgements", self.min_judgements.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# commonground experiment configuration\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Parses config text. The `version` key is mandatory.
    pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        let mut versioned = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Config { path: path.into(), line: i + 1, reason };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            versioned |= k.trim() == "version";
            c.set(k, v).map_err(err)?;
        }
        if !versioned {
            return Err(Error::Config { path: path.into(), line: 0, reason: "missing version key".into() });
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&read_to_string(path)?, path)
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for pair in pairs {
            let err = |reason: String| Error::Usage(format!("--set {pair}: {reason}"));
            let (k, v) = pair.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            self.set(k, v).map_err(err)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("model.variant", "TSEL-DIAL").unwrap();
        c.set("synth.shared", "4,6").unwrap();
        c.set("scenario.center_distance", "0.8,0.6,0.4").unwrap();
        c.set("seed", "17").unwrap();
        let back = ExperimentConfig::parse(&c.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.model.seed, 17);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_version() {
        let e = ExperimentConfig::parse("version = 1\nmodel.bogus = 3\n", Path::new("c")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        assert!(ExperimentConfig::parse("seed = 3\n", Path::new("c")).is_err());
        assert!(ExperimentConfig::parse("version = 2\n", Path::new("c")).is_err());
    }
}
