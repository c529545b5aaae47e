//! Canonical corpus directory: `scenarios.json`, `dialogues.json`,
//! `markables.json` and `judgements.json`, each a JSON array.

use std::path::Path;

use commonground::agreement::GoldReferents;
use commonground::corpus::{DatasetSplit, ValidationPolicy};
use commonground::{AnnotatedCorpus, Scenario};

use crate::error::Result;
use crate::io::{read_json, read_json_list, write_json};

pub const SCENARIOS: &str = "scenarios.json";
pub const DIALOGUES: &str = "dialogues.json";
pub const MARKABLES: &str = "markables.json";
pub const JUDGEMENTS: &str = "judgements.json";

pub fn load_corpus(dir: &Path) -> Result<AnnotatedCorpus> {
    load_corpus_with_policy(dir, ValidationPolicy::default())
}

/// Loads and validates a corpus directory.
pub fn load_corpus_with_policy(dir: &Path, policy: ValidationPolicy) -> Result<AnnotatedCorpus> {
    let scenarios = read_json_list(&dir.join(SCENARIOS))?;
    let dialogues = read_json_list(&dir.join(DIALOGUES))?;
    let markables = read_json_list(&dir.join(MARKABLES))?;
    let judgements = read_json_list(&dir.join(JUDGEMENTS))?;
    Ok(AnnotatedCorpus::with_policy(scenarios, dialogues, markables, judgements, policy)?)
}

pub fn save_corpus(corpus: &AnnotatedCorpus, dir: &Path) -> Result<()> {
    write_json(&dir.join(SCENARIOS), corpus.scenarios())?;
    write_json(&dir.join(DIALOGUES), corpus.dialogues())?;
    write_json(&dir.join(MARKABLES), corpus.markables())?;
    write_json(&dir.join(JUDGEMENTS), corpus.judgements())?;
    Ok(())
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    read_json_list(path)
}

pub fn save_scenarios(scenarios: &[Scenario], path: &Path) -> Result<()> {
    write_json(path, scenarios)
}

pub fn load_gold(path: &Path) -> Result<GoldReferents> {
    read_json(path)
}

pub fn load_split(path: &Path) -> Result<DatasetSplit> {
    read_json(path)
}
