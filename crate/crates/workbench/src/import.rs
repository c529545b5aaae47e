//! Adapter from the released dataset layout to the canonical corpus.
//!
//! Expected input directory:
//!
//! * `final_transcripts.json`: a list of chats, each with `uuid`,
//!   `scenario_uuid`, `scenario.kbs` (two lists of entities with `id`, `x`,
//!   `y`, `size` and `color`), `events` (objects with `agent` 0/1, `action`
//!   `"message"` or `"select"`, and `data`) and `outcome.reward`.
//! * `markable_annotation.json`: chat uuid → `{ "text", "markables": [...] }`
//!   where `text` holds one `"<agent>: <message>"` line per message and each
//!   markable gives `markable_id`, character offsets `start`/`end` into
//!   `text`, `speaker`, the `generic`/`all-referents`/`no-referent` flags and
//!   optional `anaphora`/`cataphora` antecedent ids.
//! * `referent_annotation.json`: chat uuid → markable id → list of
//!   judgements with `annotator` (or `worker_id`), `referents` (entity ids,
//!   optionally as `agent_<k>_<id>`), `ambiguous` and `unidentifiable`.
//!
//! Entity colors may be numbers or `rgb(r,g,b)` strings; ids may be strings.
//! When the two knowledge bases place shared entities at different
//! coordinates they are taken to be view-local, and player B's frame is
//! aligned to player A's by the mean offset of the shared entities.
//! Only chats with markable annotation are imported.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use commonground::corpus::ValidationPolicy;
use commonground::scenario::{canonical_order, View, Views};
use commonground::{AnnotatedCorpus, Dialogue, Entity, Event, Markable, MarkableFlags, Player, ReferentJudgement, Scenario};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::read_json;

pub const TRANSCRIPTS: &str = "final_transcripts.json";
pub const MARKABLE_ANNOTATION: &str = "markable_annotation.json";
pub const REFERENT_ANNOTATION: &str = "referent_annotation.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportOptions {
    /// Center of player A's view circle in the released coordinates.
    pub view_center: [f64; 2],
    pub view_radius: f64,
    pub policy: ValidationPolicy,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions { view_center: [215.0, 215.0], view_radius: 200.0, policy: ValidationPolicy::default() }
    }
}

/// Chats left out of the import and why.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImportReport {
    pub chats: usize,
    pub imported: usize,
    pub skipped: Vec<(String, String)>,
}

fn err(context: &str, reason: impl std::fmt::Display) -> Error {
    Error::Import(format!("{context}: {reason}"))
}

fn as_str<'a>(v: &'a Value, field: &str, ctx: &str) -> Result<&'a str> {
    v.get(field).and_then(Value::as_str).ok_or_else(|| err(ctx, format!("missing string field {field}")))
}

fn as_f64(v: &Value, field: &str, ctx: &str) -> Result<f64> {
    match v.get(field) {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| err(ctx, format!("bad number in {field}"))),
        Some(Value::String(s)) => s.trim().parse().map_err(|_| err(ctx, format!("bad number in {field}"))),
        _ => Err(err(ctx, format!("missing numeric field {field}"))),
    }
}

fn as_bool(v: &Value, field: &str) -> bool {
    match v.get(field) {
        Some(Value::Bool(b)) => *b,
        Some(Value::Number(n)) => n.as_i64().unwrap_or(0) != 0,
        Some(Value::String(s)) => matches!(s.as_str(), "true" | "1" | "yes"),
        _ => false,
    }
}

/// Parses `"23"`, `23` or `"agent_1_23"`.
pub fn parse_entity_id(v: &Value) -> Option<u32> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|x| u32::try_from(x).ok()),
        Value::String(s) => s.rsplit('_').next()?.trim().parse().ok(),
        _ => None,
    }
}

/// Parses a gray level from a number or an `rgb(r,g,b)` string (red channel).
pub fn parse_color(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let s = s.trim();
            let inner = s.strip_prefix("rgb(").and_then(|r| r.strip_suffix(')')).unwrap_or(s);
            inner.split(',').next()?.trim().parse().ok()
        }
        _ => None,
    }
}

fn player(v: Option<&Value>, ctx: &str) -> Result<Player> {
    match v {
        Some(Value::Number(n)) if n.as_u64() == Some(0) => Ok(Player::A),
        Some(Value::Number(n)) if n.as_u64() == Some(1) => Ok(Player::B),
        Some(Value::String(s)) if s == "0" || s == "A" => Ok(Player::A),
        Some(Value::String(s)) if s == "1" || s == "B" => Ok(Player::B),
        _ => Err(err(ctx, "speaker/agent must be 0 or 1")),
    }
}

fn kb_entities(kb: &Value, ctx: &str) -> Result<Vec<Entity>> {
    let list = kb.as_array().ok_or_else(|| err(ctx, "knowledge base is not a list"))?;
    list.iter()
        .map(|e| {
            Ok(Entity {
                id: e.get("id").and_then(parse_entity_id).ok_or_else(|| err(ctx, "entity without id"))?,
                x: as_f64(e, "x", ctx)?,
                y: as_f64(e, "y", ctx)?,
                size: as_f64(e, "size", ctx)?,
                color: e.get("color").and_then(parse_color).ok_or_else(|| err(ctx, "entity without color"))?,
            })
        })
        .collect()
}

/// Builds a scenario from the two knowledge bases.
pub fn scenario_from_kbs(id: &str, kbs: &Value, options: &ImportOptions) -> Result<Scenario> {
    let kbs = kbs.as_array().filter(|k| k.len() == 2).ok_or_else(|| err(id, "expected two knowledge bases"))?;
    let a = kb_entities(&kbs[0], id)?;
    let b = kb_entities(&kbs[1], id)?;
    let a_ids: BTreeSet<u32> = a.iter().map(|e| e.id).collect();
    let shared: Vec<(&Entity, &Entity)> =
        b.iter().filter_map(|eb| a.iter().find(|ea| ea.id == eb.id).map(|ea| (ea, eb))).collect();
    if shared.is_empty() {
        return Err(err(id, "views share no entity"));
    }
    let n = shared.len() as f64;
    let dx = shared.iter().map(|(ea, eb)| eb.x - ea.x).sum::<f64>() / n;
    let dy = shared.iter().map(|(ea, eb)| eb.y - ea.y).sum::<f64>() / n;
    let mut entities = a.clone();
    for e in &b {
        if !a_ids.contains(&e.id) {
            entities.push(Entity { x: e.x - dx, y: e.y - dy, ..e.clone() });
        }
    }
    entities.sort_by_key(|e| e.id);
    let view = |members: &[Entity], center: [f64; 2]| {
        let refs: Vec<&Entity> = members.iter().filter_map(|m| entities.iter().find(|e| e.id == m.id)).collect();
        View { center, radius: options.view_radius, visible: canonical_order(&refs) }
    };
    let [cx, cy] = options.view_center;
    let views = Views { a: view(&a, [cx, cy]), b: view(&b, [cx - dx, cy - dy]) };
    let scenario = Scenario { id: id.into(), entities, views, num_shared: shared.len() };
    scenario.check_structure().map_err(|e| err(id, e))?;
    Ok(scenario)
}

/// Character offset → (line, token) over `text`, whose lines are
/// `"<agent>: <tokens>"`. Returns `None` for offsets inside a prefix.
struct TextIndex {
    /// Per line: absolute start offset of each token and of its end.
    tokens: Vec<Vec<(usize, usize)>>,
}

impl TextIndex {
    fn new(text: &str) -> TextIndex {
        let mut tokens = Vec::new();
        let mut base = 0usize;
        for line in text.split('\n') {
            let chars: Vec<char> = line.chars().collect();
            let body = chars.iter().position(|&c| c == ':').map_or(0, |p| p + 1);
            let mut spans = Vec::new();
            let mut i = body;
            while i < chars.len() {
                if chars[i].is_whitespace() {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                spans.push((base + start, base + i));
            }
            tokens.push(spans);
            base += chars.len() + 1;
        }
        TextIndex { tokens }
    }
}

fn locate(index: &TextIndex, start: usize, end: usize) -> Option<(usize, usize, usize)> {
    for (line, spans) in index.tokens.iter().enumerate() {
        let Some(first) = spans.iter().position(|&(s, e)| start >= s && start < e) else { continue };
        let last = spans.iter().rposition(|&(s, e)| end > s && end <= e)?;
        return (last >= first).then_some((line, first, last + 1));
    }
    None
}

fn judgement_list(v: &Value) -> Vec<&Value> {
    match v {
        Value::Array(list) => list.iter().collect(),
        Value::Object(_) => vec![v],
        _ => Vec::new(),
    }
}

/// Reads the released layout from `dir` and validates the result.
pub fn import_dataset(dir: &Path, options: &ImportOptions) -> Result<(AnnotatedCorpus, ImportReport)> {
    let chats: Value = read_json(&dir.join(TRANSCRIPTS))?;
    let markable_ann: Value = read_json(&dir.join(MARKABLE_ANNOTATION))?;
    let referent_ann: Value = read_json(&dir.join(REFERENT_ANNOTATION))?;
    let chats = chats.as_array().ok_or_else(|| err(TRANSCRIPTS, "expected a list of chats"))?;
    let markable_ann = markable_ann.as_object().ok_or_else(|| err(MARKABLE_ANNOTATION, "expected an object"))?;
    let referent_ann = referent_ann.as_object().ok_or_else(|| err(REFERENT_ANNOTATION, "expected an object"))?;

    let mut report = ImportReport { chats: chats.len(), ..Default::default() };
    let mut scenarios: BTreeMap<String, Scenario> = BTreeMap::new();
    let mut dialogues = Vec::new();
    let mut markables = Vec::new();
    let mut judgements = Vec::new();

    for chat in chats {
        let chat_id = as_str(chat, "uuid", TRANSCRIPTS)?.to_string();
        let Some(ann) = markable_ann.get(&chat_id) else {
            report.skipped.push((chat_id, "no markable annotation".into()));
            continue;
        };
        let scenario_id = chat
            .get("scenario_uuid")
            .and_then(Value::as_str)
            .or_else(|| chat.get("scenario").and_then(|s| s.get("uuid")).and_then(Value::as_str))
            .ok_or_else(|| err(&chat_id, "missing scenario_uuid"))?
            .to_string();
        if !scenarios.contains_key(&scenario_id) {
            let kbs = chat.get("scenario").and_then(|s| s.get("kbs")).ok_or_else(|| err(&chat_id, "missing scenario.kbs"))?;
            scenarios.insert(scenario_id.clone(), scenario_from_kbs(&scenario_id, kbs, options)?);
        }

        let mut events = Vec::new();
        for ev in chat.get("events").and_then(Value::as_array).ok_or_else(|| err(&chat_id, "missing events"))? {
            let speaker = player(ev.get("agent"), &chat_id)?;
            match ev.get("action").and_then(Value::as_str) {
                Some("message") => {
                    let text = as_str(ev, "data", &chat_id)?;
                    events.push(Event::Message { speaker, tokens: text.split_whitespace().map(String::from).collect() });
                }
                Some("select") => {
                    let id = ev.get("data").and_then(parse_entity_id).ok_or_else(|| err(&chat_id, "bad selection"))?;
                    events.push(Event::Selection { speaker, entity_id: id });
                }
                _ => {}
            }
        }
        let outcome = chat
            .get("outcome")
            .and_then(|o| o.get("reward"))
            .and_then(Value::as_f64)
            .is_some_and(|r| r > 0.0);
        let dialogue = Dialogue { id: chat_id.clone(), scenario_id, events, outcome };
        let messages: Vec<(Player, usize)> = dialogue.utterances().map(|u| (u.speaker, u.tokens.len())).collect();

        let text = as_str(ann, "markables_text", &chat_id).or_else(|_| as_str(ann, "text", &chat_id))?;
        let index = TextIndex::new(text);
        if index.tokens.iter().filter(|t| !t.is_empty()).count() < messages.iter().filter(|m| m.1 > 0).count() {
            return Err(err(&chat_id, "annotation text has fewer lines than the transcript"));
        }
        let local_id = |m: &str| format!("{chat_id}_{m}");
        for m in ann.get("markables").and_then(Value::as_array).into_iter().flatten() {
            let mid = as_str(m, "markable_id", &chat_id)?;
            let ctx = local_id(mid);
            let start = as_f64(m, "start", &ctx)? as usize;
            let end = as_f64(m, "end", &ctx)? as usize;
            let (utterance_index, start_token, end_token) =
                locate(&index, start, end).ok_or_else(|| err(&ctx, format!("offsets {start}..{end} do not align with tokens")))?;
            let speaker = player(m.get("speaker"), &ctx)?;
            let link = |field: &str| m.get(field).and_then(Value::as_str).filter(|s| !s.is_empty()).map(local_id);
            markables.push(Markable {
                id: ctx.clone(),
                dialogue_id: chat_id.clone(),
                utterance_index,
                start_token,
                end_token,
                speaker,
                flags: MarkableFlags {
                    generic: as_bool(m, "generic"),
                    all_referents: as_bool(m, "all-referents"),
                    no_referent: as_bool(m, "no-referent"),
                },
                anaphora_of: link("anaphora"),
                cataphora_of: link("cataphora"),
            });
        }

        if let Some(by_markable) = referent_ann.get(&chat_id).and_then(Value::as_object) {
            for (mid, list) in by_markable {
                for (k, j) in judgement_list(list).into_iter().enumerate() {
                    let ctx = local_id(mid);
                    let annotator = j
                        .get("annotator")
                        .or_else(|| j.get("worker_id"))
                        .and_then(Value::as_str)
                        .map(String::from)
                        .unwrap_or_else(|| format!("annotator{k}"));
                    let referents = j
                        .get("referents")
                        .and_then(Value::as_array)
                        .into_iter()
                        .flatten()
                        .map(|r| parse_entity_id(r).ok_or_else(|| err(&ctx, "bad referent id")))
                        .collect::<Result<BTreeSet<u32>>>()?;
                    judgements.push(ReferentJudgement {
                        markable_id: ctx,
                        annotator_id: annotator,
                        referents,
                        ambiguous: as_bool(j, "ambiguous"),
                        unidentifiable: as_bool(j, "unidentifiable"),
                    });
                }
            }
        }
        dialogues.push(dialogue);
        report.imported += 1;
    }
    let corpus = AnnotatedCorpus::with_policy(scenarios.into_values().collect(), dialogues, markables, judgements, options.policy)?;
    Ok((corpus, report))
}
