//! Deterministic SVG 1.1 rendering of views, scenarios and dialogues.
//!
//! Dots are drawn at their position relative to the view circle with radius
//! proportional to size and a gray fill equal to their color. Highlighted
//! referents get a colored ring per markable; rings of several markables on
//! one dot are nested. All coordinates are printed with two decimals, so
//! identical input gives identical bytes.

use std::fmt::Write as _;

use commonground::agreement::GoldReferents;
use commonground::selfplay::GameTranscript;
use commonground::{AnnotatedCorpus, Event, Player, Scenario};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("entity {entity} is not visible to player {player}")]
    MissingEntity { entity: u32, player: Player },
    #[error("markable {label}: span ({start}, {end}) out of range for utterance {utterance}")]
    SpanOutOfRange { label: String, utterance: usize, start: usize, end: usize },
    #[error("unknown {kind} {id}")]
    Unknown { kind: &'static str, id: String },
}

/// Ring colors, cycled by markable index.
pub const PALETTE: [&str; 8] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324"];

pub fn palette(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Referent set to ring in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Highlight {
    pub color: String,
    pub entities: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    /// Side of a square view panel.
    pub panel: f64,
    /// Radius of the drawn view circle.
    pub view_radius: f64,
    pub font_size: f64,
    /// Advance of one monospace character.
    pub char_width: f64,
    pub line_height: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Layout { panel: 320.0, view_radius: 140.0, font_size: 12.0, char_width: 7.2, line_height: 20.0 }
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// `#rrggbb` gray for a color attribute, rounded and clamped to `[0, 255]`.
pub fn gray_hex(color: f64) -> String {
    let v = color.round().clamp(0.0, 255.0) as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open_svg(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(width),
        h = num(height)
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, num(width), num(height));
}

/// Draws one view as a `<g>` element translated to `(x, y)`.
fn view_group(
    out: &mut String,
    scenario: &Scenario,
    player: Player,
    highlights: &[Highlight],
    title: &str,
    (x, y): (f64, f64),
    layout: &Layout,
) -> Result<(), RenderError> {
    let view = scenario.view(player);
    for h in highlights {
        if let Some(&entity) = h.entities.iter().find(|e| !view.contains(**e)) {
            return Err(RenderError::MissingEntity { entity, player });
        }
    }
    let c = layout.panel / 2.0;
    let scale = layout.view_radius / view.radius;
    let _ = writeln!(out, r#"<g transform="translate({},{})">"#, num(x), num(y));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="{}" text-anchor="middle">{}</text>"#,
        num(c),
        num(layout.font_size + 2.0),
        num(layout.font_size),
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<circle class="view" cx="{}" cy="{}" r="{}" fill="none" stroke="#000000" stroke-width="1.50"/>"##,
        num(c),
        num(c + 8.0),
        num(layout.view_radius)
    );
    for &id in &view.visible {
        let e = scenario.entity(id).ok_or(RenderError::MissingEntity { entity: id, player })?;
        let ex = c + (e.x - view.center[0]) * scale;
        let ey = c + 8.0 + (e.y - view.center[1]) * scale;
        let r = e.size * scale;
        let _ = writeln!(
            out,
            r##"<circle class="entity" data-id="{id}" cx="{}" cy="{}" r="{}" fill="{}" stroke="#000000" stroke-width="0.50"/>"##,
            num(ex),
            num(ey),
            num(r),
            gray_hex(e.color)
        );
        for (ring, h) in highlights.iter().filter(|h| h.entities.contains(&id)).enumerate() {
            let _ = writeln!(
                out,
                r#"<circle class="referent" data-id="{id}" cx="{}" cy="{}" r="{}" fill="none" stroke="{}" stroke-width="2.00"/>"#,
                num(ex),
                num(ey),
                num(r + 3.0 + 3.0 * ring as f64),
                escape(&h.color)
            );
        }
    }
    out.push_str("</g>\n");
    Ok(())
}

/// A standalone SVG document of one player's view.
pub fn render_view(scenario: &Scenario, player: Player, highlights: &[Highlight], layout: &Layout) -> Result<String, RenderError> {
    let mut out = String::new();
    open_svg(&mut out, layout.panel, layout.panel + 16.0);
    view_group(&mut out, scenario, player, highlights, &format!("{} / {player}", scenario.id), (0.0, 0.0), layout)?;
    out.push_str("</svg>\n");
    Ok(out)
}

/// Both views of a scenario side by side; shared entities are ringed when
/// `mark_shared` is set.
pub fn render_scenario(scenario: &Scenario, mark_shared: bool, layout: &Layout) -> Result<String, RenderError> {
    let mut out = String::new();
    open_svg(&mut out, 2.0 * layout.panel, layout.panel + 16.0);
    let shared = if mark_shared {
        vec![Highlight { color: palette(0).into(), entities: scenario.shared_ids() }]
    } else {
        Vec::new()
    };
    for (i, p) in [Player::A, Player::B].into_iter().enumerate() {
        let title = format!("{} / {p}", scenario.id);
        view_group(&mut out, scenario, p, &shared, &title, (i as f64 * layout.panel, 0.0), layout)?;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// An underlined, color-keyed span of the transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSpan {
    pub label: String,
    pub utterance: usize,
    pub start: usize,
    pub end: usize,
}

/// One view panel; `rings[i]` pairs a markable index with its referents.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub player: Player,
    pub rings: Vec<(usize, Vec<u32>)>,
}

/// Everything needed to render a dialogue page.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueSpec<'a> {
    pub title: String,
    pub scenario: &'a Scenario,
    pub messages: Vec<(Player, Vec<String>)>,
    pub markables: Vec<MarkSpan>,
    pub panels: Vec<Panel>,
}

/// View panels in a row above the transcript. Markable spans are underlined
/// in the color of their rings.
pub fn render_dialogue(spec: &DialogueSpec<'_>, layout: &Layout) -> Result<String, RenderError> {
    for m in &spec.markables {
        let len = spec.messages.get(m.utterance).map(|(_, t)| t.len());
        if !matches!(len, Some(n) if m.start < m.end && m.end <= n) {
            return Err(RenderError::SpanOutOfRange {
                label: m.label.clone(),
                utterance: m.utterance,
                start: m.start,
                end: m.end,
            });
        }
    }
    let prefix = 3usize;
    let longest = spec
        .messages
        .iter()
        .map(|(_, t)| t.iter().map(|w| w.chars().count() + 1).sum::<usize>() + prefix)
        .max()
        .unwrap_or(0);
    let text_width = longest as f64 * layout.char_width + 2.0 * layout.font_size;
    let width = (spec.panels.len() as f64 * layout.panel).max(text_width).max(layout.panel);
    let panels_height = if spec.panels.is_empty() { 0.0 } else { layout.panel + 16.0 };
    let text_top = panels_height + layout.line_height + layout.font_size;
    let height = text_top + (spec.messages.len() as f64 + 1.0) * layout.line_height;

    let mut out = String::new();
    open_svg(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="{}">{}</text>"#,
        num(layout.font_size),
        num(panels_height + layout.font_size + 4.0),
        num(layout.font_size),
        escape(&spec.title)
    );
    for (i, panel) in spec.panels.iter().enumerate() {
        let highlights: Vec<Highlight> = panel
            .rings
            .iter()
            .map(|(m, ids)| Highlight { color: palette(*m).into(), entities: ids.clone() })
            .collect();
        view_group(&mut out, spec.scenario, panel.player, &highlights, &panel.title, (i as f64 * layout.panel, 0.0), layout)?;
    }

    out.push_str("<g class=\"transcript\">\n");
    for (u, (speaker, tokens)) in spec.messages.iter().enumerate() {
        let y = text_top + u as f64 * layout.line_height;
        let x0 = layout.font_size;
        let mut offsets = Vec::with_capacity(tokens.len() + 1);
        let mut col = prefix;
        for t in tokens {
            offsets.push(col);
            col += t.chars().count() + 1;
        }
        offsets.push(col);
        let line: Vec<String> = tokens.iter().map(|t| escape(t)).collect();
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="{}" xml:space="preserve">{speaker}: {}</text>"#,
            num(x0),
            num(y),
            num(layout.font_size),
            line.join(" ")
        );
        for (mi, m) in spec.markables.iter().enumerate().filter(|(_, m)| m.utterance == u) {
            let x1 = x0 + offsets[m.start] as f64 * layout.char_width;
            let x2 = x0 + (offsets[m.end] - 1) as f64 * layout.char_width;
            let _ = writeln!(
                out,
                r#"<line class="markable" data-label="{}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2.00"/>"#,
                escape(&m.label),
                num(x1),
                num(y + 3.0),
                num(x2),
                num(y + 3.0),
                palette(mi)
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn corpus_messages(corpus: &AnnotatedCorpus, dialogue_id: &str) -> Result<Vec<(Player, Vec<String>)>, RenderError> {
    let d = corpus
        .dialogue(dialogue_id)
        .ok_or_else(|| RenderError::Unknown { kind: "dialogue", id: dialogue_id.into() })?;
    Ok(d.events
        .iter()
        .filter_map(|e| match e {
            Event::Message { speaker, tokens } => Some((*speaker, tokens.clone())),
            Event::Selection { .. } => None,
        })
        .collect())
}

/// Both views with each markable's gold referents ringed in its speaker's view.
/// Generic and dropped markables are underlined without rings.
pub fn dialogue_with_gold<'a>(corpus: &'a AnnotatedCorpus, dialogue_id: &str, gold: &GoldReferents) -> Result<DialogueSpec<'a>, RenderError> {
    let messages = corpus_messages(corpus, dialogue_id)?;
    let d = corpus.dialogue(dialogue_id).expect("checked above");
    let scenario = corpus.scenario_of(d);
    let mut markables = Vec::new();
    let mut panels: Vec<Panel> = [Player::A, Player::B]
        .into_iter()
        .map(|p| Panel { title: format!("{} / {p}", scenario.id), player: p, rings: Vec::new() })
        .collect();
    for (i, m) in corpus.markables_of(dialogue_id).enumerate() {
        markables.push(MarkSpan { label: m.id.clone(), utterance: m.utterance_index, start: m.start_token, end: m.end_token });
        if let Some(mask) = gold.referents(&m.id) {
            let ids = mask.ids(scenario.view(m.speaker));
            panels[m.speaker.index()].rings.push((i, ids));
        }
    }
    Ok(DialogueSpec { title: dialogue_id.into(), scenario, messages, markables, panels })
}

/// One panel per judgement of a markable, side by side.
pub fn markable_judgements<'a>(corpus: &'a AnnotatedCorpus, markable_id: &str) -> Result<DialogueSpec<'a>, RenderError> {
    let m = corpus.markable(markable_id).ok_or_else(|| RenderError::Unknown { kind: "markable", id: markable_id.into() })?;
    let messages = corpus_messages(corpus, &m.dialogue_id)?;
    let scenario = corpus.scenario_of(corpus.dialogue(&m.dialogue_id).expect("validated"));
    let panels = corpus
        .judgements_of(markable_id)
        .map(|j| Panel { title: j.annotator_id.clone(), player: m.speaker, rings: vec![(0, j.referents.iter().copied().collect())] })
        .collect();
    Ok(DialogueSpec {
        title: format!("{} / {}", m.dialogue_id, m.id),
        scenario,
        messages,
        markables: vec![MarkSpan { label: m.id.clone(), utterance: m.utterance_index, start: m.start_token, end: m.end_token }],
        panels,
    })
}

/// A selfplay transcript with its predicted referents.
pub fn transcript_spec<'a>(transcript: &GameTranscript, scenario: &'a Scenario) -> DialogueSpec<'a> {
    let mut panels: Vec<Panel> = [Player::A, Player::B]
        .into_iter()
        .map(|p| Panel { title: format!("{} / {p}", scenario.id), player: p, rings: Vec::new() })
        .collect();
    let mut markables = Vec::new();
    for (i, r) in transcript.referents.iter().enumerate() {
        markables.push(MarkSpan { label: format!("m{i}"), utterance: r.utterance_index, start: r.start_token, end: r.end_token });
        panels[r.speaker.index()].rings.push((i, r.referents.clone()));
    }
    let outcome = if transcript.success { "success" } else { "failure" };
    DialogueSpec {
        title: format!("game {} / {} / {outcome}", transcript.game, scenario.id),
        scenario,
        messages: transcript.messages.iter().map(|m| (m.speaker, m.tokens.clone())).collect(),
        markables,
        panels,
    }
}
