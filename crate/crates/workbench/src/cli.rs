//! `commonground` command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use commonground::agreement::{
    aggregate_gold, agreement_by_referent_count, color_kde, judged_masks, referent_agreement, token_exact_match_correlation,
    Bandwidth, CorrelationUnit, GoldReferents,
};
use commonground::corpus::{corpus_stats, split_dataset, DatasetSplit};
use commonground::evaluation::{summarize_groups, summarize_seeds, EvalReport};
use commonground::model::Variant;
use commonground::selfplay::{predict_transcript_referents, summarize, GameTranscript, ScriptedPolicy, SuccessRow};
use commonground::synth::synthesize;
use commonground::tagger::evaluate_tagger;
use commonground::{AnnotatedCorpus, Dialogue, Markable, MarkableFlags, Player};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{load_model, load_tagger, metrics_path, save_model, save_tagger};
use crate::config::ExperimentConfig;
use crate::corpus_io::{load_corpus_with_policy, load_gold, load_scenarios, load_split, save_corpus, save_scenarios};
use crate::error::{Error, Result};
use crate::import::{import_dataset, ImportOptions};
use crate::io::{read_json, read_json_lines, read_json_list, to_json_bytes, write_atomic, write_json, write_json_lines};
use crate::parallel::{configure_threads, evaluate_model};
use crate::pipeline::{
    corpus_sizes, markable_span_agreement, model_data, play_model, play_scripted, selfplay_scenarios, tagging_data,
    train_markable_tagger, train_model, SpanAnnotations,
};
use crate::render::{dialogue_with_gold, markable_judgements, render_dialogue, render_scenario, render_view, transcript_spec, Layout};
use crate::report;

/// Environment variable naming the data root for relative input paths.
pub const DATA_ENV: &str = "COMMONGROUND_DATA";

#[derive(Debug, Parser)]
#[command(name = "commonground", version, about = "Reference-resolution laboratory for partially-observable referring games")]
pub struct Cli {
    /// Experiment configuration file (versioned key = value text).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for every random component; applied after the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print or write the effective configuration.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate scenarios for the given shared-entity counts.
    Generate {
        #[arg(long, value_delimiter = ',', default_value = "4,5,6")]
        shared: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic annotated corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dialogues: Option<usize>,
    },
    /// Convert the released dataset layout into a canonical corpus directory.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Center of player A's view circle, `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        view_center: Option<Vec<f64>>,
        #[arg(long)]
        view_radius: Option<f64>,
    },
    /// Validate a corpus directory.
    Validate(CorpusArg),
    /// Markable-detection and referent-identification statistics.
    Stats {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON map dialogue id → per-annotator span lists for start/end agreement.
        #[arg(long)]
        span_annotations: Option<PathBuf>,
    },
    /// Referent agreement, per-referent-count breakdown, token correlations and color densities.
    Agreement {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        min_count: usize,
        #[arg(long, value_enum, default_value_t = Unit::Markable)]
        unit: Unit,
        #[arg(long, value_delimiter = ',', default_value = "black,dark,gray,grey,light,white")]
        adjectives: Vec<String>,
        /// Fixed KDE bandwidth; Silverman's rule when absent.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Majority-vote gold referents.
    Aggregate {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dialogue-level train/validation/test split.
    Split {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a grounding model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        variant: Option<Variant>,
        /// Checkpoint path; the sidecar and metrics log are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the markable tagger.
    TrainTagger {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-example outcomes as JSON lines.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Detect markables in dialogues with a trained tagger.
    Tag {
        #[arg(long)]
        tagger: PathBuf,
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also score against this corpus's markables.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Play the referring game on generated scenarios.
    Selfplay {
        /// Checkpoint of a model with TSEL and DIAL heads.
        #[arg(long, required_unless_present = "agent")]
        model: Option<PathBuf>,
        /// Scripted agents instead of a model.
        #[arg(long, value_enum)]
        agent: Option<Scripted>,
        #[arg(long, value_delimiter = ',', default_value = "4,5,6")]
        shared: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        games: usize,
        /// Tagger checkpoint for predicted referents (needs a REF model).
        #[arg(long, requires = "model")]
        tagger: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render scenarios, dialogues, judgements or transcripts as SVG.
    Render {
        #[command(subcommand)]
        what: RenderCommand,
    },
    /// Bundle evaluation and selfplay results into the results tables.
    Report {
        #[arg(long = "eval", required = true, num_args = 1..)]
        evals: Vec<PathBuf>,
        #[arg(long = "selfplay", num_args = 1..)]
        selfplay: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    /// Canonical corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long)]
    pub split: PathBuf,
    /// Gold referents; aggregated from the corpus when absent.
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Markable,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scripted {
    Random,
    Lowest,
}

#[derive(Debug, Subcommand)]
pub enum RenderCommand {
    /// Both views of a scenario, or one with `--player`.
    Scenario {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        player: Option<Side>,
        /// Ring the shared entities.
        #[arg(long)]
        shared: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// A corpus dialogue with gold referents.
    Dialogue {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        id: String,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every judgement of one markable side by side.
    Judgements {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        markable: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// One selfplay game with its predicted referents.
    Transcript {
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        game: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    A,
    B,
}

impl From<Side> for Player {
    fn from(s: Side) -> Player {
        match s {
            Side::A => Player::A,
            Side::B => Player::B,
        }
    }
}

/// Selfplay summary with enough context to place it in the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfplaySummary {
    pub agent: String,
    pub seed: u64,
    pub temperature: f64,
    /// Termination convention: an agent ends the dialogue by emitting the
    /// selection token; the utterance cap forces selection.
    pub convention: String,
    pub rows: Vec<SuccessRow>,
}

/// Evaluation record written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub variant: Variant,
    pub seed: u64,
    pub checkpoint: PathBuf,
    /// DIAL loss covers the tokens of both speakers.
    pub dial_targets: String,
    pub report: EvalReport,
}

/// Resolves a relative input path against the data root when it does not
/// exist relative to the working directory.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(root) = std::env::var_os(DATA_ENV) {
            let candidate = Path::new(&root).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn print_json(value: &serde_json::Value) {
    print!("{}", String::from_utf8(to_json_bytes(value)).expect("utf-8 json"));
}

struct Context {
    config: ExperimentConfig,
}

impl Context {
    fn corpus(&self, arg: &CorpusArg) -> Result<AnnotatedCorpus> {
        load_corpus_with_policy(&resolve_input(&arg.corpus), self.config.policy())
    }

    fn gold(&self, corpus: &AnnotatedCorpus, path: &Option<PathBuf>) -> Result<GoldReferents> {
        match path {
            Some(p) => load_gold(&resolve_input(p)),
            None => Ok(aggregate_gold(corpus)?),
        }
    }

    fn split(&self, path: &Path) -> Result<DatasetSplit> {
        load_split(&resolve_input(path))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors are printed to stderr as one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            let report = json!({ "error": "usage", "message": e.kind().to_string() });
            eprintln!("{report}");
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("serializable report"));
            if e.kind() == "usage" {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(&resolve_input(p))?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    configure_threads(cli.jobs);
    let ctx = Context { config };
    let c = &ctx.config;

    match cli.command {
        Command::Config { out } => match out {
            Some(path) => write_atomic(&path, c.to_text().as_bytes())?,
            None => print!("{}", c.to_text()),
        },
        Command::Generate { shared, count, out } => {
            let scenarios = selfplay_scenarios(&c.scenario, &shared, count, c.seed)?;
            save_scenarios(&scenarios, &out)?;
            print_json(&json!({ "scenarios": scenarios.len(), "shared": shared, "seed": c.seed }));
        }
        Command::Synth { out, dialogues } => {
            let mut synth = c.synth.clone();
            if let Some(n) = dialogues {
                synth.dialogues = n;
            }
            let corpus = synthesize(&synth)?;
            save_corpus(&corpus, &out)?;
            print_json(&json!({ "dialogues": corpus.dialogues().len(), "markables": corpus.markables().len() }));
        }
        Command::Import { input, out, view_center, view_radius } => {
            let mut options = ImportOptions { policy: c.policy(), ..ImportOptions::default() };
            if let Some(v) = view_center {
                options.view_center = [v[0], v[1]];
            }
            if let Some(r) = view_radius {
                options.view_radius = r;
            }
            let (corpus, report) = import_dataset(&resolve_input(&input), &options)?;
            save_corpus(&corpus, &out)?;
            write_json(&out.join("import_report.json"), &report)?;
            print_json(&json!({ "chats": report.chats, "imported": report.imported, "skipped": report.skipped.len() }));
        }
        Command::Validate(arg) => {
            let corpus = ctx.corpus(&arg)?;
            print_json(&json!({
                "valid": true,
                "scenarios": corpus.scenarios().len(),
                "dialogues": corpus.dialogues().len(),
                "markables": corpus.markables().len(),
                "judgements": corpus.judgements().len(),
            }));
        }
        Command::Stats { corpus, out, span_annotations } => {
            let corpus = ctx.corpus(&corpus)?;
            let stats = corpus_stats(&corpus);
            let masks = judged_masks(&corpus);
            let agreement = if masks.is_empty() { None } else { Some(referent_agreement(&masks)?) };
            let spans = match span_annotations {
                Some(p) => Some(markable_span_agreement(&corpus, &read_json::<SpanAnnotations>(&resolve_input(&p))?)?),
                None => None,
            };
            let value = json!({ "stats": stats, "referent_agreement": agreement, "span_agreement": spans });
            if let Some(dir) = out {
                report::markable_table(&stats, spans.as_ref()).write(&dir.join("markable_detection.csv"))?;
                report::referent_table(&stats, agreement.as_ref()).write(&dir.join("referent_identification.csv"))?;
                write_json(&dir.join("stats.json"), &value)?;
            }
            print_json(&value);
        }
        Command::Agreement { corpus, out, min_count, unit, adjectives, bandwidth } => {
            let corpus = ctx.corpus(&corpus)?;
            let masks = judged_masks(&corpus);
            let overall = referent_agreement(&masks)?;
            let by_count = agreement_by_referent_count(&masks);
            let unit = match unit {
                Unit::Markable => CorrelationUnit::Markable,
                Unit::Pair => CorrelationUnit::JudgementPair,
            };
            let tokens = token_exact_match_correlation(&corpus, min_count, unit);
            let gold = aggregate_gold(&corpus)?;
            let rule = bandwidth.map_or(Bandwidth::Silverman, Bandwidth::Fixed);
            let mut kdes = Vec::new();
            let mut missing = Vec::new();
            for adj in &adjectives {
                match color_kde(&corpus, &gold, &[adj.as_str()], rule) {
                    Ok(mut k) => kdes.append(&mut k),
                    Err(commonground::agreement::AgreementError::NoSamples(a)) => missing.push(a),
                    Err(e) => return Err(e.into()),
                }
            }
            report::referent_count_table(&by_count).write(&out.join("referent_counts.csv"))?;
            report::token_table(&tokens).write(&out.join("token_correlation.csv"))?;
            report::kde_table(&kdes, 0.0, 255.0).write(&out.join("color_kde.csv"))?;
            let bandwidths: Vec<(String, f64)> = kdes.iter().map(|(a, k)| (a.clone(), k.bandwidth())).collect();
            let value = json!({
                "referent_agreement": overall,
                "by_referent_count": by_count,
                "token_correlation": tokens,
                "kde_bandwidths": bandwidths,
                "adjectives_without_samples": missing,
            });
            write_json(&out.join("agreement.json"), &value)?;
            print_json(&json!({ "agreement": overall.entity.observed, "multi_pi": overall.entity.multi_pi, "exact_match": overall.exact_match }));
        }
        Command::Aggregate { corpus, out } => {
            let corpus = ctx.corpus(&corpus)?;
            let gold = aggregate_gold(&corpus)?;
            write_json(&out, &gold)?;
            print_json(&json!({ "markables": gold.entries.len(), "dropped": gold.dropped() }));
        }
        Command::Split { corpus, out } => {
            let corpus = ctx.corpus(&corpus)?;
            let ids: Vec<String> = corpus.dialogues().iter().map(|d| d.id.clone()).collect();
            let split = split_dataset(&ids, c.seed)?;
            write_json(&out, &split)?;
            print_json(&json!({ "train": split.train.len(), "valid": split.valid.len(), "test": split.test.len() }));
        }
        Command::Train { data, variant, out } => {
            let corpus = ctx.corpus(&data.corpus)?;
            let gold = ctx.gold(&corpus, &data.gold)?;
            let split = ctx.split(&data.split)?;
            let sizes = corpus_sizes(&corpus, c.scenario.sizes());
            let md = model_data(&corpus, &gold, &split, sizes)?;
            let mut mc = c.model.clone();
            if let Some(v) = variant {
                mc.variant = v;
            }
            let mut log = Vec::new();
            let outcome = train_model(mc, &md, &mut |r| {
                eprintln!("{}", serde_json::to_string(r).expect("serializable record"));
                log.push(r.clone());
            })?;
            save_model(&out, &outcome.model, sizes, &outcome.history, outcome.best_epoch)?;
            write_json_lines(&metrics_path(&out), &log)?;
            print_json(&json!({ "best_epoch": outcome.best_epoch, "epochs": outcome.history.len(), "checkpoint": out }));
        }
        Command::TrainTagger { corpus, split, out } => {
            let corpus = ctx.corpus(&corpus)?;
            let split = ctx.split(&split)?;
            let td = tagging_data(&corpus, &split)?;
            let mut log = Vec::new();
            let outcome = train_markable_tagger(c.tagger.clone(), &td, &mut |e| {
                eprintln!("{}", serde_json::to_string(e).expect("serializable record"));
                log.push(e.clone());
            })?;
            save_tagger(&out, &outcome.tagger, &outcome.history, outcome.best_epoch)?;
            write_json_lines(&metrics_path(&out), &log)?;
            let test = evaluate_tagger(&outcome.tagger, &td.test);
            print_json(&json!({ "best_epoch": outcome.best_epoch, "test": test }));
        }
        Command::Evaluate { data, model, out, outcomes } => {
            let corpus = ctx.corpus(&data.corpus)?;
            let gold = ctx.gold(&corpus, &data.gold)?;
            let split = ctx.split(&data.split)?;
            let (m, meta) = load_model(&resolve_input(&model))?;
            let test = corpus.subset(&split.test);
            let examples = commonground::model::build_examples(&test, &gold, m.vocab(), meta.sizes)?;
            let (rep, per_example) = evaluate_model(&m, &examples)?;
            let record = EvalRecord {
                variant: meta.config.variant,
                seed: meta.config.seed,
                checkpoint: model,
                dial_targets: "both speakers".into(),
                report: rep,
            };
            write_json(&out, &record)?;
            if let Some(p) = outcomes {
                write_json_lines(&p, &per_example)?;
            }
            print_json(&json!({
                "variant": record.variant,
                "tsel_accuracy": record.report.tsel_accuracy,
                "ref_entity_accuracy": record.report.ref_entity_accuracy,
                "ref_exact_match": record.report.ref_exact_match,
            }));
        }
        Command::Tag { tagger, dialogues, out, corpus } => {
            let (t, _) = load_tagger(&resolve_input(&tagger))?;
            let dialogues: Vec<Dialogue> = read_json_list(&resolve_input(&dialogues))?;
            let mut predicted = Vec::new();
            for d in &dialogues {
                for (ui, u) in d.utterances().enumerate() {
                    for (start, end) in t.tag_utterance(u.tokens) {
                        predicted.push(Markable {
                            id: format!("{}_P{}", d.id, predicted.len()),
                            dialogue_id: d.id.clone(),
                            utterance_index: ui,
                            start_token: start,
                            end_token: end,
                            speaker: u.speaker,
                            flags: MarkableFlags::default(),
                            anaphora_of: None,
                            cataphora_of: None,
                        });
                    }
                }
            }
            write_json(&out, &predicted)?;
            let mut value = json!({ "dialogues": dialogues.len(), "markables": predicted.len() });
            if let Some(p) = corpus {
                let gold = ctx.corpus(&CorpusArg { corpus: p })?;
                let examples = commonground::tagger::tagging_examples(&gold, t.vocab())?;
                value["metrics"] = json!(evaluate_tagger(&t, &examples));
            }
            print_json(&value);
        }
        Command::Selfplay { model, agent, shared, games, tagger, out } => {
            let scenarios = selfplay_scenarios(&c.scenario, &shared, games, c.seed)?;
            let protocol = c.protocol.clone();
            let (mut transcripts, name) = match (agent, &model) {
                (Some(a), _) => {
                    let policy = match a {
                        Scripted::Random => ScriptedPolicy::UniformRandom,
                        Scripted::Lowest => ScriptedPolicy::LowestShared,
                    };
                    (play_scripted(policy, &scenarios, &protocol)?, format!("scripted-{a:?}").to_lowercase())
                }
                (None, Some(path)) => {
                    let (m, meta) = load_model(&resolve_input(path))?;
                    let sizes = c.scenario.sizes();
                    let mut ts = play_model(&m, sizes, &scenarios, &protocol)?;
                    if let Some(tp) = &tagger {
                        let (t, _) = load_tagger(&resolve_input(tp))?;
                        for (tr, s) in ts.iter_mut().zip(&scenarios) {
                            tr.referents = predict_transcript_referents(tr, s, &t, &m, sizes)?;
                        }
                    }
                    (ts, meta.config.variant.to_string())
                }
                (None, None) => return Err(Error::Usage("selfplay needs --model or --agent".into())),
            };
            transcripts.sort_by_key(|t| t.game);
            let rows = summarize(&transcripts);
            save_scenarios(&scenarios, &out.join("scenarios.json"))?;
            write_json_lines(&out.join("transcripts.jsonl"), &transcripts)?;
            report::selfplay_table(&rows).write(&out.join("summary.csv"))?;
            let summary = SelfplaySummary {
                agent: name,
                seed: c.seed,
                temperature: protocol.temperature,
                convention: "alternating turns from A; <selection> ends the dialogue; utterance cap forces selection".into(),
                rows,
            };
            write_json(&out.join("summary.json"), &summary)?;
            print_json(&json!(summary));
        }
        Command::Render { what } => render(&ctx, what)?,
        Command::Report { evals, selfplay, out } => {
            let records: Vec<EvalRecord> = evals.iter().map(|p| read_json(&resolve_input(p))).collect::<Result<_>>()?;
            let plays: Vec<SelfplaySummary> = selfplay.iter().map(|p| read_json(&resolve_input(p))).collect::<Result<_>>()?;
            let mut summaries = Vec::new();
            let mut shared: Vec<usize> = plays.iter().flat_map(|p| p.rows.iter().map(|r| r.num_shared)).collect();
            shared.sort_unstable();
            shared.dedup();
            let mut groups = Vec::new();
            for v in Variant::ALL {
                let reports: Vec<EvalReport> = records.iter().filter(|r| r.variant == v).map(|r| r.report.clone()).collect();
                let rows: Vec<Vec<SuccessRow>> = plays.iter().filter(|p| p.agent == v.as_str()).map(|p| p.rows.clone()).collect();
                if reports.is_empty() && rows.is_empty() {
                    continue;
                }
                summaries.push(summarize_seeds(v.as_str(), &reports, &rows));
                if v.has_ref() && !reports.is_empty() {
                    groups.push((v.as_str(), summarize_groups(&reports)));
                }
            }
            report::results_table(&summaries, &shared).write(&out.join("results.csv"))?;
            for (name, g) in &groups {
                report::grouped_table(g).write(&out.join(format!("grouped_{name}.csv")))?;
            }
            let value = json!({ "results": summaries, "grouped": groups });
            write_json(&out.join("report.json"), &value)?;
            print_json(&value);
        }
    }
    Ok(())
}

fn render(ctx: &Context, what: RenderCommand) -> Result<()> {
    let layout = Layout::default();
    let (svg, out) = match what {
        RenderCommand::Scenario { scenarios, id, player, shared, out } => {
            let all = load_scenarios(&resolve_input(&scenarios))?;
            let s = all.iter().find(|s| s.id == id).ok_or_else(|| Error::Usage(format!("unknown scenario {id}")))?;
            let svg = match player {
                Some(p) => {
                    let h = if shared {
                        vec![crate::render::Highlight { color: crate::render::palette(0).into(), entities: s.shared_ids() }]
                    } else {
                        vec![]
                    };
                    render_view(s, p.into(), &h, &layout)?
                }
                None => render_scenario(s, shared, &layout)?,
            };
            (svg, out)
        }
        RenderCommand::Dialogue { corpus, id, gold, out } => {
            let corpus = ctx.corpus(&corpus)?;
            let gold = ctx.gold(&corpus, &gold)?;
            (render_dialogue(&dialogue_with_gold(&corpus, &id, &gold)?, &layout)?, out)
        }
        RenderCommand::Judgements { corpus, markable, out } => {
            let corpus = ctx.corpus(&corpus)?;
            (render_dialogue(&markable_judgements(&corpus, &markable)?, &layout)?, out)
        }
        RenderCommand::Transcript { transcripts, scenarios, game, out } => {
            let ts: Vec<GameTranscript> = read_json_lines(&resolve_input(&transcripts))?;
            let all = load_scenarios(&resolve_input(&scenarios))?;
            let t = ts.iter().find(|t| t.game == game).ok_or_else(|| Error::Usage(format!("unknown game {game}")))?;
            let s = all
                .iter()
                .find(|s| s.id == t.scenario_id)
                .ok_or_else(|| Error::Usage(format!("unknown scenario {}", t.scenario_id)))?;
            (render_dialogue(&transcript_spec(t, s), &layout)?, out)
        }
    };
    write_atomic(&out, svg.as_bytes())?;
    print_json(&json!({ "written": out }));
    Ok(())
}
