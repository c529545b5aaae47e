use commonground::agreement::aggregate_gold;
use commonground::evaluation::example_outcome;
use commonground::model::{build_examples, GroundingModel, ModelConfig, Variant, Vocab};
use commonground::synth::{synthesize, SynthConfig};
use commonground::tagger::{tagging_examples, Tagger, TaggerConfig};
use commonground::{AnnotatedCorpus, ScenarioConfig};
use serde_json::json;
use workbench::checkpoint::{load_model, load_tagger, save_model, save_tagger, sidecar_path};
use workbench::corpus_io::{load_corpus, load_gold, save_corpus};
use workbench::import::{import_dataset, ImportOptions};
use workbench::io::write_json;

fn synth(n: usize, seed: u64) -> AnnotatedCorpus {
    synthesize(&SynthConfig { dialogues: n, seed, ..Default::default() }).unwrap()
}

#[test]
fn corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(25, 4);
    save_corpus(&corpus, dir.path()).unwrap();
    assert_eq!(load_corpus(dir.path()).unwrap(), corpus);
}

#[test]
fn empty_corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = AnnotatedCorpus::new(vec![], vec![], vec![], vec![]).unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    assert_eq!(load_corpus(dir.path()).unwrap(), corpus);
}

#[test]
fn gold_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gold = aggregate_gold(&synth(10, 1)).unwrap();
    let path = dir.path().join("gold.json");
    write_json(&path, &gold).unwrap();
    assert_eq!(load_gold(&path).unwrap(), gold);
}

#[test]
fn model_checkpoint_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(8, 2);
    let gold = aggregate_gold(&corpus).unwrap();
    let vocab = Vocab::build(corpus.vocabulary().keys().map(String::as_str));
    let sizes = ScenarioConfig::default().sizes();
    let config = ModelConfig { variant: Variant::TselRefDial, token_dim: 8, hidden_dim: 8, attr_dim: 4, rel_dim: 4, attention_dim: 8, seed: 9, ..ModelConfig::default() };
    let model = GroundingModel::new(config, vocab).unwrap();
    let path = dir.path().join("model.ckpt");
    save_model(&path, &model, sizes, &[], 0).unwrap();
    assert!(sidecar_path(&path).exists());

    let (loaded, meta) = load_model(&path).unwrap();
    assert_eq!(meta.sizes, sizes);
    assert_eq!(loaded.config(), model.config());
    assert_eq!(loaded.vocab(), model.vocab());
    let a: Vec<_> = model.store().iter().map(|(_, n, x)| (n.to_string(), x.clone())).collect();
    let b: Vec<_> = loaded.store().iter().map(|(_, n, x)| (n.to_string(), x.clone())).collect();
    assert_eq!(a, b);
    for ex in build_examples(&corpus, &gold, model.vocab(), sizes).unwrap() {
        assert_eq!(example_outcome(&model, &ex).unwrap(), example_outcome(&loaded, &ex).unwrap());
    }
}

#[test]
fn tagger_checkpoint_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(5, 3);
    let vocab = Vocab::build(corpus.vocabulary().keys().map(String::as_str));
    let tagger = Tagger::new(TaggerConfig { token_dim: 6, hidden_dim: 5, seed: 2, ..Default::default() }, vocab).unwrap();
    let path = dir.path().join("tagger.ckpt");
    save_tagger(&path, &tagger, &[], 0).unwrap();
    let (loaded, _) = load_tagger(&path).unwrap();
    for ex in tagging_examples(&corpus, tagger.vocab()).unwrap() {
        assert_eq!(tagger.tag_ids(&ex.tokens), loaded.tag_ids(&ex.tokens));
    }
    let a: Vec<_> = tagger.store().iter().map(|(_, _, x)| x.clone()).collect();
    let b: Vec<_> = loaded.store().iter().map(|(_, _, x)| x.clone()).collect();
    assert_eq!(a, b);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(3, 3);
    let vocab = Vocab::build(corpus.vocabulary().keys().map(String::as_str));
    let config = ModelConfig { token_dim: 4, hidden_dim: 4, attr_dim: 4, rel_dim: 4, attention_dim: 4, ..ModelConfig::default() };
    let model = GroundingModel::new(config, vocab).unwrap();
    let path = dir.path().join("m.ckpt");
    save_model(&path, &model, ScenarioConfig::default().sizes(), &[], 0).unwrap();
    let text = std::fs::read_to_string(&path).unwrap().replacen("commonground-parameters", "other", 1);
    std::fs::write(&path, text).unwrap();
    let err = load_model(&path).unwrap_err();
    assert_eq!(err.kind(), "checkpoint");
}

/// One scenario in released coordinates: player A's view centered at
/// (215, 215) with radius 200, player B's knowledge base in its own frame.
fn released_fixture(dir: &std::path::Path) -> commonground::Scenario {
    let corpus = synth(1, 11);
    let s = corpus.scenarios()[0].clone();
    let kb = |p: commonground::Player| {
        let v = s.view(p);
        let scale = 200.0 / v.radius;
        v.visible
            .iter()
            .map(|&id| {
                let e = s.entity(id).unwrap();
                json!({
                    "id": format!("{id}"),
                    "x": 215.0 + (e.x - v.center[0]) * scale,
                    "y": 215.0 + (e.y - v.center[1]) * scale,
                    "size": e.size * scale,
                    "color": format!("rgb({0},{0},{0})", e.color.round()),
                })
            })
            .collect::<Vec<_>>()
    };
    let a_first = s.views.a.visible[0];
    let shared = s.shared_ids()[0];
    let chats = json!([
        {
            "uuid": "C1",
            "scenario_uuid": "S1",
            "scenario": { "kbs": [kb(commonground::Player::A), kb(commonground::Player::B)] },
            "events": [
                { "agent": 0, "action": "message", "data": "i have a large dot , pick it" },
                { "agent": 1, "action": "message", "data": "yes i see it" },
                { "agent": 0, "action": "select", "data": format!("{shared}") },
                { "agent": 1, "action": "select", "data": format!("{shared}") }
            ],
            "outcome": { "reward": 1 }
        },
        { "uuid": "C2", "scenario_uuid": "S1", "scenario": { "kbs": [[], []] }, "events": [] }
    ]);
    let text = "0: i have a large dot , pick it\n1: yes i see it";
    let markables = json!({
        "C1": {
            "text": text,
            "markables": [
                { "markable_id": "M1", "start": 10, "end": 21, "speaker": 0 },
                { "markable_id": "M2", "start": 29, "end": 31, "speaker": 0, "anaphora": "M1" }
            ]
        }
    });
    let judge = |r: u32| json!([
        { "annotator": "w1", "referents": [format!("agent_0_{r}")], "ambiguous": false, "unidentifiable": false },
        { "annotator": "w2", "referents": [r], "ambiguous": true, "unidentifiable": false },
        { "annotator": "w3", "referents": [r], "ambiguous": false, "unidentifiable": false }
    ]);
    let referents = json!({ "C1": { "M1": judge(a_first), "M2": judge(a_first) } });
    write_json(&dir.join("final_transcripts.json"), &chats).unwrap();
    write_json(&dir.join("markable_annotation.json"), &markables).unwrap();
    write_json(&dir.join("referent_annotation.json"), &referents).unwrap();
    s
}

#[test]
fn import_released_layout() {
    let dir = tempfile::tempdir().unwrap();
    let original = released_fixture(dir.path());
    let (corpus, report) = import_dataset(dir.path(), &ImportOptions::default()).unwrap();
    assert_eq!(report.chats, 2);
    assert_eq!(report.imported, 1);
    assert_eq!(report.skipped.len(), 1);

    let s = &corpus.scenarios()[0];
    assert_eq!(s.id, "S1");
    assert_eq!(s.num_shared, original.num_shared);
    assert_eq!(s.shared_ids(), original.shared_ids());
    assert_eq!(s.views.a.visible, original.views.a.visible);
    assert_eq!(s.views.b.visible, original.views.b.visible);
    // B's frame is recovered up to rounding of the transformed coordinates.
    let scale = 200.0 / original.views.a.radius;
    for e in &s.entities {
        let o = original.entity(e.id).unwrap();
        assert!((e.x - (215.0 + (o.x - original.views.a.center[0]) * scale)).abs() < 1e-6);
        assert!((e.y - (215.0 + (o.y - original.views.a.center[1]) * scale)).abs() < 1e-6);
    }

    let m = corpus.markables();
    assert_eq!(m.len(), 2);
    assert_eq!((m[0].id.as_str(), m[0].utterance_index, m[0].start_token, m[0].end_token), ("C1_M1", 0, 2, 5));
    assert_eq!((m[1].utterance_index, m[1].start_token, m[1].end_token), (0, 7, 8));
    assert_eq!(m[1].anaphora_of.as_deref(), Some("C1_M1"));
    assert_eq!(corpus.judgements().len(), 6);
    assert!(corpus.dialogues()[0].outcome);
}

#[test]
fn misaligned_offsets_name_the_markable() {
    let dir = tempfile::tempdir().unwrap();
    released_fixture(dir.path());
    let path = dir.path().join("markable_annotation.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"start\": 10", "\"start\": 1");
    std::fs::write(&path, text).unwrap();
    let err = import_dataset(dir.path(), &ImportOptions::default()).unwrap_err();
    assert!(err.to_string().contains("C1_M1"), "{err}");
}
