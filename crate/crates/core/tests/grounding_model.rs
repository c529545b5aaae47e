use commonground::agreement::aggregate_gold;
use commonground::model::{
    build_examples, train, GradientBackend, GroundingModel, Head, LossWeights, ModelConfig, ModelExample, Sequential, Variant, Vocab,
};
use commonground::neural::{gradient_check, AdamConfig, GradCheckConfig};
use commonground::rng;
use commonground::synth::{synthesize, SynthConfig};
use commonground::{AnnotatedCorpus, ScenarioConfig, ViewMask};
use rand::seq::SliceRandom;

fn corpus(dialogues: usize, seed: u64) -> AnnotatedCorpus {
    synthesize(&SynthConfig { dialogues, seed, ..Default::default() }).unwrap()
}

fn examples(c: &AnnotatedCorpus) -> (Vocab, Vec<ModelExample>) {
    let gold = aggregate_gold(c).unwrap();
    let vocab = Vocab::build(c.vocabulary().keys().map(String::as_str));
    let ex = build_examples(c, &gold, &vocab, ScenarioConfig::default().sizes()).unwrap();
    (vocab, ex)
}

fn tiny(variant: Variant, seed: u64) -> ModelConfig {
    ModelConfig {
        variant,
        token_dim: 6,
        hidden_dim: 5,
        attr_dim: 4,
        rel_dim: 3,
        attention_dim: 5,
        dropout: 0.25,
        loss_weights: LossWeights { tsel: 1.0, reference: 0.7, dial: 1.3 },
        seed,
        ..ModelConfig::default()
    }
}

fn small(variant: Variant, seed: u64) -> ModelConfig {
    ModelConfig {
        variant,
        token_dim: 32,
        hidden_dim: 48,
        attr_dim: 16,
        rel_dim: 16,
        attention_dim: 32,
        dropout: 0.0,
        optimizer: AdamConfig { lr: 5e-3, ..AdamConfig::default() },
        patience: 1000,
        seed,
        ..ModelConfig::default()
    }
}

#[test]
fn serialization_covers_all_messages_and_selection() {
    let c = corpus(5, 1);
    let (vocab, ex) = examples(&c);
    assert_eq!(ex.len(), 10);
    for e in &ex {
        let d = c.dialogue(&e.dialogue_id).unwrap();
        let msg_tokens: usize = d.utterances().map(|u| u.tokens.len() + 2).sum();
        assert_eq!(e.tokens.len(), msg_tokens + 2);
        assert_eq!(e.tokens[e.tokens.len() - 1], vocab.id("<selection>"));
        assert!(e.target.is_some());
        assert_eq!(e.entities.len(), 7);
        for r in &e.refs {
            assert!(r.start <= r.end && r.end < r.utterance_end && r.utterance_end < e.tokens.len());
            assert_eq!(e.tokens[r.utterance_end], vocab.id("<eos>"));
        }
        let speakers = e.tokens.iter().filter(|&&t| t == vocab.id("YOU:") || t == vocab.id("THEM:")).count();
        assert_eq!(speakers, d.utterances().count() + 1);
        assert!(e.tokens.iter().zip(&e.predict).all(|(&t, &p)| p != (t == 1 || t == 2)));
    }
    // The two perspectives differ only in speaker markers and targets.
    let swap = |t: usize| match t {
        1 => 2,
        2 => 1,
        t => t,
    };
    assert_eq!(ex[0].tokens.iter().map(|&t| swap(t)).collect::<Vec<_>>(), ex[1].tokens);
}

#[test]
fn zero_encoder_weights_give_zero_embeddings() {
    let c = corpus(1, 2);
    let (vocab, ex) = examples(&c);
    let mut m = GroundingModel::new(tiny(Variant::Tsel, 0), vocab).unwrap();
    for name in ["entity.attr.weight", "entity.attr.bias", "entity.rel.weight", "entity.rel.bias"] {
        let id = m.store().id(name).unwrap();
        m.store_mut().get_mut(id).fill(0.0);
    }
    for e in m.encode_entities(&ex[0].entities).unwrap() {
        assert!(e.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn entity_embedding_invariant_to_order_of_others() {
    let c = corpus(3, 3);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::Tsel, 1), vocab).unwrap();
    let base = m.encode_entities(&ex[0].entities).unwrap();
    let mut ents = ex[0].entities.clone();
    ents[1..].reverse();
    let perm = m.encode_entities(&ents).unwrap();
    for (a, b) in base[0].iter().zip(&perm[0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(base[0].len(), 7);
}

#[test]
fn wrong_entity_count_is_rejected() {
    let c = corpus(1, 4);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::Tsel, 1), vocab).unwrap();
    assert!(m.encode_entities(&ex[0].entities[..6]).is_err());
}

#[test]
fn attention_symmetry_and_zero_head() {
    let c = corpus(1, 5);
    let (vocab, ex) = examples(&c);
    let mut m = GroundingModel::new(tiny(Variant::TselRefDial, 2), vocab).unwrap();
    let q = [0.3, -0.2, 0.1, 0.5, -0.4];
    let same = vec![ex[0].entities[0]; 7];
    let s = m.attention_scores(&same, &q, Head::Ref).unwrap();
    assert!(s.iter().all(|v| (v - s[0]).abs() < 1e-12));
    let id = m.store().id("attn.v_dial").unwrap();
    m.store_mut().get_mut(id).fill(0.0);
    let s = m.attention_scores(&ex[0].entities, &q, Head::Dial).unwrap();
    assert!(s.iter().all(|v| *v == 0.0));
    assert!(m.attention_scores(&ex[0].entities, &q[..4], Head::Dial).is_err());
}

#[test]
fn uniform_outputs_from_zeroed_layers() {
    let c = corpus(1, 6);
    let (vocab, ex) = examples(&c);
    let nv = vocab.len();
    let mut m = GroundingModel::new(tiny(Variant::TselRefDial, 3), vocab).unwrap();
    for name in ["attn.v_tsel", "attn.v_ref", "dial.out.weight", "dial.out.bias"] {
        let id = m.store().id(name).unwrap();
        m.store_mut().get_mut(id).fill(0.0);
    }
    let p = m.predict(&ex[0]).unwrap();
    for v in p.tsel.unwrap() {
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
    }
    for row in p.refs.unwrap() {
        assert!(row.iter().all(|v| (*v - 0.5).abs() < 1e-12));
    }
    let mut st = m.start(&ex[0].entities).unwrap();
    m.feed(&mut st, ex[0].tokens[0]);
    let probs = m.next_token_probs(&st).unwrap();
    assert_eq!(probs.len(), nv);
    assert!(probs.iter().all(|v| (v - 1.0 / nv as f64).abs() < 1e-12));
}

#[test]
fn distributions_normalize() {
    let c = corpus(2, 7);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::TselRefDial, 4), vocab).unwrap();
    let p = m.predict(&ex[1]).unwrap();
    assert!((p.tsel.unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut st = m.start(&ex[1].entities).unwrap();
    for &t in &ex[1].tokens[..5] {
        m.feed(&mut st, t);
        assert!((m.next_token_probs(&st).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn variant_gating() {
    let c = corpus(2, 8);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::Tsel, 5), vocab.clone()).unwrap();
    assert!(m.parameter_names().all(|n| !n.starts_with("dial") && n != "attn.v_ref" && n != "attn.v_dial"));
    let l = m.example_loss(&ex[0], None, None, 1.0).unwrap();
    assert_eq!((l.ref_examples, l.dial_examples, l.tsel_examples), (0, 0, 1));
    assert_eq!(l.total, l.tsel);
    let p = m.predict(&ex[0]).unwrap();
    assert!(p.refs.is_none());
    let st = m.start(&ex[0].entities).unwrap();
    assert!(m.next_token_probs(&st).is_err());

    let r = GroundingModel::new(tiny(Variant::Ref, 5), vocab).unwrap();
    let l = r.example_loss(&ex[0], None, None, 1.0).unwrap();
    assert_eq!((l.tsel_examples, l.dial_examples), (0, 0));
    assert!(r.predict(&ex[0]).unwrap().tsel.is_none());
}

#[test]
fn incremental_inference_matches_training_forward() {
    let c = corpus(3, 9);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::TselRefDial, 6), vocab).unwrap();
    for e in &ex {
        let l = m.example_loss(e, None, None, 1.0).unwrap();
        let p = m.predict(e).unwrap();
        assert!((l.tsel + p.tsel.unwrap()[e.target.unwrap()].ln()).abs() < 1e-12);
        if !e.refs.is_empty() {
            let mut bce = 0.0;
            for (r, probs) in e.refs.iter().zip(p.refs.unwrap()) {
                for (i, y) in r.gold.to_bools().into_iter().enumerate() {
                    bce -= if y { probs[i].ln() } else { (1.0 - probs[i]).ln() };
                }
            }
            assert!((l.reference - bce / (7 * e.refs.len()) as f64).abs() < 1e-10);
        }
        let mut st = m.start(&e.entities).unwrap();
        let mut nll = 0.0;
        for t in 0..e.tokens.len() {
            if t > 0 && e.predict[t] {
                nll -= m.next_token_probs(&st).unwrap()[e.tokens[t]].ln();
            }
            m.feed(&mut st, e.tokens[t]);
        }
        assert!((l.dial - nll / e.dial_targets() as f64).abs() < 1e-10);
    }
}

#[test]
fn gradient_check_every_variant() {
    let c = corpus(2, 10);
    let (vocab, ex) = examples(&c);
    for (k, variant) in Variant::ALL.into_iter().enumerate() {
        let model = GroundingModel::new(tiny(variant, 20 + k as u64), vocab.clone()).unwrap();
        let mut store = model.store().clone();
        let cfg = GradCheckConfig { max_entries_per_param: Some(60), ..GradCheckConfig::default() };
        let report = gradient_check(&mut store, cfg, |s, mut g| {
            let mut m = model.clone();
            *m.store_mut() = s.clone();
            let mut total = 0.0;
            for (i, e) in ex.iter().enumerate() {
                let mut r = rng::seeded(100 + i as u64);
                total += m.example_loss(e, Some(&mut r), g.as_deref_mut(), 0.5).unwrap().total * 0.5;
            }
            total
        });
        assert!(report.max_rel_error < 1e-4, "{variant}: {report:?}");
        assert!(report.checked > 100);
    }
}

#[test]
fn entity_permutation_equivariance() {
    let c = corpus(3, 11);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(tiny(Variant::TselRef, 7), vocab).unwrap();
    let mut r = rng::seeded(3);
    for e in &ex {
        let mut perm: Vec<usize> = (0..7).collect();
        perm.shuffle(&mut r);
        let mut pe = e.clone();
        pe.entities = perm.iter().map(|&i| e.entities[i]).collect();
        let a = m.predict(e).unwrap();
        let b = m.predict(&pe).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((a.tsel.unwrap()[i] - b.tsel.unwrap()[j]).abs() < 1e-12);
            for (ra, rb) in a.refs.as_ref().unwrap().iter().zip(b.refs.as_ref().unwrap()) {
                assert!((ra[i] - rb[j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn training_is_deterministic() {
    let c = corpus(6, 12);
    let (vocab, ex) = examples(&c);
    let run = || {
        let cfg = ModelConfig { epochs: 2, batch_size: 4, dropout: 0.3, ..small(Variant::TselRefDial, 9) };
        let m = GroundingModel::new(cfg, vocab.clone()).unwrap();
        train(m, &ex[..8], &ex[8..], &Sequential, &mut |_| {}).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.history, b.history);
    for ((_, _, x), (_, _, y)) in a.model.store().iter().zip(b.model.store().iter()) {
        assert_eq!(x, y);
    }
}

#[test]
fn evaluation_is_order_independent() {
    let c = corpus(4, 13);
    let (vocab, ex) = examples(&c);
    let m = GroundingModel::new(small(Variant::TselRefDial, 3), vocab).unwrap();
    let fwd: Vec<_> = ex.iter().map(|e| m.predict(e).unwrap()).collect();
    let mut rev: Vec<_> = ex.iter().rev().map(|e| m.predict(e).unwrap()).collect();
    rev.reverse();
    assert_eq!(fwd, rev);
}

#[test]
fn ref_overfits_single_example() {
    let c = corpus(3, 14);
    let (vocab, ex) = examples(&c);
    let e = ex.iter().find(|e| e.refs.len() >= 2).unwrap().clone();
    let cfg = ModelConfig { epochs: 60, batch_size: 4, ..small(Variant::Ref, 5) };
    let m = GroundingModel::new(cfg, vocab).unwrap();
    let out = train(m, &vec![e.clone(); 8], &[], &Sequential, &mut |_| {}).unwrap();
    let loss = out.model.example_loss(&e, None, None, 1.0).unwrap();
    assert!(loss.reference < 0.02, "{loss:?}");
    for (r, probs) in e.refs.iter().zip(out.model.predict(&e).unwrap().refs.unwrap()) {
        let pred = ViewMask::from_positions((0..7).filter(|&i| probs[i] > 0.5));
        assert_eq!(pred, r.gold);
    }
}

#[test]
fn dial_overfits_ten_dialogues() {
    let c = corpus(10, 15);
    let (vocab, ex) = examples(&c);
    let cfg = ModelConfig { epochs: 60, batch_size: 4, ..small(Variant::TselDial, 6) };
    let m = GroundingModel::new(cfg, vocab).unwrap();
    let out = train(m, &ex, &[], &Sequential, &mut |_| {}).unwrap();
    let loss = Sequential.evaluate(&out.model, &ex).unwrap();
    let ppl = loss.dial.exp();
    assert!(ppl < 1.5, "perplexity {ppl}");
}

#[test]
fn ref_fits_fifty_dialogues_within_thirty_epochs() {
    let c = corpus(50, 16);
    let (vocab, ex) = examples(&c);
    let cfg = ModelConfig {
        epochs: 30,
        batch_size: 4,
        optimizer: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
        ..small(Variant::Ref, 7)
    };
    let m = GroundingModel::new(cfg, vocab).unwrap();
    let out = train(m, &ex, &[], &Sequential, &mut |_| {}).unwrap();
    let (mut right, mut total) = (0usize, 0usize);
    for e in &ex {
        for (r, probs) in e.refs.iter().zip(out.model.predict(e).unwrap().refs.unwrap()) {
            for (i, y) in r.gold.to_bools().into_iter().enumerate() {
                right += usize::from((probs[i] > 0.5) == y);
                total += 1;
            }
        }
    }
    let acc = right as f64 / total as f64;
    eprintln!("training REF entity accuracy {acc}");
    assert!(acc > 0.95);
}

#[test]
fn divergence_is_reported() {
    let c = corpus(2, 17);
    let (vocab, ex) = examples(&c);
    let mut m = GroundingModel::new(tiny(Variant::Tsel, 8), vocab).unwrap();
    let id = m.store().id("attn.v_tsel").unwrap();
    m.store_mut().get_mut(id).data_mut()[0] = f64::NAN;
    let err = train(m, &ex, &[], &Sequential, &mut |_| {}).unwrap_err();
    assert!(matches!(err, commonground::model::ModelError::Divergence { epoch: 1, batch: 0, .. }), "{err}");
}
