//! Markable detection as BIO tagging: token embeddings, a bidirectional GRU
//! and a linear-chain CRF decoded under BIO constraints.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnnotatedCorpus;
use crate::model::Vocab;
use crate::neural::{
    clip_grad_norm, crf_nll, crf_viterbi_constrained, dropout_mask, Adam, AdamConfig, Array, Embedding, Gradients,
    GruCell, Linear, NeuralError, ParamId, ParamStore,
};
use crate::rng::{self, derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::B, Tag::I, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tag {
        Tag::ALL[i]
    }
}

/// A span `[start, end)` of token indices.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaggerError {
    #[error("span {0:?} is empty or exceeds the utterance length {1}")]
    SpanOutOfRange(Span, usize),
    #[error("spans {0:?} and {1:?} overlap")]
    Overlap(Span, Span),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("no non-empty training utterances")]
    EmptyTrainingSet,
    #[error("invalid tagger configuration")]
    InvalidConfig,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Gold BIO tags for non-overlapping spans.
pub fn spans_to_bio(len: usize, spans: &[Span]) -> Result<Vec<Tag>, TaggerError> {
    let mut tags = vec![Tag::O; len];
    let mut sorted = spans.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(TaggerError::Overlap(w[0], w[1]));
        }
    }
    for &(s, e) in &sorted {
        if s >= e || e > len {
            return Err(TaggerError::SpanOutOfRange((s, e), len));
        }
        tags[s] = Tag::B;
        tags[s + 1..e].fill(Tag::I);
    }
    Ok(tags)
}

/// Spans of a tag sequence. An `I` without an open span starts one.
pub fn bio_to_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (t, tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(s) = open {
                    spans.push((s, t));
                }
                open = Some(t);
            }
            Tag::I => {
                open.get_or_insert(t);
            }
            Tag::O => {
                if let Some(s) = open.take() {
                    spans.push((s, t));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push((s, tags.len()));
    }
    spans
}

/// One utterance with gold tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingExample {
    pub tokens: Vec<usize>,
    pub tags: Vec<Tag>,
}

/// One example per non-empty utterance, tagged from all markables.
pub fn tagging_examples(corpus: &AnnotatedCorpus, vocab: &Vocab) -> Result<Vec<TaggingExample>, TaggerError> {
    let mut out = Vec::new();
    for d in corpus.dialogues() {
        let mut spans: Vec<Vec<Span>> = vec![Vec::new(); d.utterances().count()];
        for m in corpus.markables_of(&d.id) {
            spans[m.utterance_index].push((m.start_token, m.end_token));
        }
        for (u, s) in d.utterances().zip(spans) {
            if u.tokens.is_empty() {
                continue;
            }
            out.push(TaggingExample {
                tokens: u.tokens.iter().map(|t| vocab.id(t)).collect(),
                tags: spans_to_bio(u.tokens.len(), &s)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub token_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub optimizer: AdamConfig,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            token_dim: 128,
            hidden_dim: 128,
            dropout: 0.2,
            optimizer: AdamConfig::default(),
            clip: 0.5,
            epochs: 20,
            batch_size: 16,
            patience: 3,
            seed: 0,
        }
    }
}

/// Transitions forbidden at decode time: `O → I`.
const ALLOWED: [bool; 9] = [true, true, true, true, true, true, true, false, true];
const START_ALLOWED: [bool; 3] = [true, false, true];

#[derive(Debug, Clone)]
pub struct Tagger {
    config: TaggerConfig,
    vocab: Vocab,
    store: ParamStore,
    embed: Embedding,
    forward: GruCell,
    backward: GruCell,
    emit: Linear,
    transitions: ParamId,
}

impl Tagger {
    pub fn new(config: TaggerConfig, vocab: Vocab) -> Result<Tagger, TaggerError> {
        if config.token_dim == 0 || config.hidden_dim == 0 || config.batch_size == 0 || !(0.0..1.0).contains(&config.dropout) {
            return Err(TaggerError::InvalidConfig);
        }
        let mut s = ParamStore::new(config.seed);
        let embed = Embedding::new(&mut s, "embed", vocab.len(), config.token_dim);
        let forward = GruCell::new(&mut s, "gru_fwd", config.token_dim, config.hidden_dim);
        let backward = GruCell::new(&mut s, "gru_bwd", config.token_dim, config.hidden_dim);
        let emit = Linear::new(&mut s, "emit", 2 * config.hidden_dim, 3, true);
        let transitions = s.add_zeros("transitions", &[3, 3]);
        Ok(Tagger { config, vocab, store: s, embed, forward, backward, emit, transitions })
    }

    pub fn config(&self) -> &TaggerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// CRF negative log-likelihood of the gold tags. With `grads`, adds the
    /// gradient of `scale × nll`.
    pub fn loss(
        &self,
        ex: &TaggingExample,
        dropout: Option<&mut Rng>,
        grads: Option<&mut Gradients>,
        scale: f64,
    ) -> Result<f64, TaggerError> {
        let s = &self.store;
        let c = &self.config;
        let t_len = ex.tokens.len();
        let h = c.hidden_dim;
        let (mx, mh): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match dropout {
            Some(r) if c.dropout > 0.0 => (
                (0..t_len).map(|_| dropout_mask(r, c.token_dim, c.dropout)).collect(),
                (0..t_len).map(|_| dropout_mask(r, 2 * h, c.dropout)).collect(),
            ),
            _ => (Vec::new(), Vec::new()),
        };
        let xs: Vec<Vec<f64>> = ex
            .tokens
            .iter()
            .enumerate()
            .map(|(t, &tok)| mul_mask(self.embed.lookup(s, tok), mx.get(t)))
            .collect();
        let fwd = self.forward.run(s, xs.iter().map(Vec::as_slice));
        let bwd = self.backward.run(s, xs.iter().rev().map(Vec::as_slice));
        let feats: Vec<Vec<f64>> = (0..t_len)
            .map(|t| {
                let mut f = fwd.output(t).to_vec();
                f.extend_from_slice(bwd.output(t_len - 1 - t));
                mul_mask(&f, mh.get(t))
            })
            .collect();
        let mut em = Array::zeros(&[t_len, 3]);
        for (t, f) in feats.iter().enumerate() {
            self.emit.forward_into(s, f, em.row_mut(t));
        }
        let gold: Vec<usize> = ex.tags.iter().map(|t| t.index()).collect();
        let (nll, g) = crf_nll(&em, s.get(self.transitions), &gold)?;
        let Some(grads) = grads else { return Ok(nll) };

        grads.get_mut(self.transitions).add_scaled(&g.transitions, scale);
        let mut dhf = vec![vec![0.0; h]; t_len];
        let mut dhb = vec![vec![0.0; h]; t_len];
        for t in 0..t_len {
            let de: Vec<f64> = g.emissions.row(t).iter().map(|v| v * scale).collect();
            let mut df = vec![0.0; 2 * h];
            self.emit.backward(s, grads, &feats[t], &de, Some(&mut df));
            let df = mul_mask(&df, mh.get(t));
            dhf[t].copy_from_slice(&df[..h]);
            dhb[t_len - 1 - t].copy_from_slice(&df[h..]);
        }
        let dxf = self.forward.run_backward(s, grads, &fwd, &dhf);
        let dxb = self.backward.run_backward(s, grads, &bwd, &dhb);
        for t in 0..t_len {
            let mut dx = dxf[t].clone();
            crate::neural::ops::add_assign(&mut dx, &dxb[t_len - 1 - t]);
            let dx = mul_mask(&dx, mx.get(t));
            self.embed.backward(grads, ex.tokens[t], &dx);
        }
        Ok(nll)
    }

    fn emissions(&self, tokens: &[usize]) -> Array {
        let s = &self.store;
        let xs: Vec<&[f64]> = tokens.iter().map(|&t| self.embed.lookup(s, t)).collect();
        let fwd = self.forward.run(s, xs.iter().copied());
        let bwd = self.backward.run(s, xs.iter().rev().copied());
        let n = tokens.len();
        let mut em = Array::zeros(&[n, 3]);
        for t in 0..n {
            let mut f = fwd.output(t).to_vec();
            f.extend_from_slice(bwd.output(n - 1 - t));
            self.emit.forward_into(s, &f, em.row_mut(t));
        }
        em
    }

    /// Constrained Viterbi tags for token ids.
    pub fn tag_ids(&self, tokens: &[usize]) -> Vec<Tag> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let em = self.emissions(tokens);
        let (path, _) = crf_viterbi_constrained(&em, self.store.get(self.transitions), Some(&START_ALLOWED), Some(&ALLOWED))
            .expect("finite emissions of a trained tagger");
        path.into_iter().map(Tag::from_index).collect()
    }

    pub fn tag(&self, tokens: &[String]) -> Vec<Tag> {
        let ids: Vec<usize> = tokens.iter().map(|t| self.vocab.id(t)).collect();
        self.tag_ids(&ids)
    }

    /// Markable spans of an utterance.
    pub fn tag_utterance(&self, tokens: &[String]) -> Vec<Span> {
        bio_to_spans(&self.tag(tokens))
    }
}

fn mul_mask(x: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaggerMetrics {
    pub token_accuracy: f64,
    pub span_precision: f64,
    pub span_recall: f64,
    pub span_f1: f64,
    pub tokens: usize,
    pub utterances: usize,
}

/// Token-level B/I/O accuracy plus exact-span precision, recall and F1.
pub fn score_tags(pairs: &[(Vec<Tag>, Vec<Tag>)]) -> TaggerMetrics {
    let (mut right, mut tokens, mut tp, mut n_pred, mut n_gold) = (0, 0, 0, 0, 0);
    for (pred, gold) in pairs {
        tokens += gold.len();
        right += pred.iter().zip(gold).filter(|(a, b)| a == b).count();
        let ps = bio_to_spans(pred);
        let gs = bio_to_spans(gold);
        tp += ps.iter().filter(|s| gs.contains(s)).count();
        n_pred += ps.len();
        n_gold += gs.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (p, r) = (ratio(tp, n_pred), ratio(tp, n_gold));
    TaggerMetrics {
        token_accuracy: ratio(right, tokens),
        span_precision: p,
        span_recall: r,
        span_f1: if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) },
        tokens,
        utterances: pairs.len(),
    }
}

pub fn evaluate_tagger(tagger: &Tagger, examples: &[TaggingExample]) -> TaggerMetrics {
    let pairs: Vec<(Vec<Tag>, Vec<Tag>)> = examples.iter().map(|e| (tagger.tag_ids(&e.tokens), e.tags.clone())).collect();
    score_tags(&pairs)
}

/// Batch gradients for tagger training; implementations sum per-example
/// gradients in batch order.
pub trait TaggerBackend {
    fn batch_gradient(
        &self,
        tagger: &Tagger,
        batch: &[&TaggingExample],
        seeds: &[u64],
    ) -> Result<(Gradients, f64), TaggerError>;

    fn evaluate(&self, tagger: &Tagger, examples: &[TaggingExample]) -> TaggerMetrics {
        evaluate_tagger(tagger, examples)
    }
}

/// Gradient of `scale × nll` for one utterance with its own dropout stream.
pub fn tagger_example_gradient(
    tagger: &Tagger,
    ex: &TaggingExample,
    seed: u64,
    scale: f64,
) -> Result<(Gradients, f64), TaggerError> {
    let mut g = tagger.store().gradients();
    let mut r = rng::seeded(seed);
    let nll = tagger.loss(ex, Some(&mut r), Some(&mut g), scale)?;
    Ok((g, nll))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialTagger;

impl TaggerBackend for SequentialTagger {
    fn batch_gradient(
        &self,
        tagger: &Tagger,
        batch: &[&TaggingExample],
        seeds: &[u64],
    ) -> Result<(Gradients, f64), TaggerError> {
        let scale = 1.0 / batch.len() as f64;
        let mut total = tagger.store().gradients();
        let mut loss = 0.0;
        for (ex, seed) in batch.iter().zip(seeds) {
            let (g, l) = tagger_example_gradient(tagger, ex, *seed, scale)?;
            total.add(&g);
            loss += l * scale;
        }
        Ok((total, loss))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerEpoch {
    pub epoch: usize,
    /// Mean per-utterance negative log-likelihood.
    pub loss: f64,
    pub valid: TaggerMetrics,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TaggerOutcome {
    pub tagger: Tagger,
    pub history: Vec<TaggerEpoch>,
    pub best_epoch: usize,
}

/// Maximizes the CRF log-likelihood with Adam; early stopping on validation
/// token accuracy (training accuracy when `valid` is empty).
pub fn train_tagger(
    mut tagger: Tagger,
    train: &[TaggingExample],
    valid: &[TaggingExample],
    backend: &dyn TaggerBackend,
    on_epoch: &mut dyn FnMut(&TaggerEpoch),
) -> Result<TaggerOutcome, TaggerError> {
    let train: Vec<&TaggingExample> = train.iter().filter(|e| !e.tokens.is_empty()).collect();
    if train.is_empty() {
        return Err(TaggerError::EmptyTrainingSet);
    }
    let c = tagger.config.clone();
    let mut adam = Adam::new(c.optimizer, &tagger.store);
    let mut best = tagger.store.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let train_owned: Vec<TaggingExample>;
    let valid = if valid.is_empty() {
        train_owned = train.iter().map(|e| (*e).clone()).collect();
        &train_owned[..]
    } else {
        valid
    };
    for epoch in 1..=c.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(c.seed, 1, epoch as u64));
        let base = derive_seed(derive_seed(c.seed, 2), epoch as u64);
        let mut loss_sum = 0.0;
        for idx in order.chunks(c.batch_size) {
            let batch: Vec<&TaggingExample> = idx.iter().map(|&i| train[i]).collect();
            let seeds: Vec<u64> = idx.iter().map(|&i| derive_seed(base, i as u64)).collect();
            let (mut g, loss) = backend.batch_gradient(&tagger, &batch, &seeds)?;
            if !loss.is_finite() {
                return Err(TaggerError::Divergence { epoch, loss });
            }
            clip_grad_norm(&mut g, c.clip);
            adam.step(&mut tagger.store, &g)?;
            loss_sum += loss * batch.len() as f64;
        }
        let metrics = backend.evaluate(&tagger, valid);
        let improved = metrics.token_accuracy > best_acc;
        if improved {
            best_acc = metrics.token_accuracy;
            best.clone_from(&tagger.store);
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let record = TaggerEpoch { epoch, loss: loss_sum / train.len() as f64, valid: metrics, improved };
        on_epoch(&record);
        history.push(record);
        if stale >= c.patience {
            break;
        }
    }
    tagger.store = best;
    Ok(TaggerOutcome { tagger, history, best_epoch })
}
