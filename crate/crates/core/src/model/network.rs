use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::example::ModelExample;
use super::vocab::Vocab;
use super::{ModelConfig, ModelError};
use crate::math;
use crate::neural::ops;
use crate::neural::{dropout_mask, Array, Embedding, Gradients, GruCell, Linear, ParamId, ParamStore};
use crate::rng::Rng;
use crate::scenario::{normalized_pair_features, NormalizedEntity, PAIR_FEATURES, VIEW_SIZE};

const ATTRS: usize = 4;

/// Attention heads. Each owns an output vector over the shared first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Tsel,
    Ref,
    Dial,
}

impl Head {
    fn name(self) -> &'static str {
        match self {
            Head::Tsel => "TSEL",
            Head::Ref => "REF",
            Head::Dial => "DIAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Layers {
    embed: Embedding,
    gru: GruCell,
    attr: Linear,
    rel: Linear,
    key: Linear,
    query: Linear,
    v_tsel: Option<ParamId>,
    v_ref: Option<ParamId>,
    v_dial: Option<ParamId>,
    dial_hidden: Option<Linear>,
    dial_out: Option<Linear>,
}

/// Per-example mean losses of the active heads, with the number of examples
/// each mean covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub tsel: f64,
    pub reference: f64,
    pub dial: f64,
    pub total: f64,
    pub tsel_examples: usize,
    pub ref_examples: usize,
    pub dial_examples: usize,
    pub examples: usize,
}

fn combine(a: f64, na: usize, b: f64, nb: usize) -> f64 {
    if na + nb == 0 {
        0.0
    } else {
        (a * na as f64 + b * nb as f64) / (na + nb) as f64
    }
}

impl LossBreakdown {
    pub fn merge(&mut self, other: &LossBreakdown) {
        self.tsel = combine(self.tsel, self.tsel_examples, other.tsel, other.tsel_examples);
        self.reference = combine(self.reference, self.ref_examples, other.reference, other.ref_examples);
        self.dial = combine(self.dial, self.dial_examples, other.dial, other.dial_examples);
        self.total = combine(self.total, self.examples, other.total, other.examples);
        self.tsel_examples += other.tsel_examples;
        self.ref_examples += other.ref_examples;
        self.dial_examples += other.dial_examples;
        self.examples += other.examples;
    }

    pub fn is_finite(&self) -> bool {
        self.tsel.is_finite() && self.reference.is_finite() && self.dial.is_finite() && self.total.is_finite()
    }
}

/// Inference outputs for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tsel: Option<[f64; VIEW_SIZE]>,
    /// Inclusion probabilities, one row per REF query of the example.
    pub refs: Option<Vec<[f64; VIEW_SIZE]>>,
}

/// Encoded entities of one view with the intermediates needed for backprop.
#[derive(Debug, Clone)]
struct Entities {
    attrs: Vec<[f64; ATTRS]>,
    attr_out: Vec<Vec<f64>>,
    pairs: Vec<[f64; PAIR_FEATURES]>,
    rel_out: Vec<Vec<f64>>,
    emb: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
}

struct Attention {
    u: Vec<Vec<f64>>,
    scores: [f64; VIEW_SIZE],
}

/// Decoding state for token-by-token generation.
#[derive(Debug, Clone)]
pub struct IncrementalState {
    entities: Entities,
    hidden: Vec<Vec<f64>>,
    h: Vec<f64>,
}

impl IncrementalState {
    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }

    pub fn entity_embeddings(&self) -> &[Vec<f64>] {
        &self.entities.emb
    }
}

#[derive(Debug, Clone)]
pub struct GroundingModel {
    config: ModelConfig,
    vocab: Vocab,
    store: ParamStore,
    layers: Layers,
}

impl GroundingModel {
    /// Registers the parameters of the configured variant. Heads that the
    /// variant does not train get no parameters.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<GroundingModel, ModelError> {
        config.validate()?;
        let c = &config;
        let v = c.variant;
        let e = c.entity_dim();
        let mut s = ParamStore::new(c.seed);
        let embed = Embedding::new(&mut s, "embed", vocab.len(), c.token_dim);
        let gru = GruCell::new(&mut s, "gru", c.token_dim, c.hidden_dim);
        let attr = Linear::new(&mut s, "entity.attr", ATTRS, c.attr_dim, true);
        let rel = Linear::new(&mut s, "entity.rel", PAIR_FEATURES, c.rel_dim, true);
        let key = Linear::new(&mut s, "attn.key", e, c.attention_dim, true);
        let query = Linear::new(&mut s, "attn.query", c.hidden_dim, c.attention_dim, false);
        let v_tsel = v.has_tsel().then(|| s.add_vector("attn.v_tsel", c.attention_dim, c.attention_dim));
        let v_ref = v.has_ref().then(|| s.add_vector("attn.v_ref", c.attention_dim, c.attention_dim));
        let v_dial = v.has_dial().then(|| s.add_vector("attn.v_dial", c.attention_dim, c.attention_dim));
        let dial_hidden = v.has_dial().then(|| Linear::new(&mut s, "dial.hidden", c.hidden_dim + e, c.hidden_dim, true));
        let dial_out = v.has_dial().then(|| Linear::new(&mut s, "dial.out", c.hidden_dim, vocab.len(), true));
        let layers = Layers { embed, gru, attr, rel, key, query, v_tsel, v_ref, v_dial, dial_hidden, dial_out };
        Ok(GroundingModel { config, vocab, store: s, layers })
    }

    pub fn config(&self) -> &ModelConfig {
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

    /// Replaces every parameter value; names and shapes must match.
    pub fn load_parameters<'a, I: IntoIterator<Item = (&'a str, &'a Array)>>(&mut self, entries: I) -> Result<(), ModelError> {
        self.store.load(entries)?;
        Ok(())
    }

    pub fn parameter_names(&self) -> impl Iterator<Item = String> + '_ {
        self.store.iter().map(|(_, n, _)| n.into())
    }

    fn head_vector(&self, head: Head) -> Result<ParamId, ModelError> {
        match head {
            Head::Tsel => self.layers.v_tsel,
            Head::Ref => self.layers.v_ref,
            Head::Dial => self.layers.v_dial,
        }
        .ok_or(ModelError::HeadInactive(head.name()))
    }

    fn encode(&self, entities: &[NormalizedEntity]) -> Result<Entities, ModelError> {
        if entities.len() != VIEW_SIZE {
            return Err(ModelError::WrongEntityCount(entities.len()));
        }
        let l = &self.layers;
        let s = &self.store;
        let attrs: Vec<[f64; ATTRS]> = entities.iter().map(|e| e.to_array()).collect();
        let attr_out: Vec<Vec<f64>> = attrs
            .iter()
            .map(|a| {
                let mut y = l.attr.forward(s, a);
                ops::tanh_in_place(&mut y);
                y
            })
            .collect();
        let mut pairs = vec![[0.0; PAIR_FEATURES]; VIEW_SIZE * VIEW_SIZE];
        let mut rel_out = vec![Vec::new(); VIEW_SIZE * VIEW_SIZE];
        let mut emb = Vec::with_capacity(VIEW_SIZE);
        for i in 0..VIEW_SIZE {
            let mut e = attr_out[i].clone();
            let mut rel_sum = vec![0.0; self.config.rel_dim];
            for j in 0..VIEW_SIZE {
                if i == j {
                    continue;
                }
                let pf = normalized_pair_features(&entities[i], &entities[j]);
                let mut y = l.rel.forward(s, &pf);
                ops::tanh_in_place(&mut y);
                ops::add_assign(&mut rel_sum, &y);
                pairs[i * VIEW_SIZE + j] = pf;
                rel_out[i * VIEW_SIZE + j] = y;
            }
            e.extend_from_slice(&rel_sum);
            emb.push(e);
        }
        let keys = emb.iter().map(|e| l.key.forward(s, e)).collect();
        Ok(Entities { attrs, attr_out, pairs, rel_out, emb, keys })
    }

    /// `d_emb` is the gradient on the embeddings themselves, `d_keys` on the
    /// shared attention layer's entity projection.
    fn encode_backward(&self, grads: &mut Gradients, ent: &Entities, d_emb: &mut [Vec<f64>], d_keys: &[Vec<f64>]) {
        let l = &self.layers;
        let s = &self.store;
        let a = self.config.attr_dim;
        for i in 0..VIEW_SIZE {
            l.key.backward(s, grads, &ent.emb[i], &d_keys[i], Some(&mut d_emb[i]));
            let d = &d_emb[i];
            let da = ops::tanh_backward(&ent.attr_out[i], &d[..a]);
            l.attr.backward(s, grads, &ent.attrs[i], &da, None);
            for j in 0..VIEW_SIZE {
                if i == j {
                    continue;
                }
                let k = i * VIEW_SIZE + j;
                let dr = ops::tanh_backward(&ent.rel_out[k], &d[a..]);
                l.rel.backward(s, grads, &ent.pairs[k], &dr, None);
            }
        }
    }

    fn attend(&self, ent: &Entities, q: &[f64], v: ParamId) -> Attention {
        let qk = self.layers.query.forward(&self.store, q);
        let vv = self.store.get(v).data();
        let mut scores = [0.0; VIEW_SIZE];
        let u: Vec<Vec<f64>> = ent
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let ui: Vec<f64> = k.iter().zip(&qk).map(|(a, b)| math::tanh(a + b)).collect();
                scores[i] = ops::dot(vv, &ui);
                ui
            })
            .collect();
        Attention { u, scores }
    }

    #[allow(clippy::too_many_arguments)]
    fn attend_backward(
        &self,
        grads: &mut Gradients,
        q: &[f64],
        at: &Attention,
        v: ParamId,
        dscores: &[f64],
        d_keys: &mut [Vec<f64>],
        dq: &mut [f64],
    ) {
        let vv = self.store.get(v).data();
        let mut dqk = vec![0.0; self.config.attention_dim];
        for i in 0..VIEW_SIZE {
            let g = dscores[i];
            if g == 0.0 {
                continue;
            }
            ops::add_assign(grads.buf(v), &at.u[i].iter().map(|u| g * u).collect::<Vec<_>>());
            for k in 0..dqk.len() {
                let d = g * vv[k] * (1.0 - at.u[i][k] * at.u[i][k]);
                d_keys[i][k] += d;
                dqk[k] += d;
            }
        }
        self.layers.query.backward(&self.store, grads, q, &dqk, Some(dq));
    }

    /// The 7 entity embeddings `[attr; Σ rel]` of a view.
    pub fn encode_entities(&self, entities: &[NormalizedEntity]) -> Result<Vec<Vec<f64>>, ModelError> {
        Ok(self.encode(entities)?.emb)
    }

    /// Attention scores of `head` for query `q` over a view.
    pub fn attention_scores(
        &self,
        entities: &[NormalizedEntity],
        q: &[f64],
        head: Head,
    ) -> Result<[f64; VIEW_SIZE], ModelError> {
        let v = self.head_vector(head)?;
        if q.len() != self.config.hidden_dim {
            return Err(crate::neural::NeuralError::Shape { expected: vec![self.config.hidden_dim], actual: vec![q.len()] }.into());
        }
        let ent = self.encode(entities)?;
        Ok(self.attend(&ent, q, v).scores)
    }

    /// Loss of one example for the active heads. With `dropout` the masks
    /// are drawn from it; with `grads` the gradient of `scale × total` is
    /// accumulated.
    pub fn example_loss(
        &self,
        ex: &ModelExample,
        dropout: Option<&mut Rng>,
        mut grads: Option<&mut Gradients>,
        scale: f64,
    ) -> Result<LossBreakdown, ModelError> {
        if ex.tokens.is_empty() {
            return Err(ModelError::EmptyExample(ex.dialogue_id.clone()));
        }
        let c = &self.config;
        let l = &self.layers;
        let s = &self.store;
        let w = c.loss_weights;
        let t_len = ex.tokens.len();
        let hd = c.hidden_dim;
        let ent = self.encode(&ex.entities)?;

        let (mx, mh): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match dropout {
            Some(rng) => {
                let mx = (0..t_len).map(|_| dropout_mask(rng, c.token_dim, c.dropout)).collect();
                let mh = (0..t_len).map(|_| dropout_mask(rng, hd, c.dropout)).collect();
                (mx, mh)
            }
            None => (Vec::new(), Vec::new()),
        };
        let inputs: Vec<Vec<f64>> = ex
            .tokens
            .iter()
            .enumerate()
            .map(|(t, &tok)| {
                let e = l.embed.lookup(s, tok);
                match mx.get(t) {
                    Some(m) => e.iter().zip(m).map(|(a, b)| a * b).collect(),
                    None => e.to_vec(),
                }
            })
            .collect();
        let seq = l.gru.run(s, inputs.iter().map(Vec::as_slice));
        let hs: Vec<Vec<f64>> = (0..t_len)
            .map(|t| match mh.get(t) {
                Some(m) => seq.output(t).iter().zip(m).map(|(a, b)| a * b).collect(),
                None => seq.output(t).to_vec(),
            })
            .collect();

        let backward = grads.is_some();
        let mut dhs = vec![vec![0.0; hd]; if backward { t_len } else { 0 }];
        let mut d_emb = vec![vec![0.0; c.entity_dim()]; VIEW_SIZE];
        let mut d_keys = vec![vec![0.0; c.attention_dim]; VIEW_SIZE];
        let mut out = LossBreakdown { examples: 1, ..LossBreakdown::default() };

        if let (Some(v), Some(target)) = (l.v_tsel, ex.target) {
            let q = &hs[t_len - 1];
            let at = self.attend(&ent, q, v);
            let lp = ops::log_softmax(&at.scores);
            out.tsel = -lp[target];
            out.tsel_examples = 1;
            out.total += w.tsel * out.tsel;
            if let Some(g) = grads.as_deref_mut() {
                let mut ds: Vec<f64> = lp.iter().map(|v| math::exp(*v) * w.tsel * scale).collect();
                ds[target] -= w.tsel * scale;
                self.attend_backward(g, q, &at, v, &ds, &mut d_keys, &mut dhs[t_len - 1]);
            }
        }

        if let (Some(v), false) = (l.v_ref, ex.refs.is_empty()) {
            let norm = (VIEW_SIZE * ex.refs.len()) as f64;
            let mut total = 0.0;
            for r in &ex.refs {
                let pos = r.positions();
                if pos.iter().any(|&p| p >= t_len) {
                    return Err(ModelError::MarkableOutOfStream(r.markable_id.clone()));
                }
                let q = mean3(&hs[pos[0]], &hs[pos[1]], &hs[pos[2]]);
                let at = self.attend(&ent, &q, v);
                let y = r.gold.to_bools();
                let mut ds = [0.0; VIEW_SIZE];
                for i in 0..VIEW_SIZE {
                    let z = at.scores[i];
                    let yi = if y[i] { 1.0 } else { 0.0 };
                    total += math::softplus(z) - yi * z;
                    ds[i] = (math::sigmoid(z) - yi) * w.reference * scale / norm;
                }
                if let Some(g) = grads.as_deref_mut() {
                    let mut dq = vec![0.0; hd];
                    self.attend_backward(g, &q, &at, v, &ds, &mut d_keys, &mut dq);
                    for p in pos {
                        for (d, x) in dhs[p].iter_mut().zip(&dq) {
                            *d += x / 3.0;
                        }
                    }
                }
            }
            out.reference = total / norm;
            out.ref_examples = 1;
            out.total += w.reference * out.reference;
        }

        if let (Some(v), Some(hidden), Some(proj)) = (l.v_dial, l.dial_hidden, l.dial_out) {
            let n = ex.dial_targets();
            if n > 0 {
                let g_scale = w.dial * scale / n as f64;
                let mut total = 0.0;
                for t in 0..t_len - 1 {
                    if !ex.predict[t + 1] {
                        continue;
                    }
                    let y = ex.tokens[t + 1];
                    let q = &hs[t];
                    let at = self.attend(&ent, q, v);
                    let a = ops::softmax(&at.scores);
                    let mut z = q.clone();
                    z.extend(context(&a, &ent.emb));
                    let mut m = hidden.forward(s, &z);
                    ops::tanh_in_place(&mut m);
                    let logits = proj.forward(s, &m);
                    let lp = ops::log_softmax(&logits);
                    total -= lp[y];
                    if let Some(g) = grads.as_deref_mut() {
                        let mut dl: Vec<f64> = lp.iter().map(|v| math::exp(*v) * g_scale).collect();
                        dl[y] -= g_scale;
                        let mut dm = vec![0.0; m.len()];
                        proj.backward(s, g, &m, &dl, Some(&mut dm));
                        let dpre = ops::tanh_backward(&m, &dm);
                        let mut dz = vec![0.0; z.len()];
                        hidden.backward(s, g, &z, &dpre, Some(&mut dz));
                        let (dq, dc) = dz.split_at(hd);
                        ops::add_assign(&mut dhs[t], dq);
                        let mut da = [0.0; VIEW_SIZE];
                        for i in 0..VIEW_SIZE {
                            da[i] = ops::dot(&ent.emb[i], dc);
                            for (d, x) in d_emb[i].iter_mut().zip(dc) {
                                *d += a[i] * x;
                            }
                        }
                        let ds = ops::softmax_backward(&a, &da);
                        self.attend_backward(g, q, &at, v, &ds, &mut d_keys, &mut dhs[t]);
                    }
                }
                out.dial = total / n as f64;
                out.dial_examples = 1;
                out.total += w.dial * out.dial;
            }
        }

        if let Some(g) = grads {
            for (t, d) in dhs.iter_mut().enumerate() {
                if let Some(m) = mh.get(t) {
                    d.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
            }
            let dxs = l.gru.run_backward(s, g, &seq, &dhs);
            for (t, mut dx) in dxs.into_iter().enumerate() {
                if let Some(m) = mx.get(t) {
                    dx.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                l.embed.backward(g, ex.tokens[t], &dx);
            }
            self.encode_backward(g, &ent, &mut d_emb, &d_keys);
        }
        Ok(out)
    }

    /// TSEL distribution and REF probabilities for one example, without
    /// dropout. Inactive heads yield `None`.
    pub fn predict(&self, ex: &ModelExample) -> Result<Prediction, ModelError> {
        let mut state = self.start(&ex.entities)?;
        for &t in &ex.tokens {
            self.feed(&mut state, t);
        }
        let tsel = match self.layers.v_tsel {
            Some(_) => Some(self.selection_probs(&state)?),
            None => None,
        };
        let refs = match self.layers.v_ref {
            Some(_) => Some(ex.refs.iter().map(|r| self.ref_probs(&state, r.positions())).collect::<Result<_, _>>()?),
            None => None,
        };
        Ok(Prediction { tsel, refs })
    }

    pub fn start(&self, entities: &[NormalizedEntity]) -> Result<IncrementalState, ModelError> {
        let entities = self.encode(entities)?;
        Ok(IncrementalState { entities, hidden: Vec::new(), h: vec![0.0; self.config.hidden_dim] })
    }

    pub fn feed(&self, state: &mut IncrementalState, token: usize) {
        let x = self.layers.embed.lookup(&self.store, token);
        let step = self.layers.gru.step(&self.store, x, &state.h);
        state.h = step.h;
        state.hidden.push(state.h.clone());
    }

    /// Next-token distribution after the tokens fed so far.
    pub fn next_token_probs(&self, state: &IncrementalState) -> Result<Vec<f64>, ModelError> {
        let v = self.head_vector(Head::Dial)?;
        let (hidden, proj) = (self.layers.dial_hidden.expect("dial head"), self.layers.dial_out.expect("dial head"));
        let at = self.attend(&state.entities, &state.h, v);
        let a = ops::softmax(&at.scores);
        let mut z = state.h.clone();
        z.extend(context(&a, &state.entities.emb));
        let mut m = hidden.forward(&self.store, &z);
        ops::tanh_in_place(&mut m);
        Ok(ops::softmax(&proj.forward(&self.store, &m)))
    }

    /// TSEL distribution over the view given the tokens fed so far.
    pub fn selection_probs(&self, state: &IncrementalState) -> Result<[f64; VIEW_SIZE], ModelError> {
        let v = self.head_vector(Head::Tsel)?;
        let p = ops::softmax(&self.attend(&state.entities, &state.h, v).scores);
        Ok(to_array(&p))
    }

    /// REF inclusion probabilities for a markable at stream positions
    /// `[start, end, utterance_end]`.
    pub fn ref_probs(&self, state: &IncrementalState, positions: [usize; 3]) -> Result<[f64; VIEW_SIZE], ModelError> {
        let v = self.head_vector(Head::Ref)?;
        let h = &state.hidden;
        if positions.iter().any(|&p| p >= h.len()) {
            return Err(ModelError::MarkableOutOfStream(alloc::format!("{positions:?}")));
        }
        let q = mean3(&h[positions[0]], &h[positions[1]], &h[positions[2]]);
        let scores = self.attend(&state.entities, &q, v).scores;
        Ok(scores.map(math::sigmoid))
    }
}

fn mean3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| (x + y + z) / 3.0).collect()
}

fn context(a: &[f64], emb: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; emb[0].len()];
    for (ai, e) in a.iter().zip(emb) {
        for (ci, x) in c.iter_mut().zip(e) {
            *ci += ai * x;
        }
    }
    c
}

fn to_array(p: &[f64]) -> [f64; VIEW_SIZE] {
    let mut out = [0.0; VIEW_SIZE];
    out.copy_from_slice(p);
    out
}
