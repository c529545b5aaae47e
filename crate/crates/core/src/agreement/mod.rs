//! Gold construction by majority vote and the agreement, disagreement and
//! pragmatics statistics computed over multiply-judged markables.

mod fleiss;
mod kde;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fleiss::{fleiss_multi_pi, AgreementReport};
pub use kde::{overlap, Bandwidth, GaussianKde};

use crate::corpus::{propagate_auto_referents, AnnotatedCorpus, CorpusError, GoldEntry, ReferentJudgement};
use crate::math;
use crate::scenario::{ViewMask, VIEW_SIZE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgreementError {
    #[error("no items to score")]
    Empty,
    #[error("item {item} has {coders} coders, at least 2 required")]
    TooFewCoders { item: usize, coders: usize },
    #[error("judgements belong to different markables ({0} vs {1})")]
    MarkableMismatch(String, String),
    #[error("need at least 2 annotators, got {0}")]
    TooFewAnnotators(usize),
    #[error("span ({start}, {end}) in utterance {utterance} is out of range")]
    SpanOutOfRange { utterance: usize, start: usize, end: usize },
    #[error("kernel bandwidth is zero or undefined")]
    DegenerateBandwidth,
    #[error("no referent colors found for adjective {0}")]
    NoSamples(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// One annotator's interpretation reduced to view positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    pub referents: ViewMask,
    pub unidentifiable: bool,
}

/// Entity-level strict-majority vote: an entity is kept when more than half
/// of the judgements include it; the markable is dropped when more than half
/// marked it unidentifiable.
pub fn majority_vote(votes: &[Vote]) -> GoldEntry {
    let n = votes.len();
    let unidentifiable = votes.iter().filter(|v| v.unidentifiable).count();
    if 2 * unidentifiable > n {
        return GoldEntry::Dropped;
    }
    let mut bits = 0u8;
    for p in 0..VIEW_SIZE {
        let count = votes.iter().filter(|v| v.referents.contains(p)).count();
        if 2 * count > n {
            bits |= 1 << p;
        }
    }
    GoldEntry::Referents(ViewMask(bits))
}

/// Gold referents keyed by markable id. Generic markables never appear.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldReferents {
    pub entries: BTreeMap<String, GoldEntry>,
}

impl GoldReferents {
    pub fn get(&self, markable_id: &str) -> Option<GoldEntry> {
        self.entries.get(markable_id).copied()
    }

    /// Referents of a markable unless it is absent or dropped.
    pub fn referents(&self, markable_id: &str) -> Option<ViewMask> {
        match self.entries.get(markable_id) {
            Some(GoldEntry::Referents(m)) => Some(*m),
            _ => None,
        }
    }

    pub fn dropped(&self) -> usize {
        self.entries.values().filter(|e| matches!(e, GoldEntry::Dropped)).count()
    }
}

/// Majority-aggregates every judged markable, then overlays automatically
/// propagated referents (flags and links), which take precedence.
pub fn aggregate_gold(corpus: &AnnotatedCorpus) -> Result<GoldReferents, CorpusError> {
    let mut manual = BTreeMap::new();
    for m in corpus.judged_markables() {
        if m.flags.generic {
            continue;
        }
        let votes: Vec<Vote> = corpus
            .judgements_of(&m.id)
            .map(|j| Vote { referents: corpus.judgement_mask(j), unidentifiable: j.unidentifiable })
            .collect();
        manual.insert(m.id.clone(), majority_vote(&votes));
    }
    let auto = propagate_auto_referents(corpus, &manual)?;
    manual.extend(auto);
    Ok(GoldReferents { entries: manual })
}

/// Fraction of the 7 entity decisions on which two judgements agree, and
/// whether the referent sets are identical.
pub fn pairwise_entity_agreement(a: ViewMask, b: ViewMask) -> (f64, bool) {
    let differing = (a.0 ^ b.0) & ViewMask::ALL.0;
    let agree = VIEW_SIZE - differing.count_ones() as usize;
    (agree as f64 / VIEW_SIZE as f64, differing == 0)
}

/// [`pairwise_entity_agreement`] for two judgements of the same markable.
pub fn judgement_agreement(
    corpus: &AnnotatedCorpus,
    a: &ReferentJudgement,
    b: &ReferentJudgement,
) -> Result<(f64, bool), AgreementError> {
    if a.markable_id != b.markable_id {
        return Err(AgreementError::MarkableMismatch(a.markable_id.clone(), b.markable_id.clone()));
    }
    Ok(pairwise_entity_agreement(corpus.judgement_mask(a), corpus.judgement_mask(b)))
}

/// Judgement masks of each multiply-judged, non-generic markable, in corpus order.
pub fn judged_masks(corpus: &AnnotatedCorpus) -> Vec<(String, Vec<ViewMask>)> {
    corpus
        .judged_markables()
        .filter(|m| !m.flags.generic)
        .map(|m| (m.id.clone(), corpus.judgements_of(&m.id).map(|j| corpus.judgement_mask(j)).collect::<Vec<_>>()))
        .filter(|(_, masks)| masks.len() >= 2)
        .collect()
}

/// Entity-level agreement with multi-π plus the pairwise exact-match rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferentAgreement {
    pub entity: AgreementReport,
    /// Mean over markables of the fraction of identical judgement pairs.
    pub exact_match: f64,
    pub markables: usize,
    pub judgements: usize,
}

/// Items are (markable, entity) pairs coded by every judgement of the markable.
pub fn referent_agreement(markables: &[(String, Vec<ViewMask>)]) -> Result<ReferentAgreement, AgreementError> {
    let mut items: Vec<Vec<u32>> = Vec::with_capacity(markables.len() * VIEW_SIZE);
    let mut exact_sum = 0.0;
    let mut judgements = 0;
    for (_, masks) in markables {
        for p in 0..VIEW_SIZE {
            items.push(masks.iter().map(|m| m.contains(p) as u32).collect());
        }
        exact_sum += mean_pairwise(masks, |a, b| pairwise_entity_agreement(a, b).1 as u8 as f64);
        judgements += masks.len();
    }
    let entity = fleiss_multi_pi(&items)?;
    Ok(ReferentAgreement {
        entity,
        exact_match: exact_sum / markables.len() as f64,
        markables: markables.len(),
        judgements,
    })
}

fn mean_pairwise(masks: &[ViewMask], f: impl Fn(ViewMask, ViewMask) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            sum += f(masks[i], masks[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Markable spans `(utterance, start, end)` from one annotator.
pub type SpanSet = Vec<(usize, usize, usize)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanAgreement {
    pub start: AgreementReport,
    pub end: AgreementReport,
    pub tokens: usize,
}

/// Token-level agreement on whether each token starts (or ends) a markable.
///
/// `utterance_lengths` gives the token count of every utterance in scope;
/// `annotators[a]` lists that annotator's spans over those utterances.
pub fn span_agreement(utterance_lengths: &[usize], annotators: &[SpanSet]) -> Result<SpanAgreement, AgreementError> {
    if annotators.len() < 2 {
        return Err(AgreementError::TooFewAnnotators(annotators.len()));
    }
    let offsets: Vec<usize> = utterance_lengths
        .iter()
        .scan(0usize, |acc, &len| {
            let start = *acc;
            *acc += len;
            Some(start)
        })
        .collect();
    let total: usize = utterance_lengths.iter().sum();
    let mut starts = alloc::vec![alloc::vec![0u32; annotators.len()]; total];
    let mut ends = starts.clone();
    for (a, spans) in annotators.iter().enumerate() {
        for &(u, s, e) in spans {
            let len = *utterance_lengths.get(u).ok_or(AgreementError::SpanOutOfRange { utterance: u, start: s, end: e })?;
            if s >= e || e > len {
                return Err(AgreementError::SpanOutOfRange { utterance: u, start: s, end: e });
            }
            starts[offsets[u] + s][a] = 1;
            ends[offsets[u] + e - 1][a] = 1;
        }
    }
    Ok(SpanAgreement { start: fleiss_multi_pi(&starts)?, end: fleiss_multi_pi(&ends)?, tokens: total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferentCountRow {
    pub referents: usize,
    pub agreement: f64,
    pub exact_match: f64,
    /// Share of all judgements whose referent count is `referents`.
    pub judgement_share: f64,
    pub judgements: usize,
    pub pairs: usize,
}

/// For each referent count n, averages agreement over all pairs (j, j′) of
/// judgements on the same markable where |j| = n. Empty rows are omitted.
pub fn agreement_by_referent_count(markables: &[(String, Vec<ViewMask>)]) -> Vec<ReferentCountRow> {
    let mut agree = [0.0f64; VIEW_SIZE + 1];
    let mut exact = [0.0f64; VIEW_SIZE + 1];
    let mut pairs = [0usize; VIEW_SIZE + 1];
    let mut judged = [0usize; VIEW_SIZE + 1];
    let mut total = 0usize;
    for (_, masks) in markables {
        total += masks.len();
        for (i, &a) in masks.iter().enumerate() {
            let n = a.len();
            judged[n] += 1;
            for (j, &b) in masks.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (ag, ex) = pairwise_entity_agreement(a, b);
                agree[n] += ag;
                exact[n] += ex as u8 as f64;
                pairs[n] += 1;
            }
        }
    }
    (0..=VIEW_SIZE)
        .filter(|&n| pairs[n] > 0)
        .map(|n| ReferentCountRow {
            referents: n,
            agreement: agree[n] / pairs[n] as f64,
            exact_match: exact[n] / pairs[n] as f64,
            judgement_share: judged[n] as f64 / total as f64,
            judgements: judged[n],
            pairs: pairs[n],
        })
        .collect()
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / math::sqrt(sxx * syy))
}

/// Observation unit for token/exact-match correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationUnit {
    /// One observation per markable: its mean pairwise exact-match rate.
    Markable,
    /// One binary observation per unordered judgement pair.
    JudgementPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCorrelation {
    pub token: String,
    pub rho: f64,
    /// Markables whose span contains the token.
    pub markables: usize,
    /// Judgement pairs on those markables.
    pub pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenCorrelationTable {
    /// Sorted by ρ ascending.
    pub rows: Vec<TokenCorrelation>,
    /// Tokens at or above the count threshold whose indicator is constant.
    pub zero_variance: Vec<String>,
}

/// Point-biserial correlation between token occurrence inside a markable
/// span and the markable's pairwise exact-match rate.
pub fn token_exact_match_correlation(
    corpus: &AnnotatedCorpus,
    min_count: usize,
    unit: CorrelationUnit,
) -> TokenCorrelationTable {
    struct Obs {
        tokens: BTreeSet<String>,
        exact: Vec<f64>,
    }
    let mut observations = Vec::new();
    for (id, masks) in judged_masks(corpus) {
        let m = corpus.markable(&id).expect("judged markable exists");
        if m.is_automatic() {
            continue;
        }
        let tokens: BTreeSet<String> = corpus.markable_tokens(m).iter().cloned().collect();
        let mut exact = Vec::new();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                exact.push(pairwise_entity_agreement(masks[i], masks[j]).1 as u8 as f64);
            }
        }
        observations.push(Obs { tokens, exact });
    }

    let ys: Vec<f64> = match unit {
        CorrelationUnit::Markable => {
            observations.iter().map(|o| o.exact.iter().sum::<f64>() / o.exact.len() as f64).collect()
        }
        CorrelationUnit::JudgementPair => observations.iter().flat_map(|o| o.exact.iter().copied()).collect(),
    };

    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for o in &observations {
        for t in &o.tokens {
            let c = counts.entry(t.as_str()).or_insert((0, 0));
            c.0 += 1;
            c.1 += o.exact.len();
        }
    }

    let mut table = TokenCorrelationTable::default();
    for (token, (markables, pairs)) in counts {
        let count = match unit {
            CorrelationUnit::Markable => markables,
            CorrelationUnit::JudgementPair => pairs,
        };
        if count < min_count {
            continue;
        }
        let xs: Vec<f64> = match unit {
            CorrelationUnit::Markable => observations.iter().map(|o| o.tokens.contains(token) as u8 as f64).collect(),
            CorrelationUnit::JudgementPair => observations
                .iter()
                .flat_map(|o| core::iter::repeat_n(o.tokens.contains(token) as u8 as f64, o.exact.len()))
                .collect(),
        };
        match pearson(&xs, &ys) {
            Some(rho) => table.rows.push(TokenCorrelation { token: token.into(), rho, markables, pairs }),
            None => table.zero_variance.push(token.into()),
        }
    }
    table.rows.sort_by(|a, b| a.rho.total_cmp(&b.rho).then_with(|| a.token.cmp(&b.token)));
    table
}

/// Colors of gold referents for markables whose span contains `adjective`.
pub fn adjective_colors(corpus: &AnnotatedCorpus, gold: &GoldReferents, adjective: &str) -> Vec<f64> {
    let mut colors = Vec::new();
    for m in corpus.markables() {
        let Some(mask) = gold.referents(&m.id) else { continue };
        if !corpus.markable_tokens(m).iter().any(|t| t == adjective) {
            continue;
        }
        let scenario = corpus.scenario_of(corpus.dialogue(&m.dialogue_id).expect("validated"));
        let view = scenario.view(m.speaker);
        for id in mask.ids(view) {
            colors.push(scenario.entity(id).expect("validated").color);
        }
    }
    colors
}

/// One density estimate per adjective, in input order.
pub fn color_kde(
    corpus: &AnnotatedCorpus,
    gold: &GoldReferents,
    adjectives: &[&str],
    bandwidth: Bandwidth,
) -> Result<Vec<(String, GaussianKde)>, AgreementError> {
    adjectives
        .iter()
        .map(|adj| {
            let colors = adjective_colors(corpus, gold, adj);
            if colors.is_empty() {
                return Err(AgreementError::NoSamples((*adj).into()));
            }
            Ok(((*adj).into(), GaussianKde::new(colors, bandwidth)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn mask(ps: &[usize]) -> ViewMask {
        ViewMask::from_positions(ps.iter().copied())
    }

    fn vote(ps: &[usize]) -> Vote {
        Vote { referents: mask(ps), unidentifiable: false }
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&[vote(&[1, 2]), vote(&[1]), vote(&[1, 2])]), GoldEntry::Referents(mask(&[1, 2])));
        let tie = [vote(&[5]), vote(&[5]), vote(&[]), vote(&[])];
        assert_eq!(majority_vote(&tie), GoldEntry::Referents(ViewMask::EMPTY));
        let mut vs = [vote(&[0]), vote(&[0]), vote(&[0])];
        vs[0].unidentifiable = true;
        vs[2].unidentifiable = true;
        assert_eq!(majority_vote(&vs), GoldEntry::Dropped);
    }

    proptest! {
        #[test]
        fn majority_matches_counting_oracle(
            raw in prop::collection::vec((0u8..128, any::<bool>()), 1..=9)
        ) {
            let votes: Vec<Vote> = raw.iter().map(|&(b, u)| Vote { referents: ViewMask(b), unidentifiable: u }).collect();
            let n = votes.len() as f64;
            let unid = raw.iter().filter(|r| r.1).count() as f64;
            let expected = if unid > n / 2.0 {
                GoldEntry::Dropped
            } else {
                let mut ids = Vec::new();
                for e in 0..7 {
                    let c = raw.iter().filter(|r| r.0 & (1 << e) != 0).count() as f64;
                    if c > n / 2.0 { ids.push(e); }
                }
                GoldEntry::Referents(mask(&ids))
            };
            prop_assert_eq!(majority_vote(&votes), expected);
        }

        #[test]
        fn exact_implies_full_agreement(a in 0u8..128, b in 0u8..128) {
            let (ag, ex) = pairwise_entity_agreement(ViewMask(a), ViewMask(b));
            if ex { prop_assert_eq!(ag, 1.0); }
            prop_assert!((0.0..=1.0).contains(&ag));
        }
    }

    #[test]
    fn pairwise_examples() {
        let (a, e) = pairwise_entity_agreement(mask(&[1, 2]), mask(&[1]));
        assert!((a - 6.0 / 7.0).abs() < 1e-15 && !e);
        assert_eq!(pairwise_entity_agreement(mask(&[3]), mask(&[3])), (1.0, true));
        assert_eq!(pairwise_entity_agreement(ViewMask::EMPTY, ViewMask::ALL), (0.0, false));
    }

    #[test]
    fn referent_agreement_is_fleiss_over_entities() {
        let ms = vec![
            ("M1".into(), vec![mask(&[0]), mask(&[0]), mask(&[0, 1])]),
            ("M2".into(), vec![mask(&[2]), mask(&[2]), mask(&[2])]),
        ];
        let r = referent_agreement(&ms).unwrap();
        // M1: 13 of 14 entity items unanimous, item 1 has 1/3 agreeing pairs.
        let ao = (13.0 + 1.0 / 3.0) / 14.0;
        assert!((r.entity.observed - ao).abs() < 1e-15);
        assert!((r.exact_match - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(r.judgements, 6);
    }

    #[test]
    fn span_examples() {
        let same = vec![(0, 0, 1), (1, 2, 4)];
        let r = span_agreement(&[3, 5], &[same.clone(), same.clone(), same]).unwrap();
        assert_eq!((r.start.observed, r.end.observed), (1.0, 1.0));

        // Ends at token 0 vs token 1 disagree on two of the three tokens.
        let r = span_agreement(&[3], &[vec![(0, 0, 1)], vec![(0, 0, 2)]]).unwrap();
        assert_eq!(r.start.observed, 1.0);
        assert!((r.end.observed - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(span_agreement(&[3], &[vec![]]), Err(AgreementError::TooFewAnnotators(1)));
        assert!(span_agreement(&[3], &[vec![(0, 2, 4)], vec![]]).is_err());
    }

    #[test]
    fn referent_count_rows() {
        let rows = agreement_by_referent_count(&[("M".into(), vec![mask(&[1]), mask(&[1])])]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].referents, 1);
        assert_eq!((rows[0].agreement, rows[0].exact_match, rows[0].judgement_share), (1.0, 1.0, 1.0));

        let rows = agreement_by_referent_count(&[("M".into(), vec![mask(&[]), mask(&[1]), mask(&[1])])]);
        let zero = rows.iter().find(|r| r.referents == 0).unwrap();
        assert_eq!(zero.pairs, 2);
        assert!((zero.agreement - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(zero.exact_match, 0.0);
        let one = rows.iter().find(|r| r.referents == 1).unwrap();
        assert_eq!(one.pairs, 4);
        assert!((one.exact_match - 0.5).abs() < 1e-15);
        assert!((one.judgement_share - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]), Some(-1.0));
        assert_eq!(pearson(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 1.0, 0.0]), Some(1.0));
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
    }
}
