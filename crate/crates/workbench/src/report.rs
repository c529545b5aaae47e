//! Report tables laid out like the published ones. CSV cells that combine
//! values follow the published formatting; JSON reports carry raw numbers.

use commonground::agreement::{GaussianKde, ReferentAgreement, ReferentCountRow, SpanAgreement, TokenCorrelationTable};
use commonground::corpus::CorpusStats;
use commonground::evaluation::{GroupSummary, MeanSd, VariantSummary};
use commonground::selfplay::SuccessRow;

use crate::io::{fmt_f64, Table};

/// Number of evenly spaced points in a KDE curve.
pub const KDE_POINTS: usize = 512;

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn pct_pair(observed: f64, pi: Option<f64>) -> String {
    match pi {
        Some(p) => format!("{} ({})", pct(observed), pct(p)),
        None => pct(observed),
    }
}

fn mean_sd_pct(m: &Option<MeanSd>) -> String {
    match m {
        Some(m) => format!("{:.2}±{:.2}", 100.0 * m.mean, 100.0 * m.sd),
        None => "-".into(),
    }
}

/// Markable-detection statistics.
pub fn markable_table(stats: &CorpusStats, spans: Option<&SpanAgreement>) -> Table {
    let mut t = Table::new([
        "# Markables",
        "# All-Referents",
        "# No-Referent",
        "# Anaphora",
        "# Cataphora",
        "% Start Agreement",
        "% End Agreement",
    ]);
    let (start, end) = match spans {
        Some(s) => (pct_pair(s.start.observed, s.start.multi_pi), pct_pair(s.end.observed, s.end.multi_pi)),
        None => ("-".into(), "-".into()),
    };
    t.push([
        stats.markables.to_string(),
        stats.all_referents.to_string(),
        stats.no_referent.to_string(),
        stats.anaphora.to_string(),
        stats.cataphora.to_string(),
        start,
        end,
    ]);
    t
}

/// Referent-identification statistics.
pub fn referent_table(stats: &CorpusStats, agreement: Option<&ReferentAgreement>) -> Table {
    let mut t = Table::new(["# Markables", "# Judgements", "% Ambiguous", "% Unidentifiable", "% Agreement", "% Exact Match"]);
    let (agree, exact) = match agreement {
        Some(a) => (pct_pair(a.entity.observed, a.entity.multi_pi), pct(a.exact_match)),
        None => ("-".into(), "-".into()),
    };
    t.push([
        stats.manual_markables.to_string(),
        stats.judgements.to_string(),
        format!("{:.2}", stats.ambiguous_pct),
        format!("{:.2}", stats.unidentifiable_pct),
        agree,
        exact,
    ]);
    t
}

/// Agreement by number of referents in the judgement.
pub fn referent_count_table(rows: &[ReferentCountRow]) -> Table {
    let mut t = Table::new(["# Referents", "% Agreement", "% Exact", "% Judgements", "Judgements", "Pairs"]);
    for r in rows {
        t.push([
            r.referents.to_string(),
            pct(r.agreement),
            pct(r.exact_match),
            pct(r.judgement_share),
            r.judgements.to_string(),
            r.pairs.to_string(),
        ]);
    }
    t
}

/// Token/exact-match correlations, ascending by ρ.
pub fn token_table(table: &TokenCorrelationTable) -> Table {
    let mut t = Table::new(["Token", "rho", "Count", "Pairs"]);
    for r in &table.rows {
        t.push([r.token.clone(), format!("{:.3}", r.rho), r.markables.to_string(), r.pairs.to_string()]);
    }
    t
}

/// Density curves on a shared grid: one `x` column plus one per adjective.
pub fn kde_table(kdes: &[(String, GaussianKde)], lo: f64, hi: f64) -> Table {
    let mut header = vec!["x".to_string()];
    header.extend(kdes.iter().map(|(a, _)| a.clone()));
    let mut t = Table::new(header);
    let curves: Vec<Vec<(f64, f64)>> = kdes.iter().map(|(_, k)| k.curve(lo, hi, KDE_POINTS)).collect();
    for i in 0..KDE_POINTS {
        let mut row = vec![fmt_f64(curves.first().map_or(lo, |c| c[i].0))];
        row.extend(curves.iter().map(|c| format!("{:.8}", c[i].1)));
        t.push(row);
    }
    t
}

/// Model results: one row per variant, metrics as mean±sd percentages.
pub fn results_table(rows: &[VariantSummary], shared: &[usize]) -> Table {
    let mut header: Vec<String> =
        ["Model", "Target Selection", "Reference Resolution (Exact Match)"].iter().map(|s| s.to_string()).collect();
    header.extend(shared.iter().map(|k| format!("#Shared={k}")));
    let mut t = Table::new(header);
    for r in rows {
        let reference = match (&r.ref_entity_accuracy, &r.ref_exact_match) {
            (Some(_), _) => format!("{} ({})", mean_sd_pct(&r.ref_entity_accuracy), mean_sd_pct(&r.ref_exact_match)),
            _ => "-".into(),
        };
        let mut row = vec![r.variant.clone(), mean_sd_pct(&r.tsel_accuracy), reference];
        for k in shared {
            let cell = r.selfplay.iter().find(|(kk, _)| kk == k).map(|(_, m)| mean_sd_pct(&Some(*m)));
            row.push(cell.unwrap_or_else(|| "-".into()));
        }
        t.push(row);
    }
    t
}

/// Reference resolution grouped by the number of gold referents.
pub fn grouped_table(rows: &[GroupSummary]) -> Table {
    let mut t = Table::new(["# Referents", "% Accuracy", "% Exact Match", "Count"]);
    for r in rows {
        t.push([
            r.referents.to_string(),
            mean_sd_pct(&r.entity_accuracy),
            mean_sd_pct(&r.exact_match),
            r.count.map(|c| format!("{:.1}", c.mean)).unwrap_or_default(),
        ]);
    }
    t
}

pub fn selfplay_table(rows: &[SuccessRow]) -> Table {
    let mut t = Table::new(["k", "games", "successes", "rate", "forced", "aborted"]);
    for r in rows {
        t.push([
            r.num_shared.to_string(),
            r.games.to_string(),
            r.successes.to_string(),
            fmt_f64(r.rate),
            r.forced.to_string(),
            r.aborted.to_string(),
        ]);
    }
    t
}
