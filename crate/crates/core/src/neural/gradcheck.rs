use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{Gradients, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor of the relative error, so that entries with
    /// near-zero true gradient are judged by absolute error.
    pub floor: f64,
    /// Check at most this many evenly strided entries per parameter.
    pub max_entries_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { step: 1e-5, floor: 1e-5, max_entries_per_param: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares analytic gradients from `loss` with central finite differences.
///
/// `loss(store, grads)` returns the scalar loss and, when `grads` is
/// `Some`, accumulates the analytic gradient into it.
pub fn gradient_check<F>(store: &mut ParamStore, config: GradCheckConfig, mut loss: F) -> GradCheckReport
where
    F: FnMut(&ParamStore, Option<&mut Gradients>) -> f64,
{
    let mut grads = store.gradients();
    loss(store, Some(&mut grads));
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_param: String::new(), worst_index: 0, checked: 0 };
    let ids: alloc::vec::Vec<_> = store.iter().map(|(id, name, a)| (id, String::from(name), a.len())).collect();
    for (id, name, len) in ids {
        let stride = match config.max_entries_per_param {
            Some(m) if m > 0 && len > m => len.div_ceil(m),
            _ => 1,
        };
        for i in (0..len).step_by(stride) {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + config.step;
            let plus = loss(store, None);
            store.get_mut(id).data_mut()[i] = orig - config.step;
            let minus = loss(store, None);
            store.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * config.step);
            let analytic = grads.get(id).data()[i];
            let denom = (analytic.abs() + numeric.abs()).max(config.floor);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst_param.clone_from(&name);
                report.worst_index = i;
            }
        }
    }
    report
}
