use rand::seq::index;
use rand::Rng;

use super::{ParamStore, Tape, Var};
use crate::error::Result;

/// Gradients smaller than this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose `±step` perturbation changed some rectifier's
    /// active set; the loss is not differentiable across them.
    pub skipped_kinks: usize,
    /// `(parameter, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares reverse-mode gradients of `loss_fn` against central differences.
///
/// `loss_fn` must be deterministic: it records a forward pass for the given
/// parameters and returns the tape and its scalar loss. Up to
/// `samples_per_param` coordinates of every trainable parameter are checked
/// (all of them for smaller parameters). A coordinate is skipped when the
/// perturbed forward passes land on a different rectifier pattern than the
/// unperturbed one.
///
/// The relative error of a coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn finite_difference_check<F, R>(
    store: &mut ParamStore,
    mut loss_fn: F,
    step: f64,
    samples_per_param: usize,
    rng: &mut R,
) -> Result<FdReport>
where
    F: FnMut(&ParamStore) -> Result<(Tape, Var)>,
    R: Rng + ?Sized,
{
    let (tape, loss) = loss_fn(store)?;
    tape.backward(loss, store)?;
    let base_signature = tape.relu_signature();
    drop(tape);

    let mut report = FdReport::default();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let len = store.get(id).value.len();
        let coords: Vec<usize> = if len <= samples_per_param {
            (0..len).collect()
        } else {
            let mut c = index::sample(rng, len, samples_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let analytic = store.get(id).grad.clone();
        for flat in coords {
            let original = flat_get(store, id, flat);
            flat_set(store, id, flat, original + step);
            let (tp, lp) = loss_fn(store)?;
            let (plus, sig_plus) = (tp.value(lp)[[0, 0]], tp.relu_signature());
            flat_set(store, id, flat, original - step);
            let (tm, lm) = loss_fn(store)?;
            let (minus, sig_minus) = (tm.value(lm)[[0, 0]], tm.relu_signature());
            flat_set(store, id, flat, original);

            if sig_plus != base_signature || sig_minus != base_signature {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.as_slice().map_or_else(
                || analytic.iter().nth(flat).copied().unwrap(),
                |s| s[flat],
            );
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.get(id).name.clone(), flat, a, numeric));
            }
        }
    }
    Ok(report)
}

fn flat_get(store: &ParamStore, id: super::ParamId, flat: usize) -> f64 {
    *store.get(id).value.iter().nth(flat).unwrap()
}

fn flat_set(store: &mut ParamStore, id: super::ParamId, flat: usize, v: f64) {
    *store.get_mut(id).value.iter_mut().nth(flat).unwrap() = v;
}
