//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use rand::seq::index::sample;

use super::ParamStore;
use crate::error::{Error, Result};
use crate::seeded_rng;

/// Default step for central differences.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Whether a loss evaluation should also accumulate analytic gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossMode {
    ValueOnly,
    WithGradients,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates sampled per parameter; parameters at or below this size
    /// are checked exhaustively.
    pub samples_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: DEFAULT_EPS,
            samples_per_param: 24,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub group: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    /// Analytic and numeric values at the worst coordinate.
    pub worst: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    /// Worst error per parameter group, in group-name order.
    pub fn by_group(&self) -> BTreeMap<String, f64> {
        let mut groups = BTreeMap::new();
        for p in &self.params {
            let e = groups.entry(p.group.clone()).or_insert(0.0f64);
            *e = e.max(p.max_rel_error);
        }
        groups
    }
}

/// `|a − n| / max(1e−8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the gradients accumulated by `loss(store, WithGradients)` with
/// central differences of `loss(store, ValueOnly)`.
///
/// The loss must be a pure function of the parameter values; it is evaluated
/// twice up front and the check fails if the two results differ. Values are
/// restored exactly after every probe and grads are left zeroed.
pub fn finite_difference_check<F>(
    store: &mut ParamStore,
    mut loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore, LossMode) -> Result<f64>,
{
    let first = loss(store, LossMode::ValueOnly)?;
    let second = loss(store, LossMode::ValueOnly)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NondeterministicLoss { first, second });
    }

    store.zero_grads();
    loss(store, LossMode::WithGradients)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|(_, p)| p.grad.data().to_vec()).collect();
    store.zero_grads();

    let mut rng = seeded_rng(opts.seed);
    let ids: Vec<_> = store.ids().collect();
    let mut report = GradCheckReport::default();
    for (pi, id) in ids.into_iter().enumerate() {
        let n = store.get(id).len();
        let coords: Vec<usize> = if n <= opts.samples_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.samples_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let mut worst = 0.0f64;
        let mut worst_pair = (0.0, 0.0);
        for &k in &coords {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + opts.eps;
            let plus = loss(store, LossMode::ValueOnly)?;
            store.value_mut(id).data_mut()[k] = orig - opts.eps;
            let minus = loss(store, LossMode::ValueOnly)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let err = relative_error(analytic[pi][k], numeric);
            if err > worst {
                worst = err;
                worst_pair = (analytic[pi][k], numeric);
            }
        }
        let p = store.get(id);
        report.params.push(ParamCheck {
            name: p.name.clone(),
            group: p.group.clone(),
            coords_checked: coords.len(),
            max_rel_error: worst,
            worst: worst_pair,
        });
    }
    Ok(report)
}
