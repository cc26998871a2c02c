//! Central finite-difference gradient checking.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// One evaluation of the checked function.
///
/// `signature` identifies the piecewise-smooth region the evaluation landed
/// in (see [`super::Tape::signature`]); pass `0` for smooth functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub signature: u64,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Self {
            value,
            signature: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub eps: f64,
    /// Check at most this many coordinates per parameter tensor, sampled
    /// without replacement. `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Worst relative error per parameter tensor, in store order.
    pub per_param: Vec<(String, f64)>,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a kink (relu at zero, max-pool
    /// tie, loss clamp) and were therefore not compared.
    pub skipped_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(1e-8);
    libm::fabs(analytic - numeric) / denom
}

/// Compares `analytic` against `(f(p+eps) - f(p-eps)) / (2 eps)` coordinate
/// by coordinate and reports `max |a-n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_check<F>(
    mut f: F,
    params: &ParamStore,
    analytic: &Gradients,
    opts: FdOptions,
) -> Result<FdReport>
where
    F: FnMut(&ParamStore) -> Result<Probe>,
{
    if !(opts.eps > 0.0) {
        return Err(Error::Usage("finite difference step must be positive".into()));
    }
    let base = f(params)?;
    if !base.value.is_finite() {
        return Err(Error::NonFinite("finite difference objective"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = params.clone();
    let mut report = FdReport {
        max_rel_error: 0.0,
        per_param: Vec::new(),
        checked: 0,
        skipped_kinks: 0,
    };
    for id in params.ids() {
        let n = params.get(id).len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        let mut worst = 0.0f64;
        for i in coords {
            let orig = work.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + opts.eps;
            let plus = f(&work)?;
            work.get_mut(id).data_mut()[i] = orig - opts.eps;
            let minus = f(&work)?;
            work.get_mut(id).data_mut()[i] = orig;
            if !plus.value.is_finite() || !minus.value.is_finite() {
                return Err(Error::NonFinite("finite difference objective"));
            }
            if plus.signature != base.signature || minus.signature != base.signature {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus.value - minus.value) / (2.0 * opts.eps);
            let err = relative_error(analytic.get(id)[i], numeric);
            worst = worst.max(err);
            report.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.per_param.push((params.name(id).into(), worst));
    }
    Ok(report)
}
