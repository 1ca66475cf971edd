//! Central finite-difference verification of analytic gradients.
//!
//! The checker only ever evaluates the loss, so it is independent of the
//! reverse-mode code it verifies.

use serde::Serialize;

use crate::data::SequenceSample;
use crate::error::Result;
use crate::model::Model;
use crate::numeric::Matrix;
use crate::params::ParamSet;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted relative error per entry.
    pub tolerance: f64,
    /// Denominator floor: entries are compared with
    /// `|a - n| / max(|a|, |n|, floor)`.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub max_abs_grad: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn worst(&self) -> f64 {
        self.tensors.iter().fold(0.0, |m, t| m.max(t.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare `analytic` against central differences of `loss` around
/// `params`. `params` is restored exactly after each probe.
pub fn check<P, F>(
    params: &mut P,
    analytic: &P,
    mut loss: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    P: ParamSet,
    F: FnMut(&P) -> Result<f64>,
{
    let names: Vec<(String, usize)> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.len()))
        .collect();
    let analytic: Vec<Matrix> = analytic.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, (name, len)) in names.iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for j in 0..*len {
            let original = entry(params, ti, j);
            set_entry(params, ti, j, original + opts.step);
            let up = loss(params)?;
            set_entry(params, ti, j, original - opts.step);
            let down = loss(params)?;
            set_entry(params, ti, j, original);
            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[ti].as_slice()[j];
            max_abs = max_abs.max((a - numeric).abs());
            max_rel = max_rel.max(relative_error(a, numeric, opts.floor));
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            entries: *len,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            max_abs_grad: analytic[ti].max_abs(),
            passed: max_rel < opts.tolerance,
        });
    }
    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        tensors,
    })
}

fn entry<P: ParamSet>(p: &P, tensor: usize, j: usize) -> f64 {
    p.tensors()[tensor].1.as_slice()[j]
}

fn set_entry<P: ParamSet>(p: &mut P, tensor: usize, j: usize, v: f64) {
    p.tensors_mut()[tensor].1.as_mut_slice()[j] = v;
}

/// Check a whole model on the summed loss of `samples`.
///
/// `corrupt`, when set, adds `1e-3` to the first analytic entry of the
/// named tensor before comparison (fault injection for the checker itself).
pub fn check_model(
    model: &Model,
    samples: &[SequenceSample],
    opts: GradCheckOptions,
    corrupt: Option<&str>,
) -> Result<GradCheckReport> {
    let mut analytic = model.params().zeros_like();
    for s in samples {
        let (_, g) = model.loss_and_grad(s)?;
        analytic.add_assign(&g);
    }
    if let Some(target) = corrupt {
        for (name, t) in analytic.tensors_mut() {
            if name == target && !t.is_empty() {
                t.as_mut_slice()[0] += 1e-3;
            }
        }
    }
    let mut params = model.params().clone();
    check(
        &mut params,
        &analytic,
        |p| {
            let mut total = 0.0;
            for s in samples {
                total += model.loss_with(p, s)?;
            }
            Ok(total)
        },
        opts,
    )
}
