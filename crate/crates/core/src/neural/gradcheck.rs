//! Finite-difference check of the analytic gradients.

use super::model::{batch_gradient, loss, PairItem};
use super::ModelParams;
use crate::error::Result;

/// Denominator floor so entries with vanishing gradients compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_rel: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub max_rel: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel < tol
    }
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares every parameter entry against a central difference with step `eps`.
pub fn grad_check(p: &ModelParams<f64>, batch: &[PairItem], eps: f64) -> Result<GradCheckReport> {
    grad_check_with(p, batch, eps, |_| {})
}

/// As [`grad_check`], with `tamper` applied to the analytic gradient first.
pub fn grad_check_with(
    p: &ModelParams<f64>,
    batch: &[PairItem],
    eps: f64,
    tamper: impl Fn(&mut ModelParams<f64>),
) -> Result<GradCheckReport> {
    let (_, mut grads) = batch_gradient(p, batch)?;
    tamper(&mut grads);
    let mut probe = p.clone();
    let mut groups = Vec::with_capacity(p.tensors.len());
    for (t, g) in grads.tensors.iter().enumerate() {
        let mut max_rel = 0.0f64;
        for i in 0..g.data.len() {
            let orig = probe.tensors[t].data[i];
            probe.tensors[t].data[i] = orig + eps;
            let up = loss(&probe, batch)?;
            probe.tensors[t].data[i] = orig - eps;
            let down = loss(&probe, batch)?;
            probe.tensors[t].data[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            max_rel = max_rel.max(relative_error(g.data[i], numeric));
        }
        groups.push(GroupError { name: g.name.clone(), max_rel, checked: g.data.len() });
    }
    let max_rel = groups.iter().map(|g| g.max_rel).fold(0.0, f64::max);
    Ok(GradCheckReport { groups, max_rel })
}
