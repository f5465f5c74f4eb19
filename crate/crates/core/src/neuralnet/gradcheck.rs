use ndarray::ArrayView2;

use super::{loss_mse_l2, Gradients, Mlp};
use crate::error::Result;

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat index (in parameter order) of the worst entry.
    pub worst_index: usize,
    pub checked: usize,
    pub pass: bool,
}

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

pub fn grad_check(
    net: &Mlp,
    batch: ArrayView2<f64>,
    label: ArrayView2<f64>,
    fd_step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    grad_check_with(net, batch, label, fd_step, tolerance, |_| {})
}

/// Like [`grad_check`], with a hook that may alter the analytic gradients
/// before comparison.
pub fn grad_check_with<F>(
    net: &Mlp,
    batch: ArrayView2<f64>,
    label: ArrayView2<f64>,
    fd_step: f64,
    tolerance: f64,
    tamper: F,
) -> Result<GradCheckReport>
where
    F: FnOnce(&mut Gradients),
{
    let (cache, _) = net.forward_train_frozen(batch)?;
    let mut analytic = net.backward(&cache, label)?;
    tamper(&mut analytic);
    let analytic: Vec<f64> = analytic.slices().into_iter().flatten().copied().collect();

    let loss_at = |probe: &Mlp| -> Result<f64> {
        let (c, _) = probe.forward_train_frozen(batch)?;
        loss_mse_l2(c.output().view(), label, probe)
    };

    let mut probe = net.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst_index = 0;
    let mut flat = 0;
    let groups: Vec<usize> = probe.param_slices_mut().iter().map(|s| s.len()).collect();
    for (group, &len) in groups.iter().enumerate() {
        for i in 0..len {
            let original = probe.param_slices_mut()[group][i];
            probe.param_slices_mut()[group][i] = original + fd_step;
            let plus = loss_at(&probe)?;
            probe.param_slices_mut()[group][i] = original - fd_step;
            let minus = loss_at(&probe)?;
            probe.param_slices_mut()[group][i] = original;

            let numeric = (plus - minus) / (2.0 * fd_step);
            let exact = analytic[flat];
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_index = flat;
            }
            flat += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst_index,
        checked: flat,
        pass: max_rel_err < tolerance,
    })
}
