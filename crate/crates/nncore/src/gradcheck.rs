//! Central finite-difference verification of [`Network::backward`].
//!
//! The probe loss is `L = sum(output * probe)`, so its output gradient is
//! `probe` itself. Every parameter and input coordinate is perturbed by `±h`
//! in `f64`. Coordinates whose perturbation flips the sign of any ReLU input
//! sit on a kink where the derivative is undefined; those are counted and
//! skipped rather than compared.

use crate::error::Result;
use crate::network::{LayerSpec, Network};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

const REL_FLOOR: f64 = 1e-6;

/// Probe loss plus the sign pattern of every ReLU input.
fn evaluate(net: &Network<f64>, input: &Tensor<f64>, probe: &Tensor<f64>) -> Result<(f64, Vec<bool>)> {
    let acts = net.forward(input)?;
    let mut signs = Vec::new();
    for (spec, x) in net.specs().iter().zip(acts.layer_inputs()) {
        if *spec == LayerSpec::Relu {
            signs.extend(x.data().iter().map(|&v| v > 0.0));
        }
    }
    let loss = acts.output().data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
    Ok((loss, signs))
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn check_network(
    net: &Network<f64>,
    input: &Tensor<f64>,
    probe: &Tensor<f64>,
    h: f64,
) -> Result<GradCheckReport> {
    let acts = net.forward(input)?;
    let (grads, dx) = net.backward(&acts, probe, true)?;
    let dx = dx.expect("input gradient requested");
    let mut report = GradCheckReport::default();

    let eval = |n: &Network<f64>, x: &Tensor<f64>| evaluate(n, x, probe);

    let mut work = net.clone();
    for (pi, g) in grads.tensors.iter().enumerate() {
        for j in 0..g.len() {
            let orig = work.params()[pi].data()[j];
            work.params_mut()[pi].data_mut()[j] = orig + h;
            let (lp, sp) = eval(&work, input)?;
            work.params_mut()[pi].data_mut()[j] = orig - h;
            let (lm, sm) = eval(&work, input)?;
            work.params_mut()[pi].data_mut()[j] = orig;
            if sp != sm {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            report.max_rel_error = report.max_rel_error.max(rel_error(g.data()[j], numeric));
            report.checked += 1;
        }
    }

    let mut x = input.clone();
    for j in 0..x.len() {
        let orig = x.data()[j];
        x.data_mut()[j] = orig + h;
        let (lp, sp) = eval(net, &x)?;
        x.data_mut()[j] = orig - h;
        let (lm, sm) = eval(net, &x)?;
        x.data_mut()[j] = orig;
        if sp != sm {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(rel_error(dx.data()[j], numeric));
        report.checked += 1;
    }
    Ok(report)
}
