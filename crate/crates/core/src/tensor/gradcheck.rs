//! Central finite-difference gradient checking.
//!
//! The numerical side only evaluates the forward pass, so it is independent
//! of every backward rule it is used to verify.

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-4;

/// Relative-error floor: below this magnitude differences are judged absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over every input entry.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub entries: usize,
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.value(out)
        .item()
        .ok_or_else(|| Error::Usage("gradient check needs a scalar function".into()))
}

/// Compares tape gradients of the scalar `f` against central differences.
pub fn check_gradients<F>(inputs: &[Tensor], f: F) -> Result<Report>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    check_gradients_with_step(inputs, DEFAULT_STEP, f)
}

pub fn check_gradients_with_step<F>(inputs: &[Tensor], step: f64, f: F) -> Result<Report>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let mut grads = tape.backward(out)?;

    let mut report = Report {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        entries: 0,
    };
    let mut probe = inputs.to_vec();
    for (which, var) in vars.iter().enumerate() {
        let analytic = grads
            .take(*var)
            .unwrap_or_else(|| Tensor::zeros(inputs[which].shape()));
        for i in 0..inputs[which].numel() {
            let orig = inputs[which].data()[i];
            probe[which].data_mut()[i] = orig + step;
            let up = evaluate(&probe, &f)?;
            probe[which].data_mut()[i] = orig - step;
            let down = evaluate(&probe, &f)?;
            probe[which].data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic.data()[i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.entries += 1;
        }
    }
    Ok(report)
}
