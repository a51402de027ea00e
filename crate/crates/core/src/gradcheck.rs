//! Central finite-difference gradient checking.

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Absolute floor added to the denominator of the relative error.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the reverse-mode gradient of the
/// scalar program `f` at `at` and its central difference with `step`:
/// `max_j |analytic_j − numeric_j| / (|numeric_j| + RELATIVE_FLOOR)`.
pub fn finite_diff_check<F>(f: F, at: &Matrix, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {step}")));
    }
    let mut tape = Tape::new();
    let x = tape.param(at.clone());
    let loss = f(&mut tape, x)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get_or_zeros(x, at.dim());

    let eval = |point: Matrix| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.param(point);
        let l = f(&mut t, v)?;
        Ok(t.scalar(l))
    };

    let mut worst = 0.0f64;
    let mut probe = at.clone();
    for idx in 0..at.len() {
        let (r, c) = (idx / at.ncols(), idx % at.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + step;
        let up = eval(probe.clone())?;
        probe[[r, c]] = orig - step;
        let down = eval(probe.clone())?;
        probe[[r, c]] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = (analytic[[r, c]] - numeric).abs() / (numeric.abs() + RELATIVE_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}
