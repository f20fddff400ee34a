//! Central finite-difference validation of taped gradients.

use crate::autodiff::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|)` over all coordinates.
    pub max_relative_error: f64,
    /// `(parameter slot, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
    /// Coordinates whose error exceeds the tolerance.
    pub failures: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares the taped gradient of `f` against central differences
/// `(f(w + εe) - f(w - εe)) / 2ε`, coordinate by coordinate.
///
/// `f` receives a fresh tape and one [`Var`] per entry of `params`
/// (registered in slot order) and must return a `1×1` output. It has to be
/// deterministic: any noise must be drawn outside and captured.
pub fn grad_check<'a, T, F>(f: F, params: &[DenseMatrix<T>], eps: T, tol: T) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<'a, T>, &[Var]) -> Result<Var>,
{
    if eps <= T::zero() {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let eval = |ps: &[DenseMatrix<T>]| -> Result<T> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps
            .iter()
            .enumerate()
            .map(|(slot, p)| tape.param(slot, p.clone()))
            .collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let analytic = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params
            .iter()
            .enumerate()
            .map(|(slot, p)| tape.param(slot, p.clone()))
            .collect();
        let out = f(&mut tape, &vars)?;
        tape.backward(out)?
    };

    let mut work: Vec<DenseMatrix<T>> = params.to_vec();
    let two_eps = eps + eps;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        coordinates: 0,
        failures: 0,
        tolerance: tol.as_f64(),
    };
    for slot in 0..params.len() {
        for k in 0..params[slot].len() {
            let orig = params[slot].as_slice()[k];
            work[slot].as_mut_slice()[k] = orig + eps;
            let plus = eval(&work)?;
            work[slot].as_mut_slice()[k] = orig - eps;
            let minus = eval(&work)?;
            work[slot].as_mut_slice()[k] = orig;

            let numeric = (plus - minus) / two_eps;
            let a = analytic.get(slot).as_slice()[k];
            let rel = ((a - numeric).abs() / a.abs().max(T::one())).as_f64();
            report.coordinates += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel;
                report.worst = Some((slot, k));
            }
            if !(rel < tol.as_f64()) {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}
