use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Compares the tape gradient of a scalar function against central
/// differences. Returns `max_i |analytic_i − numeric_i| / max(1, |analytic_i|)`.
pub fn gradient_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let input = tape.leaf(x.clone(), true)?;
    let out = f(&mut tape, input)?;
    if tape.value(out).len() != 1 {
        return Err(Error::dim("gradient check needs a scalar output"));
    }
    let grads = tape.backward(out)?;
    let analytic = grads.get(input).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));

    let eval = |probe: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let input = tape.constant(probe.clone())?;
        let out = f(&mut tape, input)?;
        let v = tape.value(out).data()[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numeric("non-finite value while perturbing"))
        }
    };

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
