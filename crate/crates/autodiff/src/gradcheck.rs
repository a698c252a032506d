use crate::{Result, Tape, Tensor, TensorError, Var};

/// Compares tape gradients of a scalar function against central finite
/// differences and returns the largest relative error over all coordinates.
///
/// The relative error of a coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |point: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.param(point)?;
        let out = f(&mut tape, v)?;
        scalar(&tape, out)
    };

    let mut tape = Tape::new();
    let v = tape.param(x.clone())?;
    let out = f(&mut tape, v)?;
    scalar(&tape, out)?;
    let analytic = tape.backward(out)?.wrt(v);

    let mut worst = 0.0f64;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

fn scalar(tape: &Tape, v: Var) -> Result<f64> {
    let value = tape.value(v);
    value
        .item()
        .ok_or_else(|| TensorError::NonScalarLoss(value.shape().to_vec()))
}
