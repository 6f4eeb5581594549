use super::tape::Tape;
use super::tensor::Tensor;
use super::{AdError, AdResult};

/// Compares the analytic gradient of a tape-building function against
/// central finite differences.
///
/// Returns the maximum over all coordinates of
/// `|analytic - fd| / max(1, |fd|)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> AdResult<f64>
where
    F: Fn(&mut Tape, &Tensor) -> AdResult<Tensor>,
{
    grad_check_multi(|tape, xs| f(tape, &xs[0]), std::slice::from_ref(x), h)
}

/// Same as [`grad_check`] over several independent inputs; the function
/// receives all of them registered as leaves on a fresh tape.
pub fn grad_check_multi<F>(f: F, inputs: &[Tensor], h: f64) -> AdResult<f64>
where
    F: Fn(&mut Tape, &[Tensor]) -> AdResult<Tensor>,
{
    if h <= 0.0 {
        return Err(AdError::BadStepSize(h));
    }

    let eval = |points: &[Tensor]| -> AdResult<f64> {
        let mut tape = Tape::new();
        let leaves: Vec<Tensor> = points
            .iter()
            .map(|t| tape.leaf(t))
            .collect::<AdResult<_>>()?;
        let out = f(&mut tape, &leaves)?;
        if !out.is_scalar() {
            return Err(AdError::NotScalar(out.shape().to_vec()));
        }
        Ok(out.item())
    };

    // Analytic gradients.
    let mut tape = Tape::new();
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| tape.leaf(t))
        .collect::<AdResult<_>>()?;
    let out = f(&mut tape, &leaves)?;
    if !out.is_scalar() {
        return Err(AdError::NotScalar(out.shape().to_vec()));
    }
    let grads = tape.backward(&out)?;

    let mut worst = 0.0f64;
    for (idx, input) in inputs.iter().enumerate() {
        let analytic = grads
            .grad(&leaves[idx])
            .expect("leaf gradient present")
            .data()
            .to_vec();
        for coord in 0..input.len() {
            let mut probe: Vec<Tensor> = inputs.to_vec();
            let mut plus = input.data().to_vec();
            plus[coord] += h;
            probe[idx] = Tensor::new(input.shape().to_vec(), plus);
            let f_plus = eval(&probe)?;

            let mut minus = input.data().to_vec();
            minus[coord] -= h;
            probe[idx] = Tensor::new(input.shape().to_vec(), minus);
            let f_minus = eval(&probe)?;

            let fd = (f_plus - f_minus) / (2.0 * h);
            let err = (analytic[coord] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
