//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::numkit::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    /// Zeroed moments mirroring `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_moments(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(params: &[Tensor], beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            step: 0,
            beta1,
            beta2,
            eps,
            first: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
        }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }
}

/// One Adam update of every parameter tensor in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        p.check_same_dims(g, "adam_step")?;
        p.check_same_dims(&state.first[i], "adam_step")?;
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let pd = p.data_mut();
        let md = m.data_mut();
        let vd = v.data_mut();
        for (k, &gk) in g.data().iter().enumerate() {
            md[k] = b1 * md[k] + (1.0 - b1) * gk;
            vd[k] = b2 * vd[k] + (1.0 - b2) * gk * gk;
            let mhat = md[k] / c1;
            let vhat = vd[k] / c2;
            pd[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::from_rows(&[&[0.5, -1.5]]), Tensor::scalar(3.0)];
        let before = params.clone();
        let grads: Vec<_> = params.iter().map(|p| Tensor::zeros(p.dims())).collect();
        let mut st = AdamState::new(&params);
        for _ in 0..5 {
            adam_step(&mut params, &grads, &mut st, 0.01).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_gradient_sign() {
        let lr = 3e-4;
        for &g in &[2.5, -0.05, 1e3] {
            let mut p = vec![Tensor::scalar(1.0)];
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &[Tensor::scalar(g)], &mut st, lr).unwrap();
            let delta = p[0].data()[0] - 1.0;
            assert!((delta + lr * g.signum()).abs() < 1e-6 * lr, "g={g} delta={delta}");
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![Tensor::from_rows(&[&[0.1, 0.2, 0.3]])];
            let mut st = AdamState::new(&p);
            for k in 0..10 {
                let g = Tensor::from_rows(&[&[k as f64 * 0.1, -0.3, 0.7]]);
                adam_step(&mut p, &[g], &mut st, 1e-2).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a[0]), bits(&b[0]));
    }

    #[test]
    fn rejects_bad_lr_and_dims() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[Tensor::scalar(1.0)], &mut st, 0.0).is_err());
        assert!(adam_step(&mut p, &[Tensor::zeros(&[2])], &mut st, 0.1).is_err());
        assert!(adam_step(&mut p, &[], &mut st, 0.1).is_err());
    }
}
