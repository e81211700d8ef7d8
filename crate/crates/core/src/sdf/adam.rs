use ndarray::Array2;

use super::scalar::Real;
use crate::error::{Error, Result};

/// Adam optimizer state: first/second moment accumulators matching the
/// parameter tensors, plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
    step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Array2<T>], lr: T) -> Self {
        Self {
            m: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            v: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            step: 0,
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update; `params` and `grads` must match the shapes
    /// the state was built with.
    pub fn step(&mut self, params: &mut [Array2<T>], grads: &[Array2<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam has {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for i in 0..params.len() {
            if params[i].dim() != self.m[i].dim() || grads[i].dim() != self.m[i].dim() {
                return Err(Error::ShapeMismatch(format!(
                    "adam tensor {i}: expected {:?}",
                    self.m[i].dim()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let one = T::one();
        for i in 0..params.len() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            ndarray::Zip::from(&mut params[i])
                .and(m)
                .and(v)
                .and(&grads[i])
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (one - self.beta1) * g;
                    *v = self.beta2 * *v + (one - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p = *p - self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
        Ok(())
    }

    /// Serialize moments for checkpointing: (step, flat m, flat v).
    pub fn flatten(&self) -> (u64, Vec<T>, Vec<T>) {
        let flat = |ts: &[Array2<T>]| ts.iter().flat_map(|a| a.iter().copied()).collect();
        (self.step, flat(&self.m), flat(&self.v))
    }

    pub fn restore(
        params: &[Array2<T>],
        lr: T,
        step: u64,
        m_flat: &[T],
        v_flat: &[T],
    ) -> Result<Self> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        if m_flat.len() != total || v_flat.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "adam checkpoint holds {} values, parameters need {total}",
                m_flat.len()
            )));
        }
        let unflatten = |flat: &[T]| {
            let mut out = Vec::with_capacity(params.len());
            let mut offset = 0;
            for p in params {
                let take = &flat[offset..offset + p.len()];
                out.push(Array2::from_shape_vec(p.dim(), take.to_vec()).unwrap());
                offset += p.len();
            }
            out
        };
        Ok(Self {
            m: unflatten(m_flat),
            v: unflatten(v_flat),
            step,
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = vec![arr2(&[[1.0f64, -2.0]])];
        let grads = vec![arr2(&[[0.0f64, 0.0]])];
        let mut adam = AdamState::new(&params, 0.1);
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params[0], arr2(&[[1.0, -2.0]]));
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut params = vec![arr2(&[[0.0f64, 0.0, 0.0]])];
        let grads = vec![arr2(&[[3.0f64, -0.001, 12.0]])];
        let mut adam = AdamState::new(&params, 0.01);
        adam.step(&mut params, &grads).unwrap();
        for (p, g) in params[0].iter().zip(grads[0].iter()) {
            assert!((p + 0.01 * g.signum()).abs() < 1e-6, "{p} vs sign {g}");
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(w) = (w - 3)^2, gradient 2(w - 3).
        let mut params = vec![arr2(&[[0.0f64]])];
        let mut adam = AdamState::new(&params, 0.01);
        for _ in 0..10_000 {
            let g = 2.0 * (params[0][(0, 0)] - 3.0);
            adam.step(&mut params, &[arr2(&[[g]])]).unwrap();
        }
        assert!(
            (params[0][(0, 0)] - 3.0).abs() < 1e-6,
            "w = {}",
            params[0][(0, 0)]
        );
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![arr2(&[[1.0f64, 2.0]])];
        let mut adam = AdamState::new(&params, 0.1);
        assert!(adam.step(&mut params, &[arr2(&[[1.0f64]])]).is_err());
    }

    #[test]
    fn flatten_restore_round_trip() {
        let mut params = vec![arr2(&[[1.0f64, 2.0]]), arr2(&[[3.0f64], [4.0]])];
        let grads = vec![arr2(&[[0.5f64, -0.5]]), arr2(&[[1.0f64], [-1.0]])];
        let mut adam = AdamState::new(&params, 0.05);
        adam.step(&mut params, &grads).unwrap();
        let (step, m, v) = adam.flatten();
        let restored = AdamState::restore(&params, 0.05, step, &m, &v).unwrap();
        let mut a = adam.clone();
        let mut b = restored;
        let mut pa = params.clone();
        let mut pb = params.clone();
        a.step(&mut pa, &grads).unwrap();
        b.step(&mut pb, &grads).unwrap();
        assert_eq!(pa, pb);
    }
}
