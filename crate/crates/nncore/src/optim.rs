use crate::error::{NnError, Result};
use crate::network::Gradients;
use crate::serialize;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Scalar = f32> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>], config: AdamConfig) -> Self {
        AdamState {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    /// One update. Non-finite gradients leave parameters and moments
    /// untouched and return an error.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &Gradients<T>) -> Result<()> {
        if params.len() != grads.tensors.len() || params.len() != self.m.len() {
            return Err(NnError::Shape("adam: parameter/gradient count mismatch".into()));
        }
        for (p, g) in params.iter().zip(&grads.tensors) {
            if p.shape() != g.shape() {
                return Err(NnError::Shape(format!(
                    "adam: parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if !grads.all_finite() {
            return Err(NnError::NonFinite("gradients passed to adam"));
        }

        self.t += 1;
        let c = self.config;
        let t = self.t as i32;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one_b1 = T::from_f64(1.0 - c.beta1);
        let one_b2 = T::from_f64(1.0 - c.beta2);
        let m_corr = T::from_f64(1.0 / (1.0 - c.beta1.powi(t)));
        let v_corr = T::from_f64(1.0 / (1.0 - c.beta2.powi(t)));
        let lr = T::from_f64(c.lr);
        let eps = T::from_f64(c.eps);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + one_b1 * gi;
                *vi = b2 * *vi + one_b2 * gi * gi;
                let m_hat = *mi * m_corr;
                let v_hat = *vi * v_corr;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

impl AdamState<f32> {
    /// Step counter followed by the moments in the parameter-blob format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut names = Vec::with_capacity(2 * self.m.len());
        let mut tensors = Vec::with_capacity(2 * self.m.len());
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            names.push(format!("m.{i}"));
            tensors.push(m.clone());
            names.push(format!("v.{i}"));
            tensors.push(v.clone());
        }
        let mut out = self.t.to_le_bytes().to_vec();
        out.extend(serialize::encode(&names, &tensors));
        out
    }

    /// Restores moments saved by [`AdamState::to_bytes`]; shapes must match.
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        if bytes.len() < 8 {
            return Err(NnError::Format("adam state truncated".into()));
        }
        let t = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let loaded = serialize::decode(&bytes[8..])?;
        if loaded.len() != 2 * self.m.len() {
            return Err(NnError::Format(format!(
                "expected {} moment tensors, found {}",
                2 * self.m.len(),
                loaded.len()
            )));
        }
        let mut it = loaded.into_iter().map(|(_, t)| t);
        for (m, v) in self.m.iter_mut().zip(self.v.iter_mut()) {
            let (lm, lv) = (it.next().expect("counted"), it.next().expect("counted"));
            if lm.shape() != m.shape() || lv.shape() != v.shape() {
                return Err(NnError::Format("adam moment shape mismatch".into()));
            }
            *m = lm;
            *v = lv;
        }
        self.t = t;
        Ok(())
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut Gradients<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(T::from_f64(max_norm / norm));
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::full(&[1], v)]
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = single(0.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = Gradients { tensors: single(1.0) };
        s.step(&mut p, &g).unwrap();
        // m_hat = v_hat = 1
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn state_round_trip() {
        let mut p = vec![Tensor::full(&[2, 3], 0.5f32), Tensor::full(&[3], -1.0f32)];
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = Gradients {
            tensors: vec![Tensor::full(&[2, 3], 0.1f32), Tensor::full(&[3], -0.2f32)],
        };
        s.step(&mut p, &g).unwrap();
        let bytes = s.to_bytes();
        let mut back = AdamState::new(&p, AdamConfig::default());
        back.load_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
        let mut wrong = AdamState::new(&p[..1], AdamConfig::default());
        assert!(wrong.load_bytes(&bytes).is_err());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = single(0.25);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = Gradients { tensors: single(0.0) };
        for _ in 0..3 {
            s.step(&mut p, &g).unwrap();
        }
        assert_eq!(p[0].data()[0], 0.25);
        assert_eq!(s.m[0].data()[0], 0.0);
        assert_eq!(s.v[0].data()[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_aborts_update() {
        let mut p = single(1.0);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = Gradients { tensors: single(f64::INFINITY) };
        assert!(matches!(s.step(&mut p, &g), Err(NnError::NonFinite(_))));
        assert_eq!(p[0].data()[0], 1.0);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p: Vec<Tensor<f32>> = vec![Tensor::from_vec(&[3], vec![0.1, -0.2, 0.3]).unwrap()];
            let mut s = AdamState::new(&p, AdamConfig::default());
            for k in 0..10 {
                let g = Gradients {
                    tensors: vec![Tensor::from_vec(&[3], vec![k as f32 * 0.1, -0.5, 0.7]).unwrap()],
                };
                s.step(&mut p, &g).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        let bits = |p: &[Tensor<f32>]| p[0].data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = Gradients {
            tensors: vec![Tensor::from_vec(&[2], vec![3.0f64, 4.0]).unwrap()],
        };
        let before = clip_global_norm(&mut g, 0.5);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((g.global_norm() - 0.5).abs() < 1e-12);
        let again = clip_global_norm(&mut g, 10.0);
        assert!((again - 0.5).abs() < 1e-12);
    }
}
