use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::params::Params;

/// One leg of a learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &Params) -> Self {
        let zeros: Vec<Vec<f64>> = params.lens().into_iter().map(|l| vec![0.0; l]).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut Params, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NnError::Arch(format!("learning rate must be positive, got {lr}")));
        }
        if grads.len() != params.len() || grads.iter().zip(&self.m).any(|(g, m)| g.len() != m.len()) {
            return Err(NnError::Shape("gradient list does not match parameters".into()));
        }
        if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(NnError::NonFinite(format!("gradient of {}", params.names[i])));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.tensors.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                *w -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use orbit_core::RTensor;

    fn single(x: Vec<f64>) -> Params {
        let mut p = Params::default();
        p.push("x", RTensor::from_vec(x));
        p
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = single(vec![1.0, -2.0]);
        let before = p.clone();
        let mut opt = Adam::new(&p);
        for _ in 0..5 {
            opt.step(&mut p, &[vec![0.0, 0.0]], 1e-2).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1 g, v = 0.001 g^2, bias corrected to g and g^2
        let mut p = single(vec![0.0, 0.0]);
        let mut opt = Adam::new(&p);
        opt.step(&mut p, &[vec![3.0, -0.5]], 1e-3).unwrap();
        let x = p.tensors[0].data();
        assert!((x[0] + 1e-3 * 3.0 / (3.0 + 1e-8)).abs() < 1e-15);
        assert!((x[1] - 1e-3 * 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let a = [0.3, -1.2, 2.0];
        let mut p = single(vec![0.0; 3]);
        let mut opt = Adam::new(&p);
        for _ in 0..2000 {
            let g: Vec<f64> = p.tensors[0].data().iter().zip(&a).map(|(x, a)| 2.0 * (x - a)).collect();
            opt.step(&mut p, &[g], 1e-2).unwrap();
        }
        let d: f64 = p.tensors[0].data().iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 1e-4, "distance {d}");
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = single(vec![0.0]);
        let mut opt = Adam::new(&p);
        assert!(opt.step(&mut p, &[vec![f64::NAN]], 1e-3).is_err());
    }
}
