use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use crate::error::Result;

/// Adam with coupled L2 weight decay (`g ← g + wd·θ` before the moment
/// updates), preceded by global-norm gradient clipping. Parameters that
/// receive no gradient in a step are left untouched, moments included.
#[derive(Debug)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub(crate) vars: Vec<Var>,
    pub(crate) m: Vec<Tensor>,
    pub(crate) v: Vec<Tensor>,
    pub(crate) steps: Vec<u64>,
}

impl Adam {
    pub fn new(vars: Vec<Var>, lr: f64, weight_decay: f64, max_grad_norm: Option<f64>) -> Result<Self> {
        let m = vars.iter().map(|v| v.as_tensor().zeros_like()).collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        let steps = vec![0; vars.len()];
        Ok(Adam {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm,
            vars,
            m,
            v,
            steps,
        })
    }

    /// Global L2 norm of the gradients present in `grads`.
    pub fn grad_norm(&self, grads: &GradStore) -> Result<f64> {
        let mut total = 0.0f64;
        for var in &self.vars {
            if let Some(g) = grads.get(var.as_tensor()) {
                total += g.sqr()?.sum_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
            }
        }
        Ok(total.sqrt())
    }

    /// One update; returns the pre-clipping gradient norm.
    pub fn step(&mut self, grads: &GradStore) -> Result<f64> {
        let norm = self.grad_norm(grads)?;
        let scale = match self.max_grad_norm {
            Some(max) if norm > max => max / (norm + 1e-6),
            _ => 1.0,
        };
        for i in 0..self.vars.len() {
            let var = &self.vars[i];
            let Some(g) = grads.get(var.as_tensor()) else { continue };
            // Detached so the moments do not keep this step's graph alive.
            let theta = var.as_tensor().detach();
            let g = g.detach();
            let mut g = if scale != 1.0 { (g * scale)? } else { g };
            if self.weight_decay != 0.0 {
                g = (g + (&theta * self.weight_decay)?)?;
            }
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            let m = ((&self.m[i] * self.beta1)? + (&g * (1.0 - self.beta1))?)?;
            let v = ((&self.v[i] * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?;
            let bc1 = 1.0 - self.beta1.powi(t);
            let bc2 = 1.0 - self.beta2.powi(t);
            let denom = ((v.sqrt()? / bc2.sqrt())? + self.eps)?;
            let update = (m.div(&denom)? * (self.lr / bc1))?;
            var.set(&theta.sub(&update)?)?;
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{to_vec_f64, DEVICE};

    fn quad_grads(x: &Var, target: &Tensor) -> GradStore {
        let loss = x.as_tensor().sub(target).unwrap().sqr().unwrap().sum_all().unwrap();
        loss.backward().unwrap()
    }

    #[test]
    fn converges_on_a_quadratic() {
        let x = Var::from_tensor(&Tensor::new(&[5.0f64, -3.0], &DEVICE).unwrap()).unwrap();
        let target = Tensor::new(&[1.0f64, 2.0], &DEVICE).unwrap();
        let mut opt = Adam::new(vec![x.clone()], 0.1, 0.0, None).unwrap();
        for _ in 0..500 {
            let g = quad_grads(&x, &target);
            opt.step(&g).unwrap();
        }
        let v = to_vec_f64(x.as_tensor()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-2 && (v[1] - 2.0).abs() < 1e-2, "{v:?}");
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // First Adam step moves each coordinate by lr * sign(g) (up to eps).
        let x = Var::from_tensor(&Tensor::new(&[1.0f64, -1.0], &DEVICE).unwrap()).unwrap();
        let target = Tensor::new(&[0.0f64, 0.0], &DEVICE).unwrap();
        let mut opt = Adam::new(vec![x.clone()], 0.01, 0.5, None).unwrap();
        opt.step(&quad_grads(&x, &target)).unwrap();
        let v = to_vec_f64(x.as_tensor()).unwrap();
        assert!((v[0] - 0.99).abs() < 1e-9 && (v[1] + 0.99).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let x = Var::from_tensor(&Tensor::new(&[0.3f32, -7.25, 1e-3], &DEVICE).unwrap()).unwrap();
        let before = x.as_tensor().to_vec1::<f32>().unwrap();
        let target = Tensor::new(&[1.0f32, 2.0, 3.0], &DEVICE).unwrap();
        let mut opt = Adam::new(vec![x.clone()], 0.0, 1e-4, Some(10.0)).unwrap();
        for _ in 0..3 {
            opt.step(&quad_grads(&x, &target)).unwrap();
        }
        let after = x.as_tensor().to_vec1::<f32>().unwrap();
        assert_eq!(
            before.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            after.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn clipping_bounds_the_applied_gradient() {
        let x = Var::from_tensor(&Tensor::new(&[100.0f64], &DEVICE).unwrap()).unwrap();
        let target = Tensor::new(&[0.0f64], &DEVICE).unwrap();
        let opt = Adam::new(vec![x.clone()], 0.1, 0.0, Some(10.0)).unwrap();
        let g = quad_grads(&x, &target);
        assert!((opt.grad_norm(&g).unwrap() - 200.0).abs() < 1e-9);
    }
}
