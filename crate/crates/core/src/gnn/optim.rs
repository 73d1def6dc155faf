use ndarray::{ArrayBase, DataMut, Dimension, Zip};

use super::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: i32,
    first: ModelParams,
    second: ModelParams,
}

fn update<S, T, D>(
    param: &mut ArrayBase<S, D>,
    grad: &ArrayBase<T, D>,
    m: &mut ArrayBase<S, D>,
    v: &mut ArrayBase<S, D>,
    cfg: &AdamConfig,
    bias1: f64,
    bias2: f64,
) where
    S: DataMut<Elem = f64>,
    T: ndarray::Data<Elem = f64>,
    D: Dimension,
{
    Zip::from(param).and(grad).and(m).and(v).for_each(|p, &g, m, v| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    });
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ModelParams) -> Self {
        let zeros = ModelParams::zeros(params.input_dim(), params.hidden(), params.classes());
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let cfg = self.config;
        let bias1 = 1.0 - cfg.beta1.powi(self.step);
        let bias2 = 1.0 - cfg.beta2.powi(self.step);
        update(&mut params.w0, &grads.w0, &mut self.first.w0, &mut self.second.w0, &cfg, bias1, bias2);
        update(&mut params.w1, &grads.w1, &mut self.first.w1, &mut self.second.w1, &cfg, bias1, bias2);
        update(&mut params.w2, &grads.w2, &mut self.first.w2, &mut self.second.w2, &cfg, bias1, bias2);
        update(&mut params.b, &grads.b, &mut self.first.b, &mut self.second.b, &cfg, bias1, bias2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = ModelParams::zeros(1, 1, 2);
        let mut g = ModelParams::zeros(1, 1, 2);
        g.w0[[0, 0]] = 3.0;
        g.b[1] = -0.01;
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &g);
        assert!((p.w0[[0, 0]] + 1e-3).abs() < 1e-9);
        assert!((p.b[1] - 1e-3).abs() < 1e-6);
        assert_eq!(p.w1[[0, 0]], 0.0);
    }
}
