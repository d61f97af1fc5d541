use super::{shape_err, NnError, Scalar, Tensor};

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
}

/// Bias-corrected Adam over a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F: Scalar> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    step: u64,
    states: Vec<AdamState<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: F) -> Self {
        Self {
            lr,
            beta1: F::of(0.9),
            beta2: F::of(0.999),
            epsilon: F::of(1e-8),
            step: 0,
            states: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn states(&self) -> &[AdamState<F>] {
        &self.states
    }

    /// Applies one update: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [&mut Tensor<F>], grads: &[&[F]]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(shape_err("adam", format!("{} params, {} grads", params.len(), grads.len())));
        }
        if self.states.is_empty() {
            self.states = params
                .iter()
                .map(|p| AdamState {
                    m: vec![F::zero(); p.numel()],
                    v: vec![F::zero(); p.numel()],
                })
                .collect();
        }
        if self.states.len() != params.len() {
            return Err(shape_err("adam", "parameter list changed between steps"));
        }
        for ((p, g), s) in params.iter().zip(grads).zip(&self.states) {
            if p.numel() != g.len() || s.m.len() != g.len() {
                return Err(shape_err("adam", format!("param {:?} vs grad {}", p.shape(), g.len())));
            }
        }
        self.step += 1;
        let one = F::one();
        let t = self.step as i32;
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for ((p, g), s) in params.iter_mut().zip(grads).zip(self.states.iter_mut()) {
            let data = p.data_mut();
            for i in 0..data.len() {
                let gi = g[i];
                s.m[i] = self.beta1 * s.m[i] + (one - self.beta1) * gi;
                s.v[i] = self.beta2 * s.v[i] + (one - self.beta2) * gi * gi;
                let m_hat = s.m[i] / bc1;
                let v_hat = s.v[i] / bc2;
                data[i] = data[i] - self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
