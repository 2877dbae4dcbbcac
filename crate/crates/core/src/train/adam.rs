use ndarray::Array2;

use crate::autodiff::ParamStore;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for every parameter of a store.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        AdamState {
            m: store.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect(),
            v: store.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One Adam update from the gradients currently held in `store`.
///
/// Weight decay is classic L2: `weight_decay * w` is added to the gradient
/// of every parameter flagged `decay`.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64, weight_decay: f64) {
    if state.m.len() != store.len() {
        *state = AdamState::new(store);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        if !p.trainable {
            continue;
        }
        let decay = if p.decay { weight_decay } else { 0.0 };
        ndarray::Zip::from(&mut p.value)
            .and(&p.grad)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                let g = g + decay * *w;
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            });
    }
}
