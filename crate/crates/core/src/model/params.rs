//! Flat parameter and state buffers. Layers hold handles into one shared
//! vector, which keeps the optimizer, checkpointing and branch-isolation
//! checks trivial: everything is a contiguous slice.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Handle to a contiguous trainable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId {
    pub offset: usize,
    pub len: usize,
}

/// Handle into the non-trainable state buffer (batch-norm running stats).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateId {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Default)]
pub struct ParamAlloc {
    params: usize,
    states: usize,
}

impl ParamAlloc {
    pub fn params(&mut self, len: usize) -> ParamId {
        let offset = self.params;
        self.params += len;
        ParamId { offset, len }
    }

    pub fn states(&mut self, len: usize) -> StateId {
        let offset = self.states;
        self.states += len;
        StateId { offset, len }
    }

    pub fn param_len(&self) -> usize {
        self.params
    }

    pub fn state_len(&self) -> usize {
        self.states
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl ParamStore {
    pub fn zeros(len: usize) -> Self {
        ParamStore {
            values: vec![0.0; len],
            grads: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.values[id.offset..id.offset + id.len]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id.offset..id.offset + id.len]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.grads[id.offset..id.offset + id.len]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.offset..id.offset + id.len]
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }

    /// He-normal fill for a weight tensor with the given fan-in.
    pub fn init_he(&mut self, id: ParamId, fan_in: usize, rng: &mut ChaCha8Rng) {
        let std = (2.0 / fan_in as f64).sqrt();
        for v in self.get_mut(id) {
            *v = std * normal(rng);
        }
    }

    pub fn init_const(&mut self, id: ParamId, value: f64) {
        self.get_mut(id).fill(value);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateStore {
    pub values: Vec<f64>,
}

impl StateStore {
    pub fn zeros(len: usize) -> Self {
        StateStore {
            values: vec![0.0; len],
        }
    }

    pub fn get(&self, id: StateId) -> &[f64] {
        &self.values[id.offset..id.offset + id.len]
    }

    pub fn get_mut(&mut self, id: StateId) -> &mut [f64] {
        &mut self.values[id.offset..id.offset + id.len]
    }
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
