//! Additive (feed-forward) attention over a sequence of state vectors.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{add_assign, dot, Tensor};
use super::ops::softmax;
use crate::error::{EdaError, Result};
use crate::rng;

/// Additive attention parameters.
///
/// For states `h_i`: `s_i = tanh(W h_i + b)`, score `e_i = v . s_i`,
/// weights `a = softmax(e)`, context `c = sum_i a_i h_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    pub state_dim: usize,
    pub w: Tensor,
    pub b: Tensor,
    pub v: Tensor,
}

impl Attention {
    pub fn zeros(state_dim: usize) -> Self {
        Attention {
            state_dim,
            w: Tensor::zeros(state_dim, state_dim),
            b: Tensor::vector(state_dim),
            v: Tensor::vector(state_dim),
        }
    }

    pub fn init(state_dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let mut att = Self::zeros(state_dim);
        for (_, t) in att.tensors_mut() {
            for v in &mut t.data {
                *v = rng::uniform(rng, -scale, scale);
            }
        }
        att
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.state_dim)
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("w", &self.w), ("b", &self.b), ("v", &self.v)]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("w", &mut self.w), ("b", &mut self.b), ("v", &mut self.v)]
    }

    /// Attend over a nonempty state sequence, producing a weighted context.
    pub fn forward(&self, states: &[Vec<f64>]) -> Result<AttnForward> {
        if states.is_empty() {
            return Err(EdaError::EmptyInput("attention states"));
        }
        let mut s = Vec::with_capacity(states.len());
        let mut scores = Vec::with_capacity(states.len());
        for h in states {
            if h.len() != self.state_dim {
                return Err(EdaError::DimensionMismatch {
                    context: "attention state".into(),
                    expected: self.state_dim,
                    found: h.len(),
                });
            }
            let mut p = self.w.matvec(h);
            add_assign(&mut p, &self.b.data);
            let si: Vec<f64> = p.into_iter().map(f64::tanh).collect();
            scores.push(dot(&self.v.data, &si));
            s.push(si);
        }
        let weights = softmax(&scores);
        let mut context = vec![0.0; self.state_dim];
        for (a, h) in weights.iter().zip(states) {
            for (c, &x) in context.iter_mut().zip(h) {
                *c += a * x;
            }
        }
        Ok(AttnForward {
            states: states.to_vec(),
            s,
            weights,
            context,
        })
    }

    /// Backpropagate the gradient on the context vector; returns parameter
    /// gradients and per-state gradients.
    pub fn backward(&self, cache: &AttnForward, d_context: &[f64]) -> (Attention, Vec<Vec<f64>>) {
        let n = cache.states.len();
        let mut grads = self.zeros_like();
        let mut d_states = vec![vec![0.0; self.state_dim]; n];

        // Context sum: c = sum a_i h_i.
        let mut d_weights = vec![0.0; n];
        for i in 0..n {
            d_weights[i] = dot(d_context, &cache.states[i]);
            for (g, &x) in d_states[i].iter_mut().zip(d_context) {
                *g += cache.weights[i] * x;
            }
        }
        // Softmax Jacobian.
        let inner: f64 = cache
            .weights
            .iter()
            .zip(&d_weights)
            .map(|(&a, &g)| a * g)
            .sum();
        let d_scores: Vec<f64> = cache
            .weights
            .iter()
            .zip(&d_weights)
            .map(|(&a, &g)| a * (g - inner))
            .collect();

        for i in 0..n {
            // e_i = v . s_i
            for (gv, &si) in grads.v.data.iter_mut().zip(&cache.s[i]) {
                *gv += d_scores[i] * si;
            }
            let dpre: Vec<f64> = self
                .v
                .data
                .iter()
                .zip(&cache.s[i])
                .map(|(&vj, &sj)| d_scores[i] * vj * (1.0 - sj * sj))
                .collect();
            grads.w.add_outer(&dpre, &cache.states[i]);
            add_assign(&mut grads.b.data, &dpre);
            add_assign(&mut d_states[i], &self.w.matvec_t(&dpre));
        }
        (grads, d_states)
    }
}

/// Forward cache: scored states, normalized weights, and context vector.
#[derive(Debug, Clone)]
pub struct AttnForward {
    pub states: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    /// Normalized attention weights: nonnegative, sum to 1.
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}
