//! Single-layer gated recurrent cell (tanh candidate activation) with
//! hand-rolled backpropagation through time.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{add, add_assign, hadamard, sigmoid, Tensor};
use crate::error::{EdaError, Result};
use crate::rng;

/// Gated recurrent cell parameters.
///
/// Gates: update `z`, reset `r`, candidate `c`:
/// `z = sigmoid(Wz x + Uz h + bz)`, `r = sigmoid(Wr x + Ur h + br)`,
/// `c = tanh(Wh x + Uh (r*h) + bh)`, `h' = (1-z)*h + z*c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub wz: Tensor,
    pub uz: Tensor,
    pub bz: Tensor,
    pub wr: Tensor,
    pub ur: Tensor,
    pub br: Tensor,
    pub wh: Tensor,
    pub uh: Tensor,
    pub bh: Tensor,
}

impl GruCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruCell {
            input_dim,
            hidden_dim,
            wz: Tensor::zeros(hidden_dim, input_dim),
            uz: Tensor::zeros(hidden_dim, hidden_dim),
            bz: Tensor::vector(hidden_dim),
            wr: Tensor::zeros(hidden_dim, input_dim),
            ur: Tensor::zeros(hidden_dim, hidden_dim),
            br: Tensor::vector(hidden_dim),
            wh: Tensor::zeros(hidden_dim, input_dim),
            uh: Tensor::zeros(hidden_dim, hidden_dim),
            bh: Tensor::vector(hidden_dim),
        }
    }

    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let mut cell = Self::zeros(input_dim, hidden_dim);
        for (_, t) in cell.tensors_mut() {
            for v in &mut t.data {
                *v = rng::uniform(rng, -scale, scale);
            }
        }
        cell
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden_dim)
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("wz", &self.wz),
            ("uz", &self.uz),
            ("bz", &self.bz),
            ("wr", &self.wr),
            ("ur", &self.ur),
            ("br", &self.br),
            ("wh", &self.wh),
            ("uh", &self.uh),
            ("bh", &self.bh),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("wz", &mut self.wz),
            ("uz", &mut self.uz),
            ("bz", &mut self.bz),
            ("wr", &mut self.wr),
            ("ur", &mut self.ur),
            ("br", &mut self.br),
            ("wh", &mut self.wh),
            ("uh", &mut self.uh),
            ("bh", &mut self.bh),
        ]
    }

    /// Run the recurrence over a nonempty input sequence.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<GruForward> {
        if inputs.is_empty() {
            return Err(EdaError::EmptyInput("recurrent encoder input"));
        }
        let mut steps = Vec::with_capacity(inputs.len());
        let mut hidden = Vec::with_capacity(inputs.len());
        let mut h_prev = vec![0.0; self.hidden_dim];
        for x in inputs {
            if x.len() != self.input_dim {
                return Err(EdaError::DimensionMismatch {
                    context: "recurrent encoder input".into(),
                    expected: self.input_dim,
                    found: x.len(),
                });
            }
            let mut z = add(&self.wz.matvec(x), &self.uz.matvec(&h_prev));
            add_assign(&mut z, &self.bz.data);
            let z: Vec<f64> = z.into_iter().map(sigmoid).collect();

            let mut r = add(&self.wr.matvec(x), &self.ur.matvec(&h_prev));
            add_assign(&mut r, &self.br.data);
            let r: Vec<f64> = r.into_iter().map(sigmoid).collect();

            let rh = hadamard(&r, &h_prev);
            let mut c = add(&self.wh.matvec(x), &self.uh.matvec(&rh));
            add_assign(&mut c, &self.bh.data);
            let c: Vec<f64> = c.into_iter().map(f64::tanh).collect();

            let h: Vec<f64> = z
                .iter()
                .zip(&c)
                .zip(&h_prev)
                .map(|((&zi, &ci), &hi)| (1.0 - zi) * hi + zi * ci)
                .collect();

            steps.push(GruStep {
                x: x.clone(),
                h_prev: h_prev.clone(),
                z,
                r,
                rh,
                c,
            });
            hidden.push(h.clone());
            h_prev = h;
        }
        Ok(GruForward { steps, hidden })
    }

    /// Backpropagate through time.
    ///
    /// `d_hidden[t]` is the loss gradient arriving at hidden state `t` from
    /// above (e.g. attention over all states). Returns parameter gradients
    /// and the gradient with respect to each input vector.
    pub fn backward(&self, cache: &GruForward, d_hidden: &[Vec<f64>]) -> (GruCell, Vec<Vec<f64>>) {
        debug_assert_eq!(d_hidden.len(), cache.steps.len());
        let mut grads = self.zeros_like();
        let mut d_inputs = vec![vec![0.0; self.input_dim]; cache.steps.len()];
        let mut carry = vec![0.0; self.hidden_dim];

        for t in (0..cache.steps.len()).rev() {
            let step = &cache.steps[t];
            let dh: Vec<f64> = d_hidden[t].iter().zip(&carry).map(|(a, b)| a + b).collect();

            let dz: Vec<f64> = dh
                .iter()
                .zip(&step.c)
                .zip(&step.h_prev)
                .map(|((&g, &ci), &hi)| g * (ci - hi))
                .collect();
            let dc = hadamard(&dh, &step.z);
            let mut dh_prev: Vec<f64> = dh
                .iter()
                .zip(&step.z)
                .zip(&step.h_prev)
                .map(|((&g, &zi), _)| g * (1.0 - zi))
                .collect();

            let dpre_c: Vec<f64> = dc.iter().zip(&step.c).map(|(&g, &ci)| g * (1.0 - ci * ci)).collect();
            grads.wh.add_outer(&dpre_c, &step.x);
            grads.uh.add_outer(&dpre_c, &step.rh);
            add_assign(&mut grads.bh.data, &dpre_c);

            let d_rh = self.uh.matvec_t(&dpre_c);
            let dr = hadamard(&d_rh, &step.h_prev);
            add_assign(&mut dh_prev, &hadamard(&d_rh, &step.r));

            let dpre_z: Vec<f64> = dz.iter().zip(&step.z).map(|(&g, &zi)| g * zi * (1.0 - zi)).collect();
            grads.wz.add_outer(&dpre_z, &step.x);
            grads.uz.add_outer(&dpre_z, &step.h_prev);
            add_assign(&mut grads.bz.data, &dpre_z);
            add_assign(&mut dh_prev, &self.uz.matvec_t(&dpre_z));

            let dpre_r: Vec<f64> = dr.iter().zip(&step.r).map(|(&g, &ri)| g * ri * (1.0 - ri)).collect();
            grads.wr.add_outer(&dpre_r, &step.x);
            grads.ur.add_outer(&dpre_r, &step.h_prev);
            add_assign(&mut grads.br.data, &dpre_r);
            add_assign(&mut dh_prev, &self.ur.matvec_t(&dpre_r));

            let mut dx = self.wz.matvec_t(&dpre_z);
            add_assign(&mut dx, &self.wr.matvec_t(&dpre_r));
            add_assign(&mut dx, &self.wh.matvec_t(&dpre_c));
            d_inputs[t] = dx;

            carry = dh_prev;
        }
        (grads, d_inputs)
    }
}

/// One cached recurrence step.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub c: Vec<f64>,
}

/// Forward cache: one hidden state per input position.
#[derive(Debug, Clone)]
pub struct GruForward {
    pub steps: Vec<GruStep>,
    pub hidden: Vec<Vec<f64>>,
}

impl GruForward {
    pub fn final_state(&self) -> &[f64] {
        self.hidden.last().expect("nonempty forward")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_zero_states() {
        let cell = GruCell::zeros(3, 4);
        let out = cell
            .forward(&[vec![1.0, -2.0, 0.5], vec![0.1, 0.2, 0.3]])
            .unwrap();
        for h in &out.hidden {
            assert!(h.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_input_final_state_is_sole_state() {
        let mut rng = rng::seeded(1);
        let cell = GruCell::init(3, 4, &mut rng, 0.5);
        let out = cell.forward(&[vec![0.3, -0.4, 0.9]]).unwrap();
        assert_eq!(out.hidden.len(), 1);
        assert_eq!(out.final_state(), &out.hidden[0][..]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cell = GruCell::zeros(3, 4);
        assert!(matches!(
            cell.forward(&[vec![1.0, 2.0]]),
            Err(EdaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_input_rejected() {
        let cell = GruCell::zeros(3, 4);
        assert!(cell.forward(&[]).is_err());
    }

    /// Hand-unrolled recurrence oracle: scalar cell (1-dim input and hidden)
    /// stepped twice on paper, compared against the implementation.
    #[test]
    fn two_step_hand_unrolled_recurrence() {
        let mut cell = GruCell::zeros(1, 1);
        cell.wz.data[0] = 0.5;
        cell.uz.data[0] = -0.3;
        cell.bz.data[0] = 0.1;
        cell.wr.data[0] = 0.8;
        cell.ur.data[0] = 0.2;
        cell.br.data[0] = -0.1;
        cell.wh.data[0] = 1.1;
        cell.uh.data[0] = 0.7;
        cell.bh.data[0] = 0.05;

        let x0 = 0.6_f64;
        let x1 = -0.4_f64;

        // Step 1 (h0 = 0).
        let z1 = sigmoid(0.5 * x0 + 0.1);
        let r1 = sigmoid(0.8 * x0 - 0.1);
        let c1 = (1.1 * x0 + 0.7 * (r1 * 0.0) + 0.05).tanh();
        let h1 = (1.0 - z1) * 0.0 + z1 * c1;
        // Step 2.
        let z2 = sigmoid(0.5 * x1 - 0.3 * h1 + 0.1);
        let r2 = sigmoid(0.8 * x1 + 0.2 * h1 - 0.1);
        let c2 = (1.1 * x1 + 0.7 * (r2 * h1) + 0.05).tanh();
        let h2 = (1.0 - z2) * h1 + z2 * c2;

        let out = cell.forward(&[vec![x0], vec![x1]]).unwrap();
        assert!((out.hidden[0][0] - h1).abs() < 1e-15);
        assert!((out.hidden[1][0] - h2).abs() < 1e-15);
    }

    /// Central-difference check of the full backward pass on a scalar loss
    /// L = sum of all hidden states.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng::seeded(9);
        let cell = GruCell::init(3, 4, &mut rng, 0.4);
        let inputs = vec![
            vec![0.2, -0.7, 0.4],
            vec![-0.1, 0.3, 0.8],
            vec![0.5, 0.5, -0.5],
        ];
        let loss = |c: &GruCell| -> f64 {
            let out = c.forward(&inputs).unwrap();
            out.hidden.iter().flat_map(|h| h.iter()).sum()
        };
        let cache = cell.forward(&inputs).unwrap();
        let d_hidden = vec![vec![1.0; 4]; 3];
        let (grads, d_inputs) = cell.backward(&cache, &d_hidden);

        let eps = 1e-6;
        let analytic = grads.tensors();
        for (idx, (name, tensor)) in cell.tensors().iter().enumerate() {
            for i in 0..tensor.len() {
                let mut plus = cell.clone();
                plus.tensors_mut()[idx].1.data[i] += eps;
                let mut minus = cell.clone();
                minus.tensors_mut()[idx].1.data[i] -= eps;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let a = analytic[idx].1.data[i];
                assert!(
                    (a - numeric).abs() < 1e-7,
                    "{name}[{i}]: analytic {a} vs numeric {numeric}"
                );
            }
        }
        // Input gradients as well.
        for (t, x) in inputs.iter().enumerate() {
            for i in 0..x.len() {
                let mut plus = inputs.clone();
                plus[t][i] += eps;
                let mut minus = inputs.clone();
                minus[t][i] -= eps;
                let f = |ins: &[Vec<f64>]| -> f64 {
                    cell.forward(ins)
                        .unwrap()
                        .hidden
                        .iter()
                        .flat_map(|h| h.iter())
                        .sum()
                };
                let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
                assert!((d_inputs[t][i] - numeric).abs() < 1e-7);
            }
        }
    }
}
