use crate::error::{Error, Result};

/// Gate blocks in the order they are stacked inside a layer's weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// One LSTM layer. `weights` stacks the four gate matrices `W_i, W_f, W_o, W_c`
/// (each `hidden x (hidden + input)`, row-major, acting on `[h(t-1), x(t)]`),
/// and `biases` stacks `b_i, b_f, b_o, b_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            weights: vec![0.0; 4 * hidden_size * (hidden_size + input_size)],
            biases: vec![0.0; 4 * hidden_size],
        }
    }

    /// Width of the concatenated `[h, x]` vector.
    pub fn fan_in(&self) -> usize {
        self.hidden_size + self.input_size
    }

    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let block = self.hidden_size * self.fan_in();
        &self.weights[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_weights_mut(&mut self, gate: Gate) -> &mut [f64] {
        let block = self.hidden_size * self.fan_in();
        &mut self.weights[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        &self.biases[gate as usize * self.hidden_size..(gate as usize + 1) * self.hidden_size]
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_size;
        &mut self.biases[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Activations of one step kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// `[h(t-1), x(t)]`
    pub concat: Vec<f64>,
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn step_cached(params: &LstmLayerParams, x: &[f64], prev: &LstmState) -> (LstmState, StepCache) {
    let hidden = params.hidden_size;
    let fan_in = params.fan_in();
    let mut concat = Vec::with_capacity(fan_in);
    concat.extend_from_slice(&prev.h);
    concat.extend_from_slice(x);

    let mut z = params.biases.clone();
    for (row, zk) in params.weights.chunks_exact(fan_in).zip(z.iter_mut()) {
        *zk += row.iter().zip(&concat).map(|(w, v)| w * v).sum::<f64>();
    }
    let input: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let forget: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let output: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let candidate: Vec<f64> = z[3 * hidden..].iter().map(|v| v.tanh()).collect();

    let c: Vec<f64> = (0..hidden)
        .map(|k| forget[k] * prev.c[k] + input[k] * candidate[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    (
        LstmState { h, c },
        StepCache {
            concat,
            input,
            forget,
            output,
            candidate,
            c_prev: prev.c.clone(),
            tanh_c,
        },
    )
}

/// One application of the LSTM cell:
///
/// ```text
/// i = σ(W_i [h, x] + b_i)    f = σ(W_f [h, x] + b_f)    o = σ(W_o [h, x] + b_o)
/// ĉ = tanh(W_c [h, x] + b_c)
/// c' = f ⊙ c + i ⊙ ĉ         h' = o ⊙ tanh(c')
/// ```
pub fn cell_step(params: &LstmLayerParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    if x.len() != params.input_size {
        return Err(Error::Shape {
            expected: params.input_size,
            actual: x.len(),
        });
    }
    if prev.h.len() != params.hidden_size || prev.c.len() != params.hidden_size {
        return Err(Error::Shape {
            expected: params.hidden_size,
            actual: prev.h.len().max(prev.c.len()),
        });
    }
    Ok(step_cached(params, x, prev).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_layer(input: usize, hidden: usize, seed: u64) -> LstmLayerParams {
        let mut rng = SeededRng::new(seed);
        let mut p = LstmLayerParams::zeros(input, hidden);
        p.weights.iter_mut().for_each(|w| *w = rng.uniform_range(-1.0, 1.0));
        p.biases.iter_mut().for_each(|b| *b = rng.uniform_range(-1.0, 1.0));
        p
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmLayerParams::zeros(2, 3);
        let s = cell_step(&p, &[28.0, 5.0], &LstmState::zeros(3)).unwrap();
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_carries_cell() {
        let mut p = LstmLayerParams::zeros(2, 3);
        p.gate_bias_mut(Gate::Forget).fill(20.0);
        let prev = LstmState {
            h: vec![0.0; 3],
            c: vec![0.7, -1.3, 2.0],
        };
        // candidate weights and bias are zero, so the input path adds i * tanh(0) = 0
        let s = cell_step(&p, &[0.4, 0.9], &prev).unwrap();
        for (a, b) in s.c.iter().zip(&prev.c) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn matches_scalar_reimplementation() {
        let p = random_layer(2, 4, 13);
        let prev = LstmState {
            h: vec![0.1, -0.4, 0.3, 0.9],
            c: vec![-0.5, 0.2, 1.1, -0.05],
        };
        let x = [0.25, -0.75];
        let s = cell_step(&p, &x, &prev).unwrap();

        // straight-line oracle with explicit indexing into each gate block
        let hidden = 4;
        let width = 6;
        let gate = |g: usize, k: usize| -> f64 {
            let mut acc = p.biases[g * hidden + k];
            for j in 0..width {
                let v = if j < hidden { prev.h[j] } else { x[j - hidden] };
                acc += p.weights[(g * hidden + k) * width + j] * v;
            }
            acc
        };
        for k in 0..hidden {
            let i = 1.0 / (1.0 + (-gate(0, k)).exp());
            let f = 1.0 / (1.0 + (-gate(1, k)).exp());
            let o = 1.0 / (1.0 + (-gate(2, k)).exp());
            let g = gate(3, k).tanh();
            let c = f * prev.c[k] + i * g;
            let h = o * c.tanh();
            assert!((s.c[k] - c).abs() <= 1e-12);
            assert!((s.h[k] - h).abs() <= 1e-12);
        }
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut state = LstmState::zeros(5);
        let p = random_layer(2, 5, 4);
        let mut rng = SeededRng::new(2);
        for _ in 0..200 {
            let x = [rng.uniform_range(-50.0, 50.0), rng.uniform_range(-50.0, 50.0)];
            let (next, cache) = step_cached(&p, &x, &state);
            assert!(next.h.iter().all(|h| (-1.0..=1.0).contains(h)));
            for gate in [&cache.input, &cache.forget, &cache.output] {
                assert!(gate.iter().all(|g| (0.0..=1.0).contains(g)));
            }
            state = next;
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmLayerParams::zeros(2, 3);
        assert!(cell_step(&p, &[1.0], &LstmState::zeros(3)).is_err());
        assert!(cell_step(&p, &[1.0, 2.0], &LstmState::zeros(2)).is_err());
    }

    #[test]
    fn gate_block_views() {
        let mut p = LstmLayerParams::zeros(2, 3);
        p.gate_weights_mut(Gate::Output).fill(1.0);
        assert_eq!(p.gate_weights(Gate::Output).len(), 15);
        assert_eq!(p.weights.iter().filter(|&&w| w == 1.0).count(), 15);
        assert!(p.gate_weights(Gate::Input).iter().all(|&w| w == 0.0));
        assert_eq!(p.weights[2 * 15], 1.0);
    }
}
