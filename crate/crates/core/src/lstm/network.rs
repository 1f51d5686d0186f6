use std::fmt;
use std::str::FromStr;

use super::cell::{step_cached, LstmLayerParams, LstmState, StepCache};
use crate::error::{Error, Result};
use crate::kv::{join, KvMap};
use crate::rng::SeededRng;

pub const INPUT_SIZE: usize = 2;
pub const OUTPUT_SIZE: usize = 2;
const FORMAT_TAG: &str = "cyclecast-lstm";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// One 64-unit layer, dropout 0.05.
    Single64,
    /// Layers of 128, 64 and 32 units, dropout 0.2 after each.
    Stacked,
    /// Any other layer stack (tests, experiments).
    Custom,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Single64 => "single64",
            Architecture::Stacked => "stacked",
            Architecture::Custom => "custom",
        }
    }

    pub fn layout(self) -> Option<(&'static [usize], &'static [f64])> {
        match self {
            Architecture::Single64 => Some((&[64], &[0.05])),
            Architecture::Stacked => Some((&[128, 64, 32], &[0.2, 0.2, 0.2])),
            Architecture::Custom => None,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single64" => Ok(Architecture::Single64),
            "stacked" => Ok(Architecture::Stacked),
            "custom" => Ok(Architecture::Custom),
            other => Err(Error::InvalidConfig(format!("unknown lstm architecture `{other}`"))),
        }
    }
}

/// Stacked LSTM layers followed by a dense ReLU head on the last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    pub architecture: Architecture,
    pub layers: Vec<LstmLayerParams>,
    /// Inverted-dropout rate applied to each layer's output sequence in training.
    pub dropout_rates: Vec<f64>,
    /// `OUTPUT_SIZE x last hidden`, row-major.
    pub dense_weights: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

fn glorot(rng: &mut SeededRng, values: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    values.iter_mut().for_each(|v| *v = rng.uniform_range(-limit, limit));
}

pub fn init_network(architecture: Architecture, seed: u64) -> Result<LstmNetwork> {
    let (hidden, dropout) = architecture.layout().ok_or_else(|| {
        Error::InvalidConfig("the custom architecture needs explicit layer sizes".into())
    })?;
    let mut net = LstmNetwork::new(hidden, dropout, seed)?;
    net.architecture = architecture;
    Ok(net)
}

impl LstmNetwork {
    /// Glorot-uniform weights per gate matrix, forget-gate biases 1, other
    /// LSTM biases 0, dense bias 0.5 (middle of the scaled target range so the
    /// ReLU head starts active).
    pub fn new(hidden_sizes: &[usize], dropout_rates: &[f64], seed: u64) -> Result<Self> {
        if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig("lstm needs at least one non-empty layer".into()));
        }
        if dropout_rates.len() != hidden_sizes.len() || dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidConfig("one dropout rate in [0, 1) per layer".into()));
        }
        let mut rng = SeededRng::new(seed);
        let mut layers = Vec::with_capacity(hidden_sizes.len());
        let mut input = INPUT_SIZE;
        for &hidden in hidden_sizes {
            let mut layer = LstmLayerParams::zeros(input, hidden);
            for gate in super::Gate::ALL {
                glorot(&mut rng, layer.gate_weights_mut(gate), hidden + input, hidden);
            }
            layer.gate_bias_mut(super::Gate::Forget).fill(1.0);
            layers.push(layer);
            input = hidden;
        }
        let mut dense_weights = vec![0.0; OUTPUT_SIZE * input];
        glorot(&mut rng, &mut dense_weights, input, OUTPUT_SIZE);
        Ok(Self {
            architecture: Architecture::Custom,
            layers,
            dropout_rates: dropout_rates.to_vec(),
            dense_weights,
            dense_bias: vec![0.5; OUTPUT_SIZE],
        })
    }

    pub fn last_hidden(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden_size)
    }

    /// Same shapes, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.param_blocks_mut().into_iter().for_each(|b| b.fill(0.0));
        z
    }

    /// Parameter arrays in serialization order: per layer the stacked gate
    /// weights then biases, then the dense weights and bias.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for layer in &self.layers {
            blocks.push(&layer.weights);
            blocks.push(&layer.biases);
        }
        blocks.push(&self.dense_weights);
        blocks.push(&self.dense_bias);
        blocks
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for layer in self.layers.iter_mut() {
            let LstmLayerParams { weights, biases, .. } = layer;
            blocks.push(weights);
            blocks.push(biases);
        }
        blocks.push(&mut self.dense_weights);
        blocks.push(&mut self.dense_bias);
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_blocks().concat()
    }

    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for block in self.param_blocks_mut() {
            if index < block.len() {
                return &mut block[index];
            }
            index -= block.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.param_blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn to_text(&self) -> String {
        let hidden: Vec<usize> = self.layers.iter().map(|l| l.hidden_size).collect();
        let mut out = format!(
            "format={FORMAT_TAG}\nversion={FORMAT_VERSION}\narchitecture={}\ninput_size={INPUT_SIZE}\n\
             hidden_sizes={}\ndropout_rates={}\noutput_size={OUTPUT_SIZE}\n",
            self.architecture,
            join(&hidden),
            join(&self.dropout_rates)
        );
        for (k, layer) in self.layers.iter().enumerate() {
            out.push_str(&format!("layer.{k}.weights={}\n", join(&layer.weights)));
            out.push_str(&format!("layer.{k}.biases={}\n", join(&layer.biases)));
        }
        out.push_str(&format!("dense.weights={}\n", join(&self.dense_weights)));
        out.push_str(&format!("dense.bias={}\n", join(&self.dense_bias)));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KvMap::parse(text)?;
        if kv.raw("format") != Some(FORMAT_TAG) {
            return Err(kv.field_error("format", format!("expected `{FORMAT_TAG}`")));
        }
        let version: u32 = kv.get("version")?;
        if version != FORMAT_VERSION {
            return Err(kv.field_error("version", format!("unsupported version {version}")));
        }
        let hidden: Vec<usize> = kv.list("hidden_sizes")?;
        let rates: Vec<f64> = kv.list("dropout_rates")?;
        let mut net = LstmNetwork::new(&hidden, &rates, 0)?;
        net.architecture = kv.get("architecture")?;
        for (k, layer) in net.layers.iter_mut().enumerate() {
            for (name, dest) in [("weights", &mut layer.weights), ("biases", &mut layer.biases)] {
                let key = format!("layer.{k}.{name}");
                let values: Vec<f64> = kv.list(&key)?;
                if values.len() != dest.len() {
                    return Err(kv.field_error(&key, format!("expected {} values", dest.len())));
                }
                *dest = values;
            }
        }
        for (key, dest) in [("dense.weights", &mut net.dense_weights), ("dense.bias", &mut net.dense_bias)] {
            let values: Vec<f64> = kv.list(key)?;
            if values.len() != dest.len() {
                return Err(kv.field_error(key, format!("expected {} values", dest.len())));
            }
            *dest = values;
        }
        Ok(net)
    }
}

/// Forward-pass mode. Training draws inverted-dropout masks from the stream.
pub enum Mode<'a> {
    Infer,
    Train(&'a mut SeededRng),
}

pub(crate) struct LayerCache {
    steps: Vec<StepCache>,
    /// `T x hidden` inverted-dropout multipliers, absent when no mask was drawn.
    mask: Option<Vec<f64>>,
}

pub struct ForwardCache {
    layers: Vec<LayerCache>,
    /// Final hidden state after dropout, as seen by the dense head.
    head_input: Vec<f64>,
    pre_activation: Vec<f64>,
}

pub struct ForwardPass {
    pub prediction: Vec<f64>,
    pub cache: ForwardCache,
}

/// Runs every layer over the full sequence (`T x INPUT_SIZE`, row-major) from
/// zero state and applies the ReLU head to the last hidden state.
pub fn forward_sequence(net: &LstmNetwork, sequence: &[f64], mut mode: Mode<'_>) -> Result<ForwardPass> {
    if sequence.is_empty() {
        return Err(Error::EmptyInput("lstm input sequence"));
    }
    if !sequence.len().is_multiple_of(INPUT_SIZE) {
        return Err(Error::Shape {
            expected: INPUT_SIZE,
            actual: sequence.len() % INPUT_SIZE,
        });
    }
    let steps = sequence.len() / INPUT_SIZE;
    let mut layer_input = sequence.to_vec();
    let mut caches = Vec::with_capacity(net.layers.len());
    for (layer, &rate) in net.layers.iter().zip(&net.dropout_rates) {
        let hidden = layer.hidden_size;
        let width = layer.input_size;
        let mut state = LstmState::zeros(hidden);
        let mut outputs = Vec::with_capacity(steps * hidden);
        let mut step_caches = Vec::with_capacity(steps);
        for t in 0..steps {
            let (next, cache) = step_cached(layer, &layer_input[t * width..(t + 1) * width], &state);
            outputs.extend_from_slice(&next.h);
            step_caches.push(cache);
            state = next;
        }
        let mask = match &mut mode {
            Mode::Train(rng) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                let mask: Vec<f64> = (0..outputs.len())
                    .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
                    .collect();
                outputs.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
                Some(mask)
            }
            _ => None,
        };
        caches.push(LayerCache {
            steps: step_caches,
            mask,
        });
        layer_input = outputs;
    }
    let hidden = net.last_hidden();
    let head_input = layer_input[(steps - 1) * hidden..].to_vec();
    let pre_activation: Vec<f64> = net
        .dense_weights
        .chunks_exact(hidden)
        .zip(&net.dense_bias)
        .map(|(row, b)| b + row.iter().zip(&head_input).map(|(w, h)| w * h).sum::<f64>())
        .collect();
    let prediction = pre_activation.iter().map(|&z| z.max(0.0)).collect();
    Ok(ForwardPass {
        prediction,
        cache: ForwardCache {
            layers: caches,
            head_input,
            pre_activation,
        },
    })
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to the prediction is `d_prediction`. ReLU'(0) is taken as 0.
pub(crate) fn backward(net: &LstmNetwork, cache: &ForwardCache, d_prediction: &[f64], grads: &mut LstmNetwork) {
    let hidden = net.last_hidden();
    let mut d_head = vec![0.0; hidden];
    for (k, (&dp, &z)) in d_prediction.iter().zip(&cache.pre_activation).enumerate() {
        let dz = if z > 0.0 { dp } else { 0.0 };
        if dz == 0.0 {
            continue;
        }
        grads.dense_bias[k] += dz;
        let row = &mut grads.dense_weights[k * hidden..(k + 1) * hidden];
        row.iter_mut().zip(&cache.head_input).for_each(|(g, h)| *g += dz * h);
        let w = &net.dense_weights[k * hidden..(k + 1) * hidden];
        d_head.iter_mut().zip(w).for_each(|(d, w)| *d += dz * w);
    }

    let steps = cache.layers[0].steps.len();
    // gradient w.r.t. the (post-dropout) output sequence of the current layer
    let mut d_outputs = vec![0.0; steps * hidden];
    d_outputs[(steps - 1) * hidden..].copy_from_slice(&d_head);

    for (l, layer) in net.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let h = layer.hidden_size;
        let fan_in = layer.fan_in();
        if let Some(mask) = &lc.mask {
            d_outputs.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
        }
        let grad_layer = &mut grads.layers[l];
        let mut d_inputs = vec![0.0; steps * layer.input_size];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let sc = &lc.steps[t];
            for k in 0..h {
                let dh = d_outputs[t * h + k] + dh_next[k];
                let d_out = dh * sc.tanh_c[k];
                let dc = dh * sc.output[k] * (1.0 - sc.tanh_c[k] * sc.tanh_c[k]) + dc_next[k];
                let d_in = dc * sc.candidate[k];
                let d_cand = dc * sc.input[k];
                let d_forget = dc * sc.c_prev[k];
                dc_next[k] = dc * sc.forget[k];
                dz[k] = d_in * sc.input[k] * (1.0 - sc.input[k]);
                dz[h + k] = d_forget * sc.forget[k] * (1.0 - sc.forget[k]);
                dz[2 * h + k] = d_out * sc.output[k] * (1.0 - sc.output[k]);
                dz[3 * h + k] = d_cand * (1.0 - sc.candidate[k] * sc.candidate[k]);
            }
            let mut d_concat = vec![0.0; fan_in];
            for (row_idx, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad_layer.biases[row_idx] += g;
                let gw = &mut grad_layer.weights[row_idx * fan_in..(row_idx + 1) * fan_in];
                gw.iter_mut().zip(&sc.concat).for_each(|(a, v)| *a += g * v);
                let w = &layer.weights[row_idx * fan_in..(row_idx + 1) * fan_in];
                d_concat.iter_mut().zip(w).for_each(|(d, w)| *d += g * w);
            }
            dh_next.copy_from_slice(&d_concat[..h]);
            d_inputs[t * layer.input_size..(t + 1) * layer.input_size].copy_from_slice(&d_concat[h..]);
        }
        d_outputs = d_inputs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architectures() {
        let a = init_network(Architecture::Single64, 1).unwrap();
        assert_eq!(a.layers.len(), 1);
        assert_eq!(a.layers[0].hidden_size, 64);
        assert_eq!(a.layers[0].input_size, 2);
        assert_eq!(a.dropout_rates, vec![0.05]);

        let b = init_network(Architecture::Stacked, 1).unwrap();
        let sizes: Vec<usize> = b.layers.iter().map(|l| l.hidden_size).collect();
        assert_eq!(sizes, vec![128, 64, 32]);
        assert_eq!(b.layers[1].input_size, 128);
        assert_eq!(b.layers[2].input_size, 64);
        assert_eq!(b.dropout_rates, vec![0.2; 3]);
        assert_eq!(b.dense_weights.len(), 2 * 32);
        assert!(init_network(Architecture::Custom, 1).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_network(Architecture::Stacked, 9).unwrap();
        let b = init_network(Architecture::Stacked, 9).unwrap();
        let bytes = |n: &LstmNetwork| n.flat_params().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(a, init_network(Architecture::Stacked, 10).unwrap());
        let limit = (6.0f64 / (128.0 + 2.0 + 128.0)).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(a.layers[0].gate_bias(crate::lstm::Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(a.layers[0].gate_bias(crate::lstm::Gate::Input).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn no_dropout_train_equals_infer() {
        let net = LstmNetwork::new(&[5, 3], &[0.0, 0.0], 2).unwrap();
        let seq = [0.1, 0.5, 0.3, 0.2, 0.9, 0.4];
        let mut rng = SeededRng::new(1);
        let a = forward_sequence(&net, &seq, Mode::Infer).unwrap();
        let b = forward_sequence(&net, &seq, Mode::Train(&mut rng)).unwrap();
        assert_eq!(a.prediction, b.prediction);
    }

    #[test]
    fn dense_bias_passthrough_and_relu_clamp() {
        let mut net = LstmNetwork::new(&[4], &[0.0], 3).unwrap();
        net.dense_weights.fill(0.0);
        net.dense_bias = vec![29.0, 5.0];
        let seq = [0.3, 0.1, 0.7, 0.8];
        assert_eq!(forward_sequence(&net, &seq, Mode::Infer).unwrap().prediction, vec![29.0, 5.0]);
        net.dense_bias = vec![-1.0, -1.0];
        assert_eq!(forward_sequence(&net, &seq, Mode::Infer).unwrap().prediction, vec![0.0, 0.0]);
    }

    #[test]
    fn predictions_never_negative() {
        let mut rng = SeededRng::new(4);
        for seed in 0..20 {
            let mut net = LstmNetwork::new(&[6], &[0.0], seed).unwrap();
            net.dense_bias = vec![-0.3, 0.1];
            let seq: Vec<f64> = (0..6).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let p = forward_sequence(&net, &seq, Mode::Infer).unwrap().prediction;
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn empty_or_ragged_sequence() {
        let net = LstmNetwork::new(&[2], &[0.0], 0).unwrap();
        assert!(forward_sequence(&net, &[], Mode::Infer).is_err());
        assert!(forward_sequence(&net, &[1.0, 2.0, 3.0], Mode::Infer).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let net = LstmNetwork::new(&[8, 4], &[0.2, 0.0], 5).unwrap();
        let seq = [0.2, 0.4, 0.6, 0.1];
        let clean = forward_sequence(&net, &seq, Mode::Infer).unwrap();
        // the first layer's output reaches the head only through layer two, so
        // check the mask itself: mean multiplier per entry over many draws
        let mut rng = SeededRng::new(6);
        let runs = 10_000;
        let mut sums = [0.0; 2 * 8];
        for _ in 0..runs {
            let pass = forward_sequence(&net, &seq, Mode::Train(&mut rng)).unwrap();
            let mask = pass.cache.layers[0].mask.as_ref().unwrap();
            let raw: Vec<f64> = pass.cache.layers[0].steps.iter().flat_map(|s| {
                s.output.iter().zip(&s.tanh_c).map(|(o, t)| o * t).collect::<Vec<_>>()
            }).collect();
            for (k, (m, r)) in mask.iter().zip(&raw).enumerate() {
                sums[k] += m * r;
            }
        }
        let reference: Vec<f64> = clean.cache.layers[0].steps.iter().flat_map(|s| {
            s.output.iter().zip(&s.tanh_c).map(|(o, t)| o * t).collect::<Vec<_>>()
        }).collect();
        for (s, r) in sums.iter().zip(&reference) {
            let mean = s / runs as f64;
            assert!((mean - r).abs() <= 0.02 * r.abs() + 1e-12, "{mean} vs {r}");
        }
    }

    #[test]
    fn text_round_trip() {
        let net = init_network(Architecture::Single64, 12).unwrap();
        let text = net.to_text();
        assert!(text.starts_with("format=cyclecast-lstm\nversion=1\narchitecture=single64\n"));
        let back = LstmNetwork::from_text(&text).unwrap();
        assert_eq!(back, net);
        assert!(LstmNetwork::from_text(&text.replace("version=1", "version=9")).is_err());
    }
}
