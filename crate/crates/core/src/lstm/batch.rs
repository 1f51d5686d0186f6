//! Full-batch forward and backward passes for training: every window advances
//! through a layer together, so each step is one matrix product.

use nalgebra::{DMatrix, DVector};

use super::cell::sigmoid;
use super::network::{LstmNetwork, INPUT_SIZE, OUTPUT_SIZE};
use crate::rng::SeededRng;

struct StepBatch {
    concat: DMatrix<f64>,
    input: DMatrix<f64>,
    forget: DMatrix<f64>,
    output: DMatrix<f64>,
    candidate: DMatrix<f64>,
    c_prev: DMatrix<f64>,
    tanh_c: DMatrix<f64>,
}

/// Inverted-dropout multipliers per layer and step (`hidden x windows`),
/// drawn window by window and layer by layer, the same stream order as one
/// forward pass per window.
fn draw_masks(net: &LstmNetwork, windows: usize, steps: usize, rng: Option<&mut SeededRng>) -> Vec<Option<Vec<DMatrix<f64>>>> {
    let Some(rng) = rng else {
        return vec![None; net.layers.len()];
    };
    let mut masks: Vec<Option<Vec<DMatrix<f64>>>> = net
        .layers
        .iter()
        .zip(&net.dropout_rates)
        .map(|(layer, &rate)| (rate > 0.0).then(|| vec![DMatrix::<f64>::zeros(layer.hidden_size, windows); steps]))
        .collect();
    for w in 0..windows {
        for (l, layer) in net.layers.iter().enumerate() {
            let rate = net.dropout_rates[l];
            let Some(mask) = &mut masks[l] else { continue };
            let keep = 1.0 / (1.0 - rate);
            for step in mask.iter_mut() {
                for k in 0..layer.hidden_size {
                    step[(k, w)] = if rng.uniform() < rate { 0.0 } else { keep };
                }
            }
        }
    }
    masks
}

/// Mean squared error over all windows and outputs, with its gradient.
/// Every sequence must hold the same number of steps.
pub(crate) fn batch_loss_and_gradient(
    net: &LstmNetwork,
    sequences: &[Vec<f64>],
    targets: &[[f64; OUTPUT_SIZE]],
    rng: Option<&mut SeededRng>,
) -> (f64, LstmNetwork) {
    let batch = sequences.len();
    let steps = sequences[0].len() / INPUT_SIZE;
    let masks = draw_masks(net, batch, steps, rng);

    let mut inputs: Vec<DMatrix<f64>> = (0..steps)
        .map(|t| DMatrix::from_fn(INPUT_SIZE, batch, |c, w| sequences[w][t * INPUT_SIZE + c]))
        .collect();
    let mut caches: Vec<Vec<StepBatch>> = Vec::with_capacity(net.layers.len());
    let mut weight_mats = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let h = layer.hidden_size;
        let fan_in = layer.fan_in();
        let w_mat = DMatrix::from_row_slice(4 * h, fan_in, &layer.weights);
        let bias = DVector::from_column_slice(&layer.biases);
        let mut h_state = DMatrix::<f64>::zeros(h, batch);
        let mut c_state = DMatrix::<f64>::zeros(h, batch);
        let mut outputs = Vec::with_capacity(steps);
        let mut step_caches = Vec::with_capacity(steps);
        for (t, x) in inputs.iter().enumerate() {
            let mut concat = DMatrix::<f64>::zeros(fan_in, batch);
            concat.rows_mut(0, h).copy_from(&h_state);
            concat.rows_mut(h, layer.input_size).copy_from(x);
            let mut z = &w_mat * &concat;
            for mut col in z.column_iter_mut() {
                col += &bias;
            }
            let input = z.rows(0, h).map(sigmoid);
            let forget = z.rows(h, h).map(sigmoid);
            let output = z.rows(2 * h, h).map(sigmoid);
            let candidate = z.rows(3 * h, h).map(f64::tanh);
            let c_new = forget.component_mul(&c_state) + input.component_mul(&candidate);
            let tanh_c = c_new.map(f64::tanh);
            let h_new = output.component_mul(&tanh_c);
            let mut out = h_new.clone();
            if let Some(mask) = &masks[l] {
                out.component_mul_assign(&mask[t]);
            }
            outputs.push(out);
            step_caches.push(StepBatch {
                concat,
                input,
                forget,
                output,
                candidate,
                c_prev: c_state,
                tanh_c,
            });
            c_state = c_new;
            h_state = h_new;
        }
        caches.push(step_caches);
        weight_mats.push(w_mat);
        inputs = outputs;
    }

    let hidden = net.last_hidden();
    let head_input = &inputs[steps - 1];
    let dense = DMatrix::from_row_slice(OUTPUT_SIZE, hidden, &net.dense_weights);
    let mut pre = &dense * head_input;
    for mut col in pre.column_iter_mut() {
        col += DVector::from_column_slice(&net.dense_bias);
    }
    let scale = 1.0 / (batch * OUTPUT_SIZE) as f64;
    let mut loss = 0.0;
    let mut d_pre = DMatrix::<f64>::zeros(OUTPUT_SIZE, batch);
    for w in 0..batch {
        for k in 0..OUTPUT_SIZE {
            let z = pre[(k, w)];
            let err = z.max(0.0) - targets[w][k];
            loss += err * err * scale;
            if z > 0.0 {
                d_pre[(k, w)] = 2.0 * err * scale;
            }
        }
    }

    let mut grads = net.zeros_like();
    let d_dense = &d_pre * head_input.transpose();
    for k in 0..OUTPUT_SIZE {
        for j in 0..hidden {
            grads.dense_weights[k * hidden + j] = d_dense[(k, j)];
        }
        grads.dense_bias[k] = d_pre.row(k).sum();
    }

    let mut d_outputs: Vec<DMatrix<f64>> = (0..steps).map(|_| DMatrix::<f64>::zeros(hidden, batch)).collect();
    d_outputs[steps - 1] = dense.transpose() * &d_pre;
    for (l, layer) in net.layers.iter().enumerate().rev() {
        let h = layer.hidden_size;
        let fan_in = layer.fan_in();
        if let Some(mask) = &masks[l] {
            for (d, m) in d_outputs.iter_mut().zip(mask) {
                d.component_mul_assign(m);
            }
        }
        // `tr_mul` and in-place `gemm` take nalgebra's unblocked path; explicit
        // transposes keep every product on the blocked kernel
        let w_t = weight_mats[l].transpose();
        let mut d_w = DMatrix::<f64>::zeros(4 * h, fan_in);
        let mut d_b = DVector::<f64>::zeros(4 * h);
        let mut dh_next = DMatrix::<f64>::zeros(h, batch);
        let mut dc_next = DMatrix::<f64>::zeros(h, batch);
        let mut d_inputs = vec![DMatrix::<f64>::zeros(layer.input_size, batch); steps];
        for t in (0..steps).rev() {
            let sc = &caches[l][t];
            let mut dz = DMatrix::<f64>::zeros(4 * h, batch);
            for w in 0..batch {
                for k in 0..h {
                    let (i, f, o, g) = (
                        sc.input[(k, w)],
                        sc.forget[(k, w)],
                        sc.output[(k, w)],
                        sc.candidate[(k, w)],
                    );
                    let tc = sc.tanh_c[(k, w)];
                    let dh = d_outputs[t][(k, w)] + dh_next[(k, w)];
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[(k, w)];
                    dc_next[(k, w)] = dc * f;
                    dz[(k, w)] = dc * g * i * (1.0 - i);
                    dz[(h + k, w)] = dc * sc.c_prev[(k, w)] * f * (1.0 - f);
                    dz[(2 * h + k, w)] = dh * tc * o * (1.0 - o);
                    dz[(3 * h + k, w)] = dc * i * (1.0 - g * g);
                }
            }
            d_w += &dz * sc.concat.transpose();
            d_b += dz.column_sum();
            let d_concat = &w_t * &dz;
            dh_next = d_concat.rows(0, h).into_owned();
            d_inputs[t] = d_concat.rows(h, layer.input_size).into_owned();
        }
        let grad_layer = &mut grads.layers[l];
        for r in 0..4 * h {
            for c in 0..fan_in {
                grad_layer.weights[r * fan_in + c] = d_w[(r, c)];
            }
        }
        grad_layer.biases.copy_from_slice(d_b.as_slice());
        d_outputs = d_inputs;
    }
    (loss, grads)
}
