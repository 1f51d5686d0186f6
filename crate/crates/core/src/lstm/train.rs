use super::batch::batch_loss_and_gradient;
use super::network::{backward, forward_sequence, Architecture, LstmNetwork, Mode, INPUT_SIZE, OUTPUT_SIZE};
use crate::error::{Error, Result};
use crate::features::SupervisedWindows;
use crate::rng::SeededRng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds the dropout masks.
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            seed: 0,
            architecture: Architecture::Single64,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted and leaves the parameters frozen.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} outside [0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: LstmNetwork,
    /// Mean squared error over the training windows, one entry per epoch,
    /// measured on the forward pass that produced that epoch's gradient.
    pub loss_curve: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, net: &mut LstmNetwork, grads: &LstmNetwork, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let mut offset = 0;
        for (p, g) in net.param_blocks_mut().into_iter().zip(grads.param_blocks()) {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for k in 0..p.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + EPSILON);
            }
            offset += p.len();
        }
    }
}

/// Mean squared error over all windows and both outputs, and its gradient.
///
/// With `rng` present the forward passes run in training mode (dropout).
pub fn loss_and_gradient(
    net: &LstmNetwork,
    sequences: &[Vec<f64>],
    targets: &[[f64; OUTPUT_SIZE]],
    rng: Option<&mut SeededRng>,
) -> Result<(f64, LstmNetwork)> {
    if sequences.len() != targets.len() {
        return Err(Error::Shape {
            expected: sequences.len(),
            actual: targets.len(),
        });
    }
    let steps = sequences.first().map_or(0, Vec::len);
    if steps > 0 && steps.is_multiple_of(INPUT_SIZE) && sequences.iter().all(|s| s.len() == steps) {
        return Ok(batch_loss_and_gradient(net, sequences, targets, rng));
    }
    per_window_loss_and_gradient(net, sequences, targets, rng)
}

/// One forward and backward pass per window; handles ragged sequences.
fn per_window_loss_and_gradient(
    net: &LstmNetwork,
    sequences: &[Vec<f64>],
    targets: &[[f64; OUTPUT_SIZE]],
    mut rng: Option<&mut SeededRng>,
) -> Result<(f64, LstmNetwork)> {
    let mut grads = net.zeros_like();
    let scale = 1.0 / (sequences.len() * OUTPUT_SIZE) as f64;
    let mut loss = 0.0;
    for (seq, target) in sequences.iter().zip(targets) {
        let mode = match rng.as_deref_mut() {
            Some(r) => Mode::Train(r),
            None => Mode::Infer,
        };
        let pass = forward_sequence(net, seq, mode)?;
        let mut d_pred = [0.0; OUTPUT_SIZE];
        for k in 0..OUTPUT_SIZE {
            let err = pass.prediction[k] - target[k];
            loss += err * err * scale;
            d_pred[k] = 2.0 * err * scale;
        }
        backward(net, &pass.cache, &d_pred, &mut grads);
    }
    Ok((loss, grads))
}

/// Splits scaled windows into per-window input sequences and one-step targets.
pub fn training_pairs(windows: &SupervisedWindows) -> Result<(Vec<Vec<f64>>, Vec<[f64; OUTPUT_SIZE]>)> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("training windows"));
    }
    if !windows.inputs.ncols().is_multiple_of(INPUT_SIZE) || windows.targets.ncols() < OUTPUT_SIZE {
        return Err(Error::Shape {
            expected: OUTPUT_SIZE,
            actual: windows.targets.ncols(),
        });
    }
    let sequences = windows
        .inputs
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let targets = windows
        .targets
        .row_iter()
        .map(|r| [r[0], r[1]])
        .collect();
    Ok((sequences, targets))
}

/// Full-batch BPTT with Adam on windows already scaled to `[0, 1]`.
pub fn train(mut net: LstmNetwork, windows: &SupervisedWindows, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (sequences, targets) = training_pairs(windows)?;
    let mut rng = SeededRng::new(config.seed);
    let mut adam = Adam::new(net.param_count());
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let (loss, grads) = loss_and_gradient(&net, &sequences, &targets, Some(&mut rng))?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        loss_curve.push(loss);
        adam.step(&mut net, &grads, config.learning_rate);
        if !net.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    Ok(TrainOutcome {
        network: net,
        loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::windows_from_pairs;

    fn constant_windows() -> SupervisedWindows {
        let pairs = vec![[0.5, 0.5]; 30];
        windows_from_pairs(&pairs, 3, 1).unwrap()
    }

    #[test]
    fn constant_target_is_learned() {
        let windows = constant_windows();
        for seed in 0..3 {
            let net = LstmNetwork::new(&[16], &[0.0], seed).unwrap();
            let config = TrainConfig {
                epochs: 200,
                learning_rate: 1e-2,
                seed,
                architecture: Architecture::Custom,
            };
            let out = train(net, &windows, &config).unwrap();
            assert_eq!(out.loss_curve.len(), 200);
            assert!(*out.loss_curve.last().unwrap() <= 1e-4, "{:?}", out.loss_curve.last());
        }
    }

    #[test]
    fn batched_pass_matches_per_window_passes() {
        let net = LstmNetwork::new(&[7, 5, 3], &[0.3, 0.0, 0.25], 2).unwrap();
        let mut rng = SeededRng::new(0);
        let sequences: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..8).map(|_| rng.uniform()).collect())
            .collect();
        let targets: Vec<[f64; 2]> = (0..9).map(|_| [rng.uniform(), rng.uniform()]).collect();
        for dropout in [false, true] {
            let (mut r1, mut r2) = (SeededRng::new(5), SeededRng::new(5));
            let (la, ga) = batch_loss_and_gradient(&net, &sequences, &targets, dropout.then_some(&mut r1));
            let (lb, gb) = per_window_loss_and_gradient(&net, &sequences, &targets, dropout.then_some(&mut r2)).unwrap();
            assert!((la - lb).abs() <= 1e-14, "{la} vs {lb}");
            for (a, b) in ga.flat_params().iter().zip(gb.flat_params()) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let net = LstmNetwork::new(&[6], &[0.1], 3).unwrap();
        let config = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train(net.clone(), &constant_windows(), &config).unwrap();
        assert_eq!(out.network, net);
    }

    #[test]
    fn reproducible_curve() {
        let pairs: Vec<[f64; 2]> = (0..25).map(|i| [((i * 7) % 5) as f64 / 4.0, (i % 2) as f64]).collect();
        let windows = windows_from_pairs(&pairs, 3, 1).unwrap();
        let config = TrainConfig {
            epochs: 20,
            learning_rate: 5e-3,
            seed: 4,
            architecture: Architecture::Custom,
        };
        let run = || train(LstmNetwork::new(&[8, 4], &[0.2, 0.2], 1).unwrap(), &windows, &config).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn divergence_names_epoch() {
        let mut windows = constant_windows();
        windows.targets[(0, 0)] = f64::NAN;
        let err = train(LstmNetwork::new(&[4], &[0.0], 0).unwrap(), &windows, &TrainConfig::default()).unwrap_err();
        assert_eq!(err, Error::Diverged { epoch: 1 });
    }

    #[test]
    fn rejects_bad_config() {
        let net = LstmNetwork::new(&[4], &[0.0], 0).unwrap();
        let bad = TrainConfig { learning_rate: 2.0, ..Default::default() };
        assert!(train(net.clone(), &constant_windows(), &bad).is_err());
        let bad = TrainConfig { epochs: 0, ..Default::default() };
        assert!(train(net, &constant_windows(), &bad).is_err());
    }
}
