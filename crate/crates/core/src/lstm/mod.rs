//! LSTM network trained by full-batch backpropagation through time.
//!
//! The network reads a window of `L` (cycle, period) pairs scaled to `[0, 1]`,
//! runs one or more stacked LSTM layers from zero state, and maps the final
//! hidden state through a dense layer with ReLU to the next (cycle, period).

mod batch;
mod cell;
mod gradcheck;
mod network;
mod train;

pub use cell::{cell_step, Gate, LstmLayerParams, LstmState};
pub use gradcheck::{gradient_check, GradientCheck, FD_STEP};
pub use network::{
    forward_sequence, init_network, Architecture, ForwardPass, LstmNetwork, Mode, INPUT_SIZE, OUTPUT_SIZE,
};
pub use train::{loss_and_gradient, train, training_pairs, TrainConfig, TrainOutcome};
