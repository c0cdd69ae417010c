//! Heading regression: cyclic loss, learning-rate decay, the bidirectional LSTM
//! regressor (baseline and enhanced variants) and its training loop.

mod loss;
mod lr;
mod network;
mod scaler;
mod train;

pub use loss::{crmse, crmse_deg, cyclic_mse, cyclic_mse_grad};
pub use lr::lr_at_epoch;
pub use network::{HeadingArch, HeadingCache, HeadingNetwork, Variant};
pub use scaler::InputScaler;
pub use train::{
    predict_heading, predict_heading_flat, train_heading, HeadingModel, HeadingPrediction, HeadingTrainConfig,
    SequencePreprocessor, TrainedHeading,
};
