//! Denoising diffusion over gyro sequences: variance schedule, closed-form and Markov
//! forward noising, the step-conditioned noise predictor, the spectrally filtered loss,
//! training and the reverse denoising chain.

mod denoiser;
mod embed;
mod reverse;
mod schedule;
mod svd;
mod train;

pub use denoiser::{predict_noise, DenoiserArch, DenoiserCache, DenoiserNetwork};
pub use embed::embed_tstep;
pub use reverse::{denoise, denoise_batch, reverse_process};
pub use schedule::{forward_noise, forward_noise_markov, NoiseSchedule, ScheduleParams};
pub use svd::{svd_filter, svd_mse_loss, svd_mse_loss_grad};
pub use train::{train_denoiser, DiffusionTrainConfig, TrainedDenoiser};
