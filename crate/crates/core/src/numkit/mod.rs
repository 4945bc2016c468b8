//! Dense numerical kernel: matrices, MLPs with manual gradients, Adam,
//! spectral normalization, mixup and stable loss primitives.

pub mod adam;
pub mod checkpoint;
pub mod finite_diff;
pub mod format;
pub mod loss;
pub mod matrix;
pub mod mixup;
pub mod mlp;
pub mod spectral;

pub use adam::{adam_step, AdamState};
pub use checkpoint::MlpCheckpoint;
pub use finite_diff::{finite_diff_grad, relative_error};
pub use format::format_significant;
pub use loss::{bce_loss, bce_with_logits, sigmoid, softplus, stable_log_sigmoid, PROB_CLAMP};
pub use matrix::Matrix;
pub use mixup::{mixup_pair, MixPlan, MixupSampler};
pub use mlp::{last_hidden_mask, mlp_backward, mlp_forward, Activation, ForwardCache, Mlp, MlpGrads, MlpParams};
pub use spectral::{spectral_normalize, PowerVectors, SpectralNormState};
