//! Small dense networks with hand-derived backpropagation, Adam and Polyak
//! averaging. Everything is `f64`.

mod adam;
mod binio;
mod gemm;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use binio::{BinReader, BinWriter};
pub use gradcheck::{check_mlp_gradients, random_spec_suite, rel_error, GradCheckReport, REL_ERROR_FLOOR};
pub use mlp::{mlp_backward, mlp_forward, polyak_update, Activation, ForwardCache, Mlp, MlpSpec};
