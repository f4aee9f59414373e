//! The reconstruction autoencoder, the control-driven correction module and
//! the portable model bundle.

mod adaptive;
mod autoencoder;
mod bundle;

pub use adaptive::{
    corrected_predict, corrected_predict_parts, AdaptiveModule, OutputActivation, ADAPTIVE_HIDDEN,
};
pub use autoencoder::{
    ae_predict, AeTrace, AutoencoderModel, DECODER_HIDDEN, ENCODER_WIDTHS, LATENT_DIM,
};
pub use bundle::{
    load_bundle, save_bundle, BundleMeta, InferenceMode, ModelBundle, BUNDLE_FORMAT,
    DEFAULT_STREAM_BATCH,
};
