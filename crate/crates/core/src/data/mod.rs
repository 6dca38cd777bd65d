//! Feature files, corpora on disk, the synthetic corpus generator and a
//! closed-form learnability oracle.

mod corpus;
mod features;
mod ridge;
mod synth;

pub use corpus::{
    read_corpus, read_manifest, write_corpus, Corpus, FileRef, Manifest, ManifestEntry, Utterance,
    MANIFEST_FILE, MANIFEST_FORMAT,
};
pub use features::{
    decode_features, encode_features, read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use ridge::{ridge_oracle, RidgeFit};
pub use synth::{
    gen_synthetic_corpus, latent_trajectory, max_latent_delta, SynthConfig, SynthMaps,
    ACOUSTIC_HIDDEN, SUPPORTED_EEG_DIMS, SUPPORTED_MFCC_DIMS, SUPPORTED_RATES,
};
