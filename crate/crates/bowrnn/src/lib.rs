//! Bag-of-words sequence classification as a recurrent network.
//!
//! The pipeline: learn a visual vocabulary (kMeans or discriminatively),
//! encode variable-length feature sequences as normalized histograms of
//! visual words, optionally push the histograms through an explicit kernel
//! feature map, and classify with a softmax layer. The vocabulary, the
//! histogram accumulation, the feature map, and the classifier all live in
//! one network whose gradient is computed with storage independent of the
//! sequence length.
//!
//! Modules follow the pipeline stages:
//!
//! * [`codebook`] — kMeans vocabularies, posteriors, and the exact
//!   conversion between codebooks and quantization-layer parameters.
//! * [`bownet`] — the network itself: quantization, recurrent histogram
//!   encoding, feature-map layer, classifier, and the memory-efficient
//!   gradient.
//! * [`featmap`] — explicit feature maps for additive homogeneous kernels.
//! * [`kernels`] — exact kernel evaluation, Gram matrices, and the
//!   SVM-expansion decision rule.
//! * [`optim`] — RProp/SGD training with the scratch, init-linear, and
//!   retrain-top strategies.
//! * [`data`] — sequence I/O, normalization, subsampling, synthetic data,
//!   and evaluation metrics.

pub mod bownet;
pub mod codebook;
pub mod data;
pub mod error;
pub mod featmap;
pub mod kernels;
pub mod optim;
pub mod par;
pub(crate) mod textio;

pub use error::{Error, Result};
