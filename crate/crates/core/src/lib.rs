//! Discrete representations (cluster assignments and binary hash codes)
//! learned by maximizing the mutual information between inputs and outputs
//! of a small neural network, while self-augmented training keeps the outputs
//! stable under perturbations of the inputs.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`]: dense row-major `f64` matrices.
//! - [`nn`]: MLP with batch normalization, manual backprop, Adam, checkpoints.
//! - [`objectives`]: entropies, the self-augmentation loss, the clustering
//!   and hashing objectives with their gradients.
//! - [`augment`]: random, virtual adversarial and affine perturbations.
//! - [`trainer`]: training loops, including the penalty method for the class
//!   prior constraint.
//! - [`eval`]: clustering accuracy, retrieval metrics, hyper-parameter selection.
//! - [`data`]: IDX/CSV/native loaders and synthetic datasets.
//! - [`cli`]: the `imsat` command-line tool.
//!
//! ```no_run
//! use imsat::data::{gen_blobs, BlobParams};
//! use imsat::eval::clustering_accuracy;
//! use imsat::trainer::{encode, train_clustering, TrainConfig};
//!
//! let ds = gen_blobs(&BlobParams::default()).unwrap();
//! let mut cfg = TrainConfig::clustering(4);
//! cfg.hidden = vec![10, 10];
//! let (model, report) = train_clustering(&ds.features, &cfg).unwrap();
//! let codes = encode(&model, &ds.features).unwrap();
//! let acc = clustering_accuracy(&codes, ds.labels.as_ref().unwrap()).unwrap();
//! println!("ACC {:.3}, KL {:?}", acc.acc, report.final_kl);
//! ```

pub mod augment;
pub mod cli;
pub mod config;
pub mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
