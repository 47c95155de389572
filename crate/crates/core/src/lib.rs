//! Core library for auditing and rebalancing face-attribute datasets.
//!
//! The pipeline this crate supports: harmonize heterogeneous attribute labels
//! from several face datasets into one record schema, rebalance the training
//! split with one of four augmentation engines (undersampling, geometric
//! transforms, a variational autoencoder, a multi-domain image-translation
//! GAN), train per-attribute classifiers, and quantify residual bias through
//! per-class metrics, cross-class dispersion, and cross-dataset similarity.

pub mod augment;
pub mod classifier;
pub mod image;
pub mod ingest;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod stargan;
pub mod synthetic;
pub mod util;
pub mod vae;

pub use crate::image::{CropBox, ImageTensor, CANONICAL_SIZE};
pub use crate::ingest::{
    AgeClass, Attribute, DataSource, Ethnicity, FaceRecord, Gender, RawUtkRecord,
};
