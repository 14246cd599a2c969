//! Problem builders and data ingestion.

mod data;
mod gdro;
mod hard;
mod pauc;

pub use data::{
    load_grouped_csv, parse_libsvm, read_grouped_csv, write_grouped_csv, write_libsvm, CsvOptions,
    LibsvmData,
};
pub use gdro::{
    build_gdro, build_synthetic_gdro, logistic_loss, sigmoid, softplus, Divergence, GdroOptions,
    GroupRisk, GroupedDataset, GroupedSamples,
};
pub use hard::{
    build_hard_nonsmooth, build_hard_smooth, hard_noise_support, sample_hard_noise, HardInstance,
    HardMode, NoisyCoordinate,
};
pub use pauc::{build_pauc, build_synthetic_pauc, PairwiseInner, PaucDataset, Surrogate};
