//! Signal ingestion helpers, training/test unit assembly, and the synthetic
//! ground-truth generator.

mod synthetic;
mod video;

pub use synthetic::{
    generate_synthetic, synthetic_dictionary, synthetic_sample, SyntheticInstance, SyntheticSample,
    SyntheticSpec,
};
pub use video::{
    build_test_unit, build_training_unit, equispaced_subvideos, TestMode, TrainMode, VideoSequence,
};
