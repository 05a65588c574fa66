//! Non-neural computational core for label-conditioned 3D LGE MRI synthesis:
//! composite semantic label maps built from expert masks and intensity
//! clusters, cluster-count selection, synthetic-image quality metrics,
//! diffusion numerics, segmentation losses, seeded augmentation and paired
//! significance testing.
//!
//! Volumes are stored with x varying fastest (see [`volcore`]).

pub mod augment;
pub mod clusterlab;
pub mod composite;
pub mod diffmath;
pub mod losses;
pub mod statsreport;
pub mod synthmetrics;
pub mod volcore;

mod util;

pub use util::{write_atomic, CompensatedSum};
pub use volcore::{Grid, LabelMap3D, MaskPair, Volume3D};
