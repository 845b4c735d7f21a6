//! Recovery of step-by-step 2D polygonal mesh construction sequences from
//! silhouette images.
//!
//! The pipeline alternates discrete topological edits (searched with Monte
//! Carlo tree search) and continuous per-vertex translations (solved by
//! gradient descent through a soft silhouette rasterizer). A thin-plate
//! spline warp provides a cheap shape estimate for search rollouts.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod image_io;
pub mod mesh;
pub mod metrics;
pub mod planner;
pub mod raster;
pub mod reward;
pub mod sequence;
pub mod tps;

pub use error::{Error, Result};
pub use image_io::SilhouetteImage;
pub use mesh::{GeomAction, Mesh2D, TopoAction, TopoKind};
pub use metrics::MetricsReport;
pub use planner::{PlannerConfig, RolloutEstimator};
pub use reward::{RewardBreakdown, RewardWeights};
pub use sequence::ConstructionSequence;
