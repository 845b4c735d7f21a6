//! Scalar reward guiding the search:
//! r_all = w_sm * r_sm - w_sc * r_sc - w_si * r_si.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::SilhouetteImage;
use crate::mesh::Mesh2D;
use crate::metrics::{complexity, iou, self_intersections};
use crate::raster::render_binary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_sm: f64,
    pub w_sc: f64,
    pub w_si: f64,
}

impl RewardWeights {
    /// Weights used for synthetic shapes: w_sm=100, w_sc=1, w_si=5.
    pub fn synthetic() -> Self {
        RewardWeights { w_sm: 100.0, w_sc: 1.0, w_si: 5.0 }
    }

    /// Complex-shape profile: w_sc relaxed to 0.3.
    pub fn complex_shapes() -> Self {
        RewardWeights { w_sm: 100.0, w_sc: 0.3, w_si: 5.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w_sm", self.w_sm), ("w_sc", self.w_sc), ("w_si", self.w_si)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::synthetic()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_sm: f64,
    pub r_sc: f64,
    pub r_si: f64,
    pub r_all: f64,
}

/// Scores the mesh against the target: r_sm is the binarized-render IoU,
/// r_sc the element count, r_si the self-intersection count.
pub fn compute_reward(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    weights: &RewardWeights,
    res: (usize, usize),
) -> Result<RewardBreakdown> {
    let rendered = render_binary(mesh, res)?;
    let r_sm = iou(&rendered, target)?;
    let r_sc = complexity(mesh) as f64;
    let r_si = self_intersections(mesh) as f64;
    Ok(RewardBreakdown {
        r_sm,
        r_sc,
        r_si,
        r_all: weights.w_sm * r_sm - weights.w_sc * r_sc - weights.w_si * r_si,
    })
}
