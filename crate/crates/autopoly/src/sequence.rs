//! The construction sequence artifact: ordered (topological, geometric)
//! action pairs with per-step reward breakdowns. Replaying the steps from
//! the initial mesh must reproduce the final mesh exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{GeomAction, Mesh2D, TopoAction};
use crate::reward::RewardBreakdown;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceStep {
    /// `None` encodes a no-op topological action (pure-geometry baselines).
    pub topo: Option<TopoAction>,
    pub geom: GeomAction,
    pub reward: RewardBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSequence {
    pub initial: Mesh2D,
    pub steps: Vec<SequenceStep>,
    #[serde(rename = "final")]
    pub final_mesh: Mesh2D,
    pub config_echo: serde_json::Value,
    pub seed: u64,
}

impl ConstructionSequence {
    /// Applies every step to the initial mesh and returns the result.
    pub fn replay(&self) -> Result<Mesh2D> {
        let mut mesh = self.initial.clone();
        for step in &self.steps {
            if let Some(topo) = &step.topo {
                mesh = mesh.apply_topo(topo)?;
            }
            mesh = mesh.apply_geom(&step.geom)?;
        }
        Ok(mesh)
    }

    /// Checks the replay invariant with zero tolerance.
    pub fn verify_replay(&self) -> Result<()> {
        let replayed = self.replay()?;
        if replayed != self.final_mesh {
            return Err(Error::InvalidMesh("replayed mesh does not match recorded final mesh".into()));
        }
        Ok(())
    }

    /// Sum of the recorded per-step r_all values.
    pub fn accumulated_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.r_all).sum()
    }
}
