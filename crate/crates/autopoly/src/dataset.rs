//! Random shape-construction simulator: synthetic (target silhouette,
//! ground-truth sequence) pairs built by applying random topological
//! actions and random per-vertex translations to an initial rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image_io::SilhouetteImage;
use crate::mesh::{GeomAction, Mesh2D, TopoAction};
use crate::metrics::self_intersections;
use crate::raster::render_binary;
use crate::reward::{compute_reward, RewardWeights};
use crate::sequence::{ConstructionSequence, SequenceStep};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Random topological steps per shape.
    pub steps: usize,
    /// Max per-vertex translation magnitude, in pixels.
    pub jitter: f64,
    pub seed: u64,
    /// Number of shapes in the dataset.
    pub count: usize,
    pub resolution: (usize, usize),
    pub extrude_len: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { steps: 6, jitter: 4.0, seed: 0, count: 50, resolution: (64, 64), extrude_len: 8.0 }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("shape count must be positive".into()));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidArgument("jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Standard initial shape: a rectangle centered in the image spanning
/// roughly a third of its width.
pub fn initial_rect(resolution: (usize, usize)) -> Mesh2D {
    let (w, h) = (resolution.0 as f64, resolution.1 as f64);
    Mesh2D::new_rect([w / 2.0, h / 2.0], w * 0.3125, h * 0.15625).expect("positive dimensions")
}

fn derive_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

const MAX_STEP_TRIES: usize = 50;

/// Generates one ground-truth construction and its binary target.
/// Deterministic per (cfg.seed, index). Steps producing a self-intersecting
/// or otherwise invalid shape are rejected and resampled; after 50
/// consecutive rejections the
/// sequence is truncated at the last clean step.
pub fn random_sequence(cfg: &GenConfig, index: usize) -> Result<(ConstructionSequence, SilhouetteImage)> {
    cfg.validate()?;
    let mut rng = derive_rng(cfg.seed, index as u64);
    let initial = initial_rect(cfg.resolution);
    let mut mesh = initial.clone();
    let mut actions: Vec<(TopoAction, GeomAction)> = Vec::new();

    'steps: for _ in 0..cfg.steps {
        for _try in 0..MAX_STEP_TRIES {
            let valid = mesh.enumerate_valid_actions(cfg.extrude_len);
            if valid.is_empty() {
                break 'steps;
            }
            let topo = valid[rng.gen_range(0..valid.len())];
            let after_topo = match mesh.apply_topo(&topo) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let deltas: Vec<[f64; 2]> = (0..after_topo.vertices().len())
                .map(|_| {
                    [
                        rng.gen_range(-cfg.jitter..=cfg.jitter),
                        rng.gen_range(-cfg.jitter..=cfg.jitter),
                    ]
                })
                .collect();
            let geom = GeomAction { deltas };
            let next = after_topo.apply_geom(&geom)?;
            if next.validate().is_err() || self_intersections(&next) > 0 {
                continue;
            }
            actions.push((topo, geom));
            mesh = next;
            continue 'steps;
        }
        break; // 50 consecutive rejections: truncate here
    }

    let target = render_binary(&mesh, cfg.resolution)?;
    // Per-step rewards are scored retroactively against the final target.
    let weights = RewardWeights::synthetic();
    let mut steps = Vec::with_capacity(actions.len());
    let mut replay = initial.clone();
    for (topo, geom) in actions {
        replay = replay.apply_topo(&topo)?.apply_geom(&geom)?;
        let reward = compute_reward(&replay, &target, &weights, cfg.resolution)?;
        steps.push(SequenceStep { topo: Some(topo), geom, reward });
    }
    debug_assert_eq!(replay, mesh);

    let seq = ConstructionSequence {
        initial,
        steps,
        final_mesh: mesh,
        config_echo: serde_json::to_value(cfg)?,
        seed: cfg.seed,
    };
    Ok((seq, target))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub png: String,
    pub truth: String,
    pub counts: (usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub count: usize,
    pub seed: u64,
    pub resolution: (usize, usize),
    pub shapes: Vec<ManifestEntry>,
}

/// Writes `count` target PNGs, ground-truth sequence JSONs, and a manifest.
pub fn gen_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut shapes = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let (seq, target) = random_sequence(cfg, i)?;
        let png = format!("shape_{i:03}.png");
        let truth = format!("shape_{i:03}.truth.json");
        target.save_png(&out_dir.join(&png))?;
        let json = serde_json::to_string_pretty(&seq)?;
        std::fs::write(out_dir.join(&truth), json)?;
        shapes.push(ManifestEntry { png, truth, counts: seq.final_mesh.euler_counts() });
    }
    let manifest = Manifest { count: cfg.count, seed: cfg.seed, resolution: cfg.resolution, shapes };
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
