//! Gradient-descent inverse shape estimation: with topology fixed, find the
//! per-vertex translations that best match the target silhouette.
//!
//! The update is x <- x - eta * dPsi/dx with backtracking: a step that
//! increases the loss halves eta and retries (up to 20 halvings per
//! iteration, then the loop stops early). Deterministic throughout.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image_io::SilhouetteImage;
use crate::mesh::{GeomAction, Mesh2D};
use crate::raster::{loss_gradient, loss_mse, render_soft};

pub const MIN_ETA: f64 = 1e-3;
const MAX_HALVINGS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub iterations: usize,
    /// Initial step size, in pixel units.
    pub eta: f64,
    /// Raster softness, in pixels.
    pub sigma: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { iterations: 200, eta: 50.0, sigma: 1.0 }
    }
}

impl OptimConfig {
    /// Cheap variant used by search rollouts.
    pub fn fast() -> Self {
        OptimConfig { iterations: 30, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    /// Loss after each accepted iteration, starting with the initial loss.
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub iterations: usize,
}

/// The objective Psi minimized by `estimate`.
pub fn objective(mesh: &Mesh2D, target: &SilhouetteImage, cfg: &OptimConfig) -> Result<f64> {
    let img = render_soft(mesh, (target.width, target.height), cfg.sigma)?;
    loss_mse(&img, target)
}

/// Runs the gradient solver and returns the vertex translation field
/// (final minus initial positions) together with the loss trace.
pub fn estimate(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &OptimConfig,
) -> Result<(GeomAction, OptimTrace)> {
    let initial = mesh.vertices().to_vec();
    let mut current = mesh.clone();
    let mut eta = cfg.eta;
    let (mut loss, mut grad) = loss_gradient(&current, target, cfg.sigma)?;
    let mut losses = vec![loss];
    let mut executed = 0;

    'outer: for _ in 0..cfg.iterations {
        let mut halvings = 0;
        loop {
            let stepped: Vec<[f64; 2]> = current
                .vertices()
                .iter()
                .zip(&grad)
                .map(|(p, g)| [p[0] - eta * g[0], p[1] - eta * g[1]])
                .collect();
            let candidate = current.with_vertices(stepped)?;
            let new_loss = objective(&candidate, target, cfg)?;
            if new_loss < loss {
                current = candidate;
                loss = new_loss;
                losses.push(loss);
                executed += 1;
                // Allow eta to recover after a run of halvings.
                eta = (eta * 2.0).min(cfg.eta);
                break;
            }
            halvings += 1;
            eta *= 0.5;
            if halvings >= MAX_HALVINGS || eta < MIN_ETA {
                break 'outer;
            }
        }
        let g = loss_gradient(&current, target, cfg.sigma)?;
        loss = g.0;
        grad = g.1;
    }

    let deltas = current
        .vertices()
        .iter()
        .zip(&initial)
        .map(|(p, q)| [p[0] - q[0], p[1] - q[1]])
        .collect();
    Ok((
        GeomAction { deltas },
        OptimTrace { final_loss: loss, iterations: executed, losses },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::iou;
    use crate::raster::render_binary;

    #[test]
    fn already_at_optimum() {
        let m = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_soft(&m, (64, 64), 1.0).unwrap();
        let (g, trace) = estimate(&m, &target, &OptimConfig::default()).unwrap();
        let max_norm = g
            .deltas
            .iter()
            .map(|d| d[0].abs().max(d[1].abs()))
            .fold(0.0f64, f64::max);
        assert!(max_norm < 0.05, "max delta {max_norm}");
        assert!(trace.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_translation() {
        let m = Mesh2D::new_rect([28.0, 32.0], 20.0, 12.0).unwrap();
        let shifted = Mesh2D::new_rect([34.0, 32.0], 20.0, 12.0).unwrap();
        let target = render_binary(&shifted, (64, 64)).unwrap();
        let (g, _) = estimate(&m, &target, &OptimConfig::default()).unwrap();
        let mean_dx: f64 = g.deltas.iter().map(|d| d[0]).sum::<f64>() / 4.0;
        let mean_dy: f64 = g.deltas.iter().map(|d| d[1]).sum::<f64>() / 4.0;
        assert!((mean_dx - 6.0).abs() <= 0.5, "mean dx {mean_dx}");
        assert!(mean_dy.abs() <= 0.5, "mean dy {mean_dy}");
    }

    #[test]
    fn recovers_scaling() {
        let m = Mesh2D::new_rect([32.0, 32.0], 20.0, 12.0).unwrap();
        let scaled = Mesh2D::new_rect([32.0, 32.0], 30.0, 18.0).unwrap();
        let target = render_binary(&scaled, (64, 64)).unwrap();
        let (g, _) = estimate(&m, &target, &OptimConfig::default()).unwrap();
        let fitted = m.apply_geom(&g).unwrap();
        // Each corner moves outward from the center.
        for (p, q) in m.vertices().iter().zip(fitted.vertices()) {
            let before = (p[0] - 32.0).hypot(p[1] - 32.0);
            let after = (q[0] - 32.0).hypot(q[1] - 32.0);
            assert!(after > before);
        }
        let got = iou(&render_binary(&fitted, (64, 64)).unwrap(), &target).unwrap();
        assert!(got >= 0.95, "iou {got}");
    }

    #[test]
    fn topology_untouched_and_deterministic() {
        let m = Mesh2D::new_rect([30.0, 30.0], 18.0, 14.0).unwrap();
        let target = render_binary(&Mesh2D::new_rect([33.0, 31.0], 22.0, 12.0).unwrap(), (64, 64)).unwrap();
        let (g1, t1) = estimate(&m, &target, &OptimConfig::default()).unwrap();
        let (g2, t2) = estimate(&m, &target, &OptimConfig::default()).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1, t2);
        let out = m.apply_geom(&g1).unwrap();
        assert_eq!(out.euler_counts(), m.euler_counts());
    }
}
