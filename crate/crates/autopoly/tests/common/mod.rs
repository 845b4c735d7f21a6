//! Shared helpers for integration tests: seeded random mesh construction.

use autopoly::{GeomAction, Mesh2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXTRUDE_LEN: f64 = 8.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid mesh: start from a rectangle, apply `steps` random valid
/// topological actions and bounded vertex jitter, keeping the mesh valid
/// (CCW, no orphans). Deterministic per seed.
pub fn random_mesh(seed: u64, steps: usize, jitter: f64) -> Mesh2D {
    let mut rng = rng(seed);
    let mut mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 10.0).unwrap();
    for _ in 0..steps {
        let actions = mesh.enumerate_valid_actions(EXTRUDE_LEN);
        if actions.is_empty() {
            break;
        }
        let action = actions[rng.gen_range(0..actions.len())];
        let Ok(next) = mesh.apply_topo(&action) else { continue };
        let deltas: Vec<[f64; 2]> = (0..next.vertices().len())
            .map(|_| [rng.gen_range(-jitter..=jitter), rng.gen_range(-jitter..=jitter)])
            .collect();
        let Ok(jittered) = next.apply_geom(&GeomAction { deltas }) else { continue };
        if jittered.validate().is_ok() {
            mesh = jittered;
        } else if next.validate().is_ok() {
            mesh = next;
        }
    }
    mesh
}

/// Random mesh capped at `max_vertices` vertices.
pub fn random_small_mesh(seed: u64, max_vertices: usize, jitter: f64) -> Mesh2D {
    let mut mesh = Mesh2D::new_rect([32.0, 32.0], 20.0, 10.0).unwrap();
    let mut rng = rng(seed);
    for _ in 0..6 {
        let actions = mesh.enumerate_valid_actions(EXTRUDE_LEN);
        if actions.is_empty() {
            break;
        }
        let action = actions[rng.gen_range(0..actions.len())];
        let Ok(next) = mesh.apply_topo(&action) else { continue };
        if next.vertices().len() > max_vertices {
            break;
        }
        let deltas: Vec<[f64; 2]> = (0..next.vertices().len())
            .map(|_| [rng.gen_range(-jitter..=jitter), rng.gen_range(-jitter..=jitter)])
            .collect();
        match next.apply_geom(&GeomAction { deltas }) {
            Ok(j) if j.validate().is_ok() => mesh = j,
            _ if next.validate().is_ok() => mesh = next,
            _ => {}
        }
    }
    mesh
}
