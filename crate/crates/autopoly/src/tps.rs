//! Thin-plate-spline warping for fast shape prediction during rollouts.
//!
//! The warp parameters theta = (A, D) combine a 2x3 affine matrix with an
//! MxM control-point displacement field over the normalized [0,1]^2 image
//! square. Kernel weights are solved from D through the standard TPS
//! interpolation system, so with an identity affine the transform maps
//! every grid node i exactly to node_i + D_i. The fit minimizes the
//! bilinear warp loss ||sample(source, T(q)) - target||_2 by gradient
//! descent over theta, and meshes are re-embedded through the warped grid
//! with barycentric coordinates.

use nalgebra::DMatrix;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::image_io::SilhouetteImage;
use crate::mesh::{GeomAction, Mesh2D};
use crate::raster::render_soft;

/// theta = (A, D): affine matrix plus control-point displacement field
/// (row-major, node (i,j) at index j*m + i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpsParams {
    pub affine: [[f64; 3]; 2],
    pub m: usize,
    pub displacement: Vec<[f64; 2]>,
}

impl TpsParams {
    pub fn identity(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("grid size M must be >= 2, got {m}")));
        }
        Ok(TpsParams {
            affine: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            m,
            displacement: vec![[0.0, 0.0]; m * m],
        })
    }
}

/// Settings for `fit_tps` / `fast_estimate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpsConfig {
    pub m: usize,
    pub iterations: usize,
    /// Initial fit step size (normalized coordinates).
    pub eta: f64,
    /// Softness of the source render used by `fast_estimate`.
    pub sigma: f64,
}

impl Default for TpsConfig {
    fn default() -> Self {
        TpsConfig { m: 8, iterations: 100, eta: 0.5, sigma: 1.0 }
    }
}

/// MxM grid node positions with an implicit triangulation: each cell is
/// split along its (low-low, high-high) diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpGrid {
    pub m: usize,
    /// Row-major node positions (node (i,j) at index j*m + i).
    pub nodes: Vec<[f64; 2]>,
}

impl WarpGrid {
    /// Regular grid over the unit square.
    pub fn regular(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("grid size M must be >= 2, got {m}")));
        }
        let step = 1.0 / (m - 1) as f64;
        let mut nodes = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                nodes.push([i as f64 * step, j as f64 * step]);
            }
        }
        Ok(WarpGrid { m, nodes })
    }

    /// Regular grid scaled to a pixel rectangle of the given resolution.
    pub fn regular_scaled(m: usize, width: f64, height: f64) -> Result<Self> {
        let mut g = Self::regular(m)?;
        for n in &mut g.nodes {
            n[0] *= width;
            n[1] *= height;
        }
        Ok(g)
    }
}

#[inline]
fn kernel_from_d2(d2: f64) -> f64 {
    // phi(r) = r^2 log r = 0.5 r^2 log r^2, with phi(0) = 0.
    if d2 > 0.0 {
        0.5 * d2 * d2.ln()
    } else {
        0.0
    }
}

fn control_points(m: usize) -> Vec<[f64; 2]> {
    WarpGrid::regular(m).expect("m >= 2").nodes
}

/// Columns 0..n of L^-1 for the TPS system of the regular MxM grid,
/// cached per M. Multiplying by D yields the kernel weights and the
/// internal affine correction: [w; a] = L_inv_n * D.
fn system_solve_matrix(m: usize) -> Result<Arc<DMatrix<f64>>> {
    static CACHE: Lazy<Mutex<HashMap<usize, Arc<DMatrix<f64>>>>> = Lazy::new(|| Mutex::new(HashMap::new()));
    if let Some(hit) = CACHE.lock().unwrap().get(&m) {
        return Ok(hit.clone());
    }
    let cps = control_points(m);
    let n = cps.len();
    let mut l = DMatrix::zeros(n + 3, n + 3);
    for i in 0..n {
        for j in 0..n {
            let dx = cps[i][0] - cps[j][0];
            let dy = cps[i][1] - cps[j][1];
            l[(i, j)] = kernel_from_d2(dx * dx + dy * dy);
        }
        l[(i, n)] = 1.0;
        l[(i, n + 1)] = cps[i][0];
        l[(i, n + 2)] = cps[i][1];
        l[(n, i)] = 1.0;
        l[(n + 1, i)] = cps[i][0];
        l[(n + 2, i)] = cps[i][1];
    }
    let lu = l.lu();
    let mut rhs = DMatrix::zeros(n + 3, n);
    for i in 0..n {
        rhs[(i, i)] = 1.0;
    }
    let solved = lu
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument(format!("singular TPS system for M={m}")))?;
    let arc = Arc::new(solved);
    CACHE.lock().unwrap().insert(m, arc.clone());
    Ok(arc)
}

/// A solved TPS transform ready for point evaluation.
pub struct TpsTransform {
    affine: [[f64; 3]; 2],
    cps: Vec<[f64; 2]>,
    /// Kernel weights and internal affine correction per output coordinate:
    /// rows 0..n are w, rows n..n+3 are a.
    coeffs: DMatrix<f64>, // (n+3) x 2
}

impl TpsTransform {
    pub fn new(theta: &TpsParams) -> Result<Self> {
        let m = theta.m;
        if theta.displacement.len() != m * m {
            return Err(Error::InvalidArgument("displacement field does not match M".into()));
        }
        let solve = system_solve_matrix(m)?;
        let n = m * m;
        let mut d = DMatrix::zeros(n, 2);
        for (i, &[dx, dy]) in theta.displacement.iter().enumerate() {
            d[(i, 0)] = dx;
            d[(i, 1)] = dy;
        }
        let coeffs = &*solve * d;
        Ok(TpsTransform { affine: theta.affine, cps: control_points(m), coeffs })
    }

    /// T_theta(p) = A [p;1] + sum_i w_i phi(|p - c_i|) + a [p;1].
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let n = self.cps.len();
        let a = &self.affine;
        let mut out = [
            a[0][0] * p[0] + a[0][1] * p[1] + a[0][2],
            a[1][0] * p[0] + a[1][1] * p[1] + a[1][2],
        ];
        for (i, c) in self.cps.iter().enumerate() {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let k = kernel_from_d2(dx * dx + dy * dy);
            out[0] += k * self.coeffs[(i, 0)];
            out[1] += k * self.coeffs[(i, 1)];
        }
        out[0] += self.coeffs[(n, 0)] + self.coeffs[(n + 1, 0)] * p[0] + self.coeffs[(n + 2, 0)] * p[1];
        out[1] += self.coeffs[(n, 1)] + self.coeffs[(n + 1, 1)] * p[0] + self.coeffs[(n + 2, 1)] * p[1];
        out
    }
}

/// Evaluates T_theta at one point.
pub fn tps_transform(theta: &TpsParams, p: [f64; 2]) -> Result<[f64; 2]> {
    Ok(TpsTransform::new(theta)?.apply(p))
}

/// Basis matrix mapping D directly to the deformation at every pixel
/// center of a (w,h) image: f(q_p) = basis[p] . D (per coordinate, plus the
/// internal affine correction already folded in). Cached per (w,h,m).
fn pixel_basis(w: usize, h: usize, m: usize) -> Result<Arc<Vec<f64>>> {
    static CACHE: Lazy<Mutex<HashMap<(usize, usize, usize), Arc<Vec<f64>>>>> =
        Lazy::new(|| Mutex::new(HashMap::new()));
    if let Some(hit) = CACHE.lock().unwrap().get(&(w, h, m)) {
        return Ok(hit.clone());
    }
    let solve = system_solve_matrix(m)?;
    let cps = control_points(m);
    let n = cps.len();
    let mut basis = vec![0.0f64; w * h * n];
    let mut row = vec![0.0f64; n + 3];
    for py in 0..h {
        let qy = (py as f64 + 0.5) / h as f64;
        for px in 0..w {
            let qx = (px as f64 + 0.5) / w as f64;
            for (i, c) in cps.iter().enumerate() {
                let dx = qx - c[0];
                let dy = qy - c[1];
                row[i] = kernel_from_d2(dx * dx + dy * dy);
            }
            row[n] = 1.0;
            row[n + 1] = qx;
            row[n + 2] = qy;
            let out = &mut basis[(py * w + px) * n..(py * w + px + 1) * n];
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n + 3 {
                    acc += row[k] * solve[(k, j)];
                }
                out[j] = acc;
            }
        }
    }
    let arc = Arc::new(basis);
    CACHE.lock().unwrap().insert((w, h, m), arc.clone());
    Ok(arc)
}

/// Bilinear sample with zero padding; returns (value, d/dx, d/dy) in pixel
/// units.
#[inline]
fn bilinear(img: &SilhouetteImage, x: f64, y: f64) -> (f64, f64, f64) {
    let fx = x.floor();
    let fy = y.floor();
    let tx = x - fx;
    let ty = y - fy;
    let (w, h) = (img.width as isize, img.height as isize);
    let ix = fx as isize;
    let iy = fy as isize;
    let at = |xx: isize, yy: isize| -> f64 {
        if xx < 0 || yy < 0 || xx >= w || yy >= h {
            0.0
        } else {
            img.data[yy as usize * img.width + xx as usize]
        }
    };
    let v00 = at(ix, iy);
    let v10 = at(ix + 1, iy);
    let v01 = at(ix, iy + 1);
    let v11 = at(ix + 1, iy + 1);
    let v0 = v00 + tx * (v10 - v00);
    let v1 = v01 + tx * (v11 - v01);
    let value = v0 + ty * (v1 - v0);
    let dx = (v10 - v00) + ty * ((v11 - v01) - (v10 - v00));
    let dy = (v01 - v00) + tx * ((v11 - v10) - (v01 - v00));
    (value, dx, dy)
}

/// Forward-sampling warp: output(q) = bilinear(source, T_theta(q)).
pub fn warp_image(theta: &TpsParams, source: &SilhouetteImage) -> Result<SilhouetteImage> {
    let (w, h) = (source.width, source.height);
    let transform = TpsTransform::new(theta)?;
    let mut out = SilhouetteImage::new(w, h)?;
    for py in 0..h {
        for px in 0..w {
            let q = [(px as f64 + 0.5) / w as f64, (py as f64 + 0.5) / h as f64];
            let t = transform.apply(q);
            let sx = t[0] * w as f64 - 0.5;
            let sy = t[1] * h as f64 - 0.5;
            let (v, _, _) = bilinear(source, sx, sy);
            out.data[py * w + px] = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Mean squared bilinear warp error of theta (the objective of `fit_tps`).
pub fn warp_loss(theta: &TpsParams, source: &SilhouetteImage, target: &SilhouetteImage) -> Result<f64> {
    source.same_resolution(target)?;
    let warped = warp_image(theta, source)?;
    crate::raster::loss_mse(&warped, target)
}

struct FitState {
    affine: [[f64; 3]; 2],
    dx: Vec<f64>,
    dy: Vec<f64>,
}

/// Fits theta by deterministic backtracking gradient descent on the warp
/// loss, starting from identity. Returns the best-seen parameters.
pub fn fit_tps(
    source: &SilhouetteImage,
    target: &SilhouetteImage,
    cfg: &TpsConfig,
) -> Result<TpsParams> {
    source.same_resolution(target)?;
    if cfg.m < 2 {
        return Err(Error::InvalidArgument(format!("grid size M must be >= 2, got {}", cfg.m)));
    }
    let (w, h) = (source.width, source.height);
    let m = cfg.m;
    let n = m * m;
    let basis = pixel_basis(w, h, m)?;
    let n_px = (w * h) as f64;

    // Forward pass: loss and, optionally, the gradient.
    let eval = |s: &FitState, grad: Option<(&mut [[f64; 3]; 2], &mut [f64], &mut [f64])>| -> f64 {
        let mut acc = 0.0;
        let mut grad = grad;
        for py in 0..h {
            let qy = (py as f64 + 0.5) / h as f64;
            for px in 0..w {
                let qx = (px as f64 + 0.5) / w as f64;
                let b = &basis[(py * w + px) * n..(py * w + px + 1) * n];
                let mut tx = s.affine[0][0] * qx + s.affine[0][1] * qy + s.affine[0][2];
                let mut ty = s.affine[1][0] * qx + s.affine[1][1] * qy + s.affine[1][2];
                for i in 0..n {
                    tx += b[i] * s.dx[i];
                    ty += b[i] * s.dy[i];
                }
                let sx = tx * w as f64 - 0.5;
                let sy = ty * h as f64 - 0.5;
                let (v, dvx, dvy) = bilinear(source, sx, sy);
                let r = v - target.data[py * w + px];
                acc += r * r;
                if let Some((ga, gdx, gdy)) = grad.as_mut() {
                    let gx = 2.0 / n_px * r * dvx * w as f64;
                    let gy = 2.0 / n_px * r * dvy * h as f64;
                    if gx != 0.0 || gy != 0.0 {
                        ga[0][0] += gx * qx;
                        ga[0][1] += gx * qy;
                        ga[0][2] += gx;
                        ga[1][0] += gy * qx;
                        ga[1][1] += gy * qy;
                        ga[1][2] += gy;
                        for i in 0..n {
                            gdx[i] += gx * b[i];
                            gdy[i] += gy * b[i];
                        }
                    }
                }
            }
        }
        acc / n_px
    };

    let mut state = FitState {
        affine: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        dx: vec![0.0; n],
        dy: vec![0.0; n],
    };
    let mut eta = cfg.eta;
    let mut loss = eval(&state, None);
    'outer: for _ in 0..cfg.iterations {
        let mut ga = [[0.0; 3]; 2];
        let mut gdx = vec![0.0; n];
        let mut gdy = vec![0.0; n];
        eval(&state, Some((&mut ga, &mut gdx, &mut gdy)));
        let mut halvings = 0;
        loop {
            let mut cand = FitState {
                affine: state.affine,
                dx: state.dx.clone(),
                dy: state.dy.clone(),
            };
            for r in 0..2 {
                for c in 0..3 {
                    cand.affine[r][c] -= eta * ga[r][c];
                }
            }
            for i in 0..n {
                cand.dx[i] -= eta * gdx[i];
                cand.dy[i] -= eta * gdy[i];
            }
            let new_loss = eval(&cand, None);
            if new_loss < loss {
                state = cand;
                loss = new_loss;
                eta = (eta * 2.0).min(cfg.eta);
                break;
            }
            halvings += 1;
            eta *= 0.5;
            if halvings >= 20 || eta < 1e-8 {
                break 'outer;
            }
        }
    }

    let displacement = state.dx.iter().zip(&state.dy).map(|(&x, &y)| [x, y]).collect();
    Ok(TpsParams { affine: state.affine, m, displacement })
}

/// Re-embeds mesh vertices through the warped grid using barycentric
/// coordinates. `grid` must be a regular lattice (as produced by
/// `WarpGrid::regular*`); vertices outside its hull are clamped first.
pub fn warp_mesh(mesh: &Mesh2D, grid: &WarpGrid, warped_grid: &WarpGrid) -> Result<Mesh2D> {
    if grid.m != warped_grid.m || grid.m < 2 {
        return Err(Error::InvalidArgument("grids must share the same M >= 2".into()));
    }
    let m = grid.m;
    let x0 = grid.nodes[0][0];
    let y0 = grid.nodes[0][1];
    let x1 = grid.nodes[m * m - 1][0];
    let y1 = grid.nodes[m * m - 1][1];
    let cell_w = (x1 - x0) / (m - 1) as f64;
    let cell_h = (y1 - y0) / (m - 1) as f64;
    if cell_w <= 0.0 || cell_h <= 0.0 {
        return Err(Error::InvalidArgument("degenerate source grid".into()));
    }
    let mut out_vertices = Vec::with_capacity(mesh.vertices().len());
    for &[vx, vy] in mesh.vertices() {
        let cx = vx.clamp(x0, x1);
        let cy = vy.clamp(y0, y1);
        let gx = ((cx - x0) / cell_w).floor().min((m - 2) as f64).max(0.0) as usize;
        let gy = ((cy - y0) / cell_h).floor().min((m - 2) as f64).max(0.0) as usize;
        let fx = (cx - x0) / cell_w - gx as f64;
        let fy = (cy - y0) / cell_h - gy as f64;
        // Cell corners: ll, lr, ul, ur; diagonal runs ll -> ur. Points on
        // the diagonal resolve to the lower triangle.
        let ll = gy * m + gx;
        let lr = ll + 1;
        let ul = ll + m;
        let ur = ul + 1;
        let (tri, (alpha, beta, gamma)) = if fy <= fx {
            // Lower triangle (ll, lr, ur): p = ll + fx*(lr-ll) + fy*(ur-lr).
            ((ll, lr, ur), (1.0 - fx, fx - fy, fy))
        } else {
            // Upper triangle (ll, ur, ul).
            ((ll, ur, ul), (1.0 - fy, fx, fy - fx))
        };
        let (a, b, c) = (warped_grid.nodes[tri.0], warped_grid.nodes[tri.1], warped_grid.nodes[tri.2]);
        out_vertices.push([
            alpha * a[0] + beta * b[0] + gamma * c[0],
            alpha * a[1] + beta * b[1] + gamma * c[1],
        ]);
    }
    mesh.with_vertices(out_vertices)
}

/// Fast shape estimate: fit a TPS warp from the mesh's soft render to the
/// target, warp the embedding grid, and re-embed the mesh through it.
pub fn fast_estimate(
    mesh: &Mesh2D,
    target: &SilhouetteImage,
    cfg: &TpsConfig,
) -> Result<GeomAction> {
    let (w, h) = (target.width, target.height);
    let source = render_soft(mesh, (w, h), cfg.sigma)?;
    let theta = fit_tps(&source, target, cfg)?;
    let transform = TpsTransform::new(&theta)?;
    let grid_px = WarpGrid::regular_scaled(cfg.m, w as f64, h as f64)?;
    let grid_norm = WarpGrid::regular(cfg.m)?;
    // The fitted transform maps output coordinates to source sample
    // coordinates (backward warp); the motion of the silhouette content is
    // its inverse. First-order inverse: negate the displacement field
    // (exact for pure translations, close for the small warps seen here).
    let warped_nodes: Vec<[f64; 2]> = grid_norm
        .nodes
        .iter()
        .map(|&p| {
            let t = transform.apply(p);
            [(2.0 * p[0] - t[0]) * w as f64, (2.0 * p[1] - t[1]) * h as f64]
        })
        .collect();
    let warped_px = WarpGrid { m: cfg.m, nodes: warped_nodes };
    let warped_mesh = warp_mesh(mesh, &grid_px, &warped_px)?;
    let deltas = warped_mesh
        .vertices()
        .iter()
        .zip(mesh.vertices())
        .map(|(p, q)| [p[0] - q[0], p[1] - q[1]])
        .collect();
    Ok(GeomAction { deltas })
}
