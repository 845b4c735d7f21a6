//! Independent oracles for the metric and raster layers, written from
//! different formulations than the library code:
//! - self-intersection counting vs a parametric line-line solver,
//! - render_binary vs an angle-summation winding test,
//! - IoU vs hand pixel counts on constructed images.

mod common;

use autopoly::image_io::SilhouetteImage;
use autopoly::metrics::{iou, self_intersections};
use autopoly::raster::render_binary;
use autopoly::Mesh2D;

/// Parametric segment intersection: solves p + t r = q + u s and counts a
/// strict interior crossing only for t, u in the open interval (0,1).
/// Collinear overlapping pairs count when the overlap has positive length.
fn segments_cross_oracle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2], eps: f64) -> bool {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    let qp = [c[0] - a[0], c[1] - a[1]];
    if denom.abs() > eps {
        let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
        let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
        return t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps;
    }
    // Parallel. Collinear only if c lies on the line through a,b.
    if (qp[0] * r[1] - qp[1] * r[0]).abs() > eps {
        return false;
    }
    let len2 = r[0] * r[0] + r[1] * r[1];
    if len2 < eps {
        return false;
    }
    let tc = (qp[0] * r[0] + qp[1] * r[1]) / len2;
    let td = ((d[0] - a[0]) * r[0] + (d[1] - a[1]) * r[1]) / len2;
    let (lo, hi) = (tc.min(td), tc.max(td));
    let (lo, hi) = (lo.max(0.0), hi.min(1.0));
    hi - lo > eps
}

fn self_intersections_oracle(mesh: &Mesh2D) -> usize {
    let verts = mesh.vertices();
    // The metric is over unique mesh edges (an interior edge shared by two
    // faces is one edge).
    let segs: Vec<(usize, usize)> = mesh.edges().to_vec();
    // Match the library's scale-relative tolerance.
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in verts {
        min_x = min_x.min(v[0]);
        max_x = max_x.max(v[0]);
        min_y = min_y.min(v[1]);
        max_y = max_y.max(v[1]);
    }
    let extent = (max_x - min_x).max(max_y - min_y).max(1.0);
    let eps = 1e-9 * extent;

    let mut count = 0;
    for i in 0..segs.len() {
        for j in (i + 1)..segs.len() {
            let (a, b) = segs[i];
            let (c, d) = segs[j];
            if a == c || a == d || b == c || b == d {
                continue; // shared endpoint pairs are excluded by definition
            }
            if segments_cross_oracle(verts[a], verts[b], verts[c], verts[d], eps) {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn self_intersections_matches_parametric_oracle_on_random_meshes() {
    let mut nonzero = 0;
    for seed in 0..1000u64 {
        // Large jitter without validity filtering so crossings actually occur.
        let base = common::random_mesh(seed, 4, 1.0);
        let mut rng = common::rng(seed ^ 0xabcd_1234);
        let mesh = {
            use rand::Rng;
            let deltas: Vec<[f64; 2]> = (0..base.vertices().len())
                .map(|_| [rng.gen_range(-6.0..=6.0), rng.gen_range(-6.0..=6.0)])
                .collect();
            base.apply_geom(&autopoly::GeomAction { deltas }).unwrap()
        };
        let got = self_intersections(&mesh);
        let want = self_intersections_oracle(&mesh);
        assert_eq!(got, want, "seed {seed}");
        if got > 0 {
            nonzero += 1;
        }
    }
    // The sample must actually exercise the positive case.
    assert!(nonzero > 50, "only {nonzero} meshes had crossings");
}

/// Winding number by summing signed angles subtended by each boundary
/// segment; nonzero winding means inside.
fn inside_by_angle_sum(mesh: &Mesh2D, px: f64, py: f64) -> bool {
    let verts = mesh.vertices();
    let mut total = 0.0f64;
    for face in mesh.faces() {
        let n = face.len();
        for i in 0..n {
            let a = verts[face[i]];
            let b = verts[face[(i + 1) % n]];
            let v1 = [a[0] - px, a[1] - py];
            let v2 = [b[0] - px, b[1] - py];
            let cross = v1[0] * v2[1] - v1[1] * v2[0];
            let dot = v1[0] * v2[0] + v1[1] * v2[1];
            total += cross.atan2(dot);
        }
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64 != 0
}

#[test]
fn render_binary_matches_angle_sum_winding_oracle() {
    for seed in 0..100u64 {
        let mesh = common::random_mesh(seed, 4, 2.0);
        let img = render_binary(&mesh, (64, 64)).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let want = inside_by_angle_sum(&mesh, x as f64 + 0.5, y as f64 + 0.5);
                let got = img.get(x, y) > 0.5;
                assert_eq!(got, want, "seed {seed}, pixel ({x},{y})");
            }
        }
    }
}

#[test]
fn iou_matches_hand_pixel_counts() {
    // 8x8 canvases built by hand.
    let mut a = SilhouetteImage::new(8, 8).unwrap();
    let mut b = SilhouetteImage::new(8, 8).unwrap();
    // a: rows 0..4 set (32 px); b: rows 2..6 set (32 px); overlap rows 2..4 (16 px).
    for y in 0..4 {
        for x in 0..8 {
            a.set(x, y, 1.0);
        }
    }
    for y in 2..6 {
        for x in 0..8 {
            b.set(x, y, 1.0);
        }
    }
    assert_eq!(iou(&a, &b).unwrap(), 16.0 / 48.0);
    assert_eq!(iou(&a, &a).unwrap(), 1.0);
    let empty = SilhouetteImage::new(8, 8).unwrap();
    assert_eq!(iou(&a, &empty).unwrap(), 0.0);
    assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
}
