//! Construction-step frame export: mesh wireframe over the filled
//! silhouette, as SVG (one polygon per face, one polyline per edge) or PNG.

use std::path::Path;

use autopoly::raster::render_binary;
use autopoly::{Mesh2D, Result};

/// Gray level used for wireframe pixels in PNG frames. Kept above the
/// foreground threshold so binarizing a frame reproduces render_binary.
const WIRE_LEVEL: f64 = 180.0 / 255.0;

pub fn write_svg(mesh: &Mesh2D, res: (usize, usize), path: &Path) -> Result<()> {
    let (w, h) = res;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"black\"/>\n"));
    for face in mesh.faces() {
        let pts: Vec<String> = face
            .iter()
            .map(|&v| {
                let [x, y] = mesh.vertices()[v];
                format!("{x},{y}")
            })
            .collect();
        out.push_str(&format!("<polygon points=\"{}\" fill=\"white\"/>\n", pts.join(" ")));
    }
    for &(a, b) in mesh.edges() {
        let [ax, ay] = mesh.vertices()[a];
        let [bx, by] = mesh.vertices()[b];
        out.push_str(&format!(
            "<polyline points=\"{ax},{ay} {bx},{by}\" stroke=\"gray\" stroke-width=\"0.5\" fill=\"none\"/>\n"
        ));
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_png(mesh: &Mesh2D, res: (usize, usize), path: &Path) -> Result<()> {
    let (w, h) = res;
    let mut img = render_binary(mesh, res)?;
    // Darken wireframe pixels, but only inside the silhouette so that
    // thresholding the frame still yields exactly the binary render.
    for &(a, b) in mesh.edges() {
        let [ax, ay] = mesh.vertices()[a];
        let [bx, by] = mesh.vertices()[b];
        let len = (bx - ax).hypot(by - ay);
        let samples = (len * 4.0).ceil().max(1.0) as usize;
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            let x = ax + t * (bx - ax);
            let y = ay + t * (by - ay);
            let (px, py) = (x.floor() as isize, y.floor() as isize);
            if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                let (px, py) = (px as usize, py as usize);
                if img.get(px, py) > 0.5 {
                    img.set(px, py, WIRE_LEVEL);
                }
            }
        }
    }
    img.save_png(path)
}
