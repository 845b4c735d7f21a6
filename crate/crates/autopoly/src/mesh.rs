//! Planar polygonal mesh representation and the four topological edit
//! actions.
//!
//! A [`Mesh2D`] is an immutable value: every edit returns a new mesh and
//! leaves its input untouched. Edges are re-derived from the face loops
//! after every topological action, so element indices always reference the
//! pre-edit mesh.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default extrusion offset length, in image-space units.
pub const DEFAULT_EXTRUDE_LEN: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopoKind {
    EdgeSplit,
    EdgeExtrude,
    FaceSubdivide,
    FaceDelete,
}

/// Kind-specific scalar parameters of a topological action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopoParams {
    Split { t: f64 },
    Extrude { offset: [f64; 2] },
    None {},
}

/// One topological edit with its target element and parameters.
///
/// `target` indexes an edge (split, extrude) or a face (subdivide, delete)
/// of the mesh the action is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoAction {
    pub kind: TopoKind,
    pub target: usize,
    pub params: TopoParams,
}

impl TopoAction {
    pub fn edge_split(target: usize, t: f64) -> Self {
        TopoAction { kind: TopoKind::EdgeSplit, target, params: TopoParams::Split { t } }
    }

    pub fn edge_extrude(target: usize, offset: [f64; 2]) -> Self {
        TopoAction { kind: TopoKind::EdgeExtrude, target, params: TopoParams::Extrude { offset } }
    }

    pub fn face_subdivide(target: usize) -> Self {
        TopoAction { kind: TopoKind::FaceSubdivide, target, params: TopoParams::None {} }
    }

    pub fn face_delete(target: usize) -> Self {
        TopoAction { kind: TopoKind::FaceDelete, target, params: TopoParams::None {} }
    }
}

/// One dense per-vertex translation field, same length and order as the
/// vertex list of the mesh it applies to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomAction {
    pub deltas: Vec<[f64; 2]>,
}

impl GeomAction {
    pub fn zero(n: usize) -> Self {
        GeomAction { deltas: vec![[0.0, 0.0]; n] }
    }
}

/// Indexed planar polygon mesh: vertices, derived edges, and CCW face loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    faces: Vec<Vec<usize>>,
    /// Unordered vertex-index pairs (stored min-first), derived from the
    /// face loops in first-seen order.
    edges: Vec<(usize, usize)>,
    /// Per-edge list of adjacent face indices (length 1 or 2).
    edge_faces: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct MeshRepr {
    vertices: Vec<[f64; 2]>,
    faces: Vec<Vec<usize>>,
}

impl Serialize for Mesh2D {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeshRepr { vertices: self.vertices.clone(), faces: self.faces.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mesh2D {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        // Structural checks only: geometry optimizers may move a face
        // clockwise mid-sequence, and such meshes must still roundtrip.
        let repr = MeshRepr::deserialize(d)?;
        let mut mesh = Mesh2D {
            vertices: repr.vertices,
            faces: repr.faces,
            edges: Vec::new(),
            edge_faces: Vec::new(),
        };
        mesh.rebuild_edges();
        mesh.validate_structure().map_err(serde::de::Error::custom)?;
        Ok(mesh)
    }
}

pub fn signed_area(positions: &[[f64; 2]]) -> f64 {
    let n = positions.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = positions[i];
        let [x1, y1] = positions[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

impl Mesh2D {
    /// Builds a mesh from raw vertices and face loops, deriving edges and
    /// checking all structural invariants.
    pub fn from_parts(vertices: Vec<[f64; 2]>, faces: Vec<Vec<usize>>) -> Result<Self> {
        let mut mesh = Mesh2D { vertices, faces, edges: Vec::new(), edge_faces: Vec::new() };
        mesh.rebuild_edges();
        mesh.validate()?;
        Ok(mesh)
    }

    /// Axis-aligned rectangle: 4 vertices, 4 edges, 1 CCW face.
    pub fn new_rect(center: [f64; 2], width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rectangle dimensions must be positive, got {width}x{height}"
            )));
        }
        let [cx, cy] = center;
        let (hw, hh) = (width * 0.5, height * 0.5);
        let vertices = vec![
            [cx - hw, cy - hh],
            [cx + hw, cy - hh],
            [cx + hw, cy + hh],
            [cx - hw, cy + hh],
        ];
        Self::from_parts(vertices, vec![vec![0, 1, 2, 3]])
    }

    /// 3x3 grid of quad faces: 16 vertices, 24 edges, 9 faces.
    pub fn new_subdivided_rect(center: [f64; 2], width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rectangle dimensions must be positive, got {width}x{height}"
            )));
        }
        let [cx, cy] = center;
        let (x0, y0) = (cx - width * 0.5, cy - height * 0.5);
        let mut vertices = Vec::with_capacity(16);
        for j in 0..4 {
            for i in 0..4 {
                vertices.push([x0 + width * i as f64 / 3.0, y0 + height * j as f64 / 3.0]);
            }
        }
        let mut faces = Vec::with_capacity(9);
        for j in 0..3 {
            for i in 0..3 {
                let a = j * 4 + i;
                faces.push(vec![a, a + 1, a + 5, a + 4]);
            }
        }
        Self::from_parts(vertices, faces)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Face indices adjacent to edge `e` (1 for boundary edges, 2 otherwise).
    pub fn edge_faces(&self, e: usize) -> &[usize] {
        &self.edge_faces[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_faces[e].len() == 1
    }

    /// (|V|, |E|, |F|).
    pub fn euler_counts(&self) -> (usize, usize, usize) {
        (self.vertices.len(), self.edges.len(), self.faces.len())
    }

    fn rebuild_edges(&mut self) {
        self.edges.clear();
        self.edge_faces.clear();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, face) in self.faces.iter().enumerate() {
            let n = face.len();
            for i in 0..n {
                let (a, b) = (face[i], face[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    self.edges.push(key);
                    self.edge_faces.push(Vec::new());
                    self.edges.len() - 1
                });
                self.edge_faces[e].push(fi);
            }
        }
    }

    /// Checks every Mesh2D invariant, including CCW orientation of all faces.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        for (fi, face) in self.faces.iter().enumerate() {
            let loop_pos: Vec<[f64; 2]> = face.iter().map(|&v| self.vertices[v]).collect();
            if signed_area(&loop_pos) <= 0.0 {
                return Err(Error::InvalidMesh(format!("face {fi} is not counter-clockwise")));
            }
        }
        Ok(())
    }

    /// Connectivity invariants alone, with no orientation requirement.
    pub fn validate_structure(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let nv = self.vertices.len();
        let mut used = vec![false; nv];
        for (fi, face) in self.faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(Error::InvalidMesh(format!("face {fi} has fewer than 3 vertices")));
            }
            let mut seen = std::collections::HashSet::new();
            for &v in face {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!("face {fi} references missing vertex {v}")));
                }
                if !seen.insert(v) {
                    return Err(Error::InvalidMesh(format!("face {fi} repeats vertex {v}")));
                }
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is isolated")));
        }
        for (e, adj) in self.edge_faces.iter().enumerate() {
            if adj.is_empty() || adj.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {e} bounds {} faces, expected 1 or 2",
                    adj.len()
                )));
            }
        }
        for &[x, y] in &self.vertices {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidMesh("non-finite vertex position".into()));
            }
        }
        Ok(())
    }

    /// Applies a topological action, returning a new mesh.
    pub fn apply_topo(&self, action: &TopoAction) -> Result<Mesh2D> {
        let mut out = self.clone();
        match (action.kind, action.params) {
            (TopoKind::EdgeSplit, TopoParams::Split { t }) => {
                if action.target >= self.edges.len() {
                    return Err(Error::InvalidAction(format!("edge index {} out of range", action.target)));
                }
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::InvalidAction(format!("split parameter t={t} outside (0,1)")));
                }
                let (u, v) = self.edges[action.target];
                let [ux, uy] = self.vertices[u];
                let [vx, vy] = self.vertices[v];
                let m = out.push_vertex([ux + t * (vx - ux), uy + t * (vy - uy)]);
                for &fi in &self.edge_faces[action.target] {
                    let face = &mut out.faces[fi];
                    let n = face.len();
                    let pos = (0..n)
                        .find(|&i| {
                            let (a, b) = (face[i], face[(i + 1) % n]);
                            (a.min(b), a.max(b)) == (u, v)
                        })
                        .expect("edge adjacency out of sync");
                    face.insert(pos + 1, m);
                }
            }
            (TopoKind::EdgeExtrude, TopoParams::Extrude { offset }) => {
                if action.target >= self.edges.len() {
                    return Err(Error::InvalidAction(format!("edge index {} out of range", action.target)));
                }
                if !offset[0].is_finite() || !offset[1].is_finite() {
                    return Err(Error::InvalidAction("non-finite extrude offset".into()));
                }
                if !self.is_boundary_edge(action.target) {
                    return Err(Error::InvalidAction(format!(
                        "edge {} is interior and cannot be extruded",
                        action.target
                    )));
                }
                let (u, v) = self.edges[action.target];
                let fi = self.edge_faces[action.target][0];
                // Directed occurrence a->b of the edge in its face loop.
                let face = &self.faces[fi];
                let n = face.len();
                let i = (0..n)
                    .find(|&i| {
                        let (a, b) = (face[i], face[(i + 1) % n]);
                        (a.min(b), a.max(b)) == (u, v)
                    })
                    .expect("edge adjacency out of sync");
                let (a, b) = (face[i], face[(i + 1) % n]);
                let [ax, ay] = self.vertices[a];
                let [bx, by] = self.vertices[b];
                let na = out.push_vertex([ax + offset[0], ay + offset[1]]);
                let nb = out.push_vertex([bx + offset[0], by + offset[1]]);
                let mut new_face = vec![b, a, na, nb];
                let loop_pos: Vec<[f64; 2]> = new_face.iter().map(|&v| out.vertices[v]).collect();
                let area = signed_area(&loop_pos);
                if area == 0.0 {
                    return Err(Error::InvalidAction("degenerate extrude offset".into()));
                }
                if area < 0.0 {
                    new_face.reverse();
                }
                out.faces.push(new_face);
            }
            (TopoKind::FaceSubdivide, TopoParams::None {}) => {
                if action.target >= self.faces.len() {
                    return Err(Error::InvalidAction(format!("face index {} out of range", action.target)));
                }
                let face = self.faces[action.target].clone();
                let k = face.len();
                let mut cx = 0.0;
                let mut cy = 0.0;
                for &v in &face {
                    cx += self.vertices[v][0];
                    cy += self.vertices[v][1];
                }
                let c = out.push_vertex([cx / k as f64, cy / k as f64]);
                out.faces.remove(action.target);
                for i in 0..k {
                    out.faces.push(vec![face[i], face[(i + 1) % k], c]);
                }
            }
            (TopoKind::FaceDelete, TopoParams::None {}) => {
                if action.target >= self.faces.len() {
                    return Err(Error::InvalidAction(format!("face index {} out of range", action.target)));
                }
                if self.faces.len() == 1 {
                    return Err(Error::InvalidAction("cannot delete the last face".into()));
                }
                out.faces.remove(action.target);
                out.remove_orphan_vertices();
            }
            _ => {
                return Err(Error::InvalidAction(format!(
                    "action kind {:?} does not match its parameters",
                    action.kind
                )))
            }
        }
        out.rebuild_edges();
        Ok(out)
    }

    /// Applies a per-vertex translation field, returning a new mesh.
    pub fn apply_geom(&self, action: &GeomAction) -> Result<Mesh2D> {
        if action.deltas.len() != self.vertices.len() {
            return Err(Error::InvalidAction(format!(
                "delta count {} does not match vertex count {}",
                action.deltas.len(),
                self.vertices.len()
            )));
        }
        let mut out = self.clone();
        for (p, d) in out.vertices.iter_mut().zip(&action.deltas) {
            if !d[0].is_finite() || !d[1].is_finite() {
                return Err(Error::InvalidAction("non-finite vertex delta".into()));
            }
            p[0] += d[0];
            p[1] += d[1];
        }
        Ok(out)
    }

    /// Replaces all vertex positions, keeping topology. Used by the inverse
    /// estimator; counts must match.
    pub fn with_vertices(&self, vertices: Vec<[f64; 2]>) -> Result<Mesh2D> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidArgument("vertex count mismatch".into()));
        }
        let mut out = self.clone();
        out.vertices = vertices;
        Ok(out)
    }

    /// All valid topological actions with canonical parameters, in
    /// deterministic order: splits by edge index, extrudes by boundary edge
    /// index, subdivides by face index, deletes by face index.
    pub fn enumerate_valid_actions(&self, extrude_len: f64) -> Vec<TopoAction> {
        let mut actions = Vec::new();
        for e in 0..self.edges.len() {
            actions.push(TopoAction::edge_split(e, 0.5));
        }
        for e in 0..self.edges.len() {
            if !self.is_boundary_edge(e) {
                continue;
            }
            let (u, v) = self.edges[e];
            let fi = self.edge_faces[e][0];
            let face = &self.faces[fi];
            let n = face.len();
            let i = (0..n)
                .find(|&i| {
                    let (a, b) = (face[i], face[(i + 1) % n]);
                    (a.min(b), a.max(b)) == (u, v)
                })
                .expect("edge adjacency out of sync");
            let (a, b) = (face[i], face[(i + 1) % n]);
            let [ax, ay] = self.vertices[a];
            let [bx, by] = self.vertices[b];
            let (dx, dy) = (bx - ax, by - ay);
            let len = (dx * dx + dy * dy).sqrt();
            if len == 0.0 {
                continue;
            }
            // Interior lies to the left of a->b in a CCW loop; outward
            // normal points right.
            let normal = [dy / len, -dx / len];
            actions.push(TopoAction::edge_extrude(e, [normal[0] * extrude_len, normal[1] * extrude_len]));
        }
        for (f, face) in self.faces.iter().enumerate() {
            // A centroid fan is valid only when the face is star-shaped
            // around its centroid: every fan triangle must stay CCW.
            let k = face.len();
            let mut cx = 0.0;
            let mut cy = 0.0;
            for &v in face {
                cx += self.vertices[v][0];
                cy += self.vertices[v][1];
            }
            let c = [cx / k as f64, cy / k as f64];
            let star_shaped = (0..k).all(|i| {
                let tri = [self.vertices[face[i]], self.vertices[face[(i + 1) % k]], c];
                signed_area(&tri) > 0.0
            });
            if star_shaped {
                actions.push(TopoAction::face_subdivide(f));
            }
        }
        if self.faces.len() > 1 {
            for f in 0..self.faces.len() {
                actions.push(TopoAction::face_delete(f));
            }
        }
        actions
    }

    fn push_vertex(&mut self, p: [f64; 2]) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn remove_orphan_vertices(&mut self) {
        let nv = self.vertices.len();
        let mut used = vec![false; nv];
        for face in &self.faces {
            for &v in face {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; nv];
        let mut kept = Vec::with_capacity(nv);
        for (v, &u) in used.iter().enumerate() {
            if u {
                remap[v] = kept.len();
                kept.push(self.vertices[v]);
            }
        }
        self.vertices = kept;
        for face in &mut self.faces {
            for v in face.iter_mut() {
                *v = remap[*v];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect() -> Mesh2D {
        Mesh2D::new_rect([32.0, 32.0], 20.0, 10.0).unwrap()
    }

    #[test]
    fn new_rect_counts_and_area() {
        let m = rect();
        assert_eq!(m.euler_counts(), (4, 4, 1));
        let pos: Vec<[f64; 2]> = m.faces()[0].iter().map(|&v| m.vertices()[v]).collect();
        assert!((signed_area(&pos) - 200.0).abs() < 1e-12);
        let (v, e, f) = m.euler_counts();
        assert_eq!(v + e + f, 9);
    }

    #[test]
    fn new_rect_rejects_bad_dims() {
        assert!(Mesh2D::new_rect([0.0, 0.0], 0.0, 1.0).is_err());
        assert!(Mesh2D::new_rect([0.0, 0.0], 1.0, -2.0).is_err());
    }

    #[test]
    fn subdivided_rect_counts() {
        let m = Mesh2D::new_subdivided_rect([32.0, 32.0], 30.0, 30.0).unwrap();
        assert_eq!(m.euler_counts(), (16, 24, 9));
        let (v, e, f) = m.euler_counts();
        assert_eq!(v + e + f, 49);
        let boundary = (0..m.edges().len()).filter(|&e| m.is_boundary_edge(e)).count();
        assert_eq!(boundary, 12);
        assert_eq!(m.edges().len() - boundary, 12);
    }

    #[test]
    fn edge_split_midpoint() {
        let m = Mesh2D::new_rect([1.0, 1.0], 2.0, 2.0).unwrap();
        // Edge 0 connects (0,0)-(2,0).
        let out = m.apply_topo(&TopoAction::edge_split(0, 0.5)).unwrap();
        assert_eq!(out.euler_counts(), (5, 5, 1));
        assert_eq!(out.vertices()[4], [1.0, 0.0]);
        out.validate().unwrap();
        // Input untouched.
        assert_eq!(m.euler_counts(), (4, 4, 1));
    }

    #[test]
    fn face_subdivide_fan() {
        let m = Mesh2D::new_rect([0.5, 0.5], 1.0, 1.0).unwrap();
        let out = m.apply_topo(&TopoAction::face_subdivide(0)).unwrap();
        assert_eq!(out.euler_counts(), (5, 8, 4));
        assert_eq!(out.vertices()[4], [0.5, 0.5]);
        out.validate().unwrap();
    }

    #[test]
    fn edge_extrude_boundary() {
        let m = rect();
        let actions = m.enumerate_valid_actions(8.0);
        let extrude = actions.iter().find(|a| a.kind == TopoKind::EdgeExtrude).unwrap();
        let out = m.apply_topo(extrude).unwrap();
        assert_eq!(out.euler_counts(), (6, 7, 2));
        out.validate().unwrap();
    }

    #[test]
    fn extrude_interior_edge_rejected() {
        let m = Mesh2D::new_subdivided_rect([32.0, 32.0], 30.0, 30.0).unwrap();
        let interior = (0..m.edges().len()).find(|&e| !m.is_boundary_edge(e)).unwrap();
        assert!(m.apply_topo(&TopoAction::edge_extrude(interior, [8.0, 0.0])).is_err());
    }

    #[test]
    fn delete_corner_face_of_grid() {
        let m = Mesh2D::new_subdivided_rect([32.0, 32.0], 30.0, 30.0).unwrap();
        // The corner vertex and its two boundary edges belong only to the
        // deleted face, so they are orphaned and removed.
        let out = m.apply_topo(&TopoAction::face_delete(0)).unwrap();
        assert_eq!(out.euler_counts(), (15, 22, 8));
        out.validate().unwrap();
    }

    #[test]
    fn delete_center_face_of_grid() {
        let m = Mesh2D::new_subdivided_rect([32.0, 32.0], 30.0, 30.0).unwrap();
        // Center face (index 4) shares all its edges; nothing is orphaned.
        let out = m.apply_topo(&TopoAction::face_delete(4)).unwrap();
        assert_eq!(out.euler_counts(), (16, 24, 8));
        out.validate().unwrap();
    }

    #[test]
    fn delete_last_face_rejected() {
        let m = rect();
        assert!(m.apply_topo(&TopoAction::face_delete(0)).is_err());
    }

    #[test]
    fn split_t_out_of_range_rejected() {
        let m = rect();
        assert!(m.apply_topo(&TopoAction::edge_split(0, 0.0)).is_err());
        assert!(m.apply_topo(&TopoAction::edge_split(0, 1.0)).is_err());
    }

    #[test]
    fn enumerate_rect_actions() {
        let m = rect();
        let actions = m.enumerate_valid_actions(8.0);
        assert_eq!(actions.len(), 9); // 4 splits + 4 extrudes + 1 subdivide
        assert_eq!(actions.iter().filter(|a| a.kind == TopoKind::EdgeSplit).count(), 4);
        assert_eq!(actions.iter().filter(|a| a.kind == TopoKind::EdgeExtrude).count(), 4);
        assert_eq!(actions.iter().filter(|a| a.kind == TopoKind::FaceSubdivide).count(), 1);
        assert_eq!(actions.iter().filter(|a| a.kind == TopoKind::FaceDelete).count(), 0);
        assert_eq!(actions, m.enumerate_valid_actions(8.0));
    }

    #[test]
    fn enumerate_grid_actions() {
        let m = Mesh2D::new_subdivided_rect([32.0, 32.0], 30.0, 30.0).unwrap();
        let actions = m.enumerate_valid_actions(8.0);
        assert_eq!(actions.len(), 54); // 24 + 12 + 9 + 9
    }

    #[test]
    fn geom_roundtrip() {
        let m = rect();
        let g = GeomAction { deltas: vec![[1.0, 0.0]; 4] };
        let moved = m.apply_geom(&g).unwrap();
        let back = moved
            .apply_geom(&GeomAction { deltas: vec![[-1.0, 0.0]; 4] })
            .unwrap();
        assert_eq!(back.vertices(), m.vertices());
        let same = m.apply_geom(&GeomAction::zero(4)).unwrap();
        assert_eq!(same, m);
    }

    #[test]
    fn geom_length_mismatch_rejected() {
        let m = rect();
        assert!(m.apply_geom(&GeomAction::zero(3)).is_err());
        assert!(m
            .apply_geom(&GeomAction { deltas: vec![[f64::NAN, 0.0]; 4] })
            .is_err());
    }

    #[test]
    fn json_roundtrip_exact() {
        let m = Mesh2D::new_rect([32.1234567890123, 31.99999], 20.0 / 3.0, 10.0 / 7.0).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: Mesh2D = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
