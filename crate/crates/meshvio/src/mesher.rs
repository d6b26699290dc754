//! Per-keyframe 2D Delaunay triangulation over tracked keypoints, lifted to a
//! 3D mesh through the landmark estimates, and propagated over the
//! optimization horizon by merging and marginalization pruning.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{Vector2, Vector3};

/// Identifier of a tracked landmark.
pub type LandmarkId = u64;

/// A tracked keypoint: the 2D pixel observation of a landmark in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub landmark_id: LandmarkId,
    pub pixel: Vector2<f64>,
}

/// A triangular face, identified by its three landmark ids.
///
/// Ids are stored sorted ascending so face identity is independent of winding
/// and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Face {
    ids: [LandmarkId; 3],
}

impl Face {
    /// Builds the canonical face; returns None when ids are not distinct.
    pub fn new(a: LandmarkId, b: LandmarkId, c: LandmarkId) -> Option<Face> {
        if a == b || b == c || a == c {
            return None;
        }
        let mut ids = [a, b, c];
        ids.sort_unstable();
        Some(Face { ids })
    }

    pub fn ids(&self) -> [LandmarkId; 3] {
        self.ids
    }

    pub fn contains(&self, id: LandmarkId) -> bool {
        self.ids.contains(&id)
    }
}

/// A landmark-indexed triangle mesh spanning the optimization horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh3D {
    pub vertices: BTreeMap<LandmarkId, Vector3<f64>>,
    pub faces: BTreeSet<Face>,
}

impl Mesh3D {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Unit normal of a face (sign is arbitrary), or None when degenerate.
    pub fn face_normal(&self, face: &Face) -> Option<Vector3<f64>> {
        let [a, b, c] = self.face_vertices(face)?;
        let n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm < 1e-12 {
            return None;
        }
        Some(n / norm)
    }

    pub fn face_vertices(&self, face: &Face) -> Option<[Vector3<f64>; 3]> {
        let [a, b, c] = face.ids();
        Some([
            *self.vertices.get(&a)?,
            *self.vertices.get(&b)?,
            *self.vertices.get(&c)?,
        ])
    }

    pub fn face_centroid(&self, face: &Face) -> Option<Vector3<f64>> {
        let [a, b, c] = self.face_vertices(face)?;
        Some((a + b + c) / 3.0)
    }

    pub fn face_area(&self, face: &Face) -> Option<f64> {
        let [a, b, c] = self.face_vertices(face)?;
        Some((b - a).cross(&(c - a)).norm() * 0.5)
    }

    /// Re-reads vertex positions from the latest estimates. Vertices without
    /// an estimate keep their previous position.
    pub fn refresh_positions<F>(&mut self, latest: F)
    where
        F: Fn(LandmarkId) -> Option<Vector3<f64>>,
    {
        for (id, pos) in self.vertices.iter_mut() {
            if let Some(p) = latest(*id) {
                *pos = p;
            }
        }
    }

    fn drop_orphan_vertices(&mut self) {
        let referenced: BTreeSet<LandmarkId> =
            self.faces.iter().flat_map(|f| f.ids()).collect();
        self.vertices.retain(|id, _| referenced.contains(id));
    }
}

/// Geometric face filters applied after lifting to 3D.
#[derive(Debug, Clone, Copy)]
pub struct FilterParams {
    /// Maximum 3D edge length in meters.
    pub max_edge_len: f64,
    /// Maximum ratio of longest to shortest 3D edge.
    pub max_edge_ratio: f64,
    /// Minimum interior angle in radians.
    pub min_angle: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            max_edge_len: 1.5,
            max_edge_ratio: 10.0,
            min_angle: 3.0_f64.to_radians(),
        }
    }
}

// Tolerance of the in-circle predicate. The determinant scales with the
// fourth power of the coordinate magnitude, so the threshold is scaled
// accordingly before comparison.
const INCIRCLE_EPS: f64 = 1e-9;

fn incircle_det(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, p: Vector2<f64>) -> f64 {
    let da = a - p;
    let db = b - p;
    let dc = c - p;
    let la = da.norm_squared();
    let lb = db.norm_squared();
    let lc = dc.norm_squared();
    da.x * (db.y * lc - dc.y * lb) - da.y * (db.x * lc - dc.x * lb)
        + la * (db.x * dc.y - dc.x * db.y)
}

fn incircle_scale(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, p: Vector2<f64>) -> f64 {
    let s = (a - p)
        .norm()
        .max((b - p).norm())
        .max((c - p).norm())
        .max(1.0);
    s * s * s * s
}

/// Signed in-circle classification: positive when `p` is strictly inside the
/// circumcircle of triangle (a, b, c), negative when strictly outside, zero
/// within the predicate tolerance (treated as cocircular).
pub fn incircle(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, p: Vector2<f64>) -> i8 {
    let orient = (b - a).perp(&(c - a));
    let det = if orient >= 0.0 {
        incircle_det(a, b, c, p)
    } else {
        -incircle_det(a, b, c, p)
    };
    let tol = INCIRCLE_EPS * incircle_scale(a, b, c, p);
    if det > tol {
        1
    } else if det < -tol {
        -1
    } else {
        0
    }
}

/// 2D Delaunay triangulation of a keyframe's keypoints.
///
/// Incremental Bowyer-Watson insertion inside a super-triangle. Fewer than
/// three usable points, or an all-collinear set, yields an empty face set (no
/// mesh for that frame). Exact cocircular ties are resolved afterwards so the
/// kept diagonal is incident to the lexicographically smallest (x, then y)
/// keypoint involved.
pub fn triangulate_2d(keypoints: &[Keypoint]) -> BTreeSet<Face> {
    // Deterministic insertion order; duplicate ids or coincident pixels keep
    // the first occurrence in that order.
    let mut pts: Vec<Keypoint> = keypoints.to_vec();
    pts.sort_by(|a, b| {
        (a.pixel.x, a.pixel.y, a.landmark_id)
            .partial_cmp(&(b.pixel.x, b.pixel.y, b.landmark_id))
            .unwrap()
    });
    let mut seen_ids = BTreeSet::new();
    let mut seen_px: Vec<Vector2<f64>> = Vec::new();
    pts.retain(|k| {
        if !seen_ids.insert(k.landmark_id) {
            return false;
        }
        if seen_px.iter().any(|p| (p - k.pixel).norm() < 1e-12) {
            return false;
        }
        seen_px.push(k.pixel);
        true
    });
    if pts.len() < 3 {
        return BTreeSet::new();
    }

    // Super-triangle comfortably containing every point.
    let (mut lo, mut hi) = (pts[0].pixel, pts[0].pixel);
    for k in &pts {
        lo.x = lo.x.min(k.pixel.x);
        lo.y = lo.y.min(k.pixel.y);
        hi.x = hi.x.max(k.pixel.x);
        hi.y = hi.y.max(k.pixel.y);
    }
    let center = (lo + hi) * 0.5;
    let span = (hi - lo).norm().max(1.0) * 64.0;
    let coords: Vec<Vector2<f64>> = pts
        .iter()
        .map(|k| k.pixel)
        .chain([
            center + Vector2::new(-span, -span * 0.7),
            center + Vector2::new(span, -span * 0.7),
            center + Vector2::new(0.0, span),
        ])
        .collect();
    let n = pts.len();

    let mut triangles: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for i in 0..n {
        let p = coords[i];
        let mut bad = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            if incircle(coords[tri[0]], coords[tri[1]], coords[tri[2]], p) > 0 {
                bad.push(t);
            }
        }
        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for &t in &bad {
            let tri = triangles[t];
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                *edge_count.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        for &t in bad.iter().rev() {
            triangles.swap_remove(t);
        }
        let mut boundary: Vec<(usize, usize)> = edge_count
            .into_iter()
            .filter(|&(_, count)| count == 1)
            .map(|(edge, _)| edge)
            .collect();
        boundary.sort_unstable();
        for (u, v) in boundary {
            triangles.push([u, v, i]);
        }
    }

    // Keep faces made of real points only, as landmark-id triples.
    let mut faces = BTreeSet::new();
    for tri in &triangles {
        if tri.iter().all(|&v| v < n) {
            if let Some(f) = Face::new(
                pts[tri[0]].landmark_id,
                pts[tri[1]].landmark_id,
                pts[tri[2]].landmark_id,
            ) {
                faces.insert(f);
            }
        }
    }

    canonicalize_cocircular_ties(&mut faces, &pts);
    faces
}

/// Flips diagonals of exactly-cocircular quads so the kept diagonal touches
/// the lexicographically smallest (x, then y) keypoint of the quad.
fn canonicalize_cocircular_ties(faces: &mut BTreeSet<Face>, pts: &[Keypoint]) {
    let pixel: BTreeMap<LandmarkId, Vector2<f64>> =
        pts.iter().map(|k| (k.landmark_id, k.pixel)).collect();
    let lex_min = |ids: &[LandmarkId]| -> LandmarkId {
        *ids.iter()
            .min_by(|&&a, &&b| {
                let pa = pixel[&a];
                let pb = pixel[&b];
                (pa.x, pa.y).partial_cmp(&(pb.x, pb.y)).unwrap()
            })
            .unwrap()
    };
    let max_rounds = faces.len() * faces.len() + 4;
    for _ in 0..max_rounds {
        // Interior edges and their two adjacent faces.
        let mut by_edge: BTreeMap<(LandmarkId, LandmarkId), Vec<Face>> = BTreeMap::new();
        for f in faces.iter() {
            let [a, b, c] = f.ids();
            for (u, v) in [(a, b), (b, c), (a, c)] {
                by_edge.entry((u, v)).or_default().push(*f);
            }
        }
        let mut flipped = false;
        for ((u, v), adj) in by_edge.iter() {
            if adj.len() != 2 {
                continue;
            }
            let opposite = |f: &Face| f.ids().into_iter().find(|id| id != u && id != v);
            let (Some(c), Some(d)) = (opposite(&adj[0]), opposite(&adj[1])) else {
                continue;
            };
            if incircle(pixel[u], pixel[v], pixel[&c], pixel[&d]) != 0 {
                continue;
            }
            let m = lex_min(&[*u, *v, c, d]);
            if m == *u || m == *v {
                continue;
            }
            // Only flip convex quads: the new diagonal must cross the old one.
            if !segments_cross(pixel[&c], pixel[&d], pixel[u], pixel[v]) {
                continue;
            }
            let old0 = adj[0];
            let old1 = adj[1];
            faces.remove(&old0);
            faces.remove(&old1);
            faces.insert(Face::new(c, d, *u).unwrap());
            faces.insert(Face::new(c, d, *v).unwrap());
            flipped = true;
            break;
        }
        if !flipped {
            break;
        }
    }
}

fn segments_cross(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let side = |p: Vector2<f64>, q: Vector2<f64>, r: Vector2<f64>| (q - p).perp(&(r - p));
    side(a, b, c) * side(a, b, d) < 0.0 && side(c, d, a) * side(c, d, b) < 0.0
}

/// Projects 2D faces into 3D using the landmark estimates. Faces referencing
/// a landmark without an estimate are dropped.
pub fn lift_to_3d(
    faces2d: &BTreeSet<Face>,
    landmarks: &BTreeMap<LandmarkId, Vector3<f64>>,
) -> Mesh3D {
    let mut mesh = Mesh3D::default();
    for face in faces2d {
        let ids = face.ids();
        if ids.iter().all(|id| landmarks.contains_key(id)) {
            for id in ids {
                mesh.vertices.insert(id, landmarks[&id]);
            }
            mesh.faces.insert(*face);
        }
    }
    mesh
}

/// Removes faces violating any geometric filter, then orphaned vertices.
pub fn filter_faces(mesh: &Mesh3D, params: &FilterParams) -> Mesh3D {
    let mut out = mesh.clone();
    out.faces.retain(|face| {
        let Some([a, b, c]) = mesh.face_vertices(face) else {
            return false;
        };
        let e = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
        let longest = e[0].max(e[1]).max(e[2]);
        let shortest = e[0].min(e[1]).min(e[2]);
        if longest > params.max_edge_len {
            return false;
        }
        if shortest < 1e-12 || longest / shortest > params.max_edge_ratio {
            return false;
        }
        min_triangle_angle(&a, &b, &c) >= params.min_angle
    });
    out.drop_orphan_vertices();
    out
}

fn min_triangle_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let angle = |p: &Vector3<f64>, q: &Vector3<f64>, r: &Vector3<f64>| {
        let u = q - p;
        let v = r - p;
        let nu = u.norm();
        let nv = v.norm();
        if nu < 1e-12 || nv < 1e-12 {
            return 0.0;
        }
        (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0).acos()
    };
    angle(a, &b, &c).min(angle(&b, &c, a)).min(angle(&c, a, &b))
}

/// Merges a new local mesh into the horizon mesh and prunes marginalized
/// landmarks.
///
/// The face set becomes the deduplicated union minus any face touching a
/// marginalized id; vertex positions from the local mesh (the latest
/// estimates) win; vertices without a remaining face are removed.
pub fn update_mesh(
    global: &Mesh3D,
    local: &Mesh3D,
    marginalized_ids: &BTreeSet<LandmarkId>,
) -> Mesh3D {
    let mut out = Mesh3D::default();
    for f in global.faces.iter().chain(local.faces.iter()) {
        if !f.ids().iter().any(|id| marginalized_ids.contains(id)) {
            out.faces.insert(*f);
        }
    }
    for (id, pos) in global.vertices.iter().chain(local.vertices.iter()) {
        if !marginalized_ids.contains(id) {
            out.vertices.insert(*id, *pos);
        }
    }
    out.drop_orphan_vertices();
    out
}
