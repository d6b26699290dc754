//! Detection of horizontal and vertical plane candidates from the horizon
//! mesh, landmark association, and deduplication against tracked planes.
//!
//! Horizontal planes come from a 1D histogram over vertex heights, vertical
//! planes from a 2D histogram over (plane distance to the world origin,
//! normal azimuth). Both histograms are Gaussian-smoothed and their strict
//! local maxima become candidates; detection is non-iterative and
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::geometry::{Plane, UnitNormal};
use crate::mesher::{Face, LandmarkId, Mesh3D};

/// Tuning knobs of the detector.
#[derive(Debug, Clone, Copy)]
pub struct DetectorParams {
    /// Clustering tolerance around exact vertical/horizontal, radians.
    pub angle_tol: f64,
    /// Height bin width for horizontal planes, meters.
    pub height_bin: f64,
    /// Distance bin width for vertical planes, meters.
    pub distance_bin: f64,
    /// Azimuth bin width for vertical planes, radians. 2*pi must be an
    /// integer multiple.
    pub azimuth_bin: f64,
    /// Gaussian smoothing sigma in bins, truncated at 3 sigma.
    pub smoothing_sigma: f64,
    /// Minimum number of supporting faces for a candidate.
    pub min_support: usize,
    /// Maximum normal angle for matching a candidate to a tracked plane.
    pub match_normal_tol: f64,
    /// Maximum distance gap for matching a candidate to a tracked plane.
    pub match_distance_tol: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            angle_tol: 10.0_f64.to_radians(),
            height_bin: 0.05,
            distance_bin: 0.10,
            azimuth_bin: 5.0_f64.to_radians(),
            smoothing_sigma: 1.0,
            min_support: 20,
            match_normal_tol: 10.0_f64.to_radians(),
            match_distance_tol: 0.10,
        }
    }
}

/// A detected plane with the faces and landmarks that voted for it.
#[derive(Debug, Clone)]
pub struct PlaneCandidate {
    pub plane: Plane,
    pub supporting_faces: BTreeSet<Face>,
    pub supporting_landmarks: BTreeSet<LandmarkId>,
}

/// Sparse 1D histogram with a fixed bin width.
#[derive(Debug, Clone)]
pub struct Histogram1D {
    pub bin_width: f64,
    pub bins: BTreeMap<i64, f64>,
}

impl Histogram1D {
    pub fn new(bin_width: f64) -> Self {
        Histogram1D {
            bin_width,
            bins: BTreeMap::new(),
        }
    }

    pub fn vote(&mut self, value: f64) {
        let idx = (value / self.bin_width).floor() as i64;
        *self.bins.entry(idx).or_insert(0.0) += 1.0;
    }

    pub fn bin_center(&self, idx: i64) -> f64 {
        (idx as f64 + 0.5) * self.bin_width
    }

    /// Convolves the counts with a discrete Gaussian (zero-padded ends).
    pub fn smoothed(&self, sigma: f64) -> BTreeMap<i64, f64> {
        let kernel = gaussian_kernel(sigma);
        let half = (kernel.len() / 2) as i64;
        let mut out = BTreeMap::new();
        for (&idx, &count) in &self.bins {
            for (k, &w) in kernel.iter().enumerate() {
                let target = idx + k as i64 - half;
                *out.entry(target).or_insert(0.0) += count * w;
            }
        }
        out
    }
}

/// Sparse 2D histogram over (distance, azimuth); the azimuth axis is
/// periodic with period 2*pi.
#[derive(Debug, Clone)]
pub struct Histogram2D {
    pub distance_bin_width: f64,
    pub azimuth_bin_width: f64,
    pub azimuth_bins: usize,
    pub bins: BTreeMap<(i64, usize), f64>,
}

impl Histogram2D {
    pub fn new(distance_bin_width: f64, azimuth_bin_width: f64) -> Self {
        let azimuth_bins = (TAU / azimuth_bin_width).round() as usize;
        Histogram2D {
            distance_bin_width,
            azimuth_bin_width,
            azimuth_bins,
            bins: BTreeMap::new(),
        }
    }

    pub fn vote(&mut self, distance: f64, azimuth: f64) {
        let i = (distance / self.distance_bin_width).floor() as i64;
        let wrapped = azimuth.rem_euclid(TAU);
        let j = ((wrapped / self.azimuth_bin_width).floor() as usize) % self.azimuth_bins;
        *self.bins.entry((i, j)).or_insert(0.0) += 1.0;
    }

    pub fn distance_center(&self, i: i64) -> f64 {
        (i as f64 + 0.5) * self.distance_bin_width
    }

    pub fn azimuth_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.azimuth_bin_width
    }

    /// Separable Gaussian smoothing: the distance axis is zero-padded, the
    /// azimuth axis wraps around.
    pub fn smoothed(&self, sigma: f64) -> BTreeMap<(i64, usize), f64> {
        let kernel = gaussian_kernel(sigma);
        let half = (kernel.len() / 2) as i64;
        let mut tmp: BTreeMap<(i64, usize), f64> = BTreeMap::new();
        for (&(i, j), &count) in &self.bins {
            for (k, &w) in kernel.iter().enumerate() {
                *tmp.entry((i + k as i64 - half, j)).or_insert(0.0) += count * w;
            }
        }
        let mut out: BTreeMap<(i64, usize), f64> = BTreeMap::new();
        let nb = self.azimuth_bins as i64;
        for (&(i, j), &count) in &tmp {
            for (k, &w) in kernel.iter().enumerate() {
                let jj = (j as i64 + k as i64 - half).rem_euclid(nb) as usize;
                *out.entry((i, jj)).or_insert(0.0) += count * w;
            }
        }
        out
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

/// Splits the mesh faces into near-horizontal-surface and
/// near-vertical-surface clusters by their normal direction.
///
/// A face is horizontal when its normal is within `angle_tol` of the world
/// vertical (either sign), vertical when the normal is within `angle_tol` of
/// the horizontal plane. Degenerate faces belong to neither set.
pub fn segment_faces_by_normal(
    mesh: &Mesh3D,
    angle_tol: f64,
) -> (BTreeSet<Face>, BTreeSet<Face>) {
    let mut horizontal = BTreeSet::new();
    let mut vertical = BTreeSet::new();
    for face in &mesh.faces {
        let Some(n) = mesh.face_normal(face) else {
            continue;
        };
        // Angle between the unsigned normal and the z axis, in [0, pi/2].
        let angle_to_vertical = n.z.abs().clamp(0.0, 1.0).acos();
        if angle_to_vertical <= angle_tol {
            horizontal.insert(*face);
        } else if (angle_to_vertical - std::f64::consts::FRAC_PI_2).abs() <= angle_tol {
            vertical.insert(*face);
        }
    }
    (horizontal, vertical)
}

// Local maximum under the strict rule: greater than every neighbor, with
// exact ties resolved in favor of the lowest bin index.
fn beats(c: f64, idx_c: (i64, i64), n: f64, idx_n: (i64, i64)) -> bool {
    c > n || (c == n && idx_c < idx_n)
}

/// Detects horizontal plane candidates from the height histogram of the
/// horizontal face cluster.
pub fn detect_horizontal_planes(
    faces: &BTreeSet<Face>,
    mesh: &Mesh3D,
    params: &DetectorParams,
) -> Vec<PlaneCandidate> {
    let mut hist = Histogram1D::new(params.height_bin);
    let mut voted: BTreeSet<LandmarkId> = BTreeSet::new();
    for face in faces {
        for id in face.ids() {
            if voted.insert(id) {
                if let Some(p) = mesh.vertices.get(&id) {
                    hist.vote(p.z);
                }
            }
        }
    }
    let smooth = hist.smoothed(params.smoothing_sigma);
    let mut candidates = Vec::new();
    let up = UnitNormal::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
    for (&idx, &count) in &smooth {
        if count <= 0.0 {
            continue;
        }
        let neighbors = [idx - 1, idx + 1];
        let is_max = neighbors.iter().all(|&m| {
            let nv = smooth.get(&m).copied().unwrap_or(0.0);
            beats(count, (idx, 0), nv, (m, 0))
        });
        if !is_max {
            continue;
        }
        let height = hist.bin_center(idx);
        let supporting: BTreeSet<Face> = faces
            .iter()
            .filter(|f| {
                mesh.face_centroid(f)
                    .map(|c| (c.z - height).abs() <= params.height_bin)
                    .unwrap_or(false)
            })
            .copied()
            .collect();
        if supporting.len() < params.min_support {
            continue;
        }
        let landmarks = union_of_vertices(&supporting);
        candidates.push(PlaneCandidate {
            plane: Plane::new(up, height),
            supporting_faces: supporting,
            supporting_landmarks: landmarks,
        });
    }
    sort_candidates(&mut candidates);
    candidates
}

// Canonical (distance, azimuth) coordinates of a face's plane, for votes and
// support tests of the vertical detector.
fn vertical_face_coords(mesh: &Mesh3D, face: &Face) -> Option<(f64, f64)> {
    let n = mesh.face_normal(face)?;
    let c = mesh.face_centroid(face)?;
    let normal = UnitNormal::new(n)?;
    let plane = Plane::new(normal, n.dot(&c));
    let v = plane.normal().vector();
    let azimuth = v.y.atan2(v.x).rem_euclid(TAU);
    Some((plane.distance(), azimuth))
}

/// Detects vertical plane candidates from the (distance, azimuth) histogram
/// of the vertical face cluster. The world origin is the first estimated
/// pose, which anchors the distance axis.
pub fn detect_vertical_planes(
    faces: &BTreeSet<Face>,
    mesh: &Mesh3D,
    params: &DetectorParams,
) -> Vec<PlaneCandidate> {
    let mut hist = Histogram2D::new(params.distance_bin, params.azimuth_bin);
    for face in faces {
        if let Some((d, az)) = vertical_face_coords(mesh, face) {
            hist.vote(d, az);
        }
    }
    let smooth = hist.smoothed(params.smoothing_sigma);
    let nb = hist.azimuth_bins as i64;
    let mut candidates = Vec::new();
    for (&(i, j), &count) in &smooth {
        if count <= 0.0 {
            continue;
        }
        let mut is_max = true;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let jj = (j as i64 + dj).rem_euclid(nb);
                let nv = smooth.get(&(i + di, jj as usize)).copied().unwrap_or(0.0);
                if !beats(count, (i, j as i64), nv, (i + di, jj)) {
                    is_max = false;
                }
            }
        }
        if !is_max {
            continue;
        }
        let d_center = hist.distance_center(i);
        let az_center = hist.azimuth_center(j);
        let supporting: BTreeSet<Face> = faces
            .iter()
            .filter(|f| {
                vertical_face_coords(mesh, f)
                    .map(|(d, az)| {
                        let daz = wrapped_angle_gap(az, az_center);
                        (d - d_center).abs() <= params.distance_bin
                            && daz <= params.azimuth_bin
                    })
                    .unwrap_or(false)
            })
            .copied()
            .collect();
        if supporting.len() < params.min_support {
            continue;
        }
        let landmarks = union_of_vertices(&supporting);
        let normal =
            UnitNormal::new(Vector3::new(az_center.cos(), az_center.sin(), 0.0)).unwrap();
        candidates.push(PlaneCandidate {
            plane: Plane::new(normal, d_center),
            supporting_faces: supporting,
            supporting_landmarks: landmarks,
        });
    }
    sort_candidates(&mut candidates);
    candidates
}

fn wrapped_angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn union_of_vertices(faces: &BTreeSet<Face>) -> BTreeSet<LandmarkId> {
    faces.iter().flat_map(|f| f.ids()).collect()
}

fn sort_candidates(candidates: &mut [PlaneCandidate]) {
    candidates.sort_by(|a, b| {
        b.supporting_faces
            .len()
            .cmp(&a.supporting_faces.len())
            .then(
                a.plane
                    .distance()
                    .partial_cmp(&b.plane.distance())
                    .unwrap(),
            )
    });
}

/// The landmarks constrained by a candidate: the union of the vertex ids of
/// its supporting faces.
pub fn associate_landmarks(candidate: &PlaneCandidate) -> BTreeSet<LandmarkId> {
    union_of_vertices(&candidate.supporting_faces)
}

/// Result of deduplicating fresh candidates against tracked planes.
#[derive(Debug, Clone, Default)]
pub struct MatchResult {
    /// (candidate, index into the existing plane list) pairs.
    pub matched: Vec<(PlaneCandidate, usize)>,
    /// Candidates with no close tracked plane.
    pub new: Vec<PlaneCandidate>,
}

/// Compares candidates to already-tracked planes by normal angle and distance
/// to the origin. Each candidate matches at most one plane: the closest by
/// normal angle, ties resolved by distance gap.
pub fn match_existing(
    candidates: Vec<PlaneCandidate>,
    existing: &[Plane],
    params: &DetectorParams,
) -> MatchResult {
    let mut result = MatchResult::default();
    for cand in candidates {
        let mut best: Option<(usize, f64, f64)> = None;
        for (idx, plane) in existing.iter().enumerate() {
            let (angle, gap) = cand.plane.gap_to(plane);
            if angle <= params.match_normal_tol && gap <= params.match_distance_tol {
                let better = match best {
                    None => true,
                    Some((_, ba, bg)) => angle < ba || (angle == ba && gap < bg),
                };
                if better {
                    best = Some((idx, angle, gap));
                }
            }
        }
        match best {
            Some((idx, _, _)) => result.matched.push((cand, idx)),
            None => result.new.push(cand),
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::{lift_to_3d, Keypoint};
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    // Grid of (nx x ny) vertices on the plane z = height, triangulated.
    fn horizontal_grid_mesh(nx: usize, ny: usize, height: f64, first_id: LandmarkId) -> Mesh3D {
        let mut kps = Vec::new();
        let mut landmarks = BTreeMap::new();
        for i in 0..nx {
            for j in 0..ny {
                let id = first_id + (i * ny + j) as u64;
                let (x, y) = (0.3 * i as f64, 0.3 * j as f64);
                kps.push(Keypoint {
                    landmark_id: id,
                    pixel: Vector2::new(x, y),
                });
                landmarks.insert(id, Vector3::new(x, y, height));
            }
        }
        let faces = crate::mesher::triangulate_2d(&kps);
        lift_to_3d(&faces, &landmarks)
    }

    // Wall grid on the plane with outward normal at `azimuth`, distance d.
    fn vertical_grid_mesh(
        nx: usize,
        ny: usize,
        azimuth: f64,
        d: f64,
        first_id: LandmarkId,
    ) -> Mesh3D {
        let n = Vector3::new(azimuth.cos(), azimuth.sin(), 0.0);
        let t = Vector3::new(-azimuth.sin(), azimuth.cos(), 0.0);
        let up = Vector3::new(0.0, 0.0, 1.0);
        let mut kps = Vec::new();
        let mut landmarks = BTreeMap::new();
        for i in 0..nx {
            for j in 0..ny {
                let id = first_id + (i * ny + j) as u64;
                let (u, v) = (0.3 * i as f64 - 0.5, 0.3 * j as f64 - 0.5);
                kps.push(Keypoint {
                    landmark_id: id,
                    pixel: Vector2::new(u, v),
                });
                landmarks.insert(id, n * d + t * u + up * v);
            }
        }
        let faces = crate::mesher::triangulate_2d(&kps);
        lift_to_3d(&faces, &landmarks)
    }

    #[test]
    fn segmentation_by_normal() {
        let floor = horizontal_grid_mesh(2, 2, 0.0, 0);
        let (h, v) = segment_faces_by_normal(&floor, 10.0_f64.to_radians());
        assert_eq!(h.len(), 2);
        assert!(v.is_empty());

        let wall = vertical_grid_mesh(2, 2, 0.0, 3.0, 100);
        let (h, v) = segment_faces_by_normal(&wall, 10.0_f64.to_radians());
        assert!(h.is_empty());
        assert_eq!(v.len(), 2);

        // A 45 degree slope lands in neither cluster.
        let mut tilted = horizontal_grid_mesh(2, 2, 0.0, 200);
        for (_, p) in tilted.vertices.iter_mut() {
            p.z = p.x; // slope 1 along x
        }
        let (h, v) = segment_faces_by_normal(&tilted, 10.0_f64.to_radians());
        assert!(h.is_empty() && v.is_empty());
    }

    #[test]
    fn horizontal_detection_finds_table_height() {
        let mesh = horizontal_grid_mesh(5, 5, 2.0, 0); // 32 faces
        let params = DetectorParams::default();
        let (h, _) = segment_faces_by_normal(&mesh, params.angle_tol);
        assert!(h.len() >= 30);
        let candidates = detect_horizontal_planes(&h, &mesh, &params);
        assert_eq!(candidates.len(), 1);
        let c = &candidates[0];
        assert!((c.plane.distance() - 2.0).abs() <= params.height_bin);
        assert!(c.supporting_faces.len() >= params.min_support);
        assert_relative_eq!(c.plane.normal().vector().z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn below_support_threshold_is_dropped() {
        // 4x4 grid: 18 faces < 20 minimum support.
        let mesh = horizontal_grid_mesh(4, 4, 0.0, 0);
        let params = DetectorParams::default();
        let (h, _) = segment_faces_by_normal(&mesh, params.angle_tol);
        assert!(h.len() < 20);
        assert!(detect_horizontal_planes(&h, &mesh, &params).is_empty());
        // And the empty cluster yields nothing at all.
        assert!(detect_horizontal_planes(&BTreeSet::new(), &mesh, &params).is_empty());
    }

    #[test]
    fn vertical_detection_finds_wall() {
        let mesh = vertical_grid_mesh(6, 5, 0.0, 3.0, 0); // 40 faces
        let params = DetectorParams::default();
        let (_, v) = segment_faces_by_normal(&mesh, params.angle_tol);
        assert!(v.len() >= 25);
        let candidates = detect_vertical_planes(&v, &mesh, &params);
        assert_eq!(candidates.len(), 1);
        let c = &candidates[0];
        assert!((c.plane.distance() - 3.0).abs() <= params.distance_bin);
        let n = c.plane.normal().vector();
        assert!(n.x > 0.99 && n.z.abs() < 1e-9);
    }

    #[test]
    fn two_perpendicular_walls_give_two_candidates() {
        let a = vertical_grid_mesh(6, 5, 0.0, 3.0, 0);
        let b = vertical_grid_mesh(6, 5, std::f64::consts::FRAC_PI_2, 2.0, 1000);
        let combined = crate::mesher::update_mesh(&a, &b, &BTreeSet::new());
        let params = DetectorParams::default();
        let (_, v) = segment_faces_by_normal(&combined, params.angle_tol);
        let candidates = detect_vertical_planes(&v, &combined, &params);
        assert_eq!(candidates.len(), 2);
        // Horizontal-normal faces only: the horizontal detector sees nothing.
        let (h, _) = segment_faces_by_normal(&combined, params.angle_tol);
        assert!(h.is_empty());
    }

    #[test]
    fn azimuth_is_periodic() {
        let mesh = vertical_grid_mesh(6, 5, 1.1, 2.5, 0);
        let params = DetectorParams::default();
        let (_, v) = segment_faces_by_normal(&mesh, params.angle_tol);
        let base = detect_vertical_planes(&v, &mesh, &params);

        // Rotating every vertex by 2*pi about z is a numerical identity.
        let mut rotated = mesh.clone();
        let c = TAU.cos();
        let s = TAU.sin();
        for (_, p) in rotated.vertices.iter_mut() {
            *p = Vector3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z);
        }
        let (_, v2) = segment_faces_by_normal(&rotated, params.angle_tol);
        let again = detect_vertical_planes(&v2, &rotated, &params);
        assert_eq!(base.len(), again.len());
        for (x, y) in base.iter().zip(again.iter()) {
            let (angle, gap) = x.plane.gap_to(&y.plane);
            assert!(angle < 1e-9 && gap < 1e-9);
        }
    }

    #[test]
    fn association_is_union_of_face_vertices() {
        let f1 = Face::new(4, 7, 9).unwrap();
        let f2 = Face::new(7, 9, 11).unwrap();
        let up = UnitNormal::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let single = PlaneCandidate {
            plane: Plane::new(up, 0.0),
            supporting_faces: [f1].into_iter().collect(),
            supporting_landmarks: BTreeSet::new(),
        };
        assert_eq!(
            associate_landmarks(&single),
            [4, 7, 9].into_iter().collect()
        );
        let pair = PlaneCandidate {
            supporting_faces: [f1, f2].into_iter().collect(),
            ..single.clone()
        };
        assert_eq!(
            associate_landmarks(&pair),
            [4, 7, 9, 11].into_iter().collect()
        );
        let none = PlaneCandidate {
            supporting_faces: BTreeSet::new(),
            ..single
        };
        assert!(associate_landmarks(&none).is_empty());
    }

    #[test]
    fn matching_against_tracked_planes() {
        let up = UnitNormal::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let params = DetectorParams::default();
        let make = |plane: Plane| PlaneCandidate {
            plane,
            supporting_faces: BTreeSet::new(),
            supporting_landmarks: BTreeSet::new(),
        };

        let existing = vec![Plane::new(up, 1.0)];
        // Identical plane matches.
        let r = match_existing(vec![make(Plane::new(up, 1.0))], &existing, &params);
        assert_eq!(r.matched.len(), 1);
        assert!(r.new.is_empty());

        // 5 degrees and 5 cm away still matches under the defaults.
        let tilted = UnitNormal::new(Vector3::new(
            5.0_f64.to_radians().sin(),
            0.0,
            5.0_f64.to_radians().cos(),
        ))
        .unwrap();
        let r = match_existing(vec![make(Plane::new(tilted, 1.05))], &existing, &params);
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.matched[0].1, 0);

        // Perpendicular normal is a new plane.
        let x = UnitNormal::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let r = match_existing(vec![make(Plane::new(x, 1.0))], &existing, &params);
        assert!(r.matched.is_empty());
        assert_eq!(r.new.len(), 1);
    }

    #[test]
    fn noisy_multi_plane_recall() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let params = DetectorParams::default();
        // Floor at z = -1, wall at x = 3, wall at y = 2; 1 cm vertex noise.
        let mut mesh = horizontal_grid_mesh(6, 6, -1.0, 0);
        let w1 = vertical_grid_mesh(6, 6, 0.0, 3.0, 1000);
        let w2 = vertical_grid_mesh(6, 6, std::f64::consts::FRAC_PI_2, 2.0, 2000);
        mesh = crate::mesher::update_mesh(&mesh, &w1, &BTreeSet::new());
        mesh = crate::mesher::update_mesh(&mesh, &w2, &BTreeSet::new());
        for (_, p) in mesh.vertices.iter_mut() {
            for k in 0..3 {
                p[k] += 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        let (h, v) = segment_faces_by_normal(&mesh, params.angle_tol);
        let hc = detect_horizontal_planes(&h, &mesh, &params);
        let vc = detect_vertical_planes(&v, &mesh, &params);
        assert_eq!(hc.len(), 1);
        assert!((hc[0].plane.distance() + 1.0).abs() <= params.height_bin);
        assert_eq!(vc.len(), 2);
        for c in hc.iter().chain(vc.iter()) {
            assert!(c.supporting_faces.len() >= params.min_support);
        }
    }
}
