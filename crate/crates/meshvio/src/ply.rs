//! ASCII PLY export for meshes and point clouds.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::mesher::Mesh3D;

/// Renders the mesh as ASCII PLY. Vertex indices are remapped densely in
/// ascending landmark-id order.
pub fn mesh_to_ply(mesh: &Mesh3D) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str(&format!("element face {}\n", mesh.faces.len()));
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut index = std::collections::BTreeMap::new();
    for (i, (id, p)) in mesh.vertices.iter().enumerate() {
        index.insert(*id, i);
        out.push_str(&format!("{:.9e} {:.9e} {:.9e}\n", p.x, p.y, p.z));
    }
    for f in &mesh.faces {
        let [a, b, c] = f.ids();
        out.push_str(&format!("3 {} {} {}\n", index[&a], index[&b], index[&c]));
    }
    out
}

pub fn write_mesh_ply(path: &Path, mesh: &Mesh3D) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(mesh_to_ply(mesh).as_bytes())
}

/// Renders a point cloud as ASCII PLY.
pub fn cloud_to_ply(points: &[Vector3<f64>]) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", points.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in points {
        out.push_str(&format!("{:.9e} {:.9e} {:.9e}\n", p.x, p.y, p.z));
    }
    out
}

pub fn write_cloud_ply(path: &Path, points: &[Vector3<f64>]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(cloud_to_ply(points).as_bytes())
}
