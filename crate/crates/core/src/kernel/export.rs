use std::fmt::Write as _;

use super::mesh::SolidMesh;
use super::KernelError;
use crate::model::Vec3;

fn facet_normal([a, b, c]: [Vec3; 3]) -> Vec3 {
    (b - a).cross(c - a).normalized().unwrap_or(Vec3::ZERO)
}

/// Binary STL: 80-byte header, triangle count, 50 bytes per facet.
pub fn export_stl_binary(mesh: &SolidMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    out.extend_from_slice(&[0u8; 80]);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in mesh.triangles_iter() {
        let n = facet_normal(t);
        for v in std::iter::once(n).chain(t) {
            for c in v.to_array() {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn export_stl_ascii(mesh: &SolidMesh, name: &str) -> String {
    let mut s = format!("solid {name}\n");
    for t in mesh.triangles_iter() {
        let n = facet_normal(t);
        let _ = writeln!(s, "  facet normal {:e} {:e} {:e}\n    outer loop", n.x, n.y, n.z);
        for v in t {
            let _ = writeln!(s, "      vertex {:e} {:e} {:e}", v.x, v.y, v.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}

/// Wavefront OBJ with shared vertices and 1-based faces.
pub fn export_obj(mesh: &SolidMesh) -> String {
    let m = mesh.compact();
    let mut s = String::new();
    for v in &m.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &m.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// Reads binary or ASCII STL and welds coincident vertices.
pub fn import_stl(bytes: &[u8]) -> Result<SolidMesh, KernelError> {
    let bad = |m: &str| KernelError::InvalidProgram(format!("STL: {m}"));
    let binary_len = |n: usize| 84 + 50 * n;
    let soup: Vec<[Vec3; 3]> = if bytes.len() >= 84
        && binary_len(u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize) == bytes.len()
    {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
        (0..n)
            .map(|i| {
                let base = 84 + 50 * i + 12;
                [0, 1, 2].map(|k| {
                    let o = base + 12 * k;
                    Vec3::new(f(o), f(o + 4), f(o + 8))
                })
            })
            .collect()
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| bad("neither binary nor UTF-8 text"))?;
        let mut verts = Vec::new();
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if it.next() == Some("vertex") {
                let c: Vec<f64> = it.map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                verts.push(Vec3::new(c[0], c[1], c[2]));
            }
        }
        if verts.len() % 3 != 0 {
            return Err(bad("vertex count is not a multiple of 3"));
        }
        verts.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    };
    let scale = soup
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.x.abs()).max(v.y.abs()).max(v.z.abs()));
    Ok(SolidMesh::from_soup(&soup, (scale * 1e-6).max(1e-12)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::mesh::tests::cuboid;
    use crate::kernel::mesh_metrics;

    #[test]
    fn binary_layout() {
        let m = cuboid(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        let b = export_stl_binary(&m);
        assert_eq!(b.len(), 84 + 50 * 12);
        assert_eq!(&b[..80], &[0u8; 80]);
        assert_eq!(u32::from_le_bytes(b[80..84].try_into().unwrap()), 12);
    }

    #[test]
    fn roundtrips() {
        let m = cuboid(Vec3::new(-1.0, 0.5, 2.0), Vec3::new(1.0, 1.5, 4.0));
        for back in [import_stl(&export_stl_binary(&m)).unwrap(), import_stl(export_stl_ascii(&m, "box").as_bytes()).unwrap()] {
            let (a, b) = (mesh_metrics(&m), mesh_metrics(&back));
            assert_eq!(b.vertices, 8);
            assert!(b.is_manifold);
            assert!((a.volume - b.volume).abs() < 1e-5);
        }
    }

    #[test]
    fn obj_faces_are_one_based() {
        let s = export_obj(&cuboid(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)));
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert!(s.lines().filter(|l| l.starts_with("f ")).all(|l| !l.split(' ').any(|t| t == "0")));
    }
}
