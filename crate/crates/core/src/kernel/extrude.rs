use super::mesh::SolidMesh;
use super::triangulate::triangulate_profile;
use super::{ChordTol, KernelError};
use crate::model::{Extrusion, Sketch, EPS_DEGENERATE};

/// Prism of a sketch between two offsets along its plane normal.
///
/// `chord_tol` is in unplaced sketch units. Each material region contributes
/// a bottom cap, a top cap and one quad per ring edge.
pub fn extrude(sketch: &Sketch, w0: f64, w1: f64, chord_tol: f64) -> Result<SolidMesh, KernelError> {
    if !(w1 - w0 > EPS_DEGENERATE) || !w0.is_finite() || !w1.is_finite() {
        return Err(KernelError::DegenerateExtent(w1 - w0));
    }
    if !(sketch.size > 0.0) || !sketch.size.is_finite() {
        return Err(KernelError::InvalidProgram(format!("sketch size {} must be positive", sketch.size)));
    }
    let regions = triangulate_profile(&sketch.profile, chord_tol)?;
    let mut mesh = SolidMesh::default();
    for region in &regions {
        let pts: Vec<_> = region.points().collect();
        let n = pts.len() as u32;
        let base = mesh.vertices.len() as u32;
        mesh.vertices.extend(pts.iter().map(|&p| sketch.to_world(p, w0)));
        mesh.vertices.extend(pts.iter().map(|&p| sketch.to_world(p, w1)));
        for t in &region.triangles {
            let [a, b, c] = t.map(|i| base + i as u32);
            mesh.triangles.push([a, c, b]);
            mesh.triangles.push([a + n, b + n, c + n]);
        }
        let mut start = 0u32;
        for ring in &region.rings {
            let m = ring.points.len() as u32;
            for i in 0..m {
                let b0 = base + start + i;
                let b1 = base + start + (i + 1) % m;
                mesh.triangles.push([b0, b1, b1 + n]);
                mesh.triangles.push([b0, b1 + n, b0 + n]);
            }
            start += m;
        }
    }
    if mesh.triangles.is_empty() {
        return Err(KernelError::TriangulationFailure("profile has no material region".into()));
    }
    Ok(mesh)
}

/// Extrudes a resolved sketch according to an extrusion's extent.
pub fn extrude_sketch(sketch: &Sketch, extrusion: &Extrusion, chord: ChordTol) -> Result<SolidMesh, KernelError> {
    let (w0, w1) = extrusion.span();
    extrude(sketch, w0, w1, sketch.chord_tol(chord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::mesh_metrics;
    use crate::model::{classify_profile, Curve, Loop, SketchPlane, Vec2, Vec3};
    use std::f64::consts::PI;

    fn sketch_of(loops: Vec<Loop>, plane: SketchPlane) -> Sketch {
        Sketch { plane, profile: classify_profile(loops, 0.01).unwrap(), position: Vec2::ZERO, size: 1.0 }
    }

    fn square(x: f64, y: f64, s: f64) -> Loop {
        let p = [Vec2::new(x, y), Vec2::new(x + s, y), Vec2::new(x + s, y + s), Vec2::new(x, y + s)];
        Loop::new((0..4).map(|i| Curve::line(p[i], p[(i + 1) % 4])).collect())
    }

    #[test]
    fn unit_cube() {
        let sk = sketch_of(vec![square(0.0, 0.0, 1.0)], SketchPlane::xy(Vec3::ZERO));
        let m = mesh_metrics(&extrude(&sk, 0.0, 1.0, 0.01).unwrap());
        assert!((m.volume - 1.0).abs() < 1e-12);
        assert!(m.is_manifold);
        assert_eq!(m.euler_characteristic, 2);
    }

    #[test]
    fn tube_has_genus_one() {
        let loops = vec![Loop::new(vec![Curve::circle(Vec2::ZERO, 2.0)]), Loop::new(vec![Curve::circle(Vec2::ZERO, 1.0)])];
        let sk = sketch_of(loops, SketchPlane::xy(Vec3::ZERO));
        let mesh = extrude(&sk, -0.5, 0.5, 0.005).unwrap();
        let m = mesh_metrics(&mesh);
        assert!(m.is_manifold);
        assert_eq!(m.euler_characteristic, 0);
        assert!((m.volume - 3.0 * PI).abs() / (3.0 * PI) < 0.01);
    }

    #[test]
    fn tilted_plane_keeps_outward_orientation() {
        let plane = SketchPlane::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let sk = Sketch { position: Vec2::new(0.5, 0.0), size: 2.0, ..sketch_of(vec![square(0.0, 0.0, 1.0)], plane) };
        let m = mesh_metrics(&extrude(&sk, 0.0, 0.25, 0.01).unwrap());
        assert!((m.volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_extent_rejected() {
        let sk = sketch_of(vec![square(0.0, 0.0, 1.0)], SketchPlane::xy(Vec3::ZERO));
        assert!(matches!(extrude(&sk, 0.0, 0.0, 0.01), Err(KernelError::DegenerateExtent(_))));
    }
}
