//! Boolean operations on closed meshes with binary space partitioning trees.
//!
//! Inputs are mapped into a unit-sized frame first so that the fixed
//! tolerances below are scale independent. Output polygons are welded,
//! T-junctions are repaired by inserting vertices on edges, and the result
//! is re-triangulated and checked for edge manifoldness.

use std::collections::HashMap;

use super::mesh::{SolidMesh, Welder};
use super::triangulate::triangulate_rings;
use super::KernelError;
use crate::model::{Vec2, Vec3};

const PLANE_EPS: f64 = 1e-8;
const WELD_EPS: f64 = 1e-7;
const STACK_BYTES: usize = 512 << 20;
const ATTEMPTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BooleanOp {
    Union,
    Difference,
    Intersection,
}

#[derive(Clone, Copy, Debug)]
struct Plane {
    n: Vec3,
    w: f64,
}

impl Plane {
    fn from_points(a: Vec3, b: Vec3, c: Vec3) -> Option<Plane> {
        let n = (b - a).cross(c - a).normalized()?;
        Some(Plane { n, w: n.dot(a) })
    }

    fn flip(&mut self) {
        self.n = -self.n;
        self.w = -self.w;
    }
}

#[derive(Clone, Debug)]
struct Poly {
    v: Vec<Vec3>,
    plane: Plane,
}

impl Poly {
    fn flip(&mut self) {
        self.v.reverse();
        self.plane.flip();
    }
}

const COPLANAR: u8 = 0;
const FRONT: u8 = 1;
const BACK: u8 = 2;
const SPANNING: u8 = 3;

fn split(plane: &Plane, poly: Poly, cf: &mut Vec<Poly>, cb: &mut Vec<Poly>, front: &mut Vec<Poly>, back: &mut Vec<Poly>) {
    let mut kind = 0u8;
    let mut types = Vec::with_capacity(poly.v.len());
    for &v in &poly.v {
        let t = plane.n.dot(v) - plane.w;
        let ty = if t < -PLANE_EPS {
            BACK
        } else if t > PLANE_EPS {
            FRONT
        } else {
            COPLANAR
        };
        kind |= ty;
        types.push(ty);
    }
    match kind {
        COPLANAR => {
            if plane.n.dot(poly.plane.n) > 0.0 {
                cf.push(poly)
            } else {
                cb.push(poly)
            }
        }
        FRONT => front.push(poly),
        BACK => back.push(poly),
        _ => {
            let n = poly.v.len();
            let (mut f, mut b) = (Vec::new(), Vec::new());
            for i in 0..n {
                let j = (i + 1) % n;
                let (ti, tj) = (types[i], types[j]);
                let (vi, vj) = (poly.v[i], poly.v[j]);
                if ti != BACK {
                    f.push(vi);
                }
                if ti != FRONT {
                    b.push(vi);
                }
                if ti | tj == SPANNING {
                    let t = (plane.w - plane.n.dot(vi)) / plane.n.dot(vj - vi);
                    let v = vi.lerp(vj, t);
                    f.push(v);
                    b.push(v);
                }
            }
            if f.len() >= 3 {
                front.push(Poly { v: f, plane: poly.plane });
            }
            if b.len() >= 3 {
                back.push(Poly { v: b, plane: poly.plane });
            }
        }
    }
}

#[derive(Default)]
struct Node {
    plane: Option<Plane>,
    front: Option<Box<Node>>,
    back: Option<Box<Node>>,
    polys: Vec<Poly>,
}

impl Node {
    fn new(polys: Vec<Poly>) -> Node {
        let mut n = Node::default();
        n.build(polys);
        n
    }

    fn build(&mut self, polys: Vec<Poly>) {
        let mut polys = polys.into_iter();
        let mut own = std::mem::take(&mut self.polys);
        let plane = match self.plane {
            Some(pl) => pl,
            None => {
                let Some(first) = polys.next() else { return };
                let pl = first.plane;
                self.plane = Some(pl);
                own.push(first);
                pl
            }
        };
        let (mut f, mut b) = (Vec::new(), Vec::new());
        let mut own_back = Vec::new();
        for p in polys {
            split(&plane, p, &mut own, &mut own_back, &mut f, &mut b);
        }
        own.append(&mut own_back);
        self.polys = own;
        if !f.is_empty() {
            self.front.get_or_insert_with(Default::default).build(f);
        }
        if !b.is_empty() {
            self.back.get_or_insert_with(Default::default).build(b);
        }
    }

    fn invert(&mut self) {
        for p in &mut self.polys {
            p.flip();
        }
        if let Some(pl) = &mut self.plane {
            pl.flip();
        }
        if let Some(f) = &mut self.front {
            f.invert();
        }
        if let Some(b) = &mut self.back {
            b.invert();
        }
        std::mem::swap(&mut self.front, &mut self.back);
    }

    fn clip_polygons(&self, polys: Vec<Poly>) -> Vec<Poly> {
        let Some(plane) = self.plane else { return polys };
        let (mut f, mut b) = (Vec::new(), Vec::new());
        let (mut cf, mut cb) = (Vec::new(), Vec::new());
        for p in polys {
            split(&plane, p, &mut cf, &mut cb, &mut f, &mut b);
        }
        f.append(&mut cf);
        b.append(&mut cb);
        let mut f = match &self.front {
            Some(n) => n.clip_polygons(f),
            None => f,
        };
        let b = match &self.back {
            Some(n) => n.clip_polygons(b),
            None => Vec::new(),
        };
        f.extend(b);
        f
    }

    fn clip_to(&mut self, other: &Node) {
        self.polys = other.clip_polygons(std::mem::take(&mut self.polys));
        if let Some(f) = &mut self.front {
            f.clip_to(other);
        }
        if let Some(b) = &mut self.back {
            b.clip_to(other);
        }
    }

    fn all_polygons(&self, out: &mut Vec<Poly>) {
        out.extend(self.polys.iter().cloned());
        if let Some(f) = &self.front {
            f.all_polygons(out);
        }
        if let Some(b) = &self.back {
            b.all_polygons(out);
        }
    }

    fn into_polygons(self) -> Vec<Poly> {
        let mut out = Vec::new();
        self.all_polygons(&mut out);
        out
    }
}

fn polys_of(mesh: &SolidMesh, to_unit: &impl Fn(Vec3) -> Vec3) -> Vec<Poly> {
    mesh.triangles_iter()
        .filter_map(|t| {
            let v = t.map(to_unit);
            Plane::from_points(v[0], v[1], v[2]).map(|plane| Poly { v: v.to_vec(), plane })
        })
        .collect()
}

fn run_bsp(op: BooleanOp, a: Vec<Poly>, b: Vec<Poly>) -> Vec<Poly> {
    let mut a = Node::new(a);
    let mut b = Node::new(b);
    match op {
        BooleanOp::Union => {
            a.clip_to(&b);
            b.clip_to(&a);
            b.invert();
            b.clip_to(&a);
            b.invert();
            a.build(b.into_polygons());
        }
        BooleanOp::Difference => {
            a.invert();
            a.clip_to(&b);
            b.clip_to(&a);
            b.invert();
            b.clip_to(&a);
            b.invert();
            a.build(b.into_polygons());
            a.invert();
        }
        BooleanOp::Intersection => {
            a.invert();
            b.clip_to(&a);
            b.invert();
            a.clip_to(&b);
            b.clip_to(&a);
            a.build(b.into_polygons());
            a.invert();
        }
    }
    a.into_polygons()
}

fn disjoint(a: (Vec3, Vec3), b: (Vec3, Vec3)) -> bool {
    (0..3).any(|i| a.1.axis(i) < b.0.axis(i) || b.1.axis(i) < a.0.axis(i))
}

/// Boolean combination of two closed, outward-oriented meshes.
pub fn csg(a: &SolidMesh, b: &SolidMesh, op: BooleanOp) -> Result<SolidMesh, KernelError> {
    let (Some(ba), Some(bb)) = (a.aabb(), b.aabb()) else {
        return Ok(match op {
            BooleanOp::Union if a.is_empty() => b.clone(),
            BooleanOp::Union | BooleanOp::Difference => a.clone(),
            BooleanOp::Intersection => SolidMesh::default(),
        });
    };
    if disjoint(ba, bb) {
        return Ok(match op {
            BooleanOp::Union => {
                let mut m = a.clone();
                m.append(b);
                m.compact()
            }
            BooleanOp::Difference => a.clone(),
            BooleanOp::Intersection => SolidMesh::default(),
        });
    }
    let lo = ba.0.min(bb.0);
    let hi = ba.1.max(bb.1);
    let center = (lo + hi) * 0.5;
    let scale = match lo.distance(hi) {
        d if d > 0.0 && d.is_finite() => d,
        _ => return Err(KernelError::BooleanFailure("operands have no finite extent".into())),
    };
    let to_unit = move |v: Vec3| (v - center) / scale;
    let pa = polys_of(a, &to_unit);
    let pb = polys_of(b, &to_unit);
    let mut last = None;
    for attempt in 0..ATTEMPTS {
        let (mut pa, mut pb) = (pa.clone(), pb.clone());
        if attempt > 0 {
            let (sa, sb) = (pa.len() * attempt / ATTEMPTS, pb.len() * attempt / ATTEMPTS);
            pa.rotate_left(sa);
            pb.rotate_left(sb);
        }
        let polys = std::thread::scope(|s| {
            std::thread::Builder::new()
                .stack_size(STACK_BYTES)
                .spawn_scoped(s, move || run_bsp(op, pa, pb))
                .map_err(|e| KernelError::BooleanFailure(format!("cannot start worker: {e}")))?
                .join()
                .map_err(|_| KernelError::BooleanFailure("partitioning panicked".into()))
        })?;
        match polygons_to_mesh(&polys) {
            Ok(mesh) => return Ok(mesh.map_vertices(|v| v * scale + center)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Welds, repairs T-junctions, triangulates and validates BSP output.
fn polygons_to_mesh(polys: &[Poly]) -> Result<SolidMesh, KernelError> {
    let mut welder = Welder::new(WELD_EPS);
    let mut rings: Vec<(Vec<u32>, Vec3)> = Vec::with_capacity(polys.len());
    for p in polys {
        let mut ids: Vec<u32> = Vec::with_capacity(p.v.len());
        for &v in &p.v {
            let id = welder.id(v);
            if ids.last() != Some(&id) {
                ids.push(id);
            }
        }
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        if ids.len() >= 3 {
            rings.push((ids, p.plane.n));
        }
    }
    let verts = welder.into_vertices();
    if rings.is_empty() {
        return Ok(SolidMesh::default());
    }

    let mut by_x: Vec<u32> = (0..verts.len() as u32).collect();
    by_x.sort_by(|&i, &j| verts[i as usize].x.total_cmp(&verts[j as usize].x));
    let xs: Vec<f64> = by_x.iter().map(|&i| verts[i as usize].x).collect();
    let on_edge = |a: u32, b: u32, ring: &[u32]| -> Vec<u32> {
        let (pa, pb) = (verts[a as usize], verts[b as usize]);
        let d = pb - pa;
        let l2 = d.norm_sq();
        let (x0, x1) = (pa.x.min(pb.x) - WELD_EPS, pa.x.max(pb.x) + WELD_EPS);
        let lo = xs.partition_point(|&x| x < x0);
        let hi = xs.partition_point(|&x| x <= x1);
        let mut hits: Vec<(f64, u32)> = Vec::new();
        for &k in &by_x[lo..hi] {
            if k == a || k == b || ring.contains(&k) {
                continue;
            }
            let p = verts[k as usize];
            let t = (p - pa).dot(d) / l2;
            if t <= 0.0 || t >= 1.0 {
                continue;
            }
            if (pa + d * t).distance(p) <= WELD_EPS {
                hits.push((t, k));
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits.into_iter().map(|(_, k)| k).collect()
    };

    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for (ring, normal) in &rings {
        let n = ring.len();
        let mut full: Vec<u32> = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            full.push(a);
            for k in on_edge(a, b, ring) {
                if !full.contains(&k) {
                    full.push(k);
                }
            }
        }
        let drop = (0..3).max_by(|&i, &j| normal.axis(i).abs().total_cmp(&normal.axis(j).abs())).unwrap();
        let (ax, ay) = ((drop + 1) % 3, (drop + 2) % 3);
        let mut pts: Vec<Vec2> = full.iter().map(|&k| Vec2::new(verts[k as usize].axis(ax), verts[k as usize].axis(ay))).collect();
        let area = super::tessellate::signed_area(&pts);
        if area.abs() <= 1e-14 {
            continue;
        }
        let flip = area < 0.0;
        if flip {
            pts.reverse();
            full.reverse();
        }
        let tris = triangulate_rings(&[&pts]).map_err(|e| KernelError::BooleanFailure(format!("re-triangulation: {e}")))?;
        for [i, j, k] in tris {
            let t = [full[i], full[j], full[k]];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            triangles.push(if flip { [t[0], t[2], t[1]] } else { t });
        }
    }

    cancel_opposites(&mut triangles);
    let mesh = SolidMesh { vertices: verts, triangles }.compact();
    if mesh.is_empty() {
        return Ok(mesh);
    }
    if !mesh.is_edge_manifold() {
        return Err(KernelError::BooleanFailure("result is not edge-manifold".into()));
    }
    Ok(mesh)
}

/// Removes pairs of coincident triangles with opposite winding.
fn cancel_opposites(tris: &mut Vec<[u32; 3]>) {
    let canon = |t: [u32; 3]| {
        let r = (0..3).min_by_key(|&i| t[i]).unwrap();
        [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
    };
    let mut seen: HashMap<[u32; 3], Vec<usize>> = HashMap::new();
    for (i, &t) in tris.iter().enumerate() {
        seen.entry(canon(t)).or_default().push(i);
    }
    let mut dead = vec![false; tris.len()];
    for (i, &t) in tris.iter().enumerate() {
        if dead[i] {
            continue;
        }
        let rev = canon([t[0], t[2], t[1]]);
        if let Some(list) = seen.get_mut(&rev) {
            if let Some(pos) = list.iter().position(|&j| !dead[j] && j != i) {
                let j = list.remove(pos);
                dead[i] = true;
                dead[j] = true;
            }
        }
    }
    let mut k = 0;
    tris.retain(|_| {
        k += 1;
        !dead[k - 1]
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::mesh::tests::cuboid;
    use crate::kernel::mesh_metrics;

    fn b(lo: [f64; 3], hi: [f64; 3]) -> SolidMesh {
        cuboid(Vec3::from_array(lo), Vec3::from_array(hi))
    }

    fn check(m: &SolidMesh, volume: f64) {
        let met = mesh_metrics(m);
        assert!(met.is_manifold, "not manifold");
        assert!((met.volume - volume).abs() < 1e-9, "volume {} vs {volume}", met.volume);
    }

    #[test]
    fn overlapping_boxes() {
        let a = b([0.0; 3], [2.0, 2.0, 2.0]);
        let c = b([1.0, 1.0, 1.0], [3.0, 3.0, 3.0]);
        check(&csg(&a, &c, BooleanOp::Union).unwrap(), 15.0);
        check(&csg(&a, &c, BooleanOp::Difference).unwrap(), 7.0);
        check(&csg(&a, &c, BooleanOp::Intersection).unwrap(), 1.0);
    }

    #[test]
    fn through_hole_changes_topology() {
        let plate = b([0.0, 0.0, 0.0], [4.0, 4.0, 1.0]);
        let tool = b([1.0, 1.0, -1.0], [2.0, 2.0, 2.0]);
        let r = csg(&plate, &tool, BooleanOp::Difference).unwrap();
        check(&r, 15.0);
        assert_eq!(mesh_metrics(&r).euler_characteristic, 0);
    }

    #[test]
    fn coplanar_faces_merge() {
        let a = b([0.0; 3], [1.0, 1.0, 1.0]);
        let c = b([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let u = csg(&a, &c, BooleanOp::Union).unwrap();
        check(&u, 2.0);
        assert_eq!(mesh_metrics(&u).euler_characteristic, 2);
    }

    #[test]
    fn identical_operands() {
        let a = b([0.0; 3], [1.0, 2.0, 3.0]);
        check(&csg(&a, &a, BooleanOp::Union).unwrap(), 6.0);
        check(&csg(&a, &a, BooleanOp::Intersection).unwrap(), 6.0);
        assert!(csg(&a, &a, BooleanOp::Difference).unwrap().is_empty());
    }

    #[test]
    fn disjoint_shortcuts() {
        let a = b([0.0; 3], [1.0, 1.0, 1.0]);
        let c = b([5.0; 3], [6.0, 6.0, 6.0]);
        check(&csg(&a, &c, BooleanOp::Union).unwrap(), 2.0);
        check(&csg(&a, &c, BooleanOp::Difference).unwrap(), 1.0);
        assert!(csg(&a, &c, BooleanOp::Intersection).unwrap().is_empty());
    }

    #[test]
    fn tiny_and_huge_scales() {
        for s in [1e-3, 1e4] {
            let a = b([0.0; 3], [2.0 * s, 2.0 * s, 2.0 * s]);
            let c = b([s, s, s], [3.0 * s, 3.0 * s, 3.0 * s]);
            let m = mesh_metrics(&csg(&a, &c, BooleanOp::Union).unwrap());
            assert!(m.is_manifold);
            assert!((m.volume / (s * s * s) - 15.0).abs() < 1e-6);
        }
    }
}
