//! Ear clipping for polygons with holes.
//!
//! Collinear vertices are kept (never clipped away) so that the result
//! shares every boundary vertex with neighbouring geometry.

use super::tessellate::{signed_area, tessellate_loop, Polyline2};
use super::KernelError;
use crate::model::{Profile, Vec2};

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2, eps: f64) -> bool {
    orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps
}

fn segments_cross_or_touch(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2, eps: f64) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    (((d1 > eps) && (d2 < -eps)) || ((d1 < -eps) && (d2 > eps))) && (((d3 > eps) && (d4 < -eps)) || ((d3 < -eps) && (d4 > eps)))
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2, eps: f64) -> bool {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return false;
    }
    let t = (p - a).dot(ab) / l2;
    t > 0.0 && t < 1.0 && orient(a, b, p).abs() <= eps * l2.sqrt()
}

struct Rings<'a> {
    pts: &'a [Vec2],
    eps_area: f64,
    eps_len: f64,
}

impl Rings<'_> {
    /// Whether the direction from ring position `j` towards `m` points into the
    /// polygon interior (left of both incident edges).
    fn locally_inside(&self, ring: &[usize], j: usize, m: Vec2) -> bool {
        let n = ring.len();
        let a = self.pts[ring[(j + n - 1) % n]];
        let p = self.pts[ring[j]];
        let c = self.pts[ring[(j + 1) % n]];
        let left1 = orient(a, p, m) > self.eps_area;
        let left2 = orient(p, c, m) > self.eps_area;
        if orient(a, p, c) >= 0.0 {
            left1 && left2
        } else {
            left1 || left2
        }
    }

    fn visible(&self, m: Vec2, p: Vec2, rings: &[&[usize]]) -> bool {
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let (a, b) = (self.pts[ring[i]], self.pts[ring[(i + 1) % n]]);
                if segments_cross_or_touch(m, p, a, b, self.eps_area) {
                    return false;
                }
                if a != m && a != p && on_segment(a, m, p, self.eps_len) {
                    return false;
                }
            }
        }
        true
    }

    /// Ring position of a vertex that `m` can be joined to with a bridge.
    fn find_bridge(&self, ring: &[usize], m: Vec2, others: &[&[usize]]) -> Option<usize> {
        let mut order: Vec<usize> = (0..ring.len()).collect();
        order.sort_by(|&i, &j| {
            let di = self.pts[ring[i]].distance(m);
            let dj = self.pts[ring[j]].distance(m);
            di.total_cmp(&dj).then(i.cmp(&j))
        });
        let mut blockers: Vec<&[usize]> = vec![ring];
        blockers.extend_from_slice(others);
        order.into_iter().find(|&j| {
            let p = self.pts[ring[j]];
            p != m && self.locally_inside(ring, j, m) && self.visible(m, p, &blockers)
        })
    }

    fn is_ear(&self, idx: &[usize], i: usize) -> bool {
        let n = idx.len();
        let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
        let (a, b, c) = (self.pts[ia], self.pts[ib], self.pts[ic]);
        if orient(a, b, c) <= self.eps_area {
            return false;
        }
        for k in 0..n {
            let p = self.pts[idx[k]];
            if p == a || p == b || p == c {
                continue;
            }
            if on_segment(p, c, a, self.eps_len) {
                return false;
            }
            let pa = self.pts[idx[(k + n - 1) % n]];
            let pc = self.pts[idx[(k + 1) % n]];
            if orient(pa, p, pc) > self.eps_area {
                continue; // convex vertices cannot be the first thing inside an ear
            }
            if in_triangle(p, a, b, c, self.eps_area) {
                return false;
            }
        }
        true
    }
}

/// Triangulates an outer ring with holes.
///
/// Returned indices refer to the concatenation of all rings in input order;
/// triangles are counter-clockwise regardless of the input ring orientations.
pub fn triangulate_rings(rings: &[&[Vec2]]) -> Result<Vec<[usize; 3]>, KernelError> {
    let Some(outer) = rings.first() else { return Ok(Vec::new()) };
    if outer.len() < 3 {
        return Err(KernelError::TriangulationFailure("outer ring has fewer than 3 points".into()));
    }
    let pts: Vec<Vec2> = rings.iter().flat_map(|r| r.iter().copied()).collect();
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        lo = Vec2::new(lo.u.min(p.u), lo.v.min(p.v));
        hi = Vec2::new(hi.u.max(p.u), hi.v.max(p.v));
    }
    let scale = lo.distance(hi).max(f64::MIN_POSITIVE);
    let ctx = Rings { pts: &pts, eps_area: 1e-14 * scale * scale, eps_len: 1e-12 * scale };

    let mut offset = 0;
    let mut index_rings: Vec<Vec<usize>> = Vec::new();
    for (k, r) in rings.iter().enumerate() {
        let mut ids: Vec<usize> = (offset..offset + r.len()).collect();
        offset += r.len();
        let area = signed_area(r);
        if (k == 0 && area < 0.0) || (k > 0 && area > 0.0) {
            ids.reverse();
        }
        index_rings.push(ids);
    }
    let mut ring = index_rings.remove(0);
    let mut holes = index_rings;
    holes.retain(|h| h.len() >= 3);
    // rightmost holes first
    let max_u = |h: &Vec<usize>| h.iter().map(|&i| pts[i].u).fold(f64::NEG_INFINITY, f64::max);
    holes.sort_by(|a, b| max_u(b).total_cmp(&max_u(a)));

    for h in 0..holes.len() {
        let hole = &holes[h];
        let m_pos = (0..hole.len())
            .max_by(|&i, &j| pts[hole[i]].u.total_cmp(&pts[hole[j]].u).then(pts[hole[j]].v.total_cmp(&pts[hole[i]].v)))
            .unwrap();
        let m = pts[hole[m_pos]];
        let others: Vec<&[usize]> = holes.iter().skip(h).map(|v| v.as_slice()).collect();
        let p_pos = ctx
            .find_bridge(&ring, m, &others)
            .ok_or_else(|| KernelError::TriangulationFailure("no visible bridge for hole".into()))?;
        let mut merged = Vec::with_capacity(ring.len() + hole.len() + 2);
        merged.extend_from_slice(&ring[..=p_pos]);
        merged.extend(hole[m_pos..].iter().chain(&hole[..m_pos]).copied());
        merged.push(hole[m_pos]);
        merged.push(ring[p_pos]);
        merged.extend_from_slice(&ring[p_pos + 1..]);
        ring = merged;
    }

    clip_ears(&ctx, ring)
}

fn clip_ears(ctx: &Rings<'_>, mut idx: Vec<usize>) -> Result<Vec<[usize; 3]>, KernelError> {
    let mut tris = Vec::with_capacity(idx.len().saturating_sub(2));
    let mut cursor = 0;
    while idx.len() > 3 {
        let n = idx.len();
        let ear = (0..n).map(|k| (cursor + k) % n).find(|&i| ctx.is_ear(&idx, i));
        let i = match ear {
            Some(i) => i,
            None => {
                // numerical trouble: clip the most convex vertex anyway
                let best = (0..n)
                    .map(|i| {
                        let (a, b, c) = (ctx.pts[idx[(i + n - 1) % n]], ctx.pts[idx[i]], ctx.pts[idx[(i + 1) % n]]);
                        (i, orient(a, b, c))
                    })
                    .filter(|&(_, area)| area > ctx.eps_area)
                    .max_by(|x, y| x.1.total_cmp(&y.1));
                match best {
                    Some((i, _)) => i,
                    None => {
                        if signed_area(&idx.iter().map(|&k| ctx.pts[k]).collect::<Vec<_>>()).abs() <= ctx.eps_area {
                            return Err(KernelError::TriangulationFailure("remaining polygon is degenerate".into()));
                        }
                        return Err(KernelError::TriangulationFailure("no convex vertex left".into()));
                    }
                }
            }
        };
        tris.push([idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]]);
        idx.remove(i);
        cursor = if i == 0 { 0 } else { i - 1 };
    }
    if idx.len() == 3 {
        let (a, b, c) = (ctx.pts[idx[0]], ctx.pts[idx[1]], ctx.pts[idx[2]]);
        if orient(a, b, c) > ctx.eps_area {
            tris.push([idx[0], idx[1], idx[2]]);
        } else if orient(a, b, c) < -ctx.eps_area {
            return Err(KernelError::TriangulationFailure("inverted final triangle".into()));
        }
    }
    Ok(tris)
}

/// One material region of a profile, triangulated.
#[derive(Clone, Debug)]
pub struct RegionTriangles {
    /// Outer ring (counter-clockwise) followed by hole rings (clockwise).
    pub rings: Vec<Polyline2>,
    /// Indices into the concatenated ring points.
    pub triangles: Vec<[usize; 3]>,
}

impl RegionTriangles {
    pub fn points(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.rings.iter().flat_map(|r| r.points.iter().copied())
    }

    pub fn area(&self) -> f64 {
        let pts: Vec<Vec2> = self.points().collect();
        self.triangles.iter().map(|t| 0.5 * orient(pts[t[0]], pts[t[1]], pts[t[2]])).sum()
    }
}

/// Triangulates every material region of a profile (even depth = material).
pub fn triangulate_profile(profile: &Profile, chord_tol: f64) -> Result<Vec<RegionTriangles>, KernelError> {
    let polys: Vec<Polyline2> = profile
        .loops()
        .iter()
        .map(|l| tessellate_loop(l, chord_tol))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (outer, holes) in profile.regions() {
        let mut rings = vec![polys[outer].clone()];
        rings.extend(holes.iter().map(|&h| polys[h].clone()));
        for (k, r) in rings.iter_mut().enumerate() {
            let a = r.signed_area();
            if (k == 0 && a < 0.0) || (k > 0 && a > 0.0) {
                r.points.reverse();
            }
        }
        let slices: Vec<&[Vec2]> = rings.iter().map(|r| r.points.as_slice()).collect();
        let triangles = triangulate_rings(&slices)?;
        out.push(RegionTriangles { rings, triangles });
    }
    Ok(out)
}

/// Total triangle area over all regions.
pub fn triangulated_area(regions: &[RegionTriangles]) -> f64 {
    regions.iter().map(RegionTriangles::area).sum()
}
