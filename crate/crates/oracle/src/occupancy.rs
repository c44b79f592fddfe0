use std::f64::consts::TAU;

use ecad_core::convert::{ExternalEntity, ExternalRecord, ExternalStep};
use ecad_core::kernel::{classify_grid, ChordTol, SolidMesh};
use ecad_core::model::{CadProgram, Command, Curve, ExtentType, Operation, PlaneDef, Vec2, Vec3};

/// Exact sketch boundary piece in unplaced sketch coordinates.
#[derive(Clone, Copy, Debug)]
pub enum Seg {
    Line { a: Vec2, b: Vec2 },
    /// Signed sweep from `a0`; positive is counter-clockwise.
    Arc { c: Vec2, r: f64, a0: f64, sweep: f64 },
    Circle { c: Vec2, r: f64 },
}

fn angle_of(p: Vec2, c: Vec2) -> f64 {
    (p.v - c.v).atan2(p.u - c.u)
}

fn three_point_center(a: Vec2, b: Vec2, c: Vec2) -> Option<Vec2> {
    let d = 2.0 * (a.u * (b.v - c.v) + b.u * (c.v - a.v) + c.u * (a.v - b.v));
    if d.abs() < 1e-300 {
        return None;
    }
    let (a2, b2, c2) = (a.u * a.u + a.v * a.v, b.u * b.u + b.v * b.v, c.u * c.u + c.v * c.v);
    Some(Vec2::new(
        (a2 * (b.v - c.v) + b2 * (c.v - a.v) + c2 * (a.v - b.v)) / d,
        (a2 * (c.u - b.u) + b2 * (a.u - c.u) + c2 * (b.u - a.u)) / d,
    ))
}

impl Seg {
    pub fn from_curve(c: &Curve) -> Option<Seg> {
        Some(match *c {
            Curve::Line { start, end } => Seg::Line { a: start, b: end },
            Curve::Circle { center, radius } => Seg::Circle { c: center, r: radius },
            Curve::Arc { start, end, mid } => {
                let c = three_point_center(start, mid, end)?;
                let a0 = angle_of(start, c);
                let am = (angle_of(mid, c) - a0).rem_euclid(TAU);
                let ae = (angle_of(end, c) - a0).rem_euclid(TAU);
                let sweep = if am < ae { ae } else { -(TAU - ae) };
                Seg::Arc { c, r: start.distance(c), a0, sweep }
            }
        })
    }

    pub fn from_entity(e: &ExternalEntity) -> Option<Seg> {
        let v = |a: [f64; 2]| Vec2::new(a[0], a[1]);
        Some(match *e {
            ExternalEntity::Line { start, end } => Seg::Line { a: v(start), b: v(end) },
            ExternalEntity::Circle { center, radius } => Seg::Circle { c: v(center), r: radius },
            ExternalEntity::Arc { center, radius, start_angle, end_angle, ccw } => {
                let sweep = if ccw { (end_angle - start_angle).rem_euclid(TAU) } else { -(start_angle - end_angle).rem_euclid(TAU) };
                Seg::Arc { c: v(center), r: radius, a0: start_angle, sweep }
            }
            ExternalEntity::Unsupported => return None,
        })
    }

    fn on_arc(a0: f64, sweep: f64, ang: f64) -> bool {
        let t = if sweep >= 0.0 { (ang - a0).rem_euclid(TAU) } else { (a0 - ang).rem_euclid(TAU) };
        t < sweep.abs()
    }

    /// Crossings of the ray from `q` toward +u.
    fn crossings(&self, q: Vec2) -> usize {
        match *self {
            Seg::Line { a, b } => {
                if (a.v > q.v) != (b.v > q.v) {
                    let x = a.u + (q.v - a.v) * (b.u - a.u) / (b.v - a.v);
                    usize::from(x > q.u)
                } else {
                    0
                }
            }
            Seg::Circle { c, r } => usize::from(q.distance(c) < r),
            Seg::Arc { c, r, a0, sweep } => {
                let dy = q.v - c.v;
                if dy.abs() >= r {
                    return 0;
                }
                let dx = (r * r - dy * dy).sqrt();
                [dx, -dx]
                    .into_iter()
                    .filter(|&ddx| c.u + ddx > q.u && Seg::on_arc(a0, sweep, dy.atan2(ddx)))
                    .count()
            }
        }
    }

    fn distance(&self, q: Vec2) -> f64 {
        match *self {
            Seg::Line { a, b } => {
                let d = b - a;
                let l2 = d.dot(d);
                let t = if l2 > 0.0 { ((q - a).dot(d) / l2).clamp(0.0, 1.0) } else { 0.0 };
                q.distance(a + d * t)
            }
            Seg::Circle { c, r } => (q.distance(c) - r).abs(),
            Seg::Arc { c, r, a0, sweep } => {
                if Seg::on_arc(a0, sweep, angle_of(q, c)) {
                    (q.distance(c) - r).abs()
                } else {
                    let at = |a: f64| c + Vec2::new(a.cos(), a.sin()) * r;
                    q.distance(at(a0)).min(q.distance(at(a0 + sweep)))
                }
            }
        }
    }

    /// Conservative bounds.
    fn bounds(&self) -> (Vec2, Vec2) {
        match *self {
            Seg::Line { a, b } => (Vec2::new(a.u.min(b.u), a.v.min(b.v)), Vec2::new(a.u.max(b.u), a.v.max(b.v))),
            Seg::Circle { c, r } | Seg::Arc { c, r, .. } => (c - Vec2::new(r, r), c + Vec2::new(r, r)),
        }
    }
}

/// One extruded profile in model space.
#[derive(Clone, Debug)]
pub struct Prism {
    origin: Vec3,
    x: Vec3,
    y: Vec3,
    n: Vec3,
    position: Vec2,
    size: f64,
    segs: Vec<Seg>,
    w0: f64,
    w1: f64,
    pub operation: Operation,
}

fn unit(v: Vec3) -> Option<Vec3> {
    let l = (v.x * v.x + v.y * v.y + v.z * v.z).sqrt();
    (l > 0.0).then(|| v * (1.0 / l))
}

fn span(t: ExtentType, e1: f64, e2: f64) -> (f64, f64) {
    let (a, b) = match t {
        ExtentType::OneSided => (0.0, e1),
        ExtentType::Symmetric => (-0.5 * e1, 0.5 * e1),
        ExtentType::TwoSided => (-e2, e1),
    };
    (a.min(b), a.max(b))
}

impl Prism {
    #[allow(clippy::too_many_arguments)]
    fn new(plane: &PlaneDef, position: Vec2, size: f64, segs: Vec<Seg>, t: ExtentType, e1: f64, e2: f64, operation: Operation) -> Option<Self> {
        let x = unit(plane.x_axis)?;
        let y0 = unit(plane.y_axis)?;
        let y = unit(y0 - x * x.dot(y0))?;
        let n = x.cross(y);
        let (w0, w1) = span(t, e1, e2);
        Some(Self { origin: plane.origin, x, y, n, position, size, segs, w0, w1, operation })
    }

    fn local(&self, p: Vec3) -> (Vec2, f64) {
        let d = p - self.origin;
        let uv = Vec2::new(d.dot(self.x), d.dot(self.y));
        ((uv - self.position) * (1.0 / self.size), d.dot(self.n))
    }

    fn region(&self, q: Vec2) -> bool {
        self.segs.iter().map(|s| s.crossings(q)).sum::<usize>() % 2 == 1
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (q, w) = self.local(p);
        w > self.w0 && w < self.w1 && self.region(q)
    }

    /// Whether `p` lies within `delta` of the prism's boundary.
    pub fn near_boundary(&self, p: Vec3, delta: f64) -> bool {
        let (q, w) = self.local(p);
        let side = self.segs.iter().map(|s| s.distance(q)).fold(f64::INFINITY, f64::min) * self.size;
        let in_slab = w > self.w0 - delta && w < self.w1 + delta;
        let near_cap = (w - self.w0).abs() < delta || (w - self.w1).abs() < delta;
        (side < delta && in_slab) || (near_cap && (side < delta || self.region(q)))
    }

    fn profile_diagonal(&self) -> f64 {
        let mut it = self.segs.iter().map(Seg::bounds);
        let Some(first) = it.next() else { return 0.0 };
        let (lo, hi) = it.fold(first, |(lo, hi), (a, b)| (Vec2::new(lo.u.min(a.u), lo.v.min(a.v)), Vec2::new(hi.u.max(b.u), hi.v.max(b.v))));
        lo.distance(hi)
    }

    fn corners(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        for s in &self.segs {
            let (lo, hi) = s.bounds();
            for u in [lo.u, hi.u] {
                for v in [lo.v, hi.v] {
                    let uv = Vec2::new(u, v) * self.size + self.position;
                    for w in [self.w0, self.w1] {
                        out.push(self.origin + self.x * uv.u + self.y * uv.v + self.n * w);
                    }
                }
            }
        }
        out
    }
}

/// Set-algebra composition of prisms in program order.
#[derive(Clone, Debug, Default)]
pub struct AnalyticSolid {
    pub prisms: Vec<Prism>,
}

impl AnalyticSolid {
    /// Reads prisms straight from program statements. `None` when the
    /// program references something missing.
    pub fn from_program(p: &CadProgram) -> Option<Self> {
        let (mut planes, mut curves, mut loops, mut profiles, mut sketches) = (vec![], vec![], vec![], vec![], vec![]);
        let mut prisms = Vec::new();
        for s in &p.statements {
            match &s.command {
                Command::SketchPlane(d) => planes.push(*d),
                Command::Curve(c) => curves.push(*c),
                Command::Loop(ids) => loops.push(ids.clone()),
                Command::Profile(ids) => profiles.push(ids.clone()),
                Command::Sketch(d) => sketches.push(*d),
                Command::Constraint(_) => {}
                Command::Extrude(e) => {
                    let sk = sketches.get(e.sketch.0)?;
                    let mut segs = Vec::new();
                    for l in profiles.get(sk.profile.0)? {
                        for c in loops.get(l.0)? {
                            segs.push(Seg::from_curve(curves.get(c.0)?)?);
                        }
                    }
                    prisms.push(Prism::new(
                        planes.get(sk.plane.0)?,
                        sk.position,
                        sk.size,
                        segs,
                        e.extent_type,
                        e.extent_one,
                        e.extent_two,
                        e.operation,
                    )?);
                }
            }
        }
        Some(Self { prisms })
    }

    /// Reads prisms from an interchange record, using its native arc form.
    pub fn from_record(r: &ExternalRecord) -> Option<Self> {
        let mut sketches = Vec::new();
        let mut prisms = Vec::new();
        for step in &r.sequence {
            match step {
                ExternalStep::Sketch(s) => sketches.push(s),
                ExternalStep::Extrude(e) => {
                    let s = sketches.get(e.sketch)?;
                    let segs = s.loops.iter().flatten().map(Seg::from_entity).collect::<Option<Vec<_>>>()?;
                    let a = |v: [f64; 3]| Vec3::new(v[0], v[1], v[2]);
                    let plane = PlaneDef::new(a(s.plane.origin), a(s.plane.x_axis), a(s.plane.y_axis));
                    let op = match e.operation.to_ascii_lowercase().replace('_', "").as_str() {
                        "newbody" => Operation::NewBody,
                        "join" => Operation::Join,
                        "cut" => Operation::Cut,
                        "intersect" => Operation::Intersect,
                        _ => return None,
                    };
                    let t = match e.extent_type.to_ascii_lowercase().replace('_', "").as_str() {
                        "onesided" => ExtentType::OneSided,
                        "symmetric" => ExtentType::Symmetric,
                        "twosided" => ExtentType::TwoSided,
                        _ => return None,
                    };
                    let e2 = if t == ExtentType::TwoSided { e.extent_two } else { 0.0 };
                    prisms.push(Prism::new(&plane, Vec2::new(s.position[0], s.position[1]), s.size, segs, t, e.extent_one, e2, op)?);
                }
            }
        }
        Some(Self { prisms })
    }

    /// The body after the first `n` extrusions.
    pub fn prefix(&self, n: usize) -> Self {
        Self { prisms: self.prisms[..n.min(self.prisms.len())].to_vec() }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let mut inside = false;
        for (i, pr) in self.prisms.iter().enumerate() {
            let c = pr.contains(p);
            inside = match pr.operation {
                Operation::NewBody if i == 0 => c,
                Operation::NewBody | Operation::Join => inside || c,
                Operation::Cut => inside && !c,
                Operation::Intersect => inside && c,
            };
        }
        inside
    }

    pub fn near_surface(&self, p: Vec3, delta: f64) -> bool {
        self.prisms.iter().any(|pr| pr.near_boundary(p, delta))
    }

    /// Width of the band around the surface excluded from comparison:
    /// twice the largest model-space chord tolerance over all profiles.
    pub fn surface_band(&self, chord: ChordTol) -> f64 {
        self.prisms.iter().map(|p| 2.0 * chord.resolve(p.profile_diagonal()) * p.size).fold(0.0, f64::max)
    }

    /// Box around every prism, grown by 2 % of its diagonal.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.prisms.iter().flat_map(Prism::corners);
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pad = (hi - lo) * 0.02 + Vec3::new(1e-9, 1e-9, 1e-9);
        Some((lo - pad, hi + pad))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Agreement {
    pub agree: usize,
    pub compared: usize,
    pub skipped: usize,
}

impl Agreement {
    pub fn ratio(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.agree as f64 / self.compared as f64
        }
    }
}

/// Compares mesh ray-parity occupancy with the analytic solid on an
/// `n³` grid of cell centers, skipping samples within `delta` of a
/// prism boundary. A missing mesh counts as empty.
pub fn voxel_agreement(solid: &AnalyticSolid, mesh: Option<&SolidMesh>, n: usize, delta: f64) -> Agreement {
    let Some((lo, hi)) = solid.bounds() else { return Agreement::default() };
    let axis = |a: f64, b: f64| (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect::<Vec<_>>();
    let (xs, ys, zs) = (axis(lo.x, hi.x), axis(lo.y, hi.y), axis(lo.z, hi.z));
    let occ = match mesh {
        Some(m) if !m.is_empty() => classify_grid(m, &xs, &ys, &zs),
        _ => vec![false; n * n * n],
    };
    let mut a = Agreement::default();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            for (k, &z) in zs.iter().enumerate() {
                let p = Vec3::new(x, y, z);
                if solid.near_surface(p, delta) {
                    a.skipped += 1;
                    continue;
                }
                a.compared += 1;
                if solid.contains(p) == occ[(i * n + j) * n + k] {
                    a.agree += 1;
                }
            }
        }
    }
    a
}
