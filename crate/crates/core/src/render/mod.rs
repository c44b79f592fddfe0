//! Orthographic flat-shaded views of solid meshes.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::SolidMesh;
use crate::model::Vec3;

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 400;
pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_MAX_ANGLE_DEG: f64 = 15.0;

/// Brightest face gray; kept below the white background.
const FACE_GRAY: f64 = 235.0;
const BACKGROUND: u8 = 255;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid view: {0}")]
    InvalidView(String),
    #[error("image encoding failed: {0}")]
    Encode(String),
}

pub fn isometric_axis() -> Vec3 {
    let k = 1.0 / 3f64.sqrt();
    Vec3::new(k, k, k)
}

/// Uniform direction in the spherical cap of half-angle `max_angle` around
/// the isometric axis.
pub fn sample_view_dir(seed: u64, max_angle: f64) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = isometric_axis();
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - max_angle.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random::<f64>() * TAU;
    let e1 = Vec3::new(1.0, -1.0, 0.0) * (1.0 / 2f64.sqrt());
    let e2 = axis.cross(e1);
    axis * cos_t + (e1 * phi.cos() + e2 * phi.sin()) * sin_t
}

/// Camera setup. `direction` points from the model toward the viewer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub direction: Vec3,
    pub up: Vec3,
    pub width: u32,
    pub height: u32,
    pub margin_frac: f64,
}

impl ViewSpec {
    /// View along `direction` with world z as the screen's up where possible.
    pub fn looking_from(direction: Vec3) -> Result<Self, RenderError> {
        let d = direction.normalized().ok_or_else(|| RenderError::InvalidView("zero direction".into()))?;
        let up = [Vec3::Z, Vec3::Y]
            .into_iter()
            .find_map(|w| (w - d * d.dot(w)).normalized().filter(|u| u.norm() > 0.5 && d.cross(w).norm() > 1e-6))
            .ok_or_else(|| RenderError::InvalidView("no up vector".into()))?;
        Ok(Self { direction: d, up, width: DEFAULT_WIDTH, height: DEFAULT_HEIGHT, margin_frac: DEFAULT_MARGIN })
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    fn check(&self) -> Result<(), RenderError> {
        let unit = |v: Vec3| (v.norm() - 1.0).abs() < 1e-9;
        if !unit(self.direction) || !unit(self.up) || self.direction.dot(self.up).abs() > 1e-9 {
            return Err(RenderError::InvalidView("direction and up must be orthonormal".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidView("empty image".into()));
        }
        if !(0.0..0.5).contains(&self.margin_frac) {
            return Err(RenderError::InvalidView(format!("margin {}", self.margin_frac)));
        }
        Ok(())
    }

    fn right(&self) -> Vec3 {
        self.up.cross(self.direction)
    }

    /// Light slightly above and to the right of the viewer, so faces that
    /// are symmetric about the view axis still shade differently.
    fn light(&self) -> Vec3 {
        (self.direction + self.up * 0.5 + self.right() * 0.25).normalized().expect("nonzero light")
    }
}

impl Default for ViewSpec {
    fn default() -> Self {
        Self::looking_from(isometric_axis()).expect("isometric view")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// RGB8, row-major, top row first.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, v: u8) -> Self {
        Self { width, height, pixels: vec![v; 3 * width as usize * height as usize] }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6 {} {} 255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| RenderError::Encode(e.to_string()))?;
            w.write_image_data(&self.pixels).map_err(|e| RenderError::Encode(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, RenderError> {
        let mut dec = png::Decoder::new(std::io::Cursor::new(bytes));
        dec.set_transformations(png::Transformations::EXPAND);
        let mut r = dec.read_info().map_err(|e| RenderError::Encode(e.to_string()))?;
        let mut buf = vec![0; r.output_buffer_size().ok_or_else(|| RenderError::Encode("image too large".into()))?];
        let info = r.next_frame(&mut buf).map_err(|e| RenderError::Encode(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(RenderError::Encode(format!("unsupported {:?} {:?}", info.color_type, info.bit_depth)));
        }
        buf.truncate(info.buffer_size());
        Ok(Self { width: info.width, height: info.height, pixels: buf })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Ppm,
}

pub fn export_image(img: &Image, format: ImageFormat) -> Result<Vec<u8>, RenderError> {
    match format {
        ImageFormat::Png => img.to_png(),
        ImageFormat::Ppm => Ok(img.to_ppm()),
    }
}

/// A render plus, per pixel, the triangle that covers it.
pub struct Rendered {
    pub image: Image,
    pub coverage: Vec<Option<u32>>,
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

pub fn render_view(mesh: &SolidMesh, spec: &ViewSpec) -> Result<Image, RenderError> {
    render_coverage(mesh, spec).map(|r| r.image)
}

/// Z-buffered render: front faces only, flat shaded, auto-fitted.
pub fn render_coverage(mesh: &SolidMesh, spec: &ViewSpec) -> Result<Rendered, RenderError> {
    spec.check()?;
    if mesh.is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    let (d, up, right, light) = (spec.direction, spec.up, spec.right(), spec.light());
    let used: Vec<u32> = mesh.triangles.iter().flatten().copied().collect();
    let proj = |p: Vec3| (p.dot(right), p.dot(up), p.dot(d));
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &i in &used {
        let (u, v, _) = proj(mesh.vertices[i as usize]);
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
    }
    let (w, h) = (spec.width as f64, spec.height as f64);
    let avail = (w * (1.0 - 2.0 * spec.margin_frac), h * (1.0 - 2.0 * spec.margin_frac));
    let ext = (hi.0 - lo.0, hi.1 - lo.1);
    let scale = match (ext.0 > 0.0, ext.1 > 0.0) {
        (true, true) => (avail.0 / ext.0).min(avail.1 / ext.1),
        (true, false) => avail.0 / ext.0,
        (false, true) => avail.1 / ext.1,
        (false, false) => 1.0,
    };
    let center = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let screen = |p: Vec3| {
        let (u, v, z) = proj(p);
        (w / 2.0 + (u - center.0) * scale, h / 2.0 - (v - center.1) * scale, z)
    };

    let (wi, hi_px) = (spec.width as usize, spec.height as usize);
    let mut depth = vec![f64::NEG_INFINITY; wi * hi_px];
    let mut coverage: Vec<Option<u32>> = vec![None; wi * hi_px];
    let mut shade = vec![0u8; mesh.triangles.len()];
    for (t, [a, b, c]) in mesh.triangles_iter().enumerate() {
        let Some(n) = (b - a).cross(c - a).normalized() else { continue };
        if n.dot(d) <= 0.0 {
            continue;
        }
        shade[t] = (FACE_GRAY * n.dot(light).max(0.0)).round() as u8;
        let s = [screen(a), screen(b), screen(c)];
        // screen y points down, so front faces are clockwise on screen
        let p = [(s[0].0, s[0].1), (s[2].0, s[2].1), (s[1].0, s[1].1)];
        let z = [s[0].2, s[2].2, s[1].2];
        let area = edge(p[0], p[1], p[2]);
        if area <= 0.0 {
            continue;
        }
        let x0 = (p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min) - 0.5).ceil().max(0.0) as usize;
        let x1 = (p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max) - 0.5).floor().min(w - 1.0);
        let y0 = (p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min) - 0.5).ceil().max(0.0) as usize;
        let y1 = (p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max) - 0.5).floor().min(h - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let q = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = edge(p[1], p[2], q);
                let w1 = edge(p[2], p[0], q);
                let w2 = edge(p[0], p[1], q);
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let zq = (w0 * z[0] + w1 * z[1] + w2 * z[2]) / area;
                let k = y * wi + x;
                if zq > depth[k] {
                    depth[k] = zq;
                    coverage[k] = Some(t as u32);
                }
            }
        }
    }
    let mut image = Image::filled(spec.width, spec.height, BACKGROUND);
    for (k, c) in coverage.iter().enumerate() {
        if let Some(t) = c {
            let g = shade[*t as usize];
            image.pixels[3 * k..3 * k + 3].copy_from_slice(&[g, g, g]);
        }
    }
    Ok(Rendered { image, coverage })
}
