use super::{ModelError, Vec2, Vec3};

/// Minimum |sin| of the angle between the two input axes.
const MIN_AXIS_SIN: f64 = 1e-6;

/// An orthonormal sketch frame. The normal is always `x_axis × y_axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchPlane {
    origin: Vec3,
    x_axis: Vec3,
    y_axis: Vec3,
}

impl SketchPlane {
    /// Builds a frame from possibly unnormalized, non-orthogonal axes.
    ///
    /// The x axis keeps its direction; y is re-orthogonalized against it with
    /// one Gram-Schmidt step.
    pub fn new(origin: Vec3, x_axis: Vec3, y_axis: Vec3) -> Result<Self, ModelError> {
        if !(origin.is_finite() && x_axis.is_finite() && y_axis.is_finite()) {
            return Err(ModelError::DegenerateAxes("non-finite component".into()));
        }
        let x = x_axis
            .normalized()
            .ok_or_else(|| ModelError::DegenerateAxes("x axis is zero".into()))?;
        let y0 = y_axis
            .normalized()
            .ok_or_else(|| ModelError::DegenerateAxes("y axis is zero".into()))?;
        if x.cross(y0).norm() <= MIN_AXIS_SIN {
            return Err(ModelError::DegenerateAxes("x and y axes are parallel".into()));
        }
        let y = (y0 - x * x.dot(y0))
            .normalized()
            .ok_or_else(|| ModelError::DegenerateAxes("y axis collapses".into()))?;
        Ok(Self { origin, x_axis: x, y_axis: y })
    }

    /// The world XY plane through `origin`.
    pub fn xy(origin: Vec3) -> Self {
        Self { origin, x_axis: Vec3::X, y_axis: Vec3::Y }
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn x_axis(&self) -> Vec3 {
        self.x_axis
    }

    pub fn y_axis(&self) -> Vec3 {
        self.y_axis
    }

    pub fn normal(&self) -> Vec3 {
        self.x_axis.cross(self.y_axis)
    }

    /// Maps in-plane coordinates plus a signed offset along the normal into
    /// model space.
    pub fn to_world(&self, p: Vec2, w: f64) -> Vec3 {
        self.origin + self.x_axis * p.u + self.y_axis * p.v + self.normal() * w
    }

    /// Inverse of [`SketchPlane::to_world`]: `(u, v, w)` coordinates of a world point.
    pub fn to_local(&self, p: Vec3) -> (Vec2, f64) {
        let d = p - self.origin;
        (Vec2::new(d.dot(self.x_axis), d.dot(self.y_axis)), d.dot(self.normal()))
    }

    /// Angle in degrees between a claimed normal and `x × y`.
    pub fn normal_deviation_deg(&self, claimed: Vec3) -> Option<f64> {
        claimed.normalized().map(|n| n.angle_to(self.normal()).to_degrees())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3) -> bool {
        a.distance(b) < 1e-12
    }

    #[test]
    fn world_xy() {
        let p = SketchPlane::new(Vec3::ZERO, Vec3::X, Vec3::Y).unwrap();
        assert_eq!(p.normal(), Vec3::Z);
    }

    #[test]
    fn normalizes_axes() {
        let p = SketchPlane::new(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0)).unwrap();
        assert!(close(p.x_axis(), Vec3::X));
        assert!(close(p.y_axis(), Vec3::Y));
    }

    #[test]
    fn gram_schmidt_corrects_y() {
        // (1,1,0)/√2 minus its projection on x leaves (0, 1/√2, 0) → (0,1,0).
        let p = SketchPlane::new(Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert!(close(p.y_axis(), Vec3::Y));
        assert!(close(p.normal(), Vec3::Z));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(SketchPlane::new(Vec3::ZERO, Vec3::ZERO, Vec3::Y).is_err());
        assert!(SketchPlane::new(Vec3::ZERO, Vec3::X, Vec3::new(-3.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn local_world_inverse() {
        let p = SketchPlane::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(1.0, 0.0, 0.3)).unwrap();
        let w = p.to_world(Vec2::new(0.3, -1.2), 0.7);
        let (uv, h) = p.to_local(w);
        assert!((uv.u - 0.3).abs() < 1e-12 && (uv.v + 1.2).abs() < 1e-12 && (h - 0.7).abs() < 1e-12);
    }
}
