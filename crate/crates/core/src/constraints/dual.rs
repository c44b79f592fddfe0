use std::ops::{Add, Div, Mul, Neg, Sub};

/// Most parameters a single constraint can touch: two arcs and an axis line.
pub(crate) const LOCAL: usize = 16;

/// Arithmetic shared by plain values and forward-mode duals.
pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn abs(self) -> Self {
        if self.val() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

/// Value plus gradient with respect to the local parameters of one constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: [f64; LOCAL],
}

impl Dual {
    pub fn var(v: f64, i: usize) -> Dual {
        let mut d = [0.0; LOCAL];
        d[i] = 1.0;
        Dual { v, d }
    }

    fn map(self, v: f64, k: f64) -> Dual {
        Dual { v, d: self.d.map(|x| x * k) }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Dual { v: self.v + o.v, d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        self + (-o)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.map(-self.v, -1.0)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; LOCAL];
        for i in 0..LOCAL {
            d[i] = self.d[i] * o.v + o.d[i] * self.v;
        }
        Dual { v: self.v * o.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; LOCAL];
        for i in 0..LOCAL {
            d[i] = (self.d[i] - v * o.d[i]) * inv;
        }
        Dual { v, d }
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual { v, d: [0.0; LOCAL] }
    }
    fn val(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let k = if s > 0.0 { 0.5 / s } else { 0.0 };
        self.map(s, k)
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.v * self.v + x.v * x.v;
        let v = self.v.atan2(x.v);
        if r2 == 0.0 {
            return Dual::cst(v);
        }
        let mut d = [0.0; LOCAL];
        for i in 0..LOCAL {
            d[i] = (x.v * self.d[i] - self.v * x.d[i]) / r2;
        }
        Dual { v, d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::var(3.0, 0);
        let y = Dual::var(2.0, 1);
        let f = x * y / (x + y);
        // f = xy/(x+y); df/dx = y²/(x+y)², df/dy = x²/(x+y)²
        assert!((f.v - 1.2).abs() < 1e-15);
        assert!((f.d[0] - 4.0 / 25.0).abs() < 1e-15);
        assert!((f.d[1] - 9.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn atan2_and_sqrt() {
        let y = Dual::var(1.0, 0);
        let x = Dual::var(1.0, 1);
        let a = y.atan2(x);
        assert!((a.d[0] - 0.5).abs() < 1e-15 && (a.d[1] + 0.5).abs() < 1e-15);
        let s = Dual::var(4.0, 2).sqrt();
        assert_eq!((s.v, s.d[2]), (2.0, 0.25));
    }
}
