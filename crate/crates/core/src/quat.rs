//! Unit quaternions realizing the compact group of special unitary 2x2 matrices.
//!
//! Elements are stored as `[w, x, y, z]` with the identity at `[1, 0, 0, 0]`.
//! All constructors and operations renormalize so the unit-norm invariant
//! holds to 1e-12 after every step.

/// Quaternion with Hamilton product conventions: e1*e2 = e3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat(pub [f64; 4]);

pub const QUAT_NORM_TOL: f64 = 1e-12;

impl Quat {
    pub const ONE: Quat = Quat([1.0, 0.0, 0.0, 0.0]);
    pub const MINUS_ONE: Quat = Quat([-1.0, 0.0, 0.0, 0.0]);

    /// Imaginary basis unit `e_i`, i in 1..=3.
    pub fn imag_unit(i: usize) -> Quat {
        let mut q = [0.0; 4];
        q[i] = 1.0;
        Quat(q)
    }

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Quat {
        Quat([w, x, y, z])
    }

    /// Purely imaginary quaternion from 3 components.
    pub fn imag(v: [f64; 3]) -> Quat {
        Quat([0.0, v[0], v[1], v[2]])
    }

    pub fn w(&self) -> f64 {
        self.0[0]
    }

    pub fn imag_part(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat([self.0[0] / n, self.0[1] / n, self.0[2] / n, self.0[3] / n])
    }

    pub fn conj(&self) -> Quat {
        Quat([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(&self) -> Quat {
        self.conj().normalized()
    }

    pub fn scale(&self, s: f64) -> Quat {
        Quat([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }

    pub fn add(&self, o: &Quat) -> Quat {
        Quat([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }

    pub fn sub(&self, o: &Quat) -> Quat {
        Quat([
            self.0[0] - o.0[0],
            self.0[1] - o.0[1],
            self.0[2] - o.0[2],
            self.0[3] - o.0[3],
        ])
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        (0..4).map(|i| self.0[i] * o.0[i]).sum()
    }

    /// Hamilton product.
    pub fn mul(&self, o: &Quat) -> Quat {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Quat([
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e,
        ])
    }

    /// Product renormalized to the unit sphere.
    pub fn mul_unit(&self, o: &Quat) -> Quat {
        self.mul(o).normalized()
    }

    /// Exponential of a purely imaginary quaternion `v`.
    pub fn exp_imag(v: [f64; 3]) -> Quat {
        let t = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (c, s) = if t < 1e-8 {
            // sin(t)/t to second order
            (1.0 - t * t / 2.0, 1.0 - t * t / 6.0)
        } else {
            (t.cos(), t.sin() / t)
        };
        Quat([c, s * v[0], s * v[1], s * v[2]]).normalized()
    }

    /// Principal logarithm as a purely imaginary 3-vector.
    ///
    /// For q = cos t + sin t * u returns t * u with t in [0, pi].
    pub fn log_imag(&self) -> [f64; 3] {
        let q = self.normalized();
        let v = q.imag_part();
        let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let t = vn.atan2(q.w());
        if vn < 1e-14 {
            // near +-1; for -1 the direction is ill-defined, pick e1
            if q.w() < 0.0 {
                return [std::f64::consts::PI, 0.0, 0.0];
            }
            return [0.0, 0.0, 0.0];
        }
        let s = t / vn;
        [s * v[0], s * v[1], s * v[2]]
    }
}
