//! Closed-form 2x2 matrix exponentials and the integrated exponential
//! used by semidirect-product group operations.

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
        Mat2([[a, b], [c, d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] + o.0[0][0], self.0[0][1] + o.0[0][1]],
            [self.0[1][0] + o.0[1][0], self.0[1][1] + o.0[1][1]],
        ])
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    /// Solve self * x = v. Returns None when the matrix is singular.
    pub fn solve(&self, v: [f64; 2]) -> Option<[f64; 2]> {
        let d = self.det();
        let scale = self.0.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
        if d.abs() <= 1e-14 * scale.max(1.0) * scale.max(1.0) {
            return None;
        }
        Some([
            (self.0[1][1] * v[0] - self.0[0][1] * v[1]) / d,
            (-self.0[1][0] * v[0] + self.0[0][0] * v[1]) / d,
        ])
    }

    /// Matrix exponential via the trace-free splitting M = s I + B with
    /// B^2 = delta I: exp(M) = e^s (cosh-like(delta) I + sinhc-like(delta) B).
    /// The series branch keeps the result smooth across defective matrices.
    pub fn exp(&self) -> Mat2 {
        let s = self.trace() / 2.0;
        let b = self.add(&Mat2::IDENTITY.scale(-s));
        // B is trace-free, so B^2 = -det(B) I
        let delta = -b.det();
        let (c, m) = cosh_sinhc_pair(delta);
        Mat2::IDENTITY.scale(c).add(&b.scale(m)).scale(s.exp())
    }

    /// Integrated exponential phi(M) = int_0^1 exp(s M) ds = (exp(M) - I) M^{-1}.
    ///
    /// Computed by halving until the series converges fast, then
    /// phi(M) = phi(M/2) (I + exp(M/2)) / 2.
    pub fn phi1(&self) -> Mat2 {
        let norm = self
            .0
            .iter()
            .flatten()
            .map(|a| a.abs())
            .fold(0.0, f64::max);
        if norm <= 0.5 {
            return self.phi1_series();
        }
        let half = self.scale(0.5);
        let ph = half.phi1();
        ph.matmul(&Mat2::IDENTITY.add(&half.exp())).scale(0.5)
    }

    fn phi1_series(&self) -> Mat2 {
        let mut acc = Mat2::IDENTITY;
        let mut term = Mat2::IDENTITY;
        let mut factorial = 1.0;
        for k in 1..=24 {
            term = term.matmul(self);
            factorial *= (k + 1) as f64;
            acc = acc.add(&term.scale(1.0 / factorial));
        }
        acc
    }
}

/// Returns (C, S) with C = cosh(sqrt(delta)) and S = sinh(sqrt(delta))/sqrt(delta)
/// for delta >= 0, and the cos/sinc pair for delta < 0, with series for small |delta|.
fn cosh_sinhc_pair(delta: f64) -> (f64, f64) {
    if delta.abs() < 1e-8 {
        (1.0 + delta / 2.0 + delta * delta / 24.0, 1.0 + delta / 6.0)
    } else if delta > 0.0 {
        let w = delta.sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        let w = (-delta).sqrt();
        (w.cos(), w.sin() / w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_series(m: &Mat2) -> Mat2 {
        let mut acc = Mat2::IDENTITY;
        let mut term = Mat2::IDENTITY;
        for k in 1..60 {
            term = term.matmul(m).scale(1.0 / k as f64);
            acc = acc.add(&term);
        }
        acc
    }

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a.0[i][j] - b.0[i][j]).abs() < tol))
    }

    #[test]
    fn exp_matches_series_across_cases() {
        let cases = [
            Mat2::new(1.0, 0.0, 0.0, 1.0),
            Mat2::new(0.0, -1.0, 1.0, 0.0),
            Mat2::new(0.0, 1.0, 0.0, 0.0),     // nilpotent
            Mat2::new(2.0, 0.0, 0.0, 0.0),     // degenerate a=1 family shape
            Mat2::new(1.3, -0.4, 0.9, 0.7),
            Mat2::new(1.0, -0.5, 1.5, 1.0),
        ];
        for m in cases {
            assert!(close(&m.exp(), &exp_series(&m), 1e-12), "{m:?}");
        }
    }

    #[test]
    fn phi1_matches_quadrature() {
        let m = Mat2::new(1.1, -0.3, 0.8, 0.9);
        // Simpson quadrature of int_0^1 exp(sM) ds
        let n = 2000;
        let mut acc = Mat2::new(0.0, 0.0, 0.0, 0.0);
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc = acc.add(&m.scale(s).exp().scale(w));
        }
        acc = acc.scale(1.0 / (3.0 * n as f64));
        assert!(close(&m.phi1(), &acc, 1e-10));
    }

    #[test]
    fn phi1_singular_matrix() {
        // M with eigenvalue zero, not small
        let m = Mat2::new(3.0, 0.0, 0.0, 0.0);
        let ph = m.phi1();
        // phi entries: (e^3-1)/3 and 1
        assert!((ph.0[0][0] - (3.0f64.exp() - 1.0) / 3.0).abs() < 1e-12);
        assert!((ph.0[1][1] - 1.0).abs() < 1e-12);
    }
}
