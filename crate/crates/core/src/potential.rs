//! The H-potential of a metric Lie group and its zero classification.
//!
//! For a unimodular group with derived constants (mu1, mu2, mu3),
//!
//! ```text
//! R(q) = H (1 + |q|^2)^2 - (i/2) ( mu2 |1+q^2|^2 + mu1 |1-q^2|^2 + 4 mu3 |q|^2 )
//! ```
//!
//! and for a non-unimodular group A(a, b),
//!
//! ```text
//! R(q) = H (1 + |q|^2)^2 - (1 - |q|^4) - a (q^2 - qbar^2) - i b ( 2|q|^2 - a (q^2 + qbar^2) )
//! ```
//!
//! R(q)/|q|^4 has a finite limit as q -> infinity; the potential is said to
//! vanish at infinity when that limit is zero. Numerically the point at
//! infinity is covered by a second chart u = 1/q carrying the induced
//! potential Rw(u) = |u|^4 R(1/u), which satisfies the same Gauss-map
//! equation in the u variable.

use num_complex::Complex64;

use crate::group::MetricLieGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Coordinate q (finite chart around 0).
    Z,
    /// Coordinate u = 1/q (chart around infinity).
    W,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Z => Chart::W,
            Chart::W => Chart::Z,
        }
    }
}

/// Potential value together with first and second Wirtinger derivatives
/// in the chart variable.
#[derive(Debug, Clone, Copy)]
pub struct PotentialJet {
    pub r: Complex64,
    pub rq: Complex64,
    pub rqb: Complex64,
    pub rqq: Complex64,
    pub rqqb: Complex64,
    pub rqbqb: Complex64,
}

#[derive(Debug, Clone, Copy)]
enum Params {
    Unimodular { mu: [f64; 3] },
    NonUnimodular { a: f64, b: f64 },
}

/// H-potential evaluator for a fixed group and mean curvature value.
#[derive(Debug, Clone, Copy)]
pub struct HPotential {
    params: Params,
    pub h: f64,
}

impl HPotential {
    pub fn new(group: &MetricLieGroup, h: f64) -> Self {
        let params = match group {
            MetricLieGroup::Unimodular(u) => Params::Unimodular { mu: u.mu },
            MetricLieGroup::NonUnimodular(n) => Params::NonUnimodular { a: n.a, b: n.b },
        };
        HPotential { params, h }
    }

    /// Potential in the chart variable. In the W chart this is
    /// Rw(u) = |u|^4 R(1/u), the value relevant at q = infinity.
    pub fn eval(&self, chart: Chart, q: Complex64) -> Complex64 {
        self.jet(chart, q).r
    }

    /// Value together with Wirtinger derivatives in the chart variable.
    pub fn jet(&self, chart: Chart, q: Complex64) -> PotentialJet {
        let h = Complex64::new(self.h, 0.0);
        let qb = q.conj();
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let qq = q * qb; // |q|^2 as complex
        match (self.params, chart) {
            (Params::Unimodular { mu }, _) => {
                // identical closed form in both charts
                let (m1, m2, m3) = (mu[0], mu[1], mu[2]);
                let p2 = one + q * q;
                let p2b = one + qb * qb;
                let n2 = one - q * q;
                let n2b = one - qb * qb;
                let r = h * (one + qq) * (one + qq)
                    - 0.5 * i * (m2 * p2 * p2b + m1 * n2 * n2b + 4.0 * m3 * qq);
                let rq = 2.0 * h * qb * (one + qq)
                    - 0.5 * i * (2.0 * m2 * q * p2b - 2.0 * m1 * q * n2b + 4.0 * m3 * qb);
                let rqb = 2.0 * h * q * (one + qq)
                    - 0.5 * i * (2.0 * m2 * qb * p2 - 2.0 * m1 * qb * n2 + 4.0 * m3 * q);
                let rqq = 2.0 * h * qb * qb - 0.5 * i * (2.0 * m2 * p2b - 2.0 * m1 * n2b);
                let rqqb = 2.0 * h * (one + 2.0 * qq)
                    - 0.5 * i * (4.0 * m2 * qq + 4.0 * m1 * qq + 4.0 * m3);
                let rqbqb = 2.0 * h * q * q - 0.5 * i * (2.0 * m2 * p2 - 2.0 * m1 * n2);
                PotentialJet {
                    r,
                    rq,
                    rqb,
                    rqq,
                    rqqb,
                    rqbqb,
                }
            }
            (Params::NonUnimodular { a, b }, Chart::Z) => {
                // R = H(1+qqb)^2 - 1 + q^2 qb^2 - a(q^2 - qb^2) - 2ib q qb + iab(q^2 + qb^2)
                let iab = i * a * b;
                let r = h * (one + qq) * (one + qq) - one + q * q * qb * qb
                    - a * (q * q - qb * qb)
                    - 2.0 * i * b * qq
                    + iab * (q * q + qb * qb);
                let rq = 2.0 * h * qb * (one + qq) + 2.0 * q * qb * qb - 2.0 * a * q
                    - 2.0 * i * b * qb
                    + 2.0 * iab * q;
                let rqb = 2.0 * h * q * (one + qq) + 2.0 * q * q * qb + 2.0 * a * qb
                    - 2.0 * i * b * q
                    + 2.0 * iab * qb;
                let rqq = 2.0 * h * qb * qb + 2.0 * qb * qb - 2.0 * a + 2.0 * iab;
                let rqqb = 2.0 * h * (one + 2.0 * qq) + 4.0 * qq - 2.0 * i * b;
                let rqbqb = 2.0 * h * q * q + 2.0 * q * q + 2.0 * a + 2.0 * iab;
                PotentialJet {
                    r,
                    rq,
                    rqb,
                    rqq,
                    rqqb,
                    rqbqb,
                }
            }
            (Params::NonUnimodular { a, b }, Chart::W) => {
                // Rw(u) = H(1+uub)^2 + 1 - u^2 ub^2 + a(u^2 - ub^2) - 2ib u ub + iab(u^2 + ub^2)
                let iab = i * a * b;
                let r = h * (one + qq) * (one + qq) + one - q * q * qb * qb
                    + a * (q * q - qb * qb)
                    - 2.0 * i * b * qq
                    + iab * (q * q + qb * qb);
                let rq = 2.0 * h * qb * (one + qq) - 2.0 * q * qb * qb + 2.0 * a * q
                    - 2.0 * i * b * qb
                    + 2.0 * iab * q;
                let rqb = 2.0 * h * q * (one + qq) - 2.0 * q * q * qb - 2.0 * a * qb
                    - 2.0 * i * b * q
                    + 2.0 * iab * qb;
                let rqq = 2.0 * h * qb * qb - 2.0 * qb * qb + 2.0 * a + 2.0 * iab;
                let rqqb = 2.0 * h * (one + 2.0 * qq) - 4.0 * qq - 2.0 * i * b;
                let rqbqb = 2.0 * h * q * q - 2.0 * q * q - 2.0 * a + 2.0 * iab;
                PotentialJet {
                    r,
                    rq,
                    rqb,
                    rqq,
                    rqqb,
                    rqbqb,
                }
            }
        }
    }

    /// First Wirtinger derivatives (R_q, R_qbar) in the chart variable.
    pub fn derivs(&self, chart: Chart, q: Complex64) -> (Complex64, Complex64) {
        let j = self.jet(chart, q);
        (j.rq, j.rqb)
    }

    /// Everywhere-nonvanishing decision from the sign classification:
    /// the potential has no zero on the closed plane iff the group is of
    /// SU(2) type, or unimodular with H != 0, or non-unimodular with
    /// D <= 1 and |H| > 1, or non-unimodular with D > 1 and |H| != 1.
    pub fn nonvanishing_classification(&self, group: &MetricLieGroup) -> bool {
        match group {
            MetricLieGroup::Unimodular(u) => {
                if u.c.iter().all(|&x| x > 0.0) {
                    true
                } else {
                    self.h != 0.0
                }
            }
            MetricLieGroup::NonUnimodular(n) => {
                if n.d <= 1.0 {
                    self.h.abs() > 1.0
                } else {
                    self.h.abs() != 1.0
                }
            }
        }
    }

    /// Classification decision cross-checked against a damped Newton search
    /// for a zero of |R|^2 over both charts. Returns the decision and, when a
    /// zero exists, a witness point. Errors when the two disagree.
    pub fn has_zero(
        &self,
        group: &MetricLieGroup,
    ) -> crate::error::Result<(bool, Option<(Chart, Complex64)>)> {
        let classified_nonzero = self.nonvanishing_classification(group);
        let witness = self.search_zero();
        match (classified_nonzero, &witness) {
            (false, Some(_)) => Ok((true, witness)),
            (true, None) => Ok((false, None)),
            (true, Some((ch, q))) => Err(crate::error::Error::PotentialClassificationMismatch {
                context: format!("chart {ch:?}, q = {q}"),
                classified: true,
                found_min: self.eval(*ch, *q).norm(),
            }),
            (false, None) => Err(crate::error::Error::PotentialClassificationMismatch {
                context: "no witness found by multistart Newton".into(),
                classified: false,
                found_min: f64::NAN,
            }),
        }
    }

    /// Multistart damped Newton minimization of |R|^2 over both charts.
    /// Returns a zero witness when one converges below |R| < 1e-10.
    fn search_zero(&self) -> Option<(Chart, Complex64)> {
        let starts = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.35, 0.0),
            Complex64::new(-0.35, 0.0),
            Complex64::new(0.0, 0.35),
            Complex64::new(0.0, -0.35),
            Complex64::new(0.5, 0.5),
            Complex64::new(-0.5, 0.5),
            Complex64::new(0.5, -0.5),
            Complex64::new(-0.62, -0.41),
        ];
        let mut best: Option<(Chart, Complex64, f64)> = None;
        for chart in [Chart::Z, Chart::W] {
            for &s in &starts {
                if let Some((q, v)) = self.newton_min_abs(chart, s) {
                    if best.map_or(true, |(_, _, b)| v < b) {
                        best = Some((chart, q, v));
                    }
                }
            }
        }
        match best {
            Some((ch, q, v)) if v < 1e-10 => Some((ch, q)),
            _ => None,
        }
    }

    /// Damped Newton on f(x, y) = |R|^2 from a start point. Returns the final
    /// point and |R| there when the iteration settles.
    fn newton_min_abs(&self, chart: Chart, start: Complex64) -> Option<(Complex64, f64)> {
        let mut q = start;
        let f = |q: Complex64| self.eval(chart, q).norm_sqr();
        let mut fq = f(q);
        for _ in 0..80 {
            let j = self.jet(chart, q);
            // Wirtinger gradient of |R|^2: f_q = R_q conj(R) + conj(R_qbar) R
            let g = j.rq * j.r.conj() + j.rqb.conj() * j.r;
            // real gradient (f_x, f_y) = (2 Re f_q, -2 Im f_q)
            let gx = 2.0 * g.re;
            let gy = -2.0 * g.im;
            let gn = (gx * gx + gy * gy).sqrt();
            if gn < 1e-16 && fq > 1e-18 {
                break; // flat stationary point away from zero
            }
            // Levenberg-Marquardt step for the residual pair (Re R, Im R);
            // the damping keeps the step well-defined when R is real-valued
            // and the plain Newton system is singular.
            let rx = j.rq + j.rqb; // dR/dx
            let ry = Complex64::new(0.0, 1.0) * (j.rq - j.rqb); // dR/dy
            let (a11, a12) = (rx.re, ry.re);
            let (a21, a22) = (rx.im, ry.im);
            // normal matrix J^T J + lambda I and right side -J^T r
            let n11 = a11 * a11 + a21 * a21;
            let n12 = a11 * a12 + a21 * a22;
            let n22 = a12 * a12 + a22 * a22;
            let lm = 1e-10 * (n11 + n22).max(1e-30);
            let b1 = -(a11 * j.r.re + a21 * j.r.im);
            let b2 = -(a12 * j.r.re + a22 * j.r.im);
            let det = (n11 + lm) * (n22 + lm) - n12 * n12;
            let (dx, dy) = if det > 0.0 {
                (
                    (b1 * (n22 + lm) - b2 * n12) / det,
                    (b2 * (n11 + lm) - b1 * n12) / det,
                )
            } else {
                (-gx * 1e-2, -gy * 1e-2)
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let qn = q + Complex64::new(t * dx, t * dy);
                // keep iterates inside the chart disk
                if qn.norm() <= 1.6 {
                    let fn_ = f(qn);
                    if fn_ < fq {
                        q = qn;
                        fq = fn_;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            if fq < 1e-24 {
                break;
            }
        }
        Some((q, fq.sqrt()))
    }
}
