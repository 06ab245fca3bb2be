//! Simply connected three-dimensional metric Lie groups.
//!
//! Two families are modeled. Unimodular groups are described by structure
//! constants (c1, c2, c3) of a canonical orthonormal frame satisfying
//! [E2,E3] = c1 E1, [E3,E1] = c2 E2, [E1,E2] = c3 E3, with at most one
//! negative constant. Non-unimodular groups are semidirect products
//! R^2 x_A R with trace(A) = 2, parameterized by A(a, b) with a, b >= 0.
//!
//! Group elements are realized as unit quaternions when all structure
//! constants are positive, and as (x, y, z) semidirect coordinates for
//! non-unimodular groups and unimodular groups with a vanishing structure
//! constant.

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::quat::Quat;

/// Lie group types of the classification table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LieType {
    Su2,
    SlTwoTilde,
    EuclideanTilde,
    Sol,
    Nil,
    Abelian,
    NonUnimodular,
}

impl std::fmt::Display for LieType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LieType::Su2 => "SU(2)",
            LieType::SlTwoTilde => "SL~(2,R)",
            LieType::EuclideanTilde => "E~(2)",
            LieType::Sol => "Sol3",
            LieType::Nil => "Nil3",
            LieType::Abelian => "R^3",
            LieType::NonUnimodular => "non-unimodular",
        };
        f.write_str(s)
    }
}

/// Unimodular metric Lie group with derived constants.
///
/// `c` holds the structure constants in the internal frame order, which is a
/// cyclic permutation of the user's input chosen so that a zero constant sits
/// last (the group then admits semidirect coordinates) or, absent zeros, so
/// that a repeated pair sits first and the distinct Ricci direction is E3.
#[derive(Debug, Clone)]
pub struct UnimodularGroup {
    pub c: [f64; 3],
    pub mu: [f64; 3],
    /// Cyclic permutation applied to the input constants: c[i] = input[perm[i]].
    pub perm: [usize; 3],
    /// Frame scalings of the quaternion realization, when all c_i > 0.
    pub lambda: Option<[f64; 3]>,
    /// (E1, E2, E3) is declared positively oriented.
    pub positively_oriented: bool,
}

/// Non-unimodular metric Lie group R^2 x_A R, trace(A) = 2.
#[derive(Debug, Clone)]
pub struct NonUnimodularGroup {
    pub a: f64,
    pub b: f64,
    /// Milnor invariant D = (1 - a^2)(1 + b^2) = det(A).
    pub d: f64,
    pub mat: Mat2,
}

#[derive(Debug, Clone)]
pub enum MetricLieGroup {
    Unimodular(UnimodularGroup),
    NonUnimodular(NonUnimodularGroup),
}

/// Point of a metric Lie group in its chosen realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    Quat(Quat),
    Coords([f64; 3]),
}

impl GroupElement {
    pub fn as_quat(&self) -> Quat {
        match self {
            GroupElement::Quat(q) => *q,
            GroupElement::Coords(_) => panic!("expected quaternion element"),
        }
    }

    pub fn as_coords(&self) -> [f64; 3] {
        match self {
            GroupElement::Coords(c) => *c,
            GroupElement::Quat(_) => panic!("expected coordinate element"),
        }
    }
}

impl UnimodularGroup {
    /// Derives mu constants and the frame realization from structure constants.
    ///
    /// Rejects inputs with two or more negative constants.
    pub fn new(c_in: [f64; 3]) -> Result<Self> {
        let negatives = c_in.iter().filter(|&&x| x < 0.0).count();
        if negatives > 1 {
            return Err(Error::InvalidGroup(format!(
                "structure constants {c_in:?} have {negatives} negative entries; at most one is allowed"
            )));
        }
        let perm = canonical_cycle(&c_in);
        let c = [c_in[perm[0]], c_in[perm[1]], c_in[perm[2]]];
        let mu = [
            0.5 * (-c[0] + c[1] + c[2]),
            0.5 * (c[0] - c[1] + c[2]),
            0.5 * (c[0] + c[1] - c[2]),
        ];
        let lambda = if c.iter().all(|&x| x > 0.0) {
            Some([
                (c[1] * c[2]).sqrt() / 2.0,
                (c[0] * c[2]).sqrt() / 2.0,
                (c[0] * c[1]).sqrt() / 2.0,
            ])
        } else {
            None
        };
        Ok(UnimodularGroup {
            c,
            mu,
            perm,
            lambda,
            positively_oriented: true,
        })
    }

    pub fn ricci_eigenvalues(&self) -> [f64; 3] {
        [
            2.0 * self.mu[1] * self.mu[2],
            2.0 * self.mu[0] * self.mu[2],
            2.0 * self.mu[0] * self.mu[1],
        ]
    }

    /// Semidirect realization matrix for groups with c3 = 0.
    pub fn semidirect_matrix(&self) -> Option<Mat2> {
        if self.c[2].abs() < 1e-14 {
            Some(Mat2::new(0.0, -self.c[0], self.c[1], 0.0))
        } else {
            None
        }
    }
}

/// Picks the cyclic permutation of (c1,c2,c3) that puts a zero constant last
/// (enabling semidirect coordinates) or, for groups without zeros, a repeated
/// pair in the first two slots so the distinct Ricci direction is E3.
fn canonical_cycle(c: &[f64; 3]) -> [usize; 3] {
    let cycles: [[usize; 3]; 3] = [[0, 1, 2], [1, 2, 0], [2, 0, 1]];
    let eq = |x: f64, y: f64| (x - y).abs() < 1e-14;
    if c.iter().any(|x| x.abs() < 1e-14) {
        for cyc in cycles {
            let v = [c[cyc[0]], c[cyc[1]], c[cyc[2]]];
            if v[2].abs() < 1e-14 && v[0].abs() >= v[1].abs() {
                return cyc;
            }
        }
        for cyc in cycles {
            let v = [c[cyc[0]], c[cyc[1]], c[cyc[2]]];
            if v[2].abs() < 1e-14 {
                return cyc;
            }
        }
    }
    // exactly two equal: distinct constant goes last
    for cyc in cycles {
        let v = [c[cyc[0]], c[cyc[1]], c[cyc[2]]];
        if eq(v[0], v[1]) && !eq(v[1], v[2]) {
            return cyc;
        }
    }
    [0, 1, 2]
}

impl NonUnimodularGroup {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a < 0.0 || b < 0.0 {
            return Err(Error::InvalidGroup(format!(
                "non-unimodular parameters must be nonnegative, got a = {a}, b = {b}"
            )));
        }
        let mat = Mat2::new(1.0 + a, -(1.0 - a) * b, (1.0 + a) * b, 1.0 - a);
        let d = (1.0 - a * a) * (1.0 + b * b);
        debug_assert!((mat.trace() - 2.0).abs() < 1e-12);
        debug_assert!((mat.det() - d).abs() < 1e-9 * (1.0 + d.abs()));
        Ok(NonUnimodularGroup { a, b, d, mat })
    }
}

impl MetricLieGroup {
    pub fn unimodular(c: [f64; 3]) -> Result<Self> {
        Ok(MetricLieGroup::Unimodular(UnimodularGroup::new(c)?))
    }

    pub fn non_unimodular(a: f64, b: f64) -> Result<Self> {
        Ok(MetricLieGroup::NonUnimodular(NonUnimodularGroup::new(a, b)?))
    }

    pub fn is_su2_type(&self) -> bool {
        matches!(self, MetricLieGroup::Unimodular(u) if u.lambda.is_some())
    }

    /// Lie type and isometry group dimension.
    pub fn classify(&self) -> (LieType, usize) {
        match self {
            MetricLieGroup::Unimodular(u) => classify_unimodular(&u.c),
            MetricLieGroup::NonUnimodular(n) => {
                let dim = if n.a == 0.0 && n.b == 0.0 {
                    6
                } else if (n.a - 1.0).abs() < 1e-14 && n.b == 0.0 {
                    4
                } else {
                    3
                };
                (LieType::NonUnimodular, dim)
            }
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            MetricLieGroup::Unimodular(u) if u.lambda.is_some() => GroupElement::Quat(Quat::ONE),
            _ => GroupElement::Coords([0.0, 0.0, 0.0]),
        }
    }

    /// Semidirect matrix of the coordinate realization, if one exists.
    pub fn semidirect_matrix(&self) -> Option<Mat2> {
        match self {
            MetricLieGroup::Unimodular(u) => u.semidirect_matrix(),
            MetricLieGroup::NonUnimodular(n) => Some(n.mat),
        }
    }

    fn coords_matrix(&self) -> Result<Mat2> {
        self.semidirect_matrix().ok_or_else(|| {
            Error::UnsupportedGroup(
                "no semidirect realization; group element operations need all c_i > 0 (quaternions) or c3 = 0 (coordinates)"
                    .into(),
            )
        })
    }

    pub fn multiply(&self, p: &GroupElement, q: &GroupElement) -> GroupElement {
        match (p, q) {
            (GroupElement::Quat(a), GroupElement::Quat(b)) => GroupElement::Quat(a.mul_unit(b)),
            (GroupElement::Coords(a), GroupElement::Coords(b)) => {
                let mat = self
                    .coords_matrix()
                    .expect("coordinate elements require a semidirect realization");
                let e = mat.scale(a[2]).exp();
                let p2 = e.apply([b[0], b[1]]);
                GroupElement::Coords([a[0] + p2[0], a[1] + p2[1], a[2] + b[2]])
            }
            _ => panic!("mixed group element realizations"),
        }
    }

    pub fn inverse(&self, p: &GroupElement) -> GroupElement {
        match p {
            GroupElement::Quat(q) => GroupElement::Quat(q.inverse()),
            GroupElement::Coords(c) => {
                let mat = self
                    .coords_matrix()
                    .expect("coordinate elements require a semidirect realization");
                let e = mat.scale(-c[2]).exp();
                let p2 = e.apply([c[0], c[1]]);
                GroupElement::Coords([-p2[0], -p2[1], -c[2]])
            }
        }
    }

    /// One-parameter subgroup through the identity with initial velocity
    /// v (components in the canonical orthonormal frame), evaluated at t.
    pub fn exp_one_param(&self, v: [f64; 3], t: f64) -> GroupElement {
        match self {
            MetricLieGroup::Unimodular(u) if u.lambda.is_some() => {
                let lam = u.lambda.unwrap();
                GroupElement::Quat(Quat::exp_imag([
                    t * v[0] * lam[0],
                    t * v[1] * lam[1],
                    t * v[2] * lam[2],
                ]))
            }
            _ => {
                let mat = self
                    .coords_matrix()
                    .expect("exp_one_param requires a realized group");
                let w = [t * v[0], t * v[1], t * v[2]];
                let ph = mat.scale(w[2]).phi1();
                let p = ph.apply([w[0], w[1]]);
                GroupElement::Coords([p[0], p[1], w[2]])
            }
        }
    }

    /// Principal logarithm in frame components at the identity.
    pub fn log(&self, p: &GroupElement) -> [f64; 3] {
        match p {
            GroupElement::Quat(q) => {
                let u = match self {
                    MetricLieGroup::Unimodular(u) => u,
                    _ => panic!("quaternion element on a non-unimodular group"),
                };
                let lam = u.lambda.expect("quaternion realization");
                let v = q.log_imag();
                [v[0] / lam[0], v[1] / lam[1], v[2] / lam[2]]
            }
            GroupElement::Coords(c) => {
                let mat = self.coords_matrix().expect("realized group");
                let ph = mat.scale(c[2]).phi1();
                let p2 = ph
                    .solve([c[0], c[1]])
                    .unwrap_or_else(|| [c[0], c[1]]);
                [p2[0], p2[1], c[2]]
            }
        }
    }

    /// Left-invariant distance proxy |log(p^-1 q)| in the frame metric.
    pub fn distance(&self, p: &GroupElement, q: &GroupElement) -> f64 {
        let rel = self.multiply(&self.inverse(p), q);
        let v = self.log(&rel);
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    /// Translates identity-frame components into the realization tangent at p
    /// and steps the group element by the exponential of that increment:
    /// p <- p * exp(v).
    pub fn step(&self, p: &GroupElement, v: [f64; 3]) -> GroupElement {
        self.multiply(p, &self.exp_one_param(v, 1.0))
    }

    /// Metric tensor in (x, y, z) coordinates of the semidirect realization.
    pub fn semidirect_metric_at(&self, point: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        let mat = self.coords_matrix()?;
        let f = mat.scale(-point[2]).exp();
        let ftf = f.transpose().matmul(&f);
        Ok([
            [ftf.0[0][0], ftf.0[0][1], 0.0],
            [ftf.0[1][0], ftf.0[1][1], 0.0],
            [0.0, 0.0, 1.0],
        ])
    }

    /// Canonical frame vectors at a point, as columns in coordinate components.
    pub fn semidirect_frame_at(&self, point: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        let mat = self.coords_matrix()?;
        let e = mat.scale(point[2]).exp();
        Ok([
            [e.0[0][0], e.0[1][0], 0.0],
            [e.0[0][1], e.0[1][1], 0.0],
            [0.0, 0.0, 1.0],
        ])
    }

    /// Right-invariant field F_i at x, returned in canonical frame components
    /// at x. F_i is the differential of right translation by x applied to
    /// (E_i)_e; its flow moves along the right coset Gamma_i x.
    pub fn right_invariant_field(&self, i: usize, x: &GroupElement) -> [f64; 3] {
        assert!((1..=3).contains(&i));
        match x {
            GroupElement::Quat(q) => {
                let u = match self {
                    MetricLieGroup::Unimodular(u) => u,
                    _ => unreachable!(),
                };
                let lam = u.lambda.expect("quaternion realization");
                let v = Quat::imag_unit(i).scale(lam[i - 1]);
                // translate e_i q back to the identity: q^{-1} (e_i q)
                let w = q.inverse().mul(&v.mul(q));
                let im = w.imag_part();
                [im[0] / lam[0], im[1] / lam[1], im[2] / lam[2]]
            }
            GroupElement::Coords(c) => {
                let mat = self.coords_matrix().expect("realized group");
                // d(r_x)_e (u_p, u3) = (u_p + u3 A x_p, u3) in coordinates
                let (up, u3) = match i {
                    1 => ([1.0, 0.0], 0.0),
                    2 => ([0.0, 1.0], 0.0),
                    _ => ([0.0, 0.0], 1.0),
                };
                let ax = mat.apply([c[0], c[1]]);
                let coord = [up[0] + u3 * ax[0], up[1] + u3 * ax[1]];
                // frame components solve e^{zA} (f1, f2) = coordinate part
                let e = mat.scale(c[2]).exp();
                let f = e.solve(coord).expect("frame change is invertible");
                [f[0], f[1], u3]
            }
        }
    }

    /// Structure constant tensor: [E_i, E_j] = sum_k bracket[i][j][k] E_k.
    pub fn bracket_table(&self) -> [[[f64; 3]; 3]; 3] {
        let mut t = [[[0.0; 3]; 3]; 3];
        match self {
            MetricLieGroup::Unimodular(u) => {
                // [E2,E3] = c1 E1 and cyclic
                t[1][2][0] = u.c[0];
                t[2][1][0] = -u.c[0];
                t[2][0][1] = u.c[1];
                t[0][2][1] = -u.c[1];
                t[0][1][2] = u.c[2];
                t[1][0][2] = -u.c[2];
            }
            MetricLieGroup::NonUnimodular(n) => {
                let m = n.mat.0;
                // [E1,E2] = 0, [E3,E1] = a E1 + c E2, [E3,E2] = b E1 + d E2
                t[2][0][0] = m[0][0];
                t[2][0][1] = m[1][0];
                t[0][2][0] = -m[0][0];
                t[0][2][1] = -m[1][0];
                t[2][1][0] = m[0][1];
                t[2][1][1] = m[1][1];
                t[1][2][0] = -m[0][1];
                t[1][2][1] = -m[1][1];
            }
        }
        t
    }

    /// Levi-Civita connection coefficients: nabla_{E_i} E_j = sum_k conn[i][j][k] E_k.
    pub fn connection_table(&self) -> [[[f64; 3]; 3]; 3] {
        let mut t = [[[0.0; 3]; 3]; 3];
        match self {
            MetricLieGroup::Unimodular(u) => {
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            t[i][j][k] = u.mu[i] * levi_civita(i, j, k);
                        }
                    }
                }
            }
            MetricLieGroup::NonUnimodular(n) => {
                let m = n.mat.0;
                let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
                let s = 0.5 * (b + c);
                t[0][0][2] = a;
                t[0][1][2] = s;
                t[0][2][0] = -a;
                t[0][2][1] = -s;
                t[1][0][2] = s;
                t[1][1][2] = d;
                t[1][2][0] = -s;
                t[1][2][1] = -d;
                t[2][0][1] = 0.5 * (c - b);
                t[2][1][0] = 0.5 * (b - c);
            }
        }
        t
    }

    /// Ricci quadratic form on unit tangent vectors at the identity,
    /// n in canonical frame components.
    pub fn ricci_quadratic(&self, n: [f64; 3]) -> f64 {
        let ric = self.ricci_matrix();
        let mut acc = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                acc += ric[j][k] * n[j] * n[k];
            }
        }
        acc
    }

    /// Ricci tensor in the canonical frame, assembled from the connection and
    /// bracket tables. For unimodular groups this reproduces the diagonal
    /// (2 mu2 mu3, 2 mu1 mu3, 2 mu1 mu2).
    pub fn ricci_matrix(&self) -> [[f64; 3]; 3] {
        let conn = self.connection_table();
        let br = self.bracket_table();
        // riem[i][j][k][m] = < R(E_i, E_j) E_k , E_m >
        let mut ric = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    // m = i component of R(E_i, E_j) E_k
                    let mut r = 0.0;
                    for l in 0..3 {
                        r += conn[j][k][l] * conn[i][l][i];
                        r -= conn[i][k][l] * conn[j][l][i];
                        r -= br[i][j][l] * conn[l][k][i];
                    }
                    acc += r;
                }
                ric[j][k] = acc;
            }
        }
        ric
    }

    /// Inner product of frame-component vectors (the frame is orthonormal).
    pub fn frame_inner(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn classify_unimodular(c: &[f64; 3]) -> (LieType, usize) {
    let eq = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let pos = c.iter().filter(|&&x| x > 0.0).count();
    let neg = c.iter().filter(|&&x| x < 0.0).count();
    let zero = 3 - pos - neg;
    let all_equal = eq(c[0], c[1]) && eq(c[1], c[2]);
    let some_pair_equal = eq(c[0], c[1]) || eq(c[1], c[2]) || eq(c[0], c[2]);
    match (pos, neg, zero) {
        (3, 0, 0) => {
            let dim = if all_equal {
                6
            } else if some_pair_equal {
                4
            } else {
                3
            };
            (LieType::Su2, dim)
        }
        (2, 1, 0) => {
            let dim = if some_pair_equal { 4 } else { 3 };
            (LieType::SlTwoTilde, dim)
        }
        (2, 0, 1) => {
            // flat when the two nonzero constants agree
            let nz: Vec<f64> = c.iter().copied().filter(|x| *x != 0.0).collect();
            let dim = if eq(nz[0], nz[1]) { 6 } else { 3 };
            (LieType::EuclideanTilde, dim)
        }
        (1, 1, 1) => (LieType::Sol, 3),
        (1, 0, 2) => (LieType::Nil, 4),
        (0, 0, 3) => (LieType::Abelian, 6),
        _ => unreachable!("at most one negative constant"),
    }
}
