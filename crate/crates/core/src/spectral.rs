//! Spectral certificates: the Jacobi operator and its low spectrum, the
//! right-invariant Jacobi functions, the Gauss map degree, and the
//! quadratic-differential uniqueness certificate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::GaussField;
use crate::frame::ImmersedSphere;
use crate::group::MetricLieGroup;
use crate::mesh::SphereMesh;
use crate::potential::{Chart, HPotential};
use crate::solver;
use crate::sparse::{self, Csr};

/// Degree of the sphere-to-sphere map by signed-area summation, and the
/// minimum pointwise Jacobian over vertices.
pub fn gauss_degree(mesh: &SphereMesh, field: &GaussField) -> (i64, f64) {
    let mut total = 0.0;
    for t in &mesh.tris {
        let a = field.sphere_point(t[0]);
        let b = field.sphere_point(t[1]);
        let c = field.sphere_point(t[2]);
        total += solid_angle(a, b, c);
    }
    let degree = (total / (4.0 * std::f64::consts::PI)).round() as i64;

    let mut min_jac = f64::INFINITY;
    for v in 0..mesh.num_vertices() as u32 {
        if let Some(jet) = field.jet(mesh, v) {
            let zdom = mesh.coord(jet.domain, v).unwrap();
            let wdom = (1.0 + zdom.norm_sqr()).powi(2);
            let wtar = (1.0 + jet.val.norm_sqr()).powi(2);
            let j = (jet.gz.norm_sqr() - jet.gzb.norm_sqr()) * wdom / wtar;
            min_jac = min_jac.min(j);
        } else {
            min_jac = f64::NEG_INFINITY;
        }
    }
    (degree, min_jac)
}

/// Signed solid angle of a spherical triangle (Oosterom-Strackee).
fn solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    let ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let bc = b[0] * c[0] + b[1] * c[1] + b[2] * c[2];
    let ca = c[0] * a[0] + c[1] * a[1] + c[2] * a[2];
    2.0 * triple.atan2(1.0 + ab + bc + ca)
}

/// Discrete Jacobi operator on the induced metric: cotangent stiffness S,
/// lumped mass M, and the diagonal potential |sigma|^2 + Ric(N).
/// The operator acts as -L u = M^{-1} S u - pot u.
pub struct JacobiOperator {
    pub stiffness: Csr,
    pub mass: Vec<f64>,
    pub potential: Vec<f64>,
    /// Mean intrinsic edge length of the induced mesh.
    pub mean_edge: f64,
}

/// Intrinsic edge lengths of a triangle in its chart.
fn triangle_edges(
    mesh: &SphereMesh,
    lambda: &[f64],
    t: &[u32; 3],
) -> Option<[f64; 3]> {
    let ch = solver::triangle_chart(mesh, t);
    let z = [
        mesh.coord(ch, t[0])?,
        mesh.coord(ch, t[1])?,
        mesh.coord(ch, t[2])?,
    ];
    let l = [
        solver::factor_in_chart(mesh, t[0], lambda[t[0] as usize], ch),
        solver::factor_in_chart(mesh, t[1], lambda[t[1] as usize], ch),
        solver::factor_in_chart(mesh, t[2], lambda[t[2] as usize], ch),
    ];
    let el = |i: usize, j: usize| (z[i] - z[j]).norm() * 0.5 * (l[i].sqrt() + l[j].sqrt());
    // edge k is opposite vertex k
    Some([el(1, 2), el(0, 2), el(0, 1)])
}

/// Assembles the Jacobi operator of an immersed sphere.
pub fn jacobi_operator(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    imm: &ImmersedSphere,
    sigma_sq: &[f64],
) -> Result<JacobiOperator> {
    let n = mesh.num_vertices();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut mass = vec![0.0; n];
    for (ti, t) in mesh.tris.iter().enumerate() {
        let e = triangle_edges(mesh, &imm.lambda, t).ok_or(Error::DegenerateTriangle {
            triangle: ti,
            aspect: f64::INFINITY,
        })?;
        let s = 0.5 * (e[0] + e[1] + e[2]);
        let area2 = s * (s - e[0]) * (s - e[1]) * (s - e[2]);
        if area2 <= 0.0 {
            return Err(Error::DegenerateTriangle {
                triangle: ti,
                aspect: f64::INFINITY,
            });
        }
        let area = area2.sqrt();
        let emax = e[0].max(e[1]).max(e[2]);
        let aspect = emax * emax / (2.0 * area);
        if aspect > 1e6 {
            return Err(Error::DegenerateTriangle {
                triangle: ti,
                aspect,
            });
        }
        // cot of angle at vertex k from the law of cosines
        for k in 0..3 {
            let (a, b, c) = (e[k], e[(k + 1) % 3], e[(k + 2) % 3]);
            let cosk = (b * b + c * c - a * a) / (2.0 * b * c);
            let sink = (1.0 - cosk * cosk).max(1e-14).sqrt();
            let w = 0.5 * cosk / sink;
            let (i, j) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            rows[i as usize].push((j, -w));
            rows[j as usize].push((i, -w));
            rows[i as usize].push((i, w));
            rows[j as usize].push((j, w));
            mass[t[k] as usize] += area / 3.0;
        }
    }
    let stiffness = Csr::from_rows(n, n, rows);
    let mut potential = Vec::with_capacity(n);
    for v in 0..n {
        potential.push(sigma_sq[v] + group.ricci_quadratic(imm.normals[v]));
    }
    let mut mean_edge = 0.0;
    let mut count = 0usize;
    for t in &mesh.tris {
        if let Some(e) = triangle_edges(mesh, &imm.lambda, t) {
            mean_edge += e[0] + e[1] + e[2];
            count += 3;
        }
    }
    mean_edge /= count as f64;
    Ok(JacobiOperator {
        stiffness,
        mass,
        potential,
        mean_edge,
    })
}

/// Smallest eigenvalues of -L with eigenvectors, by shift-inverted Lanczos
/// with full reorthogonalization in the mass inner product.
pub fn smallest_eigenpairs(
    op: &JacobiOperator,
    k: usize,
    max_lanczos: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.mass.len();
    let pot_max = op
        .potential
        .iter()
        .map(|p| p.abs())
        .fold(0.0f64, f64::max);
    let sigma = -(pot_max * 1.1 + 1.0);
    // A - sigma M with A = S - M pot (SPD by construction)
    let mut shifted = op.stiffness.clone();
    let d: Vec<f64> = (0..n)
        .map(|i| op.mass[i] * (-op.potential[i] - sigma))
        .collect();
    shifted.add_diagonal(&d, 1.0);
    let prec = sparse::auto_preconditioner(&shifted);
    let solve = |b: &[f64]| -> Result<Vec<f64>> {
        let (x, _, _) = sparse::pcg(&shifted, b, &prec, 1e-12, 10000)?;
        Ok(x)
    };
    let m_dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&op.mass)
            .map(|((x, y), m)| x * y * m)
            .sum()
    };

    let m = max_lanczos.min(n).max(2 * k + 10);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    // deterministic start vector
    let mut v0: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.3 * ((i as f64) * 0.7).sin())
        .collect();
    let n0 = m_dot(&v0, &v0).sqrt();
    for x in &mut v0 {
        *x /= n0;
    }
    basis.push(v0);
    for j in 0..m {
        // w = K q_j = (A - sigma M)^{-1} M q_j
        let qj = basis[j].clone();
        let mq: Vec<f64> = qj.iter().zip(&op.mass).map(|(x, m)| x * m).collect();
        let mut w = solve(&mq)?;
        let aj = m_dot(&w, &qj);
        alpha.push(aj);
        for i in 0..n {
            w[i] -= aj * qj[i];
        }
        if j > 0 {
            let b = beta[j - 1];
            for i in 0..n {
                w[i] -= b * basis[j - 1][i];
            }
        }
        // full reorthogonalization
        for q in &basis {
            let c = m_dot(&w, q);
            for i in 0..n {
                w[i] -= c * q[i];
            }
        }
        let bj = m_dot(&w, &w).sqrt();
        if bj < 1e-13 || j + 1 == m {
            beta.push(bj);
            break;
        }
        beta.push(bj);
        for x in &mut w {
            *x /= bj;
        }
        basis.push(w);
    }
    let steps = alpha.len();
    let mut tri = nalgebra::DMatrix::zeros(steps, steps);
    for j in 0..steps {
        tri[(j, j)] = alpha[j];
        if j + 1 < steps {
            tri[(j, j + 1)] = beta[j];
            tri[(j + 1, j)] = beta[j];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(tri);
    // theta sorted descending: largest theta = smallest lambda
    let mut order: Vec<usize> = (0..steps).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let kk = k.min(steps);
    let mut values = Vec::with_capacity(kk);
    let mut vectors = Vec::with_capacity(kk);
    for &oi in order.iter().take(kk) {
        let theta = eig.eigenvalues[oi];
        if theta.abs() < 1e-300 {
            return Err(Error::EigenFailure("vanishing Ritz value".into()));
        }
        values.push(sigma + 1.0 / theta);
        let mut x = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            let c = eig.eigenvectors[(j, oi)];
            for i in 0..n {
                x[i] += c * q[i];
            }
        }
        let nx = m_dot(&x, &x).sqrt();
        for xi in &mut x {
            *xi /= nx;
        }
        vectors.push(x);
    }
    Ok((values, vectors))
}

/// Spectral report of an immersed sphere.
#[derive(Debug, Clone)]
pub struct JacobiReport {
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub nullity: usize,
    pub tolerance: f64,
    /// Relative operator residuals of the right-invariant Jacobi functions.
    pub jacobi_residuals: [f64; 3],
    /// Smallest singular value fraction of the Gram matrix of (u1,u2,u3).
    pub gram_condition: f64,
    /// Mass-norm fraction of each u_i inside the computed kernel space.
    pub kernel_projection: [f64; 3],
}

/// Applies -L to a function: M^{-1} S u - pot u.
fn apply_neg_l(op: &JacobiOperator, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut su = vec![0.0; n];
    op.stiffness.matvec(u, &mut su);
    (0..n)
        .map(|i| su[i] / op.mass[i] - op.potential[i] * u[i])
        .collect()
}

/// The right-invariant Jacobi functions u_i = <F_i, N> of an immersion.
pub fn right_invariant_jacobi(
    group: &MetricLieGroup,
    imm: &ImmersedSphere,
) -> [Vec<f64>; 3] {
    let n = imm.positions.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for v in 0..n {
        for i in 1..=3 {
            let f = group.right_invariant_field(i, &imm.positions[v]);
            out[i - 1][v] = group.frame_inner(f, imm.normals[v]);
        }
    }
    out
}

/// Index and nullity of -L given eigenvalues and a threshold.
pub fn index_nullity(eigenvalues: &[f64], tol: f64) -> (usize, usize) {
    let index = eigenvalues.iter().filter(|&&l| l < -tol).count();
    let nullity = eigenvalues.iter().filter(|&&l| l.abs() <= tol).count();
    (index, nullity)
}

/// Full spectral certificate: low spectrum, index/nullity with the
/// h^2-scaled threshold, and the right-invariant kernel checks.
pub fn jacobi_report(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    imm: &ImmersedSphere,
    sigma_sq: &[f64],
    k: usize,
) -> Result<JacobiReport> {
    let op = jacobi_operator(group, mesh, imm, sigma_sq)?;
    let (values, vectors) = smallest_eigenpairs(&op, k, 90)?;
    let pot_scale = op
        .potential
        .iter()
        .map(|p| p.abs())
        .fold(1.0f64, f64::max);
    let tol = 5.0 * op.mean_edge * op.mean_edge * pot_scale;
    let (index, nullity) = index_nullity(&values, tol);

    let us = right_invariant_jacobi(group, imm);
    let m_dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&op.mass)
            .map(|((x, y), m)| x * y * m)
            .sum()
    };
    let mut jacobi_residuals = [0.0; 3];
    for (i, u) in us.iter().enumerate() {
        let lu = apply_neg_l(&op, u);
        jacobi_residuals[i] = (m_dot(&lu, &lu) / m_dot(u, u).max(1e-300)).sqrt();
    }
    let mut gram = nalgebra::DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            gram[(i, j)] = m_dot(&us[i], &us[j]);
        }
    }
    let svs = gram.svd(false, false).singular_values;
    let gram_condition = svs[2] / svs[0];

    // kernel projection: fraction of each u_i inside the null cluster
    let kernel: Vec<&Vec<f64>> = values
        .iter()
        .zip(&vectors)
        .filter(|(l, _)| l.abs() <= tol)
        .map(|(_, v)| v)
        .collect();
    let mut kernel_projection = [0.0; 3];
    for (i, u) in us.iter().enumerate() {
        let un = m_dot(u, u).sqrt();
        let mut acc = 0.0;
        for q in &kernel {
            let c = m_dot(u, q);
            acc += c * c;
        }
        kernel_projection[i] = acc.sqrt() / un.max(1e-300);
    }
    Ok(JacobiReport {
        eigenvalues: values,
        index,
        nullity,
        tolerance: tol,
        jacobi_residuals,
        gram_condition,
        kernel_projection,
    })
}

/// Two-chart tabulation of the reference function
/// L(q) = -conj(g_zb) / (R(q) g_z) over the Gauss image, with locate-and-fit
/// node construction and bicubic evaluation.
pub struct LTable {
    pub grids: [LGrid; 2],
}

pub struct LGrid {
    pub chart: Chart,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub value: Vec<Complex64>,
    pub valid: Vec<bool>,
}

impl LGrid {
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// Four-point Lagrange tensor interpolation; None when the 4x4 block
    /// leaves the valid region.
    fn eval(&self, q: Complex64) -> Option<Complex64> {
        let h = self.step();
        let fx = (q.re - self.min) / h;
        let fy = (q.im - self.min) / h;
        let ix = (fx.floor() as isize - 1).clamp(0, self.n as isize - 4) as usize;
        let iy = (fy.floor() as isize - 1).clamp(0, self.n as isize - 4) as usize;
        if fx < 0.0 || fy < 0.0 || fx > (self.n - 1) as f64 || fy > (self.n - 1) as f64 {
            return None;
        }
        let lag = |t: f64| -> [f64; 4] {
            [
                -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
                t * (t - 2.0) * (t - 3.0) / 2.0,
                -t * (t - 1.0) * (t - 3.0) / 2.0,
                t * (t - 1.0) * (t - 2.0) / 6.0,
            ]
        };
        let wx = lag(fx - ix as f64);
        let wy = lag(fy - iy as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                let id = self.idx(ix + a, iy + b);
                if !self.valid[id] {
                    return None;
                }
                acc += wx[a] * wy[b] * self.value[id];
            }
        }
        Some(acc)
    }
}

/// Discrete L value at a vertex in the requested chart representation.
fn l_value(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &GaussField,
    v: u32,
    chart: Chart,
) -> Option<Complex64> {
    let jet = field.jet(mesh, v)?;
    // convert the jet to the requested target chart
    let (val, gz, gzb) = if jet.target == chart {
        (jet.val, jet.gz, jet.gzb)
    } else {
        if jet.val.norm() < 1e-9 {
            return None;
        }
        let f = -1.0 / (jet.val * jet.val);
        (1.0 / jet.val, jet.gz * f, jet.gzb * f)
    };
    let r = hp.eval(chart, val);
    if r.norm() < crate::pde::POTENTIAL_FLOOR || gz.norm() < 1e-14 {
        return None;
    }
    Some(-gzb.conj() / (r * gz))
}

/// Builds the two-chart L table from a converged reference field.
pub fn build_l_table(
    mesh: &SphereMesh,
    hp: &HPotential,
    reference: &GaussField,
    n: usize,
) -> Result<LTable> {
    let span = 1.15;
    let mut grids = Vec::with_capacity(2);
    for chart in [Chart::Z, Chart::W] {
        let mut grid = LGrid {
            chart,
            n,
            min: -span,
            max: span,
            value: vec![Complex64::new(0.0, 0.0); n * n],
            valid: vec![false; n * n],
        };
        let h = grid.step();
        // squared distance from node to the triangle centroid of its filler
        let mut best = vec![f64::INFINITY; n * n];
        for t in &mesh.tris {
            let q: Option<Vec<Complex64>> = t
                .iter()
                .map(|&v| reference.value_in(v, chart))
                .collect();
            let Some(q) = q else { continue };
            if q.iter().all(|x| x.norm() > 1.35) {
                continue;
            }
            let (q0, q1, q2) = (q[0], q[1], q[2]);
            let centroid = (q0 + q1 + q2) / 3.0;
            let lo_x = ((q0.re.min(q1.re).min(q2.re) - grid.min) / h).floor() as isize;
            let hi_x = ((q0.re.max(q1.re).max(q2.re) - grid.min) / h).ceil() as isize;
            let lo_y = ((q0.im.min(q1.im).min(q2.im) - grid.min) / h).floor() as isize;
            let hi_y = ((q0.im.max(q1.im).max(q2.im) - grid.min) / h).ceil() as isize;
            for j in lo_y.max(0)..=(hi_y.min(n as isize - 1)) {
                for i in lo_x.max(0)..=(hi_x.min(n as isize - 1)) {
                    let node = Complex64::new(
                        grid.min + i as f64 * h,
                        grid.min + j as f64 * h,
                    );
                    // inside test via barycentric signs
                    let d = |a: Complex64, b: Complex64, p: Complex64| {
                        (b.re - a.re) * (p.im - a.im) - (b.im - a.im) * (p.re - a.re)
                    };
                    let s0 = d(q0, q1, node);
                    let s1 = d(q1, q2, node);
                    let s2 = d(q2, q0, node);
                    let inside = (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0)
                        || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0);
                    if !inside {
                        continue;
                    }
                    let id = grid.idx(i as usize, j as usize);
                    let dist = (node - centroid).norm_sqr();
                    if dist >= best[id] {
                        continue;
                    }
                    // local fit of L around the nearest corner in image space
                    let mut corner = t[0];
                    let mut cd = f64::INFINITY;
                    for (ci, &cv) in t.iter().enumerate() {
                        let dd = (q[ci] - node).norm_sqr();
                        if dd < cd {
                            cd = dd;
                            corner = cv;
                        }
                    }
                    if let Some(val) =
                        fit_l_at(mesh, hp, reference, corner, chart, node)
                    {
                        grid.value[id] = val;
                        grid.valid[id] = true;
                        best[id] = dist;
                    }
                }
            }
        }
        grids.push(grid);
    }
    let mut it = grids.into_iter();
    Ok(LTable {
        grids: [it.next().unwrap(), it.next().unwrap()],
    })
}

/// Weighted cubic fit of the scattered (image point, L value) data of the
/// two-ring around a vertex, evaluated at an image point.
fn fit_l_at(
    mesh: &SphereMesh,
    hp: &HPotential,
    reference: &GaussField,
    center: u32,
    chart: Chart,
    at: Complex64,
) -> Option<Complex64> {
    let qc = reference.value_in(center, chart)?;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    pts.push(Complex64::new(0.0, 0.0));
    vals.push(l_value(mesh, hp, reference, center, chart)?);
    for &u in &mesh.two_ring[center as usize] {
        let qu = reference.value_in(u, chart)?;
        pts.push(qu - qc);
        vals.push(l_value(mesh, hp, reference, u, chart)?);
    }
    crate::mesh::weighted_poly_eval(&pts, &vals, at - qc, 3)
}

/// Per-vertex scaled quadratic-differential certificate of a candidate
/// field against a tabulated reference.
#[derive(Debug, Clone)]
pub struct QhField {
    pub per_vertex: Vec<f64>,
    pub sup_norm: f64,
    /// True when some candidate value left the tabulated coverage and the
    /// direct reference fit was used instead.
    pub extrapolated: bool,
}

/// Evaluates Q_H = L(g) g_z^2 + g_z conj(g_zb) / R(g) on the candidate,
/// scaled by the candidate's conformal factor, using the reference table.
pub fn qh_certificate(
    mesh: &SphereMesh,
    hp: &HPotential,
    table: &LTable,
    candidate: &GaussField,
) -> Result<QhField> {
    let n = mesh.num_vertices();
    let mut per_vertex = Vec::with_capacity(n);
    let mut extrapolated = false;
    for v in 0..n as u32 {
        let jet = candidate.jet(mesh, v).ok_or(Error::PotentialZeroOnRange {
            vertex: v as usize,
            value: candidate.val[v as usize],
            abs_r: 0.0,
        })?;
        let grid = match jet.target {
            Chart::Z => &table.grids[0],
            Chart::W => &table.grids[1],
        };
        let lval = match grid.eval(jet.val) {
            Some(x) => x,
            None => {
                extrapolated = true;
                Complex64::new(f64::NAN, f64::NAN)
            }
        };
        if !lval.re.is_finite() {
            return Err(Error::EigenFailure(format!(
                "reference table does not cover candidate value {} at vertex {v}",
                jet.val
            )));
        }
        let r = hp.eval(jet.target, jet.val);
        if r.norm() < crate::pde::POTENTIAL_FLOOR {
            return Err(Error::PotentialZeroOnRange {
                vertex: v as usize,
                value: jet.val,
                abs_r: r.norm(),
            });
        }
        let q = lval * jet.gz * jet.gz + jet.gz * jet.gzb.conj() / r;
        let d = 1.0 + jet.val.norm_sqr();
        let lambda = 4.0 * d * d * jet.gz.norm_sqr() / r.norm_sqr();
        per_vertex.push(q.norm() / lambda.max(1e-300));
    }
    let sup_norm = per_vertex.iter().cloned().fold(0.0, f64::max);
    Ok(QhField {
        per_vertex,
        sup_norm,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame;

    #[test]
    fn identity_and_reflection_degrees() {
        let m = SphereMesh::build(2);
        let f = GaussField::identity(&m, 0.0);
        let (deg, minj) = gauss_degree(&m, &f);
        assert_eq!(deg, 1);
        assert!(minj > 0.0);

        let mut g = f.clone();
        for v in 0..m.num_vertices() {
            g.val[v] = Complex64::new(g.val[v].re, -g.val[v].im);
        }
        let (deg, minj) = gauss_degree(&m, &g);
        assert_eq!(deg, -1);
        assert!(minj < 0.0);
    }

    fn round_immersion(level: u32, h: f64) -> (MetricLieGroup, SphereMesh, GaussField, ImmersedSphere, Vec<f64>) {
        let mesh = SphereMesh::build(level);
        let group = MetricLieGroup::unimodular([2.0, 2.0, 2.0]).unwrap();
        let hp = HPotential::new(&group, h);
        let field = GaussField::identity(&mesh, h);
        let coeffs = frame::frame_coefficients(&mesh, &hp, &field).unwrap();
        let imm = frame::integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            frame::TreeKind::BreadthFirst,
        )
        .unwrap();
        let ff = frame::fundamental_forms(&group, &mesh, &field, &coeffs).unwrap();
        (group, mesh, field, imm, ff.sigma_sq)
    }

    #[test]
    fn jacobi_potential_round_values() {
        let (group, mesh, _f, imm, sig) = round_immersion(3, 0.0);
        let op = jacobi_operator(&group, &mesh, &imm, &sig).unwrap();
        for v in 0..mesh.num_vertices() {
            assert!((op.potential[v] - 2.0).abs() < 1e-3, "pot {}", op.potential[v]);
        }
        // Laplacian annihilates constants
        let ones = vec![1.0; mesh.num_vertices()];
        let lu = apply_neg_l(&op, &ones);
        for v in 0..mesh.num_vertices() {
            assert!((lu[v] + op.potential[v]).abs() < 1e-9);
        }
        let (group, mesh, _f, imm, sig) = round_immersion(3, 1.0);
        let op = jacobi_operator(&group, &mesh, &imm, &sig).unwrap();
        for v in 0..mesh.num_vertices() {
            assert!((op.potential[v] - 4.0).abs() < 2e-2, "pot {}", op.potential[v]);
        }
    }

    #[test]
    fn round_minimal_spectrum() {
        let (group, mesh, _f, imm, sig) = round_immersion(3, 0.0);
        let rep = jacobi_report(&group, &mesh, &imm, &sig, 9).unwrap();
        // -L spectrum of the unit two-sphere with potential 2:
        // -2, 0 (x3), 4 (x5)
        assert_eq!((rep.index, rep.nullity), (1, 3), "{:?}", rep.eigenvalues);
        assert!((rep.eigenvalues[0] + 2.0).abs() < 0.02 * 2.0, "{:?}", rep.eigenvalues);
        for i in 1..4 {
            assert!(rep.eigenvalues[i].abs() < rep.tolerance);
        }
        for i in 4..9 {
            assert!((rep.eigenvalues[i] - 4.0).abs() < 0.02 * 4.0, "{:?}", rep.eigenvalues);
        }
        for i in 0..3 {
            assert!(rep.kernel_projection[i] > 0.999, "{:?}", rep.kernel_projection);
        }
        assert!(rep.gram_condition > 1e-3);
    }

    #[test]
    fn round_h1_spectrum() {
        let (group, mesh, _f, imm, sig) = round_immersion(3, 1.0);
        let rep = jacobi_report(&group, &mesh, &imm, &sig, 9).unwrap();
        // radius sin(pi/4) sphere with potential 4: eigenvalues 2k(k+1) - 4
        assert_eq!((rep.index, rep.nullity), (1, 3), "{:?}", rep.eigenvalues);
        assert!((rep.eigenvalues[0] + 4.0).abs() < 0.04 * 4.0);
        for i in 4..9 {
            assert!((rep.eigenvalues[i] - 8.0).abs() < 0.02 * 8.0, "{:?}", rep.eigenvalues);
        }
    }

    #[test]
    fn qh_certificate_self_and_perturbed() {
        let (group, mesh, field, _imm, _sig) = round_immersion(3, 1.0);
        let hp = HPotential::new(&group, 1.0);
        let table = build_l_table(&mesh, &hp, &field, 256).unwrap();
        let qh = qh_certificate(&mesh, &hp, &table, &field).unwrap();
        assert!(qh.sup_norm < 1e-6, "self norm {}", qh.sup_norm);
        assert!(!qh.extrapolated);

        let mut pert = field.clone();
        pert.perturb_smooth(0.01, 7);
        let qh2 = qh_certificate(&mesh, &hp, &table, &pert).unwrap();
        assert!(qh2.sup_norm > 1e-2, "perturbed norm {}", qh2.sup_norm);
    }

    #[test]
    fn qh_invariant_under_mesh_automorphism() {
        let (group, mesh, field, _imm, _sig) = round_immersion(3, 1.0);
        let hp = HPotential::new(&group, 1.0);
        let table = build_l_table(&mesh, &hp, &field, 256).unwrap();
        let base = qh_certificate(&mesh, &hp, &table, &field).unwrap();
        // fivefold polar rotation and the pole swap are exact domain
        // Moebius maps of the discretization
        let c = (std::f64::consts::TAU / 5.0).cos();
        let s = (std::f64::consts::TAU / 5.0).sin();
        let rot5 = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let th: f64 = std::f64::consts::PI / 10.0;
        let (ct, st) = (th.cos(), th.sin());
        let swap = [
            [2.0 * ct * ct - 1.0, 2.0 * ct * st, 0.0],
            [2.0 * ct * st, 2.0 * st * st - 1.0, 0.0],
            [0.0, 0.0, -1.0],
        ];
        for rot in [rot5, swap] {
            let perm = mesh.automorphism_from_rotation(&rot).unwrap();
            let cand = field.permuted(&perm);
            let qh = qh_certificate(&mesh, &hp, &table, &cand).unwrap();
            assert!(
                qh.sup_norm < base.sup_norm * 2.0 + 1e-9,
                "automorphism norm {} vs {}",
                qh.sup_norm,
                base.sup_norm
            );
        }
    }
}
