//! Moving-frame reconstruction of immersions from Gauss fields.
//!
//! A solved field determines frame coefficients (A1, A2, A3) of the
//! logarithmic derivative of the immersion, an integrability defect that
//! vanishes on exact solutions, and the immersion itself by path
//! integration of f^{-1} f_z over a spanning tree of mesh edges with
//! fourth-order Magnus steps in the group.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::GaussField;
use crate::group::{GroupElement, MetricLieGroup};
use crate::mesh::SphereMesh;
use crate::potential::{Chart, HPotential};

/// Frame coefficients per vertex, stored in each vertex's domain chart.
#[derive(Debug, Clone)]
pub struct FrameCoefficients {
    pub a: Vec<[Complex64; 3]>,
    pub eta: Vec<Complex64>,
    pub lambda: Vec<f64>,
}

/// Reconstructed immersion: per-vertex group positions, unit normals as
/// Gauss-sphere values in the identity tangent space, conformal factor,
/// and the holonomy mismatch over non-tree edges.
#[derive(Debug, Clone)]
pub struct ImmersedSphere {
    pub h: f64,
    pub positions: Vec<GroupElement>,
    pub normals: Vec<[f64; 3]>,
    pub lambda: Vec<f64>,
    pub closure_residual: f64,
}

/// Second-fundamental-form data per vertex in domain-chart coordinates.
#[derive(Debug, Clone)]
pub struct FundamentalForms {
    /// Complex (2,0) component <nabla_{f_z} f_z, N>.
    pub sigma_zz: Vec<Complex64>,
    /// Pointwise mean curvature 2 sigma_zzb / lambda.
    pub mean_h: Vec<f64>,
    /// Squared norm of the second fundamental form.
    pub sigma_sq: Vec<f64>,
}

/// Frame coefficients, eta and lambda from a chart value and derivative.
/// In the w chart the same formulas apply with the transported potential;
/// the returned coefficients are finite across both charts.
pub fn coefficients_at(
    hp: &HPotential,
    target: Chart,
    val: Complex64,
    dz: Complex64,
) -> Option<([Complex64; 3], Complex64, f64)> {
    let r = hp.eval(target, val);
    if r.norm() < crate::pde::POTENTIAL_FLOOR {
        return None;
    }
    let i1 = Complex64::new(0.0, 1.0);
    let vb = val.conj();
    let (a, eta) = match target {
        Chart::Z => {
            let eta = 4.0 * vb * dz / r;
            let a1 = dz * (vb * vb - 1.0) / r;
            let a2 = i1 * dz * (vb * vb + 1.0) / r;
            let a3 = 2.0 * vb * dz / r;
            ([a1, a2, a3], eta)
        }
        Chart::W => {
            // u = 1/g: eta = -4 ubar u_z / Rw(u)
            let eta = -4.0 * vb * dz / r;
            let a1 = -dz * (1.0 - vb * vb) / r;
            let a2 = -i1 * dz * (1.0 + vb * vb) / r;
            let a3 = -2.0 * vb * dz / r;
            ([a1, a2, a3], eta)
        }
    };
    let d = 1.0 + val.norm_sqr();
    let lambda = 4.0 * d * d * dz.norm_sqr() / r.norm_sqr();
    Some((a, eta, lambda))
}

/// Per-vertex frame coefficients of a field.
pub fn frame_coefficients(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &GaussField,
) -> Result<FrameCoefficients> {
    let n = mesh.num_vertices();
    let mut a = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let jet = field.jet(mesh, v).ok_or(Error::PotentialZeroOnRange {
            vertex: v as usize,
            value: field.val[v as usize],
            abs_r: 0.0,
        })?;
        let (av, ev, lv) =
            coefficients_at(hp, jet.target, jet.val, jet.gz).ok_or(Error::PotentialZeroOnRange {
                vertex: v as usize,
                value: jet.val,
                abs_r: hp.eval(jet.target, jet.val).norm(),
            })?;
        a.push(av);
        eta.push(ev);
        lambda.push(lv);
    }
    Ok(FrameCoefficients { a, eta, lambda })
}

/// Frame coefficients of vertex u expressed in the given domain chart.
/// The coefficients transform as (1,0)-forms: A_c = A_{c'} dc'/dc.
fn a_in_chart(
    mesh: &SphereMesh,
    coeffs: &FrameCoefficients,
    u: u32,
    chart: Chart,
) -> Option<[Complex64; 3]> {
    let own = mesh.domain_chart(u);
    let a = coeffs.a[u as usize];
    if own == chart {
        return Some(a);
    }
    let c = mesh.coord(chart, u)?;
    if c.norm() < 1e-12 {
        return None;
    }
    let f = -1.0 / (c * c);
    Some([a[0] * f, a[1] * f, a[2] * f])
}

/// Integrability defect per vertex: the norm of
/// (A_k)_zb + sum_{ij} conj(A_i) A_j Gamma_{ij}^k - (lambda H / 2) n_k,
/// scaled by the domain-chart equalizer.
pub fn integrability_residual(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    field: &GaussField,
    coeffs: &FrameCoefficients,
) -> Result<Vec<f64>> {
    let conn = group.connection_table();
    let n = mesh.num_vertices();
    let h = field.h;
    let mut out = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let domain = mesh.domain_chart(v);
        let st = mesh.stencil(domain, v).expect("active stencil");
        let i1 = Complex64::new(0.0, 1.0);
        // (A_k)_zb by stencil over chart-transported coefficients
        let mut dzb = [Complex64::new(0.0, 0.0); 3];
        for (i, &u) in st.nbrs.iter().enumerate() {
            let au = a_in_chart(mesh, coeffs, u, domain).ok_or(Error::PotentialZeroOnRange {
                vertex: u as usize,
                value: field.val[u as usize],
                abs_r: 0.0,
            })?;
            let c = 0.5 * Complex64::new(st.dx[i], 0.0) + 0.5 * i1 * st.dy[i];
            for k in 0..3 {
                dzb[k] += c * au[k];
            }
        }
        let a = a_in_chart(mesh, coeffs, v, domain).unwrap();
        let nrm = field.sphere_point(v);
        let lam = factor_in_domain(mesh, coeffs, v);
        let mut worst: f64 = 0.0;
        let zdom = mesh.coord(domain, v).unwrap();
        let scale = {
            let d = 1.0 + zdom.norm_sqr();
            4.0 / (d * d)
        };
        for k in 0..3 {
            let mut lhs = dzb[k];
            for i in 0..3 {
                for j in 0..3 {
                    if conn[i][j][k] != 0.0 {
                        lhs += a[i].conj() * a[j] * conn[i][j][k];
                    }
                }
            }
            lhs -= Complex64::new(0.5 * lam * h * nrm[k], 0.0);
            worst = worst.max(lhs.norm());
        }
        out.push(worst * scale);
    }
    Ok(out)
}

/// lambda at vertex v in its own domain chart (conversion of the stored
/// value, which already is in the domain chart).
fn factor_in_domain(_mesh: &SphereMesh, coeffs: &FrameCoefficients, v: u32) -> f64 {
    coeffs.lambda[v as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    BreadthFirst,
    DepthFirst,
}

/// Spanning tree as (parent, child) edges in visit order.
fn spanning_tree(mesh: &SphereMesh, root: u32, kind: TreeKind) -> Vec<(u32, u32)> {
    let n = mesh.num_vertices();
    let mut seen = vec![false; n];
    let mut edges = Vec::with_capacity(n - 1);
    seen[root as usize] = true;
    match kind {
        TreeKind::BreadthFirst => {
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for &v in &mesh.one_ring[u as usize] {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        edges.push((u, v));
                        queue.push_back(v);
                    }
                }
            }
        }
        TreeKind::DepthFirst => {
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                for &v in mesh.one_ring[u as usize].iter().rev() {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        edges.push((u, v));
                        stack.push(v);
                    }
                }
            }
        }
    }
    edges
}

/// Chart in which an edge is integrated; prefers u's domain chart.
fn edge_chart(mesh: &SphereMesh, u: u32, v: u32) -> Chart {
    let cu = mesh.domain_chart(u);
    match (mesh.coord(cu, u), mesh.coord(cu, v)) {
        (Some(a), Some(b)) if a.norm() <= 1.3 && b.norm() <= 1.3 => cu,
        _ => cu.other(),
    }
}

fn bracket(group_table: &[[[f64; 3]; 3]; 3], a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            let c = group_table[i][j];
            if a[i] != 0.0 && b[j] != 0.0 {
                for (k, ck) in c.iter().enumerate() {
                    out[k] += a[i] * b[j] * ck;
                }
            }
        }
    }
    out
}

/// Fourth-order Magnus step of q' = q xi(t), t in [0,1], for xi linear in t
/// between the evaluations at the two Gauss points.
fn magnus_step(
    group: &MetricLieGroup,
    table: &[[[f64; 3]; 3]; 3],
    q: &GroupElement,
    xi: &dyn Fn(f64) -> [f64; 3],
    substeps: usize,
) -> GroupElement {
    let mut out = *q;
    let hstep = 1.0 / substeps as f64;
    let c1 = 0.5 - 3.0f64.sqrt() / 6.0;
    let c2 = 0.5 + 3.0f64.sqrt() / 6.0;
    for s in 0..substeps {
        let t0 = s as f64 * hstep;
        let x1 = xi(t0 + c1 * hstep);
        let x2 = xi(t0 + c2 * hstep);
        let br = bracket(table, x2, x1);
        let w = -(3.0f64.sqrt() / 12.0) * hstep * hstep;
        let omega = [
            0.5 * hstep * (x1[0] + x2[0]) + w * br[0],
            0.5 * hstep * (x1[1] + x2[1]) + w * br[1],
            0.5 * hstep * (x1[2] + x2[2]) + w * br[2],
        ];
        out = group.step(&out, omega);
    }
    out
}

/// Group increment along a straight chart segment between two vertices.
fn edge_transport(
    group: &MetricLieGroup,
    table: &[[[f64; 3]; 3]; 3],
    mesh: &SphereMesh,
    coeffs: &FrameCoefficients,
    from: u32,
    to: u32,
    q: &GroupElement,
) -> Option<GroupElement> {
    let chart = edge_chart(mesh, from, to);
    let za = mesh.coord(chart, from)?;
    let zb = mesh.coord(chart, to)?;
    let dz = zb - za;
    let aa = a_in_chart(mesh, coeffs, from, chart)?;
    let ab = a_in_chart(mesh, coeffs, to, chart)?;
    let xi = |t: f64| -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            let ak = aa[k] * (1.0 - t) + ab[k] * t;
            out[k] = 2.0 * (ak * dz).re;
        }
        out
    };
    Some(magnus_step(group, table, q, &xi, 2))
}

/// Reconstructs the immersion by integrating f^{-1} f_z over a spanning
/// tree, with the closure residual measured over non-tree edges.
pub fn integrate_immersion(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    field: &GaussField,
    coeffs: &FrameCoefficients,
    base_vertex: u32,
    base_point: &GroupElement,
    tree: TreeKind,
) -> Result<ImmersedSphere> {
    let table = group.bracket_table();
    let n = mesh.num_vertices();
    let mut positions = vec![*base_point; n];
    let mut placed = vec![false; n];
    placed[base_vertex as usize] = true;
    for (u, v) in spanning_tree(mesh, base_vertex, tree) {
        let q = positions[u as usize];
        let next = edge_transport(group, &table, mesh, coeffs, u, v, &q).ok_or(
            Error::PotentialZeroOnRange {
                vertex: v as usize,
                value: field.val[v as usize],
                abs_r: 0.0,
            },
        )?;
        positions[v as usize] = next;
        placed[v as usize] = true;
    }
    debug_assert!(placed.iter().all(|&p| p));
    let mut closure: f64 = 0.0;
    for &(u, v) in &mesh.edges {
        let q = positions[u as usize];
        if let Some(advanced) = edge_transport(group, &table, mesh, coeffs, u, v, &q) {
            closure = closure.max(group.distance(&advanced, &positions[v as usize]));
        } else {
            closure = f64::INFINITY;
        }
    }
    let normals = (0..n as u32).map(|v| field.sphere_point(v)).collect();
    Ok(ImmersedSphere {
        h: field.h,
        positions,
        normals,
        lambda: coeffs.lambda.clone(),
        closure_residual: closure,
    })
}

/// Left-translates every position of an immersion.
pub fn left_translate(
    group: &MetricLieGroup,
    imm: &ImmersedSphere,
    p: &GroupElement,
) -> ImmersedSphere {
    let mut out = imm.clone();
    for q in &mut out.positions {
        *q = group.multiply(p, q);
    }
    out
}

/// Second fundamental form data assembled from the frame coefficients and
/// their stencil derivatives via the ambient connection table. Uses cubic
/// fits for the coefficient derivatives: the forms feed curvature
/// measurements, not the equation discretization.
pub fn fundamental_forms(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    field: &GaussField,
    coeffs: &FrameCoefficients,
) -> Result<FundamentalForms> {
    let conn = group.connection_table();
    let n = mesh.num_vertices();
    let mut sigma_zz = Vec::with_capacity(n);
    let mut mean_h = Vec::with_capacity(n);
    let mut sigma_sq = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let domain = mesh.domain_chart(v);
        let (nbrs, rows) = crate::mesh::fit_coefficient_rows(mesh, domain, v, 3)
            .or_else(|| crate::mesh::fit_coefficient_rows(mesh, domain, v, 2))
            .expect("active fit");
        let i1 = Complex64::new(0.0, 1.0);
        let mut dz = [Complex64::new(0.0, 0.0); 3];
        let mut dzb = [Complex64::new(0.0, 0.0); 3];
        for (i, &u) in nbrs.iter().enumerate() {
            let au = a_in_chart(mesh, coeffs, u, domain).ok_or(Error::PotentialZeroOnRange {
                vertex: u as usize,
                value: field.val[u as usize],
                abs_r: 0.0,
            })?;
            let cz = 0.5 * Complex64::new(rows[(1, i)], 0.0) - 0.5 * i1 * rows[(2, i)];
            let czb = 0.5 * Complex64::new(rows[(1, i)], 0.0) + 0.5 * i1 * rows[(2, i)];
            for k in 0..3 {
                dz[k] += cz * au[k];
                dzb[k] += czb * au[k];
            }
        }
        let a = a_in_chart(mesh, coeffs, v, domain).unwrap();
        let nrm = field.sphere_point(v);
        let lam = coeffs.lambda[v as usize];
        let mut szz = Complex64::new(0.0, 0.0);
        let mut szzb = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            let mut czz = dz[k];
            let mut czzb = dzb[k];
            for i in 0..3 {
                for j in 0..3 {
                    if conn[i][j][k] != 0.0 {
                        czz += a[i] * a[j] * conn[i][j][k];
                        czzb += a[i].conj() * a[j] * conn[i][j][k];
                    }
                }
            }
            szz += czz * nrm[k];
            szzb += czzb * nrm[k];
        }
        let hv = 2.0 * szzb.re / lam;
        sigma_zz.push(szz);
        mean_h.push(hv);
        sigma_sq.push(2.0 * hv * hv + 8.0 * szz.norm_sqr() / (lam * lam));
    }
    Ok(FundamentalForms {
        sigma_zz,
        mean_h,
        sigma_sq,
    })
}

/// Enclosed volume of a closed immersed mesh by divergence quadrature.
/// For the quaternion realization the region is measured with the group
/// volume form, which differs from the round volume of the unit sphere in
/// R^4 by the constant 1/(lambda1 lambda2 lambda3).
pub fn enclosed_volume(
    group: &MetricLieGroup,
    mesh: &SphereMesh,
    imm: &ImmersedSphere,
) -> Result<f64> {
    match group {
        MetricLieGroup::Unimodular(u) if u.lambda.is_some() => {
            let lam = u.lambda.unwrap();
            let scale = 1.0 / (lam[0] * lam[1] * lam[2]);
            // round-metric radial field from the normalized 4D centroid
            let mut c = [0.0f64; 4];
            for p in &imm.positions {
                let q = p.as_quat();
                for i in 0..4 {
                    c[i] += q.0[i];
                }
            }
            let cn = (c.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if cn < 1e-9 {
                // centered at the group midpoint: fall back to the north-ish pole
                c = [1.0, 0.0, 0.0, 0.0];
            } else {
                for x in &mut c {
                    *x /= cn;
                }
            }
            let mut flux = 0.0;
            for t in &mesh.tris {
                let p0 = imm.positions[t[0] as usize].as_quat().0;
                let p1 = imm.positions[t[1] as usize].as_quat().0;
                let p2 = imm.positions[t[2] as usize].as_quat().0;
                let centroid = normalize4(add4(add4(p0, p1), p2));
                let e1 = sub4(p1, p0);
                let e2 = sub4(p2, p0);
                // round gradient of the distance from c
                let cosr = dot4(c, centroid).clamp(-1.0, 1.0);
                let r = cosr.acos();
                if r > std::f64::consts::PI - 1e-6 {
                    return Err(Error::UnsupportedGroup(
                        "volume quadrature hit the antipode of the centroid".into(),
                    ));
                }
                let sinr = r.sin().max(1e-12);
                let dir = scale4(sub4(scale4(centroid, cosr), c), 1.0 / sinr);
                let w = (2.0 * r - (2.0 * r).sin()) / (4.0 * sinr * sinr);
                // normal direction in the tangent space orthogonal to the triangle
                let nu = cross4(centroid, e1, e2);
                let area2 = {
                    let g11 = dot4(e1, e1);
                    let g12 = dot4(e1, e2);
                    let g22 = dot4(e2, e2);
                    (g11 * g22 - g12 * g12).max(0.0).sqrt()
                };
                let nun = (dot4(nu, nu)).sqrt().max(1e-300);
                flux += w * dot4(dir, nu) / nun * 0.5 * area2;
            }
            Ok(flux.abs() * scale)
        }
        _ => {
            let mat = group.semidirect_matrix().ok_or_else(|| {
                Error::UnsupportedGroup("volume needs a realized group".into())
            })?;
            let tau = mat.trace();
            let mut flux = 0.0;
            for t in &mesh.tris {
                let p0 = imm.positions[t[0] as usize].as_coords();
                let p1 = imm.positions[t[1] as usize].as_coords();
                let p2 = imm.positions[t[2] as usize].as_coords();
                let zc = (p0[2] + p1[2] + p2[2]) / 3.0;
                // sqrt(g) W = (0, 0, w3): divergence equals one
                let w3 = if tau.abs() > 1e-12 {
                    -(-tau * zc).exp() / tau
                } else {
                    zc
                };
                let e1 = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
                let e2 = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
                // det[(0,0,w3), e1, e2] / 2
                flux += 0.5 * w3 * (e1[0] * e2[1] - e1[1] * e2[0]);
            }
            Ok(flux.abs())
        }
    }
}

fn add4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn scale4(a: [f64; 4], s: f64) -> [f64; 4] {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn normalize4(a: [f64; 4]) -> [f64; 4] {
    let n = dot4(a, a).sqrt();
    scale4(a, 1.0 / n)
}

/// Generalized cross product in R^4: orthogonal to all three arguments.
fn cross4(a: [f64; 4], b: [f64; 4], c: [f64; 4]) -> [f64; 4] {
    let det3 = |m: [[f64; 3]; 3]| -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mut out = [0.0; 4];
    let sign = [1.0, -1.0, 1.0, -1.0];
    for i in 0..4 {
        let mut m = [[0.0; 3]; 3];
        let mut col = 0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            m[0][col] = a[j];
            m[1][col] = b[j];
            m[2][col] = c[j];
            col += 1;
        }
        out[i] = sign[i] * det3(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::Quat;
    use crate::solver;

    fn round() -> MetricLieGroup {
        MetricLieGroup::unimodular([2.0, 2.0, 2.0]).unwrap()
    }

    #[test]
    fn coefficients_hand_example() {
        // mu = (1,1,1), H = 0, g = 1, g_z = 1: R(1) = -4i,
        // eta = i, A = (0, -1/2, i/2), lambda = 1
        let g = round();
        let hp = HPotential::new(&g, 0.0);
        let (a, eta, lam) = coefficients_at(
            &hp,
            Chart::Z,
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        assert!((eta - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!(a[0].norm() < 1e-14);
        assert!((a[1] - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
        assert!((a[2] - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        assert!((lam - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coefficients_scale_linearly_in_gz() {
        let g = MetricLieGroup::unimodular([3.0, 2.0, 1.0]).unwrap();
        let hp = HPotential::new(&g, 0.7);
        let val = Complex64::new(0.4, -0.2);
        let dz = Complex64::new(0.3, 0.9);
        let (a1, e1, l1) = coefficients_at(&hp, Chart::Z, val, dz).unwrap();
        let (a2, e2, l2) = coefficients_at(&hp, Chart::Z, val, 2.0 * dz).unwrap();
        assert!((e2 - 2.0 * e1).norm() < 1e-13);
        for k in 0..3 {
            assert!((a2[k] - 2.0 * a1[k]).norm() < 1e-13);
        }
        assert!((l2 - 4.0 * l1).abs() < 1e-12 * l1.abs());
    }

    #[test]
    fn coefficients_bounded_at_infinity() {
        // |g| -> infinity with g_z/g^2 -> c != 0: in the w chart u -> 0 with
        // u_z -> -c, and the coefficients stay bounded
        let g = MetricLieGroup::unimodular([2.0, 2.0, 1.0]).unwrap();
        let hp = HPotential::new(&g, 1.0);
        let (a, _, lam) = coefficients_at(
            &hp,
            Chart::W,
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.8, 0.1),
        )
        .unwrap();
        for k in 0..3 {
            assert!(a[k].norm() < 10.0);
            assert!(a[k].norm().is_finite());
        }
        assert!(lam.is_finite() && lam > 0.0);
    }

    #[test]
    fn magnus_matches_fine_rk_on_quaternions() {
        // q' = q xi(t) with a rotating algebra element, SU(2) round
        let g = round();
        let table = g.bracket_table();
        let xi = |t: f64| -> [f64; 3] { [0.9 * (1.0 + t), -0.4 * t, 0.3 * (t * t - 0.2)] };
        let q0 = GroupElement::Quat(Quat::ONE);
        let coarse = magnus_step(&g, &table, &q0, &xi, 2);
        let fine = magnus_step(&g, &table, &q0, &xi, 256);
        assert!(g.distance(&coarse, &fine) < 5e-3);
        let mid = magnus_step(&g, &table, &q0, &xi, 8);
        // fourth order: 4x substeps cut the error by ~256
        assert!(g.distance(&mid, &fine) < g.distance(&coarse, &fine) / 100.0);
        let finer = magnus_step(&g, &table, &q0, &xi, 512);
        assert!(g.distance(&fine, &finer) < 1e-10);
    }

    #[test]
    fn round_minimal_sphere_is_great_sphere() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let hp = HPotential::new(&group, 0.0);
        let field = GaussField::identity(&mesh, 0.0);
        let coeffs = frame_coefficients(&mesh, &hp, &field).unwrap();
        let imm = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::BreadthFirst,
        )
        .unwrap();
        assert!(imm.closure_residual < 1e-2, "closure {}", imm.closure_residual);
        // the image lies on the great sphere orthogonal to e3 through I
        let e3 = [0.0, 0.0, 1.0, 0.0 + 0.0];
        let mut worst: f64 = 0.0;
        for p in &imm.positions {
            let q = p.as_quat().0;
            let d = q[3]; // component along e3 direction
            worst = worst.max(d.abs());
            let _ = e3;
        }
        assert!(worst < 5e-3, "max e3 component {worst}");
        // base vertex maps to the base point
        assert!(group.distance(&imm.positions[mesh.north as usize], &group.identity()) < 1e-14);
    }

    #[test]
    fn round_cmc_sphere_has_constant_distance_from_center() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let (start, _) = solver::initial_sphere(&mesh, &group, 20.0).unwrap();
        let fam = solver::continue_family(
            &mesh,
            &group,
            &start,
            &[1.0],
            &solver::ContinuationOptions::default(),
            None,
        )
        .unwrap();
        let field = &fam.last().unwrap().field;
        let hp = HPotential::new(&group, 1.0);
        let coeffs = frame_coefficients(&mesh, &hp, field).unwrap();
        let imm = integrate_immersion(
            &group,
            &mesh,
            field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::BreadthFirst,
        )
        .unwrap();
        // geodesic sphere of radius pi/4 around exp((pi/4) e3)
        let r = std::f64::consts::FRAC_PI_4;
        let center = Quat::exp_imag([0.0, 0.0, r]);
        let mut worst: f64 = 0.0;
        for p in &imm.positions {
            let q = p.as_quat();
            let d = center.dot(&q).clamp(-1.0, 1.0).acos();
            worst = worst.max((d - r).abs());
        }
        assert!(worst < 5e-3, "distance deviation {worst}");
    }

    #[test]
    fn left_translation_is_exact() {
        let mesh = SphereMesh::build(2);
        let group = round();
        let hp = HPotential::new(&group, 0.0);
        let field = GaussField::identity(&mesh, 0.0);
        let coeffs = frame_coefficients(&mesh, &hp, &field).unwrap();
        let base = group.exp_one_param([0.3, -0.4, 0.8], 0.9);
        let a = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::BreadthFirst,
        )
        .unwrap();
        let b = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &base,
            TreeKind::BreadthFirst,
        )
        .unwrap();
        let translated = left_translate(&group, &a, &base);
        for v in 0..mesh.num_vertices() {
            assert!(group.distance(&translated.positions[v], &b.positions[v]) < 1e-12);
        }
    }

    #[test]
    fn tree_independence_within_closure_bound() {
        let mesh = SphereMesh::build(3);
        let group = MetricLieGroup::unimodular([2.0, 2.0, 1.0]).unwrap();
        let (field, _) = solver::initial_sphere(&mesh, &group, 20.0).unwrap();
        let hp = HPotential::new(&group, 20.0);
        let coeffs = frame_coefficients(&mesh, &hp, &field).unwrap();
        let a = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::BreadthFirst,
        )
        .unwrap();
        let b = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::DepthFirst,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for v in 0..mesh.num_vertices() {
            worst = worst.max(group.distance(&a.positions[v], &b.positions[v]));
        }
        assert!(
            worst <= 2.0 * a.closure_residual.max(b.closure_residual) * 50.0,
            "tree difference {worst} vs closure {}",
            a.closure_residual
        );
    }

    #[test]
    fn fundamental_forms_round_oracles() {
        let mesh = SphereMesh::build(3);
        let group = round();
        // H = 0 great sphere: totally geodesic
        let hp0 = HPotential::new(&group, 0.0);
        let f0 = GaussField::identity(&mesh, 0.0);
        let c0 = frame_coefficients(&mesh, &hp0, &f0).unwrap();
        let ff0 = fundamental_forms(&group, &mesh, &f0, &c0).unwrap();
        let max_sig = ff0.sigma_sq.iter().cloned().fold(0.0f64, f64::max);
        assert!(max_sig < 1e-4, "minimal sphere |sigma|^2 = {max_sig}");
        // H = 1 umbilic geodesic sphere: |sigma|^2 = 2 H^2 = 2
        let hp1 = HPotential::new(&group, 1.0);
        let f1 = GaussField::identity(&mesh, 1.0);
        let c1 = frame_coefficients(&mesh, &hp1, &f1).unwrap();
        let ff1 = fundamental_forms(&group, &mesh, &f1, &c1).unwrap();
        for v in 0..mesh.num_vertices() {
            assert!((ff1.sigma_sq[v] - 2.0).abs() < 2e-2, "v {v}: {}", ff1.sigma_sq[v]);
            assert!((ff1.mean_h[v] - 1.0).abs() < 5e-3);
        }
        let mean: f64 = ff1.mean_h.iter().sum::<f64>() / ff1.mean_h.len() as f64;
        assert!((mean - 1.0).abs() < 1e-3, "mean H {mean}");
    }

    #[test]
    fn integrability_residual_separates() {
        let mesh = SphereMesh::build(3);
        let group = MetricLieGroup::unimodular([2.0, 2.0, 1.0]).unwrap();
        let (field, _) = solver::initial_sphere(&mesh, &group, 20.0).unwrap();
        let hp = HPotential::new(&group, 20.0);
        let coeffs = frame_coefficients(&mesh, &hp, &field).unwrap();
        let res = integrability_residual(&group, &mesh, &field, &coeffs).unwrap();
        let solved_max = res.iter().cloned().fold(0.0f64, f64::max);
        // perturbed field far from a solution
        let mut bad = field.clone();
        bad.perturb_smooth(0.05, 17);
        let coeffs_bad = frame_coefficients(&mesh, &hp, &bad).unwrap();
        let res_bad = integrability_residual(&group, &mesh, &bad, &coeffs_bad).unwrap();
        let bad_max = res_bad.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            bad_max > 3.0 * solved_max,
            "solved {solved_max} vs perturbed {bad_max}"
        );
    }

    #[test]
    fn round_volume_oracles() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let hp = HPotential::new(&group, 0.0);
        let field = GaussField::identity(&mesh, 0.0);
        let coeffs = frame_coefficients(&mesh, &hp, &field).unwrap();
        let imm = integrate_immersion(
            &group,
            &mesh,
            &field,
            &coeffs,
            mesh.north,
            &group.identity(),
            TreeKind::BreadthFirst,
        )
        .unwrap();
        // hemisphere of the unit three-sphere: pi^2
        let vol = enclosed_volume(&group, &mesh, &imm).unwrap();
        let expect = std::f64::consts::PI * std::f64::consts::PI;
        assert!(
            (vol - expect).abs() / expect < 0.01,
            "volume {vol} vs {expect}"
        );
    }
}
