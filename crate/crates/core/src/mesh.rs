//! Icosphere discretization of the domain sphere with two stereographic
//! charts and moving-least-squares derivative stencils.
//!
//! The base icosahedron is oriented with two antipodal vertices at the
//! poles. The z chart projects from the south pole (north vertex at z = 0),
//! the w chart from the north pole, with holomorphic transition w = 1/z.
//! Vertices with |z| <= 1 are z-active, the rest w-active; every vertex in
//! the overlap band 0.8 <= |z| <= 1.25 carries stencils in both charts.
//!
//! Wirtinger derivatives are read off weighted cubic fits over the two-ring
//! neighborhood, so first and second derivatives of smooth fields carry
//! O(h^3) and O(h^2) errors respectively on arbitrary vertex configurations.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::potential::Chart;

/// Chart radius beyond which a vertex stops carrying that chart's stencil.
pub const CHART_LIMIT: f64 = 1.25;

/// Derivative stencil at a vertex: real coefficient rows over `nbrs`
/// (center vertex first) for d/dx, d/dy and the flat chart Laplacian.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub nbrs: Vec<u32>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub lap: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SphereMesh {
    pub level: u32,
    /// Unit position vectors on the domain sphere.
    pub pos: Vec<[f64; 3]>,
    pub tris: Vec<[u32; 3]>,
    /// Stereographic coordinate from the south pole; infinite at the south vertex.
    pub z: Vec<Complex64>,
    /// Stereographic coordinate from the north pole, w = 1/z.
    pub w: Vec<Complex64>,
    /// Unique undirected edges (u < v), lexicographically sorted.
    pub edges: Vec<(u32, u32)>,
    pub one_ring: Vec<Vec<u32>>,
    pub two_ring: Vec<Vec<u32>>,
    pub stencil_z: Vec<Option<Stencil>>,
    pub stencil_w: Vec<Option<Stencil>>,
    pub north: u32,
    pub south: u32,
}

impl SphereMesh {
    /// Builds the subdivided icosahedral sphere with 10 * 4^level + 2 vertices.
    pub fn build(level: u32) -> SphereMesh {
        let (mut pos, mut tris) = icosahedron();
        for _ in 0..level {
            subdivide(&mut pos, &mut tris);
        }
        let n = pos.len();
        let mut z = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for p in &pos {
            z.push(stereo_from_south(*p));
            w.push(stereo_from_north(*p));
        }
        let north = pos
            .iter()
            .position(|p| (p[2] - 1.0).abs() < 1e-12)
            .expect("north pole vertex") as u32;
        let south = pos
            .iter()
            .position(|p| (p[2] + 1.0).abs() < 1e-12)
            .expect("south pole vertex") as u32;

        let mut edge_set = BTreeMap::new();
        for t in &tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                edge_set.insert(key, ());
            }
        }
        let edges: Vec<(u32, u32)> = edge_set.into_keys().collect();

        let mut one_ring = vec![Vec::new(); n];
        for &(a, b) in &edges {
            one_ring[a as usize].push(b);
            one_ring[b as usize].push(a);
        }
        for r in &mut one_ring {
            r.sort_unstable();
        }
        let mut two_ring = vec![Vec::new(); n];
        for v in 0..n {
            let mut acc: Vec<u32> = Vec::new();
            for &u in &one_ring[v] {
                acc.push(u);
                acc.extend_from_slice(&one_ring[u as usize]);
            }
            acc.sort_unstable();
            acc.dedup();
            acc.retain(|&u| u as usize != v);
            two_ring[v] = acc;
        }

        let mut mesh = SphereMesh {
            level,
            pos,
            tris,
            z,
            w,
            edges,
            one_ring,
            two_ring,
            stencil_z: Vec::new(),
            stencil_w: Vec::new(),
            north,
            south,
        };
        mesh.stencil_z = (0..n)
            .map(|v| build_stencil(&mesh, Chart::Z, v as u32))
            .collect();
        mesh.stencil_w = (0..n)
            .map(|v| build_stencil(&mesh, Chart::W, v as u32))
            .collect();
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.pos.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.pos.len() as i64 - self.edges.len() as i64 + self.tris.len() as i64
    }

    /// Chart coordinate of a vertex; None when infinite in that chart.
    pub fn coord(&self, chart: Chart, v: u32) -> Option<Complex64> {
        let c = match chart {
            Chart::Z => self.z[v as usize],
            Chart::W => self.w[v as usize],
        };
        if c.re.is_finite() && c.im.is_finite() {
            Some(c)
        } else {
            None
        }
    }

    /// Domain chart in which a vertex's residual and stencil are evaluated.
    pub fn domain_chart(&self, v: u32) -> Chart {
        if self.z[v as usize].norm() <= 1.0 {
            Chart::Z
        } else {
            Chart::W
        }
    }

    pub fn stencil(&self, chart: Chart, v: u32) -> Option<&Stencil> {
        match chart {
            Chart::Z => self.stencil_z[v as usize].as_ref(),
            Chart::W => self.stencil_w[v as usize].as_ref(),
        }
    }

    /// Nearest vertex to a unit direction (linear scan).
    pub fn nearest_vertex(&self, dir: [f64; 3]) -> u32 {
        let mut best = 0u32;
        let mut bd = f64::NEG_INFINITY;
        for (i, p) in self.pos.iter().enumerate() {
            let d = p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2];
            if d > bd {
                bd = d;
                best = i as u32;
            }
        }
        best
    }

    /// Mean chordal edge length, a proxy for the resolution h.
    pub fn mean_edge_chart(&self) -> f64 {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for &(a, b) in &self.edges {
            let pa = self.pos[a as usize];
            let pb = self.pos[b as usize];
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                .sqrt();
            acc += d;
            cnt += 1;
        }
        acc / cnt as f64
    }

    /// Vertex permutation induced by an ambient rotation of the domain
    /// sphere, when the rotation maps the vertex set to itself exactly.
    pub fn automorphism_from_rotation(&self, rot: &[[f64; 3]; 3]) -> Option<Vec<u32>> {
        let mut perm = vec![u32::MAX; self.pos.len()];
        for (i, p) in self.pos.iter().enumerate() {
            let q = [
                rot[0][0] * p[0] + rot[0][1] * p[1] + rot[0][2] * p[2],
                rot[1][0] * p[0] + rot[1][1] * p[1] + rot[1][2] * p[2],
                rot[2][0] * p[0] + rot[2][1] * p[1] + rot[2][2] * p[2],
            ];
            let j = self.nearest_vertex(q);
            let pj = self.pos[j as usize];
            let err = ((q[0] - pj[0]).powi(2) + (q[1] - pj[1]).powi(2) + (q[2] - pj[2]).powi(2))
                .sqrt();
            if err > 1e-9 {
                return None;
            }
            perm[i] = j;
        }
        let mut seen = vec![false; self.pos.len()];
        for &j in &perm {
            if seen[j as usize] {
                return None;
            }
            seen[j as usize] = true;
        }
        Some(perm)
    }
}

/// Neighbor list (center first) for the local fit at a vertex in a chart,
/// after checking the chart covers the whole two-ring.
pub fn local_fit_points(mesh: &SphereMesh, chart: Chart, v: u32) -> Option<(Vec<u32>, Complex64)> {
    let zc = mesh.coord(chart, v)?;
    if zc.norm() > CHART_LIMIT {
        return None;
    }
    let mut nbrs = Vec::with_capacity(1 + mesh.two_ring[v as usize].len());
    nbrs.push(v);
    for &u in &mesh.two_ring[v as usize] {
        mesh.coord(chart, u)?;
        nbrs.push(u);
    }
    Some((nbrs, zc))
}

fn poly_basis(xi: f64, eta: f64, terms: usize) -> Vec<f64> {
    let mut b = vec![
        1.0,
        xi,
        eta,
        xi * xi,
        xi * eta,
        eta * eta,
        xi * xi * xi,
        xi * xi * eta,
        xi * eta * eta,
        eta * eta * eta,
    ];
    b.truncate(terms);
    b
}

/// Solves the weighted least-squares system for the local polynomial fit of
/// the given degree (2 or 3) and returns the rows mapping neighbor values to
/// fit coefficients (terms x N). Row j is the coefficient of basis monomial
/// j, already rescaled so derivatives at the center read off directly.
pub fn fit_coefficient_rows(
    mesh: &SphereMesh,
    chart: Chart,
    v: u32,
    degree: usize,
) -> Option<(Vec<u32>, DMatrix<f64>)> {
    let terms = match degree {
        2 => 6,
        3 => 10,
        _ => return None,
    };
    let (nbrs, zc) = local_fit_points(mesh, chart, v)?;
    let n = nbrs.len();
    if n < terms {
        return None;
    }
    let mut offs = Vec::with_capacity(n);
    let mut dmax: f64 = 0.0;
    for &u in &nbrs {
        let zu = mesh.coord(chart, u)?;
        let d = zu - zc;
        dmax = dmax.max(d.norm());
        offs.push(d);
    }
    let scale = dmax.max(1e-300);
    let dm = 1.05;
    let mut b = DMatrix::zeros(n, terms);
    let mut wts = Vec::with_capacity(n);
    for (i, d) in offs.iter().enumerate() {
        let xi = d.re / scale;
        let eta = d.im / scale;
        let row = poly_basis(xi, eta, terms);
        for (j, val) in row.iter().enumerate() {
            b[(i, j)] = *val;
        }
        let r = d.norm() / (dm * scale);
        let w = if r < 1.0 {
            let t = 1.0 - r;
            (t * t * t * t) * (4.0 * r + 1.0)
        } else {
            0.0
        };
        wts.push(w.max(1e-8));
    }
    // small weighted normal equations solved by Cholesky with iterative
    // refinement; the scaled quadratic/cubic Vandermonde is mildly
    // conditioned so two refinement sweeps reach near machine precision
    let mut btw = DMatrix::zeros(terms, n);
    for i in 0..n {
        for j in 0..terms {
            btw[(j, i)] = b[(i, j)] * wts[i];
        }
    }
    let normal = &btw * &b;
    let chol = normal.clone().cholesky()?;
    let mut rows = chol.solve(&btw);
    for _ in 0..2 {
        let resid = &btw - &normal * &rows;
        rows += chol.solve(&resid);
    }
    // undo the offset scaling: the coefficient of xi^a eta^b needs division
    // by scale^(a+b)
    let monomial_degree = [0i32, 1, 1, 2, 2, 2, 3, 3, 3, 3];
    for j in 0..terms {
        let f = scale.powi(monomial_degree[j]);
        for i in 0..n {
            rows[(j, i)] /= f;
        }
    }
    Some((nbrs, rows))
}

/// Weighted polynomial fit of scattered complex samples, evaluated at one
/// offset. `pts` are offsets from the fit center, `at` the evaluation
/// offset. Shares the conventions of the stencil fits.
pub fn weighted_poly_eval(
    pts: &[Complex64],
    vals: &[Complex64],
    at: Complex64,
    degree: usize,
) -> Option<Complex64> {
    let terms = match degree {
        2 => 6,
        3 => 10,
        _ => return None,
    };
    let n = pts.len();
    if n < terms {
        return None;
    }
    let mut dmax: f64 = 0.0;
    for d in pts {
        dmax = dmax.max(d.norm());
    }
    dmax = dmax.max(at.norm());
    let scale = dmax.max(1e-300);
    let dm = 1.05;
    let mut b = DMatrix::zeros(n, terms);
    let mut wts = Vec::with_capacity(n);
    for (i, d) in pts.iter().enumerate() {
        let xi = d.re / scale;
        let eta = d.im / scale;
        let row = poly_basis(xi, eta, terms);
        for (j, val) in row.iter().enumerate() {
            b[(i, j)] = *val;
        }
        let r = d.norm() / (dm * scale);
        let w = if r < 1.0 {
            let t = 1.0 - r;
            (t * t * t * t) * (4.0 * r + 1.0)
        } else {
            0.0
        };
        wts.push(w.max(1e-8));
    }
    let mut btw_re = DMatrix::zeros(terms, n);
    for i in 0..n {
        for j in 0..terms {
            btw_re[(j, i)] = b[(i, j)] * wts[i];
        }
    }
    let normal = &btw_re * &b;
    let chol = normal.clone().cholesky()?;
    let mut rows = chol.solve(&btw_re);
    for _ in 0..2 {
        let resid = &btw_re - &normal * &rows;
        rows += chol.solve(&resid);
    }
    let basis = poly_basis(at.re / scale, at.im / scale, terms);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, val) in vals.iter().enumerate() {
        let mut coef = 0.0;
        for j in 0..terms {
            coef += basis[j] * rows[(j, i)];
        }
        acc += coef * val;
    }
    Some(acc)
}

fn build_stencil(mesh: &SphereMesh, chart: Chart, v: u32) -> Option<Stencil> {
    let (nbrs, rows) = fit_coefficient_rows(mesh, chart, v, 2)?;
    let n = nbrs.len();
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    let mut lap = Vec::with_capacity(n);
    for i in 0..n {
        dx.push(rows[(1, i)]);
        dy.push(rows[(2, i)]);
        lap.push(2.0 * rows[(3, i)] + 2.0 * rows[(5, i)]);
    }
    Some(Stencil { nbrs, dx, dy, lap })
}

fn stereo_from_south(p: [f64; 3]) -> Complex64 {
    let denom = 1.0 + p[2];
    if denom.abs() < 1e-14 {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        Complex64::new(p[0] / denom, p[1] / denom)
    }
}

fn stereo_from_north(p: [f64; 3]) -> Complex64 {
    let denom = 1.0 - p[2];
    if denom.abs() < 1e-14 {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        Complex64::new(p[0] / denom, -p[1] / denom)
    }
}

/// Inverse stereographic projection of a chart value to the unit sphere.
/// For the Z chart, 0 maps to the north pole (0,0,1).
pub fn inverse_stereo(chart: Chart, q: Complex64) -> [f64; 3] {
    let n2 = q.norm_sqr();
    let d = 1.0 + n2;
    match chart {
        Chart::Z => [2.0 * q.re / d, 2.0 * q.im / d, (1.0 - n2) / d],
        Chart::W => [2.0 * q.re / d, -2.0 * q.im / d, (n2 - 1.0) / d],
    }
}

/// Stereographic projection of a unit sphere direction in the given chart.
pub fn stereo(chart: Chart, p: [f64; 3]) -> Complex64 {
    match chart {
        Chart::Z => stereo_from_south(p),
        Chart::W => stereo_from_north(p),
    }
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let mut pos = Vec::with_capacity(12);
    pos.push([0.0, 0.0, 1.0]);
    let ca = 1.0 / 5.0f64.sqrt();
    let sa = (1.0 - ca * ca).sqrt();
    for k in 0..5 {
        let th = std::f64::consts::TAU * k as f64 / 5.0;
        pos.push([th.cos() * sa, th.sin() * sa, ca]);
    }
    for k in 0..5 {
        let th = std::f64::consts::TAU * k as f64 / 5.0 + std::f64::consts::PI / 5.0;
        pos.push([th.cos() * sa, th.sin() * sa, -ca]);
    }
    pos.push([0.0, 0.0, -1.0]);
    let mut tris: Vec<[u32; 3]> = Vec::with_capacity(20);
    for k in 0..5u32 {
        let a = 1 + k;
        let b = 1 + (k + 1) % 5;
        tris.push([0, a, b]);
    }
    for k in 0..5u32 {
        let a = 1 + k;
        let b = 1 + (k + 1) % 5;
        let c = 6 + k;
        tris.push([a, c, b]);
        let d = 6 + (k + 4) % 5;
        tris.push([a, d, c]);
    }
    for k in 0..5u32 {
        let a = 6 + k;
        let b = 6 + (k + 1) % 5;
        tris.push([11, b, a]);
    }
    (pos, tris)
}

fn subdivide(pos: &mut Vec<[f64; 3]>, tris: &mut Vec<[u32; 3]>) {
    let mut midpoint: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut new_tris = Vec::with_capacity(tris.len() * 4);
    let mut mid = |a: u32, b: u32, pos: &mut Vec<[f64; 3]>| -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = midpoint.get(&key) {
            return m;
        }
        let pa = pos[a as usize];
        let pb = pos[b as usize];
        let mut p = [pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]];
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        p = [p[0] / n, p[1] / n, p[2] / n];
        pos.push(p);
        let m = (pos.len() - 1) as u32;
        midpoint.insert(key, m);
        m
    };
    for t in tris.iter() {
        let [a, b, c] = *t;
        let ab = mid(a, b, pos);
        let bc = mid(b, c, pos);
        let ca = mid(c, a, pos);
        new_tris.push([a, ab, ca]);
        new_tris.push([b, bc, ab]);
        new_tris.push([c, ca, bc]);
        new_tris.push([ab, bc, ca]);
    }
    *tris = new_tris;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts_and_euler() {
        for level in 0..4u32 {
            let m = SphereMesh::build(level);
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.euler_characteristic(), 2);
        }
        assert_eq!(SphereMesh::build(0).tris.len(), 20);
        assert_eq!(SphereMesh::build(3).num_vertices(), 642);
    }

    #[test]
    fn orientation_consistent_and_outward() {
        let m = SphereMesh::build(2);
        // each directed edge appears exactly once
        let mut dir = std::collections::BTreeSet::new();
        for t in &m.tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                assert!(dir.insert((a, b)), "duplicate directed edge");
            }
        }
        // signed volume positive for outward orientation
        let mut vol = 0.0;
        for t in &m.tris {
            let a = m.pos[t[0] as usize];
            let b = m.pos[t[1] as usize];
            let c = m.pos[t[2] as usize];
            vol += a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]);
        }
        assert!(vol > 0.0);
    }

    #[test]
    fn charts_transition_and_activity() {
        let m = SphereMesh::build(3);
        for v in 0..m.num_vertices() as u32 {
            if let (Some(z), Some(w)) = (m.coord(Chart::Z, v), m.coord(Chart::W, v)) {
                if z.norm() > 1e-8 {
                    assert!((w - 1.0 / z).norm() < 1e-12);
                }
            }
            let ch = m.domain_chart(v);
            assert!(m.stencil(ch, v).is_some(), "vertex {v} lacks active stencil");
        }
        assert_eq!(m.domain_chart(m.north), Chart::Z);
        assert_eq!(m.domain_chart(m.south), Chart::W);
    }

    #[test]
    fn stencils_exact_on_cubics() {
        let m = SphereMesh::build(3);
        for chart in [Chart::Z, Chart::W] {
            for v in 0..m.num_vertices() as u32 {
                let Some(st) = m.stencil(chart, v) else {
                    continue;
                };
                let zc = m.coord(chart, v).unwrap();
                let fz = |z: Complex64| z;
                let fz2 = |z: Complex64| z * z;
                let fzb = |z: Complex64| z.conj();
                let zero = Complex64::new(0.0, 0.0);
                let cases: [(&dyn Fn(Complex64) -> Complex64, Complex64, Complex64, Complex64);
                    3] = [
                    (&fz, Complex64::new(1.0, 0.0), zero, zero),
                    (&fz2, 2.0 * zc, zero, zero),
                    (&fzb, zero, Complex64::new(1.0, 0.0), zero),
                ];
                for (f, dz_exact, dzb_exact, lap_exact) in cases {
                    let mut gx = zero;
                    let mut gy = zero;
                    let mut gl = zero;
                    for (i, &u) in st.nbrs.iter().enumerate() {
                        let val = f(m.coord(chart, u).unwrap());
                        gx += st.dx[i] * val;
                        gy += st.dy[i] * val;
                        gl += st.lap[i] * val;
                    }
                    let dz = 0.5 * (gx - Complex64::new(0.0, 1.0) * gy);
                    let dzb = 0.5 * (gx + Complex64::new(0.0, 1.0) * gy);
                    let lap = 0.25 * gl;
                    assert!((dz - dz_exact).norm() < 1e-9, "chart {chart:?} v {v}");
                    assert!((dzb - dzb_exact).norm() < 1e-9);
                    assert!((lap - lap_exact).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn polar_rotation_and_pole_swap_are_automorphisms() {
        let m = SphereMesh::build(2);
        let c = (std::f64::consts::TAU / 5.0).cos();
        let s = (std::f64::consts::TAU / 5.0).sin();
        let rot5 = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let perm = m.automorphism_from_rotation(&rot5);
        assert!(perm.is_some(), "fivefold polar rotation");
        // pi rotation about the horizontal axis at longitude pi/10 swaps poles
        let th: f64 = std::f64::consts::PI / 10.0;
        let (ct, st) = (th.cos(), th.sin());
        let swap = [
            [2.0 * ct * ct - 1.0, 2.0 * ct * st, 0.0],
            [2.0 * ct * st, 2.0 * st * st - 1.0, 0.0],
            [0.0, 0.0, -1.0],
        ];
        let perm = m.automorphism_from_rotation(&swap);
        assert!(perm.is_some(), "pole swap rotation");
        let p = perm.unwrap();
        assert_eq!(p[m.north as usize], m.south);
    }
}
