//! Discrete left-invariant Gauss maps on a sphere mesh.
//!
//! A field stores one complex value per vertex together with the target
//! chart the value lives in: the z chart around the Gauss image of the
//! north direction, or the w = 1/z chart around its antipode. Values are
//! rebalanced with hysteresis so |value| stays below 1.1 in the active
//! chart and the point at infinity is an ordinary chart origin.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::mesh::{self, SphereMesh};
use crate::potential::Chart;

const SWITCH_RADIUS: f64 = 1.1;

/// Per-vertex complex field in per-vertex target charts, carrying the mean
/// curvature value it was solved at.
#[derive(Debug, Clone)]
pub struct GaussField {
    pub chart: Vec<Chart>,
    pub val: Vec<Complex64>,
    pub h: f64,
}

/// Wirtinger data of a field at one vertex: derivatives are taken in the
/// vertex's domain chart, values in the vertex's target chart.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub domain: Chart,
    pub target: Chart,
    pub val: Complex64,
    pub gz: Complex64,
    pub gzb: Complex64,
    pub gzzb: Complex64,
}

impl GaussField {
    /// The identity Gauss map g(z) = z: the field value equals the domain
    /// chart coordinate in the matching chart.
    pub fn identity(mesh: &SphereMesh, h: f64) -> GaussField {
        let n = mesh.num_vertices();
        let mut chart = Vec::with_capacity(n);
        let mut val = Vec::with_capacity(n);
        for v in 0..n as u32 {
            let ch = mesh.domain_chart(v);
            chart.push(ch);
            val.push(mesh.coord(ch, v).expect("active chart coordinate"));
        }
        GaussField { chart, val, h }
    }

    pub fn num_vertices(&self) -> usize {
        self.val.len()
    }

    /// Value of the field at vertex v expressed in the requested chart.
    /// None when the conversion 1/val is ill-conditioned.
    pub fn value_in(&self, v: u32, chart: Chart) -> Option<Complex64> {
        let val = self.val[v as usize];
        if self.chart[v as usize] == chart {
            Some(val)
        } else if val.norm() > 1e-12 {
            Some(1.0 / val)
        } else {
            None
        }
    }

    /// Gauss image of vertex v as a unit vector in the identity tangent space.
    pub fn sphere_point(&self, v: u32) -> [f64; 3] {
        mesh::inverse_stereo(self.chart[v as usize], self.val[v as usize])
    }

    /// Switches vertices with |value| beyond the hysteresis radius to the
    /// other chart.
    pub fn rebalance(&mut self) {
        for v in 0..self.val.len() {
            if self.val[v].norm() > SWITCH_RADIUS {
                self.val[v] = 1.0 / self.val[v];
                self.chart[v] = self.chart[v].other();
            }
        }
    }

    /// Field value and derivatives at a vertex. Derivatives are taken with
    /// the domain-chart stencil applied to neighbor values converted into
    /// this vertex's target chart. None when a conversion degenerates.
    pub fn jet(&self, mesh: &SphereMesh, v: u32) -> Option<FieldJet> {
        let domain = mesh.domain_chart(v);
        let target = self.chart[v as usize];
        let st = mesh.stencil(domain, v)?;
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        let mut gl = Complex64::new(0.0, 0.0);
        for (i, &u) in st.nbrs.iter().enumerate() {
            let val = self.value_in(u, target)?;
            gx += st.dx[i] * val;
            gy += st.dy[i] * val;
            gl += st.lap[i] * val;
        }
        let i1 = Complex64::new(0.0, 1.0);
        Some(FieldJet {
            domain,
            target,
            val: self.val[v as usize],
            gz: 0.5 * (gx - i1 * gy),
            gzb: 0.5 * (gx + i1 * gy),
            gzzb: 0.25 * gl,
        })
    }

    /// Applies a vertex permutation: out(v) = self(perm(v)), carrying charts.
    pub fn permuted(&self, perm: &[u32]) -> GaussField {
        let mut chart = Vec::with_capacity(self.val.len());
        let mut val = Vec::with_capacity(self.val.len());
        for v in 0..self.val.len() {
            let u = perm[v] as usize;
            chart.push(self.chart[u]);
            val.push(self.val[u]);
        }
        GaussField {
            chart,
            val,
            h: self.h,
        }
    }

    /// Adds a smooth pseudo-random rotation-field perturbation of the Gauss
    /// image: every image point is moved by amplitude * V(n) for a random
    /// quadratic tangent field V, then reprojected to the chart.
    pub fn perturb_smooth(&mut self, amplitude: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lin = [[0.0f64; 3]; 3];
        let mut quad = [[[0.0f64; 3]; 3]; 3];
        for row in lin.iter_mut() {
            for x in row.iter_mut() {
                *x = rng.gen::<f64>() - 0.5;
            }
        }
        for block in quad.iter_mut() {
            for row in block.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.gen::<f64>() - 0.5;
                }
            }
        }
        for v in 0..self.val.len() as u32 {
            let n = self.sphere_point(v);
            let mut w = [0.0f64; 3];
            for i in 0..3 {
                for j in 0..3 {
                    w[i] += lin[i][j] * n[j];
                    for k in 0..3 {
                        w[i] += quad[i][j][k] * n[j] * n[k];
                    }
                }
            }
            // project to the tangent plane and displace
            let dot = w[0] * n[0] + w[1] * n[1] + w[2] * n[2];
            let mut p = [
                n[0] + amplitude * (w[0] - dot * n[0]),
                n[1] + amplitude * (w[1] - dot * n[1]),
                n[2] + amplitude * (w[2] - dot * n[2]),
            ];
            let nn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            for x in &mut p {
                *x /= nn;
            }
            self.val[v as usize] = mesh::stereo(self.chart[v as usize], p);
        }
        self.rebalance();
    }

    /// Maximum chart-value distance to another field over all vertices,
    /// compared in each vertex's own target chart.
    pub fn max_difference(&self, other: &GaussField) -> f64 {
        let mut m: f64 = 0.0;
        for v in 0..self.val.len() as u32 {
            if let Some(o) = other.value_in(v, self.chart[v as usize]) {
                m = m.max((self.val[v as usize] - o).norm());
            } else {
                m = f64::INFINITY;
            }
        }
        m
    }
}

/// Local cubic interpolation of a complex vertex table at a chart point,
/// fit around the given center vertex.
pub fn interpolate_scalar(
    mesh: &SphereMesh,
    chart: Chart,
    center: u32,
    at: Complex64,
    values: &dyn Fn(u32) -> Option<Complex64>,
) -> Option<Complex64> {
    let (nbrs, rows) = mesh::fit_coefficient_rows(mesh, chart, center, 3)?;
    let zc = mesh.coord(chart, center)?;
    let d = at - zc;
    let mut coef = [Complex64::new(0.0, 0.0); 10];
    for (i, &u) in nbrs.iter().enumerate() {
        let val = values(u)?;
        for (j, c) in coef.iter_mut().enumerate() {
            *c += rows[(j, i)] * val;
        }
    }
    let (xi, eta) = (d.re, d.im);
    let basis = [
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
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        acc += basis[j] * coef[j];
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_field_charts() {
        let m = SphereMesh::build(2);
        let f = GaussField::identity(&m, 0.0);
        for v in 0..m.num_vertices() as u32 {
            assert!(f.val[v as usize].norm() <= 1.0 + 1e-12);
            let jet = f.jet(&m, v).unwrap();
            assert!((jet.gz - 1.0).norm() < 1e-9, "v={v}");
            assert!(jet.gzb.norm() < 1e-9);
            assert!(jet.gzzb.norm() < 1e-8);
        }
    }

    #[test]
    fn rebalance_hysteresis() {
        let m = SphereMesh::build(1);
        let mut f = GaussField::identity(&m, 0.0);
        f.val[3] = Complex64::new(2.0, 0.0);
        let c3 = f.chart[3];
        f.rebalance();
        assert_eq!(f.chart[3], c3.other());
        assert!((f.val[3] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let m = SphereMesh::build(3);
        let center = m.north;
        let at = Complex64::new(0.021, -0.013);
        let f = |u: u32| {
            let z = m.coord(Chart::Z, u)?;
            Some(z * z * z - 2.0 * z + Complex64::new(0.3, 0.1))
        };
        let got = interpolate_scalar(&m, Chart::Z, center, at, &f).unwrap();
        let expect = at * at * at - 2.0 * at + Complex64::new(0.3, 0.1);
        assert!((got - expect).norm() < 1e-12);
    }
}
