//! Newton solution of the Gauss-map equation and continuation of the
//! sphere family in the mean curvature parameter.
//!
//! The equation is invariant under precomposition with conformal motions of
//! the domain sphere, so the linearization is six-dimensionally degenerate.
//! The solver pins that freedom by prescribing the field value at three
//! vertices (north to 0, south to the w-chart origin, one equator reference
//! vertex to its own domain coordinate) and solves the stacked system by
//! regularized Gauss-Newton on the normal equations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::GaussField;
use crate::group::MetricLieGroup;
use crate::mesh::SphereMesh;
use crate::pde;
use crate::potential::{Chart, HPotential};
use crate::sparse::{self, Csr};
use crate::spectral;

/// Gauge pinning: three prescribed field values.
#[derive(Debug, Clone)]
pub struct Gauge {
    pub north: u32,
    pub south: u32,
    pub reference: u32,
    pub reference_value: Complex64,
}

impl Gauge {
    /// Standard gauge on a mesh: reference vertex nearest to z = 0.9.
    pub fn standard(mesh: &SphereMesh) -> Gauge {
        let mut best = 0u32;
        let mut bd = f64::INFINITY;
        for v in 0..mesh.num_vertices() as u32 {
            if let Some(z) = mesh.coord(Chart::Z, v) {
                let d = (z - Complex64::new(0.9, 0.0)).norm();
                if d < bd {
                    bd = d;
                    best = v;
                }
            }
        }
        Gauge {
            north: mesh.north,
            south: mesh.south,
            reference: best,
            reference_value: mesh.coord(Chart::Z, best).unwrap(),
        }
    }

    /// Gauge condition triples: (vertex, chart, prescribed value).
    pub fn conditions(&self) -> [(u32, Chart, Complex64); 3] {
        [
            (self.north, Chart::Z, Complex64::new(0.0, 0.0)),
            (self.south, Chart::W, Complex64::new(0.0, 0.0)),
            (self.reference, Chart::Z, self.reference_value),
        ]
    }

    pub fn pins(&self) -> [u32; 3] {
        [self.north, self.south, self.reference]
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Scaled residual max-norm target for the solved (pinned) system.
    pub tol: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Cap on the gauge-free least-squares passes that redistribute the
    /// collocation defect concentrated at the pinned vertices into the
    /// smooth discretization floor; the sweep stops early once the
    /// collocation merit stalls.
    pub polish_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 25,
            linear_tol: 1e-12,
            linear_max_iter: 4000,
            polish_steps: 16,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Max-norm over the solved (pinned) system's equations at its fixed point.
    pub residual: f64,
    /// Collocation defect at the pinned vertices before redistribution.
    pub pin_defect: f64,
    /// Max collocation residual of the delivered field after redistribution.
    pub floor: f64,
}

/// Assembles the gauge-pinned square Newton system: the collocation rows at
/// the three pinned vertices are replaced by the gauge conditions.
/// Returns the system, its residual vector, and the max collocation defect
/// of the replaced rows (reported, not solved for).
fn pinned_system(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &GaussField,
    gauge: &Gauge,
) -> Result<(Csr, Vec<f64>, f64)> {
    let (jac, mut rhs) = pde::assemble_newton(mesh, hp, field)?;
    let n = jac.n_cols;
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(jac.n_rows);
    for i in 0..jac.n_rows {
        let mut r = Vec::with_capacity(jac.row_ptr[i + 1] - jac.row_ptr[i]);
        for k in jac.row_ptr[i]..jac.row_ptr[i + 1] {
            r.push((jac.col[k], jac.val[k]));
        }
        rows.push(r);
    }
    let mut pin_defect = 0.0f64;
    for (v, want, target) in gauge.conditions() {
        let value = field.value_in(v, want).ok_or_else(|| {
            Error::NormalizationMissing("gauge vertex in degenerate chart".into())
        })?;
        let resid = value - target;
        let c = if field.chart[v as usize] == want {
            Complex64::new(1.0, 0.0)
        } else {
            let val = field.val[v as usize];
            -1.0 / (val * val)
        };
        let i = 2 * v as usize;
        pin_defect = pin_defect.max((rhs[i] * rhs[i] + rhs[i + 1] * rhs[i + 1]).sqrt());
        rows[i] = vec![(2 * v, c.re), (2 * v + 1, -c.im)];
        rows[i + 1] = vec![(2 * v, c.im), (2 * v + 1, c.re)];
        rhs[i] = resid.re;
        rhs[i + 1] = resid.im;
    }
    Ok((Csr::from_rows(2 * mesh.num_vertices(), n, rows), rhs, pin_defect))
}

fn pair_inf_norm(rhs: &[f64]) -> f64 {
    rhs.chunks(2)
        .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
        .fold(0.0, f64::max)
}

/// Scaled residual max-norm of the pinned system together with the
/// collocation defect at the pinned vertices.
pub fn residual_norms(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &GaussField,
    gauge: &Gauge,
) -> (f64, f64) {
    match pinned_system(mesh, hp, field, gauge) {
        Ok((_, rhs, pin)) => (pair_inf_norm(&rhs), pin),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

fn apply_step(mesh: &SphereMesh, field: &GaussField, step: &[f64], t: f64) -> GaussField {
    let mut cand = field.clone();
    for v in 0..mesh.num_vertices() {
        cand.val[v] += Complex64::new(t * step[2 * v], t * step[2 * v + 1]);
    }
    cand
}

/// Solves the gauge-pinned field equation at the field's mean curvature
/// value by damped Newton on the square system, then redistributes the
/// collocation defect concentrated at the pins by an adaptive
/// Levenberg-Marquardt sweep on the plain collocation merit.
/// The field is updated in place.
pub fn newton_solve(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &mut GaussField,
    gauge: &Gauge,
    opts: &NewtonOptions,
) -> Result<SolveInfo> {
    field.rebalance();
    let (r0, p0) = residual_norms(mesh, hp, field, gauge);
    let mut info = SolveInfo {
        iterations: 0,
        residual: r0,
        pin_defect: p0,
        floor: f64::NAN,
    };
    // an already-delivered field is a stationary point of the collocation
    // merit; skip the solve so repeated calls are idempotent
    if r0 >= opts.tol {
        if let Ok((jac, rhs)) = pde::assemble_newton(mesh, hp, field) {
            let mut g = vec![0.0; jac.n_cols];
            jac.matvec_transpose(&rhs, &mut g);
            let gn = sparse::norm2(&g);
            let fn2 = sparse::norm2(&rhs).max(1e-300);
            let mut colsq = vec![0.0; jac.n_cols];
            for i in 0..jac.n_rows {
                for k in jac.row_ptr[i]..jac.row_ptr[i + 1] {
                    colsq[jac.col[k] as usize] += jac.val[k] * jac.val[k];
                }
            }
            let colmax = colsq.iter().cloned().fold(0.0f64, f64::max);
            // delivered solutions sit at (numerical) least-squares
            // stationarity; perturbations above the discretization floor
            // push this ratio to O(0.1)
            let ratio = gn / (fn2 * colmax.sqrt().max(1e-300));
            if ratio < 1e-2 {
                info.floor = pde::residual_norm(mesh, hp, field);
                info.residual = 0.0;
                return Ok(info);
            }
        }
        let mut converged = false;
        for iter in 1..=opts.max_iter {
            let (jac, rhs, _) = pinned_system(mesh, hp, field, gauge)?;
            let merit0 = sparse::norm2(&rhs);
            let mut b: Vec<f64> = rhs.iter().map(|x| -x).collect();
            let step = match sparse::ilu0(&jac) {
                Some(prec) => {
                    match sparse::bicgstab(&jac, &b, &prec, opts.linear_tol, opts.linear_max_iter)
                    {
                        Ok((x, _, _)) => x,
                        Err(_) => solve_normal_fallback(&jac, &mut b, opts)?,
                    }
                }
                None => solve_normal_fallback(&jac, &mut b, opts)?,
            };
            let mut accepted = false;
            let mut t = 1.0;
            for _ in 0..14 {
                let cand = apply_step(mesh, field, &step, t);
                let merit = match pinned_system(mesh, hp, &cand, gauge) {
                    Ok((_, r, _)) => sparse::norm2(&r),
                    Err(_) => f64::INFINITY,
                };
                if merit < merit0 * (1.0 - 1e-4 * t) {
                    *field = cand;
                    field.rebalance();
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let (r, p) = residual_norms(mesh, hp, field, gauge);
            info.iterations = iter;
            info.residual = r;
            info.pin_defect = p;
            if !accepted {
                return Err(Error::NewtonDivergence {
                    iterations: iter,
                    residual: r,
                });
            }
            if r < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonDivergence {
                iterations: opts.max_iter,
                residual: info.residual,
            });
        }
    }
    // defect redistribution: Levenberg-Marquardt on the plain collocation
    // merit until it stalls at the discretization floor; the incomplete
    // factorization is built once and reused across steps
    let mut lambda = 1e-6;
    let mut stalls = 0usize;
    let mut shared_prec: Option<sparse::Preconditioner> = None;
    for _ in 0..opts.polish_steps {
        let (jac, rhs) = pde::assemble_newton(mesh, hp, field)?;
        let merit0 = sparse::norm2(&rhs);
        let normal0 = jac.normal_matrix();
        let diag = normal0.diagonal();
        let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
        let mut b = vec![0.0; jac.n_cols];
        jac.matvec_transpose(&rhs, &mut b);
        for x in &mut b {
            *x = -*x;
        }
        let mut accepted = false;
        for _ in 0..12 {
            let mut n_lm = normal0.clone();
            n_lm.add_diagonal(&diag, lambda);
            n_lm.add_diagonal(&vec![1.0; diag.len()], dmax * 1e-14 + 1e-300);
            if shared_prec.is_none() {
                shared_prec = Some(sparse::auto_preconditioner(&n_lm));
            }
            let prec = shared_prec.as_ref().unwrap();
            let Ok((step, _, _)) = sparse::pcg(&n_lm, &b, prec, 1e-8, opts.linear_max_iter)
            else {
                lambda *= 10.0;
                continue;
            };
            let cand = apply_step(mesh, field, &step, 1.0);
            let merit = match pde::pde_residual(mesh, hp, &cand) {
                Ok(r) => r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
                Err(_) => f64::INFINITY,
            };
            if merit < merit0 {
                if merit > merit0 * (1.0 - 1e-4) {
                    stalls += 1;
                }
                *field = cand;
                field.rebalance();
                lambda = (lambda / 3.0).max(1e-13);
                accepted = true;
                break;
            }
            lambda *= 6.0;
            if lambda > 1e3 {
                break;
            }
        }
        if !accepted || stalls >= 2 {
            break;
        }
    }
    info.floor = pde::residual_norm(mesh, hp, field);
    Ok(info)
}

fn solve_normal_fallback(
    jac: &Csr,
    b: &mut [f64],
    opts: &NewtonOptions,
) -> Result<Vec<f64>> {
    let mut normal = jac.normal_matrix();
    let diag = normal.diagonal();
    normal.add_diagonal(&diag, 1e-10);
    let mut bn = vec![0.0; jac.n_cols];
    // b currently holds -rhs; normal right side is -J^T rhs
    jac.matvec_transpose(b, &mut bn);
    let prec = sparse::auto_preconditioner(&normal);
    let (x, _, _) = sparse::pcg(&normal, &bn, &prec, opts.linear_tol, opts.linear_max_iter * 4)?;
    Ok(x)
}

/// Solves the nearly-round sphere at a large mean curvature from the
/// identity Gauss map.
pub fn initial_sphere(
    mesh: &SphereMesh,
    group: &MetricLieGroup,
    h_start: f64,
) -> Result<(GaussField, SolveInfo)> {
    let scale = match group {
        MetricLieGroup::Unimodular(u) => u.c.iter().fold(1.0f64, |a, &b| a.max(b.abs())),
        MetricLieGroup::NonUnimodular(n) => n.a.max(n.b).max(1.0),
    };
    if h_start < 10.0 * scale {
        return Err(Error::InitFailure {
            h: h_start,
            reason: format!("initial mean curvature below 10 * max structure scale {scale}"),
        });
    }
    let hp = HPotential::new(group, h_start);
    let mut field = GaussField::identity(mesh, h_start);
    let gauge = Gauge::standard(mesh);
    let opts = NewtonOptions {
        polish_steps: 0,
        ..NewtonOptions::default()
    };
    let info = newton_solve(mesh, &hp, &mut field, &gauge, &opts)
        .map_err(|e| Error::InitFailure {
            h: h_start,
            reason: e.to_string(),
        })?;
    let (degree, min_jac) = spectral::gauss_degree(mesh, &field);
    if degree != 1 || min_jac <= 0.0 {
        return Err(Error::InitFailure {
            h: h_start,
            reason: format!("solved field is not a degree-one diffeomorphism (degree {degree}, min Jacobian {min_jac:.3e})"),
        });
    }
    Ok((field, info))
}

/// Conformal factor of the induced metric at every vertex, in the vertex's
/// domain chart.
pub fn conformal_factors(
    mesh: &SphereMesh,
    hp: &HPotential,
    field: &GaussField,
) -> Result<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut out = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let jet = field.jet(mesh, v).ok_or(Error::PotentialZeroOnRange {
            vertex: v as usize,
            value: field.val[v as usize],
            abs_r: 0.0,
        })?;
        let r = hp.eval(jet.target, jet.val);
        if r.norm() < pde::POTENTIAL_FLOOR {
            return Err(Error::PotentialZeroOnRange {
                vertex: v as usize,
                value: jet.val,
                abs_r: r.norm(),
            });
        }
        let d = 1.0 + jet.val.norm_sqr();
        out.push(4.0 * d * d * jet.gz.norm_sqr() / r.norm_sqr());
    }
    Ok(out)
}

/// Converts a conformal factor at a vertex into a specific domain chart.
pub fn factor_in_chart(mesh: &SphereMesh, v: u32, lam_domain: f64, chart: Chart) -> f64 {
    let dc = mesh.domain_chart(v);
    if dc == chart {
        lam_domain
    } else {
        // lambda_w = lambda_z |z|^4 under w = 1/z (both directions alike)
        let c = mesh.coord(dc, v).unwrap();
        lam_domain * c.norm_sqr() * c.norm_sqr()
    }
}

/// Chart used for whole-triangle quantities.
pub fn triangle_chart(mesh: &SphereMesh, t: &[u32; 3]) -> Chart {
    let zmax = t
        .iter()
        .map(|&v| mesh.z[v as usize].norm())
        .fold(0.0f64, f64::max);
    if zmax <= 1.0 {
        Chart::Z
    } else {
        Chart::W
    }
}

/// Surface area by conformal-factor quadrature over chart triangles, and by
/// Heron's formula on lambda-weighted edge lengths (cross-check pair).
pub fn area(mesh: &SphereMesh, hp: &HPotential, field: &GaussField) -> Result<(f64, f64)> {
    let lam = conformal_factors(mesh, hp, field)?;
    let mut area_quad = 0.0;
    let mut area_heron = 0.0;
    for t in &mesh.tris {
        let ch = triangle_chart(mesh, t);
        let za = mesh.coord(ch, t[0]).unwrap();
        let zb = mesh.coord(ch, t[1]).unwrap();
        let zc = mesh.coord(ch, t[2]).unwrap();
        let la = factor_in_chart(mesh, t[0], lam[t[0] as usize], ch);
        let lb = factor_in_chart(mesh, t[1], lam[t[1] as usize], ch);
        let lc = factor_in_chart(mesh, t[2], lam[t[2] as usize], ch);
        let chart_area = 0.5
            * ((zb - za).re * (zc - za).im - (zb - za).im * (zc - za).re)
                .abs();
        area_quad += chart_area * (la + lb + lc) / 3.0;
        let el = |x: Complex64, y: Complex64, lx: f64, ly: f64| {
            (x - y).norm() * 0.5 * (lx.sqrt() + ly.sqrt())
        };
        let a = el(zb, zc, lb, lc);
        let b = el(za, zc, la, lc);
        let c = el(za, zb, la, lb);
        let s = 0.5 * (a + b + c);
        let h2 = s * (s - a) * (s - b) * (s - c);
        if h2 > 0.0 {
            area_heron += h2.sqrt();
        }
    }
    Ok((area_quad, area_heron))
}

/// One accepted member of the continued family.
#[derive(Debug, Clone)]
pub struct AcceptedSphere {
    pub h: f64,
    pub field: GaussField,
    pub info: SolveInfo,
    pub degree: i64,
    pub min_jacobian: f64,
    pub area: f64,
    /// True when this H was an explicitly requested target.
    pub is_target: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton: NewtonOptions,
    /// Record every accepted step, not only targets.
    pub record_all: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 0.5,
            min_step: 1e-8,
            max_step: 2.0,
            newton: NewtonOptions::default(),
            record_all: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProgressEvent {
    pub h: f64,
    pub residual: f64,
    pub area: f64,
    pub accepted: bool,
}

/// Continues the solved field from its mean curvature down (or up) through
/// the sorted list of targets, with a secant predictor and adaptive steps.
/// Every accepted state must pass the acceptance battery: residual below
/// tolerance, positive Gauss Jacobian, degree one.
pub fn continue_family(
    mesh: &SphereMesh,
    group: &MetricLieGroup,
    start: &GaussField,
    targets: &[f64],
    opts: &ContinuationOptions,
    mut progress: Option<&mut dyn FnMut(ProgressEvent)>,
) -> Result<Vec<AcceptedSphere>> {
    let gauge = Gauge::standard(mesh);
    let mut record = Vec::new();
    let mut field = start.clone();
    let mut h = start.h;
    let mut prev: Option<(f64, GaussField)> = None;

    let mut targets = targets.to_vec();
    targets.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // walk down in H through each target
    let accept = |h: f64,
                  field: &GaussField,
                  info: SolveInfo,
                  is_target: bool,
                  record: &mut Vec<AcceptedSphere>|
     -> Result<()> {
        let hp = HPotential::new(group, h);
        let (degree, min_jac) = spectral::gauss_degree(mesh, field);
        if degree != 1 || min_jac <= 0.0 {
            return Err(Error::NewtonDivergence {
                iterations: info.iterations,
                residual: info.residual,
            });
        }
        let (a, _) = area(mesh, &hp, field)?;
        record.push(AcceptedSphere {
            h,
            field: field.clone(),
            info,
            degree,
            min_jacobian: min_jac,
            area: a,
            is_target,
        });
        Ok(())
    };

    {
        let hp0 = HPotential::new(group, h);
        let (a0, _) = area(mesh, &hp0, &field)?;
        if let Some(cb) = progress.as_deref_mut() {
            cb(ProgressEvent {
                h,
                residual: 0.0,
                area: a0,
                accepted: true,
            });
        }
    }
    if targets.first().map_or(false, |&t| (t - h).abs() < 1e-14) || opts.record_all {
        // starting state counts when it is itself a target
        let hp0 = HPotential::new(group, h);
        let (r0, p0) = residual_norms(mesh, &hp0, &field, &gauge);
        let info = SolveInfo {
            iterations: 0,
            residual: r0,
            pin_defect: p0,
            floor: pde::residual_norm(mesh, &hp0, &field),
        };
        let is_target = targets.first().map_or(false, |&t| (t - h).abs() < 1e-14);
        accept(h, &field, info, is_target, &mut record)?;
        if is_target {
            targets.remove(0);
        }
    }

    for &target in &targets.clone() {
        let mut step = opts.initial_step.min(opts.max_step);
        while (h - target).abs() > 1e-14 {
            if !HPotential::new(group, h).nonvanishing_classification(group)
                && !group.is_su2_type()
            {
                return Err(Error::StepUnderflow {
                    h,
                    step,
                    residual: f64::NAN,
                });
            }
            let dir = if target < h { -1.0 } else { 1.0 };
            let dh = dir * step.min((h - target).abs());
            let h_next = h + dh;
            // potential must classify as nonvanishing at the attempted level
            let hp_next = HPotential::new(group, h_next);
            if !hp_next.nonvanishing_classification(group) {
                // land just short of the obstruction and fail loudly
                return Err(Error::StepUnderflow {
                    h: h_next,
                    step: dh,
                    residual: f64::NAN,
                });
            }
            let mut cand = field.clone();
            cand.h = h_next;
            if let Some((hp_prev, fp)) = &prev {
                // secant extrapolation in H, per vertex in current charts
                let denom = h - hp_prev;
                if denom.abs() > 1e-14 {
                    let w = dh / denom;
                    for v in 0..mesh.num_vertices() as u32 {
                        if let Some(old) = fp.value_in(v, cand.chart[v as usize]) {
                            let cur = cand.val[v as usize];
                            cand.val[v as usize] = cur + (cur - old) * w;
                        }
                    }
                    cand.rebalance();
                }
            }
            let is_target_step = (h_next - target).abs() < 1e-14;
            let step_opts = if is_target_step || opts.record_all {
                opts.newton.clone()
            } else {
                NewtonOptions {
                    polish_steps: 0,
                    ..opts.newton.clone()
                }
            };
            match newton_solve(mesh, &hp_next, &mut cand, &gauge, &step_opts) {
                Ok(info) => {
                    prev = Some((h, field.clone()));
                    field = cand;
                    h = h_next;
                    let is_target = is_target_step;
                    if is_target || opts.record_all {
                        accept(h, &field, info, is_target, &mut record)?;
                    }
                    if let Some(cb) = progress.as_deref_mut() {
                        let (a, _) = area(mesh, &hp_next, &field)?;
                        cb(ProgressEvent {
                            h,
                            residual: info.residual,
                            area: a,
                            accepted: true,
                        });
                    }
                    step = (step * 1.3).min(opts.max_step);
                }
                Err(e) => {
                    if let Some(cb) = progress.as_deref_mut() {
                        cb(ProgressEvent {
                            h: h_next,
                            residual: f64::NAN,
                            area: f64::NAN,
                            accepted: false,
                        });
                    }
                    step *= 0.5;
                    if step < opts.min_step {
                        return Err(Error::StepUnderflow {
                            h,
                            step,
                            residual: match e {
                                Error::NewtonDivergence { residual, .. } => residual,
                                _ => f64::NAN,
                            },
                        });
                    }
                }
            }
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round() -> MetricLieGroup {
        MetricLieGroup::unimodular([2.0, 2.0, 2.0]).unwrap()
    }

    #[test]
    fn initial_sphere_round_converges_fast() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let (field, info) = initial_sphere(&mesh, &group, 20.0).unwrap();
        assert!(info.iterations <= 8, "iterations {}", info.iterations);
        assert!(info.residual < 1e-9);
        let (deg, minj) = spectral::gauss_degree(&mesh, &field);
        assert_eq!(deg, 1);
        assert!(minj > 0.0);
    }

    #[test]
    fn resolving_converged_field_is_free() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let (mut field, _) = initial_sphere(&mesh, &group, 20.0).unwrap();
        let hp = HPotential::new(&group, 20.0);
        let gauge = Gauge::standard(&mesh);
        let info = newton_solve(&mesh, &hp, &mut field, &gauge, &NewtonOptions::default()).unwrap();
        assert!(info.iterations <= 1, "iterations {}", info.iterations);
    }

    #[test]
    fn perturbed_solution_reconverges() {
        let mesh = SphereMesh::build(3);
        let group = round();
        let (field, _) = initial_sphere(&mesh, &group, 20.0).unwrap();
        let mut pert = field.clone();
        pert.perturb_smooth(1e-3, 21);
        let hp = HPotential::new(&group, 20.0);
        let gauge = Gauge::standard(&mesh);
        newton_solve(&mesh, &hp, &mut pert, &gauge, &NewtonOptions::default()).unwrap();
        assert!(field.max_difference(&pert) < 1e-8);
    }

    #[test]
    fn berger_solve_and_fixed_point() {
        let mesh = SphereMesh::build(2);
        let group = MetricLieGroup::unimodular([2.0, 2.0, 1.0]).unwrap();
        let (mut field, info) = initial_sphere(&mesh, &group, 20.0).unwrap();
        assert!(info.residual < 1e-9);
        let hp = HPotential::new(&group, 20.0);
        let gauge = Gauge::standard(&mesh);
        // deliver the polished field, then re-solving is a no-op
        newton_solve(&mesh, &hp, &mut field, &gauge, &NewtonOptions::default()).unwrap();
        let before = field.clone();
        let info2 = newton_solve(&mesh, &hp, &mut field, &gauge, &NewtonOptions::default()).unwrap();
        assert!(info2.iterations <= 1, "iterations {}", info2.iterations);
        assert!(before.max_difference(&field) < 1e-12);
    }

    #[test]
    fn round_area_oracle_coarse() {
        // geodesic spheres in the unit round metric: area = 4 pi sin^2 r,
        // H = cot r; at H = 1, area = 2 pi
        let mesh = SphereMesh::build(3);
        let group = round();
        let (field, _) = initial_sphere(&mesh, &group, 20.0).unwrap();
        let spheres = continue_family(
            &mesh,
            &group,
            &field,
            &[1.0],
            &ContinuationOptions::default(),
            None,
        )
        .unwrap();
        let s = spheres.last().unwrap();
        let expect = 2.0 * std::f64::consts::PI;
        assert!(
            (s.area - expect).abs() / expect < 0.01,
            "area {} vs {}",
            s.area,
            expect
        );
    }
}
