//! Minimal sparse kernel: CSR matrices, Gauss-Newton normal equations,
//! zero-fill incomplete Cholesky, and preconditioned conjugate gradients.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Builds from per-row triplet lists; duplicate columns are summed.
    pub fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Csr {
        assert_eq!(rows.len(), n_rows);
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < r.len() {
                let c = r[i].0;
                let mut s = 0.0;
                while i < r.len() && r[i].0 == c {
                    s += r[i].1;
                    i += 1;
                }
                col.push(c);
                val.push(s);
            }
            row_ptr.push(col.len());
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            col,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            y[i] = acc;
        }
    }

    /// y = A^T x accumulated by scattering rows.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col[k] as usize] += self.val[k] * xi;
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.n_cols];
        for &c in &self.col {
            counts[c as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(self.n_cols + 1);
        row_ptr.push(0usize);
        for c in 0..self.n_cols {
            let last = *row_ptr.last().unwrap();
            row_ptr.push(last + counts[c]);
        }
        let mut col = vec![0u32; self.nnz()];
        let mut val = vec![0.0; self.nnz()];
        let mut next = row_ptr.clone();
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col[k] as usize;
                let dst = next[c];
                col[dst] = i as u32;
                val[dst] = self.val[k];
                next[c] += 1;
            }
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col,
            val,
        }
    }

    /// Normal matrix A^T A as CSR (symmetric, both triangles stored).
    pub fn normal_matrix(&self) -> Csr {
        let at = self.transpose();
        let n = self.n_cols;
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
        let mut dense = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();
        for i in 0..n {
            touched.clear();
            for k in at.row_ptr[i]..at.row_ptr[i + 1] {
                let r = at.col[k] as usize; // row of A containing column i
                let aik = at.val[k];
                for k2 in self.row_ptr[r]..self.row_ptr[r + 1] {
                    let j = self.col[k2] as usize;
                    if dense[j] == 0.0 {
                        touched.push(j as u32);
                    }
                    dense[j] += aik * self.val[k2];
                }
            }
            touched.sort_unstable();
            let mut row = Vec::with_capacity(touched.len());
            for &j in &touched {
                row.push((j, dense[j as usize]));
                dense[j as usize] = 0.0;
            }
            rows.push(row);
        }
        Csr::from_rows(n, n, rows)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows.min(self.n_cols)];
        for i in 0..d.len() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col[k] as usize == i {
                    d[i] = self.val[k];
                }
            }
        }
        d
    }

    /// Adds alpha * diag(d) in place (pattern must already contain diagonal).
    pub fn add_diagonal(&mut self, d: &[f64], alpha: f64) {
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col[k] as usize == i {
                    self.val[k] += alpha * d[i];
                }
            }
        }
    }
}

/// Zero-fill incomplete Cholesky factor (lower triangular CSR).
pub struct Ic0 {
    l: Csr,
}

/// Factors a symmetric positive definite CSR matrix with zero fill-in.
/// Returns None on pivot breakdown.
pub fn ic0(a: &Csr) -> Option<Ic0> {
    let n = a.n_rows;
    // lower-triangular pattern of a
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = Vec::new();
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            if (a.col[k] as usize) <= i {
                r.push((a.col[k], a.val[k]));
            }
        }
        rows.push(r);
    }
    let mut l = Csr::from_rows(n, n, rows);
    for i in 0..n {
        let (start_i, end_i) = (l.row_ptr[i], l.row_ptr[i + 1]);
        for k in start_i..end_i {
            let j = l.col[k] as usize;
            // sum over common sub-columns of rows i and j
            let mut s = l.val[k];
            {
                let (mut p, mut q) = (start_i, l.row_ptr[j]);
                let end_j = l.row_ptr[j + 1];
                while p < k && q < end_j {
                    let cj = l.col[q];
                    if cj as usize >= j {
                        break;
                    }
                    let ci = l.col[p];
                    match ci.cmp(&cj) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s -= l.val[p] * l.val[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
            }
            if j < i {
                let djj = l.val[l.row_ptr[j + 1] - 1];
                l.val[k] = s / djj;
            } else {
                if s <= 0.0 {
                    return None;
                }
                l.val[k] = s.sqrt();
            }
        }
    }
    Some(Ic0 { l })
}

impl Ic0 {
    /// Applies the preconditioner: solves L L^T z = r.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.l.n_rows;
        // forward solve L y = r
        for i in 0..n {
            let mut s = r[i];
            let end = self.l.row_ptr[i + 1] - 1;
            for k in self.l.row_ptr[i]..end {
                s -= self.l.val[k] * z[self.l.col[k] as usize];
            }
            z[i] = s / self.l.val[end];
        }
        // backward solve L^T z = y (in place, scattering)
        for i in (0..n).rev() {
            let end = self.l.row_ptr[i + 1] - 1;
            z[i] /= self.l.val[end];
            let zi = z[i];
            for k in self.l.row_ptr[i]..end {
                z[self.l.col[k] as usize] -= self.l.val[k] * zi;
            }
        }
    }
}

pub enum Preconditioner {
    Identity,
    Jacobi(Vec<f64>),
    IncompleteCholesky(Ic0),
}

impl Preconditioner {
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(d) => {
                for i in 0..r.len() {
                    z[i] = r[i] / d[i];
                }
            }
            Preconditioner::IncompleteCholesky(ic) => ic.apply(r, z),
        }
    }
}

/// Builds the strongest preconditioner that factors cleanly: incomplete
/// Cholesky with escalating diagonal shifts, falling back to Jacobi.
pub fn auto_preconditioner(a: &Csr) -> Preconditioner {
    let d = a.diagonal();
    let mut shifted = a.clone();
    for shift in [0.0, 1e-8, 1e-4, 1e-2, 1e-1] {
        if shift > 0.0 {
            shifted = a.clone();
            shifted.add_diagonal(&d, shift);
        }
        if let Some(ic) = ic0(&shifted) {
            return Preconditioner::IncompleteCholesky(ic);
        }
    }
    let dj = d
        .iter()
        .map(|&x| if x.abs() < 1e-300 { 1.0 } else { x.abs() })
        .collect();
    Preconditioner::Jacobi(dj)
}

/// Preconditioned conjugate gradients for SPD systems.
/// Returns (solution, iterations, relative residual).
pub fn pcg(
    a: &Csr,
    b: &[f64],
    prec: &Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = norm2(b).max(1e-300);
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rn = norm2(&r);
        if rn <= tol * bnorm {
            return Ok((x, it, rn / bnorm));
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::LinearSolveFailure(format!(
                "non-positive curvature in CG at iteration {it} (pAp = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        prec.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = norm2(&r);
    if rn <= tol.max(1e-8) * bnorm * 100.0 {
        // accept a mildly stalled solve; callers check the Newton residual
        return Ok((x, max_iter, rn / bnorm));
    }
    Err(Error::LinearSolveFailure(format!(
        "CG did not converge in {max_iter} iterations (relres {:.3e})",
        rn / bnorm
    )))
}

/// Zero-fill incomplete LU factors of a square matrix (L unit-lower with
/// implicit diagonal, U upper), stored together on the original pattern.
pub struct Ilu0 {
    a: Csr,
    /// Index of the diagonal entry in each row.
    diag: Vec<usize>,
}

/// Factors a square CSR matrix with zero fill-in. Returns None when a pivot
/// degenerates.
pub fn ilu0(a: &Csr) -> Option<Ilu0> {
    let n = a.n_rows;
    let mut f = a.clone();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        for k in f.row_ptr[i]..f.row_ptr[i + 1] {
            if f.col[k] as usize == i {
                diag[i] = k;
            }
        }
        if diag[i] == usize::MAX {
            return None;
        }
    }
    // IKJ variant on the static pattern
    let mut colmap: Vec<usize> = vec![usize::MAX; n];
    for i in 0..n {
        for k in f.row_ptr[i]..f.row_ptr[i + 1] {
            colmap[f.col[k] as usize] = k;
        }
        let (start, end) = (f.row_ptr[i], f.row_ptr[i + 1]);
        for kk in start..end {
            let k = f.col[kk] as usize;
            if k >= i {
                break;
            }
            let piv = f.val[diag[k]];
            if piv.abs() < 1e-300 {
                return None;
            }
            let lik = f.val[kk] / piv;
            f.val[kk] = lik;
            for jj in (diag[k] + 1)..f.row_ptr[k + 1] {
                let j = f.col[jj] as usize;
                let pos = colmap[j];
                if pos != usize::MAX && pos > kk {
                    f.val[pos] -= lik * f.val[jj];
                }
            }
        }
        if f.val[diag[i]].abs() < 1e-300 {
            return None;
        }
        for k in f.row_ptr[i]..f.row_ptr[i + 1] {
            colmap[f.col[k] as usize] = usize::MAX;
        }
    }
    Some(Ilu0 { a: f, diag })
}

impl Ilu0 {
    /// Solves L U z = r.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.n_rows;
        // forward: L y = r (unit diagonal)
        for i in 0..n {
            let mut s = r[i];
            for k in self.a.row_ptr[i]..self.diag[i] {
                s -= self.a.val[k] * z[self.a.col[k] as usize];
            }
            z[i] = s;
        }
        // backward: U z = y
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (self.diag[i] + 1)..self.a.row_ptr[i + 1] {
                s -= self.a.val[k] * z[self.a.col[k] as usize];
            }
            z[i] = s / self.a.val[self.diag[i]];
        }
    }
}

/// Right-preconditioned BiCGSTAB for square nonsymmetric systems.
/// Returns (solution, iterations, relative residual).
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    prec: &Ilu0,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let bnorm = norm2(b).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..max_iter {
        let rn = norm2(&r);
        if rn <= tol * bnorm {
            return Ok((x, it, rn / bnorm));
        }
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        prec.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let mut ax = vec![0.0; n];
            a.matvec(&x, &mut ax);
            let rn = b
                .iter()
                .zip(&ax)
                .map(|(bi, ai)| (bi - ai) * (bi - ai))
                .sum::<f64>()
                .sqrt();
            return Ok((x, it, rn / bnorm));
        }
        prec.apply(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    let rn = norm2(&r);
    if rn <= tol * bnorm * 1e3 {
        return Ok((x, max_iter, rn / bnorm));
    }
    Err(Error::LinearSolveFailure(format!(
        "BiCGSTAB stalled (relres {:.3e})",
        rn / bnorm
    )))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// 1D Poisson-like SPD matrix.
    fn laplace1d(n: usize) -> Csr {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = vec![(i as u32, 2.5)];
            if i > 0 {
                r.push(((i - 1) as u32, -1.0));
            }
            if i + 1 < n {
                r.push(((i + 1) as u32, -1.0));
            }
            rows.push(r);
        }
        Csr::from_rows(n, n, rows)
    }

    #[test]
    fn transpose_and_normal() {
        let a = Csr::from_rows(
            2,
            3,
            vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0), (2, -1.0)]],
        );
        let at = a.transpose();
        assert_eq!(at.n_rows, 3);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 2.0]);
        let n = a.normal_matrix();
        // A^T A = [[1,0,2],[0,9,-3],[2,-3,5]]
        let mut z = vec![0.0; 3];
        n.matvec(&[1.0, 0.0, 0.0], &mut z);
        assert_eq!(z, vec![1.0, 0.0, 2.0]);
        n.matvec(&[0.0, 1.0, 0.0], &mut z);
        assert_eq!(z, vec![0.0, 9.0, -3.0]);
    }

    #[test]
    fn pcg_solves_spd_system() {
        let n = 400;
        let a = laplace1d(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xtrue: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xtrue, &mut b);
        for prec in [
            Preconditioner::Identity,
            Preconditioner::Jacobi(a.diagonal()),
            auto_preconditioner(&a),
        ] {
            let (x, _, _) = pcg(&a, &b, &prec, 1e-12, 10000).unwrap();
            let err: f64 = x
                .iter()
                .zip(&xtrue)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-8, "err = {err}");
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric() {
        let n = 500;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = vec![(i as u32, 3.0)];
            if i > 0 {
                r.push(((i - 1) as u32, -1.4));
            }
            if i + 1 < n {
                r.push(((i + 1) as u32, -0.7));
            }
            rows.push(r);
        }
        let a = Csr::from_rows(n, n, rows);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xtrue: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xtrue, &mut b);
        let prec = ilu0(&a).unwrap();
        let (x, _, _) = bicgstab(&a, &b, &prec, 1e-13, 2000).unwrap();
        let err: f64 = x
            .iter()
            .zip(&xtrue)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn ic0_accelerates_cg() {
        let n = 2000;
        let a = laplace1d(n);
        let b = vec![1.0; n];
        let (_, it_jacobi, _) = pcg(
            &a,
            &b,
            &Preconditioner::Jacobi(a.diagonal()),
            1e-10,
            100000,
        )
        .unwrap();
        let (_, it_ic, _) = pcg(&a, &b, &auto_preconditioner(&a), 1e-10, 100000).unwrap();
        assert!(it_ic < it_jacobi, "ic {it_ic} vs jacobi {it_jacobi}");
    }
}
