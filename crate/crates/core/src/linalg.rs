//! Dense complex linear-algebra helpers built on `nalgebra`.
//!
//! Everything here works on `DMatrix<C64>`/`DVector<C64>`. The SVD helper
//! returns a *full* decomposition (square `U` and `V`) with singular values
//! sorted in descending order and a deterministic phase convention applied
//! to every right singular vector.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Full SVD `H = U diag(sigma) V^H` with `U` (rows x rows), `V` (cols x cols)
/// and `min(rows, cols)` singular values in descending order.
#[derive(Clone, Debug)]
pub struct FullSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

/// Draws an `rows x cols` matrix of i.i.d. CN(0, variance) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    let scale = (variance / 2.0).sqrt();
    // column-major fill so that vec(H) order matches the draw order
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c(scale * re, scale * im);
        }
    }
    m
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
/// Ties go to the lowest index. Returns the applied unit phase.
pub fn fix_phase(v: &mut CVec) -> C64 {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag <= 0.0 {
        return c(1.0, 0.0);
    }
    let phase = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = c(v[best].re, 0.0);
    phase
}

/// Orthonormal completion of the column space of `basis` (n x k, orthonormal
/// columns) to an n x n unitary. The first k columns are `basis` itself.
fn complete_basis(basis: &CMat) -> CMat {
    let n = basis.nrows();
    let k = basis.ncols();
    let mut out = CMat::zeros(n, n);
    out.columns_mut(0, k).copy_from(basis);
    if k == n {
        return out;
    }
    let mut stacked = CMat::zeros(n, k + n);
    stacked.columns_mut(0, k).copy_from(basis);
    stacked.columns_mut(k, n).copy_from(&CMat::identity(n, n));
    let q = stacked.qr().q();
    // Householder QR: the first k columns of q span range(basis), the rest its complement.
    // Re-orthogonalise against the exact basis once for good measure.
    for j in k..n {
        let mut col = q.column(j).into_owned();
        for p in 0..j {
            let prev = out.column(p).into_owned();
            let proj = prev.dotc(&col);
            col -= prev * proj;
        }
        let nrm = col.norm();
        out.set_column(j, &(col / c(nrm, 0.0)));
    }
    out
}

/// Full SVD with descending singular values and the phase convention of
/// [`fix_phase`] applied to every column of `V` (and compensated in `U`).
pub fn full_svd(h: &CMat) -> Result<FullSvd> {
    let rows = h.nrows();
    let cols = h.ncols();
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("empty {rows}x{cols} matrix")));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let f = rows.min(cols);
    let svd = h.clone().svd(true, true);
    let u_thin = svd.u.expect("u requested");
    let v_thin = svd.v_t.expect("v_t requested").adjoint();
    let mut order: Vec<usize> = (0..f).collect();
    // stable sort keeps the original column order on ties
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u_sorted = CMat::zeros(rows, f);
    let mut v_sorted = CMat::zeros(cols, f);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u_thin.column(src));
        v_sorted.set_column(dst, &v_thin.column(src));
    }
    let mut u = complete_basis(&u_sorted);
    let mut v = complete_basis(&v_sorted);
    for j in 0..cols {
        let mut col = v.column(j).into_owned();
        let phase = fix_phase(&mut col);
        v.set_column(j, &col);
        if j < f {
            let ucol = u.column(j).into_owned() * phase;
            u.set_column(j, &ucol);
        }
    }
    for j in f..rows {
        let mut col = u.column(j).into_owned();
        fix_phase(&mut col);
        u.set_column(j, &col);
    }
    Ok(FullSvd { u, sigma, v })
}

/// Hermitian part `(A + A^H) / 2`, exactly Hermitian entry by entry.
pub fn hermitian_part(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = c(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .partial_cmp(&eig.eigenvalues[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CVec) -> Result<CVec> {
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// `x^H A x`, real part (A assumed Hermitian).
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// log2 det of a Hermitian positive-definite matrix.
pub fn log2_det_hpd(a: &CMat) -> Result<f64> {
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2)
}

pub fn unit(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_svd_reconstructs_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(r, cc) in &[(2, 4), (4, 4), (5, 3), (1, 3)] {
            let h = complex_gaussian(&mut rng, r, cc, 1.0);
            let s = full_svd(&h).unwrap();
            let f = r.min(cc);
            let mut sig = CMat::zeros(r, cc);
            for i in 0..f {
                sig[(i, i)] = c(s.sigma[i], 0.0);
            }
            let rec = &s.u * sig * s.v.adjoint();
            assert!(frobenius_sq(&(rec - &h)).sqrt() < 1e-12 * frobenius_sq(&h).sqrt());
            let eye_v = s.v.adjoint() * &s.v;
            let eye_u = s.u.adjoint() * &s.u;
            assert!(frobenius_sq(&(eye_v - CMat::identity(cc, cc))) < 1e-24);
            assert!(frobenius_sq(&(eye_u - CMat::identity(r, r))) < 1e-24);
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn phase_convention_makes_largest_entry_real_positive() {
        let mut v = CVec::from_vec(vec![c(0.1, 0.2), c(0.0, -0.9), c(0.3, 0.0)]);
        fix_phase(&mut v);
        assert!(v[1].im == 0.0 && v[1].re > 0.0);
        assert!((v[1].re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn hermitian_part_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = complex_gaussian(&mut rng, 4, 4, 1.0);
        let h = hermitian_part(&a);
        assert_eq!(h, h.adjoint());
    }

    #[test]
    fn log_det_of_diagonal() {
        let mut a = CMat::identity(2, 2);
        a[(0, 0)] = c(4.0, 0.0);
        a[(1, 1)] = c(2.0, 0.0);
        assert!((log2_det_hpd(&a).unwrap() - 3.0).abs() < 1e-12);
    }
}
