//! Dense helpers on top of nalgebra: block assembly, symmetric square roots,
//! Stein equations and certified decay bounds for Schur matrices.

use crate::error::{bail, Error, Result};
use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;

pub(crate) const EIG_FLOOR: f64 = 1e-14;

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex::new(v, 0.0))
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        bail!(DimensionMismatch, "inverse of a {}x{} matrix", m.nrows(), m.ncols());
    }
    if m.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    match m.clone().try_inverse() {
        Some(inv) if all_finite(&inv) => Ok(inv),
        _ => bail!(Numeric, "matrix is singular"),
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eig(m: &Mat) -> (DVector<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), Mat::zeros(0, 0));
    }
    let se = SymmetricEigen::new(symmetrize(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn sym_max_eig(m: &Mat) -> f64 {
    let (vals, _) = sym_eig(m);
    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn sym_min_eig(m: &Mat) -> f64 {
    let (vals, _) = sym_eig(m);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

fn sym_fn(m: &Mat, floor: f64, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let (vals, vecs) = sym_eig(m);
    let mut d = Mat::zeros(vals.len(), vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v < -floor.max(1e-10 * vals.amax()) {
            bail!(Numeric, "matrix is not positive semidefinite (eigenvalue {v:e})");
        }
        d[(i, i)] = f(v.max(floor));
    }
    Ok(&vecs * d * vecs.transpose())
}

/// `m^{1/2}` of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: &Mat) -> Result<Mat> {
    sym_fn(m, 0.0, libm::sqrt)
}

/// `m^{-1/2}` with the eigenvalue floor applied before inversion.
pub fn sym_inv_sqrt(m: &Mat, floor: f64) -> Result<Mat> {
    sym_fn(m, floor, |v| 1.0 / libm::sqrt(v))
}

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn min_singular(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

pub fn spectral_norm_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(m) {
        bail!(Numeric, "eigenvalues of a non-finite matrix");
    }
    // nalgebra's QR has no exceptional shifts and can cycle on structured inputs;
    // cap it, retry on a rotated copy, then fall back to a shifted QR of our own.
    let n = m.nrows();
    let attempt = |x: Mat| nalgebra::Schur::try_new(x, f64::EPSILON, 200 * n + 1000).map(|s| s.complex_eigenvalues().iter().copied().collect());
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * i as f64);
    v /= v.norm();
    let h = eye(n) - &v * v.transpose() * 2.0;
    let Some(ev): Option<Vec<Complex<f64>>> = attempt(m.clone()).or_else(|| attempt(&h * m * &h)).or_else(|| hqr(balance(m))) else {
        bail!(Numeric, "eigenvalue iteration did not converge");
    };
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        bail!(Numeric, "eigenvalue solver failed");
    }
    Ok(ev)
}

/// Francis double-shift QR on the Hessenberg form, with exceptional shifts
/// every ten stalled sweeps. Eigenvalues only.
fn hqr(m: Mat) -> Option<Vec<Complex<f64>>> {
    let n = m.nrows();
    let mut a = m.hessenberg().h();
    let anorm: f64 = (0..n).flat_map(|i| (i.saturating_sub(1)..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].abs()).sum();
    let mut wr = alloc::vec![0.0; n];
    let mut wi = alloc::vec![0.0; n];
    let mut t = 0.0;
    let mut nn = n as isize - 1;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= f64::EPSILON * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = libm::sqrt(q.abs());
                x += t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    wr[nu - 1] = x + z;
                    wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == 100 {
                return None;
            }
            if its % 10 == 9 {
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r, mut z);
            let mut mm = nu - 2;
            loop {
                z = a[(mm, mm)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(mm + 1, mm)] + a[(mm, mm + 1)];
                q = a[(mm + 1, mm + 1)] - z - rr - ss;
                r = a[(mm + 2, mm + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if mm == l {
                    break;
                }
                let u = a[(mm, mm - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(mm - 1, mm - 1)].abs() + z.abs() + a[(mm + 1, mm + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                mm -= 1;
            }
            for i in mm + 2..=nu {
                a[(i, i - 2)] = 0.0;
                if i != mm + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }
            for k in mm..nu {
                if k != mm {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k != nu - 1 { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = libm::sqrt(p * p + q * q + r * r);
                let s = if p >= 0.0 { s } else { -s };
                if s == 0.0 {
                    continue;
                }
                if k == mm {
                    if l != mm {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pj = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nu - 1 {
                        pj += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pj * z;
                    }
                    a[(k + 1, j)] -= pj * y;
                    a[(k, j)] -= pj * x;
                }
                for i in l..=nu.min(k + 3) {
                    let mut pi = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nu - 1 {
                        pi += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pi * r;
                    }
                    a[(i, k + 1)] -= pi * q;
                    a[(i, k)] -= pi;
                }
            }
        }
    }
    Some(wr.into_iter().zip(wi).map(|(re, im)| Complex::new(re, im)).collect())
}

/// Diagonal similarity with power-of-two factors equalizing row and column norms.
fn balance(m: &Mat) -> Mat {
    let n = m.nrows();
    let mut a = m.clone();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc > rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * (c + r) {
                done = false;
                a.row_mut(i).scale_mut(1.0 / f);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
    a
}

pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Solves `X = A X B + C` by Smith doubling; requires `ρ(A)ρ(B) < 1`.
pub fn stein(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        bail!(DimensionMismatch, "stein equation operands");
    }
    if c.is_empty() {
        return Ok(c.clone());
    }
    let mut x = c.clone();
    let mut ak = a.clone();
    let mut bk = b.clone();
    for _ in 0..80 {
        let step = &ak * &x * &bk;
        x += &step;
        if !all_finite(&x) {
            break;
        }
        if step.norm() <= 1e-17 * (1.0 + x.norm()) {
            return Ok(x);
        }
        ak = &ak * &ak;
        bk = &bk * &bk;
    }
    Err(Error::Convergence { iterations: 80, residual: f64::NAN })
}

/// Observability gramian `Σ (Aᵀ)^k CᵀC A^k`.
pub fn obs_gramian(a: &Mat, c: &Mat) -> Result<Mat> {
    stein(&a.transpose(), a, &(c.transpose() * c)).map(|x| symmetrize(&x))
}

/// Controllability gramian `Σ A^k BBᵀ (Aᵀ)^k`.
pub fn ctrb_gramian(a: &Mat, b: &Mat) -> Result<Mat> {
    stein(a, &a.transpose(), &(b * b.transpose())).map(|x| symmetrize(&x))
}

/// Certified bound `‖A^k‖₂ ≤ c·ρ^k` derived from the Lyapunov solution of
/// `AᵀXA − X = −I`: with `X ≥ I`, `‖A^k v‖² ≤ κ(X)(1 − 1/λmax(X))^k ‖v‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub c: f64,
    pub rho: f64,
}

impl DecayBound {
    pub fn of(a: &Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(DecayBound { c: 0.0, rho: 0.0 });
        }
        let x = stein(&a.transpose(), a, &eye(n)).map_err(|_| {
            Error::InvalidArgument(alloc::string::String::from("decay bound requested for a non-Schur matrix"))
        })?;
        let (vals, _) = sym_eig(&x);
        let lmin = vals[0];
        let lmax = vals[n - 1];
        if !(lmin > 0.0) || !lmax.is_finite() {
            bail!(InvalidArgument, "decay bound requested for a non-Schur matrix");
        }
        let rho2 = (1.0 - 1.0 / lmax).max(0.0);
        Ok(DecayBound { c: libm::sqrt(lmax / lmin), rho: libm::sqrt(rho2) })
    }

    /// Bound on `Σ_{j≥k} ‖A^j v‖²` given `‖v‖`.
    pub fn tail_energy(&self, norm_v: f64, k: usize) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        let r2 = self.rho * self.rho;
        self.c * self.c * norm_v * norm_v * libm::pow(r2, k as f64) / (1.0 - r2)
    }
}

pub fn frob_dev_from_identity(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..m.ncols() {
            let t = if i == j { m[(i, j)] - Complex::new(1.0, 0.0) } else { m[(i, j)] };
            s += t.norm_sqr();
        }
    }
    libm::sqrt(s)
}

/// Deterministic angles in `[0, 2π)` from the golden-ratio sequence, used where
/// "random" probe angles are needed without an RNG.
pub fn probe_angles(count: usize) -> Vec<f64> {
    let phi = 0.618_033_988_749_894_9;
    (0..count)
        .map(|i| {
            let f = (0.3 + phi * (i as f64 + 1.0)) % 1.0;
            2.0 * core::f64::consts::PI * f
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn hqr_agrees_with_schur() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 3, 5, 9, 17] {
            let m = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let want = sorted(eigenvalues(&m).unwrap());
            let got = sorted(hqr(balance(&m)).unwrap());
            for (a, b) in want.iter().zip(&got) {
                assert!((a - b).norm() < 1e-9, "{n}: {a} vs {b}");
            }
        }
        // Cyclic shift: all eigenvalues on the unit circle, a stall case for unshifted QR.
        let n = 8;
        let c = Mat::from_fn(n, n, |i, j| if (i + 1) % n == j { 1.0 } else { 0.0 });
        let ev = hqr(c).unwrap();
        assert!(ev.iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
        let sum: Complex<f64> = ev.iter().sum();
        assert!(sum.norm() < 1e-9);
    }

    #[test]
    fn stein_matches_series() {
        let a = Mat::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]);
        let c = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let x = stein(&a.transpose(), &a, &c).unwrap();
        let mut s = Mat::zeros(2, 2);
        let mut p = eye(2);
        for _ in 0..200 {
            s += p.transpose() * &c * &p;
            p = &p * &a;
        }
        assert!((x - s).norm() < 1e-12);
    }

    #[test]
    fn decay_bound_dominates_powers() {
        let a = Mat::from_row_slice(2, 2, &[0.9, 5.0, 0.0, 0.8]);
        let db = DecayBound::of(&a).unwrap();
        let mut p = eye(2);
        for k in 0..300 {
            assert!(spectral_norm(&p) <= db.c * libm::pow(db.rho, k as f64) * (1.0 + 1e-9));
            p = &p * &a;
        }
    }

    #[test]
    fn inverse_square_root() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_inv_sqrt(&m, EIG_FLOOR).unwrap();
        assert!((&r * &m * &r - eye(2)).norm() < 1e-13);
        let s = sym_sqrt(&m).unwrap();
        assert!((&s * &s - &m).norm() < 1e-13);
    }

    #[test]
    fn blocks() {
        let a = Mat::from_element(1, 2, 1.0);
        let b = Mat::from_element(1, 1, 2.0);
        let h = hstack(&[&a, &b]);
        assert_eq!(h.ncols(), 3);
        let d = block_diag(&[&a, &b]);
        assert_eq!((d.nrows(), d.ncols()), (2, 3));
        assert_eq!(d[(1, 2)], 2.0);
        let v = vstack(&[&a, &zeros(2, 2)]);
        assert_eq!(v.nrows(), 3);
    }
}
