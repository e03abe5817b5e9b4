//! Small dense real matrices with just enough linear algebra for the
//! stability analysis: LU inversion with a condition guard, Kronecker
//! products, and eigenvalues via Householder-Hessenberg reduction followed
//! by the shifted double QR iteration (eigenvalues only, no vectors).
//!
//! Everything here targets matrices of order <= 256 (4*d^2 with d <= 8), so
//! the implementations favour simplicity and robustness over blocking.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::DimensionMismatch {
                context: "empty matrix".into(),
            });
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                context: "ragged or empty rows".into(),
            });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(self.cols, x.len());
        assert_eq!(self.rows, out.len());
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            *o = s;
        }
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Mat) -> Mat {
        let (p, q) = (self.rows, self.cols);
        let (r, s) = (other.rows, other.cols);
        let mut out = Mat::zeros(p * r, q * s);
        for i in 0..p {
            for j in 0..q {
                let aij = self[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                for k in 0..r {
                    for l in 0..s {
                        out[(i * r + k, j * s + l)] = aij * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Copies `block` into `self` with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &Mat) {
        assert!(row + block.rows <= self.rows && col + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(row + i, col + j)] = block[(i, j)];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .map(|v| v.abs())
                    .sum()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU-factorizes `a` with partial pivoting and returns its inverse together
/// with the infinity-norm condition estimate `||A|| * ||A^-1||`.
pub fn lu_inverse(a: &Mat) -> Result<(Mat, f64)> {
    assert!(a.is_square());
    let n = a.n_rows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut max = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > max {
                max = v;
                p = i;
            }
        }
        if max == 0.0 {
            return Err(Error::SingularResolvent {
                cond: f64::INFINITY,
            });
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            piv.swap(k, p);
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            for j in k + 1..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
        }
    }

    // Solve A X = I column by column.
    let mut inv = Mat::zeros(n, n);
    let mut col = vec![0.0; n];
    for c in 0..n {
        for i in 0..n {
            col[i] = if piv[i] == c { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            for j in 0..i {
                col[i] -= lu[(i, j)] * col[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                col[i] -= lu[(i, j)] * col[j];
            }
            col[i] /= lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, c)] = col[i];
        }
    }

    let cond = a.inf_norm() * inv.inf_norm();
    Ok((inv, cond))
}

fn sign_of(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut Mat) {
    let n = h.n_rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    // Entries below the subdiagonal are Householder leftovers.
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
}

/// Eigenvalues of a real square matrix via Hessenberg reduction and the
/// implicit double-shift QR iteration (EISPACK `hqr` lineage).
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.n_rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    hqr_eigenvalues(&mut h)
}

fn hqr_eigenvalues(a: &mut Mat) -> Result<Vec<Complex64>> {
    const MAX_ITS: usize = 40;
    let n = a.n_rows() as isize;
    let eps = f64::EPSILON;
    let mut wri = vec![Complex64::new(0.0, 0.0); n as usize];
    let idx = |i: isize, j: isize| (i as usize, j as usize);

    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(wri);
    }

    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nn, nn)];
            if l == nn {
                wri[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[idx(nn - 1, nn - 1)];
            let mut w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + sign_of(z, p);
                    wri[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                    wri[nn as usize] = if z != 0.0 {
                        Complex64::new(x - w / z, 0.0)
                    } else {
                        Complex64::new(x + z, 0.0)
                    };
                } else {
                    wri[nn as usize] = Complex64::new(x + p, -z);
                    wri[(nn - 1) as usize] = Complex64::new(x + p, z);
                }
                nn -= 2;
                break;
            }

            if its == MAX_ITS {
                return Err(Error::NoConvergence {
                    iterations: MAX_ITS,
                });
            }
            if its == 10 || its == 20 || its == 30 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn {
                    a[idx(i, i)] -= x;
                }
                let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            let mut p = 0.0;
            let mut q = 0.0;
            let mut r = 0.0;
            while m >= l {
                let z = a[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                q = a[idx(m + 1, m + 1)] - z - rr - ss;
                r = a[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v =
                    p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nn - 1 {
                a[idx(i + 2, i)] = 0.0;
                if i != m {
                    a[idx(i + 2, i - 1)] = 0.0;
                }
            }

            // Double QR step on rows l..=nn and columns m..=nn.
            for k in m..nn {
                if k != m {
                    p = a[idx(k, k - 1)];
                    q = a[idx(k + 1, k - 1)];
                    r = if k + 1 != nn {
                        a[idx(k + 2, k - 1)]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                    }
                } else {
                    a[idx(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                    if k + 1 != nn {
                        pp += r * a[idx(k + 2, j)];
                        a[idx(k + 2, j)] -= pp * z;
                    }
                    a[idx(k + 1, j)] -= pp * y;
                    a[idx(k, j)] -= pp * x;
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                    if k + 1 != nn {
                        pp += z * a[idx(i, k + 2)];
                        a[idx(i, k + 2)] -= pp * r;
                    }
                    a[idx(i, k + 1)] -= pp * q;
                    a[idx(i, k)] -= pp;
                }
            }
        }
    }
    Ok(wri)
}

/// Upper bound sequence `||M^(2^k)||_F^(1/2^k)` driven to convergence by
/// repeated squaring with norm scaling. Converges to the spectral radius
/// from above; used as an eigensolver-independent cross-check.
pub fn gelfand_radius(m: &Mat) -> f64 {
    assert!(m.is_square());
    const SQUARINGS: usize = 48;
    let s = m.frobenius_norm();
    if s == 0.0 || !s.is_finite() {
        return if s == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let mut b = m.scaled(1.0 / s);
    let mut log_norm = s.ln();
    let mut pow = 1u64;
    for _ in 0..SQUARINGS {
        let c = b.matmul(&b);
        let s = c.frobenius_norm();
        pow *= 2;
        if s == 0.0 {
            return 0.0;
        }
        b = c.scaled(1.0 / s);
        log_norm = 2.0 * log_norm + s.ln();
    }
    (log_norm / pow as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectral_radius(m: &Mat) -> f64 {
        eigenvalues(m)
            .unwrap()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(spectral_radius(&Mat::identity(4)), 1.0);
        let mut d = Mat::zeros(4, 4);
        for (i, v) in [0.5, -0.25, 0.1, 0.0].iter().enumerate() {
            d[(i, i)] = *v;
        }
        assert!((spectral_radius(&d) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn companion_matrix_roots() {
        // z^4 - z^3: roots 0,0,0,1
        let c = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!((spectral_radius(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_spectrum_via_similarity() {
        // T D T^-1 with Householder-orthogonal T keeps the spectrum exact.
        let n = 16;
        let planted: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64) - 0.8).collect();
        let mut d = Mat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = planted[i];
        }
        // orthogonal similarity from a Householder reflector
        let mut v = vec![0.0; n];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = ((i * 7919 + 13) % 101) as f64 / 101.0 - 0.5;
        }
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        let mut q = Mat::identity(n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] -= 2.0 * v[i] * v[j];
            }
        }
        let a = q.matmul(&d).matmul(&q); // Q is symmetric involutive
        let expect = planted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((spectral_radius(&a) - expect).abs() < 1e-8 * expect);
        assert!((gelfand_radius(&a) - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn complex_pair_eigenvalues() {
        // rotation by angle with modulus 0.9
        let (c, s) = (0.9 * 0.6f64.cos(), 0.9 * 0.6f64.sin());
        let a = Mat::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let eig = eigenvalues(&a).unwrap();
        assert_eq!(eig.len(), 2);
        for z in eig {
            assert!((z.norm() - 0.9).abs() < 1e-12);
            assert!(z.im.abs() > 0.1);
        }
    }

    #[test]
    fn lu_inverse_roundtrip() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![-2.0, 5.0, 1.5],
            vec![0.5, 0.0, 3.0],
        ])
        .unwrap();
        let (inv, cond) = lu_inverse(&a).unwrap();
        let prod = a.matmul(&inv);
        assert!(prod.max_abs_diff(&Mat::identity(3)) < 1e-13);
        assert!(cond > 1.0 && cond < 1e3);
    }

    #[test]
    fn lu_singular_detected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_inverse(&a),
            Err(Error::SingularResolvent { .. })
        ));
    }

    #[test]
    fn kron_mixed_product_property() {
        // (A (x) D)(B (x) I) == (A B) (x) D
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.25]]).unwrap();
        let b = Mat::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.7]]).unwrap();
        let d = Mat::from_rows(&[vec![0.1, 0.9], vec![-0.4, 1.1]]).unwrap();
        let lhs = a.kron(&d).matmul(&b.kron(&Mat::identity(2)));
        let rhs = a.matmul(&b).kron(&d);
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }
}
