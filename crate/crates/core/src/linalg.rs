//! Small dense linear algebra.
//!
//! Every matrix in this crate is tiny on at least one side: final-stage
//! designs are N×(q+1) with q ≤ a handful, and all square matrices are
//! (q+1)×(q+1). Hand-rolled Householder QR, Cholesky, and Jacobi
//! eigenvalues cover everything without a BLAS/LAPACK dependency.

/// Dense row-major matrix of `f64`.
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

    /// Build from a slice of rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Mat {
            rows: nrows,
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), v))
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Gram matrix AᵀA.
    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                for j in i..self.cols {
                    g[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Force exact symmetry by averaging with the transpose.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic form aᵀ M a for square M.
pub fn quad_form(m: &Mat, a: &[f64]) -> f64 {
    dot(a, &m.matvec(a))
}

/// Least squares solution of min ‖y − A θ‖² via Householder QR.
///
/// Assumes A has full column rank (callers gate on [`singular_values`]).
pub fn least_squares_qr(a: &Mat, y: &[f64]) -> Vec<f64> {
    let (n, k) = (a.nrows(), a.ncols());
    assert_eq!(y.len(), n);
    assert!(n >= k, "least squares needs at least as many rows as columns");
    let mut r = a.clone();
    let mut qty = y.to_vec();

    // Householder triangularization, applying each reflector to y as well.
    for col in 0..k {
        let mut norm = 0.0;
        for i in col..n {
            norm += r[(i, col)] * r[(i, col)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(col, col)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - col];
        v[0] = r[(col, col)] - alpha;
        for i in (col + 1)..n {
            v[i - col] = r[(i, col)];
        }
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            continue;
        }
        r[(col, col)] = alpha;
        for i in (col + 1)..n {
            r[(i, col)] = 0.0;
        }
        for j in (col + 1)..k {
            let mut s = 0.0;
            for i in col..n {
                s += v[i - col] * r[(i, j)];
            }
            let f = 2.0 * s / vtv;
            for i in col..n {
                r[(i, j)] -= f * v[i - col];
            }
        }
        let mut s = 0.0;
        for i in col..n {
            s += v[i - col] * qty[i];
        }
        let f = 2.0 * s / vtv;
        for i in col..n {
            qty[i] -= f * v[i - col];
        }
    }

    // Back substitution on the k×k upper triangle.
    let mut theta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in (i + 1)..k {
            s -= r[(i, j)] * theta[j];
        }
        theta[i] = s / r[(i, i)];
    }
    theta
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations,
/// returned in descending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let mut a = m.clone();
    let scale: f64 = a.data.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Singular values of A (descending), via the eigenvalues of AᵀA.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    sym_eigenvalues(&a.gram())
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix, or `None` when the matrix is not (numerically) PD.
pub fn cholesky(m: &Mat) -> Option<Mat> {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut l = Mat::zeros(n, n);
    let tol = 1e-14 * m.trace().abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve M x = b given the Cholesky factor L of M.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &Mat) -> Mat {
    let n = l.nrows();
    let mut inv = Mat::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = cholesky_solve(l, &e);
        for row in 0..n {
            inv[(row, col)] = x[row];
        }
    }
    inv.symmetrize();
    inv
}
