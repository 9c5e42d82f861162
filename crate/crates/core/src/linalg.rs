//! Small fixed-size and dense linear algebra.
//!
//! `Mat3` is row-major: `m[r][c]`. Dense matrices are only used for the
//! normal equations of the least-squares solvers and for the null-space
//! problems of homography and conic estimation, all of which stay below a
//! few hundred unknowns.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// 3-vector. Doubles as a 3D point in camera coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Self {
        self.scale(T::one() / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Skew-symmetric cross-product matrix `[v]x`.
    pub fn skew(self) -> Mat3<T> {
        let o = T::zero();
        Mat3::from_rows([[o, -self.z, self.y], [self.z, o, -self.x], [-self.y, self.x, o]])
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.z.as_f64()))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Default for Mat3<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Mat3<T> {
    pub const fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    /// Builds from nine values in row-major order.
    pub fn from_row_slice(v: &[T]) -> Self {
        assert_eq!(v.len(), 9, "Mat3 needs 9 entries");
        Self::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn from_cols(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn zeros() -> Self {
        Self::from_rows([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let (o, l) = (T::zero(), T::one());
        Self::from_rows([[l, o, o], [o, l, o], [o, o, l]])
    }

    pub fn row_major(&self) -> [T; 9] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn col(&self, c: usize) -> Vec3<T> {
        Vec3::new(self.m[0][c], self.m[1][c], self.m[2][c])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self::from_rows([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn try_inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.m;
        let inv = Self::from_rows([
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ]);
        Some(inv.scale(T::one() / d))
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.m.iter().flatten().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// `RᵀR = I` and `det R = +1`, both within `tol`.
    pub fn is_rotation(&self, tol: T) -> bool {
        if !self.is_finite() {
            return false;
        }
        let rtr = self.transpose() * *self;
        let dev = (rtr - Self::identity()).frobenius_norm();
        dev <= tol && (self.det() - T::one()).abs() <= tol
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut out = Mat3::<U>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = U::lit(self.m[r][c].as_f64());
            }
        }
        out
    }
}

impl<T: Real> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.m[r][c]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.m[r][c]
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] = self.m[r][0] * o.m[0][c] + self.m[r][1] * o.m[1][c] + self.m[r][2] * o.m[2][c];
            }
        }
        out
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] += o.m[r][c];
            }
        }
        out
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] -= o.m[r][c];
            }
        }
        out
    }
}

/// Rotation matrix from an axis-angle vector (Rodrigues).
pub fn so3_exp<T: Real>(w: Vec3<T>) -> Mat3<T> {
    let theta2 = w.dot(w);
    let k = w.skew();
    let k2 = k * k;
    let (a, b) = if theta2 < T::lit(1e-16) {
        // Taylor terms of sin(t)/t and (1-cos t)/t^2
        (T::one() - theta2 / T::lit(6.0), T::lit(0.5) - theta2 / T::lit(24.0))
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    Mat3::identity() + k.scale(a) + k2.scale(b)
}

/// Unit quaternion `(w, x, y, z)` of a rotation matrix (Shepperd's method).
pub fn rotation_to_quaternion<T: Real>(r: &Mat3<T>) -> [T; 4] {
    let m = &r.m;
    let one = T::one();
    let quarter = T::lit(0.25);
    let tr = r.trace();
    let q = if tr > m[0][0] && tr > m[1][1] && tr > m[2][2] {
        let s = (one + tr).sqrt() * T::lit(2.0);
        [quarter * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
        [(m[2][1] - m[1][2]) / s, quarter * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s]
    } else if m[1][1] > m[2][2] {
        let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
        [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, quarter * s, (m[1][2] + m[2][1]) / s]
    } else {
        let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
        [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, quarter * s]
    };
    let n = q.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let sign = if q[0] < T::zero() { -one } else { one };
    q.map(|v| sign * v / n)
}

pub fn quaternion_to_rotation<T: Real>(q: [T; 4]) -> Mat3<T> {
    let n = q.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    let two = T::lit(2.0);
    let one = T::one();
    Mat3::from_rows([
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ])
}

/// Axis-angle vector of a rotation matrix; angle in `[0, pi]`.
pub fn so3_log<T: Real>(r: &Mat3<T>) -> Vec3<T> {
    let [w, x, y, z] = rotation_to_quaternion(r);
    let v = Vec3::new(x, y, z);
    let s = v.norm();
    if s < T::lit(1e-300_f64.max(T::min_positive_value().as_f64())) {
        return Vec3::zeros();
    }
    let angle = T::lit(2.0) * s.atan2(w);
    v.scale(angle / s)
}

/// Angle of the relative rotation `Aᵀ B` in radians.
pub fn rotation_angle_between<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> T {
    so3_log(&(a.transpose() * *b)).norm()
}

/// Rotation `R` maximizing `tr(Rᵀ M)`, i.e. the closest rotation to `M` in
/// the Frobenius sense, via the dominant eigenvector of the 4x4 quaternion
/// form of `M`. Always returns a proper rotation (`det = +1`).
pub fn nearest_rotation<T: Real>(mat: &Mat3<T>) -> Mat3<T> {
    // S = Mᵀ, so that sum_ij R_ij M_ij = tr(R S)
    let s = mat.transpose().m;
    let (sxx, sxy, sxz) = (s[0][0], s[0][1], s[0][2]);
    let (syx, syy, syz) = (s[1][0], s[1][1], s[1][2]);
    let (szx, szy, szz) = (s[2][0], s[2][1], s[2][2]);
    let mut n = DMat::zeros(4, 4);
    let entries = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    for (r, row) in entries.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            n[(r, c)] = v;
        }
    }
    let eig = symmetric_eigen(&n);
    let q = eig.vector(3);
    quaternion_to_rotation([q[0], q[1], q[2], q[3]])
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// `AᵀA` for a matrix given as a list of rows.
    pub fn gram_from_rows(rows: &[Vec<T>], cols: usize) -> Self {
        let mut g = Self::zeros(cols, cols);
        for row in rows {
            debug_assert_eq!(row.len(), cols);
            for i in 0..cols {
                let ri = row[i];
                if ri == T::zero() {
                    continue;
                }
                for j in i..cols {
                    g[(i, j)] += ri * row[j];
                }
            }
        }
        g.symmetrize_upper();
        g
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize_upper(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                self[(i, j)] = self[(j, i)];
            }
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        debug_assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        for (a, &b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }
}

impl<T> Index<(usize, usize)> for DMat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DMat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky
/// factorization. Returns `None` when `A` is not numerically SPD.
pub fn cholesky_solve<T: Real>(a: &DMat<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    let mut l = DMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns.
    pub vectors: DMat<T>,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        (0..self.vectors.rows).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic Jacobi eigenvalue algorithm. Accurate to working precision for the
/// small (n <= 9) symmetric systems used here.
pub fn symmetric_eigen<T: Real>(a: &DMat<T>) -> SymmetricEigen<T> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    let mut m = a.clone();
    let mut v = DMat::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = T::one();
    }
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let s = m[(i, j)] * m[(i, j)];
                total += s;
                if i != j {
                    off += s;
                }
            }
        }
        if off <= total * T::epsilon() * T::epsilon() || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    SymmetricEigen { values, vectors }
}
