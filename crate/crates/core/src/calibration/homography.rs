use super::CalibrationError;
use crate::geometry::PixelCoord;
use crate::linalg::{symmetric_eigen, DMat, Mat3, Vec3};
use crate::scalar::Real;

/// Similarity that moves the centroid to the origin and scales the mean
/// distance to sqrt(2). Fails on coincident or collinear points.
fn hartley_normalization<T: Real>(pts: &[[T; 2]]) -> Result<Mat3<T>, CalibrationError> {
    let n = T::from_usize_lossy(pts.len());
    let (mut mx, mut my) = (T::zero(), T::zero());
    for p in pts {
        mx += p[0];
        my += p[1];
    }
    mx /= n;
    my /= n;
    let mut mean_dist = T::zero();
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        mean_dist += dx.hypot(dy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    mean_dist /= n;
    if !(mean_dist > T::zero()) || !mean_dist.is_finite() {
        return Err(CalibrationError::DegenerateConfiguration("coincident points".into()));
    }
    // smaller/larger eigenvalue of the 2x2 scatter matrix
    let tr = sxx + syy;
    let disc = ((sxx - syy) * (sxx - syy) + T::lit(4.0) * sxy * sxy).sqrt();
    let (lo, hi) = ((tr - disc) / T::lit(2.0), (tr + disc) / T::lit(2.0));
    if lo <= hi * T::tol(1e-12, 1e4) {
        return Err(CalibrationError::DegenerateConfiguration("collinear points".into()));
    }
    let s = T::SQRT_2() / mean_dist;
    Ok(Mat3::from_rows([[s, T::zero(), -s * mx], [T::zero(), s, -s * my], [T::zero(), T::zero(), T::one()]]))
}

fn apply<T: Real>(h: &Mat3<T>, p: [T; 2]) -> [T; 2] {
    let q = *h * Vec3::new(p[0], p[1], T::one());
    [q.x / q.z, q.y / q.z]
}

/// Plane-to-image homography by the normalized DLT: `img ~ H * (x, y, 1)`.
/// Scaled so that `H[2][2] = 1` whenever that entry is nonzero.
pub fn estimate_homography<T: Real>(
    board_pts: &[[T; 2]],
    img_pts: &[PixelCoord<T>],
) -> Result<Mat3<T>, CalibrationError> {
    if board_pts.len() != img_pts.len() {
        return Err(CalibrationError::DegenerateConfiguration(format!(
            "{} board points vs {} image points",
            board_pts.len(),
            img_pts.len()
        )));
    }
    if board_pts.len() < 4 {
        return Err(CalibrationError::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {}",
            board_pts.len()
        )));
    }
    let img: Vec<[T; 2]> = img_pts.iter().map(|p| [p.u, p.v]).collect();
    let tb = hartley_normalization(board_pts)?;
    let ti = hartley_normalization(&img)?;

    let o = T::zero();
    let mut rows = Vec::with_capacity(2 * img.len());
    for (b, i) in board_pts.iter().zip(&img) {
        let [x, y] = apply(&tb, *b);
        let [u, v] = apply(&ti, *i);
        rows.push(vec![-x, -y, -T::one(), o, o, o, u * x, u * y, u]);
        rows.push(vec![o, o, o, -x, -y, -T::one(), v * x, v * y, v]);
    }
    let gram = DMat::gram_from_rows(&rows, 9);
    let eig = symmetric_eigen(&gram);
    if eig.values[1] <= eig.values[8] * T::tol(1e-14, 1e3) {
        return Err(CalibrationError::DegenerateConfiguration("homography null space is not one-dimensional".into()));
    }
    let hn = Mat3::from_row_slice(&eig.vector(0));
    let ti_inv =
        ti.try_inverse().ok_or_else(|| CalibrationError::DegenerateConfiguration("singular normalization".into()))?;
    let h = ti_inv * hn * tb;
    let h22 = h.m[2][2];
    let scale = if h22.abs() > h.frobenius_norm() * T::tol(1e-12, 16.0) {
        T::one() / h22
    } else {
        T::one() / h.frobenius_norm()
    };
    Ok(h.scale(scale))
}

/// RMS of forward and backward transfer distances, each measured in its own
/// plane's units.
pub fn symmetric_transfer_error<T: Real>(h: &Mat3<T>, board_pts: &[[T; 2]], img_pts: &[PixelCoord<T>]) -> Option<T> {
    let inv = h.try_inverse()?;
    let mut acc = T::zero();
    for (b, i) in board_pts.iter().zip(img_pts) {
        let f = apply(h, *b);
        let r = apply(&inv, [i.u, i.v]);
        acc += (f[0] - i.u).powi(2) + (f[1] - i.v).powi(2);
        acc += (r[0] - b[0]).powi(2) + (r[1] - b[1]).powi(2);
    }
    Some((acc / T::from_usize_lossy(2 * board_pts.len())).sqrt())
}
