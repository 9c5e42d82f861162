use super::CalibrationError;
use crate::geometry::{CameraIntrinsics, DistortionModel, LensModel, Resolution};
use crate::linalg::{symmetric_eigen, DMat, Mat3};
use crate::scalar::Real;

fn v_ij<T: Real>(h: &Mat3<T>, i: usize, j: usize) -> [T; 6] {
    let (a, b) = (h.col(i), h.col(j));
    [a.x * b.x, a.x * b.y + a.y * b.x, a.y * b.y, a.z * b.x + a.x * b.z, a.z * b.y + a.y * b.z, a.z * b.z]
}

/// Zero-skew, distortion-free intrinsics from three or more plane-to-image
/// homographies, via the image of the absolute conic `B = K⁻ᵀK⁻¹`.
pub fn zhang_init<T: Real>(
    homographies: &[Mat3<T>],
    resolution: Resolution,
) -> Result<CameraIntrinsics<T>, CalibrationError> {
    if homographies.len() < 3 {
        return Err(CalibrationError::IllConditioned(format!("{} views, at least 3 required", homographies.len())));
    }
    // Pixel normalization keeps the conic equations well scaled.
    let s = T::from_usize_lossy(resolution.width + resolution.height) / T::lit(2.0);
    let (c0x, c0y) =
        (T::from_usize_lossy(resolution.width) / T::lit(2.0), T::from_usize_lossy(resolution.height) / T::lit(2.0));
    let (o, one) = (T::zero(), T::one());
    let n = Mat3::from_rows([[one / s, o, -c0x / s], [o, one / s, -c0y / s], [o, o, one]]);

    let mut rows = Vec::with_capacity(2 * homographies.len() + 1);
    for h in homographies {
        let hn = n * *h;
        let norm = hn.frobenius_norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(CalibrationError::DegenerateConfiguration("invalid homography".into()));
        }
        let hn = hn.scale(one / norm);
        let v12 = v_ij(&hn, 0, 1);
        let (v11, v22) = (v_ij(&hn, 0, 0), v_ij(&hn, 1, 1));
        rows.push(v12.to_vec());
        rows.push((0..6).map(|k| v11[k] - v22[k]).collect());
    }
    rows.push(vec![o, one, o, o, o, o]);

    let gram = DMat::gram_from_rows(&rows, 6);
    let eig = symmetric_eigen(&gram);
    if eig.values[1] <= eig.values[5] * T::lit(1e-10) {
        return Err(CalibrationError::IllConditioned("board orientations do not constrain the camera matrix".into()));
    }
    let mut b = eig.vector(0);
    if b[0] < T::zero() {
        b.iter_mut().for_each(|v| *v = -*v);
    }
    let [b11, b12, b22, b13, b23, b33] = [b[0], b[1], b[2], b[3], b[4], b[5]];
    let den = b11 * b22 - b12 * b12;
    let ill = || CalibrationError::IllConditioned("recovered conic is not positive definite".into());
    if !(b11 > T::zero() && den > T::zero()) {
        return Err(ill());
    }
    let v0 = (b12 * b13 - b11 * b23) / den;
    let lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    if !(lambda / b11 > T::zero()) {
        return Err(ill());
    }
    let alpha = (lambda / b11).sqrt();
    let beta = (lambda * b11 / den).sqrt();
    let gamma = -b12 * alpha * alpha * beta / lambda;
    let u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;
    let kn = Mat3::from_rows([[alpha, o, u0], [o, beta, v0], [o, o, one]]);
    let n_inv = n.try_inverse().ok_or_else(ill)?;
    let k = n_inv * kn;
    CameraIntrinsics::from_matrix(&k, DistortionModel::none(LensModel::PlumbBob), resolution)
        .map_err(|e| CalibrationError::IllConditioned(format!("closed-form camera matrix is invalid: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{so3_exp, Vec3};

    fn homography(k: &Mat3<f64>, w: Vec3<f64>, t: Vec3<f64>) -> Mat3<f64> {
        let r = so3_exp(w);
        *k * Mat3::from_cols(r.col(0), r.col(1), t)
    }

    #[test]
    fn recovers_exact_camera_matrix() {
        let k = Mat3::from_row_slice(&[750.0, 0.0, 645.0, 0.0, 742.0, 355.0, 0.0, 0.0, 1.0]);
        let hs: Vec<_> = [
            (Vec3::new(0.3, 0.1, 0.0), Vec3::new(-0.1, -0.1, 1.0)),
            (Vec3::new(-0.2, 0.35, 0.1), Vec3::new(-0.2, 0.0, 1.2)),
            (Vec3::new(0.1, -0.3, -0.2), Vec3::new(0.0, -0.15, 0.9)),
            (Vec3::new(-0.35, -0.2, 0.3), Vec3::new(-0.1, 0.05, 1.1)),
        ]
        .iter()
        .map(|(w, t)| homography(&k, *w, *t))
        .collect();
        let est = zhang_init(&hs, Resolution::new(1280, 720)).unwrap();
        for (e, t) in [(est.fx(), 750.0), (est.fy(), 742.0), (est.cx(), 645.0), (est.cy(), 355.0)] {
            assert!((e - t).abs() < 1e-6 * t, "{e} vs {t}");
        }
        assert!(est.distortion().is_zero());
    }

    #[test]
    fn too_few_or_parallel_views_are_ill_conditioned() {
        let k = Mat3::from_row_slice(&[500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0]);
        let h = homography(&k, Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
        let res = Resolution::new(640, 480);
        assert!(matches!(zhang_init(&[h, h], res), Err(CalibrationError::IllConditioned(_))));
        // fronto-parallel boards at different distances carry no new information
        let hs: Vec<_> = (0..4)
            .map(|i| homography(&k, Vec3::new(0.0, 0.0, 0.1 * i as f64), Vec3::new(0.0, 0.0, 1.0 + i as f64)))
            .collect();
        assert!(matches!(zhang_init(&hs, res), Err(CalibrationError::IllConditioned(_))));
    }
}
