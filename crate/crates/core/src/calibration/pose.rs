use super::jacobian::corner_jacobian;
use super::lm::{
    assemble, levenberg_marquardt, pixel_cost_floor, LeastSquares, LmSettings, LocalSystem, NormalEquations,
};
use super::{estimate_homography, BoardSpec, CalibrationError, Pose, ViewObservation};
use crate::geometry::{CameraIntrinsics, PixelCoord, Point3};
use crate::linalg::{nearest_rotation, so3_exp, Mat3, Vec3};
use crate::scalar::Real;

/// Board pose from a homography in normalized camera coordinates
/// (`H ~ [r1 r2 t]`).
pub(crate) fn pose_from_homography<T: Real>(h: &Mat3<T>) -> Result<Pose<T>, CalibrationError> {
    let (h1, h2, h3) = (h.col(0), h.col(1), h.col(2));
    let denom = h1.norm() + h2.norm();
    if !(denom > T::zero()) || !denom.is_finite() {
        return Err(CalibrationError::DegenerateConfiguration("homography has no rotation part".into()));
    }
    let mut scale = T::lit(2.0) / denom;
    if h3.z < T::zero() {
        scale = -scale;
    }
    let (r1, r2) = (h1.scale(scale), h2.scale(scale));
    let rotation = nearest_rotation(&Mat3::from_cols(r1, r2, r1.cross(r2)));
    let translation = h3.scale(scale);
    if !(translation.z > T::zero()) {
        return Err(CalibrationError::BehindCamera);
    }
    Ok(Pose::new(rotation, translation))
}

/// Left-perturbation pose update shared by every solver.
pub(crate) fn perturb<T: Real>(pose: &Pose<T>, d: &[T]) -> Pose<T> {
    Pose::new(so3_exp(Vec3::new(d[0], d[1], d[2])) * pose.rotation, pose.translation + Vec3::new(d[3], d[4], d[5]))
}

/// Sum of squared reprojection residuals of one view; infinite if any
/// corner cannot be projected.
pub(crate) fn view_cost<T: Real>(
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    object: &[Point3<T>],
    corners: &[PixelCoord<T>],
) -> T {
    let mut cost = T::zero();
    for (x, c) in object.iter().zip(corners) {
        let p = pose.transform(*x);
        if !(p.z > T::zero()) {
            return T::infinity();
        }
        match intr.project(p) {
            Ok(q) => cost += (q.u - c.u).powi(2) + (q.v - c.v).powi(2),
            Err(_) => return T::infinity(),
        }
    }
    cost
}

struct PoseProblem<'a, T> {
    intr: &'a CameraIntrinsics<T>,
    object: &'a [Point3<T>],
    corners: &'a [PixelCoord<T>],
    pose: Pose<T>,
}

impl<T: Real> LeastSquares<T> for PoseProblem<'_, T> {
    fn linearize(&self) -> NormalEquations<T> {
        let mut local = LocalSystem::new(0);
        for (x, c) in self.object.iter().zip(self.corners) {
            match corner_jacobian(self.intr, &self.pose, *x) {
                Ok(j) => local.add(&j.d_pose, [j.pixel.u - c.u, j.pixel.v - c.v]),
                Err(_) => {
                    let mut ne = assemble(0, vec![LocalSystem::new(0)]);
                    ne.cost = T::infinity();
                    return ne;
                }
            }
        }
        assemble(0, vec![local])
    }

    fn cost(&self) -> T {
        view_cost(self.intr, &self.pose, self.object, self.corners)
    }

    fn cost_floor(&self) -> T {
        pixel_cost_floor(self.corners)
    }

    fn step(&self, delta: &[T]) -> Self {
        PoseProblem { pose: perturb(&self.pose, delta), ..*self }
    }
}

/// Board-to-camera pose of one view for known intrinsics: homography on
/// undistorted normalized corners, then reprojection-error refinement.
pub fn estimate_board_pose<T: Real>(
    board: &BoardSpec<T>,
    view: &ViewObservation<T>,
    intr: &CameraIntrinsics<T>,
) -> Result<Pose<T>, CalibrationError> {
    view.validate(board)?;
    let normalized = view
        .corners
        .iter()
        .map(|c| intr.unproject(*c).map(|r| PixelCoord::new(r.x, r.y)))
        .collect::<Result<Vec<_>, _>>()?;
    let h = estimate_homography(&board.plane_points(), &normalized)?;
    let init = pose_from_homography(&h)?;
    let object = board.object_points();
    let problem = PoseProblem { intr, object: &object, corners: &view.corners, pose: init };
    let (solved, _) = levenberg_marquardt(problem, &LmSettings::default())?;
    if object.iter().any(|x| !(solved.pose.transform(*x).z > T::zero())) {
        return Err(CalibrationError::BehindCamera);
    }
    Ok(solved.pose)
}
