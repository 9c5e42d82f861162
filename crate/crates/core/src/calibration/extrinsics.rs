use log::info;

use super::intrinsics::{rms, IntrinsicResult};
use super::jacobian::{corner_jacobian, point_jacobian, pose_columns};
use super::lm::{
    assemble, levenberg_marquardt, par_views, pixel_cost_floor, LeastSquares, LmSettings, LocalSystem, NormalEquations,
};
use super::pose::{perturb, view_cost};
use super::{estimate_board_pose, BoardSpec, CalibrationError, Extrinsics, Pose, SolverSummary, ViewObservation};
use crate::geometry::{CameraIntrinsics, Point3};
use crate::linalg::{nearest_rotation, Mat3, Vec3};
use crate::scalar::Real;

/// Calibrated intrinsics of one camera with its corner observations.
#[derive(Debug, Clone, Copy)]
pub struct CameraViews<'a, T> {
    pub intrinsics: &'a CameraIntrinsics<T>,
    pub views: &'a [ViewObservation<T>],
}

impl<'a, T: Real> CameraViews<'a, T> {
    pub fn new(intrinsics: &'a CameraIntrinsics<T>, views: &'a [ViewObservation<T>]) -> Self {
        Self { intrinsics, views }
    }

    pub fn from_result(result: &'a IntrinsicResult<T>, views: &'a [ViewObservation<T>]) -> Self {
        Self::new(&result.intrinsics, views)
    }

    fn find(&self, id: &str) -> Option<&'a ViewObservation<T>> {
        self.views.iter().find(|v| v.view_id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicCalibration<T> {
    pub extrinsics: Extrinsics<T>,
    pub view_ids: Vec<String>,
    /// Board-to-RGB pose per shared view.
    pub board_poses: Vec<Pose<T>>,
    /// Per-coordinate RMS over the corners of both cameras, pixels.
    pub rms_reproj: T,
    pub initial_rms: T,
    pub solver: SolverSummary<T>,
}

struct ExtrinsicProblem<'a, T> {
    object: &'a [Point3<T>],
    rgb: &'a CameraIntrinsics<T>,
    thermal: &'a CameraIntrinsics<T>,
    pairs: &'a [(&'a ViewObservation<T>, &'a ViewObservation<T>)],
    extrinsics: Pose<T>,
    poses: Vec<Pose<T>>,
}

impl<T: Real> LeastSquares<T> for ExtrinsicProblem<'_, T> {
    fn linearize(&self) -> NormalEquations<T> {
        let o = T::zero();
        let e = &self.extrinsics;
        let locals = par_views(self.pairs.len(), |k| {
            let (rv, tv) = self.pairs[k];
            let pose = &self.poses[k];
            let mut local = LocalSystem::new(6);
            let mut cols = [[o; 2]; 12];
            for (x, c) in self.object.iter().zip(&rv.corners) {
                let j = corner_jacobian(self.rgb, pose, *x).ok()?;
                cols[..6].fill([o; 2]);
                cols[6..].copy_from_slice(&j.d_pose);
                local.add(&cols, [j.pixel.u - c.u, j.pixel.v - c.v]);
            }
            for (x, c) in self.object.iter().zip(&tv.corners) {
                let rotated = pose.rotation * *x;
                let p_rgb = rotated + pose.translation;
                let p_th = e.transform(p_rgb);
                let j = point_jacobian(self.thermal, p_th).ok()?;
                cols[..6].copy_from_slice(&pose_columns(&j.d_point, e.rotation * p_rgb));
                // d(u, v)/dP_rgb = d(u, v)/dP_th * R_E
                let mut d_rgb = [[o; 2]; 3];
                for (kk, col) in d_rgb.iter_mut().enumerate() {
                    for row in 0..2 {
                        col[row] = (0..3).fold(o, |acc, i| acc + j.d_point[i][row] * e.rotation.m[i][kk]);
                    }
                }
                cols[6..].copy_from_slice(&pose_columns(&d_rgb, rotated));
                local.add(&cols, [j.pixel.u - c.u, j.pixel.v - c.v]);
            }
            Some(local)
        });
        match locals {
            Some(l) => assemble(6, l),
            None => {
                let mut ne = assemble(6, Vec::new());
                ne.cost = T::infinity();
                ne
            }
        }
    }

    fn cost(&self) -> T {
        let mut total = T::zero();
        for ((rv, tv), pose) in self.pairs.iter().zip(&self.poses) {
            total += view_cost(self.rgb, pose, self.object, &rv.corners);
            total += view_cost(self.thermal, &self.extrinsics.compose(pose), self.object, &tv.corners);
        }
        total
    }

    fn cost_floor(&self) -> T {
        pixel_cost_floor(self.pairs.iter().flat_map(|(r, t)| r.corners.iter().chain(&t.corners)))
    }

    fn step(&self, delta: &[T]) -> Self {
        ExtrinsicProblem {
            extrinsics: perturb(&self.extrinsics, &delta[..6]),
            poses: self.poses.iter().enumerate().map(|(k, p)| perturb(p, &delta[6 + 6 * k..12 + 6 * k])).collect(),
            ..*self
        }
    }
}

/// RGB-to-thermal rigid transform from board views seen by both cameras.
///
/// Views are paired by `view_id`. With `shared_view_ids = None` every id
/// present in both observation sets is used, in RGB order.
pub fn calibrate_extrinsics<T: Real>(
    board: &BoardSpec<T>,
    rgb: CameraViews<'_, T>,
    thermal: CameraViews<'_, T>,
    shared_view_ids: Option<&[String]>,
) -> Result<ExtrinsicCalibration<T>, CalibrationError> {
    let ids: Vec<String> = match shared_view_ids {
        Some(ids) => {
            for id in ids {
                if rgb.find(id).is_none() || thermal.find(id).is_none() {
                    return Err(CalibrationError::InvalidInput(format!("view `{id}` is not observed by both cameras")));
                }
            }
            ids.to_vec()
        }
        None => rgb.views.iter().filter(|v| thermal.find(&v.view_id).is_some()).map(|v| v.view_id.clone()).collect(),
    };
    if ids.is_empty() {
        return Err(CalibrationError::NoSharedViews);
    }
    let pairs: Vec<_> =
        ids.iter().map(|id| (rgb.find(id).expect("checked"), thermal.find(id).expect("checked"))).collect();

    let mut poses = Vec::with_capacity(pairs.len());
    let mut rot_sum = Mat3::zeros();
    let mut t_sum = Vec3::zeros();
    for (rv, tv) in &pairs {
        let pr = estimate_board_pose(board, rv, rgb.intrinsics)?;
        let pt = estimate_board_pose(board, tv, thermal.intrinsics)?;
        let e = pt.compose(&pr.inverse());
        rot_sum = rot_sum + e.rotation;
        t_sum += e.translation;
        poses.push(pr);
    }
    let init = Pose::new(nearest_rotation(&rot_sum), t_sum.scale(T::one() / T::from_usize_lossy(pairs.len())));

    let object = board.object_points();
    let problem = ExtrinsicProblem {
        object: &object,
        rgb: rgb.intrinsics,
        thermal: thermal.intrinsics,
        pairs: &pairs,
        extrinsics: init,
        poses,
    };
    let (solved, solver) = levenberg_marquardt(problem, &LmSettings::default())?;
    let corners = 2 * pairs.len() * board.corner_count();
    let initial_rms = rms(solver.initial_cost, corners);
    let rms_reproj = rms(solver.final_cost, corners);
    info!("extrinsics: {} shared views, rms {initial_rms} -> {rms_reproj} px", pairs.len());
    let extrinsics = Extrinsics::new(solved.extrinsics.rotation, solved.extrinsics.translation)?;
    Ok(ExtrinsicCalibration { extrinsics, view_ids: ids, board_poses: solved.poses, rms_reproj, initial_rms, solver })
}
