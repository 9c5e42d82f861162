use std::collections::HashSet;

use log::{debug, info};

use super::jacobian::{corner_jacobian, intrinsics_from_params, intrinsics_params};
use super::lm::{
    assemble, levenberg_marquardt, par_views, pixel_cost_floor, LeastSquares, LmSettings, LocalSystem, NormalEquations,
};
use super::pose::{perturb, pose_from_homography, view_cost};
use super::{estimate_homography, zhang_init, BoardSpec, CalibrationError, Pose, SolverSummary, ViewObservation};
use crate::geometry::{CameraIntrinsics, DistortionModel, LensModel, Point3, Resolution};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicResult<T> {
    pub intrinsics: CameraIntrinsics<T>,
    pub view_ids: Vec<String>,
    /// Board-to-camera pose per view, aligned with `view_ids`.
    pub per_view_poses: Vec<Pose<T>>,
    /// Root mean square of the per-coordinate reprojection residuals, pixels.
    pub rms_reproj: T,
    pub initial_rms: T,
    pub solver: SolverSummary<T>,
}

pub(crate) fn rms<T: Real>(cost: T, corners: usize) -> T {
    (cost / T::from_usize_lossy(2 * corners)).sqrt()
}

struct IntrinsicProblem<'a, T> {
    object: &'a [Point3<T>],
    views: &'a [ViewObservation<T>],
    camera: CameraIntrinsics<T>,
    poses: Vec<Pose<T>>,
}

impl<T: Real> IntrinsicProblem<'_, T> {
    fn global(&self) -> usize {
        4 + self.camera.model().coefficient_count()
    }
}

impl<T: Real> LeastSquares<T> for IntrinsicProblem<'_, T> {
    fn linearize(&self) -> NormalEquations<T> {
        let g = self.global();
        let locals = par_views(self.views.len(), |k| {
            let mut local = LocalSystem::new(g);
            let mut cols = Vec::with_capacity(g + 6);
            for (x, c) in self.object.iter().zip(&self.views[k].corners) {
                let j = corner_jacobian(&self.camera, &self.poses[k], *x).ok()?;
                cols.clear();
                cols.extend_from_slice(&j.d_intrinsics);
                cols.extend_from_slice(&j.d_pose);
                local.add(&cols, [j.pixel.u - c.u, j.pixel.v - c.v]);
            }
            Some(local)
        });
        match locals {
            Some(l) => assemble(g, l),
            None => {
                let mut ne = assemble(g, Vec::new());
                ne.cost = T::infinity();
                ne
            }
        }
    }

    fn cost(&self) -> T {
        let per_view: Vec<T> = self
            .views
            .iter()
            .zip(&self.poses)
            .map(|(v, p)| view_cost(&self.camera, p, self.object, &v.corners))
            .collect();
        per_view.into_iter().fold(T::zero(), |a, b| a + b)
    }

    fn cost_floor(&self) -> T {
        pixel_cost_floor(self.views.iter().flat_map(|v| &v.corners))
    }

    fn step(&self, delta: &[T]) -> Self {
        let g = self.global();
        let params: Vec<T> = intrinsics_params(&self.camera).iter().zip(delta).map(|(p, d)| *p + *d).collect();
        let poses = self.poses.iter().enumerate().map(|(k, p)| perturb(p, &delta[g + 6 * k..g + 6 * k + 6])).collect();
        IntrinsicProblem {
            object: self.object,
            views: self.views,
            camera: intrinsics_from_params(&self.camera, &params),
            poses,
        }
    }
}

/// Distortion that reproduces the pinhole closed-form initialization:
/// zero for plumb-bob, the series of `tan(theta)` for fisheye.
fn pinhole_like<T: Real>(model: LensModel) -> DistortionModel<T> {
    match model {
        LensModel::PlumbBob => DistortionModel::none(model),
        LensModel::Fisheye => DistortionModel::Fisheye {
            k1: T::lit(1.0 / 3.0),
            k2: T::lit(2.0 / 15.0),
            k3: T::lit(17.0 / 315.0),
            k4: T::lit(62.0 / 2835.0),
        },
    }
}

pub fn calibrate_intrinsics<T: Real>(
    board: &BoardSpec<T>,
    views: &[ViewObservation<T>],
    model: LensModel,
    resolution: Resolution,
) -> Result<IntrinsicResult<T>, CalibrationError> {
    calibrate_intrinsics_with(board, views, model, resolution, &LmSettings::default())
}

pub fn calibrate_intrinsics_with<T: Real>(
    board: &BoardSpec<T>,
    views: &[ViewObservation<T>],
    model: LensModel,
    resolution: Resolution,
    settings: &LmSettings<T>,
) -> Result<IntrinsicResult<T>, CalibrationError> {
    if views.len() < 3 {
        return Err(CalibrationError::IllConditioned(format!("{} views, at least 3 required", views.len())));
    }
    let mut seen = HashSet::new();
    for v in views {
        v.validate(board)?;
        if !seen.insert(v.view_id.as_str()) {
            return Err(CalibrationError::InvalidInput(format!("duplicate view id `{}`", v.view_id)));
        }
    }

    let plane = board.plane_points();
    let homographies = views.iter().map(|v| estimate_homography(&plane, &v.corners)).collect::<Result<Vec<_>, _>>()?;
    let k0 = zhang_init(&homographies, resolution)?.matrix();
    let k0_inv =
        k0.try_inverse().ok_or_else(|| CalibrationError::IllConditioned("singular initial camera matrix".into()))?;
    let poses = homographies.iter().map(|h| pose_from_homography(&(k0_inv * *h))).collect::<Result<Vec<_>, _>>()?;
    let (fx, fy, cx, cy) = (k0.m[0][0], k0.m[1][1], k0.m[0][2], k0.m[1][2]);
    debug!("closed-form init fx={fx} fy={fy} cx={cx} cy={cy}");
    let camera = CameraIntrinsics::new_unchecked(fx, fy, cx, cy, pinhole_like(model), resolution);

    let object = board.object_points();
    let problem = IntrinsicProblem { object: &object, views, camera, poses };
    let corners = views.len() * board.corner_count();
    let (solved, solver) = levenberg_marquardt(problem, settings)?;
    let initial_rms = rms(solver.initial_cost, corners);
    let rms_reproj = rms(solver.final_cost, corners);
    info!("intrinsics ({model}): rms {initial_rms} -> {rms_reproj} px after {} iterations", solver.iterations);
    solved
        .camera
        .validate()
        .map_err(|e| CalibrationError::IllConditioned(format!("optimized intrinsics are invalid: {e}")))?;
    Ok(IntrinsicResult {
        intrinsics: solved.camera,
        view_ids: views.iter().map(|v| v.view_id.clone()).collect(),
        per_view_poses: solved.poses,
        rms_reproj,
        initial_rms,
        solver,
    })
}
