use rayon::prelude::*;

use super::CalibrationError;
use crate::linalg::{cholesky_solve, DMat};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings<T> {
    pub initial_lambda: T,
    /// Total step attempts, accepted or not.
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_tolerance: T,
    /// Hitting the iteration cap is an error only if the last accepted
    /// relative decrease is above this.
    pub stall_tolerance: T,
    pub max_lambda: T,
}

impl<T: Real> Default for LmSettings<T> {
    fn default() -> Self {
        Self {
            initial_lambda: T::lit(1e-3),
            max_iterations: 200,
            relative_tolerance: T::tol(1e-12, 4.0),
            stall_tolerance: T::lit(1e-6),
            max_lambda: T::lit(1e16),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RelativeDecrease,
    LambdaSaturated,
    ZeroCost,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary<T> {
    pub iterations: usize,
    pub initial_cost: T,
    pub final_cost: T,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<T>,
    pub termination: Termination,
}

/// Gauss-Newton normal equations `JᵀJ`, `Jᵀr` and the sum of squared residuals.
pub(crate) struct NormalEquations<T> {
    pub jtj: DMat<T>,
    pub jtr: Vec<T>,
    pub cost: T,
}

pub(crate) trait LeastSquares<T: Real>: Sized {
    fn linearize(&self) -> NormalEquations<T>;
    /// Sum of squared residuals; infinite when the state is not evaluable.
    fn cost(&self) -> T;
    fn step(&self, delta: &[T]) -> Self;
    /// Cost changes below this are indistinguishable from rounding.
    fn cost_floor(&self) -> T {
        T::zero()
    }
}

/// Rounding level of the squared pixel residuals of a set of observations.
pub(crate) fn pixel_cost_floor<'a, T: Real + 'a>(
    obs: impl IntoIterator<Item = &'a crate::geometry::PixelCoord<T>>,
) -> T {
    let e = T::lit(4.0) * T::epsilon();
    obs.into_iter()
        .fold(T::zero(), |acc, p| acc + (e * (p.u.abs() + T::one())).powi(2) + (e * (p.v.abs() + T::one())).powi(2))
}

/// Damped least squares with Marquardt diagonal scaling.
pub(crate) fn levenberg_marquardt<T: Real, P: LeastSquares<T>>(
    problem: P,
    settings: &LmSettings<T>,
) -> Result<(P, SolverSummary<T>), CalibrationError> {
    let mut cur = problem;
    let mut cost = cur.cost();
    if !cost.is_finite() {
        return Err(CalibrationError::DegenerateConfiguration("initial estimate cannot be evaluated".into()));
    }
    let floor = cur.cost_floor();
    let mut ne = cur.linearize();
    let mut history = vec![cost];
    let mut lambda = settings.initial_lambda;
    let mut last_rel = T::infinity();
    let mut iterations = 0;
    let termination = loop {
        if cost <= floor.max(T::min_positive_value()) {
            break Termination::ZeroCost;
        }
        if iterations >= settings.max_iterations {
            if last_rel > settings.stall_tolerance {
                return Err(CalibrationError::NoConvergence { iterations, relative_decrease: last_rel.as_f64() });
            }
            break Termination::IterationCap;
        }
        iterations += 1;

        let n = ne.jtr.len();
        let diag = ne.jtj.diagonal();
        let diag_floor = diag.iter().fold(T::zero(), |m, &d| m.max(d)) * T::epsilon();
        let mut a = ne.jtj.clone();
        for (i, &d) in diag.iter().enumerate() {
            a[(i, i)] += lambda * d.max(diag_floor).max(T::min_positive_value());
        }
        let rhs: Vec<T> = ne.jtr.iter().map(|&g| -g).collect();
        let candidate = cholesky_solve(&a, &rhs)
            .filter(|d| d.len() == n && d.iter().all(|v| v.is_finite()))
            .map(|delta| cur.step(&delta));
        let accepted = candidate.and_then(|cand| {
            let c = cand.cost();
            (c.is_finite() && c < cost).then_some((cand, c))
        });
        match accepted {
            Some((cand, c)) => {
                let rel = (cost - c) / cost;
                let negligible = cost - c <= floor;
                cur = cand;
                cost = c;
                ne = cur.linearize();
                history.push(cost);
                lambda = (lambda * T::lit(0.1)).max(T::lit(1e-15));
                last_rel = if negligible { T::zero() } else { rel };
                if rel < settings.relative_tolerance || negligible {
                    break Termination::RelativeDecrease;
                }
            }
            None => {
                lambda *= T::lit(10.0);
                if lambda > settings.max_lambda {
                    break Termination::LambdaSaturated;
                }
            }
        }
    };
    let summary =
        SolverSummary { iterations, initial_cost: history[0], final_cost: cost, cost_history: history, termination };
    Ok((cur, summary))
}

/// Normal equations of one view over `[global params | 6 view params]`.
pub(crate) struct LocalSystem<T> {
    jtj: DMat<T>,
    jtr: Vec<T>,
    cost: T,
}

impl<T: Real> LocalSystem<T> {
    pub fn new(global: usize) -> Self {
        Self { jtj: DMat::zeros(global + 6, global + 6), jtr: vec![T::zero(); global + 6], cost: T::zero() }
    }

    /// Adds one 2D residual with Jacobian columns `cols[k] = (du, dv)/dp_k`.
    pub fn add(&mut self, cols: &[[T; 2]], r: [T; 2]) {
        let n = cols.len();
        for i in 0..n {
            let ci = cols[i];
            if ci[0] == T::zero() && ci[1] == T::zero() {
                continue;
            }
            for j in i..n {
                self.jtj[(i, j)] += ci[0] * cols[j][0] + ci[1] * cols[j][1];
            }
            self.jtr[i] += ci[0] * r[0] + ci[1] * r[1];
        }
        self.cost += r[0] * r[0] + r[1] * r[1];
    }
}

/// Scatters per-view local systems into the global normal equations,
/// with the global block first and view `k` at `global + 6k`.
pub(crate) fn assemble<T: Real>(global: usize, locals: Vec<LocalSystem<T>>) -> NormalEquations<T> {
    let n = global + 6 * locals.len();
    let mut jtj = DMat::zeros(n, n);
    let mut jtr = vec![T::zero(); n];
    let mut cost = T::zero();
    for (k, local) in locals.into_iter().enumerate() {
        let map = |i: usize| if i < global { i } else { global + 6 * k + (i - global) };
        let m = global + 6;
        for i in 0..m {
            for j in i..m {
                let (gi, gj) = (map(i), map(j));
                let (a, b) = if gi <= gj { (gi, gj) } else { (gj, gi) };
                jtj[(a, b)] += local.jtj[(i, j)];
            }
            jtr[map(i)] += local.jtr[i];
        }
        cost += local.cost;
    }
    jtj.symmetrize_upper();
    NormalEquations { jtj, jtr, cost }
}

/// Builds per-view systems in parallel; the result order, and hence the
/// floating-point summation order, does not depend on the thread count.
pub(crate) fn par_views<T: Real, F>(views: usize, f: F) -> Option<Vec<LocalSystem<T>>>
where
    F: Fn(usize) -> Option<LocalSystem<T>> + Sync + Send,
{
    (0..views).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock residuals (1 - x, 10 (y - x^2)).
    #[derive(Clone)]
    struct Rosen([f64; 2]);

    impl LeastSquares<f64> for Rosen {
        fn linearize(&self) -> NormalEquations<f64> {
            let [x, y] = self.0;
            let r = [1.0 - x, 10.0 * (y - x * x)];
            let j = [[-1.0, 0.0], [-20.0 * x, 10.0]];
            let mut jtj = DMat::zeros(2, 2);
            let mut jtr = vec![0.0; 2];
            for a in 0..2 {
                for b in 0..2 {
                    jtj[(a, b)] = j[0][a] * j[0][b] + j[1][a] * j[1][b];
                }
                jtr[a] = j[0][a] * r[0] + j[1][a] * r[1];
            }
            NormalEquations { jtj, jtr, cost: self.cost() }
        }
        fn cost(&self) -> f64 {
            let [x, y] = self.0;
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        }
        fn step(&self, d: &[f64]) -> Self {
            Rosen([self.0[0] + d[0], self.0[1] + d[1]])
        }
    }

    #[test]
    fn solves_rosenbrock_with_monotone_cost() {
        let (sol, summary) = levenberg_marquardt(Rosen([-1.2, 1.0]), &LmSettings::default()).unwrap();
        assert!((sol.0[0] - 1.0).abs() < 1e-8 && (sol.0[1] - 1.0).abs() < 1e-8, "{:?}", sol.0);
        assert!(summary.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(summary.final_cost < 1e-16);
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let settings = LmSettings { max_iterations: 2, ..LmSettings::default() };
        assert!(matches!(
            levenberg_marquardt(Rosen([-1.2, 1.0]), &settings),
            Err(CalibrationError::NoConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn assemble_places_view_blocks() {
        let mut a = LocalSystem::<f64>::new(1);
        a.add(&[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [2.0, 0.0]], [1.0, 0.0]);
        let mut b = LocalSystem::<f64>::new(1);
        b.add(&[[1.0, 0.0], [3.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], [2.0, 0.0]);
        let ne = assemble(1, vec![a, b]);
        assert_eq!(ne.jtj.rows(), 13);
        assert_eq!(ne.jtj[(0, 0)], 2.0);
        assert_eq!(ne.jtj[(0, 6)], 2.0);
        assert_eq!(ne.jtj[(6, 0)], 2.0);
        assert_eq!(ne.jtj[(0, 7)], 3.0);
        assert_eq!(ne.jtr, vec![3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 6.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ne.cost, 5.0);
    }
}
