//! Newton continuation of the walking fixed point in the slope parameter,
//! Floquet-multiplier tracking, and step-by-step gait simulation.
//!
//! Below `delta_min` the map's fixed points form a one-parameter family and
//! `I - P'` is singular along it, so Newton refuses and callers are pointed
//! at the family instead. Along the branch the two multipliers start near
//! `{1, 0.486}`, drift toward each other and collide into a complex pair
//! (around `delta ~ 2e-3`) whose modulus stays below one.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::dynamics::ModelForm;
use crate::error::{Error, Result};
use crate::integrate::IntegratorOptions;
use crate::poincare::{jacobian_state, poincare_map, SectionPoint};

/// Knobs for the fixed-point solves.
#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Newton is refused below this; the family is the answer there.
    pub delta_min: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 25,
            delta_min: 1e-6,
            integrator: IntegratorOptions::tight(),
        }
    }
}

/// One converged point of the fixed-point branch.
#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub delta: f64,
    pub fixed_point: SectionPoint,
    pub period: f64,
    /// Multiplier continuing from 1 at delta = 0. For a complex pair this
    /// and `rho_transverse` both hold the common modulus.
    pub rho_delta: f64,
    /// The other multiplier (continuing from the transverse contraction).
    pub rho_transverse: f64,
    pub multipliers_complex: bool,
    pub newton_iters: usize,
    pub residual: f64,
}

impl BranchPoint {
    /// Largest multiplier modulus; < 1 means the cycle is stable.
    pub fn spectral_radius(&self) -> f64 {
        self.rho_delta.abs().max(self.rho_transverse.abs())
    }
}

fn multipliers(jac: &Matrix2<f64>) -> (f64, f64, bool) {
    let tr = jac.trace();
    let det = jac.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
        if (l1 - 1.0).abs() <= (l2 - 1.0).abs() {
            (l1, l2, false)
        } else {
            (l2, l1, false)
        }
    } else {
        let modulus = det.sqrt();
        (modulus, modulus, true)
    }
}

/// Solve `P(x, delta) = x` by Newton iteration with a finite-difference
/// Jacobian, starting from `guess`.
pub fn newton_fixed_point(
    delta: f64,
    guess: &SectionPoint,
    model: ModelForm,
    opts: &ContinuationOptions,
) -> Result<BranchPoint> {
    if !delta.is_finite() || delta < opts.delta_min {
        return Err(Error::FamilyDegenerate {
            min: opts.delta_min,
        });
    }
    let mut x = guess.to_vector();
    let mut iters = 0usize;
    let mut jac = Matrix2::zeros();
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iters {
        let p = SectionPoint::from_vector(x);
        let image = poincare_map(&p, delta, model, &opts.integrator)?
            .image
            .to_vector();
        let r = image - x;
        residual = r.norm();
        jac = jacobian_state(&p, delta, model, &opts.integrator)?;
        if residual < opts.newton_tol {
            iters = it;
            break;
        }
        if it == opts.max_iters {
            return Err(Error::NewtonMaxIter {
                iters: it,
                residual,
            });
        }
        let a = jac - Matrix2::identity();
        let det = a.determinant();
        if det.abs() < 1e-12 * (1.0 + a.norm() * a.norm()) {
            return Err(Error::SingularJacobian { det });
        }
        let dx = a.lu().solve(&(-r)).ok_or(Error::SingularJacobian { det })?;
        x += dx;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Newton iterate"));
        }
    }

    let fixed_point = SectionPoint::from_vector(x);
    let period = poincare_map(&fixed_point, delta, model, &opts.integrator)?.time_of_flight;
    let (rho_delta, rho_transverse, multipliers_complex) = multipliers(&jac);
    Ok(BranchPoint {
        delta,
        fixed_point,
        period,
        rho_delta,
        rho_transverse,
        multipliers_complex,
        newton_iters: iters,
        residual,
    })
}

/// A continued branch, possibly truncated at a failing grid point.
#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// `(delta, error)` of the first grid point that failed, if any.
    pub truncated_at: Option<(f64, String)>,
}

impl Branch {
    /// Linear extrapolation of the fixed point to `delta -> 0` from the two
    /// smallest-delta points.
    pub fn extrapolate_to_zero(&self) -> Option<SectionPoint> {
        match self.points.as_slice() {
            [] => None,
            [only] => Some(only.fixed_point),
            [a, b, ..] => {
                let slope =
                    (b.fixed_point.to_vector() - a.fixed_point.to_vector()) / (b.delta - a.delta);
                Some(SectionPoint::from_vector(
                    a.fixed_point.to_vector() - slope * a.delta,
                ))
            }
        }
    }
}

/// Follow the fixed point over an ascending `delta` grid, warm-starting each
/// solve from a linear extrapolation of the previous points.
///
/// A Newton failure truncates the branch; the points found so far are kept.
pub fn continue_branch(
    delta_grid: &[f64],
    seed: &SectionPoint,
    model: ModelForm,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    if delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "delta grid must be strictly ascending".into(),
        ));
    }
    let mut points: Vec<BranchPoint> = Vec::with_capacity(delta_grid.len());
    let mut truncated_at = None;
    for &delta in delta_grid {
        let guess = match points.as_slice() {
            [] => *seed,
            [only] => only.fixed_point,
            [.., a, b] => {
                let slope =
                    (b.fixed_point.to_vector() - a.fixed_point.to_vector()) / (b.delta - a.delta);
                SectionPoint::from_vector(b.fixed_point.to_vector() + slope * (delta - b.delta))
            }
        };
        match newton_fixed_point(delta, &guess, model, opts) {
            Ok(point) => points.push(point),
            Err(e) => {
                truncated_at = Some((delta, e.to_string()));
                break;
            }
        }
    }
    Ok(Branch {
        points,
        truncated_at,
    })
}

/// Result of the multiplier-drift fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FloquetFit {
    /// First-order drift of the unit multiplier per unit delta.
    pub slope: f64,
    /// Fitted quadratic correction (diagnostic).
    pub curvature: f64,
    /// Number of branch points with a real near-unit multiplier used.
    pub n_used: usize,
}

/// Least-squares fit of `rho_delta - 1 = slope * delta + curvature * delta^2`
/// through the origin, over the branch points whose near-unit multiplier is
/// still real. Past the multiplier collision the pair is complex and the
/// asymptotic regime is over, so those points are excluded.
pub fn floquet_slope(points: &[BranchPoint]) -> Result<FloquetFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.multipliers_complex)
        .map(|p| (p.delta, p.rho_delta - 1.0))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "multiplier fit needs at least 3 branch points with real multipliers, have {}",
            usable.len()
        )));
    }
    let (mut s2, mut s3, mut s4, mut sxy, mut sx2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, y) in &usable {
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
        sxy += d * y;
        sx2y += d * d * y;
    }
    let det = s2 * s4 - s3 * s3;
    if det.abs() < f64::MIN_POSITIVE {
        return Err(Error::SingularJacobian { det });
    }
    let slope = (sxy * s4 - s3 * sx2y) / det;
    let curvature = (s2 * sx2y - s3 * sxy) / det;
    Ok(FloquetFit {
        slope,
        curvature,
        n_used: usable.len(),
    })
}

/// One recorded step of a simulated gait.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaitStep {
    pub index: usize,
    /// Post-heelstrike section point.
    pub point: SectionPoint,
    pub period: f64,
    /// Inter-leg angle at heelstrike, a proxy for the step length.
    pub step_length: f64,
    /// Distance to the previous section point (the convergence metric).
    pub dist_prev: f64,
}

/// Step-by-step record of a walk, with fall detection.
#[derive(Debug, Clone, Serialize)]
pub struct GaitTrace {
    pub delta: f64,
    pub start: SectionPoint,
    pub steps: Vec<GaitStep>,
    pub fell: bool,
    pub fall_reason: Option<String>,
}

impl GaitTrace {
    /// Geometric-mean per-step contraction of the convergence metric over the
    /// steps after `skip`. `None` when the metric is at noise level (already
    /// on the cycle) or too few steps survived.
    pub fn contraction_estimate(&self, skip: usize) -> Option<f64> {
        let d: Vec<f64> = self.steps.iter().skip(skip).map(|s| s.dist_prev).collect();
        if d.len() < 2 || d[0] < 1e-13 || d[d.len() - 1] <= 0.0 {
            return None;
        }
        Some((d[d.len() - 1] / d[0]).powf(1.0 / (d.len() - 1) as f64))
    }
}

/// Iterate the heelstrike map `n_steps` times from `x0`.
///
/// Any failure to reach the next heelstrike (including blow-up of the swing
/// phase or a stance angle beyond 10) counts as a fall; the trace is
/// truncated there and flagged.
pub fn simulate_gait(
    delta: f64,
    x0: &SectionPoint,
    n_steps: usize,
    model: ModelForm,
    opts: &IntegratorOptions,
) -> Result<GaitTrace> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be >= 1".into()));
    }
    let mut steps = Vec::with_capacity(n_steps);
    let mut current = *x0;
    let mut fell = false;
    let mut fall_reason = None;
    for index in 0..n_steps {
        if current.theta.abs() > 10.0 {
            fell = true;
            fall_reason = Some(format!("stance angle {} beyond bound", current.theta));
            break;
        }
        match poincare_map(&current, delta, model, opts) {
            Ok(step) => {
                let next = step.image;
                steps.push(GaitStep {
                    index,
                    point: next,
                    period: step.time_of_flight,
                    step_length: 2.0 * next.theta,
                    dist_prev: next.dist(&current),
                });
                current = next;
            }
            Err(
                e @ (Error::NoHeelstrike { .. }
                | Error::StepUnderflow { .. }
                | Error::NonFinite(_)),
            ) => {
                fell = true;
                fall_reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(GaitTrace {
        delta,
        start: *x0,
        steps,
        fell,
        fall_reason,
    })
}
