//! The heelstrike return map and its first derivatives.
//!
//! `poincare_map` sends one post-heelstrike section point `(theta, omega)` to
//! the next by integrating the chosen model to the accepted heelstrike and
//! applying the reset. At `delta = 0` all derivatives are assembled from the
//! closed forms through the implicit function theorem; for `delta > 0` the
//! state Jacobian falls back to central finite differences of the map run at
//! tight integrator tolerance.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::closedform::{
    self, alpha_t2, delta0_event_time, guard_f_state, guard_f_t, guard_f_t_state, guard_f_tt, t2,
    unperturbed_solution, variational,
};
use crate::dynamics::{
    apply_jump_expanded, apply_jump_full, eval_expanded_field, eval_full_field, ModelForm,
    SlopeParam, State4,
};
use crate::error::{Error, Result};
use crate::integrate::{integrate_to_heelstrike, DenseOutput, IntegratorOptions};

/// Point on the post-heelstrike section.
///
/// Walking-relevant points have `theta > 0`, `omega < 0`; this is documented,
/// not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub theta: f64,
    pub omega: f64,
}

impl SectionPoint {
    pub fn new(theta: f64, omega: f64) -> Self {
        Self { theta, omega }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.theta, self.omega)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.omega.is_finite()
    }

    pub fn dist(&self, other: &SectionPoint) -> f64 {
        ((self.theta - other.theta).powi(2) + (self.omega - other.omega).powi(2)).sqrt()
    }
}

/// One application of the return map.
#[derive(Debug, Clone, Serialize)]
pub struct StepResult {
    pub image: SectionPoint,
    pub time_of_flight: f64,
    pub pre_jump_state: State4,
    pub n_rejected_grazings: usize,
    #[serde(skip)]
    pub dense: Option<DenseOutput>,
}

/// How a derivative bundle was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    AnalyticDelta0,
    FiniteDifference,
}

/// First derivatives of the map at a section point.
///
/// The delta-derivatives are only available on the analytic `delta = 0` path.
#[derive(Debug, Clone)]
pub struct MapDerivatives {
    pub dp_dstate: Matrix2<f64>,
    pub dt_dstate: Option<Vector2<f64>>,
    pub dp_ddelta: Option<Vector2<f64>>,
    pub dt_ddelta: Option<f64>,
    pub dpdelta_dstate: Option<Matrix2<f64>>,
    pub method: DerivativeMethod,
}

fn validate_map_inputs(p: &SectionPoint, delta: f64) -> Result<()> {
    if !p.is_finite() || !delta.is_finite() {
        return Err(Error::NonFinite("section point or delta"));
    }
    if delta < 0.0 {
        return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    if p.theta == 0.0 && p.omega == 0.0 {
        return Err(Error::InvalidInput(
            "the origin is a rest point; the return map needs a nonzero section point".into(),
        ));
    }
    Ok(())
}

/// The return map `P(p, delta)` for the chosen model form.
///
/// For the full model the section coordinates are converted by the
/// `theta = sqrt(delta) * Theta` scaling before integration and back after,
/// so one section parameterization serves both models. At `delta = 0` the
/// scaled full model coincides with the expanded system.
pub fn poincare_map(
    p: &SectionPoint,
    delta: f64,
    model: ModelForm,
    opts: &IntegratorOptions,
) -> Result<StepResult> {
    validate_map_inputs(p, delta)?;
    match model {
        ModelForm::Expanded => map_expanded(p, delta, opts),
        ModelForm::Full if delta == 0.0 => map_expanded(p, 0.0, opts),
        ModelForm::Full => map_full(p, delta, opts),
    }
}

fn nan_state() -> State4 {
    State4::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN)
}

fn map_expanded(p: &SectionPoint, delta: f64, opts: &IntegratorOptions) -> Result<StepResult> {
    let s0 = State4::new(
        p.theta,
        p.omega,
        2.0 * p.theta,
        2.0 * delta * p.theta * p.theta * p.omega,
    );
    let field = move |_t: f64, s: &State4| {
        eval_expanded_field(s, delta).unwrap_or_else(|_| nan_state())
    };
    let event = integrate_to_heelstrike(&field, &s0, opts)?;
    let post = apply_jump_expanded(&event.state_at_event, delta)?;
    Ok(StepResult {
        image: SectionPoint::new(post.theta, post.theta_dot),
        time_of_flight: event.t_event,
        pre_jump_state: event.state_at_event,
        n_rejected_grazings: event.n_rejected_grazings,
        dense: event.dense,
    })
}

fn map_full(p: &SectionPoint, delta: f64, opts: &IntegratorOptions) -> Result<StepResult> {
    let slope = SlopeParam::new(delta)?;
    let r = delta.sqrt();
    let gamma = slope.gamma();
    let theta_f = r * p.theta;
    let omega_f = r * p.omega;
    // Post-jump structure of the full reset: phi = 2*theta and
    // phi_dot = (1 - cos 2*theta) * theta_dot.
    let s0 = State4::new(
        theta_f,
        omega_f,
        2.0 * theta_f,
        (1.0 - (2.0 * theta_f).cos()) * omega_f,
    );
    let field = move |_t: f64, s: &State4| {
        eval_full_field(s, gamma).unwrap_or_else(|_| nan_state())
    };
    let event = integrate_to_heelstrike(&field, &s0, opts)?;
    let post = apply_jump_full(&event.state_at_event)?;
    Ok(StepResult {
        image: SectionPoint::new(post.theta / r, post.theta_dot / r),
        time_of_flight: event.t_event,
        pre_jump_state: event.state_at_event,
        n_rejected_grazings: event.n_rejected_grazings,
        dense: event.dense,
    })
}

/// Step duration `T(p, delta)` of the map.
pub fn time_of_flight(
    p: &SectionPoint,
    delta: f64,
    model: ModelForm,
    opts: &IntegratorOptions,
) -> Result<f64> {
    Ok(poincare_map(p, delta, model, opts)?.time_of_flight)
}

const DELTA0: Matrix2<f64> = Matrix2::new(-1.0, 0.0, 0.0, 1.0);

fn tangency_check(f_t: f64, scale: f64) -> Result<()> {
    if f_t.abs() < 1e-5 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::GuardTangency { ft: f_t });
    }
    Ok(())
}

/// State Jacobian of the map.
///
/// At `delta = 0` the Jacobian comes from the closed forms and the implicit
/// function theorem; for `delta > 0` it is a central finite difference with
/// step `max(1e-6, 1e-6 |x|)` on a tight-tolerance map.
pub fn jacobian_state(
    p: &SectionPoint,
    delta: f64,
    model: ModelForm,
    opts: &IntegratorOptions,
) -> Result<Matrix2<f64>> {
    validate_map_inputs(p, delta)?;
    if delta == 0.0 {
        return jacobian_state_analytic(p);
    }
    let tight = IntegratorOptions {
        rel_tol: opts.rel_tol.min(1e-12),
        abs_tol: opts.abs_tol.min(1e-12),
        store_dense: false,
        ..opts.clone()
    };
    let x = p.to_vector();
    let mut jac = Matrix2::zeros();
    for col in 0..2 {
        let h = 1e-6f64.max(1e-6 * x[col].abs());
        let mut xp = x;
        let mut xm = x;
        xp[col] += h;
        xm[col] -= h;
        let pp = poincare_map(&SectionPoint::from_vector(xp), delta, model, &tight)?;
        let pm = poincare_map(&SectionPoint::from_vector(xm), delta, model, &tight)?;
        let d = (pp.image.to_vector() - pm.image.to_vector()) / (2.0 * h);
        jac.set_column(col, &d);
    }
    Ok(jac)
}

fn jacobian_state_analytic(p: &SectionPoint) -> Result<Matrix2<f64>> {
    let (th, om) = (p.theta, p.omega);
    let t_hit = delta0_event_time(th, om)?;
    let scale = th.abs().max(om.abs()) * t_hit.cosh();
    let f_t = guard_f_t(t_hit, th, om);
    tangency_check(f_t, scale)?;
    let pre = unperturbed_solution(t_hit, th, om);
    // (Theta, Theta_dot)_t = (Theta_dot, Theta) since Theta_ddot = Theta.
    let a_t = Vector2::new(pre.theta_dot, pre.theta);
    let (f_th, f_om) = guard_f_state(t_hit);
    let t_grad = Vector2::new(-f_th / f_t, -f_om / f_t);
    let (ch, sh) = (t_hit.cosh(), t_hit.sinh());
    let a_state = Matrix2::new(ch, sh, sh, ch);
    Ok(DELTA0 * (a_t * t_grad.transpose() + a_state))
}

fn require_on_family(p: &SectionPoint) -> Result<()> {
    let alpha = alpha_t2();
    let scale = p.theta.abs().max(p.omega.abs());
    if p.theta == 0.0 {
        return Err(Error::InvalidInput(
            "family operations need theta != 0".into(),
        ));
    }
    if (p.omega - alpha * p.theta).abs() > 1e-6 * scale.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "point ({}, {}) is not on the family omega = alpha(T2) * theta",
            p.theta, p.omega
        )));
    }
    Ok(())
}

/// Gradient of the flight time in the section coordinates at `delta = 0`,
/// on the family (where it scales as `1/theta`).
pub fn flight_time_state_gradient(p: &SectionPoint) -> Result<Vector2<f64>> {
    require_on_family(p)?;
    let t_hit = t2();
    let f_t = guard_f_t(t_hit, p.theta, p.omega);
    tangency_check(f_t, p.theta.abs() * t_hit.cosh())?;
    let (f_th, f_om) = guard_f_state(t_hit);
    Ok(Vector2::new(-f_th / f_t, -f_om / f_t))
}

/// Delta-derivative of the flight time at `delta = 0`, in the reported
/// functional form: the guard partials are evaluated at `t = T2`, which is
/// exact on the family and a near-family approximation elsewhere.
///
/// Errors when the denominator `F_t(T2, theta, omega)` vanishes.
pub fn flight_time_delta_derivative(p: &SectionPoint) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite("section point"));
    }
    let t_ref = t2();
    let f_t = guard_f_t(t_ref, p.theta, p.omega);
    let scale = p.theta.abs().max(p.omega.abs()) * t_ref.cosh();
    if f_t.abs() < 1e-5 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::TdeltaSingular {
            theta: p.theta,
            omega: p.omega,
        });
    }
    let v = variational(t_ref, p.theta, p.omega);
    Ok(-(v.f - 2.0 * v.h) / f_t)
}

/// Delta-derivative of the map at `delta = 0`, on or off the family.
///
/// Assembled from the flight-time derivative, the variational solution of the
/// flow and initial condition, and the delta-derivative of the reset.
pub fn map_delta_derivative(p: &SectionPoint) -> Result<Vector2<f64>> {
    validate_map_inputs(p, 0.0)?;
    let (th, om) = (p.theta, p.omega);
    let t_hit = delta0_event_time(th, om)?;
    let f_t = guard_f_t(t_hit, th, om);
    tangency_check(f_t, th.abs().max(om.abs()) * t_hit.cosh())?;
    let v = variational(t_hit, th, om);
    let t_delta = -(v.f - 2.0 * v.h) / f_t;
    let pre = unperturbed_solution(t_hit, th, om);
    let a_t = Vector2::new(pre.theta_dot, pre.theta);
    let a_delta = Vector2::new(v.h, v.h_dot);
    // Reset derivative at the pre-jump point: (0, -2 theta^2 omega).
    let reset_delta = Vector2::new(0.0, -2.0 * pre.theta * pre.theta * pre.theta_dot);
    Ok(DELTA0 * (a_t * t_delta + a_delta) + reset_delta)
}

/// Mixed state-delta derivative of the map at `delta = 0` on the family.
///
/// Full chain rule through the event time: the flight-time delta-derivative is
/// differentiated as `-F_delta(T(x), x) / F_t(T(x), x)` including the variation
/// of the crossing time itself. The resulting matrix agrees with the
/// finite-difference-in-delta of the state Jacobian; projections along the
/// family direction and against the adjoint eigenvector are shared with the
/// partial (frozen-time) form, so the bifurcation quantities are insensitive
/// to the distinction.
pub fn map_delta_state_derivative(p: &SectionPoint) -> Result<Matrix2<f64>> {
    require_on_family(p)?;
    let (th, om) = (p.theta, p.omega);
    let t_ref = t2();
    let f_t = guard_f_t(t_ref, th, om);
    tangency_check(f_t, th.abs() * t_ref.cosh())?;
    let f_tt = guard_f_tt(t_ref, th, om);
    let (f_th, f_om) = guard_f_state(t_ref);
    let (f_tth, f_tom) = guard_f_t_state(t_ref);
    let v = variational(t_ref, th, om);
    let f_delta = v.f - 2.0 * v.h;
    let f_delta_t = v.f_dot - 2.0 * v.h_dot;
    let f_delta_th = v.f_theta - 2.0 * v.h_theta;
    let f_delta_om = v.f_omega - 2.0 * v.h_omega;

    let t_grad = Vector2::new(-f_th / f_t, -f_om / f_t);
    let t_delta = -f_delta / f_t;
    // Gradient of -F_delta(T(x), x)/F_t(T(x), x): quotient rule in the state
    // slots plus the time-variation term through T(x).
    let ddt_t_delta = -f_delta_t / f_t + f_delta * f_tt / (f_t * f_t);
    let t_delta_grad = Vector2::new(
        (-f_delta_th * f_t + f_delta * f_tth) / (f_t * f_t),
        (-f_delta_om * f_t + f_delta * f_tom) / (f_t * f_t),
    ) + ddt_t_delta * t_grad;

    let pre = unperturbed_solution(t_ref, th, om);
    let a = Vector2::new(pre.theta, pre.theta_dot);
    let a_t = Vector2::new(pre.theta_dot, pre.theta);
    let a_tt = Vector2::new(pre.theta, pre.theta_dot);
    let (ch, sh) = (t_ref.cosh(), t_ref.sinh());
    let a_state = Matrix2::new(ch, sh, sh, ch);
    let a_t_state = Matrix2::new(sh, ch, ch, sh);
    let a_delta_t = Vector2::new(v.h_dot, v.h_ddot);
    let a_delta_state = Matrix2::new(v.h_theta, v.h_omega, v.h_dot_theta, v.h_dot_omega);

    let reset_delta_state = Matrix2::new(0.0, 0.0, -4.0 * a.x * a.y, -2.0 * a.x * a.x);
    let state_flow_deriv = a_t * t_grad.transpose() + a_state;

    Ok(DELTA0
        * ((a_tt * t_grad.transpose() + a_t_state) * t_delta
            + a_t * t_delta_grad.transpose()
            + (a_delta_t * t_grad.transpose() + a_delta_state))
        + reset_delta_state * state_flow_deriv)
}

/// All first derivatives at a point, bundled.
pub fn derivatives(
    p: &SectionPoint,
    delta: f64,
    model: ModelForm,
    opts: &IntegratorOptions,
) -> Result<MapDerivatives> {
    validate_map_inputs(p, delta)?;
    if delta == 0.0 {
        let on_family = require_on_family(p).is_ok();
        return Ok(MapDerivatives {
            dp_dstate: jacobian_state_analytic(p)?,
            dt_dstate: if on_family {
                Some(flight_time_state_gradient(p)?)
            } else {
                None
            },
            dp_ddelta: Some(map_delta_derivative(p)?),
            dt_ddelta: Some(flight_time_delta_derivative(p)?),
            dpdelta_dstate: if on_family {
                Some(map_delta_state_derivative(p)?)
            } else {
                None
            },
            method: DerivativeMethod::AnalyticDelta0,
        });
    }
    Ok(MapDerivatives {
        dp_dstate: jacobian_state(p, delta, model, opts)?,
        dt_dstate: None,
        dp_ddelta: None,
        dt_ddelta: None,
        dpdelta_dstate: None,
        method: DerivativeMethod::FiniteDifference,
    })
}

/// Reference family point used throughout: `(theta, alpha(T2) * theta)`.
pub fn family_point(theta: f64) -> SectionPoint {
    SectionPoint::new(theta, alpha_t2() * theta)
}

/// Scaled-model start state for a section point (initial condition of the
/// expanded flow between heelstrikes).
pub fn section_initial_state(p: &SectionPoint, delta: f64) -> State4 {
    State4::new(
        p.theta,
        p.omega,
        2.0 * p.theta,
        2.0 * delta * p.theta * p.theta * p.omega,
    )
}

/// Closed-form flight time of the unperturbed map (exposed for oracles).
pub fn flight_time_delta0(p: &SectionPoint) -> Result<f64> {
    delta0_event_time(p.theta, p.omega)
}

pub use closedform::FamilyPoint;
