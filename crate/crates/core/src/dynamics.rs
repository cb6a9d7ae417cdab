//! Vector fields and heelstrike resets for the compass walker.
//!
//! Two model forms are supported: the full nonlinear pendula at ground slope
//! `gamma`, and the expanded model in scaled variables where the slope enters
//! through the small parameter `delta` (`gamma = delta^{3/2}`). Remainder
//! terms beyond first order in `delta` are dropped from the expanded form;
//! the full model is the ground truth for `delta > 0` comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance (radians) on |phi - 2*theta| for applying a jump.
/// Event location resolves the guard well below this.
pub const GUARD_TOL: f64 = 1e-9;

/// Hybrid state: stance angle/velocity and inter-leg angle/velocity.
///
/// Angles are radians, time is normalized pendulum time. In the expanded
/// model the components read (Theta, Theta_dot, Phi, Phi_dot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State4 {
    pub theta: f64,
    pub theta_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl State4 {
    pub fn new(theta: f64, theta_dot: f64, phi: f64, phi_dot: f64) -> Self {
        Self {
            theta,
            theta_dot,
            phi,
            phi_dot,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta, self.theta_dot, self.phi, self.phi_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Componentwise scaling, useful for the variable change between models.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.theta * factor,
            self.theta_dot * factor,
            self.phi * factor,
            self.phi_dot * factor,
        )
    }
}

/// Slope parameter: `delta >= 0` with derived ground slope `gamma = delta^{3/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeParam {
    delta: f64,
}

impl SlopeParam {
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::NonFinite("delta"));
        }
        if delta < 0.0 {
            return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Ground slope in radians.
    pub fn gamma(&self) -> f64 {
        self.delta.powf(1.5)
    }
}

/// Which set of equations the heelstrike map is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelForm {
    /// Nonlinear pendula in original variables at slope `gamma = delta^{3/2}`.
    Full,
    /// First-order expansion in `delta`, scaled variables.
    Expanded,
}

impl std::fmt::Display for ModelForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelForm::Full => write!(f, "full"),
            ModelForm::Expanded => write!(f, "expanded"),
        }
    }
}

/// Right-hand side of the full model at ground slope `gamma`.
///
/// theta_ddot = sin(theta - gamma),
/// phi_ddot   = theta_ddot + theta_dot^2 sin(phi) - cos(theta - gamma) sin(phi).
pub fn eval_full_field(s: &State4, gamma: f64) -> Result<State4> {
    if !s.is_finite() || !gamma.is_finite() {
        return Err(Error::NonFinite("eval_full_field input"));
    }
    let theta_ddot = (s.theta - gamma).sin();
    let sin_phi = s.phi.sin();
    let phi_ddot = theta_ddot + s.theta_dot * s.theta_dot * sin_phi - (s.theta - gamma).cos() * sin_phi;
    Ok(State4::new(s.theta_dot, theta_ddot, s.phi_dot, phi_ddot))
}

/// Right-hand side of the expanded model at parameter `delta`.
///
/// Theta_ddot = Theta - delta - (1/6) delta Theta^3,
/// Phi_ddot   = Theta_ddot - Phi + delta Theta_dot^2 Phi
///              + (1/2) delta Theta^2 Phi + (1/6) delta Phi^3.
pub fn eval_expanded_field(s: &State4, delta: f64) -> Result<State4> {
    if !s.is_finite() || !delta.is_finite() {
        return Err(Error::NonFinite("eval_expanded_field input"));
    }
    if delta < 0.0 {
        return Err(Error::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    let th = s.theta;
    let ph = s.phi;
    let theta_ddot = th - delta - delta * th * th * th / 6.0;
    let phi_ddot = theta_ddot - ph
        + delta * s.theta_dot * s.theta_dot * ph
        + 0.5 * delta * th * th * ph
        + delta * ph * ph * ph / 6.0;
    Ok(State4::new(s.theta_dot, theta_ddot, s.phi_dot, phi_ddot))
}

fn check_guard(s: &State4) -> Result<()> {
    let residual = (s.phi - 2.0 * s.theta).abs();
    if residual > GUARD_TOL {
        return Err(Error::GuardViolated {
            residual,
            tol: GUARD_TOL,
        });
    }
    Ok(())
}

/// Heelstrike reset of the full model: the legs swap roles.
///
/// Requires the pre-impact state to lie on the switching surface
/// phi = 2*theta within [`GUARD_TOL`].
pub fn apply_jump_full(s: &State4) -> Result<State4> {
    if !s.is_finite() {
        return Err(Error::NonFinite("apply_jump_full input"));
    }
    check_guard(s)?;
    let c = (2.0 * s.theta).cos();
    Ok(State4::new(
        -s.theta,
        c * s.theta_dot,
        -2.0 * s.theta,
        (1.0 - c) * c * s.theta_dot,
    ))
}

/// Heelstrike reset of the expanded model, truncated at first order in `delta`.
///
/// Post-jump state is (-Theta, (1 - 2 delta Theta^2) Theta_dot, -2 Theta,
/// 2 delta Theta^2 Theta_dot); the fourth component keeps only the first-order
/// term, which is consistent with the model's own truncation error.
pub fn apply_jump_expanded(s: &State4, delta: f64) -> Result<State4> {
    if !s.is_finite() || !delta.is_finite() {
        return Err(Error::NonFinite("apply_jump_expanded input"));
    }
    check_guard(s)?;
    let th2 = s.theta * s.theta;
    Ok(State4::new(
        -s.theta,
        (1.0 - 2.0 * delta * th2) * s.theta_dot,
        -2.0 * s.theta,
        2.0 * delta * th2 * s.theta_dot,
    ))
}

/// Switching-surface function and its rate along the flow.
///
/// Returns (phi - 2*theta, phi_dot - 2*theta_dot). The rate is the time
/// derivative of the guard value along any trajectory through `s`.
pub fn guard(s: &State4) -> (f64, f64) {
    (s.phi - 2.0 * s.theta, s.phi_dot - 2.0 * s.theta_dot)
}
