//! Closed-form machinery for the unperturbed (`delta = 0`) walker.
//!
//! Everything here is analytic: the linear-model solution with post-jump
//! initial data, the fixed-point family slope `alpha(T)`, the step-period
//! equation and its roots, the guard function along the unperturbed flow and
//! its partials, and the delta-derivative solutions `h`, `f` of the
//! variational initial-value problem. The `h`/`f` expressions are held as a
//! small term table over the basis `e^{kt} t^p {1, cos mt, sin mt}` with
//! coefficients cubic in `(theta, omega)`, so time and state derivatives are
//! exact rather than differenced.

use std::sync::OnceLock;

use crate::dynamics::State4;
use crate::error::{Error, Result};
use crate::poincare::SectionPoint;
use crate::roots::{brent, scan_brackets};

/// One point of the delta = 0 fixed-point family `omega = alpha(T2) * theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyPoint {
    pub s: f64,
}

impl FamilyPoint {
    pub fn new(s: f64) -> Self {
        Self { s }
    }

    pub fn point(&self) -> SectionPoint {
        SectionPoint::new(self.s, alpha_t2() * self.s)
    }
}

/// The two step-period roots on (0, 2*pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPeriodRoots {
    /// Root near pi; does not correspond to an anthropomorphic gait.
    pub t1: f64,
    /// Root near 3.812; the symmetric walking gait analyzed throughout.
    pub t2: f64,
}

/// Solution of the unperturbed system from the post-jump initial condition
/// `(theta, omega, 2*theta, 0)`.
///
/// Returns `(Theta, Theta_dot, Phi, Phi_dot)` at time `t`.
pub fn unperturbed_solution(t: f64, theta: f64, omega: f64) -> State4 {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    let big_theta = theta * ch + omega * sh;
    let big_theta_dot = theta * sh + omega * ch;
    let phi = 2.0 * theta * c + 0.5 * theta * (ch - c) + 0.5 * omega * (sh - s);
    let phi_dot = -2.0 * theta * s + 0.5 * theta * (sh + s) + 0.5 * omega * (ch - c);
    State4::new(big_theta, big_theta_dot, phi, phi_dot)
}

/// Slope of the fixed-point family: `alpha(T) = -(1 + e^T) / (-1 + e^T)`.
pub fn alpha(t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "alpha(T) requires T > 0 (pole at T = 0), got {t}"
        )));
    }
    let e = t.exp();
    Ok(-(1.0 + e) / (e - 1.0))
}

/// Left side of the step-period equation.
pub fn step_period_residual(t: f64) -> f64 {
    let e = t.exp();
    -3.0 + 3.0 * e + 3.0 * (e - 1.0) * t.cos() + t.sin() + e * t.sin()
}

/// Roots of the step-period equation on an interval, by scan plus Brent.
pub fn step_period_roots_in(lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!(
            "root interval must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let mut roots = Vec::new();
    for (a, b) in scan_brackets(step_period_residual, lo, hi, 1e-2) {
        roots.push(brent(step_period_residual, a, b, 1e-15)?);
    }
    Ok(roots)
}

/// The two roots on the default interval (0.1, 2*pi), refined to machine level.
pub fn step_period_roots() -> Result<StepPeriodRoots> {
    let roots = step_period_roots_in(0.1, 2.0 * std::f64::consts::PI)?;
    if roots.len() != 2 {
        return Err(Error::BracketFailure(format!(
            "expected 2 step-period roots on (0.1, 2*pi), found {}",
            roots.len()
        )));
    }
    Ok(StepPeriodRoots {
        t1: roots[0],
        t2: roots[1],
    })
}

/// Cached symmetric-gait step period (the larger root).
pub fn t2() -> f64 {
    static T2: OnceLock<f64> = OnceLock::new();
    *T2.get_or_init(|| step_period_roots().expect("step-period roots").t2)
}

/// Cached family slope `alpha(T2)`.
pub fn alpha_t2() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| alpha(t2()).expect("alpha(T2)"))
}

/// Guard function along the unperturbed flow with family initial data
/// normalized to `theta = 1`: `F(t, 1, alpha(T2))`.
///
/// Its only root strictly inside (0, T2) is T2/2, the mid-step grazing.
pub fn symmetric_gait_residual(t: f64) -> f64 {
    guard_f(t, 1.0, alpha_t2())
}

/// Root of the symmetric-gait residual on (0.1, T2 - 0.1).
pub fn symmetric_gait_root() -> Result<f64> {
    let hi = t2() - 0.1;
    let brackets = scan_brackets(symmetric_gait_residual, 0.1, hi, 1e-3);
    match brackets.as_slice() {
        [(a, b)] => brent(symmetric_gait_residual, *a, *b, 1e-14),
        other => Err(Error::BracketFailure(format!(
            "expected exactly one symmetric-gait bracket, found {}",
            other.len()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Guard function F(t, theta, omega) = Phi - 2*Theta along the unperturbed flow
// and the partial derivatives used by the implicit-function computations.
// ---------------------------------------------------------------------------

/// `F(t, theta, omega) = Phi(t) - 2 Theta(t)` for the delta = 0 solution.
pub fn guard_f(t: f64, theta: f64, omega: f64) -> f64 {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    1.5 * theta * c - 0.5 * omega * s - 1.5 * theta * ch - 1.5 * omega * sh
}

/// Time derivative `F_t`.
pub fn guard_f_t(t: f64, theta: f64, omega: f64) -> f64 {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    -1.5 * theta * s - 0.5 * omega * c - 1.5 * theta * sh - 1.5 * omega * ch
}

/// Second time derivative `F_tt`.
pub fn guard_f_tt(t: f64, theta: f64, omega: f64) -> f64 {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    -1.5 * theta * c + 0.5 * omega * s - 1.5 * theta * ch - 1.5 * omega * sh
}

/// State gradient `(F_theta, F_omega)`.
pub fn guard_f_state(t: f64) -> (f64, f64) {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    (1.5 * (c - ch), -0.5 * s - 1.5 * sh)
}

/// Mixed partials `(F_t_theta, F_t_omega)`.
pub fn guard_f_t_state(t: f64) -> (f64, f64) {
    let (ch, sh) = (t.cosh(), t.sinh());
    let (c, s) = (t.cos(), t.sin());
    (-1.5 * (s + sh), -0.5 * c - 1.5 * ch)
}

/// First accepted heelstrike time of the unperturbed flow from `(theta, omega)`.
///
/// Mirrors the integrator's acceptance rule on the closed form: a guard root
/// counts only if `Theta < -0.25 |theta|` and the crossing is transversal;
/// the mid-step grazing (where `Theta = 0`) is skipped.
pub fn delta0_event_time(theta: f64, omega: f64) -> Result<f64> {
    let scale = theta.abs().max(omega.abs());
    if scale == 0.0 {
        return Err(Error::InvalidInput(
            "delta0_event_time requires a nonzero section point".into(),
        ));
    }
    let t_max = 3.0 * t2();
    let margin = 0.25 * theta.abs();
    let rate_min = 1e-3 * theta.abs();
    for (a, b) in scan_brackets(|t| guard_f(t, theta, omega), 1e-3, t_max, 5e-3) {
        let root = brent(|t| guard_f(t, theta, omega), a, b, 1e-15)?;
        let state = unperturbed_solution(root, theta, omega);
        if state.theta < -margin && guard_f_t(root, theta, omega).abs() >= rate_min {
            return Ok(root);
        }
    }
    Err(Error::NoHeelstrike {
        t_max,
        n_rejected: 0,
    })
}

// ---------------------------------------------------------------------------
// Variational solutions h(t), f(t): the delta-derivative of the flow with the
// delta-derivative of the initial condition, as explicit term tables.
// ---------------------------------------------------------------------------

/// All variational values and partials needed by the map-derivative assembly.
#[derive(Debug, Clone, Copy)]
pub struct Variational {
    pub h: f64,
    pub h_dot: f64,
    pub h_ddot: f64,
    pub f: f64,
    pub f_dot: f64,
    pub f_ddot: f64,
    pub h_theta: f64,
    pub h_omega: f64,
    pub h_dot_theta: f64,
    pub h_dot_omega: f64,
    pub f_theta: f64,
    pub f_omega: f64,
}

/// `(h, h_dot, h_ddot)` at `(t, theta, omega)`.
pub fn h_eval(t: f64, theta: f64, omega: f64) -> (f64, f64, f64) {
    let tab = tables();
    (
        tab.h.eval(t, theta, omega),
        tab.h_dot.eval(t, theta, omega),
        tab.h_ddot.eval(t, theta, omega),
    )
}

/// `(f, f_dot)` at `(t, theta, omega)`.
pub fn f_eval(t: f64, theta: f64, omega: f64) -> (f64, f64) {
    let tab = tables();
    (tab.f.eval(t, theta, omega), tab.f_dot.eval(t, theta, omega))
}

/// Full bundle of variational values and `(theta, omega)` partials.
pub fn variational(t: f64, theta: f64, omega: f64) -> Variational {
    let tab = tables();
    Variational {
        h: tab.h.eval(t, theta, omega),
        h_dot: tab.h_dot.eval(t, theta, omega),
        h_ddot: tab.h_ddot.eval(t, theta, omega),
        f: tab.f.eval(t, theta, omega),
        f_dot: tab.f_dot.eval(t, theta, omega),
        f_ddot: tab.f_ddot.eval(t, theta, omega),
        h_theta: tab.h.eval_dtheta(t, theta, omega),
        h_omega: tab.h.eval_domega(t, theta, omega),
        h_dot_theta: tab.h_dot.eval_dtheta(t, theta, omega),
        h_dot_omega: tab.h_dot.eval_domega(t, theta, omega),
        f_theta: tab.f.eval_dtheta(t, theta, omega),
        f_omega: tab.f.eval_domega(t, theta, omega),
    }
}

/// Coefficients `[1, theta^3, theta^2 omega, theta omega^2, omega^3]` of a
/// series at fixed `t` (the solutions are constant-plus-cubic in the initial
/// data).
pub fn h_coeffs_at(t: f64) -> [f64; 5] {
    tables().h.coeffs_at(t)
}

/// Same extraction for `f`.
pub fn f_coeffs_at(t: f64) -> [f64; 5] {
    tables().f.coeffs_at(t)
}

#[cfg(test)]
pub(crate) fn h_dot_coeffs_at(t: f64) -> [f64; 5] {
    tables().h_dot.coeffs_at(t)
}

#[cfg(test)]
pub(crate) fn h_ddot_coeffs_at(t: f64) -> [f64; 5] {
    tables().h_ddot.coeffs_at(t)
}

#[derive(Clone, Copy, PartialEq)]
enum Trig {
    One,
    Cos(f64),
    Sin(f64),
}

/// One basis term: `poly(theta, omega) * e^{k t} * t^p * trig(m t)`, with the
/// polynomial stored as `[1, theta^3, theta^2 omega, theta omega^2, omega^3]`
/// coefficients.
#[derive(Clone, Copy)]
struct Term {
    coeff: [f64; 5],
    k: f64,
    p: u8,
    trig: Trig,
}

impl Term {
    fn basis(&self, t: f64) -> f64 {
        let mut v = (self.k * t).exp();
        if self.p == 1 {
            v *= t;
        }
        match self.trig {
            Trig::One => v,
            Trig::Cos(m) => v * (m * t).cos(),
            Trig::Sin(m) => v * (m * t).sin(),
        }
    }
}

#[derive(Clone)]
struct Series {
    terms: Vec<Term>,
}

impl Series {
    fn eval_with<C: Fn(&[f64; 5]) -> f64>(&self, t: f64, poly: C) -> f64 {
        self.terms.iter().map(|term| poly(&term.coeff) * term.basis(t)).sum()
    }

    fn eval(&self, t: f64, theta: f64, omega: f64) -> f64 {
        let (t3, t2o, to2, o3) = monomials(theta, omega);
        self.eval_with(t, |c| c[0] + c[1] * t3 + c[2] * t2o + c[3] * to2 + c[4] * o3)
    }

    fn eval_dtheta(&self, t: f64, theta: f64, omega: f64) -> f64 {
        self.eval_with(t, |c| {
            3.0 * c[1] * theta * theta + 2.0 * c[2] * theta * omega + c[3] * omega * omega
        })
    }

    fn eval_domega(&self, t: f64, theta: f64, omega: f64) -> f64 {
        self.eval_with(t, |c| {
            c[2] * theta * theta + 2.0 * c[3] * theta * omega + 3.0 * c[4] * omega * omega
        })
    }

    fn coeffs_at(&self, t: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        for term in &self.terms {
            let b = term.basis(t);
            for (o, c) in out.iter_mut().zip(term.coeff) {
                *o += c * b;
            }
        }
        out
    }

    /// Exact time derivative: the basis is closed under d/dt.
    fn deriv(&self) -> Series {
        let mut terms = Vec::with_capacity(self.terms.len() * 2);
        for term in &self.terms {
            if term.k != 0.0 {
                terms.push(Term { coeff: scale(term.coeff, term.k), ..*term });
            }
            if term.p == 1 {
                terms.push(Term { p: 0, ..*term });
            }
            match term.trig {
                Trig::One => {}
                Trig::Cos(m) => terms.push(Term {
                    coeff: scale(term.coeff, -m),
                    trig: Trig::Sin(m),
                    ..*term
                }),
                Trig::Sin(m) => terms.push(Term {
                    coeff: scale(term.coeff, m),
                    trig: Trig::Cos(m),
                    ..*term
                }),
            }
        }
        Series { terms }
    }
}

fn monomials(theta: f64, omega: f64) -> (f64, f64, f64, f64) {
    (
        theta * theta * theta,
        theta * theta * omega,
        theta * omega * omega,
        omega * omega * omega,
    )
}

fn scale(c: [f64; 5], s: f64) -> [f64; 5] {
    [c[0] * s, c[1] * s, c[2] * s, c[3] * s, c[4] * s]
}

struct Tables {
    h: Series,
    h_dot: Series,
    h_ddot: Series,
    f: Series,
    f_dot: Series,
    f_ddot: Series,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let h = build_h();
        let h_dot = h.deriv();
        let h_ddot = h_dot.deriv();
        let f = build_f();
        let f_dot = f.deriv();
        let f_ddot = f_dot.deriv();
        Tables { h, h_dot, h_ddot, f, f_dot, f_ddot }
    })
}

fn term(coeff: [f64; 5], div: f64, k: f64, p: u8, trig: Trig) -> Term {
    Term {
        coeff: scale(coeff, 1.0 / div),
        k,
        p,
        trig,
    }
}

/// h(t) = 1 + (1/384) [ (omega-theta)^3 e^{-3t} - (omega+theta)^3 e^{3t}
///        + e^{-t} (C0 + C1 t) + e^{t} (D0 + D1 t) ],
/// the exponential groups read off the closed-form solution.
fn build_h() -> Series {
    const D: f64 = 384.0;
    let terms = vec![
        term([1.0, 0.0, 0.0, 0.0, 0.0], 1.0, 0.0, 0, Trig::One),
        // (omega - theta)^3
        term([0.0, -1.0, 3.0, -3.0, 1.0], D, -3.0, 0, Trig::One),
        // -(omega + theta)^3
        term([0.0, -1.0, -3.0, -3.0, -1.0], D, 3.0, 0, Trig::One),
        // e^{-t}: -192 + 9 w^3 + 3 w^2 th - 21 w th^2 + th^3
        term([-192.0, 1.0, -21.0, 3.0, 9.0], D, -1.0, 0, Trig::One),
        // e^{-t} t: 12 (w^3 - w^2 th - w th^2 + th^3)
        term([0.0, 12.0, -12.0, -12.0, 12.0], D, -1.0, 1, Trig::One),
        // e^{t}: -192 - 9 w^3 + 3 w^2 th + 21 w th^2 + th^3
        term([-192.0, 1.0, 21.0, 3.0, -9.0], D, 1.0, 0, Trig::One),
        // e^{t} t: 12 (w^3 + w^2 th - w th^2 - th^3)
        term([0.0, -12.0, -12.0, 12.0, 12.0], D, 1.0, 1, Trig::One),
    ];
    Series { terms }
}

/// f(t) as the same kind of table, transcribed group by group from the
/// closed-form solution (overall factor 1/7680, exponentials folded by the
/// leading e^{-3t}).
fn build_f() -> Series {
    const D: f64 = 7680.0;
    let terms = vec![
        // --- no trig ---
        term([-1920.0, 0.0, 0.0, 0.0, 0.0], D, -1.0, 0, Trig::One),
        term([-1920.0, 0.0, 0.0, 0.0, 0.0], D, 1.0, 0, Trig::One),
        term([0.0, 56.0, -168.0, 168.0, -56.0], D, -3.0, 0, Trig::One),
        term([0.0, 580.0, -780.0, 60.0, 60.0], D, -1.0, 0, Trig::One),
        term([0.0, 580.0, 780.0, 60.0, -60.0], D, 1.0, 0, Trig::One),
        term([0.0, 56.0, 168.0, 168.0, 56.0], D, 3.0, 0, Trig::One),
        term([0.0, 120.0, -120.0, -120.0, 120.0], D, -1.0, 1, Trig::One),
        term([0.0, -120.0, -120.0, 120.0, 120.0], D, 1.0, 1, Trig::One),
        // --- cos t ---
        // -195 (omega - 3 theta)(omega - theta)^2 = -195 w^3 + 975 w^2 th - 1365 w th^2 + 585 th^3
        term([0.0, 585.0, -1365.0, 975.0, -195.0], D, -2.0, 0, Trig::Cos(1.0)),
        // 195 (omega + theta)^2 (omega + 3 theta)
        term([0.0, 585.0, 1365.0, 975.0, 195.0], D, 2.0, 0, Trig::Cos(1.0)),
        term([3840.0, -2091.0, 0.0, -2763.0, 0.0], D, 0.0, 0, Trig::Cos(1.0)),
        term([0.0, 0.0, 180.0, 0.0, 420.0], D, 0.0, 1, Trig::Cos(1.0)),
        // --- cos 2t ---
        term([0.0, -108.0, -36.0, 156.0, -12.0], D, -1.0, 0, Trig::Cos(2.0)),
        term([0.0, -108.0, 36.0, 156.0, 12.0], D, 1.0, 0, Trig::Cos(2.0)),
        // --- cos 3t ---
        term([0.0, -135.0, 0.0, 45.0, 0.0], D, 0.0, 0, Trig::Cos(3.0)),
        // --- sin t ---
        term([0.0, -585.0, 975.0, -195.0, -195.0], D, -2.0, 0, Trig::Sin(1.0)),
        term([0.0, 0.0, 3813.0, 0.0, -1179.0], D, 0.0, 0, Trig::Sin(1.0)),
        term([0.0, 540.0, 0.0, 1260.0, 0.0], D, 0.0, 1, Trig::Sin(1.0)),
        term([0.0, 585.0, 975.0, 195.0, -195.0], D, 2.0, 0, Trig::Sin(1.0)),
        // --- sin 2t ---
        term([0.0, -216.0, 288.0, -48.0, -24.0], D, -1.0, 0, Trig::Sin(2.0)),
        term([0.0, 216.0, 288.0, 48.0, -24.0], D, 1.0, 0, Trig::Sin(2.0)),
        // --- sin 3t ---
        term([0.0, 0.0, 135.0, 0.0, -5.0], D, 0.0, 0, Trig::Sin(3.0)),
    ];
    Series { terms }
}
