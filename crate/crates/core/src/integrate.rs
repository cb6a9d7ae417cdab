//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) with
//! continuous output and heelstrike event location.
//!
//! Events are found by scanning the guard `phi - 2*theta` on the dense output
//! of each accepted step and refining brackets with Brent's method. A guard
//! crossing only counts as a heelstrike if the stance angle has swung past
//! `theta_event_max` and the crossing is transversal; crossings that fail the
//! rule (the mid-step graze where the legs merely line up) are counted and
//! skipped.

use serde::{Deserialize, Serialize};

use crate::dynamics::{guard, State4};
use crate::error::{Error, Result};
use crate::roots::brent;

/// Tolerances and event-acceptance knobs for one integration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Time tolerance of the located event.
    pub event_tol: f64,
    /// Minimum |guard rate| for an accepted event. `None`: 1e-3 * |Theta(0)|.
    pub grazing_rate_min: Option<f64>,
    /// Maximum stance angle at an accepted event. `None`: -0.25 * |Theta(0)|.
    pub theta_event_max: Option<f64>,
    /// Integration horizon for the event search. `None`: 3 * T2.
    pub t_max: Option<f64>,
    /// Keep the dense trajectory in the result.
    pub store_dense: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.1,
            event_tol: 1e-12,
            grazing_rate_min: None,
            theta_event_max: None,
            t_max: None,
            store_dense: false,
        }
    }
}

impl IntegratorOptions {
    /// Same options with rel/abs tolerances multiplied by `factor`.
    pub fn scaled_tol(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..self.clone()
        }
    }

    /// Tight-tolerance variant used under finite differencing.
    pub fn tight() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.event_tol > 0.0
            && self.t_max.is_none_or(|t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "integrator tolerances and horizons must be positive".into(),
            ))
        }
    }
}

/// Result of an event search.
#[derive(Debug, Clone)]
pub struct EventOutcome {
    pub t_event: f64,
    pub state_at_event: State4,
    pub n_rejected_grazings: usize,
    pub dense: Option<DenseOutput>,
}

/// Piecewise-polynomial trajectory from the accepted steps.
#[derive(Debug, Clone, Default)]
pub struct DenseOutput {
    segments: Vec<Segment>,
}

impl DenseOutput {
    /// Interpolated state at `t`, clamped to the covered interval.
    pub fn eval(&self, t: f64) -> State4 {
        debug_assert!(!self.segments.is_empty());
        let idx = match self
            .segments
            .binary_search_by(|s| s.t0.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.segments[idx].eval(t)
    }

    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t0 + s.h)
    }
}

/// Dense-output coefficients of one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    rcont: [[f64; 4]; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> State4 {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - theta;
        let mut out = [0.0; 4];
        for i in 0..4 {
            let r = &self.rcont;
            out[i] = r[0][i]
                + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        State4::from_array(out)
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Error weights: 5th-order minus embedded 4th-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the 5th-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const MAX_STEPS: usize = 10_000_000;

struct Stepper<'a, F> {
    field: &'a F,
    t: f64,
    y: [f64; 4],
    k1: [f64; 4],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
}

struct AcceptedStep {
    t0: f64,
    t1: f64,
    y1: [f64; 4],
    segment: Segment,
}

impl<'a, F: Fn(f64, &State4) -> State4> Stepper<'a, F> {
    fn new(field: &'a F, t0: f64, y0: &State4, opts: &IntegratorOptions) -> Result<Self> {
        if !y0.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        let k1 = field(t0, y0).as_array();
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field at initial state"));
        }
        Ok(Self {
            field,
            t: t0,
            y: y0.as_array(),
            k1,
            h: opts.max_step.min(1e-2),
            rel_tol: opts.rel_tol,
            abs_tol: opts.abs_tol,
            max_step: opts.max_step,
        })
    }

    /// One accepted step, at most `h_limit` past the current time.
    fn step(&mut self, h_limit: f64) -> Result<AcceptedStep> {
        let mut h = self.h.min(h_limit).min(self.max_step);
        for _ in 0..MAX_STEPS {
            if h < 16.0 * f64::EPSILON * (1.0 + self.t.abs()) {
                return Err(Error::StepUnderflow { t: self.t });
            }
            let mut k = [[0.0; 4]; 7];
            k[0] = self.k1;
            for stage in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage][j];
                    if a != 0.0 {
                        for i in 0..4 {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[stage] = (self.field)(self.t + C[stage] * h, &State4::from_array(ys)).as_array();
            }
            // Stage 7 is evaluated at y1 (FSAL), so k[6] is the new derivative
            // and the 5th-order solution uses row A[6].
            let mut y1 = self.y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = A[6][j];
                if b != 0.0 {
                    for i in 0..4 {
                        y1[i] += h * b * kj[i];
                    }
                }
            }
            k[6] = (self.field)(self.t + h, &State4::from_array(y1)).as_array();

            let mut err_sq = 0.0;
            for i in 0..4 {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= h;
                let scale = self.abs_tol + self.rel_tol * self.y[i].abs().max(y1[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / 4.0).sqrt();

            if !err.is_finite() {
                h *= 0.1;
                continue;
            }
            if err <= 1.0 {
                let segment = self.dense_segment(h, &k, &y1);
                let t0 = self.t;
                self.t += h;
                self.y = y1;
                self.k1 = k[6];
                let scale = SAFETY * err.max(1e-16).powf(-0.2);
                self.h = (h * scale.clamp(MIN_SCALE, MAX_SCALE)).min(self.max_step);
                return Ok(AcceptedStep {
                    t0,
                    t1: self.t,
                    y1,
                    segment,
                });
            }
            let scale = SAFETY * err.powf(-0.2);
            h *= scale.clamp(MIN_SCALE, 1.0);
        }
        Err(Error::StepUnderflow { t: self.t })
    }

    fn dense_segment(&self, h: f64, k: &[[f64; 4]; 7], y1: &[f64; 4]) -> Segment {
        let mut rcont = [[0.0; 4]; 5];
        for i in 0..4 {
            let ydiff = y1[i] - self.y[i];
            let bspl = h * k[0][i] - ydiff;
            rcont[0][i] = self.y[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k[6][i] - bspl;
            let mut dsum = 0.0;
            for (j, kj) in k.iter().enumerate() {
                dsum += D[j] * kj[i];
            }
            rcont[4][i] = h * dsum;
        }
        Segment {
            t0: self.t,
            h,
            rcont,
        }
    }
}

/// Integrate to a fixed horizon. Returns the final state and the dense
/// trajectory over `[0, t_end]`.
pub fn integrate_fixed_horizon<F: Fn(f64, &State4) -> State4>(
    field: &F,
    s0: &State4,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<(State4, DenseOutput)> {
    opts.validate()?;
    if t_end < 0.0 {
        return Err(Error::InvalidInput(format!(
            "t_end must be >= 0, got {t_end}"
        )));
    }
    if t_end == 0.0 {
        return Ok((*s0, DenseOutput::default()));
    }
    let mut stepper = Stepper::new(field, 0.0, s0, opts)?;
    let mut dense = DenseOutput::default();
    while stepper.t < t_end {
        let remaining = t_end - stepper.t;
        if remaining <= 4.0 * f64::EPSILON * (1.0 + t_end.abs()) {
            break;
        }
        let step = stepper.step(remaining)?;
        dense.segments.push(step.segment);
        if !step.y1.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("integration state"));
        }
    }
    Ok((State4::from_array(stepper.y), dense))
}

/// Integrate until the first accepted heelstrike.
///
/// The initial state may sit exactly on the guard (post-jump states do); the
/// crossing search arms once the guard value has left zero.
pub fn integrate_to_heelstrike<F: Fn(f64, &State4) -> State4>(
    field: &F,
    s0: &State4,
    opts: &IntegratorOptions,
) -> Result<EventOutcome> {
    opts.validate()?;
    let t_max = opts.t_max.unwrap_or_else(|| 3.0 * crate::closedform::t2());
    let theta0 = s0.theta.abs();
    let theta_event_max = opts.theta_event_max.unwrap_or(-0.25 * theta0);
    let rate_min = opts.grazing_rate_min.unwrap_or(1e-3 * theta0);
    let arm_threshold = 1e-10 * theta0.max(1.0);

    let mut stepper = Stepper::new(field, 0.0, s0, opts)?;
    let mut dense = DenseOutput::default();
    let mut n_rejected = 0usize;
    // (time, guard value) of the last armed probe.
    let mut prev: Option<(f64, f64)> = None;
    let mut armed = guard(s0).0.abs() > arm_threshold;
    if armed {
        prev = Some((0.0, guard(s0).0));
    }

    const PROBES: usize = 8;
    while stepper.t < t_max {
        let remaining = t_max - stepper.t;
        if remaining <= 4.0 * f64::EPSILON * (1.0 + t_max.abs()) {
            break;
        }
        let step = stepper.step(remaining)?;
        if !step.y1.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("integration state"));
        }
        let seg = &step.segment;
        for j in 1..=PROBES {
            let tp = step.t0 + (step.t1 - step.t0) * j as f64 / PROBES as f64;
            let g = guard(&seg.eval(tp)).0;
            if !armed {
                if g.abs() > arm_threshold {
                    armed = true;
                    prev = Some((tp, g));
                }
                continue;
            }
            let (t_prev, g_prev) = prev.expect("armed probe");
            if g_prev.signum() != g.signum() || g == 0.0 {
                // Re-check the sign on this segment: probe values straddling a
                // step boundary can disagree at interpolation-noise level.
                let lo = t_prev.max(step.t0);
                let g_lo = guard(&seg.eval(lo)).0;
                if g_lo == 0.0 || g == 0.0 || g_lo.signum() != g.signum() {
                    let t_star = brent(|t| guard(&seg.eval(t)).0, lo, tp, opts.event_tol)?;
                    let state = seg.eval(t_star);
                    let (_, rate) = guard(&state);
                    if state.theta < theta_event_max && rate.abs() >= rate_min {
                        if opts.store_dense {
                            dense.segments.push(step.segment.clone());
                        }
                        return Ok(EventOutcome {
                            t_event: t_star,
                            state_at_event: state,
                            n_rejected_grazings: n_rejected,
                            dense: opts.store_dense.then_some(dense),
                        });
                    }
                    n_rejected += 1;
                }
            }
            prev = Some((tp, g));
        }
        if opts.store_dense {
            dense.segments.push(step.segment);
        }
    }
    Err(Error::NoHeelstrike {
        t_max,
        n_rejected,
    })
}
