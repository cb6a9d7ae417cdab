//! Implementations of the subcommands: thin orchestration over the library.

use serde::Serialize;

use biped_core::closedform::{alpha, step_period_roots_in};
use biped_core::continuation::{
    continue_branch, floquet_slope, newton_fixed_point, simulate_gait, Branch,
    ContinuationOptions, FloquetFit,
};
use biped_core::dynamics::{ModelForm, State4};
use biped_core::error::{Error, Result};
use biped_core::integrate::{integrate_fixed_horizon, IntegratorOptions};
use biped_core::melnikov::{build_report, AnalysisOptions};
use biped_core::poincare::{family_point, poincare_map, section_initial_state, SectionPoint};

use crate::config::{resolve, Resolved};
use crate::output::{csv_from_result, emit, fmt_f64, report_json, CsvTable};
use crate::{CommonArgs, FormatArg, ModelArg};

const DEFAULT_GRID: [f64; 7] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 2e-2, 5e-2];

fn single_model(model: ModelArg) -> Result<ModelForm> {
    match model {
        ModelArg::Full => Ok(ModelForm::Full),
        ModelArg::Expanded => Ok(ModelForm::Expanded),
        ModelArg::Both => Err(Error::InvalidInput(
            "this command takes --model full or --model expanded".into(),
        )),
    }
}

fn integrator_options(cfg: &Resolved) -> IntegratorOptions {
    IntegratorOptions::default().scaled_tol(cfg.tol_scale)
}

fn continuation_options(cfg: &Resolved) -> ContinuationOptions {
    ContinuationOptions {
        integrator: IntegratorOptions::tight().scaled_tol(cfg.tol_scale),
        ..Default::default()
    }
}

fn walking_theta0() -> Result<f64> {
    let report = build_report(&AnalysisOptions::default())?;
    report.theta0.ok_or_else(|| {
        Error::InvalidInput("no cycle-selection root found for the walker".into())
    })
}

fn emit_result<T: Serialize>(
    cfg: &Resolved,
    common: &CommonArgs,
    command: &str,
    result: &T,
) -> Result<()> {
    let content = match cfg.format {
        FormatArg::Json => report_json(command, &cfg.config_echo(), result),
        FormatArg::Csv => csv_from_result(result),
    };
    emit(&common.out, &content)
}

// ---------------------------------------------------------------------------
// roots
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RootEntry {
    period: f64,
    residual: f64,
    alpha: f64,
    /// The root near pi corresponds to a degenerate, non-anthropomorphic gait.
    anthropomorphic: bool,
}

#[derive(Serialize)]
struct RootsResult {
    interval: [f64; 2],
    roots: Vec<RootEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_t2: Option<f64>,
}

pub fn roots(common: CommonArgs, interval: Option<Vec<f64>>) -> Result<()> {
    let cfg = {
        let mut cfg = resolve(&common, FormatArg::Json)?;
        if let Some(iv) = interval {
            cfg.interval = Some([iv[0], iv[1]]);
        }
        cfg
    };
    let [lo, hi] = cfg
        .interval
        .unwrap_or([0.1, 2.0 * std::f64::consts::PI]);
    let periods = step_period_roots_in(lo, hi)?;
    let entries: Vec<RootEntry> = periods
        .iter()
        .map(|&t| RootEntry {
            period: t,
            residual: biped_core::closedform::step_period_residual(t),
            alpha: alpha(t).unwrap_or(f64::NAN),
            anthropomorphic: (t - std::f64::consts::PI).abs() > 1e-6,
        })
        .collect();
    let (t1, t2, alpha_t2) = if entries.len() == 2 {
        (
            Some(entries[0].period),
            Some(entries[1].period),
            Some(entries[1].alpha),
        )
    } else {
        (None, None, None)
    };
    let result = RootsResult {
        interval: [lo, hi],
        roots: entries,
        t1,
        t2,
        alpha_t2,
    };
    emit_result(&cfg, &common, "roots", &result)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub fn verify(common: CommonArgs, theta0_bracket: Option<Vec<f64>>) -> Result<()> {
    let cfg = {
        let mut cfg = resolve(&common, FormatArg::Json)?;
        if let Some(br) = theta0_bracket {
            cfg.theta0_bracket = Some([br[0], br[1]]);
        }
        cfg
    };
    let mut opts = AnalysisOptions::default();
    if let Some([lo, hi]) = cfg.theta0_bracket {
        opts.theta0_bracket = (lo, hi);
    }
    let report = build_report(&opts)?;
    emit_result(&cfg, &common, "verify", &report)
}

// ---------------------------------------------------------------------------
// map
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MapResult {
    theta: f64,
    omega: f64,
    delta: f64,
    image: SectionPoint,
    time_of_flight: f64,
    pre_jump_state: State4,
    n_rejected_grazings: usize,
}

pub fn map(common: CommonArgs, theta: f64, omega: f64, delta: f64) -> Result<()> {
    let cfg = resolve(&common, FormatArg::Json)?;
    let model = single_model(cfg.model)?;
    let opts = integrator_options(&cfg);
    let step = poincare_map(&SectionPoint::new(theta, omega), delta, model, &opts)
        .map_err(|e| e.in_stage("map"))?;
    let result = MapResult {
        theta,
        omega,
        delta,
        image: step.image,
        time_of_flight: step.time_of_flight,
        pre_jump_state: step.pre_jump_state,
        n_rejected_grazings: step.n_rejected_grazings,
    };
    emit_result(&cfg, &common, "map", &result)
}

// ---------------------------------------------------------------------------
// continue
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BranchReport {
    model: String,
    branch: Branch,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiplier_fit: Option<FloquetFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extrapolated_theta: Option<f64>,
}

#[derive(Serialize)]
struct ContinueResult {
    seed_theta: f64,
    grid: Vec<f64>,
    branches: Vec<BranchReport>,
}

fn run_branch(
    grid: &[f64],
    seed: &SectionPoint,
    model: ModelForm,
    opts: &ContinuationOptions,
) -> Result<BranchReport> {
    let branch = continue_branch(grid, seed, model, opts)?;
    let multiplier_fit = floquet_slope(&branch.points).ok();
    let extrapolated_theta = branch.extrapolate_to_zero().map(|p| p.theta);
    Ok(BranchReport {
        model: model.to_string(),
        branch,
        multiplier_fit,
        extrapolated_theta,
    })
}

/// Worker-thread cap for side-by-side branch sweeps.
fn seed_threads() -> Result<usize> {
    match std::env::var("BIPED_SEED_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| Error::InvalidInput(format!("BIPED_SEED_THREADS: bad value '{v}'"))),
        Err(_) => Ok(2),
    }
}

pub fn continuation(common: CommonArgs, grid: Option<Vec<f64>>) -> Result<()> {
    let cfg = {
        let mut cfg = resolve(&common, FormatArg::Csv)?;
        if grid.is_some() {
            cfg.grid = grid;
        }
        cfg
    };
    let grid = cfg.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let opts = continuation_options(&cfg);
    let theta0 = walking_theta0().map_err(|e| e.in_stage("verify"))?;
    let seed = family_point(theta0);

    let models: Vec<ModelForm> = match cfg.model {
        ModelArg::Both => vec![ModelForm::Expanded, ModelForm::Full],
        m => vec![single_model(m)?],
    };

    let branches: Vec<BranchReport> = if models.len() > 1 && seed_threads()? > 1 {
        // Independent sweeps, one worker per model, capped by BIPED_SEED_THREADS.
        std::thread::scope(|scope| {
            let handles: Vec<_> = models
                .iter()
                .map(|&model| {
                    let grid = &grid;
                    let opts = &opts;
                    scope.spawn(move || run_branch(grid, &seed, model, opts))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("branch worker"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        models
            .into_iter()
            .map(|model| run_branch(&grid, &seed, model, &opts))
            .collect::<Result<Vec<_>>>()?
    };

    match cfg.format {
        FormatArg::Json => {
            let result = ContinueResult {
                seed_theta: theta0,
                grid,
                branches,
            };
            emit_result(&cfg, &common, "continue", &result)
        }
        FormatArg::Csv => {
            let mut table = CsvTable::new(
                "model,delta,theta,omega,period,rho_delta,rho_transverse,multipliers_complex,newton_iters,residual",
            );
            for report in &branches {
                for p in &report.branch.points {
                    table.row(&[
                        report.model.clone(),
                        fmt_f64(p.delta),
                        fmt_f64(p.fixed_point.theta),
                        fmt_f64(p.fixed_point.omega),
                        fmt_f64(p.period),
                        fmt_f64(p.rho_delta),
                        fmt_f64(p.rho_transverse),
                        p.multipliers_complex.to_string(),
                        p.newton_iters.to_string(),
                        fmt_f64(p.residual),
                    ]);
                }
            }
            emit(&common.out, &table.finish())
        }
    }
}

// ---------------------------------------------------------------------------
// gait
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GaitSummary {
    delta: f64,
    requested_steps: usize,
    steps_completed: usize,
    fell: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    fall_reason: Option<String>,
    fixed_point: SectionPoint,
    start: SectionPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contraction_estimate: Option<f64>,
    mean_period: f64,
}

pub fn gait(common: CommonArgs, delta: f64, n_steps: usize, perturbation: f64) -> Result<()> {
    let cfg = resolve(&common, FormatArg::Csv)?;
    let model = single_model(cfg.model)?;
    let copts = continuation_options(&cfg);
    let theta0 = walking_theta0().map_err(|e| e.in_stage("verify"))?;

    // Base point: the continued fixed point for delta past the degenerate
    // floor, the family point otherwise.
    let (base, radius) = if delta >= copts.delta_min {
        let bp = newton_fixed_point(delta, &family_point(theta0), model, &copts)
            .map_err(|e| e.in_stage("newton"))?;
        (bp.fixed_point, Some(bp.spectral_radius()))
    } else {
        (family_point(theta0), None)
    };
    let x0 = SectionPoint::new(base.theta + perturbation, base.omega);
    let trace = simulate_gait(delta, &x0, n_steps, model, &copts.integrator)
        .map_err(|e| e.in_stage("gait"))?;

    let mean_period = if trace.steps.is_empty() {
        f64::NAN
    } else {
        trace.steps.iter().map(|s| s.period).sum::<f64>() / trace.steps.len() as f64
    };
    let summary = GaitSummary {
        delta,
        requested_steps: n_steps,
        steps_completed: trace.steps.len(),
        fell: trace.fell,
        fall_reason: trace.fall_reason.clone(),
        fixed_point: base,
        start: x0,
        spectral_radius: radius,
        contraction_estimate: trace.contraction_estimate(5),
        mean_period,
    };

    let mut table = CsvTable::new("step,theta,omega,period,step_length,dist_prev");
    for s in &trace.steps {
        table.row(&[
            s.index.to_string(),
            fmt_f64(s.point.theta),
            fmt_f64(s.point.omega),
            fmt_f64(s.period),
            fmt_f64(s.step_length),
            fmt_f64(s.dist_prev),
        ]);
    }

    let summary_json = report_json("gait", &cfg.config_echo(), &summary);
    match (&common.out, cfg.format) {
        (_, FormatArg::Json) => {
            // JSON mode: a single document with both trace and summary.
            #[derive(Serialize)]
            struct Full<'a> {
                summary: &'a GaitSummary,
                trace: &'a biped_core::continuation::GaitTrace,
            }
            let content = report_json(
                "gait",
                &cfg.config_echo(),
                &Full {
                    summary: &summary,
                    trace: &trace,
                },
            );
            emit(&common.out, &content)
        }
        (Some(_), FormatArg::Csv) => {
            emit(&common.out, &table.finish())?;
            println!("{summary_json}");
            Ok(())
        }
        (None, FormatArg::Csv) => {
            emit(&None, &table.finish())?;
            eprintln!("{summary_json}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// traj
// ---------------------------------------------------------------------------

pub fn traj(
    common: CommonArgs,
    theta: f64,
    omega: f64,
    delta: f64,
    t_end: f64,
    samples: usize,
) -> Result<()> {
    let cfg = resolve(&common, FormatArg::Csv)?;
    let model = single_model(cfg.model)?;
    if samples < 2 {
        return Err(Error::InvalidInput("samples must be >= 2".into()));
    }
    let opts = IntegratorOptions {
        store_dense: true,
        ..integrator_options(&cfg)
    };
    let p = SectionPoint::new(theta, omega);
    type BoxedField = Box<dyn Fn(f64, &State4) -> State4>;
    // State and field in the variables of the chosen model; delta = 0 runs
    // the expanded limit in both cases.
    let (s0, field): (State4, BoxedField) = match model {
        ModelForm::Full if delta > 0.0 => {
            let r = delta.sqrt();
            let gamma = delta.powf(1.5);
            let theta_f = r * theta;
            let s0 = State4::new(
                theta_f,
                r * omega,
                2.0 * theta_f,
                (1.0 - (2.0 * theta_f).cos()) * r * omega,
            );
            let f = move |_t: f64, s: &State4| {
                biped_core::dynamics::eval_full_field(s, gamma)
                    .unwrap_or_else(|_| State4::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN))
            };
            (s0, Box::new(f))
        }
        _ => {
            let s0 = section_initial_state(&p, delta);
            let f = move |_t: f64, s: &State4| {
                biped_core::dynamics::eval_expanded_field(s, delta)
                    .unwrap_or_else(|_| State4::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN))
            };
            (s0, Box::new(f))
        }
    };
    let (_, dense) =
        integrate_fixed_horizon(&field, &s0, t_end, &opts).map_err(|e| e.in_stage("traj"))?;

    let mut table = CsvTable::new("t,theta,theta_dot,phi,phi_dot,guard_value");
    for k in 0..samples {
        let t = t_end * k as f64 / (samples - 1) as f64;
        let s = if t == 0.0 { s0 } else { dense.eval(t) };
        let (guard_value, _) = biped_core::dynamics::guard(&s);
        table.row(&[
            fmt_f64(t),
            fmt_f64(s.theta),
            fmt_f64(s.theta_dot),
            fmt_f64(s.phi),
            fmt_f64(s.phi_dot),
            fmt_f64(guard_value),
        ]);
    }
    emit(&common.out, &table.finish())
}
