//! Verification engine for the bifurcation of the walking cycle: spectral
//! structure of the unperturbed map Jacobian, the necessary condition that
//! selects the cycle out of the fixed-point family, and the projected
//! perturbation slope that decides existence and stability for small slopes.
//!
//! The engine works against a [`FamilyMap`] so that synthetic test maps can
//! exercise the failure verdicts; the walker supplies its closed-form
//! derivatives through [`BipedFamily`].

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::closedform::{alpha_t2, step_period_roots};
use crate::dynamics::ModelForm;
use crate::error::{Error, Result};
use crate::integrate::IntegratorOptions;
use crate::poincare::{
    family_point, jacobian_state, map_delta_derivative, map_delta_state_derivative, SectionPoint,
};
use crate::roots::{brent, scan_brackets};

/// Spectral data of a 2x2 map Jacobian with eigenvalue 1.
///
/// `y`, `y_tilde` are right eigenvectors for eigenvalues 1 and `rho`;
/// `z`, `z_tilde` the corresponding left eigenvectors, normalized so that
/// `z^T y = z_tilde^T y_tilde = 1` with `z` of unit Euclidean norm and
/// nonpositive first component.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    pub rho: f64,
    pub y: Vector2<f64>,
    pub y_tilde: Vector2<f64>,
    pub z: Vector2<f64>,
    pub z_tilde: Vector2<f64>,
}

impl EigenStructure {
    /// Unit-norm direction of `y`; the projected-slope convention uses it.
    pub fn y_unit(&self) -> Vector2<f64> {
        self.y / self.y.norm()
    }
}

const EIG_ONE_TOL: f64 = 1e-6;

fn kernel_vector(a: &Matrix2<f64>) -> Vector2<f64> {
    // Rank-one kernel: take the larger row.
    let r1 = a[(0, 0)].abs().max(a[(0, 1)].abs());
    let r2 = a[(1, 0)].abs().max(a[(1, 1)].abs());
    if r1 >= r2 {
        Vector2::new(-a[(0, 1)], a[(0, 0)])
    } else {
        Vector2::new(a[(1, 1)], -a[(1, 0)])
    }
}

/// Eigenstructure of a map Jacobian on the fixed-point family.
///
/// Requires a real spectrum with one eigenvalue within `1e-6` of 1 and the
/// other separated from 1. The unit eigenvalue is deflated to exactly 1 for
/// the kernel extraction.
pub fn eigenstructure_2x2(m: &Matrix2<f64>) -> Result<EigenStructure> {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return Err(Error::EigenStructure(format!(
            "complex spectrum (discriminant {disc:e})"
        )));
    }
    let root = disc.sqrt();
    let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
    let (near_one, rho) = if (l1 - 1.0).abs() <= (l2 - 1.0).abs() {
        (l1, l2)
    } else {
        (l2, l1)
    };
    if (near_one - 1.0).abs() > EIG_ONE_TOL * scale {
        return Err(Error::EigenStructure(format!(
            "no unit eigenvalue: spectrum {{{l1}, {l2}}}"
        )));
    }
    if (rho - 1.0).abs() < EIG_ONE_TOL {
        return Err(Error::DegenerateRho { rho });
    }

    let ident = Matrix2::identity();
    // Deflate: use exactly 1 rather than the computed near-one eigenvalue.
    let y_raw = kernel_vector(&(m - ident));
    let z_raw = kernel_vector(&(m - ident).transpose());
    let y_tilde_raw = kernel_vector(&(m - rho * ident));
    let z_tilde_raw = kernel_vector(&(m - rho * ident).transpose());
    if y_raw.norm() < 1e-12 * scale || z_raw.norm() < 1e-12 * scale {
        return Err(Error::EigenStructure("defective unit eigenspace".into()));
    }

    let mut z = z_raw / z_raw.norm();
    if z.x > 0.0 || (z.x == 0.0 && z.y < 0.0) {
        z = -z;
    }
    let zy = z.dot(&y_raw);
    if zy.abs() < 1e-10 * y_raw.norm() {
        return Err(Error::EigenStructure(
            "left and right unit eigenvectors nearly orthogonal".into(),
        ));
    }
    let y = y_raw / zy;

    let y_tilde = y_tilde_raw / y_tilde_raw.norm();
    let zty = z_tilde_raw.dot(&y_tilde);
    if zty.abs() < 1e-10 * z_tilde_raw.norm() {
        return Err(Error::EigenStructure(
            "left and right eigenvectors for rho nearly orthogonal".into(),
        ));
    }
    let z_tilde = z_tilde_raw / zty;

    let eig = EigenStructure {
        rho,
        y,
        y_tilde,
        z,
        z_tilde,
    };
    // Consistency of the extraction.
    let res_y = (m * eig.y - eig.y).norm();
    let res_yt = (m * eig.y_tilde - rho * eig.y_tilde).norm();
    if res_y > 1e-8 * scale * eig.y.norm() || res_yt > 1e-8 * scale {
        return Err(Error::EigenStructure(format!(
            "eigenvector residuals too large: {res_y:e}, {res_yt:e}"
        )));
    }
    let ortho = eig
        .z
        .dot(&eig.y_tilde)
        .abs()
        .max(eig.z_tilde.dot(&eig.y).abs());
    if ortho > 1e-8 * eig.z_tilde.norm().max(1.0) {
        return Err(Error::EigenStructure(format!(
            "biorthogonality violated: {ortho:e}"
        )));
    }
    Ok(eig)
}

/// A one-parameter family of map fixed points with its first derivatives,
/// the inputs the verification engine needs.
pub trait FamilyMap {
    /// The family point at parameter `s`.
    fn point(&self, s: f64) -> SectionPoint;
    /// State Jacobian of the map at the family point.
    fn jacobian(&self, s: f64) -> Result<Matrix2<f64>>;
    /// Parameter-derivative of the map at the family point.
    fn map_delta(&self, s: f64) -> Result<Vector2<f64>>;
    /// Mixed parameter-state derivative at the family point.
    fn map_delta_state(&self, s: f64) -> Result<Matrix2<f64>>;
}

/// The walker's family `omega = alpha(T2) theta`, backed by the closed-form
/// derivative assembly.
#[derive(Debug, Clone, Copy, Default)]
pub struct BipedFamily;

impl FamilyMap for BipedFamily {
    fn point(&self, s: f64) -> SectionPoint {
        family_point(s)
    }

    fn jacobian(&self, s: f64) -> Result<Matrix2<f64>> {
        jacobian_state(
            &self.point(s),
            0.0,
            ModelForm::Expanded,
            &IntegratorOptions::default(),
        )
    }

    fn map_delta(&self, s: f64) -> Result<Vector2<f64>> {
        map_delta_derivative(&self.point(s))
    }

    fn map_delta_state(&self, s: f64) -> Result<Matrix2<f64>> {
        map_delta_state_derivative(&self.point(s))
    }
}

/// Maximum deviation of the adjoint eigenvector `z` across family samples.
///
/// The bifurcation theorem assumes `z` does not depend on the family
/// parameter; for the walker this holds exactly because the unperturbed
/// Jacobian is the same at every family point.
pub fn check_family_z_independence(map: &impl FamilyMap, samples: &[f64]) -> Result<f64> {
    let mut base: Option<Vector2<f64>> = None;
    let mut max_dev = 0.0f64;
    for &s in samples {
        let eig = eigenstructure_2x2(&map.jacobian(s)?)?;
        match base {
            None => base = Some(eig.z),
            Some(z0) => {
                let dev = (eig.z - z0).norm().min((eig.z + z0).norm());
                max_dev = max_dev.max(dev);
            }
        }
    }
    Ok(max_dev)
}

/// The scalar necessary condition `z^T P_delta(xi(s), 0)` as a function of the
/// family parameter.
pub fn necessary_condition_fn(map: &impl FamilyMap, z: &Vector2<f64>, s: f64) -> Result<f64> {
    Ok(z.dot(&map.map_delta(s)?))
}

/// Root of the necessary condition on `(lo, hi)` by scan plus Brent.
pub fn solve_theta0(map: &impl FamilyMap, z: &Vector2<f64>, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bracket;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::InvalidInput(format!("invalid bracket ({lo}, {hi})")));
    }
    let f = |s: f64| necessary_condition_fn(map, z, s).unwrap_or(f64::NAN);
    let step = (hi - lo) / 190.0;
    let brackets = scan_brackets(f, lo, hi, step);
    match brackets.first() {
        Some(&(a, b)) => brent(f, a, b, 1e-13),
        None => Err(Error::NoSignChange { lo, hi }),
    }
}

/// The projected perturbation slope `z^T P_{delta(theta,omega)}(xi(s0)) y_hat`
/// with `y_hat` the unit-norm right eigenvector (the reported convention).
pub fn melnikov_slope(map: &impl FamilyMap, eig: &EigenStructure, theta0: f64) -> Result<f64> {
    let m = map.map_delta_state(theta0)?;
    Ok((eig.z.transpose() * m * eig.y_unit()).x)
}

/// Pass/fail record of the four cycle-selection conditions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Verdicts {
    /// |rho| < 1: the family is transversally stable.
    pub transverse_stability: bool,
    /// The necessary condition has a root in the search bracket.
    pub necessary_root: bool,
    /// The projected slope is nonzero (an isolated cycle persists).
    pub slope_nonzero: bool,
    /// The projected slope is negative (the persisting cycle is stable).
    pub slope_negative: bool,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.transverse_stability
            && self.necessary_root
            && self.slope_nonzero
            && self.slope_negative
    }
}

/// A recorded sub-stage failure.
#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

/// Options for the verification run.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Family parameter at which the eigenstructure is taken.
    pub s0: f64,
    /// Root bracket for the necessary condition.
    pub theta0_bracket: (f64, f64),
    /// Family samples for the z-independence check.
    pub z_samples: Vec<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            s0: 1.0,
            theta0_bracket: (0.1, 2.0),
            z_samples: vec![0.25, 0.5, 1.0, 2.0],
        }
    }
}

/// Outcome of the generic verification engine.
#[derive(Debug, Clone)]
pub struct MelnikovAnalysis {
    pub eigen: EigenStructure,
    pub z_independence: Option<f64>,
    pub theta0: Option<f64>,
    /// Projected slope in the unit-`y` convention.
    pub melnikov_slope: Option<f64>,
    /// Same slope in the `z^T y = 1` pairing: the first-order drift of the
    /// unit Floquet multiplier per unit of the parameter.
    pub multiplier_slope: Option<f64>,
    pub verdicts: Verdicts,
    pub failures: Vec<StageFailure>,
}

impl MelnikovAnalysis {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Run the full verification pipeline on a family map.
///
/// The eigenstructure stage must succeed; later stages record their failures
/// and leave the dependent fields empty.
pub fn analyze(map: &impl FamilyMap, opts: &AnalysisOptions) -> Result<MelnikovAnalysis> {
    let jac = map.jacobian(opts.s0).map_err(|e| e.in_stage("jacobian"))?;
    let eigen = eigenstructure_2x2(&jac).map_err(|e| e.in_stage("eigenstructure"))?;

    let mut failures = Vec::new();
    let z_independence = match check_family_z_independence(map, &opts.z_samples) {
        Ok(dev) => Some(dev),
        Err(e) => {
            failures.push(StageFailure {
                stage: "z-independence".into(),
                message: e.to_string(),
            });
            None
        }
    };

    let theta0 = match solve_theta0(map, &eigen.z, opts.theta0_bracket) {
        Ok(root) => Some(root),
        Err(e) => {
            failures.push(StageFailure {
                stage: "necessary-condition".into(),
                message: e.to_string(),
            });
            None
        }
    };

    let (slope, multiplier_slope) = match theta0 {
        Some(root) => match melnikov_slope(map, &eigen, root) {
            Ok(s) => (Some(s), Some(s * eigen.y.norm())),
            Err(e) => {
                failures.push(StageFailure {
                    stage: "melnikov-slope".into(),
                    message: e.to_string(),
                });
                (None, None)
            }
        },
        None => (None, None),
    };

    let verdicts = Verdicts {
        transverse_stability: eigen.rho.abs() < 1.0,
        necessary_root: theta0.is_some(),
        slope_nonzero: slope.is_some_and(|s| s.abs() > 1e-6),
        slope_negative: slope.is_some_and(|s| s < 0.0),
    };

    Ok(MelnikovAnalysis {
        eigen,
        z_independence,
        theta0,
        melnikov_slope: slope,
        multiplier_slope,
        verdicts,
        failures,
    })
}

/// The full verification report for the walker, with the step-period context.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationReport {
    /// Step-period roots; `t1` is the non-anthropomorphic branch.
    pub t1: f64,
    pub t2: f64,
    pub alpha_t2: f64,
    pub jacobian: [[f64; 2]; 2],
    pub rho: f64,
    pub z: [f64; 2],
    pub y: [f64; 2],
    pub z_family_independence: Option<f64>,
    /// Coefficients of the necessary condition `c0 + c3 * theta^3`.
    pub necessary_constant: f64,
    pub necessary_cubic: f64,
    pub theta0: Option<f64>,
    pub melnikov_slope: Option<f64>,
    pub multiplier_slope: Option<f64>,
    pub verdicts: Verdicts,
    pub failures: Vec<StageFailure>,
}

/// Build the walker's report at the default family normalization.
pub fn build_report(opts: &AnalysisOptions) -> Result<BifurcationReport> {
    let roots = step_period_roots().map_err(|e| e.in_stage("step-period-roots"))?;
    let family = BipedFamily;
    let analysis = analyze(&family, opts)?;
    let jac = family.jacobian(opts.s0).map_err(|e| e.in_stage("jacobian"))?;

    // The necessary condition is exactly constant-plus-cubic along the family;
    // two evaluations identify both coefficients.
    let f1 = necessary_condition_fn(&family, &analysis.eigen.z, 1.0)
        .map_err(|e| e.in_stage("necessary-condition"))?;
    let f2 = necessary_condition_fn(&family, &analysis.eigen.z, 2.0)
        .map_err(|e| e.in_stage("necessary-condition"))?;
    let c3 = (f2 - f1) / 7.0;
    let c0 = f1 - c3;

    Ok(BifurcationReport {
        t1: roots.t1,
        t2: roots.t2,
        alpha_t2: alpha_t2(),
        jacobian: [[jac[(0, 0)], jac[(0, 1)]], [jac[(1, 0)], jac[(1, 1)]]],
        rho: analysis.eigen.rho,
        z: [analysis.eigen.z.x, analysis.eigen.z.y],
        y: [analysis.eigen.y.x, analysis.eigen.y.y],
        z_family_independence: analysis.z_independence,
        necessary_constant: c0,
        necessary_cubic: c3,
        theta0: analysis.theta0,
        melnikov_slope: analysis.melnikov_slope,
        multiplier_slope: analysis.multiplier_slope,
        verdicts: analysis.verdicts,
        failures: analysis.failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poincare::poincare_map;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn eigenstructure_of_diagonal_matrix() {
        let eig = eigenstructure_2x2(&Matrix2::new(1.0, 0.0, 0.0, 0.5)).unwrap();
        assert_eq!(eig.rho, 0.5);
        // Up to the sign convention y and z are the first basis vector.
        assert_abs_diff_eq!(eig.z.x.abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.z.y, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.z.dot(&eig.y), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.y_tilde.y.abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.z_tilde.dot(&eig.y_tilde), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenstructure_rejects_bad_spectra() {
        // Rotation: complex spectrum.
        let r = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        assert!(matches!(
            eigenstructure_2x2(&r),
            Err(Error::EigenStructure(_))
        ));
        // No unit eigenvalue.
        assert!(eigenstructure_2x2(&Matrix2::new(2.0, 0.0, 0.0, 0.5)).is_err());
        // Degenerate rho ~ 1.
        assert!(matches!(
            eigenstructure_2x2(&Matrix2::new(1.0, 0.0, 0.0, 1.0 + 1e-8)),
            Err(Error::DegenerateRho { .. })
        ));
    }

    #[test]
    fn eigenstructure_of_walker_jacobian_matches_reported_vectors() {
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(eig.rho, 0.48626, epsilon = 1e-3);
        assert_abs_diff_eq!(eig.z.x, -0.69131, epsilon = 1e-3);
        assert_abs_diff_eq!(eig.z.y, -0.722559, epsilon = 1e-3);
        assert_abs_diff_eq!(eig.y.x, 15.6468, epsilon = 1e-2);
        assert_abs_diff_eq!(eig.y.y, -16.3541, epsilon = 1e-2);
        // The reported vectors are consistent with the normalization.
        let z_reported = Vector2::new(-0.69131, -0.722559);
        let y_reported = Vector2::new(15.6468, -16.3541);
        assert_abs_diff_eq!(z_reported.dot(&y_reported), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn decomposition_identity() {
        // zeta = (z' zeta) y + (z_tilde' zeta) y_tilde for arbitrary zeta.
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let zeta = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rebuilt = eig.y * eig.z.dot(&zeta) + eig.y_tilde * eig.z_tilde.dot(&zeta);
            assert!((rebuilt - zeta).norm() <= 1e-8 * (1.0 + zeta.norm()));
        }
    }

    #[test]
    fn z_is_family_independent_for_walker() {
        let dev = check_family_z_independence(&BipedFamily, &[0.25, 0.5, 1.0, 2.0]).unwrap();
        assert!(dev < 1e-6, "deviation {dev:e}");
        let single = check_family_z_independence(&BipedFamily, &[1.0]).unwrap();
        assert_eq!(single, 0.0);
    }

    /// Family with an s-dependent Jacobian: a rotated contraction. Used as a
    /// negative control for the z-independence hypothesis.
    struct RotatingFamily;

    impl FamilyMap for RotatingFamily {
        fn point(&self, s: f64) -> SectionPoint {
            SectionPoint::new(s, 0.0)
        }
        fn jacobian(&self, s: f64) -> Result<Matrix2<f64>> {
            let a = 0.1 * s;
            let r = Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos());
            Ok(r * Matrix2::new(1.0, 0.0, 0.0, 0.5) * r.transpose())
        }
        fn map_delta(&self, _s: f64) -> Result<Vector2<f64>> {
            Ok(Vector2::new(0.0, 0.0))
        }
        fn map_delta_state(&self, _s: f64) -> Result<Matrix2<f64>> {
            Ok(Matrix2::zeros())
        }
    }

    #[test]
    fn rotating_family_fails_z_independence() {
        let dev = check_family_z_independence(&RotatingFamily, &[0.25, 0.5, 1.0, 2.0]).unwrap();
        assert!(dev > 1e-2, "deviation {dev:e}");
    }

    #[test]
    fn necessary_condition_reported_coefficients_and_root() {
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        let f0 = necessary_condition_fn(&family, &eig.z, 1e-6).unwrap();
        assert_abs_diff_eq!(f0, 1.38262, epsilon = 1e-3);
        // Sign change across the root.
        assert!(necessary_condition_fn(&family, &eig.z, 0.5).unwrap() > 0.0);
        assert!(necessary_condition_fn(&family, &eig.z, 1.2).unwrap() < 0.0);
        let theta0 = solve_theta0(&family, &eig.z, (0.1, 2.0)).unwrap();
        assert_abs_diff_eq!(theta0, 0.970956, epsilon = 1e-3);
    }

    #[test]
    fn slope_matches_reported_value_and_conventions() {
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        let theta0 = solve_theta0(&family, &eig.z, (0.1, 2.0)).unwrap();
        let slope = melnikov_slope(&family, &eig, theta0).unwrap();
        assert!((slope + 2.95323).abs() <= 0.01 * 2.95323, "slope {slope}");

        // Joint sign flip of (z, y) leaves the bilinear form unchanged.
        let flipped = EigenStructure {
            rho: eig.rho,
            y: -eig.y,
            y_tilde: eig.y_tilde,
            z: -eig.z,
            z_tilde: eig.z_tilde,
        };
        let slope_flipped = melnikov_slope(&family, &flipped, theta0).unwrap();
        assert_abs_diff_eq!(slope, slope_flipped, epsilon = 1e-12);
    }

    #[test]
    fn slope_agrees_with_finite_difference_in_delta() {
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        let theta0 = solve_theta0(&family, &eig.z, (0.1, 2.0)).unwrap();
        let slope = melnikov_slope(&family, &eig, theta0).unwrap();

        let p = family_point(theta0);
        let opts = IntegratorOptions::default();
        let delta = 1e-5;
        let jd = jacobian_state(&p, delta, ModelForm::Expanded, &opts).unwrap();
        let j0 = jacobian_state(&p, 0.0, ModelForm::Expanded, &opts).unwrap();
        let fd_slope = (eig.z.transpose() * ((jd - j0) / delta) * eig.y_unit()).x;
        assert!(
            (slope - fd_slope).abs() <= 0.01 * slope.abs(),
            "assembly {slope}, fd {fd_slope}"
        );
    }

    #[test]
    fn second_derivative_degeneracy_along_family() {
        // z' P_xx [y, y] = 0: second central differences of the map along the
        // unit y direction at three family points.
        let opts = IntegratorOptions::tight();
        let family = BipedFamily;
        let eig = eigenstructure_2x2(&family.jacobian(1.0).unwrap()).unwrap();
        let dir = eig.y_unit();
        let h = 3e-3;
        for s in [0.5, 1.0, 2.0] {
            let x = family_point(s).to_vector();
            let eval = |v: Vector2<f64>| {
                poincare_map(
                    &SectionPoint::from_vector(v),
                    0.0,
                    ModelForm::Expanded,
                    &opts,
                )
                .unwrap()
                .image
                .to_vector()
            };
            let second = (eval(x + h * dir) - 2.0 * eval(x) + eval(x - h * dir)) / (h * h);
            let projected = eig.z.dot(&second);
            assert!(
                projected.abs() < 1e-4,
                "s = {s}: z'P_xx[y,y] = {projected:e}"
            );
        }
    }

    #[test]
    fn walker_report_passes_all_verdicts() {
        let report = build_report(&AnalysisOptions::default()).unwrap();
        assert!(report.verdicts.all_pass());
        assert!(report.failures.is_empty());
        assert_abs_diff_eq!(report.rho, 0.48626, epsilon = 1e-3);
        assert_abs_diff_eq!(report.theta0.unwrap(), 0.970956, epsilon = 1e-3);
        assert_abs_diff_eq!(report.necessary_constant, 1.38262, epsilon = 1e-3);
        assert_abs_diff_eq!(report.necessary_cubic, -1.51044, epsilon = 1e-3);
        let slope = report.melnikov_slope.unwrap();
        assert!((slope + 2.95323).abs() <= 0.01 * 2.95323);
        // The multiplier drift is the same form in the z'y = 1 pairing.
        let y_norm = Vector2::new(report.y[0], report.y[1]).norm();
        assert_abs_diff_eq!(
            report.multiplier_slope.unwrap(),
            slope * y_norm,
            epsilon = 1e-9
        );
        assert!(report.z_family_independence.unwrap() < 1e-6);
    }

    /// Transversally unstable synthetic family: |rho| > 1.
    struct UnstableFamily;

    impl FamilyMap for UnstableFamily {
        fn point(&self, s: f64) -> SectionPoint {
            SectionPoint::new(s, 0.0)
        }
        fn jacobian(&self, _s: f64) -> Result<Matrix2<f64>> {
            Ok(Matrix2::new(1.0, 0.0, 0.0, 1.2))
        }
        fn map_delta(&self, s: f64) -> Result<Vector2<f64>> {
            Ok(Vector2::new(0.5 - s, 0.0))
        }
        fn map_delta_state(&self, _s: f64) -> Result<Matrix2<f64>> {
            Ok(Matrix2::new(-1.0, 0.0, 0.0, 0.0))
        }
    }

    #[test]
    fn unstable_family_fails_stability_verdict() {
        let analysis = analyze(&UnstableFamily, &AnalysisOptions::default()).unwrap();
        assert!(!analysis.verdicts.transverse_stability);
        assert!(analysis.verdicts.necessary_root);
        assert!(analysis.is_complete());
    }

    /// Constant nonzero perturbation: the necessary condition has no root.
    struct NoRootFamily;

    impl FamilyMap for NoRootFamily {
        fn point(&self, s: f64) -> SectionPoint {
            SectionPoint::new(s, 0.0)
        }
        fn jacobian(&self, _s: f64) -> Result<Matrix2<f64>> {
            Ok(Matrix2::new(1.0, 0.0, 0.0, 0.5))
        }
        fn map_delta(&self, _s: f64) -> Result<Vector2<f64>> {
            Ok(Vector2::new(0.7, 0.0))
        }
        fn map_delta_state(&self, _s: f64) -> Result<Matrix2<f64>> {
            Ok(Matrix2::zeros())
        }
    }

    #[test]
    fn constant_perturbation_has_no_root() {
        let analysis = analyze(&NoRootFamily, &AnalysisOptions::default()).unwrap();
        assert!(!analysis.verdicts.necessary_root);
        assert!(analysis.theta0.is_none());
        assert!(!analysis.is_complete());
        assert_eq!(analysis.failures.len(), 1);
        assert_eq!(analysis.failures[0].stage, "necessary-condition");
    }
}
