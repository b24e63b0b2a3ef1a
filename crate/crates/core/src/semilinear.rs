//! Shooting solvers for the stationary and quasi-self-similar profile
//! equations of the semilinear problem, and the crack curves they generate.
//!
//! Both equations are divergence-form oscillators:
//! `((1+z²) f')' + N(f)/(1+z²) = 0` and `(ξ² f')' + N(f)/ξ² = 0` with
//! `N(f) = |f|^{p-1} f`. The first is integrated directly in `z`. The
//! second becomes `f_ss + N(f) = 0` under `s = -1/ξ`, which keeps the
//! oscillation rate bounded as `ξ → 0`, so it is integrated in `s`.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expansion::linear_fit;
use crate::ode::{integrate, segment_root, DenseSolution, Options, Segment, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Stationary,
    Selfsimilar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FarCondition {
    /// `f ~ C/z`, the `m = -1` branch of the linearization.
    DecayInverse,
    /// `f → 1`, the `m = 0` branch.
    PlateauOne,
}

macro_rules! parse_enum {
    ($t:ty, $($s:literal => $v:expr),+) => {
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::Parse(format!("unknown {} {s:?}", stringify!($t)))),
                }
            }
        }
    };
}
parse_enum!(Symmetry, "symmetric" => Symmetry::Symmetric, "antisymmetric" => Symmetry::Antisymmetric, "none" => Symmetry::None);
parse_enum!(FarCondition, "decay" => FarCondition::DecayInverse, "decay_inverse" => FarCondition::DecayInverse,
    "plateau" => FarCondition::PlateauOne, "plateau_one" => FarCondition::PlateauOne);

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Symmetric => "symmetric",
            Symmetry::Antisymmetric => "antisymmetric",
            Symmetry::None => "none",
        })
    }
}

impl fmt::Display for FarCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FarCondition::DecayInverse => "decay_inverse",
            FarCondition::PlateauOne => "plateau_one",
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ODEProblem {
    pub kind: ProblemKind,
    pub p: f64,
    pub symmetry: Symmetry,
    pub far_condition: Option<FarCondition>,
    /// `Z` for stationary problems, `Ξ` for self-similar ones.
    pub domain_cut: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSolution {
    pub problem: ODEProblem,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative_values: Vec<f64>,
    pub shot_parameter: f64,
    /// Sign changes of `f`, in increasing abscissa order.
    pub zeros: Vec<f64>,
    /// `C` in `f ~ C/z` for decaying profiles; the extrapolated plateau
    /// `f + z f'` at the cut for plateau profiles; the far amplitude `A`
    /// for self-similar profiles.
    pub asymptotic_constant: f64,
    /// Fitted exponent of `|f|` against `z` on `[Z/2, Z]` (decaying
    /// stationary profiles only).
    pub far_exponent: Option<f64>,
    /// Largest relative residual of the second-order equation at the
    /// midpoints of the integrator steps.
    pub max_residual: f64,
    pub truncated: bool,
    pub steps: usize,
}

pub fn nonlinearity(f: f64, p: f64) -> f64 {
    f.signum() * f.abs().powf(p)
}

/// Roots of the indicial equation `m² + m = 0` of the far-field
/// linearization, which is the same for both kinds.
pub fn linearized_exponents(kind: ProblemKind) -> (f64, f64) {
    match kind {
        ProblemKind::Stationary | ProblemKind::Selfsimilar => (-1.0, 0.0),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StationaryOptions {
    pub tol: f64,
    pub z_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub points_per_decade: usize,
    pub grid_points: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions { tol: 1e-10, z_max: 50.0, s_min: 1e-3, s_max: 1e3, points_per_decade: 20, grid_points: 2001 }
    }
}

/// The integrator runs well below the requested tolerance so that the
/// second derivative of the dense output, not just its values, meets it.
pub fn integrator_tol(tol: f64) -> f64 {
    (tol * 1e-4).max(1e-14)
}

fn stationary_rhs(p: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |z, y| {
        let w = 1.0 + z * z;
        [y[1], -(2.0 * z * y[1] + nonlinearity(y[0], p) / w) / w]
    }
}

fn initial_data(symmetry: Symmetry, s: f64) -> [f64; 2] {
    match symmetry {
        Symmetry::Antisymmetric => [0.0, s],
        _ => [s, 0.0],
    }
}

struct Shot {
    dense: DenseSolution<2>,
    status: Status,
    end: [f64; 2],
}

fn shoot(p: f64, symmetry: Symmetry, s: f64, opts: &StationaryOptions, keep: bool) -> Shot {
    let mut dense = DenseSolution::default();
    let r = integrate(stationary_rhs(p), 0.0, initial_data(symmetry, s), opts.z_max, &Options::with_tol(integrator_tol(opts.tol)), |seg| {
        if keep {
            dense.segments.push(*seg);
        }
        true
    });
    Shot { dense, status: r.status, end: r.y }
}

/// Far-field classifier at the cut; its zero is the target profile.
fn classify(far: FarCondition, z: f64, y: [f64; 2]) -> f64 {
    match far {
        // D in the linearized far field f = D + C tan⁻¹(1/z)
        FarCondition::DecayInverse => y[0] + (1.0 + z * z) * (1.0 / z).atan() * y[1],
        FarCondition::PlateauOne => y[0] - 1.0,
    }
}

fn classifier_at(p: f64, symmetry: Symmetry, far: FarCondition, s: f64, opts: &StationaryOptions) -> Option<f64> {
    let shot = shoot(p, symmetry, s, opts, false);
    (shot.status == Status::Completed).then(|| classify(far, opts.z_max, shot.end))
}

pub fn solve_stationary(p: f64, symmetry: Symmetry, far: FarCondition, tol: f64) -> Result<ProfileSolution> {
    solve_stationary_with(p, symmetry, far, &StationaryOptions { tol, ..Default::default() })
}

/// Shooting from `z = 0` with bracket search over a geometric grid of
/// initial values of both signs, then bisection. Takes the bracket with the
/// smallest `|s|`, preferring `s > 0` on ties.
pub fn solve_stationary_with(p: f64, symmetry: Symmetry, far: FarCondition, opts: &StationaryOptions) -> Result<ProfileSolution> {
    check_stationary_args(p, symmetry, opts)?;
    let decades = (opts.s_max / opts.s_min).log10();
    let n = (decades * opts.points_per_decade as f64).ceil() as usize;
    let mags: Vec<f64> = (0..=n).map(|i| opts.s_min * 10f64.powf(decades * i as f64 / n as f64)).collect();

    let first_bracket = |sign: f64| -> Option<(f64, f64, f64, f64)> {
        let mut prev: Option<(f64, f64)> = None;
        for &m in &mags {
            let s = sign * m;
            let Some(c) = classifier_at(p, symmetry, far, s, opts) else {
                prev = None;
                continue;
            };
            if let Some((ps, pc)) = prev {
                if pc == 0.0 {
                    return Some((ps, ps, pc, pc));
                }
                if (pc < 0.0) != (c < 0.0) {
                    return Some((ps, s, pc, c));
                }
            }
            prev = Some((s, c));
        }
        None
    };
    let pos = first_bracket(1.0);
    let neg = first_bracket(-1.0);
    let bracket = match (pos, neg) {
        (Some(a), Some(b)) => {
            if b.0.abs() < a.0.abs() {
                b
            } else {
                a
            }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::NoProfileFound(format!(
                "no sign change of the {far} classifier for |s| in [{}, {}]",
                opts.s_min, opts.s_max
            )))
        }
    };

    let (mut a, mut b, mut ca, _) = bracket;
    for _ in 0..200 {
        if (b - a).abs() <= opts.tol * a.abs().max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        let Some(cm) = classifier_at(p, symmetry, far, m, opts) else {
            return Err(Error::NoProfileFound(format!("integration failed at s = {m}")));
        };
        if cm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (cm < 0.0) == (ca < 0.0) {
            a = m;
            ca = cm;
        } else {
            b = m;
        }
    }
    Ok(shoot_stationary_with(p, symmetry, Some(far), 0.5 * (a + b), opts))
}

fn check_stationary_args(p: f64, symmetry: Symmetry, opts: &StationaryOptions) -> Result<()> {
    if !(p > 1.0) {
        return Err(invalid(format!("exponent p must exceed 1, got {p}")));
    }
    if symmetry == Symmetry::None {
        return Err(invalid("stationary profiles are shot from z = 0 with a symmetric or antisymmetric start"));
    }
    if !(opts.tol > 0.0) || !(opts.z_max > 0.0) || opts.grid_points < 2 {
        return Err(invalid("tolerance, cut and grid size must be positive"));
    }
    if !(opts.s_min > 0.0 && opts.s_max > opts.s_min) || opts.points_per_decade == 0 {
        return Err(invalid("shooting range must satisfy 0 < s_min < s_max"));
    }
    Ok(())
}

/// The profile obtained from a single shot with initial value `s`.
pub fn shoot_stationary_with(p: f64, symmetry: Symmetry, far: Option<FarCondition>, s: f64, opts: &StationaryOptions) -> ProfileSolution {
    let shot = shoot(p, symmetry, s, opts, true);
    let z_end = shot.dense.t_end().unwrap_or(0.0);
    let n = opts.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| z_end * i as f64 / (n - 1) as f64).collect();
    let (mut values, mut derivative_values) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for &z in &grid {
        let y = shot.dense.eval(z).unwrap_or([f64::NAN; 2]);
        values.push(y[0]);
        derivative_values.push(y[1]);
    }
    let zeros = sign_changes(&shot.dense.segments);
    let max_residual = max_midpoint_residual(&shot.dense.segments, |z, f, d2| {
        let w = 1.0 + z * z;
        let terms = [w * d2, 2.0 * z * f[1], nonlinearity(f[0], p) / w];
        (terms.iter().sum::<f64>(), terms)
    });
    let [fz, dfz] = shot.end;
    let (asymptotic_constant, far_exponent) = match far {
        Some(FarCondition::PlateauOne) => (fz + z_end * dfz, None),
        _ => {
            let (xs, ys): (Vec<f64>, Vec<f64>) = grid
                .iter()
                .zip(&values)
                .filter(|(z, f)| **z >= z_end / 2.0 && **f != 0.0)
                .map(|(z, f)| (z.ln(), f.abs().ln()))
                .unzip();
            let exponent = (xs.len() >= 2).then(|| linear_fit(&xs, &ys).0);
            // f ≈ C tan⁻¹(1/z), so f' ≈ -C/(1+z²)
            (-(1.0 + z_end * z_end) * dfz, exponent)
        }
    };
    ProfileSolution {
        problem: ODEProblem { kind: ProblemKind::Stationary, p, symmetry, far_condition: far, domain_cut: opts.z_max },
        grid,
        values,
        derivative_values,
        shot_parameter: s,
        zeros,
        asymptotic_constant,
        far_exponent,
        max_residual,
        truncated: shot.status != Status::Completed,
        steps: shot.dense.segments.len(),
    }
}

fn sign_changes(segments: &[Segment<2>]) -> Vec<f64> {
    segments
        .iter()
        .filter(|s| {
            let (a, b) = (s.start()[0], s.end()[0]);
            (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
        })
        .map(|s| segment_root(s, 0))
        .collect()
}

/// Second derivative of the `f` component at the step midpoint by a
/// sixth-order central difference of the interpolated `f'` component, taken
/// in the local step coordinate to avoid cancellation at large `|t|`.
fn midpoint_second_derivative(seg: &Segment<2>) -> f64 {
    let dth = 1.0 / 16.0;
    let d = |k: f64| seg.eval_local(0.5 + k * dth)[1];
    (45.0 * (d(1.0) - d(-1.0)) - 9.0 * (d(2.0) - d(-2.0)) + (d(3.0) - d(-3.0))) / (60.0 * dth * seg.h)
}

/// Evaluates `residual(t, y, y'')` at every step midpoint and returns the
/// largest `|sum| / max(1, Σ|terms|)`.
fn max_midpoint_residual<const K: usize>(
    segments: &[Segment<2>],
    residual: impl Fn(f64, [f64; 2], f64) -> (f64, [f64; K]),
) -> f64 {
    segments
        .iter()
        .map(|seg| {
            let t = seg.t0 + 0.5 * seg.h;
            let y = seg.eval_local(0.5);
            let d2 = midpoint_second_derivative(seg);
            let (r, terms) = residual(t, y, d2);
            r.abs() / terms.iter().map(|x| x.abs()).sum::<f64>().max(1.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct SelfSimilarOptions {
    pub grid_points: usize,
}

impl Default for SelfSimilarOptions {
    fn default() -> Self {
        SelfSimilarOptions { grid_points: 2001 }
    }
}

pub fn solve_selfsimilar(p: f64, amplitude: f64, xi_max: f64, xi_min: f64, tol: f64) -> Result<ProfileSolution> {
    solve_selfsimilar_with(p, amplitude, xi_max, xi_min, tol, &SelfSimilarOptions::default())
}

/// Inward integration from `ξ = Ξ` with far data `f = A/Ξ`, `f' = -A/Ξ²`,
/// stopping at `ξ_min`. The output grid is logarithmic in `ξ`.
pub fn solve_selfsimilar_with(
    p: f64,
    amplitude: f64,
    xi_max: f64,
    xi_min: f64,
    tol: f64,
    opts: &SelfSimilarOptions,
) -> Result<ProfileSolution> {
    if !(p > 1.0) {
        return Err(invalid(format!("exponent p must exceed 1, got {p}")));
    }
    if !(xi_min > 0.0 && xi_max > xi_min && xi_max.is_finite()) {
        return Err(invalid("need Ξ > ξ_min > 0"));
    }
    if !(tol > 0.0) || !amplitude.is_finite() || opts.grid_points < 2 {
        return Err(invalid("tolerance and grid size must be positive and A finite"));
    }
    // in s = -1/ξ: f = A/Ξ, f_s = ξ² f_ξ = -A
    let s0 = -1.0 / xi_max;
    let s1 = -1.0 / xi_min;
    let n = opts.grid_points;
    let log_max = xi_max.ln();
    let log_min = xi_min.ln();
    // grid in decreasing ξ, which is increasing in the integration order
    let mut targets: Vec<f64> = (0..n).map(|i| (log_max + (log_min - log_max) * i as f64 / (n - 1) as f64).exp()).collect();
    // exp(ln Ξ) can round to just outside the integration range
    targets[0] = xi_max;
    targets[n - 1] = xi_min;

    let mut grid = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut derivative_values = Vec::with_capacity(n);
    let mut zeros = Vec::new();
    let mut next = 0usize;
    let mut max_residual = 0.0f64;
    let mut steps = 0usize;

    let rhs = move |_s: f64, y: &[f64; 2]| [y[1], -nonlinearity(y[0], p)];
    let report = integrate(rhs, s0, [-amplitude * s0, -amplitude], s1, &Options::with_tol(integrator_tol(tol)), |seg| {
        steps += 1;
        while next < n {
            let xi = targets[next];
            let s = match next {
                0 => s0,
                k if k == n - 1 => s1,
                _ => -1.0 / xi,
            };
            if !seg.contains(s) {
                break;
            }
            let y = seg.eval(s);
            grid.push(xi);
            values.push(y[0]);
            derivative_values.push(y[1] / (xi * xi));
            next += 1;
        }
        let (a, b) = (seg.start()[0], seg.end()[0]);
        if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            zeros.push(-1.0 / segment_root(seg, 0));
        }
        let y = seg.eval_local(0.5);
        let d2 = midpoint_second_derivative(seg);
        let terms = [d2, nonlinearity(y[0], p)];
        let r = (terms[0] + terms[1]).abs() / (terms[0].abs() + terms[1].abs()).max(1.0);
        max_residual = max_residual.max(r);
        true
    });
    zeros.reverse();
    Ok(ProfileSolution {
        problem: ODEProblem { kind: ProblemKind::Selfsimilar, p, symmetry: Symmetry::None, far_condition: Some(FarCondition::DecayInverse), domain_cut: xi_max },
        grid,
        values,
        derivative_values,
        shot_parameter: amplitude,
        zeros,
        asymptotic_constant: amplitude,
        far_exponent: None,
        max_residual,
        truncated: report.status != Status::Completed,
        steps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrackCurve {
    pub xi: f64,
    pub beta: f64,
    /// `(y, x)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// `x_k(y) = ξ_k (-y) |ln(-y)|^β` with `β = α(p-1)/2`, one curve per zero,
/// in increasing `ξ_k`.
pub fn crack_curves(sol: &ProfileSolution, alpha: f64, p: f64, y_grid: &[f64]) -> Result<Vec<CrackCurve>> {
    if !(p > 1.0) {
        return Err(invalid(format!("exponent p must exceed 1, got {p}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("α must be positive, got {alpha}")));
    }
    if let Some(&y) = y_grid.iter().find(|&&y| !(y < 0.0) || y == -1.0) {
        return Err(Error::Domain(format!("y = {y} is outside y < 0, y ≠ -1")));
    }
    let beta = alpha * (p - 1.0) / 2.0;
    let mut xis = sol.zeros.clone();
    xis.sort_by(f64::total_cmp);
    Ok(xis
        .into_iter()
        .map(|xi| CrackCurve {
            xi,
            beta,
            points: y_grid.iter().map(|&y| (y, xi * -y * (-y).ln().abs().powf(beta))).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        assert_eq!(linearized_exponents(ProblemKind::Stationary), (-1.0, 0.0));
        assert_eq!(linearized_exponents(ProblemKind::Selfsimilar), (-1.0, 0.0));
        // the decaying branch is m1 and the plateau branch m2
        let (m1, m2) = linearized_exponents(ProblemKind::Stationary);
        for m in [m1, m2] {
            assert_eq!(m * m + m, 0.0);
        }
    }

    #[test]
    fn argument_errors() {
        assert!(solve_stationary(1.0, Symmetry::Symmetric, FarCondition::DecayInverse, 1e-10).is_err());
        assert!(solve_stationary(3.0, Symmetry::None, FarCondition::DecayInverse, 1e-10).is_err());
        assert!(solve_selfsimilar(0.5, 1.0, 100.0, 1e-4, 1e-10).is_err());
        assert!(solve_selfsimilar(3.0, 1.0, 1e-4, 1e-3, 1e-10).is_err());
    }

    #[test]
    fn trivial_selfsimilar() {
        let sol = solve_selfsimilar(3.0, 0.0, 100.0, 1e-4, 1e-10).unwrap();
        assert!(sol.zeros.is_empty());
        assert_eq!(sol.values.len(), 2001);
        assert!(sol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn crack_curve_shapes() {
        let sol = solve_selfsimilar(3.0, 1.0, 100.0, 1e-2, 1e-10).unwrap();
        assert!(sol.zeros.len() >= 2);
        let ys = [-0.5, -0.1, -1e-3];
        let curves = crack_curves(&sol, 1.0, 3.0, &ys).unwrap();
        assert_eq!(curves[0].beta, 1.0);
        for (i, &y) in ys.iter().enumerate() {
            let x0 = curves[0].points[i].1;
            assert!((x0 - curves[0].xi * -y * (-y).ln().abs()).abs() < 1e-15);
            assert!(curves.windows(2).all(|w| w[0].points[i].1 < w[1].points[i].1));
        }
        assert!(matches!(crack_curves(&sol, 1.0, 3.0, &[-1.0]), Err(Error::Domain(_))));
        assert!(matches!(crack_curves(&sol, 1.0, 3.0, &[0.1]), Err(Error::Domain(_))));
        assert!(crack_curves(&sol, 1.0, 1.0, &ys).is_err());
    }

    #[test]
    fn single_shot_reflection() {
        let opts = StationaryOptions::default();
        let a = shoot_stationary_with(3.0, Symmetry::Symmetric, None, 1.3, &opts);
        let b = shoot_stationary_with(3.0, Symmetry::Symmetric, None, -1.3, &opts);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x + y).abs() <= 1e-12);
        }
    }
}
