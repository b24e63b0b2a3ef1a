//! Blow-up coordinates, truncated eigenfunction expansions near the crack
//! tip, and measurements on them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::nodal::{combination_basis, isolate_real_roots, Equation, DEFAULT_ROOT_TOL};
use crate::polyring::{from_f64, horner, RatPoly};

/// `z = x/(-y)`, `τ = -ln(-y)`, defined for `y < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowupCoords {
    pub z: f64,
    pub tau: f64,
}

pub fn to_blowup(x: f64, y: f64) -> Result<BlowupCoords> {
    if !(y < 0.0) {
        return Err(Error::Domain(format!("blow-up coordinates need y < 0, got y = {y}")));
    }
    Ok(BlowupCoords { z: x / -y, tau: -(-y).ln() })
}

pub fn from_blowup(c: BlowupCoords) -> (f64, f64) {
    let s = (-c.tau).exp();
    (c.z * s, -s)
}

/// Neumaier's compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Debug)]
struct Term {
    k: usize,
    coeffs: Vec<f64>,
    /// f64 coefficients of each family's eigenfunction (empty if absent).
    basis: Vec<Vec<f64>>,
}

/// Truncated expansion `Σ_k e^{-kτ} Σ_i c_{k,i} ψ_i(z)`, with the family
/// degrees `k, k-1, k-2, k-3` of [`combination_basis`].
#[derive(Clone, Debug)]
pub struct Expansion {
    pub equation: Equation,
    terms: Vec<Term>,
    leading: RatPoly,
}

impl Expansion {
    pub fn new(equation: Equation, terms: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("an expansion needs at least one term"));
        }
        let width = equation.family_count();
        let mut built = Vec::with_capacity(terms.len());
        for (k, coeffs) in terms {
            if coeffs.len() != width {
                return Err(invalid(format!("term {k} has {} coefficients, {equation} needs {width}", coeffs.len())));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("term {k} has a non-finite coefficient")));
            }
            let basis = combination_basis(equation, k)?
                .into_iter()
                .map(|p| p.map_or_else(Vec::new, |p| p.to_f64_coeffs()))
                .collect();
            built.push(Term { k, coeffs, basis });
        }
        let lead = &built[0];
        if lead.coeffs.iter().all(|&c| c == 0.0) {
            return Err(invalid("the leading coefficient tuple must be nontrivial"));
        }
        let leading = combination_basis(equation, lead.k)?
            .into_iter()
            .zip(&lead.coeffs)
            .filter_map(|(p, &c)| p.map(|p| (p, c)))
            .map(|(p, c)| Ok(p.scale(&from_f64(c)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(RatPoly::zero(), |acc, t| &acc + &t);
        Ok(Expansion { equation, terms: built, leading })
    }

    /// Parses `{"2": [1, 0], "3": [0, 0.5]}`.
    pub fn from_json(equation: Equation, text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("expansion terms: {e}")))?;
        let mut terms = BTreeMap::new();
        for (k, v) in raw {
            let k: usize = k.trim().parse().map_err(|_| Error::Parse(format!("term order {k:?} is not an integer")))?;
            terms.insert(k, v);
        }
        Self::new(equation, terms)
    }

    pub fn single(equation: Equation, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(equation, BTreeMap::from([(k, coeffs)]))
    }

    pub fn l_start(&self) -> usize {
        self.terms[0].k
    }

    pub fn k_max(&self) -> usize {
        self.terms.last().unwrap().k
    }

    /// `Σ_i c_{l,i} ψ_i` for the leading order `l`.
    pub fn leading_combination(&self) -> &RatPoly {
        &self.leading
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.terms.iter().map(|t| (t.k, t.coeffs.as_slice()))
    }

    pub fn eval(&self, z: f64, tau: f64) -> f64 {
        let parts = self.terms.iter().flat_map(|t| {
            let decay = (-(t.k as f64) * tau).exp();
            t.coeffs
                .iter()
                .zip(&t.basis)
                .filter(|(c, b)| **c != 0.0 && !b.is_empty())
                .map(move |(c, b)| decay * c * horner(b, z))
        });
        compensated_sum(parts)
    }

    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64> {
        let c = to_blowup(x, y)?;
        Ok(self.eval(c.z, c.tau))
    }
}

pub fn eval_expansion(exp: &Expansion, z: f64, tau: f64) -> f64 {
    exp.eval(z, tau)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    /// Root-mean-square deviation of the log data from the fitted line.
    pub residual: f64,
}

/// Least-squares slope and intercept of `ys` against `xs`, with the RMS
/// residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

const DECAY_ANGLES: usize = 64;

/// Fitted exponent of `max_{|x|=r, y<0} |u|` against `r`.
pub fn decay_order(exp: &Expansion, radii: &[f64]) -> Result<DecayFit> {
    if radii.len() < 2 {
        return Err(invalid("decay fit needs at least two radii"));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(invalid("radii must lie in (0, 1)"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("radii must be strictly decreasing"));
    }
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for &r in radii {
        let max = (0..DECAY_ANGLES)
            .map(|j| {
                let theta = -PI + PI * (j as f64 + 0.5) / DECAY_ANGLES as f64;
                exp.eval_xy(r * theta.cos(), r * theta.sin()).map(f64::abs)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::Domain(format!("expansion vanishes identically on radius {r}")));
        }
        xs.push(r.ln());
        ys.push(max.ln());
    }
    let (slope, _, residual) = linear_fit(&xs, &ys);
    Ok(DecayFit { slope, residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSample {
    pub theta: f64,
    pub value: f64,
}

/// Values of the expansion on the lower unit semicircle.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryTrace {
    pub samples: Vec<TraceSample>,
    /// Angles where the rays `x = α(-y)` of the leading combination's zeros
    /// cross the circle.
    pub crack_angles: Vec<f64>,
    /// The trace at each crack angle.
    pub crack_values: Vec<f64>,
}

pub fn synthesize_boundary_trace(exp: &Expansion, n_samples: usize) -> Result<BoundaryTrace> {
    if n_samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let value_at = |theta: f64| exp.eval_xy(theta.cos(), theta.sin());
    let samples = (0..n_samples)
        .map(|j| {
            let theta = -PI + PI * (j as f64 + 0.5) / n_samples as f64;
            Ok(TraceSample { theta, value: value_at(theta)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let lead = exp.leading_combination();
    let alphas = if lead.degree() >= 1 { isolate_real_roots(lead, DEFAULT_ROOT_TOL)?.refined_roots } else { Vec::new() };
    let crack_angles: Vec<f64> = alphas.iter().map(|&a| (-1.0f64).atan2(a)).collect();
    let crack_values = crack_angles.iter().map(|&t| value_at(t)).collect::<Result<Vec<_>>>()?;
    Ok(BoundaryTrace { samples, crack_angles, crack_values })
}

#[derive(Clone, Debug, Serialize)]
pub struct NegligibilityRow {
    pub tau: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NegligibilityTable {
    pub p: f64,
    pub rows: Vec<NegligibilityRow>,
    /// Fitted slope of `ln ratio` against `τ`.
    pub slope: f64,
    /// `-(2 + l(p-1))` for the leading order `l`.
    pub predicted_slope: f64,
}

const NEGLIGIBILITY_Z: usize = 401;
const NEGLIGIBILITY_Z_MAX: f64 = 2.0;

/// Size of the nonlinear term `e^{-2τ}|w|^{p-1}w` relative to the leading
/// linear term `e^{-lτ}ψ`, each maximized over `z ∈ [-2, 2]`.
pub fn perturbation_negligibility(exp: &Expansion, p: f64, tau_grid: &[f64]) -> Result<NegligibilityTable> {
    if !(p > 1.0) {
        return Err(invalid(format!("exponent p must exceed 1, got {p}")));
    }
    if tau_grid.len() < 2 {
        return Err(invalid("negligibility fit needs at least two τ values"));
    }
    let l = exp.l_start() as f64;
    let lead = exp.leading_combination().to_f64_coeffs();
    let zs: Vec<f64> = (0..NEGLIGIBILITY_Z)
        .map(|i| -NEGLIGIBILITY_Z_MAX + 2.0 * NEGLIGIBILITY_Z_MAX * i as f64 / (NEGLIGIBILITY_Z - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let nonlinear = zs.iter().map(|&z| (-2.0 * tau).exp() * exp.eval(z, tau).abs().powf(p)).fold(0.0, f64::max);
        let linear = zs.iter().map(|&z| (-l * tau).exp() * horner(&lead, z).abs()).fold(0.0, f64::max);
        rows.push(NegligibilityRow { tau, ratio: nonlinear / linear });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    Ok(NegligibilityTable { p, rows, slope, predicted_slope: -(2.0 + l * (p - 1.0)) })
}
