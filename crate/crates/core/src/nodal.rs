//! Real-root isolation by Sturm sequences and the crack-admissibility tests
//! built on nodal sets of eigenfunction combinations.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::RatMatrix;
use crate::pencil::{quadratic_eigenfunction, quartic_eigenfunction};
use crate::polyring::{from_f64, int, rational_serde, to_f64, RatPoly, Rational};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Real roots of a polynomial with exact isolating intervals `(a, b]`.
#[derive(Clone, Debug, Serialize)]
pub struct RootSet {
    pub poly: RatPoly,
    /// `(a, b]` containing exactly one root, or `[r, r]` when the root was
    /// found exactly.
    #[serde(serialize_with = "rational_serde::intervals")]
    pub isolating_intervals: Vec<(Rational, Rational)>,
    pub refined_roots: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub tol: f64,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.refined_roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refined_roots.is_empty()
    }

    pub fn all_simple(&self) -> bool {
        self.multiplicities.iter().all(|&m| m == 1)
    }

    /// `|p(r)|` divided by the size of `p` near `r`, measured as
    /// `Σ k|a_k||r|^(k-1)`; a root accurate to `tol` keeps this near `tol`.
    pub fn scaled_residuals(&self) -> Vec<f64> {
        let coeffs = self.poly.to_f64_coeffs();
        self.refined_roots
            .iter()
            .map(|&r| {
                let value = crate::polyring::horner(&coeffs, r).abs();
                let slope: f64 = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, a)| k as f64 * a.abs() * r.abs().powi(k as i32 - 1))
                    .sum();
                let size: f64 = coeffs.iter().enumerate().map(|(k, a)| a.abs() * r.abs().powi(k as i32)).sum();
                // rounding in the f64 evaluation itself
                let floor = 4.0 * f64::EPSILON * size * (coeffs.len() as f64);
                if slope == 0.0 {
                    value
                } else {
                    (value - floor).max(0.0) / slope
                }
            })
            .collect()
    }
}

/// Sturm chain of a square-free polynomial, each member scaled to a
/// positive multiple with integer coefficients.
pub fn sturm_sequence(p: &RatPoly) -> Vec<RatPoly> {
    let mut seq = vec![p.primitive(), p.derivative().primitive()];
    while !seq.last().unwrap().is_zero() {
        let n = seq.len();
        let r = seq[n - 2].div_rem(&seq[n - 1]).1;
        seq.push((-r).primitive());
    }
    seq.pop();
    seq
}

/// Integer coefficients, lowest degree first, for exact sign evaluation
/// without rational normalization.
struct IntPoly(Vec<BigInt>);

impl IntPoly {
    fn new(p: &RatPoly) -> Self {
        let p = p.primitive();
        IntPoly(p.coeffs().iter().map(|c| c.numer().clone()).collect())
    }

    /// Sign of `p(n/d)` for `d > 0`, from `Σ c_i n^i d^(deg-i)`.
    fn sign_at(&self, x: &Rational) -> i8 {
        let (n, d) = (x.numer(), x.denom());
        let mut it = self.0.iter().rev();
        let Some(top) = it.next() else { return 0 };
        let mut acc = top.clone();
        let mut dpow = BigInt::one();
        for c in it {
            dpow *= d;
            acc = acc * n + c * &dpow;
        }
        match acc.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }
}

struct Sturm(Vec<IntPoly>);

impl Sturm {
    fn new(p: &RatPoly) -> Self {
        Sturm(sturm_sequence(p).iter().map(IntPoly::new).collect())
    }

    fn variations(&self, x: &Rational) -> usize {
        let mut count = 0;
        let mut prev = 0i8;
        for p in &self.0 {
            let s = p.sign_at(x);
            if s != 0 {
                if prev != 0 && s != prev {
                    count += 1;
                }
                prev = s;
            }
        }
        count
    }

    /// Number of distinct real roots in `(a, b]`.
    fn count_in(&self, a: &Rational, b: &Rational) -> usize {
        self.variations(a) - self.variations(b)
    }
}

/// A power of two above the modulus of every root, from Fujiwara's bound
/// `2 max_k |a_{n-k}/a_n|^(1/k)`.
fn root_bound(p: &RatPoly) -> Rational {
    let n = p.degree() as usize;
    let lc = p.leading().expect("nonzero polynomial").abs();
    let ratios: Vec<(usize, Rational)> =
        (1..=n).map(|k| (k, p.coeff(n - k).abs() / &lc)).filter(|(_, r)| !r.is_zero()).collect();
    // smallest power of two t with |a_{n-k}/a_n| <= t^k for all k; 4t is
    // strictly above the bound 2t
    let mut t = Rational::one();
    while ratios.iter().any(|(k, r)| r > &pow(&t, *k)) {
        t *= int(2);
    }
    while t > Rational::one() / int(1 << 20) {
        let half = &t / int(2);
        if ratios.iter().any(|(k, r)| r > &pow(&half, *k)) {
            break;
        }
        t = half;
    }
    t * int(4)
}

fn pow(x: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * x)
}

/// Number of distinct real roots.
pub fn real_root_count(p: &RatPoly) -> usize {
    if p.degree() < 1 {
        return 0;
    }
    let sf = p.square_free_part();
    let b = root_bound(&sf);
    Sturm::new(&sf).count_in(&-b.clone(), &b)
}

fn isolate(seq: &Sturm, a: Rational, b: Rational, out: &mut Vec<(Rational, Rational)>) {
    let n = seq.count_in(&a, &b);
    match n {
        0 => {}
        1 => out.push((a, b)),
        _ => {
            let mid = (&a + &b) / int(2);
            isolate(seq, a, mid.clone(), out);
            isolate(seq, mid, b, out);
        }
    }
}

/// Shrinks `(a, b]` around its single simple root of `p` until narrower
/// than `tol`; exact rational roots collapse the interval to a point.
fn refine(p: &RatPoly, mut a: Rational, mut b: Rational, tol: &Rational) -> (Rational, Rational) {
    let ip = IntPoly::new(p);
    let mut sb = ip.sign_at(&b);
    if sb == 0 {
        return (b.clone(), b);
    }
    while &(&b - &a) >= tol {
        let mid = (&a + &b) / int(2);
        match ip.sign_at(&mid) {
            0 => return (mid.clone(), mid),
            s if s == sb => {
                b = mid;
                sb = s;
            }
            _ => a = mid,
        }
    }
    let q = simplest_in(&a, &b);
    if q > a && ip.sign_at(&q) == 0 {
        return (q.clone(), q);
    }
    (a, b)
}

/// The rational with the smallest denominator in `[a, b]`.
fn simplest_in(a: &Rational, b: &Rational) -> Rational {
    if a.is_negative() && b.is_negative() {
        return -simplest_in(&-b, &-a);
    }
    if !a.is_positive() {
        return Rational::zero();
    }
    let c = a.ceil();
    if &c <= b {
        return c;
    }
    let n = a.floor();
    n.clone() + simplest_in(&(b - &n).recip(), &(a - &n).recip()).recip()
}

/// Isolates and refines every distinct real root of `p`, with multiplicities
/// from its square-free factorization.
pub fn isolate_real_roots(p: &RatPoly, tol: f64) -> Result<RootSet> {
    if p.is_zero() {
        return Err(invalid("the zero polynomial has no isolated roots"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("root tolerance must be positive, got {tol}")));
    }
    let mut set = RootSet {
        poly: p.clone(),
        isolating_intervals: Vec::new(),
        refined_roots: Vec::new(),
        multiplicities: Vec::new(),
        tol,
    };
    if p.degree() < 1 {
        return Ok(set);
    }
    let factors = p.square_free_decomposition();
    let sf = p.square_free_part();
    let bound = root_bound(&sf);
    let mut intervals = Vec::new();
    isolate(&Sturm::new(&sf), -bound.clone(), bound, &mut intervals);

    let factor_seqs: Vec<(Sturm, usize)> = if factors.len() > 1 {
        factors.iter().map(|(f, m)| (Sturm::new(f), *m)).collect()
    } else {
        Vec::new()
    };
    let tol_q = from_f64(tol)?;
    for (a, b) in intervals {
        let multiplicity = match factors.as_slice() {
            [(_, m)] => *m,
            _ => factor_seqs
                .iter()
                .find(|(s, _)| s.count_in(&a, &b) == 1)
                .map(|(_, m)| *m)
                .ok_or_else(|| Error::InternalConsistency("root not owned by any square-free factor".into()))?,
        };
        let (ra, rb) = refine(&sf, a, b, &tol_q);
        let mid = (&ra + &rb) / int(2);
        set.refined_roots.push(to_f64(&mid));
        set.isolating_intervals.push((ra, rb));
        set.multiplicities.push(multiplicity);
    }
    Ok(set)
}

/// True iff the polynomial has `deg` distinct simple real roots.
pub fn transversality_check(psi: &RatPoly) -> bool {
    if psi.degree() < 1 {
        return psi.degree() == 0;
    }
    let sf = psi.square_free_part();
    sf.degree() == psi.degree() && real_root_count(&sf) == psi.degree() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Laplace,
    Bilaplace,
}

impl Equation {
    pub fn family_count(self) -> usize {
        match self {
            Equation::Laplace => 2,
            Equation::Bilaplace => 4,
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::Laplace => "laplace",
            Equation::Bilaplace => "bilaplace",
        })
    }
}

impl std::str::FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Equation::Laplace),
            "bilaplace" => Ok(Equation::Bilaplace),
            _ => Err(Error::Parse(format!("unknown equation {s:?}"))),
        }
    }
}

/// Eigenfunctions entering the order-`l` combination, in column order:
/// `ψ_{l,1}, ψ_{l-1,2}` and for the bi-Laplacian also `ψ_{l-2,3}, ψ_{l-3,4}`.
/// Families whose degree would be negative are `None`.
pub fn combination_basis(equation: Equation, l: usize) -> Result<Vec<Option<RatPoly>>> {
    if l < 1 {
        return Err(invalid("expansion order must be at least 1"));
    }
    let mut out = vec![
        Some(quadratic_eigenfunction(l, 1)?.psi),
        Some(quadratic_eigenfunction(l - 1, 2)?.psi),
    ];
    if equation == Equation::Bilaplace {
        for family in 3u8..=4 {
            let shift = family as usize - 1;
            out.push(match l.checked_sub(shift) {
                Some(d) => Some(quartic_eigenfunction(d, family)?.psi),
                None => None,
            });
        }
    }
    Ok(out)
}

/// Strictly increasing crack slopes, kept exactly when they were given as
/// rationals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrackConfig {
    pub alphas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "rational_serde::opt_many")]
    pub exact: Option<Vec<Rational>>,
}

impl CrackConfig {
    pub fn exact(alphas: Vec<Rational>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("a crack configuration needs at least one slope"));
        }
        if alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("crack slopes must be strictly increasing"));
        }
        Ok(CrackConfig { alphas: alphas.iter().map(to_f64).collect(), exact: Some(alphas) })
    }

    pub fn approximate(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("a crack configuration needs at least one slope"));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(invalid("crack slopes must be finite"));
        }
        if alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("crack slopes must be strictly increasing"));
        }
        Ok(CrackConfig { alphas, exact: None })
    }

    pub fn from_ints(alphas: &[i64]) -> Result<Self> {
        Self::exact(alphas.iter().map(|&a| int(a)).collect())
    }

    pub fn m(&self) -> usize {
        self.alphas.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityVerdict {
    pub l: usize,
    pub admissible: bool,
    /// Rank of the evaluation matrix over the families present at this order.
    pub rank: usize,
    pub exact: bool,
    /// Coefficients over all families, largest entry scaled to +1.
    pub combo_coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "rational_serde::opt_many")]
    pub combo_exact: Option<Vec<Rational>>,
    /// Basis of the admissible coefficient space.
    pub nullspace_basis: Vec<Vec<f64>>,
    pub combination: Option<RatPoly>,
    pub full_zero_set: Option<RootSet>,
    pub consecutive_flag: bool,
}

/// Rank, exact nullspace when available, and its f64 image.
type Nullspace = (usize, Option<Vec<Vec<Rational>>>, Vec<Vec<f64>>);

/// Admissibility of `config` at each order in `l_min..=l_max`.
pub fn check_admissibility(
    equation: Equation,
    config: &CrackConfig,
    l_min: usize,
    l_max: usize,
    tol: f64,
) -> Result<Vec<AdmissibilityVerdict>> {
    if l_min > l_max {
        return Err(invalid(format!("empty order range {l_min}..={l_max}")));
    }
    if l_min < config.m().max(1) {
        return Err(invalid(format!(
            "order range must start at or above the crack count {}",
            config.m().max(1)
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("rank tolerance must be positive, got {tol}")));
    }
    (l_min..=l_max).map(|l| verdict_at(equation, config, l, tol)).collect()
}

pub fn check_admissibility_laplace(config: &CrackConfig, l_min: usize, l_max: usize, tol: f64) -> Result<Vec<AdmissibilityVerdict>> {
    check_admissibility(Equation::Laplace, config, l_min, l_max, tol)
}

pub fn check_admissibility_bilaplace(config: &CrackConfig, l_min: usize, l_max: usize, tol: f64) -> Result<Vec<AdmissibilityVerdict>> {
    check_admissibility(Equation::Bilaplace, config, l_min, l_max, tol)
}

/// Exact evaluation matrix over the present families, if every slope is
/// rational.
pub fn exact_evaluation_matrix(basis: &[Option<RatPoly>], alphas: &[Rational]) -> RatMatrix {
    let present: Vec<&RatPoly> = basis.iter().flatten().collect();
    RatMatrix::from_rows(alphas.iter().map(|a| present.iter().map(|p| p.eval(a)).collect()).collect())
}

fn verdict_at(equation: Equation, config: &CrackConfig, l: usize, tol: f64) -> Result<AdmissibilityVerdict> {
    let basis = combination_basis(equation, l)?;
    let present: Vec<usize> = (0..basis.len()).filter(|&i| basis[i].is_some()).collect();
    let embed = |v: &[Rational]| -> Vec<Rational> {
        let mut full = vec![Rational::zero(); basis.len()];
        for (j, &i) in present.iter().enumerate() {
            full[i] = v[j].clone();
        }
        full
    };

    let (rank, null_exact, null_float): Nullspace = match &config.exact {
        Some(alphas) => {
            let m = exact_evaluation_matrix(&basis, alphas);
            let ns: Vec<Vec<Rational>> = m.nullspace().iter().map(|v| embed(v)).collect();
            let nf = ns.iter().map(|v| v.iter().map(to_f64).collect()).collect();
            (m.rank(), Some(ns), nf)
        }
        None => {
            let (rank, ns) = numeric_nullspace(&basis, &present, &config.alphas, tol);
            let full = ns
                .into_iter()
                .map(|v| {
                    let mut f = vec![0.0; basis.len()];
                    for (j, &i) in present.iter().enumerate() {
                        f[i] = v[j];
                    }
                    f
                })
                .collect();
            (rank, None, full)
        }
    };

    let admissible = !null_float.is_empty();
    let mut verdict = AdmissibilityVerdict {
        l,
        admissible,
        rank,
        exact: config.exact.is_some(),
        combo_coefficients: None,
        combo_exact: None,
        nullspace_basis: null_float.iter().map(|v| normalize_f64(v)).collect(),
        combination: None,
        full_zero_set: None,
        consecutive_flag: false,
    };
    if !admissible {
        return Ok(verdict);
    }

    let coeffs: Vec<Rational> = match &null_exact {
        Some(ns) => normalize_exact(&ns[0]),
        None => normalize_f64(&null_float[0]).iter().map(|&c| from_f64(c)).collect::<Result<_>>()?,
    };
    let combination = basis
        .iter()
        .zip(&coeffs)
        .filter_map(|(p, c)| p.as_ref().map(|p| p.scale(c)))
        .fold(RatPoly::zero(), |acc, t| &acc + &t);
    let zeros = isolate_real_roots(&combination, DEFAULT_ROOT_TOL)?;
    verdict.consecutive_flag = consecutive(&zeros.refined_roots, &config.alphas);
    verdict.combo_coefficients = Some(coeffs.iter().map(to_f64).collect());
    if null_exact.is_some() {
        verdict.combo_exact = Some(coeffs);
    }
    verdict.combination = Some(combination);
    verdict.full_zero_set = Some(zeros);
    Ok(verdict)
}

fn numeric_nullspace(basis: &[Option<RatPoly>], present: &[usize], alphas: &[f64], tol: f64) -> (usize, Vec<Vec<f64>>) {
    let cols = present.len();
    let rows = alphas.len().max(cols);
    let fpolys: Vec<Vec<f64>> = present.iter().map(|&i| basis[i].as_ref().unwrap().to_f64_coeffs()).collect();
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for (r, &a) in alphas.iter().enumerate() {
        let row: Vec<f64> = fpolys.iter().map(|c| crate::polyring::horner(c, a)).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (c, v) in row.iter().enumerate() {
            m[(r, c)] = if norm > 0.0 { v / norm } else { 0.0 };
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut rank = 0;
    let mut null = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if sigma_max > 0.0 && s > tol * sigma_max {
            rank += 1;
        } else {
            null.push(v_t.row(i).iter().cloned().collect());
        }
    }
    (rank, null)
}

fn normalize_exact(v: &[Rational]) -> Vec<Rational> {
    let pivot = v.iter().max_by(|a, b| a.abs().cmp(&b.abs())).cloned().unwrap_or_else(Rational::one);
    v.iter().map(|c| c / &pivot).collect()
}

fn normalize_f64(v: &[f64]) -> Vec<f64> {
    let pivot = v.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|c| c / pivot).collect()
}

/// Whether the slopes occupy a contiguous run in the sorted root list.
fn consecutive(roots: &[f64], alphas: &[f64]) -> bool {
    if roots.is_empty() {
        return false;
    }
    let idx: Vec<usize> = alphas
        .iter()
        .map(|a| {
            roots
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - a).abs().total_cmp(&(y.1 - a).abs()))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    idx.windows(2).all(|w| w[1] == w[0] + 1)
}

/// A configuration produced by scanning combinations `ψ_{l,1} + r ψ_{l-1,2}`;
/// `ratio = None` stands for the pure `ψ_{l-1,2}` point.
#[derive(Clone, Debug, Serialize)]
pub struct EnumeratedConfig {
    pub l: usize,
    #[serde(serialize_with = "rational_serde::opt")]
    pub ratio: Option<Rational>,
    pub config: CrackConfig,
}

pub fn enumerate_admissible(m: usize, l: usize, ratios: &[Rational]) -> Result<Vec<EnumeratedConfig>> {
    if m < 1 {
        return Err(invalid("crack count must be at least 1"));
    }
    if l < m {
        return Err(invalid(format!("order {l} is below the crack count {m}")));
    }
    let psi1 = quadratic_eigenfunction(l, 1)?.psi;
    let psi2 = quadratic_eigenfunction(l - 1, 2)?.psi;
    let mut points: Vec<(Option<Rational>, RatPoly)> =
        ratios.iter().map(|r| (Some(r.clone()), &psi1 + &psi2.scale(r))).collect();
    points.push((None, psi2.clone()));

    let mut out = Vec::new();
    for (ratio, q) in points {
        let roots = isolate_real_roots(&q, DEFAULT_ROOT_TOL)?;
        if roots.len() < m {
            continue;
        }
        let exact_roots: Vec<Option<Rational>> =
            roots.isolating_intervals.iter().map(|(a, b)| (a == b).then(|| a.clone())).collect();
        for start in 0..=roots.len() - m {
            let window = start..start + m;
            let config = if exact_roots[window.clone()].iter().all(Option::is_some) {
                CrackConfig::exact(exact_roots[window].iter().map(|r| r.clone().unwrap()).collect())?
            } else {
                CrackConfig::approximate(roots.refined_roots[window].to_vec())?
            };
            out.push(EnumeratedConfig { l, ratio: ratio.clone(), config });
        }
    }
    Ok(out)
}
