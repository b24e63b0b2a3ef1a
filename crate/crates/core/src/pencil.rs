//! The quadratic and quartic operator pencils, their integer spectra and
//! monic polynomial eigenfunctions, and the checks built on top of them.
//!
//! Eigenfunctions are computed as exact kernels of the pencil acting on a
//! monomial basis; the coefficient recursions are kept as cross-checks.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::RatMatrix;
use crate::polyring::{int, rat, rational_serde, to_f64, DiffOp, RatPoly, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PencilOrder {
    Quadratic,
    Quartic,
}

impl PencilOrder {
    pub fn family_count(self) -> u8 {
        match self {
            PencilOrder::Quadratic => 2,
            PencilOrder::Quartic => 4,
        }
    }
}

impl fmt::Display for PencilOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PencilOrder::Quadratic => "quadratic",
            PencilOrder::Quartic => "quartic",
        })
    }
}

impl std::str::FromStr for PencilOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(PencilOrder::Quadratic),
            "quartic" => Ok(PencilOrder::Quartic),
            _ => Err(Error::Parse(format!("unknown pencil order {s:?}"))),
        }
    }
}

/// A pencil instantiated at one integer value of the spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PencilSpec {
    pub order: PencilOrder,
    pub lambda: i64,
}

impl PencilSpec {
    pub fn new(order: PencilOrder, lambda: i64) -> Self {
        PencilSpec { order, lambda }
    }

    pub fn operator(&self) -> DiffOp {
        let l = self.lambda;
        match self.order {
            // (1+z^2) D^2 + 2(λ+1) z D + λ(λ+1)
            PencilOrder::Quadratic => DiffOp::new([
                DiffOp::term(RatPoly::from_ints(&[1, 0, 1]), 2),
                DiffOp::term(RatPoly::from_ints(&[0, 2 * (l + 1)]), 1),
                DiffOp::term(RatPoly::from_ints(&[l * (l + 1)]), 0),
            ]),
            PencilOrder::Quartic => {
                let c3 = 4 * l + 12;
                let c2 = 2 * (l + 2) * (l + 3);
                let c1 = 4 * (l + 1) * (l + 2) * (l + 3);
                let c0 = l * (l + 1) * (l + 2) * (l + 3);
                DiffOp::new([
                    DiffOp::term(RatPoly::from_ints(&[1, 0, 2, 0, 1]), 4),
                    DiffOp::term(RatPoly::from_ints(&[0, c3, 0, c3]), 3),
                    DiffOp::term(RatPoly::from_ints(&[c2, 0, 3 * c2]), 2),
                    DiffOp::term(RatPoly::from_ints(&[0, c1]), 1),
                    DiffOp::term(RatPoly::from_ints(&[c0]), 0),
                ])
            }
        }
    }

    /// Matrix of the operator on `{1, z, ..., z^max_degree}`; column `j` holds
    /// the coefficients of `op(z^j)`.
    pub fn basis_matrix(&self, max_degree: usize) -> RatMatrix {
        let op = self.operator();
        let images: Vec<RatPoly> =
            (0..=max_degree).map(|j| op.apply(&RatPoly::monomial(Rational::one(), j))).collect();
        let rows = images.iter().map(|p| (p.degree() + 1) as usize).max().unwrap_or(0).max(1);
        let mut m = RatMatrix::zeros(rows, max_degree + 1);
        for (j, p) in images.iter().enumerate() {
            for (i, c) in p.coeffs().iter().enumerate() {
                m.set(i, j, c.clone());
            }
        }
        m
    }
}

/// One point of a discrete spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub family: u8,
    pub l: usize,
    pub lambda: i64,
}

/// Eigenvalue attached to `(order, family, l)`, or an error when the pair
/// is outside the family's range.
pub fn family_lambda(order: PencilOrder, family: u8, l: usize) -> Result<i64> {
    if family == 0 || family > order.family_count() {
        return Err(invalid(format!("{order} pencil has no family {family}")));
    }
    if family == 1 && l == 0 {
        return Err(invalid("family 1 starts at l = 1"));
    }
    Ok(-(l as i64) - (family as i64 - 1))
}

pub fn quadratic_spectrum(l_max: usize) -> Result<Vec<SpectrumEntry>> {
    if l_max < 1 {
        return Err(invalid("l_max must be at least 1"));
    }
    spectrum(PencilOrder::Quadratic, l_max)
}

/// The four quartic families, after checking for every `l` that the
/// characteristic polynomial splits over `{-l, -l-1, -l-2, -l-3}`.
pub fn quartic_spectrum(l_max: usize) -> Result<Vec<SpectrumEntry>> {
    if l_max < 1 {
        return Err(invalid("l_max must be at least 1"));
    }
    for l in 0..=l_max {
        verify_characteristic_roots(l)?;
    }
    spectrum(PencilOrder::Quartic, l_max)
}

fn spectrum(order: PencilOrder, l_max: usize) -> Result<Vec<SpectrumEntry>> {
    let mut out = Vec::new();
    for family in 1..=order.family_count() {
        let start = if family == 1 { 1 } else { 0 };
        for l in start..=l_max {
            out.push(SpectrumEntry { family, l, lambda: family_lambda(order, family, l)? });
        }
    }
    Ok(out)
}

/// Coefficient of `z^l` in `F_λ z^l` as a polynomial in `λ`, read off the
/// operator symbolically.
pub fn characteristic_polynomial(order: PencilOrder, l: usize) -> RatPoly {
    let lam = RatPoly::z();
    let shift = |j: i64| &lam + &RatPoly::constant(int(j));
    let k = l as i64;
    let falling = |j: i64| -> RatPoly { RatPoly::constant(int((0..j).map(|i| k - i).product())) };
    match order {
        PencilOrder::Quadratic => {
            // k(k-1) + 2(λ+1)k + λ(λ+1)
            &(&falling(2) + &shift(1).scale(&int(2 * k))) + &(&lam * &shift(1))
        }
        PencilOrder::Quartic => {
            let q3 = &shift(3).scale(&int(4));
            let q2 = (&shift(2) * &shift(3)).scale(&int(6));
            let q1 = (&(&shift(1) * &shift(2)) * &shift(3)).scale(&int(4));
            let q0 = &(&(&lam * &shift(1)) * &shift(2)) * &shift(3);
            let mut acc = falling(4);
            acc = &acc + &(q3 * &falling(3));
            acc = &acc + &(&q2 * &falling(2));
            acc = &acc + &(&q1 * &falling(1));
            &acc + &q0
        }
    }
}

/// The factored characteristic polynomial as it is usually quoted:
/// `(λ+l)(λ+l+1)(λ² + (2l+5)λ + l² + 5l + 6)`.
pub fn quoted_characteristic_polynomial(l: usize) -> RatPoly {
    let l = l as i64;
    let a = RatPoly::from_ints(&[l, 1]);
    let b = RatPoly::from_ints(&[l + 1, 1]);
    let c = RatPoly::from_ints(&[l * l + 5 * l + 6, 2 * l + 5, 1]);
    &(&a * &b) * &c
}

/// Divides the quartic characteristic polynomial by `(λ+l+j)`, `j = 0..3`,
/// and checks the two derivations agree.
pub fn verify_characteristic_roots(l: usize) -> Result<()> {
    let derived = characteristic_polynomial(PencilOrder::Quartic, l);
    let quoted = quoted_characteristic_polynomial(l);
    if derived != quoted {
        return Err(Error::InternalConsistency(format!(
            "characteristic polynomial mismatch at l={l}: operator gives {derived}, factored form gives {quoted}"
        )));
    }
    let mut rest = derived;
    for j in 0..4 {
        let factor = RatPoly::from_ints(&[l as i64 + j, 1]);
        let (q, r) = rest.div_rem(&factor);
        if !r.is_zero() {
            return Err(Error::InternalConsistency(format!(
                "λ = {} is not a root of the characteristic polynomial at l={l}",
                -(l as i64) - j
            )));
        }
        rest = q;
    }
    if rest != RatPoly::one() {
        return Err(Error::InternalConsistency(format!("unexpected cofactor {rest} at l={l}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Eigenpair {
    pub order: PencilOrder,
    pub family: u8,
    pub l: usize,
    pub lambda: i64,
    pub psi: RatPoly,
}

#[derive(Serialize, Deserialize)]
struct EigenpairJson {
    order: PencilOrder,
    family: u8,
    l: usize,
    lambda: i64,
    coefficients: RatPoly,
}

impl Serialize for Eigenpair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EigenpairJson {
            order: self.order,
            family: self.family,
            l: self.l,
            lambda: self.lambda,
            coefficients: self.psi.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Eigenpair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = EigenpairJson::deserialize(d)?;
        let expected = family_lambda(j.order, j.family, j.l).map_err(serde::de::Error::custom)?;
        if expected != j.lambda {
            return Err(serde::de::Error::custom(format!(
                "family {} at l={} has λ={expected}, not {}",
                j.family, j.l, j.lambda
            )));
        }
        if j.coefficients.degree() != j.l as isize {
            return Err(serde::de::Error::custom("coefficient list does not have degree l"));
        }
        Ok(Eigenpair { order: j.order, family: j.family, l: j.l, lambda: j.lambda, psi: j.coefficients })
    }
}

impl Eigenpair {
    pub fn spec(&self) -> PencilSpec {
        PencilSpec::new(self.order, self.lambda)
    }

    /// Homogeneity degree of the reconstructed `u(x, y)`.
    pub fn homogeneity(&self) -> i64 {
        -self.lambda
    }
}

/// Kernel of `spec` on polynomials of degree at most `max_degree`, as a
/// basis in echelon form by degree: monic, distinct degrees, and each basis
/// element has a zero coefficient at every other element's leading degree.
/// Sorted by decreasing degree.
pub fn polynomial_kernel(spec: PencilSpec, max_degree: usize) -> Vec<RatPoly> {
    echelon_by_degree(spec.basis_matrix(max_degree).nullspace(), max_degree)
}

fn echelon_by_degree(vectors: Vec<Vec<Rational>>, max_degree: usize) -> Vec<RatPoly> {
    if vectors.is_empty() {
        return Vec::new();
    }
    // reverse the columns so pivots land on the highest degree
    let reversed: Vec<Vec<Rational>> =
        vectors.into_iter().map(|v| v.into_iter().rev().collect()).collect();
    let (r, pivots) = RatMatrix::from_rows(reversed).rref();
    (0..pivots.len())
        .map(|i| {
            let coeffs = (0..=max_degree).map(|d| r.get(i, max_degree - d).clone()).collect();
            RatPoly::new(coeffs)
        })
        .collect()
}

/// Kernel of the stacked system restricted to `{z^j : j <= l, j ≡ l mod 2}`.
fn parity_kernel(specs: &[PencilSpec], l: usize) -> Vec<RatPoly> {
    let cols: Vec<usize> = (0..=l).filter(|j| j % 2 == l % 2).collect();
    let mut stacked: Option<RatMatrix> = None;
    for spec in specs {
        let full = spec.basis_matrix(l);
        let mut m = RatMatrix::zeros(full.rows(), cols.len());
        for (c, &j) in cols.iter().enumerate() {
            for r in 0..full.rows() {
                m.set(r, c, full.get(r, j).clone());
            }
        }
        stacked = Some(match stacked {
            None => m,
            Some(s) => s.vstack(&m),
        });
    }
    let ns = stacked.expect("at least one operator").nullspace();
    let lifted = ns
        .into_iter()
        .map(|v| {
            let mut full = vec![Rational::zero(); l + 1];
            for (c, &j) in cols.iter().enumerate() {
                full[j] = v[c].clone();
            }
            full
        })
        .collect();
    echelon_by_degree(lifted, l)
}

fn kernel_eigenfunction(order: PencilOrder, family: u8, l: usize) -> Result<Eigenpair> {
    let lambda = family_lambda(order, family, l)?;
    let spec = PencilSpec::new(order, lambda);
    let mut specs = vec![spec];
    if order == PencilOrder::Quartic && family <= 2 {
        // Inside the parity class the quartic kernel also holds an
        // r²-harmonic mode of degree l-2; the quadratic pencil removes it.
        specs.push(PencilSpec::new(PencilOrder::Quadratic, lambda));
    }
    let kernel = parity_kernel(&specs, l);
    if kernel.len() != 1 {
        return Err(Error::InternalConsistency(format!(
            "{order} family {family}, l={l}: kernel in the parity class has dimension {}",
            kernel.len()
        )));
    }
    let psi = kernel.into_iter().next().unwrap();
    if psi.degree() != l as isize {
        return Err(Error::InternalConsistency(format!(
            "{order} family {family}, l={l}: kernel element has degree {}",
            psi.degree()
        )));
    }
    Ok(Eigenpair { order, family, l, lambda, psi })
}

/// Monic eigenfunction of the quadratic pencil, cross-checked against the
/// downward coefficient recursion.
pub fn quadratic_eigenfunction(l: usize, family: u8) -> Result<Eigenpair> {
    let pair = kernel_eigenfunction(PencilOrder::Quadratic, family, l)?;
    let rec = quadratic_recurrence(l, pair.lambda);
    if rec != pair.psi {
        return Err(Error::InternalConsistency(format!(
            "recursion gives {rec}, kernel gives {}",
            pair.psi
        )));
    }
    Ok(pair)
}

/// Monic eigenfunction of the quartic pencil.
pub fn quartic_eigenfunction(l: usize, family: u8) -> Result<Eigenpair> {
    let pair = kernel_eigenfunction(PencilOrder::Quartic, family, l)?;
    if let Some(rec) = quartic_recurrence(l, pair.lambda) {
        if rec != pair.psi {
            return Err(Error::InternalConsistency(format!(
                "quartic recursion gives {rec}, kernel gives {}",
                pair.psi
            )));
        }
    }
    Ok(pair)
}

pub fn eigenfunction(order: PencilOrder, l: usize, family: u8) -> Result<Eigenpair> {
    match order {
        PencilOrder::Quadratic => quadratic_eigenfunction(l, family),
        PencilOrder::Quartic => quartic_eigenfunction(l, family),
    }
}

/// `a_k = -(k+2)(k+1) a_{k+2} / ((λ+k)(λ+k+1))`, from `a_l = 1` downward.
pub fn quadratic_recurrence(l: usize, lambda: i64) -> RatPoly {
    let mut a = vec![Rational::zero(); l + 1];
    a[l] = Rational::one();
    let mut k = l as i64 - 2;
    while k >= 0 {
        let num = (k + 2) * (k + 1);
        let den = (lambda + k) * (lambda + k + 1);
        a[k as usize] = -&a[k as usize + 2] * rat(num, den);
        k -= 2;
    }
    RatPoly::new(a)
}

/// The alternative closed form quoted alongside the recursion, with
/// `2(2λ+1)k` in the denominator where the recursion has `2(λ+1)k`.
/// Returns `None` if a denominator vanishes.
pub fn quadratic_quoted_closed_form(l: usize, lambda: i64) -> Option<RatPoly> {
    let mut a = vec![Rational::zero(); l + 1];
    a[l] = Rational::one();
    let mut k = l as i64 - 2;
    while k >= 0 {
        let num = (k + 2) * (k + 1);
        let den = k * (k - 1) + 2 * (2 * lambda + 1) * k + lambda * (lambda + 1);
        if den == 0 {
            return None;
        }
        a[k as usize] = -&a[k as usize + 2] * rat(num, den);
        k -= 2;
    }
    Some(RatPoly::new(a))
}

/// Coefficients `(P4, P2, P0)` of `P4 b_{k+4} + P2 b_{k+2} + P0 b_k = 0`,
/// the `z^k` coefficient of the quartic pencil applied to `Σ b_j z^j`.
pub fn quartic_relation(k: i64, lambda: i64) -> (BigInt, BigInt, BigInt) {
    let big = BigInt::from;
    let p4 = big((k + 4) * (k + 3)) * big((k + 2) * (k + 1));
    let inner = 2 * k * (k - 1) + (4 * lambda + 12) * k + 2 * (lambda + 2) * (lambda + 3);
    let p2 = big((k + 2) * (k + 1)) * big(inner);
    let p0 = big((lambda + k) * (lambda + k + 1)) * big((lambda + k + 2) * (lambda + k + 3));
    (p4, p2, p0)
}

/// The quartic relation in the form it is usually quoted: the general line
/// for `k >= 4` and four separate lines for `k = 0..3`.
pub fn quartic_quoted_relation(k: i64, lambda: i64) -> (BigInt, BigInt, BigInt) {
    let big = BigInt::from;
    let l = lambda;
    let l4 = |a: i64, b: i64, c: i64, d: i64| big(l * l * l * l + a * l * l * l + b * l * l + c * l + d);
    match k {
        0 => (big(24), big(4 * (l * l + 5 * l) + 24), big(l * (l * l * l + 6 * l * l + 11 * l + 6))),
        1 => (big(120), big(12 * (l * l + 7 * l + 12)), l4(10, 17, 17, 24)),
        2 => (big(360), big(24 * (l * l + 9 * l + 20)), l4(10, 47, 110, 120)),
        3 => (big(840), big(240 * (l + 5)), l4(10, 71, 254, 460)),
        _ => {
            let p4 = big((k + 4) * (k + 3)) * big((k + 2) * (k + 1));
            let bracket = 2 * l * (l + 5) + 4 * l * k + 2 * k * (k - 1) + 12 * k + 12;
            let p2 = big((k + 2) * (k + 1)) * big(bracket);
            let ff = |n: i64| -> i64 { (0..n).map(|i| k - i).product() };
            let p0 = big(l * (l * l * l + 6 * l * l + 11 * l + 6))
                + big(4 * l * (l * l + 6 * l + 11))
                + big(6 * l * (l + 5) * ff(2))
                + big(4 * l * ff(3))
                + big(ff(4))
                + big(12 * ff(3))
                + big(36 * ff(2))
                + big(24 * k);
            (p4, p2, p0)
        }
    }
}

fn solve_quartic_downward(
    l: usize,
    lambda: i64,
    relation: impl Fn(i64, i64) -> (BigInt, BigInt, BigInt),
) -> Option<RatPoly> {
    let mut b = vec![Rational::zero(); l + 5];
    b[l] = Rational::one();
    let mut k = l as i64 - 2;
    while k >= 0 {
        let (p4, p2, p0) = relation(k, lambda);
        if p0.is_zero() {
            return None;
        }
        let ku = k as usize;
        let num = &b[ku + 4] * Rational::from_integer(p4) + &b[ku + 2] * Rational::from_integer(p2);
        b[ku] = -num / Rational::from_integer(p0);
        k -= 2;
    }
    b.truncate(l + 1);
    Some(RatPoly::new(b))
}

/// Downward solution of the quartic coefficient relation from `b_l = 1`.
/// `None` when the relation leaves a coefficient undetermined, which
/// happens for the two harmonic families.
pub fn quartic_recurrence(l: usize, lambda: i64) -> Option<RatPoly> {
    solve_quartic_downward(l, lambda, quartic_relation)
}

pub fn quartic_quoted_recurrence(l: usize, lambda: i64) -> Option<RatPoly> {
    solve_quartic_downward(l, lambda, quartic_quoted_relation)
}

/// Side-by-side result of the quartic recursions against the kernel.
#[derive(Clone, Debug, Serialize)]
pub struct QuarticRecursionComparison {
    pub l: usize,
    pub family: u8,
    pub kernel: RatPoly,
    pub derived: Option<RatPoly>,
    pub quoted: Option<RatPoly>,
    pub derived_matches: bool,
    pub quoted_matches: bool,
}

pub fn compare_quartic_recursions(l: usize, family: u8) -> Result<QuarticRecursionComparison> {
    let pair = quartic_eigenfunction(l, family)?;
    let derived = quartic_recurrence(l, pair.lambda);
    let quoted = quartic_quoted_recurrence(l, pair.lambda);
    Ok(QuarticRecursionComparison {
        l,
        family,
        derived_matches: derived.as_ref() == Some(&pair.psi),
        quoted_matches: quoted.as_ref() == Some(&pair.psi),
        kernel: pair.psi,
        derived,
        quoted,
    })
}

/// The pencil at `pair.lambda` applied to `pair.psi`.
pub fn pencil_residual(pair: &Eigenpair) -> RatPoly {
    pair.spec().operator().apply(&pair.psi)
}

/// Homogeneous polynomial in `(x, y)`; `coeffs[k]` multiplies `x^k y^(n-k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomogeneousPoly {
    pub degree: usize,
    #[serde(serialize_with = "rational_serde::many")]
    pub coeffs: Vec<Rational>,
}

impl HomogeneousPoly {
    pub fn zero(degree: usize) -> Self {
        HomogeneousPoly { degree, coeffs: vec![Rational::zero(); degree + 1] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// `u(x, y) = (-y)^n ψ(x / (-y))`.
    pub fn from_blowup(psi: &RatPoly, n: usize) -> Result<Self> {
        if psi.degree() > n as isize {
            return Err(invalid(format!(
                "degree {} exceeds homogeneity {n}; the reconstruction is not a polynomial",
                psi.degree()
            )));
        }
        let mut u = Self::zero(n);
        for (k, a) in psi.coeffs().iter().enumerate() {
            u.coeffs[k] = if (n - k) % 2 == 0 { a.clone() } else { -a };
        }
        Ok(u)
    }

    /// `ψ(z) = u(z, -1)`.
    pub fn dehomogenize(&self) -> RatPoly {
        let n = self.degree;
        RatPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| if (n - k) % 2 == 0 { c.clone() } else { -c })
                .collect(),
        )
    }

    /// Real and imaginary parts of `(x + iy)^n`.
    pub fn complex_power(n: usize) -> (Self, Self) {
        let mut re = Self::zero(n);
        let mut im = Self::zero(n);
        let mut binom = BigInt::one();
        for k in (0..=n).rev() {
            // C(n, k) x^k (iy)^(n-k)
            let j = n - k;
            let c = Rational::from_integer(binom.clone());
            match j % 4 {
                0 => re.coeffs[k] = c,
                1 => im.coeffs[k] = c,
                2 => re.coeffs[k] = -c,
                _ => im.coeffs[k] = -c,
            }
            if k > 0 {
                binom = binom * BigInt::from(k) / BigInt::from(j + 1);
            }
        }
        (re, im)
    }

    pub fn laplacian(&self) -> Self {
        let n = self.degree;
        if n < 2 {
            return Self::zero(0);
        }
        let mut out = Self::zero(n - 2);
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // ∂xx x^k y^(n-k)
            if k >= 2 {
                out.coeffs[k - 2] += c * int((k * (k - 1)) as i64);
            }
            let j = n - k;
            if j >= 2 {
                out.coeffs[k] += c * int((j * (j - 1)) as i64);
            }
        }
        out
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        let n = self.degree as i32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| to_f64(c) * x.powi(k as i32) * y.powi(n - k as i32))
            .sum()
    }
}

impl fmt::Display for HomogeneousPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.degree;
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*x^{k}*y^{}", n - k)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub order: PencilOrder,
    pub lambda: i64,
    pub u: HomogeneousPoly,
    pub laplacian: HomogeneousPoly,
    pub bilaplacian: HomogeneousPoly,
    pub harmonic: bool,
    pub biharmonic: bool,
    /// Δu = 0 for quadratic pairs, Δ²u = 0 for quartic pairs.
    pub annihilated: bool,
}

pub fn reconstruct_xy(pair: &Eigenpair) -> Result<ReconstructionReport> {
    if pair.lambda > 0 {
        return Err(invalid("positive λ gives a negative homogeneity degree"));
    }
    let u = HomogeneousPoly::from_blowup(&pair.psi, (-pair.lambda) as usize)?;
    let laplacian = u.laplacian();
    let bilaplacian = laplacian.laplacian();
    let harmonic = laplacian.is_zero();
    let biharmonic = bilaplacian.is_zero();
    let annihilated = match pair.order {
        PencilOrder::Quadratic => harmonic,
        PencilOrder::Quartic => biharmonic,
    };
    Ok(ReconstructionReport { order: pair.order, lambda: pair.lambda, u, laplacian, bilaplacian, harmonic, biharmonic, annihilated })
}

#[derive(Clone, Debug, Serialize)]
pub struct SlSample {
    pub z: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SLReduction {
    pub lambda: i64,
    #[serde(serialize_with = "rational_serde::one")]
    pub gamma: Rational,
    pub mu: i64,
    pub phi_samples: Vec<SlSample>,
}

/// Bits kept by the rational square root used for half-integer powers.
const SQRT_BITS: u64 = 256;

/// Square root of a positive rational to about `SQRT_BITS` bits, by Newton
/// iteration with the iterate rounded to a power-of-two denominator.
fn sqrt_rational(a: &Rational) -> Rational {
    let guess = to_f64(a).sqrt();
    let mut x = Rational::from_float(guess).unwrap_or_else(Rational::one);
    let scale = Rational::from_integer(BigInt::one() << SQRT_BITS);
    for _ in 0..8 {
        x = (&x + a / &x) / int(2);
        x = (&x * &scale).round() / &scale;
    }
    x
}

/// `(v, v', v'')` for `v = (1+z²)^h` at rational `z`.
fn power_jet(z: &Rational, h: &Rational) -> (Rational, Rational, Rational) {
    let s0 = Rational::one() + z * z;
    let s1 = z * int(2);
    let s2 = int(2);
    let twice = (h * int(2)).to_integer().to_i64().expect("small exponent");
    // s0^h = s0^floor(h) * sqrt(s0)^(odd part)
    let mut v = s0.pow((twice.div_euclid(2)) as i32);
    if twice.rem_euclid(2) == 1 {
        v *= sqrt_rational(&s0);
    }
    let ratio = &s1 / &s0;
    let d1 = &v * h * &ratio;
    let d2 = &v * (h * (h - Rational::one()) * &ratio * &ratio + h * &s2 / &s0);
    (v, d1, d2)
}

/// Residual of `-(1+z²)² φ'' - μ φ` with `φ = (1+z²)^((λ+1)/2) ψ`.
pub fn sturm_liouville_check(pair: &Eigenpair, sample_points: &[Rational]) -> Result<SLReduction> {
    if pair.order != PencilOrder::Quadratic {
        return Err(invalid("the Sturm–Liouville form applies to the quadratic pencil only"));
    }
    let lambda = pair.lambda;
    let h = rat(lambda + 1, 2);
    let mu = (lambda + 1) * (lambda - 1);
    let d1 = pair.psi.diff(1);
    let d2 = pair.psi.diff(2);
    let phi_samples = sample_points
        .iter()
        .map(|z| {
            let (v, v1, v2) = power_jet(z, &h);
            let (p0, p1, p2) = (pair.psi.eval(z), d1.eval(z), d2.eval(z));
            let phi = &v * &p0;
            let phi2 = &v2 * &p0 + &v1 * &p1 * int(2) + &v * &p2;
            let s0 = Rational::one() + z * z;
            let residual = -(&s0 * &s0 * phi2) - &phi * int(mu);
            SlSample { z: to_f64(z), residual: to_f64(&residual).abs() }
        })
        .collect();
    Ok(SLReduction { lambda, gamma: -h, mu, phi_samples })
}

/// Bounded solutions considered as eigenfunction candidates.
#[derive(Clone, Debug)]
pub enum Candidate {
    Polynomial(RatPoly),
    /// The bounded non-polynomial solution `tan⁻¹ z` at λ = 0.
    Arctan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FilterVerdict {
    pub accepted: bool,
    pub crack_relevant: bool,
    pub reason: String,
}

/// Keeps polynomial eigenfunctions and rejects `tan⁻¹ z`, whose limit
/// `τ → ∞` is the discontinuous trace `sign x`.
pub fn analyticity_filter(candidate: &Candidate) -> FilterVerdict {
    match candidate {
        Candidate::Arctan => FilterVerdict {
            accepted: false,
            crack_relevant: false,
            reason: "discontinuous trace sign x".into(),
        },
        Candidate::Polynomial(p) => {
            let roots = if p.degree() >= 1 { crate::nodal::real_root_count(p) } else { 0 };
            FilterVerdict {
                accepted: true,
                crack_relevant: roots > 0,
                reason: if roots > 0 {
                    "polynomial".into()
                } else {
                    "no zeros, irrelevant to cracks".into()
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn p(s: &str) -> RatPoly {
        RatPoly::parse(s).unwrap()
    }

    #[test]
    fn quartic_operator_factors_through_quadratic() {
        for lambda in -8..=3 {
            let outer = PencilSpec::new(PencilOrder::Quadratic, lambda + 2).operator();
            let inner = PencilSpec::new(PencilOrder::Quadratic, lambda).operator();
            assert_eq!(outer.compose(&inner), PencilSpec::new(PencilOrder::Quartic, lambda).operator());
        }
    }

    #[test]
    fn quadratic_spectrum_examples() {
        let s = quadratic_spectrum(3).unwrap();
        let f1: Vec<i64> = s.iter().filter(|e| e.family == 1).map(|e| e.lambda).collect();
        assert_eq!(f1, vec![-1, -2, -3]);
        let s2 = quadratic_spectrum(2).unwrap();
        let f2: Vec<i64> = s2.iter().filter(|e| e.family == 2).map(|e| e.lambda).collect();
        assert_eq!(f2, vec![-1, -2, -3]);
        let mut all: Vec<i64> = s.iter().map(|e| e.lambda).collect();
        all.sort();
        all.dedup();
        assert_eq!(all, vec![-4, -3, -2, -1]);
        assert!(quadratic_spectrum(0).is_err());
    }

    #[test]
    fn quartic_spectrum_examples() {
        let s = quartic_spectrum(3).unwrap();
        let at_l1: Vec<i64> = s.iter().filter(|e| e.l == 1).map(|e| e.lambda).collect();
        assert_eq!(at_l1, vec![-1, -2, -3, -4]);
        let at_l0: Vec<i64> = s.iter().filter(|e| e.l == 0).map(|e| e.lambda).collect();
        assert_eq!(at_l0, vec![-1, -2, -3]);
        assert!(quartic_spectrum(0).is_err());
    }

    #[test]
    fn quadratic_table() {
        assert_eq!(quadratic_eigenfunction(2, 1).unwrap().psi, p("z^2 - 1"));
        assert_eq!(quadratic_eigenfunction(4, 1).unwrap().psi, p("z^4 - 6z^2 + 1"));
        assert_eq!(quadratic_eigenfunction(3, 2).unwrap().psi, p("z^3 - z"));
        assert_eq!(quadratic_eigenfunction(2, 2).unwrap().psi, p("z^2 - 1/3"));
        assert_eq!(quadratic_eigenfunction(0, 2).unwrap().psi, RatPoly::one());
        assert!(quadratic_eigenfunction(0, 1).is_err());
        assert!(quadratic_eigenfunction(2, 3).is_err());
    }

    #[test]
    fn quartic_examples() {
        assert_eq!(quartic_eigenfunction(2, 3).unwrap().psi, p("z^2 - 1/3"));
        assert_eq!(quartic_eigenfunction(1, 3).unwrap().psi, p("z"));
        assert_eq!(quartic_eigenfunction(0, 3).unwrap().psi, RatPoly::one());
        assert_eq!(quartic_eigenfunction(2, 1).unwrap().psi, p("z^2 - 1"));
        assert_eq!(quartic_eigenfunction(2, 3).unwrap().lambda, -4);
        assert!(quartic_eigenfunction(0, 1).is_err());
        assert!(quartic_eigenfunction(1, 5).is_err());
    }

    #[test]
    fn residual_examples() {
        let pair = |psi: &str, lambda| Eigenpair { order: PencilOrder::Quadratic, family: 1, l: 2, lambda, psi: p(psi) };
        assert!(pencil_residual(&pair("z^2 - 1", -2)).is_zero());
        assert!(pencil_residual(&pair("z", -1)).is_zero());
        assert!(!pencil_residual(&pair("z^2 - 1", -3)).is_zero());
    }

    #[test]
    fn quoted_closed_form_disagrees_with_kernel() {
        let lambda = -4;
        assert_eq!(quadratic_recurrence(4, lambda), p("z^4 - 6z^2 + 1"));
        let quoted = quadratic_quoted_closed_form(4, lambda).unwrap();
        assert_eq!(quoted.coeff(2), rat(6, 7));
    }

    #[test]
    fn quartic_quoted_relation_has_missing_factor() {
        // the general line drops a factor k in one term
        let (q4, q2, q0) = quartic_quoted_relation(5, -3);
        let (d4, d2, d0) = quartic_relation(5, -3);
        assert_eq!((q4, q2), (d4, d2));
        assert_ne!(q0, d0);
        // the k = 0 line is right
        assert_eq!(quartic_quoted_relation(0, -7), quartic_relation(0, -7));
    }

    #[test]
    fn reconstruction_examples() {
        let r = reconstruct_xy(&quadratic_eigenfunction(4, 1).unwrap()).unwrap();
        let (re4, im4) = HomogeneousPoly::complex_power(4);
        assert_eq!(r.u, re4);
        assert!(r.harmonic);
        let r = reconstruct_xy(&quadratic_eigenfunction(3, 2).unwrap()).unwrap();
        assert_eq!(r.u.coeffs[3], int(-1));
        assert_eq!(r.u.coeffs[1], int(1));
        let quarter = HomogeneousPoly { degree: 4, coeffs: im4.coeffs.iter().map(|c| -c / int(4)).collect() };
        assert_eq!(r.u, quarter);
        let r = reconstruct_xy(&quartic_eigenfunction(0, 3).unwrap()).unwrap();
        assert_eq!(r.u.to_string(), "1*x^0*y^2");
        assert!(r.biharmonic && !r.harmonic);
        assert_eq!(r.laplacian.coeffs, vec![int(2)]);
    }

    #[test]
    fn non_polynomial_reconstruction_rejected() {
        let pair = Eigenpair { order: PencilOrder::Quadratic, family: 1, l: 3, lambda: -2, psi: p("z^3") };
        assert!(reconstruct_xy(&pair).is_err());
    }

    #[test]
    fn sturm_liouville_examples() {
        let pts: Vec<Rational> = [(0, 1), (1, 2), (1, 1), (2, 1)].iter().map(|&(a, b)| rat(a, b)).collect();
        let sl = sturm_liouville_check(&quadratic_eigenfunction(1, 1).unwrap(), &pts).unwrap();
        assert_eq!(sl.mu, 0);
        assert!(sl.gamma.is_zero());
        assert!(sl.phi_samples.iter().all(|s| s.residual == 0.0));
        let sl = sturm_liouville_check(&quadratic_eigenfunction(2, 1).unwrap(), &pts).unwrap();
        assert_eq!(sl.mu, 3);
        assert!(sl.phi_samples.iter().all(|s| s.residual < 1e-10), "{:?}", sl.phi_samples);
        let mus: Vec<i64> = (1..10).map(|l| (1 - l) * (-l - 1)).collect();
        assert!(mus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rational_sqrt_is_accurate() {
        let two = int(2);
        let r = sqrt_rational(&two);
        let err = &r * &r - &two;
        assert!(err.abs() < rat(1, 1_000_000_000_000_000_000));
    }

    #[test]
    fn filter_examples() {
        let one = analyticity_filter(&Candidate::Polynomial(RatPoly::one()));
        assert!(one.accepted && !one.crack_relevant);
        assert_eq!(one.reason, "no zeros, irrelevant to cracks");
        let arctan = analyticity_filter(&Candidate::Arctan);
        assert!(!arctan.accepted);
        assert_eq!(arctan.reason, "discontinuous trace sign x");
        for l in 1..6 {
            let v = analyticity_filter(&Candidate::Polynomial(quadratic_eigenfunction(l, 1).unwrap().psi));
            assert!(v.accepted && v.crack_relevant);
        }
    }

    #[test]
    fn json_round_trip() {
        let pair = quadratic_eigenfunction(4, 1).unwrap();
        let js = serde_json::to_string(&pair).unwrap();
        assert!(js.starts_with(r#"{"order":"quadratic","family":1,"l":4,"lambda":-4,"coefficients":[["1","1"]"#));
        let back: Eigenpair = serde_json::from_str(&js).unwrap();
        assert_eq!(back, pair);
        let bad = js.replace("-4", "-5");
        assert!(serde_json::from_str::<Eigenpair>(&bad).is_err());
    }
}
