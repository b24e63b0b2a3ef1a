//! Exact univariate polynomials over the rationals and polynomial-coefficient
//! differential operators acting on them.
//!
//! The indeterminate is always printed as `z`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

/// Parses `p`, `p/q`, or a decimal literal with optional exponent (`-1.25e-3`)
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| bad())?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("0{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Serde helpers writing rationals as `[numerator, denominator]` strings.
pub mod rational_serde {
    use super::Rational;
    use serde::ser::SerializeSeq;
    use serde::{Serialize, Serializer};

    struct Repr<'a>(&'a Rational);

    impl Serialize for Repr<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            [self.0.numer().to_string(), self.0.denom().to_string()].serialize(s)
        }
    }

    pub fn one<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Repr(r).serialize(s)
    }

    pub fn opt<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref().map(Repr).serialize(s)
    }

    pub fn many<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&Repr(r))?;
        }
        seq.end()
    }

    pub fn opt_many<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => many(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn intervals<S: Serializer>(v: &[(Rational, Rational)], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (a, b) in v {
            seq.serialize_element(&(Repr(a), Repr(b)))?;
        }
        seq.end()
    }
}

/// Dense polynomial with exact rational coefficients, index = degree.
///
/// Trailing zeros are always trimmed, so the zero polynomial has no
/// coefficients and `degree() == -1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RatPoly {
    coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn zero() -> Self {
        RatPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    /// `c * z^k`
    pub fn monomial(c: Rational, k: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    /// The indeterminate `z`.
    pub fn z() -> Self {
        Self::monomial(Rational::one(), 1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `-1` for the zero polynomial.
    pub fn degree(&self) -> isize {
        self.coeffs.len() as isize - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        horner(&self.to_f64_coeffs(), x)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Divides by the leading coefficient. The zero polynomial stays zero.
    pub fn monic(&self) -> Self {
        match self.leading() {
            Some(lc) => self.scale(&lc.recip()),
            None => Self::zero(),
        }
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * int(k as i64))
                .collect(),
        )
    }

    /// Exact `order`-th derivative.
    pub fn diff(&self, order: usize) -> Self {
        if order >= self.coeffs.len() {
            return Self::zero();
        }
        let coeffs = (order..self.coeffs.len())
            .map(|k| {
                let falling: i64 = ((k - order + 1)..=k).map(|j| j as i64).product();
                &self.coeffs[k] * int(falling)
            })
            .collect();
        Self::new(coeffs)
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, divisor: &RatPoly) -> (RatPoly, RatPoly) {
        let lc = divisor.leading().expect("division by the zero polynomial");
        let dd = divisor.coeffs.len();
        let mut rem = self.coeffs.clone();
        if rem.len() < dd {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd + 1];
        for i in (0..quot.len()).rev() {
            let q = &rem[i + dd - 1] / lc;
            if !q.is_zero() {
                for (j, d) in divisor.coeffs.iter().enumerate() {
                    rem[i + j] -= &q * d;
                }
            }
            quot[i] = q;
        }
        rem.truncate(dd - 1);
        (Self::new(quot), Self::new(rem))
    }

    /// Monic greatest common divisor (zero if both are zero).
    pub fn gcd(a: &RatPoly, b: &RatPoly) -> RatPoly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r.primitive();
        }
        a.monic()
    }

    /// Positive rational multiple with coprime integer coefficients. Sign is
    /// preserved, which is what Sturm sequences need.
    pub fn primitive(&self) -> RatPoly {
        if self.is_zero() {
            return Self::zero();
        }
        let den_lcm = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * Rational::from_integer(den_lcm.clone())).to_integer())
            .collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        Self::new(ints.into_iter().map(|c| Rational::from_integer(c / &g)).collect())
    }

    /// Square-free decomposition (Yun): `self = lc * prod f_i^i` with each
    /// `f_i` monic, square-free and pairwise coprime. Returns `(f_i, i)` for
    /// the non-constant factors.
    pub fn square_free_decomposition(&self) -> Vec<(RatPoly, usize)> {
        let mut out = Vec::new();
        if self.degree() < 1 {
            return out;
        }
        let f = self.monic();
        let df = f.derivative();
        let mut a = Self::gcd(&f, &df);
        let mut b = f.div_rem(&a).0;
        let mut c = df.div_rem(&a).0;
        let mut d = &c - &b.derivative();
        let mut i = 1;
        loop {
            a = Self::gcd(&b, &d);
            if a.degree() >= 1 {
                out.push((a.clone(), i));
            }
            b = b.div_rem(&a).0;
            if b.degree() < 1 {
                break;
            }
            c = d.div_rem(&a).0;
            d = &c - &b.derivative();
            i += 1;
        }
        out
    }

    /// Product of the distinct irreducible factors, monic.
    pub fn square_free_part(&self) -> RatPoly {
        if self.degree() < 1 {
            return self.monic();
        }
        self.div_rem(&Self::gcd(self, &self.derivative())).0.monic()
    }

    /// Parses the canonical text form (`"-1 + 1*z^2"`); also accepts terms
    /// written without an explicit coefficient (`z^2 - 1`).
    pub fn parse(text: &str) -> Result<RatPoly> {
        let bad = |why: &str| Error::Parse(format!("{why} in polynomial {text:?}"));
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad("empty input"));
        }
        // split into signed terms, keeping exponent signs attached
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = compact.as_bytes();
        for i in 1..bytes.len() {
            let c = bytes[i];
            let prev = bytes[i - 1];
            if (c == b'+' || c == b'-') && !matches!(prev, b'+' | b'-' | b'*' | b'^' | b'e' | b'E' | b'/') {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);

        let mut coeffs: Vec<Rational> = Vec::new();
        for term in terms {
            let term = term.strip_prefix('+').unwrap_or(term);
            let (coef, power) = match term.find('z') {
                None => (parse_rational(term)?, 0usize),
                Some(iz) => {
                    let head = term[..iz].trim_end_matches('*');
                    let coef = match head {
                        "" => Rational::one(),
                        "-" => -Rational::one(),
                        "+" => Rational::one(),
                        h => parse_rational(h)?,
                    };
                    let tail = &term[iz + 1..];
                    let power = if tail.is_empty() {
                        1
                    } else {
                        tail.strip_prefix('^')
                            .ok_or_else(|| bad("expected '^' after z"))?
                            .parse::<usize>()
                            .map_err(|_| bad("bad exponent"))?
                    };
                    (coef, power)
                }
            };
            if coeffs.len() <= power {
                coeffs.resize(power + 1, Rational::zero());
            }
            coeffs[power] += coef;
        }
        Ok(Self::new(coeffs))
    }

    /// `[[num, den], ...]` indexed by degree, as decimal strings.
    pub fn to_pairs(&self) -> Vec<[String; 2]> {
        self.coeffs
            .iter()
            .map(|c| [c.numer().to_string(), c.denom().to_string()])
            .collect()
    }

    pub fn from_pairs(pairs: &[[String; 2]]) -> Result<RatPoly> {
        let coeffs = pairs
            .iter()
            .map(|[n, d]| parse_rational(&format!("{n}/{d}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(coeffs))
    }

    /// Nonzero coefficient degrees all share one parity.
    pub fn has_uniform_parity(&self) -> bool {
        let mut parity = None;
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                match parity {
                    None => parity = Some(k % 2),
                    Some(p) if p != k % 2 => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl fmt::Display for RatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*z")?,
                _ => write!(f, "{c}*z^{k}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for RatPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RatPoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[String; 2]>::deserialize(deserializer)?;
        RatPoly::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

impl Add<&RatPoly> for &RatPoly {
    type Output = RatPoly;
    fn add(self, rhs: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RatPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub<&RatPoly> for &RatPoly {
    type Output = RatPoly;
    fn sub(self, rhs: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RatPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul<&RatPoly> for &RatPoly {
    type Output = RatPoly;
    fn mul(self, rhs: &RatPoly) -> RatPoly {
        if self.is_zero() || rhs.is_zero() {
            return RatPoly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly::new(out)
    }
}

impl Neg for &RatPoly {
    type Output = RatPoly;
    fn neg(self) -> RatPoly {
        RatPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr<RatPoly> for RatPoly {
            type Output = RatPoly;
            fn $method(self, rhs: RatPoly) -> RatPoly {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&RatPoly> for RatPoly {
            type Output = RatPoly;
            fn $method(self, rhs: &RatPoly) -> RatPoly {
                (&self).$method(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for RatPoly {
    type Output = RatPoly;
    fn neg(self) -> RatPoly {
        -&self
    }
}

/// One term `coefficient(z) * D_z^order` of a differential operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOpTerm {
    pub coefficient: RatPoly,
    pub order: usize,
}

/// A finite sum of [`DiffOpTerm`]s. Terms are kept merged by order and
/// sorted descending, so two equal operators compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiffOp {
    terms: Vec<DiffOpTerm>,
}

impl DiffOp {
    pub fn new(terms: impl IntoIterator<Item = DiffOpTerm>) -> Self {
        let mut by_order: Vec<RatPoly> = Vec::new();
        for t in terms {
            if by_order.len() <= t.order {
                by_order.resize(t.order + 1, RatPoly::zero());
            }
            by_order[t.order] = &by_order[t.order] + &t.coefficient;
        }
        let terms = by_order
            .into_iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(order, coefficient)| DiffOpTerm { coefficient, order })
            .collect();
        DiffOp { terms }
    }

    pub fn term(coefficient: RatPoly, order: usize) -> DiffOpTerm {
        DiffOpTerm { coefficient, order }
    }

    pub fn terms(&self) -> &[DiffOpTerm] {
        &self.terms
    }

    pub fn order(&self) -> usize {
        self.terms.first().map_or(0, |t| t.order)
    }

    /// `sum_i c_i(z) * p^(order_i)(z)`, exactly.
    pub fn apply(&self, p: &RatPoly) -> RatPoly {
        self.terms
            .iter()
            .fold(RatPoly::zero(), |acc, t| &acc + &(&t.coefficient * &p.diff(t.order)))
    }

    /// Operator product `self ∘ other`, expanded with the Leibniz rule.
    pub fn compose(&self, other: &DiffOp) -> DiffOp {
        let mut out = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                // a D^i (b D^j) = a * sum_k C(i,k) b^(k) D^(i-k+j)
                let mut binom = BigInt::one();
                for k in 0..=a.order {
                    let coef = (&a.coefficient * &b.coefficient.diff(k)).scale(&Rational::from_integer(binom.clone()));
                    out.push(DiffOpTerm { coefficient: coef, order: a.order - k + b.order });
                    binom = binom * BigInt::from(a.order - k) / BigInt::from(k + 1);
                }
            }
        }
        DiffOp::new(out)
    }

    pub fn add(&self, other: &DiffOp) -> DiffOp {
        DiffOp::new(self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn scale(&self, c: &Rational) -> DiffOp {
        DiffOp::new(self.terms.iter().map(|t| DiffOpTerm { coefficient: t.coefficient.scale(c), order: t.order }))
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match t.order {
                0 => write!(f, "({})", t.coefficient)?,
                1 => write!(f, "({})*D", t.coefficient)?,
                n => write!(f, "({})*D^{n}", t.coefficient)?,
            }
        }
        Ok(())
    }
}

/// `A* = -D_z[(1+z^2) D_z] = -(1+z^2) D^2 - 2z D`.
pub fn a_star() -> DiffOp {
    DiffOp::new([
        DiffOp::term(RatPoly::from_ints(&[-1, 0, -1]), 2),
        DiffOp::term(RatPoly::from_ints(&[0, -2]), 1),
    ])
}

/// `C* w = -(1+z^2)^2 w'''' - 12z(1+z^2) w''' - 12(1+3z^2) w'' - 24z w'`.
pub fn c_star() -> DiffOp {
    DiffOp::new([
        DiffOp::term(RatPoly::from_ints(&[-1, 0, -2, 0, -1]), 4),
        DiffOp::term(RatPoly::from_ints(&[0, -12, 0, -12]), 3),
        DiffOp::term(RatPoly::from_ints(&[-12, 0, -36]), 2),
        DiffOp::term(RatPoly::from_ints(&[0, -24]), 1),
    ])
}
