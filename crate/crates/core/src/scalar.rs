//! Exact arithmetic in ℚ or a single real quadratic field ℚ(√d).
//!
//! A [`QuadScalar`] is `a + b·√d` with arbitrary-precision rational `a`, `b`.
//! The radical is tracked per value: a value with `b = 0` is stored with
//! `d = 0` and combines freely with any field, while two values carrying
//! different radicals cannot be combined.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot mix sqrt({0}) and sqrt({1}) in one model")]
    MixedField(u32, u32),
    #[error("sqrt({0}) is not a valid field generator (need a square-free integer > 1)")]
    InvalidRadical(u64),
    #[error("cannot parse scalar {text:?}: {reason}")]
    Parse { text: String, reason: String },
}

/// The scalar field a model is declared over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Rational,
    Quadratic(u32),
}

impl Field {
    pub fn new(d: Option<u64>) -> Result<Field, ScalarError> {
        match d {
            None => Ok(Field::Rational),
            Some(d) => {
                if !is_square_free(d) {
                    return Err(ScalarError::InvalidRadical(d));
                }
                let d = u32::try_from(d).map_err(|_| ScalarError::InvalidRadical(d))?;
                Ok(Field::Quadratic(d))
            }
        }
    }

    pub fn radical(self) -> Option<u32> {
        match self {
            Field::Rational => None,
            Field::Quadratic(d) => Some(d),
        }
    }

    /// Whether `x` lives in this field.
    pub fn contains(self, x: &QuadScalar) -> bool {
        x.d == 0 || Some(x.d) == self.radical()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rational => write!(f, "Q"),
            Field::Quadratic(d) => write!(f, "Q(sqrt({d}))"),
        }
    }
}

fn is_square_free(d: u64) -> bool {
    if d < 2 {
        return false;
    }
    let mut n = d;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Exact element `a + b·√d`.
///
/// Canonical form: `b == 0` implies `d == 0`, rationals reduced with positive
/// denominators. Structural equality is therefore value equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadScalar {
    a: BigRational,
    b: BigRational,
    d: u32,
}

impl QuadScalar {
    pub fn new(a: BigRational, b: BigRational, d: u32) -> Result<QuadScalar, ScalarError> {
        if !b.is_zero() && !is_square_free(u64::from(d)) {
            return Err(ScalarError::InvalidRadical(u64::from(d)));
        }
        Ok(QuadScalar::raw(a, b, d))
    }

    fn raw(a: BigRational, b: BigRational, d: u32) -> QuadScalar {
        let d = if b.is_zero() { 0 } else { d };
        QuadScalar { a, b, d }
    }

    pub fn zero() -> QuadScalar {
        QuadScalar::raw(BigRational::zero(), BigRational::zero(), 0)
    }

    pub fn one() -> QuadScalar {
        QuadScalar::integer(1)
    }

    pub fn integer(n: i64) -> QuadScalar {
        QuadScalar::raw(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
            0,
        )
    }

    /// The rational `num/den`. Panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> QuadScalar {
        QuadScalar::rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn rational(a: BigRational) -> QuadScalar {
        QuadScalar::raw(a, BigRational::zero(), 0)
    }

    /// `√d` itself.
    pub fn sqrt(d: u32) -> Result<QuadScalar, ScalarError> {
        QuadScalar::new(BigRational::zero(), BigRational::one(), d)
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    pub fn radical_part(&self) -> &BigRational {
        &self.b
    }

    /// The radicand in use, or `None` for a rational value.
    pub fn radicand(&self) -> Option<u32> {
        (self.d != 0).then_some(self.d)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.b.is_zero() && self.a.is_one()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    fn join(&self, other: &QuadScalar) -> Result<u32, ScalarError> {
        match (self.d, other.d) {
            (0, d) | (d, 0) => Ok(d),
            (x, y) if x == y => Ok(x),
            (x, y) => Err(ScalarError::MixedField(x, y)),
        }
    }

    pub fn checked_add(&self, other: &QuadScalar) -> Result<QuadScalar, ScalarError> {
        let d = self.join(other)?;
        Ok(QuadScalar::raw(&self.a + &other.a, &self.b + &other.b, d))
    }

    pub fn checked_sub(&self, other: &QuadScalar) -> Result<QuadScalar, ScalarError> {
        let d = self.join(other)?;
        Ok(QuadScalar::raw(&self.a - &other.a, &self.b - &other.b, d))
    }

    pub fn checked_mul(&self, other: &QuadScalar) -> Result<QuadScalar, ScalarError> {
        let d = self.join(other)?;
        let dd = BigRational::from_integer(BigInt::from(d));
        let a = &self.a * &other.a + &self.b * &other.b * dd;
        let b = &self.a * &other.b + &self.b * &other.a;
        Ok(QuadScalar::raw(a, b, d))
    }

    pub fn checked_recip(&self) -> Result<QuadScalar, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        let dd = BigRational::from_integer(BigInt::from(self.d));
        // (a + b√d)(a − b√d) = a² − b²d, nonzero because √d is irrational
        let norm = &self.a * &self.a - &self.b * &self.b * dd;
        Ok(QuadScalar::raw(&self.a / &norm, -&self.b / &norm, self.d))
    }

    pub fn checked_div(&self, other: &QuadScalar) -> Result<QuadScalar, ScalarError> {
        self.join(other)?;
        self.checked_mul(&other.checked_recip()?)
    }

    pub fn recip(&self) -> QuadScalar {
        self.checked_recip().expect("reciprocal of zero")
    }

    pub fn pow(&self, exp: u32) -> QuadScalar {
        let mut acc = QuadScalar::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 {
            return sb;
        }
        if sa == sb {
            return sa;
        }
        // opposite signs: compare a² against b²d
        let dd = BigRational::from_integer(BigInt::from(self.d));
        let lhs = &self.a * &self.a;
        let rhs = &self.b * &self.b * dd;
        match lhs.cmp(&rhs) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.signum() < 0
    }

    pub fn abs(&self) -> QuadScalar {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Nearest-ish double. Only for numerics and rendering, never for equality.
    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        if self.b.is_zero() {
            return a;
        }
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        a + b * f64::from(self.d).sqrt()
    }

    /// Parse the model-file syntax `p/q`, `p/q + r/s*sqrt(d)` and friends.
    /// Any radical must match `field`.
    pub fn parse(text: &str, field: Field) -> Result<QuadScalar, ScalarError> {
        let value = parse_expr(text)?;
        if let Some(d) = value.radicand_seen {
            if field.radical() != Some(d) {
                return Err(ScalarError::Parse {
                    text: text.to_string(),
                    reason: match field {
                        Field::Rational => format!("sqrt({d}) used in a rational model"),
                        Field::Quadratic(f) => format!("sqrt({d}) used in a model over sqrt({f})"),
                    },
                });
            }
        }
        QuadScalar::new(value.a, value.b, value.radicand_seen.unwrap_or(0))
    }
}

fn sign_of(x: &BigRational) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

impl Default for QuadScalar {
    fn default() -> Self {
        QuadScalar::zero()
    }
}

impl PartialOrd for QuadScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadScalar {
    /// Exact numeric order. Panics when the two values use different radicals.
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        match (self - other).signum() {
            1 => Ordering::Greater,
            -1 => Ordering::Less,
            _ => Ordering::Equal,
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&QuadScalar> for &QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: &QuadScalar) -> QuadScalar {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $trait<QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: QuadScalar) -> QuadScalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QuadScalar> for QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: &QuadScalar) -> QuadScalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<QuadScalar> for &QuadScalar {
            type Output = QuadScalar;
            fn $method(self, rhs: QuadScalar) -> QuadScalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);
forward_binop!(Div, div, checked_div);

impl Neg for &QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        QuadScalar::raw(-&self.a, -&self.b, self.d)
    }
}

impl Neg for QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        -&self
    }
}

fn fmt_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

impl fmt::Display for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", fmt_rational(&self.a));
        }
        let radical = |b: &BigRational| {
            if b.is_one() {
                format!("sqrt({})", self.d)
            } else {
                format!("{}*sqrt({})", fmt_rational(b), self.d)
            }
        };
        if self.a.is_zero() {
            if self.b.is_negative() {
                return write!(f, "-{}", radical(&-&self.b));
            }
            return write!(f, "{}", radical(&self.b));
        }
        if self.b.is_negative() {
            write!(f, "{} - {}", fmt_rational(&self.a), radical(&-&self.b))
        } else {
            write!(f, "{} + {}", fmt_rational(&self.a), radical(&self.b))
        }
    }
}

impl fmt::Debug for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for QuadScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

struct Parsed {
    a: BigRational,
    b: BigRational,
    radicand_seen: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Slash,
    Sqrt,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                out.push(Token::Int(digits.parse().map_err(|e| format!("{e}"))?));
            }
            's' => {
                let word: String = chars[i..].iter().take(4).collect();
                if word != "sqrt" {
                    return Err(format!("unexpected {word:?}"));
                }
                out.push(Token::Sqrt);
                i += 4;
            }
            other => return Err(format!("unexpected character {other:?}")),
        }
    }
    Ok(out)
}

struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<(), String> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(format!("expected {want:?}, found {other:?}")),
        }
    }

    fn rational(&mut self) -> Result<BigRational, String> {
        let num = match self.next() {
            Some(Token::Int(n)) => n,
            other => return Err(format!("expected a number, found {other:?}")),
        };
        if self.peek() == Some(&Token::Slash) {
            self.next();
            let den = match self.next() {
                Some(Token::Int(n)) => n,
                other => return Err(format!("expected a denominator, found {other:?}")),
            };
            if den.is_zero() {
                return Err("zero denominator".into());
            }
            Ok(BigRational::new(num, den))
        } else {
            Ok(BigRational::from_integer(num))
        }
    }

    fn radical(&mut self) -> Result<u32, String> {
        self.expect(Token::Sqrt)?;
        self.expect(Token::Open)?;
        let d = match self.next() {
            Some(Token::Int(n)) => n,
            other => return Err(format!("expected a radicand, found {other:?}")),
        };
        self.expect(Token::Close)?;
        let d = d.to_u64().ok_or("radicand too large")?;
        if !is_square_free(d) {
            return Err(format!("sqrt({d}) is not a square-free radicand > 1"));
        }
        u32::try_from(d).map_err(|_| "radicand too large".to_string())
    }
}

fn parse_expr(text: &str) -> Result<Parsed, ScalarError> {
    let fail = |reason: String| ScalarError::Parse {
        text: text.to_string(),
        reason,
    };
    let tokens = tokenize(text).map_err(fail)?;
    if tokens.is_empty() {
        return Err(fail("empty scalar".into()));
    }
    let mut ts = TokenStream { tokens, pos: 0 };
    let mut out = Parsed {
        a: BigRational::zero(),
        b: BigRational::zero(),
        radicand_seen: None,
    };
    let mut first = true;
    while ts.peek().is_some() {
        let mut negative = false;
        match ts.peek() {
            Some(Token::Plus) => {
                ts.next();
            }
            Some(Token::Minus) => {
                ts.next();
                negative = true;
            }
            _ if first => {}
            other => return Err(fail(format!("expected + or -, found {other:?}"))),
        }
        first = false;
        // term := rational ['*' sqrt(d)] | sqrt(d) ['*' rational]
        let (coef, radicand) = if ts.peek() == Some(&Token::Sqrt) {
            let d = ts.radical().map_err(fail)?;
            let coef = if ts.peek() == Some(&Token::Star) {
                ts.next();
                ts.rational().map_err(fail)?
            } else {
                BigRational::one()
            };
            (coef, Some(d))
        } else {
            let coef = ts.rational().map_err(fail)?;
            if ts.peek() == Some(&Token::Star) {
                ts.next();
                (coef, Some(ts.radical().map_err(fail)?))
            } else {
                (coef, None)
            }
        };
        let coef = if negative { -coef } else { coef };
        match radicand {
            None => out.a += coef,
            Some(d) => {
                if let Some(prev) = out.radicand_seen {
                    if prev != d {
                        return Err(fail(format!("mixed radicals sqrt({prev}) and sqrt({d})")));
                    }
                }
                out.radicand_seen = Some(d);
                out.b += coef;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden_rho() -> QuadScalar {
        QuadScalar::parse("-1/2 + 1/2*sqrt(5)", Field::Quadratic(5)).unwrap()
    }

    #[test]
    fn rho_squared_is_one_minus_rho() {
        let rho = golden_rho();
        let sq = &rho * &rho;
        let expected = QuadScalar::parse("3/2 - 1/2*sqrt(5)", Field::Quadratic(5)).unwrap();
        assert_eq!(sq, expected);
        assert_eq!(sq, QuadScalar::one() - &rho);
    }

    #[test]
    fn rational_basics() {
        let half = QuadScalar::ratio(1, 2);
        assert_eq!(&half * &half, QuadScalar::ratio(1, 4));
        assert_eq!(&half + QuadScalar::zero(), half);
        assert_eq!(half.to_f64(), 0.5);
        assert_eq!(QuadScalar::zero().to_f64(), 0.0);
    }

    #[test]
    fn comparisons() {
        let rho = golden_rho();
        assert_eq!(rho.cmp(&QuadScalar::ratio(1, 2)), Ordering::Greater);
        assert_eq!(rho.cmp(&rho), Ordering::Equal);
        assert_eq!((QuadScalar::one() - &rho).cmp(&rho.pow(2)), Ordering::Equal);
        assert!(rho < QuadScalar::one());
    }

    #[test]
    fn golden_ratio_to_float() {
        assert_eq!(golden_rho().to_f64(), 0.6180339887498949);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let x = QuadScalar::one();
        assert_eq!(
            x.checked_div(&QuadScalar::zero()),
            Err(ScalarError::DivisionByZero)
        );
    }

    #[test]
    fn mixed_fields_rejected() {
        let s2 = QuadScalar::sqrt(2).unwrap();
        let s5 = QuadScalar::sqrt(5).unwrap();
        assert_eq!(s2.checked_add(&s5), Err(ScalarError::MixedField(2, 5)));
        // rational values combine with anything
        assert!(s2.checked_mul(&QuadScalar::ratio(3, 7)).is_ok());
    }

    #[test]
    fn parser_accepts_documented_forms() {
        let f5 = Field::Quadratic(5);
        assert_eq!(
            QuadScalar::parse("1/3 + 0/1*sqrt(5)", f5).unwrap(),
            QuadScalar::ratio(1, 3)
        );
        assert_eq!(
            QuadScalar::parse("-2", Field::Rational).unwrap(),
            QuadScalar::integer(-2)
        );
        assert_eq!(
            QuadScalar::parse(" +3/6 ", Field::Rational).unwrap(),
            QuadScalar::ratio(1, 2)
        );
        assert_eq!(
            QuadScalar::parse("sqrt(5)", f5).unwrap(),
            QuadScalar::sqrt(5).unwrap()
        );
        assert_eq!(
            QuadScalar::parse("-sqrt(5)*1/2 + 1/2", f5).unwrap(),
            -golden_rho()
        );
    }

    #[test]
    fn parser_rejects_bad_input() {
        assert!(QuadScalar::parse("1/3 + 1/2*sqrt(2)", Field::Quadratic(5)).is_err());
        assert!(QuadScalar::parse("sqrt(5)", Field::Rational).is_err());
        assert!(QuadScalar::parse("1/0", Field::Rational).is_err());
        assert!(QuadScalar::parse("sqrt(4)", Field::Quadratic(4)).is_err());
        assert!(QuadScalar::parse("", Field::Rational).is_err());
        assert!(QuadScalar::parse("1 2", Field::Rational).is_err());
        assert!(QuadScalar::parse("x", Field::Rational).is_err());
    }

    #[test]
    fn display_round_trips() {
        let f5 = Field::Quadratic(5);
        for text in [
            "1/2",
            "-3",
            "0",
            "1/2 + 1/2*sqrt(5)",
            "-1/2 - sqrt(5)",
            "7/3*sqrt(5)",
            "-sqrt(5)",
        ] {
            let x = QuadScalar::parse(text, f5).unwrap();
            assert_eq!(QuadScalar::parse(&x.to_string(), f5).unwrap(), x, "{text}");
        }
        assert_eq!(golden_rho().to_string(), "-1/2 + 1/2*sqrt(5)");
    }

    #[test]
    fn field_validation() {
        assert_eq!(Field::new(Some(5)).unwrap(), Field::Quadratic(5));
        assert!(Field::new(Some(8)).is_err());
        assert!(Field::new(Some(1)).is_err());
        assert_eq!(Field::new(None).unwrap(), Field::Rational);
    }

    fn small() -> impl Strategy<Value = QuadScalar> {
        (-20i64..20, 1i64..9, -20i64..20, 1i64..9).prop_map(|(p, q, r, s)| {
            QuadScalar::new(
                BigRational::new(p.into(), q.into()),
                BigRational::new(r.into(), s.into()),
                5,
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn field_axioms_hold_exactly(x in small(), y in small(), z in small()) {
            prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
            prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
            prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
            prop_assert_eq!(&x * &y, &y * &x);
            if !x.is_zero() {
                prop_assert!((&x * &x.recip()).is_one());
            }
            prop_assert_eq!(&(&x - &y) + &y, x.clone());
        }

        #[test]
        fn order_agrees_with_floats(x in small(), y in small()) {
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
            }
        }

        #[test]
        fn display_parse_round_trip(x in small()) {
            let back = QuadScalar::parse(&x.to_string(), Field::Quadratic(5)).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
