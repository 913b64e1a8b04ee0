//! Numeric backends for returns and probabilities.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, One};

/// A field-like number type that returns are computed in.
///
/// Floats give fast approximate answers; [`num_rational::Rational64`] gives
/// exact ones for small instances.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn from_prob(p: Ratio<i64>) -> Self {
        Self::from_ratio(*p.numer(), *p.denom())
    }

    fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out * self.clone();
        }
        out
    }
}

impl Scalar for f64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn pow(&self, k: u32) -> Self {
        self.powi(k as i32)
    }
}

impl Scalar for f32 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        (numer as f64 / denom as f64) as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn pow(&self, k: u32) -> Self {
        self.powi(k as i32)
    }
}

impl Scalar for Ratio<i64> {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer, denom)
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Scalar for Ratio<i128> {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer as i128, denom as i128)
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Sum in a fixed pairwise order so that the result does not depend on how
/// the terms were produced, only on their sequence.
pub fn pairwise_sum<S: Scalar>(terms: &[S]) -> S {
    match terms.len() {
        0 => S::zero(),
        1 => terms[0].clone(),
        n => {
            let (l, r) = terms.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Parse a probability written as a decimal (`0.25`) or a fraction (`1/4`).
pub fn parse_probability(text: &str) -> Option<Ratio<i64>> {
    let text = text.trim();
    let r = if let Some((n, d)) = text.split_once('/') {
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Ratio::new(n.trim().parse().ok()?, d)
    } else {
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = 10i64.pow(frac.len() as u32);
        let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        if int < 0 || text.starts_with('-') {
            return None;
        }
        Ratio::new(int * scale + frac, scale)
    };
    (r >= Ratio::from_integer(0) && r <= Ratio::one()).then_some(r)
}

/// Shortest decimal form when one exists with up to 12 places, else `n/d`.
pub fn render_probability(p: Ratio<i64>) -> String {
    let mut scale = 1i64;
    for places in 0..=12 {
        if (p * scale).is_integer() {
            let n = (p * scale).to_integer();
            if places == 0 {
                return n.to_string();
            }
            let s = format!("{:0width$}", n, width = places + 1);
            let (i, f) = s.split_at(s.len() - places);
            return format!("{i}.{f}");
        }
        scale *= 10;
    }
    format!("{}/{}", p.numer(), p.denom())
}
