//! Exact binomials and big-integer to float conversions.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// `C(n, k)` over signed arguments.
///
/// Conventions: `C(n, 0) = 1` for every `n` (negative included); `C(n, k) = 0`
/// when `k < 0`, when `k > n >= 0`, or when `n < 0` and `k > 0`.
pub fn binom(n: i64, k: i64) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    if k < 0 || n < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Rows `0..=n_max` of Pascal's triangle, for callers that need many binomials
/// with small non-negative arguments.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    rows: Vec<Vec<BigUint>>,
}

impl BinomialTable {
    pub fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut row = Vec::with_capacity(n + 1);
            row.push(BigUint::one());
            for k in 1..n {
                let prev = &rows[n - 1];
                row.push(&prev[k - 1] + &prev[k]);
            }
            if n > 0 {
                row.push(BigUint::one());
            }
            rows.push(row);
        }
        BinomialTable { rows }
    }

    /// Same conventions as [`binom`]; falls back to it outside the table.
    pub fn get(&self, n: i64, k: i64) -> BigUint {
        if k == 0 {
            return BigUint::one();
        }
        if k < 0 || n < 0 || k > n {
            return BigUint::zero();
        }
        match self.rows.get(n as usize) {
            Some(row) => row[k as usize].clone(),
            None => binom(n, k),
        }
    }
}

/// Natural log of a big integer; `-inf` for zero.
pub fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("finite below 2^1000").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `num / den` as a float without intermediate overflow.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries ~64 significant bits.
    let shift = (den.bits() + 64).saturating_sub(num.bits());
    let q = ((num << shift) / den).to_f64().unwrap();
    let half = (shift / 2) as i32;
    q * 2f64.powi(-half) * 2f64.powi(-((shift as i32) - half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_conventions() {
        assert_eq!(binom(5, 2), BigUint::from(10u32));
        assert_eq!(binom(-3, 0), BigUint::one());
        assert_eq!(binom(-3, 2), BigUint::zero());
        assert_eq!(binom(3, -1), BigUint::zero());
        assert_eq!(binom(3, 4), BigUint::zero());
        assert_eq!(binom(0, 0), BigUint::one());
        assert_eq!(binom(60, 30), BigUint::from(118_264_581_564_861_424u64));
    }

    #[test]
    fn table_matches_direct() {
        let t = BinomialTable::new(40);
        for n in -3..45 {
            for k in -2..47 {
                assert_eq!(t.get(n, k), binom(n, k), "C({n},{k})");
            }
        }
    }

    #[test]
    fn ln_and_ratio() {
        let x = BigUint::from(1u32) << 3000;
        assert!((big_ln(&x) - 3000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((big_ln(&BigUint::from(20u32)) - 20f64.ln()).abs() < 1e-12);
        assert_eq!(big_ln(&BigUint::zero()), f64::NEG_INFINITY);

        let den = BigUint::from(200u32).pow(450);
        let num = &den / BigUint::from(3u32);
        assert!((ratio_to_f64(&num, &den) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ratio_to_f64(&BigUint::one(), &den), 0.0);
        assert!((ratio_to_f64(&BigUint::from(7u32), &BigUint::from(2u32)) - 3.5).abs() < 1e-15);
    }
}
