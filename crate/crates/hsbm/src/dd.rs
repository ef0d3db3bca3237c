//! Software double-double arithmetic: an unevaluated sum of two `f64`
//! values giving roughly 32 significant decimal digits. Only the
//! operations the aggregation loop needs are implemented.

/// Value represented as `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

/// Error-free sum of two doubles.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free sum assuming |a| >= |b|.
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// Error-free product via fused multiply-add.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            DoubleDouble {
                hi: -self.hi,
                lo: -self.lo,
            }
        } else {
            self
        }
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, rhs: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let e = e + self.lo + rhs.lo;
        let (hi, lo) = quick_two_sum(s, e);
        DoubleDouble { hi, lo }
    }
}

impl std::ops::Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, rhs: DoubleDouble) -> DoubleDouble {
        self + DoubleDouble {
            hi: -rhs.hi,
            lo: -rhs.lo,
        }
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, rhs: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl std::ops::Div for DoubleDouble {
    type Output = DoubleDouble;
    fn div(self, rhs: DoubleDouble) -> DoubleDouble {
        // One Newton refinement of the double-precision quotient.
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * DoubleDouble::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * DoubleDouble::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_small_addend() {
        let big = DoubleDouble::from_f64(1e16);
        let sum = big + DoubleDouble::from_f64(1.0) - big;
        assert_eq!(sum.to_f64(), 1.0);
    }

    #[test]
    fn harmonic_sum_beats_f64() {
        // Forward harmonic sum, compared against reversed f64 summation
        // which is the more accurate f64 ordering.
        let mut dd = DoubleDouble::ZERO;
        for k in 1..=100_000u32 {
            dd = dd + DoubleDouble::from_f64(1.0) / DoubleDouble::from_f64(k as f64);
        }
        let mut rev = 0.0f64;
        for k in (1..=100_000u32).rev() {
            rev += 1.0 / k as f64;
        }
        assert!((dd.to_f64() - rev).abs() < 1e-11);
    }

    #[test]
    fn product_exact_error_term() {
        let a = DoubleDouble::from_f64(1.0 + 2f64.powi(-30));
        let sq = a * a;
        // (1 + u)^2 = 1 + 2u + u^2; u^2 = 2^-60 is below f64 resolution
        // of the hi part but must survive in lo.
        let expect_lo = 2f64.powi(-60);
        assert_eq!(sq.hi, 1.0 + 2f64.powi(-29));
        assert_eq!(sq.lo, expect_lo);
    }

    #[test]
    fn division_round_trip() {
        let a = DoubleDouble::from_f64(std::f64::consts::PI);
        let b = DoubleDouble::from_f64(std::f64::consts::E);
        let back = a / b * b - a;
        assert!(back.to_f64().abs() < 1e-30);
    }

    #[test]
    fn resolution_beyond_double() {
        // 1 + 2^-80 is distinguishable from 1.
        let x = DoubleDouble::from_f64(1.0) + DoubleDouble::from_f64(2f64.powi(-80));
        assert!((x - DoubleDouble::from_f64(1.0)).to_f64() > 0.0);
    }
}
