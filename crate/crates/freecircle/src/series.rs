//! Truncated complex power-series arithmetic.
//!
//! A [`TruncatedSeries`] holds coefficients of `z^0 ..= z^K` for a fixed
//! truncation order `K ≥ 1`. Every operation is exact through order `K` for
//! exact inputs — truncation is the only approximation — which is what makes
//! the moment pipelines downstream trustworthy: a moment vector of order `K`
//! determines ψ, ψ⁻¹ and S through order `K` with no further modelling error.
//!
//! Functional inversion ([`TruncatedSeries::revert`]) uses the Lagrange
//! residue form: the coefficient of `u^k` in the inverse is
//! `(1/k)·[z^{k-1}] (z/f(z))^k`, evaluated by iterated truncated
//! multiplication of `z/f`.

use num_complex::Complex64;
use thiserror::Error;

/// Errors from series construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    /// Binary operations require both operands truncated at the same order.
    #[error("series orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    /// Reciprocal needs a nonzero constant term; reversion needs a zero
    /// constant term and a nonzero linear term.
    #[error("series not invertible: {reason}")]
    NotInvertible { reason: &'static str },
    /// Composition `f(g)` is only well defined on truncations when `g(0) = 0`.
    #[error("composition requires inner series with zero constant term")]
    CompositionDomain,
    /// Coefficient index beyond the truncation order.
    #[error("coefficient index {k} out of range for order {order}")]
    CoeffOutOfRange { k: usize, order: usize },
    /// Truncation orders must be at least 1.
    #[error("truncation order must be a positive integer")]
    OrderZero,
}

pub type Result<T> = std::result::Result<T, SeriesError>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A complex formal power series truncated at order `K`: exactly `K + 1`
/// coefficients, index `k` holding the coefficient of `z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<Complex64>,
}

/// Truncated Cauchy product of two coefficient slices of equal length.
fn mul_raw(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut out = vec![ZERO; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().take(n - i).enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of `1/a` through the slice's order; requires `a[0] ≠ 0`.
fn recip_raw(a: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut r = vec![ZERO; n];
    r[0] = ONE / a[0];
    for k in 1..n {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * r[k - j];
        }
        r[k] = -acc / a[0];
    }
    r
}

impl TruncatedSeries {
    /// Builds a series from its full coefficient list `c_0 ..= c_K`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(SeriesError::OrderZero);
        }
        Ok(Self { coeffs })
    }

    /// The zero series at the given order.
    pub fn zero(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(SeriesError::OrderZero);
        }
        Ok(Self {
            coeffs: vec![ZERO; order + 1],
        })
    }

    /// A constant series at the given order.
    pub fn constant(value: Complex64, order: usize) -> Result<Self> {
        let mut s = Self::zero(order)?;
        s.coeffs[0] = value;
        Ok(s)
    }

    /// The identity series `z` at the given order.
    pub fn identity(order: usize) -> Result<Self> {
        let mut s = Self::zero(order)?;
        s.coeffs[1] = ONE;
        Ok(s)
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Full coefficient slice, index `k` = coefficient of `z^k`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `z^k`, checked against the truncation order.
    pub fn coeff(&self, k: usize) -> Result<Complex64> {
        self.coeffs
            .get(k)
            .copied()
            .ok_or(SeriesError::CoeffOutOfRange {
                k,
                order: self.order(),
            })
    }

    fn check_order(&self, rhs: &Self) -> Result<()> {
        if self.order() != rhs.order() {
            return Err(SeriesError::OrderMismatch {
                left: self.order(),
                right: rhs.order(),
            });
        }
        Ok(())
    }

    /// Coefficient-wise sum.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_order(rhs)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self { coeffs })
    }

    /// Coefficient-wise difference.
    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_order(rhs)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self { coeffs })
    }

    /// Scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_order(rhs)?;
        Ok(Self {
            coeffs: mul_raw(&self.coeffs, &rhs.coeffs),
        })
    }

    /// Multiplicative inverse `r` with `self·r = 1` through order `K`.
    pub fn reciprocal(&self) -> Result<Self> {
        if self.coeffs[0] == ZERO {
            return Err(SeriesError::NotInvertible {
                reason: "zero constant term",
            });
        }
        Ok(Self {
            coeffs: recip_raw(&self.coeffs),
        })
    }

    /// Composition `self(inner)` through order `K`, by Horner accumulation.
    /// Requires `inner(0) = 0` and equal orders.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.check_order(inner)?;
        if inner.coeffs[0] != ZERO {
            return Err(SeriesError::CompositionDomain);
        }
        let k_ord = self.order();
        let mut acc = vec![ZERO; k_ord + 1];
        acc[0] = self.coeffs[k_ord];
        for j in (0..k_ord).rev() {
            acc = mul_raw(&acc, &inner.coeffs);
            acc[0] += self.coeffs[j];
        }
        Ok(Self { coeffs: acc })
    }

    /// Functional inverse `g` with `self(g) = g(self) = z` through order `K`.
    ///
    /// Requires a zero constant term and nonzero linear term. Coefficient `k`
    /// of `g` is computed as `(1/k)·[z^{k-1}] (z/f)^k` (Lagrange residue
    /// form), via iterated truncated powers of `z/f`; the leading coefficient
    /// is `1/f₁`.
    pub fn revert(&self) -> Result<Self> {
        if self.coeffs[0] != ZERO {
            return Err(SeriesError::NotInvertible {
                reason: "nonzero constant term",
            });
        }
        if self.coeffs[1] == ZERO {
            return Err(SeriesError::NotInvertible {
                reason: "zero linear coefficient",
            });
        }
        let k_ord = self.order();
        // h = z/f = 1/(f/z), an order-(K-1) series.
        let h = recip_raw(&self.coeffs[1..]);
        let mut g = vec![ZERO; k_ord + 1];
        let mut power = vec![ZERO; k_ord]; // running h^k at order K-1
        power[0] = ONE;
        for k in 1..=k_ord {
            power = mul_raw(&power, &h);
            g[k] = power[k - 1] / (k as f64);
        }
        Ok(Self { coeffs: g })
    }

    /// Shift up: the series `z·self`, truncated back to order `K` (the top
    /// coefficient of `self` is dropped).
    pub fn mul_by_var(&self) -> Self {
        let mut coeffs = vec![ZERO; self.coeffs.len()];
        coeffs[1..].copy_from_slice(&self.coeffs[..self.coeffs.len() - 1]);
        Self { coeffs }
    }

    /// Shift down: the series `self/z` at the same order, with an
    /// indeterminate (zero-filled) top coefficient. Requires `self(0) = 0`.
    pub fn div_by_var(&self) -> Result<Self> {
        if self.coeffs[0] != ZERO {
            return Err(SeriesError::NotInvertible {
                reason: "division by z needs zero constant term",
            });
        }
        let mut coeffs = vec![ZERO; self.coeffs.len()];
        coeffs[..self.coeffs.len() - 1].copy_from_slice(&self.coeffs[1..]);
        Ok(Self { coeffs })
    }

    /// Reduces the truncation order to `new_order ≤ K`.
    pub fn truncated(&self, new_order: usize) -> Result<Self> {
        if new_order == 0 {
            return Err(SeriesError::OrderZero);
        }
        if new_order > self.order() {
            return Err(SeriesError::CoeffOutOfRange {
                k: new_order,
                order: self.order(),
            });
        }
        Ok(Self {
            coeffs: self.coeffs[..=new_order].to_vec(),
        })
    }

    /// Evaluates the truncated polynomial at `z` by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Largest coefficient-wise absolute difference from `rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.check_order(rhs)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn series(reals: &[f64]) -> TruncatedSeries {
        TruncatedSeries::from_coeffs(reals.iter().map(|&x| re(x)).collect()).unwrap()
    }

    fn assert_close(s: &TruncatedSeries, reals: &[f64], tol: f64) {
        let want = series(reals);
        let diff = s.max_abs_diff(&want).unwrap();
        assert!(diff <= tol, "series differ by {diff:e}: {s:?} vs {want:?}");
    }

    #[test]
    fn add_basic() {
        // (1 + z) + (1 - z) = 2.
        let sum = series(&[1.0, 1.0]).add(&series(&[1.0, -1.0])).unwrap();
        assert_close(&sum, &[2.0, 0.0], 0.0);
        // a + 0 = a.
        let a = series(&[0.5, -2.0, 3.0]);
        assert_eq!(a.add(&TruncatedSeries::zero(2).unwrap()).unwrap(), a);
        // (z + z^2) + z^2 = z + 2z^2.
        let sum = series(&[0.0, 1.0, 1.0]).add(&series(&[0.0, 0.0, 1.0])).unwrap();
        assert_close(&sum, &[0.0, 1.0, 2.0], 0.0);
    }

    #[test]
    fn mul_basic() {
        // (1 + z)(1 - z) = 1 - z^2 at K >= 2.
        let prod = series(&[1.0, 1.0, 0.0]).mul(&series(&[1.0, -1.0, 0.0])).unwrap();
        assert_close(&prod, &[1.0, 0.0, -1.0], 0.0);
        // a · 1 = a.
        let a = series(&[2.0, 0.0, -1.0, 4.0]);
        let one = TruncatedSeries::constant(re(1.0), 3).unwrap();
        assert_eq!(a.mul(&one).unwrap(), a);
        // z·z truncates to 0 at K = 1.
        let z = TruncatedSeries::identity(1).unwrap();
        assert_eq!(z.mul(&z).unwrap(), TruncatedSeries::zero(1).unwrap());
    }

    #[test]
    fn order_mismatch_is_reported() {
        let err = series(&[1.0, 0.0]).add(&series(&[1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err, SeriesError::OrderMismatch { left: 1, right: 2 });
    }

    #[test]
    fn reciprocal_geometric() {
        // 1/(1 - z) = 1 + z + z^2 + ...
        let r = series(&[1.0, -1.0, 0.0, 0.0, 0.0]).reciprocal().unwrap();
        assert_close(&r, &[1.0, 1.0, 1.0, 1.0, 1.0], 1e-15);
        // 1/2 as a constant series.
        let r = TruncatedSeries::constant(re(2.0), 3).unwrap().reciprocal().unwrap();
        assert_close(&r, &[0.5, 0.0, 0.0, 0.0], 0.0);
        // 1/(1 + z) alternates.
        let r = series(&[1.0, 1.0, 0.0, 0.0]).reciprocal().unwrap();
        assert_close(&r, &[1.0, -1.0, 1.0, -1.0], 1e-15);
        // Zero constant term refuses.
        let err = series(&[0.0, 1.0]).reciprocal().unwrap_err();
        assert!(matches!(err, SeriesError::NotInvertible { .. }));
    }

    #[test]
    fn reciprocal_is_two_sided() {
        let a = series(&[2.0, -0.3, 0.7, 0.1, -0.9]);
        let prod = a.mul(&a.reciprocal().unwrap()).unwrap();
        assert_close(&prod, &[1.0, 0.0, 0.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn compose_basic() {
        // f = z^2, g = z + z^2: f(g) = z^2 + 2z^3 + z^4.
        let f = series(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        let g = series(&[0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_close(&f.compose(&g).unwrap(), &[0.0, 0.0, 1.0, 2.0, 1.0], 0.0);
        // compose(f, z) = f.
        let f = series(&[0.3, -1.0, 2.0, 0.25]);
        let z = TruncatedSeries::identity(3).unwrap();
        assert_eq!(f.compose(&z).unwrap(), f);
        // f = z/(1-z) truncated, g = -z: alternating signs.
        let f = series(&[0.0, 1.0, 1.0, 1.0]);
        let g = series(&[0.0, -1.0, 0.0, 0.0]);
        assert_close(&f.compose(&g).unwrap(), &[0.0, -1.0, 1.0, -1.0], 0.0);
        // Nonzero inner constant term refuses.
        let err = f.compose(&series(&[0.5, 1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err, SeriesError::CompositionDomain);
    }

    #[test]
    fn revert_linear() {
        // f = a z inverts to u/a.
        let f = series(&[0.0, 4.0, 0.0, 0.0]);
        assert_close(&f.revert().unwrap(), &[0.0, 0.25, 0.0, 0.0], 0.0);
    }

    #[test]
    fn revert_geometric() {
        // z/(1-z) inverts to u/(1+u) = u - u^2 + u^3 - ...
        let f = series(&[0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let g = f.revert().unwrap();
        assert_close(&g, &[0.0, 1.0, -1.0, 1.0, -1.0, 1.0], 1e-14);
    }

    #[test]
    fn revert_quadratic() {
        // z + z^2 inverts to u - u^2 + 2u^3 - 5u^4 (Catalan signs).
        let f = series(&[0.0, 1.0, 1.0, 0.0, 0.0]);
        let g = f.revert().unwrap();
        assert_close(&g, &[0.0, 1.0, -1.0, 2.0, -5.0], 1e-13);
        assert_eq!(g.coeff(2).unwrap(), re(-1.0));
        // Round trip is the identity.
        let rt = f.compose(&g).unwrap();
        assert_close(&rt, &[0.0, 1.0, 0.0, 0.0, 0.0], 1e-13);
        let rt = g.compose(&f).unwrap();
        assert_close(&rt, &[0.0, 1.0, 0.0, 0.0, 0.0], 1e-13);
    }

    #[test]
    fn revert_preconditions() {
        let err = series(&[0.5, 1.0]).revert().unwrap_err();
        assert!(matches!(err, SeriesError::NotInvertible { .. }));
        let err = series(&[0.0, 0.0, 1.0]).revert().unwrap_err();
        assert!(matches!(err, SeriesError::NotInvertible { .. }));
    }

    #[test]
    fn coeff_bounds() {
        let f = series(&[1.0, 2.0]);
        assert_eq!(f.coeff(1).unwrap(), re(2.0));
        assert_eq!(series(&[0.0, 0.0, 1.0]).coeff(0).unwrap(), ZERO);
        assert_eq!(
            f.coeff(2).unwrap_err(),
            SeriesError::CoeffOutOfRange { k: 2, order: 1 }
        );
    }

    #[test]
    fn shift_helpers() {
        let f = series(&[0.0, 2.0, 3.0]);
        assert_close(&f.div_by_var().unwrap(), &[2.0, 3.0, 0.0], 0.0);
        let g = series(&[1.0, 2.0, 3.0]);
        assert_close(&g.mul_by_var(), &[0.0, 1.0, 2.0], 0.0);
        assert!(g.div_by_var().is_err());
    }

    #[test]
    fn eval_matches_direct_sum() {
        let f = series(&[1.0, -0.5, 0.25, 0.125]);
        let z = Complex64::new(0.3, -0.2);
        let direct = re(1.0) - re(0.5) * z + re(0.25) * z * z + re(0.125) * z * z * z;
        assert!((f.eval(z) - direct).norm() <= 1e-15);
    }

    #[test]
    fn truncation_reduces_order() {
        let f = series(&[1.0, 2.0, 3.0, 4.0]);
        let t = f.truncated(2).unwrap();
        assert_eq!(t.order(), 2);
        assert_close(&t, &[1.0, 2.0, 3.0], 0.0);
        assert!(f.truncated(9).is_err());
        assert!(f.truncated(0).is_err());
    }
}
