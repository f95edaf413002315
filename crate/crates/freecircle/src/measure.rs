//! Probability measures on the unit circle.
//!
//! A measure enters the library either as a finite list of atoms
//! ([`AtomicMeasure`], exact) or as a truncated moment vector
//! ([`MomentVector`], `c_k = ∫ ξ^k dμ` for `ξ = e^{iθ}`), wrapped in a
//! [`CircleMeasure`] that may carry both representations. Moments are a
//! lossless interface for everything computed here: the ψ-function
//! `ψ_μ(z) = Σ_{k≥1} c_k z^k`, its functional inverse, the S-transform
//! `S(u) = ((u+1)/u)·ψ⁻¹(u)`, phase rotation, and the Poisson-kernel density
//! `(1/π)·Re ψ(r e^{iω}) + 1/(2π)` that smooths the measure at radius `r`.
//!
//! The uniform (arc-length) measure has no atomic representation and all
//! moments zero; it gets a named constructor and an exactness flag so that
//! evaluations of ψ need no tail estimate for it.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::series::{SeriesError, TruncatedSeries};

/// Atoms closer than this (after canonical reduction) are merged.
pub const ANGLE_MERGE_TOL: f64 = 1e-12;
/// Allowed deviation of a weight sum from 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Allowed excess of |c_k| over 1 (accumulated float error in pipelines).
pub const MOMENT_MAGNITUDE_TOL: f64 = 1e-6;
/// Default conditioning threshold on |c₁| below which S-transform series are
/// refused: inverse-series coefficients scale like (6/|c₁|²)^k, so a tiny
/// first moment makes the truncated reversion numerically meaningless.
pub const DEFAULT_S_THRESHOLD: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Errors from measure construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("measure needs at least one atom")]
    EmptyAtoms,
    #[error("atom weight {w} is not positive")]
    InvalidWeight { w: f64 },
    #[error("atom weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}")]
    WeightSumNotOne { sum: f64 },
    #[error("probability {p} outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("moment vector must start with c[0] = 1, got {c0}")]
    MomentHeadNotOne { c0: Complex64 },
    #[error("moment c[{k}] has magnitude {magnitude} > 1 (beyond tolerance)")]
    MomentTooLarge { k: usize, magnitude: f64 },
    #[error("moment order must be at least 1")]
    OrderZero,
    #[error("moments needed to order {needed}, available to order {available}")]
    InsufficientOrder { needed: usize, available: usize },
    #[error("truncation tail bound {tail:e} at |z| = {radius} exceeds tolerance {tol:e}; more moments needed")]
    TailBound { radius: f64, tail: f64, tol: f64 },
    #[error("|z| = {modulus} outside the open unit disk")]
    DomainRadius { modulus: f64 },
    #[error("radius {r} outside (0, 1)")]
    InvalidRadius { r: f64 },
    #[error("grid must contain at least one point")]
    EmptyGrid,
    #[error("mean (first moment) is zero: S-transform undefined")]
    STransformUndefined,
    #[error("mean magnitude {mean_abs:e} below conditioning threshold {threshold:e}")]
    MeanBelowThreshold { mean_abs: f64, threshold: f64 },
    #[error("mean (first moment) is zero: phase normalization undefined")]
    PhaseUndefined,
    #[error("atomic and moment representations disagree at k = {k} by {diff:e}")]
    RepresentationMismatch { k: usize, diff: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

/// Reduces an angle to the canonical interval `[-π, π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = (theta + PI).rem_euclid(two_pi) - PI;
    if y >= PI {
        // rem_euclid can land exactly on 2π after rounding.
        y -= two_pi;
    }
    y
}

/// The point `e^{iθ}` for a canonical angle. The four cardinal angles map to
/// exact lattice points so that symmetric measures (atoms at ±1, ±i) stay
/// exactly symmetric in moment arithmetic — a two-atom measure with equal
/// weights must have mean exactly zero, not `~1e-16`.
fn unit_circle_point(theta: f64) -> Complex64 {
    if theta == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if theta == -PI {
        Complex64::new(-1.0, 0.0)
    } else if theta == PI / 2.0 {
        Complex64::new(0.0, 1.0)
    } else if theta == -PI / 2.0 {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::from_polar(1.0, theta)
    }
}

/// A purely atomic probability measure on the unit circle: finitely many
/// point masses `(θ_j, w_j)` with distinct canonical angles, positive
/// weights, and total mass 1. Atoms are stored sorted by angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    /// Builds a measure from `(angle, weight)` pairs. Angles are reduced to
    /// `[-π, π)`; atoms within [`ANGLE_MERGE_TOL`] of each other are merged;
    /// weights must be positive and sum to 1 within [`WEIGHT_SUM_TOL`].
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(MeasureError::EmptyAtoms);
        }
        let mut canon: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for &(theta, w) in &atoms {
            if !(w > 0.0) || !w.is_finite() {
                return Err(MeasureError::InvalidWeight { w });
            }
            canon.push((canonical_angle(theta), w));
        }
        canon.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(canon.len());
        for (theta, w) in canon {
            match merged.last_mut() {
                Some(last) if (theta - last.0).abs() <= ANGLE_MERGE_TOL => last.1 += w,
                _ => merged.push((theta, w)),
            }
        }
        // The seam of [-π, π) can hide a final merge: -π and π - ε are close
        // on the circle though far apart in the parametrization.
        if merged.len() >= 2 {
            let first = merged[0];
            let last = *merged.last().unwrap();
            if (first.0 + 2.0 * PI - last.0).abs() <= ANGLE_MERGE_TOL {
                merged[0].1 += last.1;
                merged.pop();
            }
        }
        let sum: f64 = merged.iter().map(|&(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::WeightSumNotOne { sum });
        }
        Ok(Self { atoms: merged })
    }

    /// Two-atom measure: weight `p` at angle 0 (the point +1) and `1 - p` at
    /// angle π (the point −1); the degenerate `p ∈ {0, 1}` cases collapse to
    /// a single atom. First moment is `2p − 1`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(MeasureError::InvalidProbability { p });
        }
        if p == 0.0 {
            Self::new(vec![(PI, 1.0)])
        } else if p == 1.0 {
            Self::new(vec![(0.0, 1.0)])
        } else {
            Self::new(vec![(0.0, p), (PI, 1.0 - p)])
        }
    }

    /// The point mass at `theta`.
    pub fn point_mass(theta: f64) -> Self {
        Self {
            atoms: vec![(canonical_angle(theta), 1.0)],
        }
    }

    /// Sorted `(angle, weight)` pairs.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Exact moments to order `k_max`: `c_k = Σ_j w_j e^{i k θ_j}`, with
    /// `c_0 = 1` exactly.
    pub fn moments(&self, k_max: usize) -> Result<MomentVector> {
        if k_max == 0 {
            return Err(MeasureError::OrderZero);
        }
        let mut c = vec![ONE; k_max + 1];
        // One unit-circle point per atom, then integer powers: this keeps the
        // exact cardinal points exact at every order.
        let points: Vec<Complex64> = self
            .atoms
            .iter()
            .map(|&(theta, _)| unit_circle_point(theta))
            .collect();
        let mut powers = points.clone();
        for ck in c.iter_mut().skip(1) {
            let mut acc = ZERO;
            for (p, &(_, w)) in powers.iter().zip(&self.atoms) {
                acc += w * p;
            }
            *ck = acc;
            for (p, point) in powers.iter_mut().zip(&points) {
                *p *= point;
            }
        }
        MomentVector::new(c)
    }

    /// First moment `c_1 = Σ w_j e^{iθ_j}`.
    pub fn first_moment(&self) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(theta, w)| w * unit_circle_point(theta))
            .sum()
    }

    /// The measure with every atom shifted by `phi` (angles re-canonicalized).
    pub fn rotate(&self, phi: f64) -> Self {
        let rotated = self
            .atoms
            .iter()
            .map(|&(theta, w)| (theta + phi, w))
            .collect();
        // Rotation preserves validity; reconstruct to restore sorting and the
        // canonical interval.
        Self::new(rotated).expect("rotation preserves measure validity")
    }

    /// Closed-form ψ-function: `ψ(z) = Σ_j w_j / (1 − e^{iθ_j} z) − 1`,
    /// exact up to floating point for `|z| < 1`.
    pub fn psi(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() >= 1.0 {
            return Err(MeasureError::DomainRadius { modulus: z.norm() });
        }
        let mut acc = ZERO;
        for &(theta, w) in &self.atoms {
            acc += w / (ONE - unit_circle_point(theta) * z);
        }
        Ok(acc - ONE)
    }

    /// Derivative of the closed-form ψ:
    /// `ψ'(z) = Σ_j w_j e^{iθ_j} / (1 − e^{iθ_j} z)²`.
    pub fn psi_derivative(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() >= 1.0 {
            return Err(MeasureError::DomainRadius { modulus: z.norm() });
        }
        let mut acc = ZERO;
        for &(theta, w) in &self.atoms {
            let xi = unit_circle_point(theta);
            let d = ONE - xi * z;
            acc += w * xi / (d * d);
        }
        Ok(acc)
    }
}

/// Truncated moment vector of a circle measure: `c[k] = ∫ ξ^k dμ` for
/// `k = 0..=K`, with `c[0] = 1` and `|c[k]| ≤ 1` (unitarity).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    c: Vec<Complex64>,
}

impl MomentVector {
    /// Validates and wraps a coefficient list `c_0 ..= c_K` (so `K + 1`
    /// entries, `K ≥ 0`).
    pub fn new(c: Vec<Complex64>) -> Result<Self> {
        let Some(&c0) = c.first() else {
            return Err(MeasureError::MomentHeadNotOne { c0: ZERO });
        };
        if (c0 - ONE).norm() > 1e-12 {
            return Err(MeasureError::MomentHeadNotOne { c0 });
        }
        for (k, ck) in c.iter().enumerate().skip(1) {
            let magnitude = ck.norm();
            if !magnitude.is_finite() || magnitude > 1.0 + MOMENT_MAGNITUDE_TOL {
                return Err(MeasureError::MomentTooLarge { k, magnitude });
            }
        }
        Ok(Self { c })
    }

    /// The moment vector of the uniform (arc-length) measure: all moments of
    /// positive order vanish.
    pub fn uniform(order: usize) -> Self {
        let mut c = vec![ZERO; order + 1];
        c[0] = ONE;
        Self { c }
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Coefficients `c_0 ..= c_K`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.c
    }

    /// Moment of signed order `k`; negative orders use unitarity,
    /// `c_{-k} = conj(c_k)`.
    pub fn moment(&self, k: i64) -> Result<Complex64> {
        let a = k.unsigned_abs() as usize;
        if a > self.order() {
            return Err(MeasureError::InsufficientOrder {
                needed: a,
                available: self.order(),
            });
        }
        Ok(if k >= 0 { self.c[a] } else { self.c[a].conj() })
    }

    /// First moment `c_1` (the mean of `ξ`).
    pub fn first(&self) -> Result<Complex64> {
        self.moment(1)
    }

    /// Largest magnitude among `c_1 ..= c_K` — the flatness diagnostic used
    /// by convergence tables (0 exactly for the uniform law).
    pub fn max_abs_moment(&self) -> f64 {
        self.c.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Restriction to a lower order.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(MeasureError::InsufficientOrder {
                needed: order,
                available: self.order(),
            });
        }
        Ok(Self {
            c: self.c[..=order].to_vec(),
        })
    }

    /// Moment transform under rotation by `phi`: `c_k → e^{ikφ} c_k`.
    pub fn rotate(&self, phi: f64) -> Self {
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(k, &ck)| {
                if k == 0 {
                    ONE
                } else {
                    ck * Complex64::from_polar(1.0, k as f64 * phi)
                }
            })
            .collect();
        Self { c }
    }

    /// ψ-series through order `k`: coefficient 0 is zero, coefficient `j` is
    /// `c_j`.
    pub fn psi_series(&self, k: usize) -> Result<TruncatedSeries> {
        if k == 0 {
            return Err(MeasureError::OrderZero);
        }
        if k > self.order() {
            return Err(MeasureError::InsufficientOrder {
                needed: k,
                available: self.order(),
            });
        }
        let mut coeffs = self.c[..=k].to_vec();
        coeffs[0] = ZERO;
        Ok(TruncatedSeries::from_coeffs(coeffs)?)
    }

    /// S-transform series at order `k` whose coefficients `0 .. k` are exact;
    /// the top coefficient `k` is *not* meaningful (the `(ψ⁻¹/u)·(1+u)`
    /// pipeline cannot determine it from moments of order `k`). Convolution
    /// keeps all intermediates at one order and discards the polluted top
    /// slot when reading results, so this is the form it consumes.
    pub(crate) fn s_series_padded(
        &self,
        k: usize,
        threshold: f64,
    ) -> Result<TruncatedSeries> {
        let mean = self.first()?;
        if mean == ZERO {
            return Err(MeasureError::STransformUndefined);
        }
        if mean.norm() < threshold {
            return Err(MeasureError::MeanBelowThreshold {
                mean_abs: mean.norm(),
                threshold,
            });
        }
        let psi = self.psi_series(k)?;
        let inverse = psi.revert()?;
        let one_plus_u = {
            let mut s = TruncatedSeries::identity(k)?;
            s = s.add(&TruncatedSeries::constant(ONE, k)?)?;
            s
        };
        Ok(inverse.div_by_var()?.mul(&one_plus_u)?)
    }
}

/// A circle measure carrying an atomic representation, a moment
/// representation, or both (in which case they must agree); the uniform
/// measure is flagged so that its vanishing moment tail is known exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMeasure {
    atomic: Option<AtomicMeasure>,
    moment: Option<MomentVector>,
    known_uniform: bool,
}

impl CircleMeasure {
    /// Wraps an atomic measure (exact representation).
    pub fn from_atoms(atomic: AtomicMeasure) -> Self {
        Self {
            atomic: Some(atomic),
            moment: None,
            known_uniform: false,
        }
    }

    /// Wraps a truncated moment vector.
    pub fn from_moments(moment: MomentVector) -> Self {
        Self {
            atomic: None,
            moment: Some(moment),
            known_uniform: false,
        }
    }

    /// Wraps both representations, verifying they agree to 1e−12 through the
    /// moment vector's order.
    pub fn with_both(atomic: AtomicMeasure, moment: MomentVector) -> Result<Self> {
        let derived = atomic.moments(moment.order().max(1))?;
        for k in 1..=moment.order() {
            let diff = (derived.c[k] - moment.c[k]).norm();
            if diff > 1e-12 {
                return Err(MeasureError::RepresentationMismatch { k, diff });
            }
        }
        Ok(Self {
            atomic: Some(atomic),
            moment: Some(moment),
            known_uniform: false,
        })
    }

    /// The uniform (arc-length) measure, stored as the zero moment vector of
    /// the given order and flagged exact: every moment of positive order is
    /// known to vanish, not merely unrecorded.
    pub fn uniform(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(MeasureError::OrderZero);
        }
        Ok(Self {
            atomic: None,
            moment: Some(MomentVector::uniform(order)),
            known_uniform: true,
        })
    }

    /// Convenience constructor for the two-atom ±1 measure.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Ok(Self::from_atoms(AtomicMeasure::bernoulli(p)?))
    }

    /// Convenience constructor for a point mass.
    pub fn point_mass(theta: f64) -> Self {
        Self::from_atoms(AtomicMeasure::point_mass(theta))
    }

    /// Whether this is the uniform measure by construction.
    pub fn is_known_uniform(&self) -> bool {
        self.known_uniform
    }

    /// Atomic representation, if present.
    pub fn atomic(&self) -> Option<&AtomicMeasure> {
        self.atomic.as_ref()
    }

    /// Stored moment representation, if present.
    pub fn stored_moments(&self) -> Option<&MomentVector> {
        self.moment.as_ref()
    }

    /// Moments to order `k_max`: exact from atoms when available, otherwise
    /// the stored vector (which must reach `k_max`); the uniform measure
    /// extends to any order exactly.
    pub fn moments(&self, k_max: usize) -> Result<MomentVector> {
        if k_max == 0 {
            return Err(MeasureError::OrderZero);
        }
        if self.known_uniform {
            return Ok(MomentVector::uniform(k_max));
        }
        if let Some(atomic) = &self.atomic {
            return atomic.moments(k_max);
        }
        let stored = self.moment.as_ref().expect("measure has a representation");
        stored.truncated(k_max)
    }

    /// First moment `c_1`.
    pub fn first_moment(&self) -> Result<Complex64> {
        if let Some(atomic) = &self.atomic {
            return Ok(atomic.first_moment());
        }
        self.moments(1)?.first()
    }

    /// ψ-function value at `z`, `|z| < 1`. Atomic representations use the
    /// exact closed form; moment-only representations sum the truncated
    /// series and require the geometric tail bound
    /// `|z|^{K+1}/(1−|z|) < tail_tol` (the uniform measure's tail is zero).
    pub fn psi_eval(&self, z: Complex64, tail_tol: f64) -> Result<Complex64> {
        let r = z.norm();
        if r >= 1.0 {
            return Err(MeasureError::DomainRadius { modulus: r });
        }
        if self.known_uniform {
            return Ok(ZERO);
        }
        if let Some(atomic) = &self.atomic {
            return atomic.psi(z);
        }
        let stored = self.moment.as_ref().expect("measure has a representation");
        let order = stored.order();
        let tail = r.powi(order as i32 + 1) / (1.0 - r);
        if tail >= tail_tol {
            return Err(MeasureError::TailBound {
                radius: r,
                tail,
                tol: tail_tol,
            });
        }
        // Horner sum of c_1 z + … + c_K z^K.
        let mut acc = ZERO;
        for &ck in stored.c.iter().skip(1).rev() {
            acc = acc * z + ck;
        }
        Ok(acc * z)
    }

    /// ψ-series through order `k` (constant term zero, coefficient `j` is
    /// `c_j`).
    pub fn psi_series(&self, k: usize) -> Result<TruncatedSeries> {
        self.moments(k)?.psi_series(k)
    }

    /// S-transform series through order `k`, exact in every coefficient,
    /// with the default conditioning threshold. Needs moments to `k + 1`.
    pub fn s_series(&self, k: usize) -> Result<TruncatedSeries> {
        self.s_series_with_threshold(k, DEFAULT_S_THRESHOLD)
    }

    /// As [`CircleMeasure::s_series`] with an explicit threshold on |c₁|.
    pub fn s_series_with_threshold(&self, k: usize, threshold: f64) -> Result<TruncatedSeries> {
        let mv = self.moments(k + 1)?;
        Ok(mv.s_series_padded(k + 1, threshold)?.truncated(k)?)
    }

    /// The measure rotated by `phi`: atoms shift, moments pick up phases
    /// `e^{ikφ}`; the uniform measure is rotation invariant.
    pub fn rotate(&self, phi: f64) -> Self {
        Self {
            atomic: self.atomic.as_ref().map(|a| a.rotate(phi)),
            moment: self.moment.as_ref().map(|m| {
                if self.known_uniform {
                    m.clone()
                } else {
                    m.rotate(phi)
                }
            }),
            known_uniform: self.known_uniform,
        }
    }

    /// Rotates so the first moment becomes real and positive; returns the
    /// rotated measure and the applied angle `φ = −arg c₁`.
    pub fn normalize_phase(&self) -> Result<(Self, f64)> {
        let c1 = self.first_moment()?;
        if c1 == ZERO {
            return Err(MeasureError::PhaseUndefined);
        }
        let phi = -c1.arg();
        Ok((self.rotate(phi), phi))
    }

    /// Poisson-kernel density of the measure smoothed at radius `r`:
    /// `U(ω) = (1/π)·Re ψ(r e^{iω}) + 1/(2π)` on the uniform grid
    /// `ω_j = −π + 2πj/n_grid`, `j = 0..n_grid`. A moment-only measure must
    /// satisfy the ψ tail bound at radius `r`.
    pub fn poisson_density(
        &self,
        r: f64,
        n_grid: usize,
        tail_tol: f64,
    ) -> Result<Vec<(f64, f64)>> {
        if !(r > 0.0 && r < 1.0) {
            return Err(MeasureError::InvalidRadius { r });
        }
        if n_grid == 0 {
            return Err(MeasureError::EmptyGrid);
        }
        let mut out = Vec::with_capacity(n_grid);
        for j in 0..n_grid {
            let omega = -PI + 2.0 * PI * j as f64 / n_grid as f64;
            let z = Complex64::from_polar(r, omega);
            let density = self.psi_eval(z, tail_tol)?.re / PI + 1.0 / (2.0 * PI);
            out.push((omega, density));
        }
        Ok(out)
    }
}
