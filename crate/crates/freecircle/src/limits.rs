//! Convergence classification for infinite products of free unitary factors,
//! plus numerical verification of the explicit estimates that drive the
//! classification.
//!
//! The central question: given a sequence of unit-circle measures `μ_k` with
//! means `a_k` (after removing each factor's mean phase), does the free
//! product measure `μ^{(n)} = μ_1 ⊠ … ⊠ μ_n` converge to the uniform law as
//! `n → ∞`? The answer is a seven-way case split driven by how many factors
//! have mean zero and whether `∏ a_k` tends to zero — equivalently, by
//! whether `Σ α_k` diverges, where `α_k = 1 − a_k` (the product and the sum
//! are tied by `∏ a_k ≤ exp(−Σ α_k)`).
//!
//! [`classify`] implements the case split; [`diagnose`] tabulates the
//! max-moment flatness of the partial products so classifications can be
//! checked against actual moment decay; the `check_*`/`verify_*` functions
//! evaluate both sides of each quantitative estimate on grids and report
//! signed margins.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::freeconv::{self, ConvError};
use crate::measure::{
    AtomicMeasure, CircleMeasure, MeasureError, MomentVector, DEFAULT_S_THRESHOLD,
};
use crate::series::{SeriesError, TruncatedSeries};

/// |c₁| at or below this counts as "mean zero" (inputs are exact atoms, so
/// only representation error is present).
pub const ZERO_MEAN_TOL: f64 = 1e-12;
/// A partial product of means below this reads as "tends to zero" when no
/// analytic tail information is available.
pub const PRODUCT_VANISH_TOL: f64 = 1e-8;
/// An α-sum increment over the last half-horizon below this reads as
/// "Σ α converges" when no analytic tail information is available.
pub const ALPHA_CAUCHY_TOL: f64 = 1e-10;
/// Bound reports pass when every margin is at least −MARGIN_TOL.
pub const MARGIN_TOL: f64 = 1e-12;
/// Moment depth probed when deciding whether a factor is uniform. Finite
/// moment data cannot certify uniformity, so a measure whose moments all
/// vanish to this depth (or to its stored order, if smaller) is *treated* as
/// uniform — a documented limitation; the named uniform constructor is
/// flagged exactly.
pub const UNIFORMITY_PROBE_ORDER: usize = 16;
/// Series order used for pointwise inversion of ψ (well above the accuracy
/// knee; a Newton polish then drives the residual to roundoff).
pub const INVERSION_ORDER: usize = 32;
/// Required residual |ψ(ψ⁻¹(z)) − z| after pointwise inversion.
pub const INVERSION_RESIDUAL_TOL: f64 = 1e-9;
/// The constant C = 2¹⁷ in the product-moment decay bound.
pub const MOMENT_DECAY_CONSTANT: f64 = 131072.0;
/// Numeric stand-in for "lim inf a_k = 0" on explicit data: the smallest mean
/// over the trailing half-horizon at or below this selects the vanishing-mean
/// subcase. A horizon heuristic, documented as such; rule-based sequences are
/// split analytically instead.
pub const LIMINF_SPLIT_TOL: f64 = 0.1;

/// Errors from classification and bound verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitsError {
    #[error("horizon must be at least 2, got {0}")]
    HorizonTooSmall(usize),
    #[error("sequence spec supplies no factors")]
    EmptySpec,
    #[error("factor index {k} is beyond the spec (only {available} factors defined)")]
    IndexBeyondSpec { k: usize, available: usize },
    #[error("rule gives p_{k} = {p}, outside [0, 1]")]
    RuleOutOfRange { k: usize, p: f64 },
    #[error("invalid rule: {reason}")]
    InvalidRule { reason: String },
    #[error("not applicable: {reason}")]
    NotApplicable { reason: String },
    #[error("pointwise inversion residual {residual:e} at z = {z} exceeds {INVERSION_RESIDUAL_TOL:e}")]
    ResidualTooLarge { z: Complex64, residual: f64 },
    #[error("entry {index} is {value}, outside (0, 1]")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Conv(#[from] ConvError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, LimitsError>;

/// Schedule of Bernoulli means: each form defines `p_k` for every global
/// index `k ≥ 1` (a prefix of explicit measures shadows the leading entries
/// of the schedule without re-indexing it).
#[derive(Debug, Clone, PartialEq)]
pub enum BernoulliRule {
    /// `p_k = p` for all k.
    Constant { p: f64 },
    /// `p_k = (1 + c·k^{−s})/2`, i.e. mean `a_k = c·k^{−s}`.
    COverKPowS { c: f64, s: f64 },
    /// `p_k = 1 − c·k^{−s}`, i.e. mean `a_k = 1 − 2c·k^{−s}`.
    OneMinusCOverKPowS { c: f64, s: f64 },
    /// `p_k = ps[k−1]`; indices beyond the list are undefined.
    Explicit { ps: Vec<f64> },
}

impl BernoulliRule {
    /// Validates that the rule yields `p_k ∈ [0, 1]` for every index it
    /// defines.
    fn validate(&self) -> Result<()> {
        let check = |k: usize, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(LimitsError::RuleOutOfRange { k, p })
            }
        };
        match self {
            Self::Constant { p } => check(1, *p),
            Self::COverKPowS { c, s } => {
                if *s < 0.0 {
                    return Err(LimitsError::InvalidRule {
                        reason: format!("decay exponent s = {s} must be nonnegative"),
                    });
                }
                // k^{−s} ≤ 1 for k ≥ 1, so k = 1 is the extreme index.
                check(1, (1.0 + c) / 2.0)?;
                check(1, (1.0 - c) / 2.0).map_err(|_| LimitsError::InvalidRule {
                    reason: format!("|c| = {} must be at most 1", c.abs()),
                })
            }
            Self::OneMinusCOverKPowS { c, s } => {
                if *s < 0.0 {
                    return Err(LimitsError::InvalidRule {
                        reason: format!("decay exponent s = {s} must be nonnegative"),
                    });
                }
                check(1, 1.0 - c)
            }
            Self::Explicit { ps } => {
                for (i, &p) in ps.iter().enumerate() {
                    check(i + 1, p)?;
                }
                Ok(())
            }
        }
    }

    /// `p_k` at global index `k ≥ 1`.
    pub fn p(&self, k: usize) -> Result<f64> {
        let p = match self {
            Self::Constant { p } => *p,
            Self::COverKPowS { c, s } => (1.0 + c * (k as f64).powf(-s)) / 2.0,
            Self::OneMinusCOverKPowS { c, s } => 1.0 - c * (k as f64).powf(-s),
            Self::Explicit { ps } => *ps.get(k - 1).ok_or(LimitsError::IndexBeyondSpec {
                k,
                available: ps.len(),
            })?,
        };
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(LimitsError::RuleOutOfRange { k, p })
        }
    }

    /// Signed mean `a_k = 2p_k − 1` at global index `k`.
    pub fn a(&self, k: usize) -> Result<f64> {
        Ok(2.0 * self.p(k)? - 1.0)
    }
}

/// Declared behavior of `Σ α_k`: analytic metadata that lets a horizon-bound
/// classification be definitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSum {
    Diverges,
    Converges,
    Unknown,
}

/// How the factor sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceKind {
    /// A finite list; classification is restricted to the given horizon.
    Explicit(Vec<CircleMeasure>),
    /// Explicit leading factors, then Bernoulli factors from a schedule
    /// (the prefix shadows the schedule's leading indices).
    BernoulliRule {
        prefix: Vec<CircleMeasure>,
        rule: BernoulliRule,
    },
    /// One measure repeated indefinitely.
    Repeated(CircleMeasure),
}

/// A factor sequence plus the declared behavior of its α-sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    kind: SequenceKind,
    tail: TailSum,
}

impl SequenceSpec {
    /// A finite explicit sequence with no analytic tail information.
    pub fn explicit(measures: Vec<CircleMeasure>) -> Self {
        Self {
            kind: SequenceKind::Explicit(measures),
            tail: TailSum::Unknown,
        }
    }

    /// A finite explicit sequence carrying tail information (e.g. a
    /// materialized rule-based sequence that keeps its analytic verdict).
    pub fn explicit_with_tail(measures: Vec<CircleMeasure>, tail: TailSum) -> Self {
        Self {
            kind: SequenceKind::Explicit(measures),
            tail,
        }
    }

    /// Prefix measures followed by Bernoulli factors from `rule`; validates
    /// the rule's parameter ranges up front.
    pub fn bernoulli_rule(
        prefix: Vec<CircleMeasure>,
        rule: BernoulliRule,
        tail: TailSum,
    ) -> Result<Self> {
        rule.validate()?;
        Ok(Self {
            kind: SequenceKind::BernoulliRule { prefix, rule },
            tail,
        })
    }

    /// One measure repeated; its α-sum behavior is decided analytically.
    pub fn repeated(measure: CircleMeasure) -> Self {
        Self {
            kind: SequenceKind::Repeated(measure),
            tail: TailSum::Unknown,
        }
    }

    /// The generating kind.
    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    /// The declared α-sum flag (before analytic derivation).
    pub fn declared_tail(&self) -> TailSum {
        self.tail
    }

    /// The factor at 1-based index `k`.
    pub fn factor(&self, k: usize) -> Result<CircleMeasure> {
        debug_assert!(k >= 1);
        match &self.kind {
            SequenceKind::Explicit(measures) => measures
                .get(k - 1)
                .cloned()
                .ok_or(LimitsError::IndexBeyondSpec {
                    k,
                    available: measures.len(),
                }),
            SequenceKind::BernoulliRule { prefix, rule } => {
                if k <= prefix.len() {
                    Ok(prefix[k - 1].clone())
                } else {
                    Ok(CircleMeasure::bernoulli(rule.p(k)?)?)
                }
            }
            SequenceKind::Repeated(measure) => Ok(measure.clone()),
        }
    }

    /// Factors 1..=n, materialized.
    pub fn factors(&self, n: usize) -> Result<Vec<CircleMeasure>> {
        if let SequenceKind::Explicit(measures) = &self.kind {
            if measures.is_empty() {
                return Err(LimitsError::EmptySpec);
            }
        }
        (1..=n).map(|k| self.factor(k)).collect()
    }

    /// The α-sum verdict actually used: the declared flag when present,
    /// otherwise derived analytically for repeated and formula-rule kinds
    /// (a finite prefix never affects divergence), otherwise `Unknown`.
    pub fn effective_tail(&self) -> Result<TailSum> {
        if self.tail != TailSum::Unknown {
            return Ok(self.tail);
        }
        let verdict_for_mean = |a: f64| {
            if 1.0 - a.abs() <= ZERO_MEAN_TOL {
                TailSum::Converges // α ≡ 0: the factor is a rotated point mass
            } else {
                TailSum::Diverges // constant positive α
            }
        };
        Ok(match &self.kind {
            SequenceKind::Repeated(m) => verdict_for_mean(m.first_moment()?.norm()),
            SequenceKind::BernoulliRule { rule, .. } => match rule {
                BernoulliRule::Constant { p } => verdict_for_mean(2.0 * p - 1.0),
                // |a_k| = |c|·k^{−s} → 0 for s > 0, so α_k → 1.
                BernoulliRule::COverKPowS { c, s } => {
                    if *s > 0.0 {
                        TailSum::Diverges
                    } else {
                        verdict_for_mean(*c)
                    }
                }
                // α_k = 1 − |1 − 2c·k^{−s}| behaves like 2c·k^{−s}: the sum
                // diverges exactly when s ≤ 1 (for c > 0).
                BernoulliRule::OneMinusCOverKPowS { c, s } => {
                    if *c == 0.0 {
                        TailSum::Converges
                    } else if *s == 0.0 {
                        verdict_for_mean(1.0 - 2.0 * c)
                    } else if *s <= 1.0 {
                        TailSum::Diverges
                    } else {
                        TailSum::Converges
                    }
                }
                BernoulliRule::Explicit { .. } => TailSum::Unknown,
            },
            SequenceKind::Explicit(_) => TailSum::Unknown,
        })
    }

    /// The same sequence with factor `k` rotated by `angles[k−1]` (missing
    /// angles default to 0), materialized over `horizon` factors as an
    /// explicit spec that keeps this spec's effective tail verdict.
    /// Classification is invariant under such rotations.
    pub fn rotated(&self, angles: &[f64], horizon: usize) -> Result<SequenceSpec> {
        let tail = self.effective_tail()?;
        let measures = self
            .factors(horizon)?
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.rotate(angles.get(i).copied().unwrap_or(0.0)))
            .collect();
        Ok(SequenceSpec::explicit_with_tail(measures, tail))
    }
}

/// The seven-way convergence case split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    /// No mean-zero factor and ∏ a_k stays away from zero: no convergence.
    I,
    /// Two or more mean-zero factors: the product is uniform from the second
    /// one on.
    II,
    /// No mean-zero factor, ∏ a_k → 0, and lim inf a_k = 0.
    III1,
    /// No mean-zero factor, ∏ a_k → 0, and lim inf a_k > 0.
    III2,
    /// Exactly one mean-zero factor, which is itself uniform.
    IV1,
    /// Exactly one mean-zero factor and the product of the remaining means
    /// tends to zero.
    IV2,
    /// Exactly one mean-zero factor and the product of the remaining means
    /// stays away from zero: no convergence.
    IV3,
}

impl CaseLabel {
    /// Whether the partial products converge to the uniform law in this case.
    pub fn converges_to_uniform(self) -> bool {
        !matches!(self, CaseLabel::I | CaseLabel::IV3)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::I => "I",
            CaseLabel::II => "II",
            CaseLabel::III1 => "III.1",
            CaseLabel::III2 => "III.2",
            CaseLabel::IV1 => "IV.1",
            CaseLabel::IV2 => "IV.2",
            CaseLabel::IV3 => "IV.3",
        };
        f.write_str(s)
    }
}

/// Evidence backing a classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Witnesses {
    /// 1-based indices of factors with |c₁| ≤ ZERO_MEAN_TOL.
    pub zero_mean_indices: Vec<usize>,
    /// The mean-zero factor found to be uniform, for the uniform-factor case.
    pub uniform_index: Option<usize>,
    /// ∏ a_k over the range that decided the case (the tail after the zero
    /// index for the one-zero cases, the full horizon otherwise).
    pub product_estimate: f64,
    /// Σ (1 − a_k) over the same range.
    pub alpha_sum_estimate: f64,
    /// min a_k over the trailing half-horizon; recorded for the vanishing-
    /// product cases where the subcase split consults it.
    pub liminf_estimate: Option<f64>,
}

/// Output of [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub case_label: CaseLabel,
    pub converges_to_uniform: bool,
    pub witnesses: Witnesses,
    /// Per-factor phase arg(c₁) removed by mean normalization (0 for
    /// mean-zero factors); rotating factor k by the negative of entry k−1
    /// makes its mean real and nonnegative.
    pub normalization_angles: Vec<f64>,
    /// True when the product-limit decision had to fall back to numeric
    /// evidence that was not decisive at this horizon; the reported case is
    /// then the numerically favored branch.
    pub indeterminate_at_horizon: bool,
}

/// Verdict on whether a product of means tends to zero, with the evidence.
struct ProductVerdict {
    vanishes: bool,
    indeterminate: bool,
    product: f64,
    alpha_sum: f64,
}

/// Decides whether `∏ a_k → 0` over an infinite continuation of the given
/// horizon data, preferring the analytic tail verdict; numerically, a partial
/// product below PRODUCT_VANISH_TOL reads "yes" and a Cauchy-flat α-sum reads
/// "no". Anything else is indeterminate, favoring whichever threshold the
/// evidence is closer to in log distance.
fn product_verdict(a: &[f64], tail: TailSum) -> ProductVerdict {
    let product: f64 = a.iter().product();
    let alpha_sum: f64 = a.iter().map(|ai| 1.0 - ai).sum();
    let (vanishes, indeterminate) = match tail {
        TailSum::Diverges => (true, false),
        TailSum::Converges => (false, false),
        TailSum::Unknown => {
            let half = a.len() / 2;
            let increment: f64 = a[a.len() - half..].iter().map(|ai| 1.0 - ai).sum();
            if product < PRODUCT_VANISH_TOL {
                (true, false)
            } else if increment < ALPHA_CAUCHY_TOL {
                (false, false)
            } else {
                let d_vanish = (product / PRODUCT_VANISH_TOL).log10().max(0.0);
                let d_persist = (increment / ALPHA_CAUCHY_TOL).log10().max(0.0);
                (d_vanish <= d_persist, true)
            }
        }
    };
    ProductVerdict {
        vanishes,
        indeterminate,
        product,
        alpha_sum,
    }
}

/// Whether a factor behaves as the uniform measure: flagged uniform exactly,
/// or all moments ≤ ZERO_MEAN_TOL to the probe depth (finite data cannot
/// certify uniformity — a documented limitation).
fn is_effectively_uniform(m: &CircleMeasure) -> Result<bool> {
    if m.is_known_uniform() {
        return Ok(true);
    }
    let probe = match m.stored_moments() {
        Some(mv) if m.atomic().is_none() => mv.order().min(UNIFORMITY_PROBE_ORDER),
        _ => UNIFORMITY_PROBE_ORDER,
    };
    Ok(m.moments(probe.max(1))?.max_abs_moment() <= ZERO_MEAN_TOL)
}

/// Classifies the convergence behavior of `μ_1 ⊠ … ⊠ μ_n` over the first
/// `horizon` factors of `spec`.
///
/// After normalizing away each factor's mean phase, the case is decided by
/// the number of mean-zero factors: two or more give the uniform-absorption
/// case; exactly one gives the uniform-factor case or one of the two
/// tail-product cases; none gives the persistent-product case or one of the
/// two vanishing-product subcases. Product limits use the spec's tail
/// verdict when available and horizon numerics otherwise.
pub fn classify(spec: &SequenceSpec, horizon: usize) -> Result<ClassificationResult> {
    if horizon < 2 {
        return Err(LimitsError::HorizonTooSmall(horizon));
    }
    let factors = spec.factors(horizon)?;
    let c1: Vec<Complex64> = factors
        .iter()
        .map(|m| m.first_moment())
        .collect::<std::result::Result<_, _>>()?;
    let a: Vec<f64> = c1.iter().map(|c| c.norm()).collect();
    let normalization_angles: Vec<f64> = c1
        .iter()
        .map(|c| if c.norm() <= ZERO_MEAN_TOL { 0.0 } else { c.arg() })
        .collect();
    let zeros: Vec<usize> = a
        .iter()
        .enumerate()
        .filter(|(_, ai)| **ai <= ZERO_MEAN_TOL)
        .map(|(i, _)| i + 1)
        .collect();
    let tail = spec.effective_tail()?;

    let mut witnesses = Witnesses {
        zero_mean_indices: zeros.clone(),
        uniform_index: None,
        product_estimate: a.iter().product(),
        alpha_sum_estimate: a.iter().map(|ai| 1.0 - ai).sum(),
        liminf_estimate: None,
    };

    let (case_label, indeterminate) = if zeros.len() >= 2 {
        (CaseLabel::II, false)
    } else if zeros.len() == 1 {
        let i = zeros[0];
        if is_effectively_uniform(&factors[i - 1])? {
            witnesses.uniform_index = Some(i);
            (CaseLabel::IV1, false)
        } else {
            let verdict = product_verdict(&a[i..], tail);
            witnesses.product_estimate = verdict.product;
            witnesses.alpha_sum_estimate = verdict.alpha_sum;
            if verdict.vanishes {
                (CaseLabel::IV2, verdict.indeterminate)
            } else {
                (CaseLabel::IV3, verdict.indeterminate)
            }
        }
    } else {
        let verdict = product_verdict(&a, tail);
        witnesses.product_estimate = verdict.product;
        witnesses.alpha_sum_estimate = verdict.alpha_sum;
        if !verdict.vanishes {
            (CaseLabel::I, verdict.indeterminate)
        } else {
            let half = (horizon / 2).max(1);
            let liminf_estimate = a[horizon - half..]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            witnesses.liminf_estimate = Some(liminf_estimate);
            // Formula-rule and repeated sequences split analytically on their
            // limiting mean; purely explicit data falls back to the trailing
            // minimum against LIMINF_SPLIT_TOL (a horizon heuristic).
            let vanishing_liminf = match &spec.kind {
                SequenceKind::Repeated(_) => false,
                SequenceKind::BernoulliRule { rule, .. } => match rule {
                    BernoulliRule::Constant { .. } => false,
                    BernoulliRule::COverKPowS { s, .. } => *s > 0.0,
                    BernoulliRule::OneMinusCOverKPowS { .. } => false,
                    BernoulliRule::Explicit { .. } => liminf_estimate <= LIMINF_SPLIT_TOL,
                },
                SequenceKind::Explicit(_) => liminf_estimate <= LIMINF_SPLIT_TOL,
            };
            if vanishing_liminf {
                (CaseLabel::III1, verdict.indeterminate)
            } else {
                (CaseLabel::III2, verdict.indeterminate)
            }
        }
    };

    Ok(ClassificationResult {
        case_label,
        converges_to_uniform: case_label.converges_to_uniform(),
        witnesses,
        normalization_angles,
        indeterminate_at_horizon: indeterminate,
    })
}

/// One row of the convergence diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub n: usize,
    /// max_{1 ≤ k ≤ K} |c_k| of the n-th partial product.
    pub max_abs_moment: f64,
}

/// Tabulates the flatness diagnostic `max_{k≤K} |c_k^{(n)}|` for the partial
/// products over `n = 1..=n_max`. Convergence to the uniform law is exactly
/// "all moments tend to 0", so a classification can be sanity-checked against
/// this table.
pub fn diagnose(spec: &SequenceSpec, n_max: usize, k_order: usize) -> Result<Vec<DiagnosticRow>> {
    let factors = spec.factors(n_max)?;
    let vectors: Vec<MomentVector> = factors
        .iter()
        .map(|m| m.moments(k_order))
        .collect::<std::result::Result<_, _>>()?;
    let partials = freeconv::product_moments(&vectors, k_order)?;
    Ok(partials
        .iter()
        .enumerate()
        .map(|(i, p)| DiagnosticRow {
            n: i + 1,
            max_abs_moment: p.max_abs_moment(),
        })
        .collect())
}

/// One evaluation point of a bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPoint {
    /// Human-readable description of the point (k, z, n as applicable).
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs: the slack in the inequality at this point (for lower
    /// bounds the sides are arranged so positive margin still means "holds").
    pub margin: f64,
}

impl BoundPoint {
    fn new(label: String, lhs: f64, rhs: f64) -> Self {
        Self {
            label,
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }
}

/// Grid evaluation of one inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub inequality_id: &'static str,
    pub points: Vec<BoundPoint>,
    /// True when every margin is ≥ −MARGIN_TOL (vacuously true on an empty
    /// grid — callers can see the point count).
    pub pass: bool,
}

impl BoundReport {
    fn new(inequality_id: &'static str, points: Vec<BoundPoint>) -> Self {
        let pass = points.iter().all(|p| p.margin >= -MARGIN_TOL);
        Self {
            inequality_id,
            points,
            pass,
        }
    }

    /// Smallest margin over the grid (+∞ when empty).
    pub fn min_margin(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Normalized means a_i = |c₁(μ_i)| for factors 1..=n, erroring when any is
/// zero (the decay bounds all require a positive lower bound on the means).
fn positive_means(factors: &[CircleMeasure]) -> Result<Vec<f64>> {
    let mut a = Vec::with_capacity(factors.len());
    for (i, m) in factors.iter().enumerate() {
        let ai = m.first_moment()?.norm();
        if ai <= ZERO_MEAN_TOL {
            return Err(LimitsError::NotApplicable {
                reason: format!("factor {} has zero mean; bounds need a_i > 0", i + 1),
            });
        }
        a.push(ai);
    }
    Ok(a)
}

/// Checks the product-moment decay bound
/// `|c_k^{(n)}| ≤ (C/a²)^k · [(Σ α_i)·exp(−Σ α_i)]^k`, C = 2¹⁷,
/// with `a = min_i a_i`, for `k = 1..=K`. Applicable once `Σ α_i > 1`
/// (the bound's own validity threshold); smaller sums are reported as
/// not-applicable rather than guessed at.
pub fn check_ck_bound(spec: &SequenceSpec, n: usize, k_max: usize) -> Result<BoundReport> {
    let factors = spec.factors(n)?;
    let a = positive_means(&factors)?;
    let alpha_sum: f64 = a.iter().map(|ai| 1.0 - ai).sum();
    if alpha_sum <= 1.0 {
        return Err(LimitsError::NotApplicable {
            reason: format!("alpha sum {alpha_sum} at n = {n} is not above 1"),
        });
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    // |c_k| of the product is rotation-invariant, so the raw factors serve.
    let vectors: Vec<MomentVector> = factors
        .iter()
        .map(|m| m.moments(k_max))
        .collect::<std::result::Result<_, _>>()?;
    let product = freeconv::product_moments(&vectors, k_max)?
        .pop()
        .expect("n >= 1 factors");
    let base = (MOMENT_DECAY_CONSTANT / (a_min * a_min)) * alpha_sum * (-alpha_sum).exp();
    let points = (1..=k_max)
        .map(|k| {
            BoundPoint::new(
                format!("n={n}, k={k}"),
                product.moment(k as i64).expect("k within order").norm(),
                base.powi(k as i32),
            )
        })
        .collect();
    Ok(BoundReport::new("product-moment-decay", points))
}

/// Pointwise inverse of ψ: a reverted series seeds a Newton iteration against
/// the exact ψ (atomic case) or the truncated ψ polynomial, and every result
/// must pass the residual check |ψ(w) − z| ≤ INVERSION_RESIDUAL_TOL.
struct PsiInverter<'a> {
    inverse_series: TruncatedSeries,
    psi: PsiSource<'a>,
}

enum PsiSource<'a> {
    Atomic(&'a AtomicMeasure),
    Poly(TruncatedSeries),
}

impl PsiSource<'_> {
    fn value(&self, w: Complex64) -> Result<Complex64> {
        match self {
            PsiSource::Atomic(m) => Ok(m.psi(w)?),
            PsiSource::Poly(series) => Ok(series.eval(w)),
        }
    }

    fn derivative(&self, w: Complex64) -> Result<Complex64> {
        match self {
            PsiSource::Atomic(m) => Ok(m.psi_derivative(w)?),
            PsiSource::Poly(series) => {
                // Horner evaluation of Σ k·c_k·w^{k−1}.
                let c = series.coeffs();
                let mut acc = Complex64::new(0.0, 0.0);
                for k in (1..c.len()).rev() {
                    acc = acc * w + c[k] * (k as f64);
                }
                Ok(acc)
            }
        }
    }
}

impl<'a> PsiInverter<'a> {
    fn for_atomic(m: &'a AtomicMeasure, order: usize) -> Result<Self> {
        let inverse_series = m.moments(order)?.psi_series(order)?.revert()?;
        Ok(Self {
            inverse_series,
            psi: PsiSource::Atomic(m),
        })
    }

    /// From a truncated series for ψ⁻¹ itself; ψ is recovered by reversion
    /// (triangular, so low-order accuracy is preserved) and serves as the
    /// Newton/residual target.
    fn for_inverse_series(inverse_series: TruncatedSeries) -> Result<Self> {
        let psi = inverse_series.revert()?;
        Ok(Self {
            inverse_series,
            psi: PsiSource::Poly(psi),
        })
    }

    fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut w = self.inverse_series.eval(z);
        // ψ⁻¹ maps the bound domains well inside the unit disk; keep the
        // iterate there so ψ stays evaluable even from a poor seed.
        if w.norm() > 0.9 {
            w *= 0.9 / w.norm();
        }
        for _ in 0..64 {
            let f = self.psi.value(w)? - z;
            if f.norm() <= 1e-15 {
                break;
            }
            let d = self.psi.derivative(w)?;
            if d.norm() < 1e-300 {
                break;
            }
            let mut step = f / d;
            if step.norm() > 0.1 {
                step *= 0.1 / step.norm();
            }
            w -= step;
            if w.norm() > 0.9 {
                w *= 0.9 / w.norm();
            }
        }
        let residual = (self.psi.value(w)? - z).norm();
        if residual > INVERSION_RESIDUAL_TOL {
            return Err(LimitsError::ResidualTooLarge { z, residual });
        }
        Ok(w)
    }
}

fn label_z(z: Complex64) -> String {
    format!("z=({:.6},{:.6})", z.re, z.im)
}

/// Verifies the per-measure estimate suite on one normalized atomic measure
/// (`a = c₁` real, `0 < a ≤ 1`; `α = 1 − a`). One report per inequality:
///
/// * `angular-moment-bounds` — ∫θ²dμ ≤ (π²/2)α, |∫θdμ| ≤ (1 + π³/12)α, and
///   ∫|θ|^k dμ ≤ (π^k/2)α for 2 < k ≤ k_max;
/// * `moment-proximity-to-one` — |c_k − 1| ≤ 7k³α for k ≤ k_max;
/// * `psi-linear-approximation` — |ψ(z) − az/(1−z)| ≤ 716·α·|z|² on |z| ≤ ½;
/// * `psi-lower-bound-on-circle` — |ψ(z)| ≥ a²/6 on |z| = a/3 (sides are
///   arranged as lhs = a²/6, rhs = |ψ(z)| so positive margin means "holds");
/// * `psi-inverse-linear-bound` — |ψ⁻¹(z)| ≤ (2/a)|z| on |z| ≤ a²/12;
/// * `psi-inverse-rational-approximation` — |ψ⁻¹(z)/(z/(a+z)) − 1| ≤
///   (3342/a²)·α·|z| on the same disk.
///
/// Grid points outside an inequality's domain are skipped for that
/// inequality. ψ⁻¹ is evaluated by high-order reversion plus Newton polish
/// with the residual requirement enforced.
pub fn verify_lemma_bounds(
    m: &AtomicMeasure,
    z_grid: &[Complex64],
    k_max: usize,
) -> Result<Vec<BoundReport>> {
    let c1 = m.first_moment();
    if c1.im.abs() > ZERO_MEAN_TOL {
        return Err(LimitsError::NotApplicable {
            reason: format!("first moment {c1} is not real; normalize the phase first"),
        });
    }
    let a = c1.re;
    if a <= 0.0 || a > 1.0 + ZERO_MEAN_TOL {
        return Err(LimitsError::NotApplicable {
            reason: format!("mean a = {a} must lie in (0, 1]"),
        });
    }
    let a = a.min(1.0);
    let alpha = (1.0 - a).max(0.0);
    if k_max == 0 {
        return Err(MeasureError::OrderZero.into());
    }

    // Angular moment bounds, straight from the atoms.
    let mut angular = Vec::new();
    let theta_sq: f64 = m.atoms().iter().map(|&(t, w)| w * t * t).sum();
    angular.push(BoundPoint::new(
        "second-moment".into(),
        theta_sq,
        PI * PI / 2.0 * alpha,
    ));
    let theta_mean: f64 = m.atoms().iter().map(|&(t, w)| w * t).sum();
    angular.push(BoundPoint::new(
        "first-moment-magnitude".into(),
        theta_mean.abs(),
        (1.0 + PI.powi(3) / 12.0) * alpha,
    ));
    for k in 3..=k_max {
        let abs_k: f64 = m.atoms().iter().map(|&(t, w)| w * t.abs().powi(k as i32)).sum();
        angular.push(BoundPoint::new(
            format!("abs-moment k={k}"),
            abs_k,
            PI.powi(k as i32) / 2.0 * alpha,
        ));
    }

    // Moment proximity to 1.
    let moments = m.moments(k_max)?;
    let proximity = (1..=k_max)
        .map(|k| {
            let ck = moments.moment(k as i64).expect("within order");
            BoundPoint::new(
                format!("k={k}"),
                (ck - Complex64::new(1.0, 0.0)).norm(),
                7.0 * (k as f64).powi(3) * alpha,
            )
        })
        .collect();

    // ψ against its linear model on |z| ≤ 1/2.
    let mut linear = Vec::new();
    for &z in z_grid {
        if z.norm() > 0.5 * (1.0 + 1e-12) {
            continue;
        }
        let lhs = (m.psi(z)? - a * z / (Complex64::new(1.0, 0.0) - z)).norm();
        linear.push(BoundPoint::new(
            label_z(z),
            lhs,
            716.0 * alpha * z.norm_sqr(),
        ));
    }

    // |ψ| from below on the circle |z| = a/3.
    let mut on_circle = Vec::new();
    for &z in z_grid {
        if (z.norm() - a / 3.0).abs() > 1e-9 {
            continue;
        }
        on_circle.push(BoundPoint::new(label_z(z), a * a / 6.0, m.psi(z)?.norm()));
    }

    // ψ⁻¹ bounds on |z| ≤ a²/12.
    let inverter = PsiInverter::for_atomic(m, INVERSION_ORDER)?;
    let mut inv_linear = Vec::new();
    let mut inv_rational = Vec::new();
    for &z in z_grid {
        if z.norm() > a * a / 12.0 * (1.0 + 1e-12) {
            continue;
        }
        let (w, rational_lhs) = if z.norm() == 0.0 {
            // ψ⁻¹(0) = 0 and ψ⁻¹(z)/(z/(a+z)) → 1 as z → 0.
            (Complex64::new(0.0, 0.0), 0.0)
        } else {
            let w = inverter.eval(z)?;
            ((w), (w * (Complex64::new(a, 0.0) + z) / z - 1.0).norm())
        };
        inv_linear.push(BoundPoint::new(label_z(z), w.norm(), 2.0 / a * z.norm()));
        inv_rational.push(BoundPoint::new(
            label_z(z),
            rational_lhs,
            3342.0 / (a * a) * alpha * z.norm(),
        ));
    }

    Ok(vec![
        BoundReport::new("angular-moment-bounds", angular),
        BoundReport::new("moment-proximity-to-one", proximity),
        BoundReport::new("psi-linear-approximation", linear),
        BoundReport::new("psi-lower-bound-on-circle", on_circle),
        BoundReport::new("psi-inverse-linear-bound", inv_linear),
        BoundReport::new("psi-inverse-rational-approximation", inv_rational),
    ])
}

/// Default grid for [`verify_lemma_bounds`]: 32 angles × 8 radii over each
/// inequality's domain scale (|z| ≤ ½ and |z| ≤ a²/12, boundary included)
/// plus the 32-point circle |z| = a/3.
pub fn default_lemma_grid(a: f64) -> Vec<Complex64> {
    let angles = 32;
    let radii = 8;
    let mut grid = Vec::with_capacity(angles * (2 * radii + 1));
    for &scale in &[0.5, a * a / 12.0] {
        for j in 1..=radii {
            let r = scale * j as f64 / radii as f64;
            for t in 0..angles {
                grid.push(Complex64::from_polar(r, -PI + 2.0 * PI * t as f64 / angles as f64));
            }
        }
    }
    for t in 0..angles {
        grid.push(Complex64::from_polar(
            a / 3.0,
            -PI + 2.0 * PI * t as f64 / angles as f64,
        ));
    }
    grid
}

/// Verifies the inverse-ratio growth bound for the n-th partial product:
/// `|z/ψ⁻¹_{(n)}(z)|^k ≤ (2e²)^k·(∏ a_i)^k` for `k ≤ K` and `z` inside the
/// radius `(a²/6684)·min{1, 1/Σ α_i}` with `a = min_i a_i`. The partial
/// product's ψ⁻¹ series comes straight from the product of the
/// phase-normalized factors' S-transforms (a single order-32 pipeline — the
/// multiplicativity of S under ⊠ — which keeps low-order coefficients
/// accurate where chained convolutions would compound reversion roundoff);
/// pointwise values get a Newton polish against the reverted ψ polynomial,
/// residual-checked. Points outside the radius are a hard error
/// (not-applicable), since the bound promises nothing there.
pub fn verify_f_estimate(
    spec: &SequenceSpec,
    n: usize,
    k_max: usize,
    z_grid: &[Complex64],
) -> Result<BoundReport> {
    if n == 0 {
        return Err(LimitsError::NotApplicable {
            reason: "the bound needs at least one factor".into(),
        });
    }
    let factors = spec.factors(n)?;
    let a = positive_means(&factors)?;
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_sum: f64 = a.iter().map(|ai| 1.0 - ai).sum();
    let radius = a_min * a_min / 6684.0 * (1.0 / alpha_sum.max(1.0)).min(1.0);
    if let Some(z) = z_grid
        .iter()
        .find(|z| z.norm() > radius * (1.0 + 1e-12))
    {
        return Err(LimitsError::NotApplicable {
            reason: format!(
                "z = {z} lies outside the bound's radius {radius:e} at n = {n}"
            ),
        });
    }
    // Multiply the factors' S-series, then ψ⁻¹(u) = u/(1+u)·S(u). Each
    // padded S carries junk only in its top slot, which series products
    // never push into lower slots and the final shift-up discards.
    let one = TruncatedSeries::constant(Complex64::new(1.0, 0.0), INVERSION_ORDER)?;
    let recip_one_plus_u = TruncatedSeries::identity(INVERSION_ORDER)?
        .add(&one)?
        .reciprocal()?;
    let mut s_prod: Option<TruncatedSeries> = None;
    for m in &factors {
        let phase = m.first_moment()?.arg();
        let normalized = m.moments(INVERSION_ORDER)?.rotate(-phase);
        let s = normalized.s_series_padded(INVERSION_ORDER, DEFAULT_S_THRESHOLD)?;
        s_prod = Some(match s_prod {
            Some(acc) => acc.mul(&s)?,
            None => s,
        });
    }
    let psi_inverse = s_prod
        .expect("n >= 1 factors")
        .mul(&recip_one_plus_u)?
        .mul_by_var();
    let prod_a: f64 = a.iter().product();
    let inverter = PsiInverter::for_inverse_series(psi_inverse)?;
    let growth = 2.0 * std::f64::consts::E * std::f64::consts::E * prod_a;
    let mut points = Vec::with_capacity(z_grid.len() * k_max);
    for &z in z_grid {
        // z/ψ⁻¹(z) extends continuously to the product mean at z = 0.
        let ratio = if z.norm() == 0.0 {
            prod_a
        } else {
            (z / inverter.eval(z)?).norm()
        };
        for k in 1..=k_max {
            points.push(BoundPoint::new(
                format!("{}, k={k}", label_z(z)),
                ratio.powi(k as i32),
                growth.powi(k as i32),
            ));
        }
    }
    Ok(BoundReport::new("inverse-ratio-growth-bound", points))
}

/// Default grid for [`verify_f_estimate`]: the origin plus 32 angles × 8
/// radii filling the given radius (boundary included).
pub fn default_f_grid(radius: f64) -> Vec<Complex64> {
    let angles = 32;
    let radii = 8;
    let mut grid = Vec::with_capacity(angles * radii + 1);
    grid.push(Complex64::new(0.0, 0.0));
    for j in 1..=radii {
        let r = radius * j as f64 / radii as f64;
        for t in 0..angles {
            grid.push(Complex64::from_polar(r, -PI + 2.0 * PI * t as f64 / angles as f64));
        }
    }
    grid
}

/// The product/sum duality data for a list of means in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumProductRelation {
    pub product: f64,
    pub alpha_sum: f64,
    /// ∏ a_i ≤ exp(−Σ α_i) + 1e−12.
    pub bound_ok: bool,
}

/// Computes `∏ a_i` and `Σ (1 − a_i)` and checks the exponential domination
/// `∏ a_i ≤ exp(−Σ α_i)` tying them together (the identity behind "the
/// product vanishes iff the α-sum diverges").
pub fn sum_product_relation(a_list: &[f64]) -> Result<SumProductRelation> {
    for (index, &value) in a_list.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(LimitsError::EntryOutOfRange { index, value });
        }
    }
    let product: f64 = a_list.iter().product();
    let alpha_sum: f64 = a_list.iter().map(|a| 1.0 - a).sum();
    Ok(SumProductRelation {
        product,
        alpha_sum,
        bound_ok: product <= (-alpha_sum).exp() + 1e-12,
    })
}

/// Partial sum of the series `7·Σ_{k≥0} [(k+2)³ + 1/7]·2^{−k}` defining the
/// constant 716 in the ψ linear-approximation bound; converges to 716.
pub fn psi_approximation_constant_partial_sum(terms: usize) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 0..terms {
        let cube = ((k + 2) as f64).powi(3);
        sum += 7.0 * (cube + 1.0 / 7.0) * pow;
        let _ = k;
        pow *= 0.5;
    }
    sum
}
