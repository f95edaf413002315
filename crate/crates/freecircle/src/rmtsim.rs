//! Monte-Carlo validation of convolution predictions with random matrices.
//!
//! Independently Haar-conjugated unitary matrices are asymptotically free, so
//! the empirical eigenvalue moments of a product `Π = X₁·…·X_n` — each `X_i`
//! a Haar conjugation of a diagonal sampled from an atomic circle measure —
//! must approach the moments predicted by free multiplicative convolution as
//! the dimension grows. This harness samples such products reproducibly and
//! reports empirical moments, spread across trials, the library prediction,
//! and (optionally) the pooled eigenvalue angles for density plots.
//!
//! Tolerances are fluctuation-scaled: the harness validates the convolution
//! routes at finite dimension, it does not define them.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, QRSquare};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::freeconv::{self, ConvError};
use crate::measure::{AtomicMeasure, MeasureError, MomentVector};

/// Default cap on the flop estimate `N³·n·trials`; big enough for dimension
/// 1024 products at modest trial counts, small enough to catch runaway
/// configs before they start.
pub const DEFAULT_FLOP_BUDGET: f64 = 5e12;

/// Errors from simulation configuration and execution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {reason}")]
    InvalidConfig { reason: String },
    #[error("flop estimate {estimate:e} exceeds the budget {budget:e}; shrink N, trials, or factors, or raise the budget")]
    BudgetExceeded { estimate: f64, budget: f64 },
    #[error("no angles supplied")]
    EmptyAngles,
    #[error("need at least 8 bins, got {bins}")]
    TooFewBins { bins: usize },
    #[error("eigenvalue solver failed: {message}")]
    Linalg { message: String },
    #[error(transparent)]
    Conv(#[from] ConvError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Configuration of one product simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Matrix dimension (≥ 2).
    pub n_dim: usize,
    /// Independent repetitions (≥ 1).
    pub trials: usize,
    /// Master seed; all randomness derives from it.
    pub seed: u64,
    /// Highest moment compared (≥ 1).
    pub k_max: usize,
    /// Spectral measures of the factors, in product order.
    pub factors: Vec<AtomicMeasure>,
    /// Whether to run the eigensolver and keep eigenvalue angles; moments
    /// are computed from traces of matrix powers either way, so turning this
    /// off skips the most expensive step when only moments are wanted.
    pub collect_eigenangles: bool,
    /// Flop-estimate cap; `None` uses [`DEFAULT_FLOP_BUDGET`].
    pub flop_budget: Option<f64>,
}

impl SimConfig {
    /// A config with eigenangle collection on and the default budget.
    pub fn new(
        n_dim: usize,
        trials: usize,
        seed: u64,
        k_max: usize,
        factors: Vec<AtomicMeasure>,
    ) -> Self {
        Self {
            n_dim,
            trials,
            seed,
            k_max,
            factors,
            collect_eigenangles: true,
            flop_budget: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_dim < 2 {
            return Err(SimError::InvalidConfig {
                reason: format!("dimension N = {} must be at least 2", self.n_dim),
            });
        }
        if self.trials < 1 {
            return Err(SimError::InvalidConfig {
                reason: "trials must be at least 1".into(),
            });
        }
        if self.k_max < 1 {
            return Err(SimError::InvalidConfig {
                reason: "K must be at least 1".into(),
            });
        }
        if self.factors.is_empty() {
            return Err(SimError::InvalidConfig {
                reason: "at least one factor measure is required".into(),
            });
        }
        Ok(())
    }

    /// The flop estimate `N³·n·trials` used for the budget check.
    pub fn flop_estimate(&self) -> f64 {
        (self.n_dim as f64).powi(3) * self.factors.len() as f64 * self.trials as f64
    }
}

/// Output of [`simulate_product`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Trial-averaged `(1/N)·trace(Π^k)` for k = 1..=K (index 0 ↔ k = 1).
    pub empirical_moments: Vec<Complex64>,
    /// Moments of the convolution of the factor measures, same indexing.
    pub predicted_moments: Vec<Complex64>,
    /// Per-moment sample standard error across trials (0 for a single trial).
    pub standard_errors: Vec<f64>,
    /// Eigenvalue angles per trial (empty when collection is off); angles of
    /// trial t are `eigenangles[t]`, in eigensolver order.
    pub eigenangles: Vec<Vec<f64>>,
}

impl SimResult {
    /// All collected angles, flattened for histogramming.
    pub fn pooled_angles(&self) -> Vec<f64> {
        self.eigenangles.iter().flatten().copied().collect()
    }
}

/// One round of the standard 64-bit mixing function; used to derive
/// independent stream seeds from (seed, trial, factor) counters so the
/// stream assignment is reproducible regardless of execution schedule.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The RNG stream owned by (trial, factor) under a master seed.
fn factor_stream(seed: u64, trial: u64, factor: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ factor);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// A Haar-distributed `N×N` unitary: QR of a complex Ginibre matrix with each
/// column's phase corrected by the sign of the matching diagonal entry of R
/// (without the correction the distribution is unitary but not Haar).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Array2<Complex64>> {
    let mut g = Array2::<Complex64>::zeros((n, n));
    for v in g.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = Complex64::new(re, im);
    }
    let (mut q, r) = g.qr_square().map_err(|e| SimError::Linalg {
        message: e.to_string(),
    })?;
    for j in 0..n {
        let rjj = r[[j, j]];
        // Diagonal entries vanish only on a null set; fall back to no phase
        // correction rather than dividing by zero.
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[[i, j]] *= phase;
        }
    }
    Ok(q)
}

/// A random unitary with spectral measure `m`: `U·D·U*` where `D`'s diagonal
/// holds `N` phases drawn i.i.d. from `m`'s atoms and `U` is Haar.
pub fn sample_factor<R: Rng + ?Sized>(
    m: &AtomicMeasure,
    n: usize,
    rng: &mut R,
) -> Result<Array2<Complex64>> {
    let u = haar_unitary(n, rng)?;
    let diag = sample_phases(m, n, rng);
    Ok(conjugated_diagonal(&u, &diag))
}

/// `N` i.i.d. draws from the atom distribution, as unit-circle points.
fn sample_phases<R: Rng + ?Sized>(m: &AtomicMeasure, n: usize, rng: &mut R) -> Vec<Complex64> {
    let atoms = m.atoms();
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.gen();
            for &(theta, weight) in atoms {
                if u < weight {
                    return Complex64::from_polar(1.0, theta);
                }
                u -= weight;
            }
            // Weight-sum rounding can leave a sliver above the last atom.
            Complex64::from_polar(1.0, atoms[atoms.len() - 1].0)
        })
        .collect()
}

/// `U·diag(d)·U*` via one column scaling and one matrix product.
fn conjugated_diagonal(u: &Array2<Complex64>, diag: &[Complex64]) -> Array2<Complex64> {
    let mut scaled = u.clone();
    for (j, &d) in diag.iter().enumerate() {
        for i in 0..u.nrows() {
            scaled[[i, j]] *= d;
        }
    }
    let u_adj = u.t().mapv(|x| x.conj());
    scaled.dot(&u_adj)
}

/// Runs the product simulation described by `cfg`.
///
/// Per trial, the factors are sampled on independent derived RNG streams
/// (stream id mixes seed, trial index, and factor index, so results do not
/// depend on execution order), multiplied in order, and the powers of the
/// product are traced for the empirical moments; eigenvalue angles are
/// collected when enabled. Trials are aggregated in index order, so a given
/// config reproduces bit-identical results. The flop estimate `N³·n·trials`
/// must clear the budget or the run is refused up front.
pub fn simulate_product(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let budget = cfg.flop_budget.unwrap_or(DEFAULT_FLOP_BUDGET);
    let estimate = cfg.flop_estimate();
    if estimate > budget {
        return Err(SimError::BudgetExceeded { estimate, budget });
    }
    let n = cfg.n_dim;
    let mut per_trial_moments: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.trials);
    let mut eigenangles: Vec<Vec<f64>> = Vec::new();
    for trial in 0..cfg.trials {
        let mut product: Option<Array2<Complex64>> = None;
        for (f, m) in cfg.factors.iter().enumerate() {
            let mut rng = factor_stream(cfg.seed, trial as u64, f as u64);
            let x = sample_factor(m, n, &mut rng)?;
            product = Some(match product {
                Some(p) => p.dot(&x),
                None => x,
            });
        }
        let product = product.expect("validated non-empty factors");
        let mut moments = Vec::with_capacity(cfg.k_max);
        let mut power = product.clone();
        for k in 1..=cfg.k_max {
            moments.push(trace(&power) / n as f64);
            if k < cfg.k_max {
                power = power.dot(&product);
            }
        }
        per_trial_moments.push(moments);
        if cfg.collect_eigenangles {
            let values: Array1<Complex64> =
                product.eigvals().map_err(|e| SimError::Linalg {
                    message: e.to_string(),
                })?;
            eigenangles.push(values.iter().map(|v| v.arg()).collect());
        }
    }

    let trials = cfg.trials as f64;
    let mut empirical_moments = Vec::with_capacity(cfg.k_max);
    let mut standard_errors = Vec::with_capacity(cfg.k_max);
    for k in 0..cfg.k_max {
        let mean = per_trial_moments
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, m| acc + m[k])
            / trials;
        empirical_moments.push(mean);
        let variance = if cfg.trials > 1 {
            per_trial_moments
                .iter()
                .map(|m| (m[k] - mean).norm_sqr())
                .sum::<f64>()
                / (trials - 1.0)
        } else {
            0.0
        };
        standard_errors.push((variance / trials).sqrt());
    }

    let vectors: Vec<MomentVector> = cfg
        .factors
        .iter()
        .map(|m| m.moments(cfg.k_max))
        .collect::<std::result::Result<_, _>>()?;
    let predicted = freeconv::product_moments(&vectors, cfg.k_max)?
        .pop()
        .expect("validated non-empty factors");
    let predicted_moments = (1..=cfg.k_max)
        .map(|k| predicted.moment(k as i64).expect("k within order"))
        .collect();

    Ok(SimResult {
        empirical_moments,
        predicted_moments,
        standard_errors,
        eigenangles,
    })
}

fn trace(a: &Array2<Complex64>) -> Complex64 {
    (0..a.nrows()).map(|i| a[[i, i]]).sum()
}

/// A normalized histogram of angles over [−π, π).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges from −π to π.
    pub edges: Vec<f64>,
    /// Mass per bin; sums to 1.
    pub masses: Vec<f64>,
}

/// Bins angles (canonicalized into [−π, π)) into `bins` equal arcs and
/// normalizes by the sample count.
pub fn empirical_density(angles: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 8 {
        return Err(SimError::TooFewBins { bins });
    }
    if angles.is_empty() {
        return Err(SimError::EmptyAngles);
    }
    let mut counts = vec![0usize; bins];
    for &angle in angles {
        let theta = crate::measure::canonical_angle(angle);
        let pos = (theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * bins as f64;
        let bin = (pos as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let total = angles.len() as f64;
    let edges = (0..=bins)
        .map(|j| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / bins as f64)
        .collect();
    Ok(Histogram {
        edges,
        masses: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}
