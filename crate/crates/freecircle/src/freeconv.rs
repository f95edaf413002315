//! Free multiplicative convolution ⊠ of circle measures, by two independent
//! routes, plus iterated products.
//!
//! **Oracle route** ([`joint_moment`], [`convolve_moments`]): expectations of
//! alternating words in free unitaries satisfy a recursion that expands over
//! nonempty subsets of letters — each term multiplies the selected letters'
//! single-moment expectations with the expectation of the word obtained by
//! deleting them (newly adjacent letters of the same factor merge by adding
//! powers; letters whose merged power is zero drop out). This computes
//! moments of products for *all* measures, including mean-zero ones, at
//! exponential cost tamed by memoization on canonical word forms.
//!
//! **S-transform route** ([`convolve_s`]): S-transforms multiply under ⊠, so
//! the moment vector of `μ₁ ⊠ μ₂` follows from multiplying the factors'
//! S-series and functionally inverting back. Fast and accurate whenever both
//! first moments are well away from zero.
//!
//! The two routes share no code beyond series arithmetic, which is what makes
//! their agreement a meaningful cross-check; [`product_moments`] folds a
//! sequence of factors through either route, selected per step by
//! conditioning.

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use std::collections::HashMap;
use thiserror::Error;

use crate::measure::{MeasureError, MomentVector, DEFAULT_S_THRESHOLD};
use crate::series::{SeriesError, TruncatedSeries};

/// Default cap on total letters per word in the oracle expansion; the
/// recursion enumerates all letter subsets, so cost grows like `2^letters`.
pub const DEFAULT_WORD_CAP: usize = 24;
/// Default |c₁| threshold above which iterated products use the S-transform
/// route; below it, inverse-series conditioning (coefficients growing like
/// `(6/|c₁|²)^k`) loses more accuracy than the oracle costs.
pub const DEFAULT_ROUTE_THRESHOLD: f64 = 1e-3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Errors from word construction and convolution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvError {
    #[error("letters {position} and {next} share factor id {id}; words must alternate", next = position + 1)]
    NotAlternating { position: usize, id: usize },
    #[error("letter {position} has zero power")]
    ZeroPower { position: usize },
    #[error("word has {len} letters, beyond the expansion cap {cap}")]
    WordTooLong { len: usize, cap: usize },
    #[error("no measure supplied for factor id {id}")]
    MissingMeasure { id: usize },
    #[error("factor id {id} needs moments to order {needed}, available to {available}")]
    InsufficientOrder {
        id: usize,
        needed: usize,
        available: usize,
    },
    #[error("sequence of factors is empty")]
    EmptySequence,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, ConvError>;

/// An alternating word `X_{id₁}^{p₁} · X_{id₂}^{p₂} · …` in the factors:
/// adjacent letters carry distinct factor ids and all powers are nonzero
/// (negative powers are adjoints, `E(X^{−k}) = conj(E(X^k))` for unitaries).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeWord {
    letters: Vec<(usize, i32)>,
}

impl FreeWord {
    /// Builds a word from `(factor id, power)` letters, validating the
    /// alternating form. The empty word is the identity (expectation 1).
    pub fn new(letters: Vec<(usize, i32)>) -> Result<Self> {
        for (position, &(id, power)) in letters.iter().enumerate() {
            if power == 0 {
                return Err(ConvError::ZeroPower { position });
            }
            if position + 1 < letters.len() && letters[position + 1].0 == id {
                return Err(ConvError::NotAlternating { position, id });
            }
        }
        Ok(Self { letters })
    }

    /// The word `(X_{ids[0]} · X_{ids[1]} · …)^k`, all letters to the first
    /// power; `k = 0` gives the empty word.
    pub fn cycle_power(ids: &[usize], k: usize) -> Result<Self> {
        if k == 0 || ids.is_empty() {
            return Ok(Self { letters: vec![] });
        }
        if ids.len() == 1 {
            return Self::new(vec![(ids[0], k as i32)]);
        }
        let mut letters = Vec::with_capacity(ids.len() * k);
        for _ in 0..k {
            letters.extend(ids.iter().map(|&id| (id, 1)));
        }
        Self::new(letters)
    }

    /// The letters in order.
    pub fn letters(&self) -> &[(usize, i32)] {
        &self.letters
    }

    /// Number of letters.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    /// Whether this is the identity word.
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// A letter in evaluator form: `slot` indexes the per-factor tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Letter {
    slot: u16,
    power: i32,
}

/// Shared state for word-expectation evaluation over a fixed set of factors.
struct Evaluator<'a> {
    /// Moment coefficients per factor slot (`[k]` = moment of order `k`).
    moments: Vec<&'a [Complex64]>,
    /// Identity of the underlying measure per slot: slots whose moment
    /// vectors are equal share an id, so structurally identical words over
    /// equal measures share memo entries.
    measure_ids: Vec<u16>,
    /// Expectation memo keyed by canonical word encoding.
    memo: FxHashMap<Vec<u64>, Complex64>,
}

impl<'a> Evaluator<'a> {
    fn new(moments: Vec<&'a [Complex64]>) -> Self {
        let mut measure_ids = Vec::with_capacity(moments.len());
        for (slot, m) in moments.iter().enumerate() {
            let id = moments[..slot]
                .iter()
                .position(|prev| prev == m)
                .unwrap_or(slot);
            measure_ids.push(id as u16);
        }
        Self {
            moments,
            measure_ids,
            memo: FxHashMap::default(),
        }
    }

    /// Single-letter expectation: `c_p`, or `conj(c_{-p})` for negative `p`.
    fn single(&self, letter: Letter) -> Complex64 {
        let m = self.moments[letter.slot as usize];
        if letter.power >= 0 {
            m[letter.power as usize]
        } else {
            m[(-letter.power) as usize].conj()
        }
    }

    /// Canonical encoding of a word: factor slots relabeled by first
    /// occurrence, one `u64` per letter, then a separator and the measure id
    /// of each label in order. Two words receive equal keys exactly when they
    /// have the same shape over equal measures.
    fn canonical_key(&self, letters: &[Letter]) -> SmallVec<[u64; 64]> {
        let mut labels: SmallVec<[u16; 24]> = SmallVec::from_elem(u16::MAX, self.moments.len());
        let mut label_slots: SmallVec<[u16; 24]> = SmallVec::new();
        let mut key: SmallVec<[u64; 64]> = SmallVec::with_capacity(letters.len() + label_slots.len() + 1);
        for letter in letters {
            let slot = letter.slot as usize;
            let label = if labels[slot] == u16::MAX {
                let next = label_slots.len() as u16;
                labels[slot] = next;
                label_slots.push(letter.slot);
                next
            } else {
                labels[slot]
            };
            key.push(((label as u64) << 32) | (letter.power as u32 as u64));
        }
        key.push(u64::MAX);
        for &slot in &label_slots {
            key.push(self.measure_ids[slot as usize] as u64);
        }
        key
    }

    /// Expectation of an alternating word, memoized.
    fn eval(&mut self, letters: &[Letter]) -> Complex64 {
        match letters.len() {
            0 => return ONE,
            1 => return self.single(letters[0]),
            _ => {}
        }
        let key = self.canonical_key(letters);
        if let Some(&value) = self.memo.get(key.as_slice()) {
            return value;
        }
        let value = self.expand(letters);
        self.memo.insert(key.into_vec(), value);
        value
    }

    /// The subset-deletion expansion: sum over nonempty subsets
    /// `{k₁ < … < k_r}` of letter positions, with sign `(−1)^{r−1}`, of the
    /// selected singles' product times the expectation of the word with those
    /// letters deleted (same-factor neighbors merged, zero powers dropped).
    /// Subsets are enumerated r = 1..=n, lexicographically within each r, and
    /// accumulated in that fixed order so sums are reproducible.
    fn expand(&mut self, letters: &[Letter]) -> Complex64 {
        let n = letters.len();
        let singles: SmallVec<[Complex64; 24]> =
            letters.iter().map(|&l| self.single(l)).collect();
        let mut acc = ZERO;
        let mut sub: SmallVec<[Letter; 24]> = SmallVec::with_capacity(n);
        let mut idx: SmallVec<[usize; 24]> = SmallVec::new();
        for r in 1..=n {
            idx.clear();
            idx.extend(0..r);
            loop {
                let mut prod = ONE;
                for &i in idx.iter() {
                    prod *= singles[i];
                }
                // A zero factor annihilates the term (expectations are
                // bounded), so skipping it leaves the ordered sum unchanged.
                if prod != ZERO {
                    sub.clear();
                    let mut di = 0usize;
                    for (t, &letter) in letters.iter().enumerate() {
                        if di < r && idx[di] == t {
                            di += 1;
                            continue;
                        }
                        match sub.last_mut() {
                            Some(top) if top.slot == letter.slot => {
                                top.power += letter.power;
                                if top.power == 0 {
                                    sub.pop();
                                }
                            }
                            _ => sub.push(letter),
                        }
                    }
                    let rest = self.eval(&sub);
                    if r % 2 == 1 {
                        acc += prod * rest;
                    } else {
                        acc -= prod * rest;
                    }
                }
                // Advance to the next r-subset in lexicographic order.
                let mut j = r;
                let advanced = loop {
                    if j == 0 {
                        break false;
                    }
                    j -= 1;
                    if idx[j] < n - r + j {
                        idx[j] += 1;
                        for t in j + 1..r {
                            idx[t] = idx[t - 1] + 1;
                        }
                        break true;
                    }
                };
                if !advanced {
                    break;
                }
            }
        }
        acc
    }
}

/// Expectation of an alternating word under the measures supplied per factor
/// id, with the default expansion cap.
pub fn joint_moment(
    word: &FreeWord,
    measures: &HashMap<usize, MomentVector>,
) -> Result<Complex64> {
    joint_moment_with_cap(word, measures, DEFAULT_WORD_CAP)
}

/// As [`joint_moment`] with an explicit cap on the word's letter count.
pub fn joint_moment_with_cap(
    word: &FreeWord,
    measures: &HashMap<usize, MomentVector>,
    cap: usize,
) -> Result<Complex64> {
    if word.len() > cap {
        return Err(ConvError::WordTooLong {
            len: word.len(),
            cap,
        });
    }
    // Factor ids in order of first appearance become evaluator slots.
    let mut ids: Vec<usize> = Vec::new();
    for &(id, _) in word.letters() {
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    let mut slots: Vec<&MomentVector> = Vec::with_capacity(ids.len());
    for &id in &ids {
        slots.push(measures.get(&id).ok_or(ConvError::MissingMeasure { id })?);
    }
    // Deletion can merge all of a factor's letters into one, so the moment
    // order must cover the total absolute power per factor.
    for (slot, &id) in ids.iter().enumerate() {
        let needed: i64 = word
            .letters()
            .iter()
            .filter(|&&(lid, _)| lid == id)
            .map(|&(_, p)| p.unsigned_abs() as i64)
            .sum();
        let available = slots[slot].order() as i64;
        if needed > available {
            return Err(ConvError::InsufficientOrder {
                id,
                needed: needed as usize,
                available: available as usize,
            });
        }
    }
    let letters: Vec<Letter> = word
        .letters()
        .iter()
        .map(|&(id, power)| Letter {
            slot: ids.iter().position(|&x| x == id).unwrap() as u16,
            power,
        })
        .collect();
    let mut evaluator = Evaluator::new(slots.iter().map(|m| m.coeffs()).collect());
    Ok(evaluator.eval(&letters))
}

/// Moment vector of `μ₁ ⊠ μ₂` to order `K` by the oracle route: entry `k` is
/// the expectation of `(XY)^k`. Works for every measure, mean-zero included.
pub fn convolve_moments(m1: &MomentVector, m2: &MomentVector, k_max: usize) -> Result<MomentVector> {
    convolve_moments_with_cap(m1, m2, k_max, DEFAULT_WORD_CAP)
}

/// As [`convolve_moments`] with an explicit expansion cap (a word `(XY)^k`
/// has `2k` letters).
pub fn convolve_moments_with_cap(
    m1: &MomentVector,
    m2: &MomentVector,
    k_max: usize,
    cap: usize,
) -> Result<MomentVector> {
    if k_max == 0 {
        return Err(MeasureError::OrderZero.into());
    }
    if 2 * k_max > cap {
        return Err(ConvError::WordTooLong {
            len: 2 * k_max,
            cap,
        });
    }
    for (id, m) in [(0usize, m1), (1, m2)] {
        if m.order() < k_max {
            return Err(ConvError::InsufficientOrder {
                id,
                needed: k_max,
                available: m.order(),
            });
        }
    }
    // One evaluator across all k so the memo is shared by the whole table.
    let mut evaluator = Evaluator::new(vec![m1.coeffs(), m2.coeffs()]);
    let mut c = vec![ONE; k_max + 1];
    let mut letters: Vec<Letter> = Vec::with_capacity(2 * k_max);
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        letters.clear();
        for _ in 0..k {
            letters.push(Letter { slot: 0, power: 1 });
            letters.push(Letter { slot: 1, power: 1 });
        }
        *ck = evaluator.eval(&letters);
    }
    Ok(MomentVector::new(c)?)
}

/// Moment vector of `μ₁ ⊠ μ₂` to order `K` by the S-transform route:
/// `S₁₂ = S₁·S₂`, then `ψ⁻¹₁₂(u) = u/(1+u)·S₁₂(u)` reverts to ψ₁₂, whose
/// coefficients are the product moments. Requires both first moments away
/// from zero; agrees with [`convolve_moments`] wherever both apply.
pub fn convolve_s(m1: &MomentVector, m2: &MomentVector, k_max: usize) -> Result<MomentVector> {
    if k_max == 0 {
        return Err(MeasureError::OrderZero.into());
    }
    for (id, m) in [(0usize, m1), (1, m2)] {
        if m.order() < k_max {
            return Err(ConvError::InsufficientOrder {
                id,
                needed: k_max,
                available: m.order(),
            });
        }
    }
    // All series run at order K. The padded S-series' top coefficients are
    // not meaningful, but products never propagate slot K into lower slots,
    // and the final shift-up discards slot K before reversion, so moments
    // 1..=K come out exact.
    let s1 = m1.truncated(k_max)?.s_series_padded(k_max, DEFAULT_S_THRESHOLD)?;
    let s2 = m2.truncated(k_max)?.s_series_padded(k_max, DEFAULT_S_THRESHOLD)?;
    let s12 = s1.mul(&s2)?;
    let one_plus_u = TruncatedSeries::identity(k_max)?
        .add(&TruncatedSeries::constant(ONE, k_max)?)?;
    let psi_inv = s12.mul(&one_plus_u.reciprocal()?)?.mul_by_var();
    let psi = psi_inv.revert()?;
    let mut c = vec![ONE; k_max + 1];
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        *ck = psi.coeff(k)?;
    }
    Ok(MomentVector::new(c)?)
}

/// Route-selection options for [`product_moments_with`].
#[derive(Debug, Clone, Copy)]
pub struct RouteOptions {
    /// Both operands need |c₁| at least this for the S route.
    pub route_threshold: f64,
    /// Letter cap for oracle-route words.
    pub word_cap: usize,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self {
            route_threshold: DEFAULT_ROUTE_THRESHOLD,
            word_cap: DEFAULT_WORD_CAP,
        }
    }
}

/// Moment vectors of all partial products `μ^{(1)}, …, μ^{(n)}` of a factor
/// sequence, by left-fold convolution with per-step route selection (S route
/// when both operands' |c₁| clear the threshold, oracle otherwise).
pub fn product_moments(seq: &[MomentVector], k_max: usize) -> Result<Vec<MomentVector>> {
    product_moments_with(seq, k_max, RouteOptions::default())
}

/// As [`product_moments`] with explicit route options.
pub fn product_moments_with(
    seq: &[MomentVector],
    k_max: usize,
    options: RouteOptions,
) -> Result<Vec<MomentVector>> {
    let Some(first) = seq.first() else {
        return Err(ConvError::EmptySequence);
    };
    if first.order() < k_max {
        return Err(ConvError::InsufficientOrder {
            id: 0,
            needed: k_max,
            available: first.order(),
        });
    }
    let mut acc = first.truncated(k_max)?;
    let mut out = Vec::with_capacity(seq.len());
    out.push(acc.clone());
    for (i, m) in seq.iter().enumerate().skip(1) {
        if m.order() < k_max {
            return Err(ConvError::InsufficientOrder {
                id: i,
                needed: k_max,
                available: m.order(),
            });
        }
        let next = m.truncated(k_max)?;
        let s_route = acc.first()?.norm() >= options.route_threshold
            && next.first()?.norm() >= options.route_threshold;
        acc = if s_route {
            convolve_s(&acc, &next, k_max)?
        } else {
            convolve_moments_with_cap(&acc, &next, k_max, options.word_cap)?
        };
        out.push(acc.clone());
    }
    Ok(out)
}
