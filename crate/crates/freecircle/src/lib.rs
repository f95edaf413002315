//! Numerical toolkit for free multiplicative convolution of probability
//! measures on the unit circle.
//!
//! The distribution of a product of freely independent unitary operators is
//! governed by the moments `c_k = ∫ ξ^k dμ(ξ)` of the factors' spectral
//! measures. This crate computes such product distributions by two
//! independent routes — an exact joint-moment recursion over alternating
//! words and the multiplicative S-transform calculus — and builds on them:
//!
//! * [`series`] — truncated complex power-series arithmetic, including
//!   composition and Lagrange reversion (the substrate for ψ- and
//!   S-functions);
//! * [`measure`] — circle measures as atoms and/or moment vectors: moments,
//!   ψ-function evaluation, S-transform series, phase normalization,
//!   Poisson-kernel density recovery;
//! * [`freeconv`] — free multiplicative convolution ⊠ by the moment-recursion
//!   oracle and by S-transform multiplication, plus iterated products;
//! * [`limits`] — the convergence classifier for infinite products of free
//!   unitaries (which sequences flatten to the uniform law and which do not),
//!   convergence diagnostics, and numerical verification of the explicit
//!   inequalities the classification rests on;
//! * [`rmtsim`] — Monte-Carlo validation: products of independently
//!   Haar-conjugated random unitary matrices, whose empirical eigenvalue
//!   moments must approach the predicted free-convolution moments as the
//!   dimension grows.
//!
//! All computations are deterministic: random corpora and simulations take
//! explicit 64-bit seeds, and floating-point accumulation orders are fixed.

// Link the system BLAS/LAPACK backend used by the matrix simulations.
extern crate blas_src;

pub mod freeconv;
pub mod limits;
pub mod measure;
pub mod rmtsim;
pub mod series;
