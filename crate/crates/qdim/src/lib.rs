//! Numerical laboratory for generalized q-dimensions of measures and of their
//! images under Gaussian random fields.
//!
//! For a Borel probability measure `μ` on `[0,1)^N` and `q > 1`, the level-`k`
//! mesh moment is `M_k(q) = Σ_C μ(C)^q` over the half-open base-`m` mesh cubes
//! `C` of side `m^{-k}`, and the generalized q-dimension is the limit of
//! `log M_k(q) / ((q-1) log m^{-k})`.  The library provides
//!
//! * measure models with exact cylinder masses and closed-form moment sums
//!   ([`measure`]),
//! * Gaussian field samplers (fractional Brownian motion by circulant
//!   embedding or Cholesky, spectral fields with Riesz–Bessel and
//!   dyadic-blockwise spectra) plus local-nondeterminism diagnostics
//!   ([`fields`]),
//! * mesh-moment curves and log–log slope estimators for image measures
//!   `μ_X = μ ∘ X^{-1}` ([`estimator`]),
//! * a family of translated ultrametrics on `[0,1/2)^N` comparable to the
//!   Euclidean metric off a small exceptional set ([`ultrametric`]),
//! * join-set combinatorics and multipotential sums on `M`-ary trees,
//!   with exhaustive verifiers for the moment inequalities they satisfy
//!   ([`tree`]),
//! * end-to-end experiments comparing estimated image dimensions against
//!   the predicted value `min{d, D_q(μ)/α}` ([`experiment`]).
//!
//! Everything is deterministic given a seed: replicate seeds are derived by a
//! declared splitting function ([`experiment::split_seed`]) and all samplers
//! are backed by ChaCha8.

pub mod estimator;
pub mod experiment;
pub mod fields;
pub mod measure;
pub mod tree;
pub mod ultrametric;
