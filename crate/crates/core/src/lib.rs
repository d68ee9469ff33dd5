//! Rare-switching policy updates for linear bandits whose design matrix is
//! released with bounded symmetric noise.
//!
//! The classic rule recomputes the policy when `det(V_t) > α det(V_τ)`. Once
//! the matrix is perturbed, `Ṽ_t ⪰ Ṽ_τ` no longer holds and a determinant
//! increase says nothing about the worst direction. The Rayleigh rule
//! switches when `λ_max(Ṽ_τ^{-1/2} Ṽ_t Ṽ_τ^{-1/2}) > α`, which bounds every
//! confidence width directly and still switches only `O(d log T)` times.

pub mod analysis;
pub mod bandit;
pub mod config;
pub mod experiment;
pub mod linalg;
pub mod noise;
pub mod sampling;
pub mod switching;
