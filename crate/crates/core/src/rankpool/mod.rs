//! Rank pooling of frame sequences.
//!
//! [`exact_rank_pool`] solves the pairwise ranking objective iteratively.
//! Approximate rank pooling replaces it with one gradient step from zero,
//! which reduces to fixed per-frame weights ([`arp_coefficients`]); applied to
//! raw frames this gives a dynamic image.

mod approx;
mod exact;

pub use approx::{arp_coefficients, dynamic_feature, dynamic_image, ArpCoefficients, DynamicImage};
pub use exact::{arp_first_step, exact_rank_pool, time_average, RankPoolConfig, RankVector, TimeAverage};
