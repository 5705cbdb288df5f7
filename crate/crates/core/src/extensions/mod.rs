//! Several independent sequences, higher-order chains and time-dependent
//! transition laws.

mod higher;
mod nonstationary;
mod pooled;

pub use higher::{
    augment_order, augmented_estimate, higher_order_estimate, higher_order_fit, higher_order_objective,
    ngram_counts, simulate_higher_order, AugmentedFamily, FirstOrder, HigherOrderEmpirical, HigherOrderFamily,
    HigherOrderSpec, MomentumBinomial, MAX_AUGMENTED_STATES,
};
pub use nonstationary::{
    nonstationary_estimate, nonstationary_fit, nonstationary_gradient, nonstationary_objective, time_slices, ConstantInTime, InterpolatedFamily,
    TimeFamily,
};
pub use pooled::{multi_sequence_estimate, pooled_counts, MultiSequenceFit, PooledCounts, SequenceBundle};

#[cfg(test)]
mod tests;
