//! Probabilistic questions about automata over labeled Markov chains.

mod inf;
mod nested;
mod report;
mod wa;

pub use inf::{
    analyze_inf_clipped, analyze_inf_exact, approx_bound, approx_inf_sum, bsum_nwa_to_inf_wa,
    bsum_nwa_to_inf_wa_with, sup_sumplus_distribution, InfWaOptions,
};
pub use nested::{
    almost_sure_acceptance, analyze_liminf_nwa, analyze_limavg_nwa, expected_slave_chain, has_reachable_negative_cycle,
    min_achievable_slave_value, slave_expected_value, AlmostSure,
};
pub use report::{AnalysisReport, Distribution, Method};
pub use wa::analyze_deterministic_wa;
