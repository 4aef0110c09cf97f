//! Sample models shared by the criterion targets.

use accum_core::constructors::{default_cap, general_model};
use accum_core::rational::parse_q;
use accum_core::{EntropyModel, Ordinal};

/// `general_model(α, a)` for the textual ordinal `alpha` and rational `a`.
pub fn model(alpha: &str, a: &str) -> EntropyModel {
    let alpha: Ordinal = alpha.parse().expect("valid ordinal");
    general_model(&alpha, &parse_q(a).expect("valid rational"), &default_cap()).expect("constructible").0
}
