//! Numeric realization on `D = [-1, 1]`.
//!
//! Model entropies are read in nats: an atom of entropy `h` becomes the tent
//! map whose odd branch count `N` has `log N` closest to `h`. Geometry is exact
//! rational wherever formulas are affine; only the radial pushes use
//! double precision.

mod blowup;
mod estimate;
mod map;
mod orbits;
mod sew;

pub use blowup::{blowup_compose, blowup_maps, default_schedule, Blowup, BlowupComposition};
pub use estimate::{
    check_semiconjugacy, entropy_table, estimate_entropy, fmt_f, iterate, iterate_f64, orbits_csv, sample_points,
    EntropyRow, EntropyTable, Map1d, OrbitTrace,
};
pub use map::{compose_segs, eval_segs, radial_push, tent_segs, Formula, Piece, PiecewiseMap, Seg};
pub use orbits::{find_periodic_orbits, search_orbits, OrbitQuery, PeriodicOrbit};
pub use sew::{atom_tent, realize, scale_candidates, BlownPoint, Bridge, Realization, RealizePlan, ScaleMatch, Tower};

/// `tent(N)` for odd `N ≥ 3`.
pub fn tent(n: u64) -> crate::Result<PiecewiseMap> {
    PiecewiseMap::tent(n)
}
