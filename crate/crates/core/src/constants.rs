//! Physical and numerical constants used throughout the crate.
//!
//! Everything that enters a reported number is defined here once, so that
//! reports can echo the registry verbatim.

use serde::Serialize;

/// Overall prefactor of the spin-3 projector polynomial in `x = S_i . S_j`.
pub const PROJECTOR_PREFACTOR: f64 = 27.0 / 160.0;
/// Coefficient of `x^2`.
pub const PROJECTOR_QUADRATIC: f64 = 116.0 / 243.0;
/// Coefficient of `x^3`.
pub const PROJECTOR_CUBIC: f64 = 16.0 / 243.0;
/// Constant term.
pub const PROJECTOR_CONSTANT: f64 = 55.0 / 108.0;

/// Edge appearances per torus edge in the patch cover: unweighted, weighted.
pub const COVER_EDGE_COUNTS: (u32, u32) = (10, 4);
/// Adjacent-pair appearances: both unweighted, exactly one weighted, both weighted.
pub const COVER_PAIR_COUNTS: (u32, u32, u32) = (7, 2, 3);

/// Smallest torus extent for which translated patches do not wrap.
pub const MIN_TORUS_EXTENT: usize = 12;

/// Lower bound on the 36-site patch gap at `a = 1.4` obtained with DMRG.
pub const PUBLISHED_GAMMA_F: f64 = 0.145;
/// Extrapolated `J = 13` gap of the 36-site patch at `a = 1.4`.
pub const PUBLISHED_DELTA_13: f64 = 0.14599;
/// Weight at which the published gap was computed.
pub const PUBLISHED_WEIGHT: f64 = 1.4;
/// Published lower bound on the torus gap.
pub const PUBLISHED_BOUND: f64 = 0.00646;

/// Central-hexagon weight of the 12-site validation cluster.
pub const VALIDATION_HEX_WEIGHT: f64 = 1.2;

/// Threshold `t(a) = (a^2 - 2a + 3) / (10 + 4a)`.
pub fn threshold(a: f64) -> f64 {
    (a * a - 2.0 * a + 3.0) / (10.0 + 4.0 * a)
}

/// Prefactor `c(a) = (10 + 4a) / (3a^2 + 2a + 7)`.
pub fn prefactor(a: f64) -> f64 {
    (10.0 + 4.0 * a) / (3.0 * a * a + 2.0 * a + 7.0)
}

/// Snapshot of the registry for inclusion in reports.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConstantsRegistry {
    pub projector_prefactor: String,
    pub projector_quadratic: String,
    pub projector_cubic: String,
    pub projector_constant: String,
    pub threshold: String,
    pub prefactor: String,
    pub cover_edge_counts: (u32, u32),
    pub cover_pair_counts: (u32, u32, u32),
    pub published_gamma_f: f64,
    pub published_delta_13: f64,
    pub published_weight: f64,
    pub published_bound: f64,
}

impl ConstantsRegistry {
    pub fn current() -> Self {
        Self {
            projector_prefactor: "27/160".into(),
            projector_quadratic: "116/243".into(),
            projector_cubic: "16/243".into(),
            projector_constant: "55/108".into(),
            threshold: "(a^2 - 2a + 3) / (10 + 4a)".into(),
            prefactor: "(10 + 4a) / (3a^2 + 2a + 7)".into(),
            cover_edge_counts: COVER_EDGE_COUNTS,
            cover_pair_counts: COVER_PAIR_COUNTS,
            published_gamma_f: PUBLISHED_GAMMA_F,
            published_delta_13: PUBLISHED_DELTA_13,
            published_weight: PUBLISHED_WEIGHT,
            published_bound: PUBLISHED_BOUND,
        }
    }
}
