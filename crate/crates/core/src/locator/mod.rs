//! Radio map construction, fingerprint matching and parameter tuning.

mod map;
mod matching;
mod tune;

pub use map::{
    build_radio_map, fingerprint_set, fingerprint_trace, Fingerprints, PipelineConfig, RadioMap,
    RpEntry, Survey, FORMAT_VERSION,
};
pub use matching::{
    aoa_distance, entropy_distance, kernel, kernel_regress, locate, locate_fingerprints,
    log_kernel, select_candidates, weighted_centroid, Candidate, CandidateDistances,
    LocationEstimate, MatchParams,
};
pub use tune::{loocv_tune, TuningGrid, TuningResult};
