//! Synthetic multipath CSI with controllable impairments.

mod channel;
mod scene;

pub use channel::{
    clean_cfr, ground_truth, synth_trace, synth_trace_with_rng, ImpairmentProfile, ImpairmentSpec,
    PathComponent, PACKET_INTERVAL,
};
pub use scene::{
    make_radio_scene, rp_grid, scene_point, RoomSpec, ScenePoint, SceneSpec, WallPhases,
};
