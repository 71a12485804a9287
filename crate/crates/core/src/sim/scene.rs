//! Rectangular-room scenes built with the image method: one direct path and
//! one reflection off each of the four walls per transmitter.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{ImpairmentProfile, PathComponent};
use crate::csi::RadioConfig;
use crate::error::{Error, Result};

/// Shortest distance used for free-space loss, meters.
const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub width: f64,
    pub height: f64,
    /// Transmitter (AP) positions `[x, y]`, meters.
    pub tx_positions: Vec<[f64; 2]>,
    /// Extra loss per wall bounce, dB.
    pub wall_reflection_loss: f64,
    /// Direction of the receiving array's broadside in the room frame,
    /// degrees counter-clockwise from +x.
    pub array_orientation: f64,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite()
            && self.width > 0.0
            && self.height.is_finite()
            && self.height > 0.0)
        {
            return Err(Error::invalid(format!(
                "room dimensions must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        if self.tx_positions.is_empty() {
            return Err(Error::invalid("room needs at least one transmitter"));
        }
        for (i, &[x, y]) in self.tx_positions.iter().enumerate() {
            if !(x > 0.0 && x < self.width && y > 0.0 && y < self.height) {
                return Err(Error::invalid(format!(
                    "transmitter {i} at ({x}, {y}) is not inside the room"
                )));
            }
        }
        if !(self.wall_reflection_loss.is_finite() && self.wall_reflection_loss >= 0.0) {
            return Err(Error::invalid(
                "wall_reflection_loss must be finite and >= 0 dB",
            ));
        }
        if !self.array_orientation.is_finite() {
            return Err(Error::invalid("array_orientation must be finite"));
        }
        Ok(())
    }

    /// Whether `[x, y]` lies strictly inside the room.
    pub fn contains(&self, [x, y]: [f64; 2]) -> bool {
        x > 0.0 && x < self.width && y > 0.0 && y < self.height
    }
}

/// A scene file: room geometry plus survey layout and impairment ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(flatten)]
    pub room: RoomSpec,
    #[serde(default = "default_spacing")]
    pub rp_spacing: f64,
    /// Online test locations; when empty, callers draw random points.
    #[serde(default)]
    pub test_points: Vec<[f64; 2]>,
    #[serde(default)]
    pub impairments: ImpairmentProfile,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
}

fn default_spacing() -> f64 {
    1.0
}

fn default_snr() -> f64 {
    20.0
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: SceneSpec = serde_json::from_str(text)?;
        s.room.validate()?;
        if !(s.rp_spacing.is_finite() && s.rp_spacing > 0.0) {
            return Err(Error::invalid("rp_spacing must be positive"));
        }
        for &p in &s.test_points {
            if !s.room.contains(p) {
                return Err(Error::invalid(format!(
                    "test point {p:?} is outside the room"
                )));
            }
        }
        Ok(s)
    }
}

/// Channel description of one location: the multipath set seen from each AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub location: [f64; 2],
    pub paths_per_tx: Vec<Vec<PathComponent>>,
}

/// Fixed extra phase of each wall (x=0, x=W, y=0, y=H) for each transmitter,
/// standing in for unknown material response.
#[derive(Debug, Clone)]
pub struct WallPhases(Vec<[f64; 4]>);

impl WallPhases {
    pub fn draw(n_tx: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(
            (0..n_tx)
                .map(|_| std::array::from_fn(|_| rng.random_range(0.0..TAU)))
                .collect(),
        )
    }
}

/// Multipath set from each transmitter to a receiver at `location`.
pub fn scene_point(
    room: &RoomSpec,
    walls: &WallPhases,
    location: [f64; 2],
    cfg: &RadioConfig,
) -> Result<ScenePoint> {
    if !room.contains(location) {
        return Err(Error::invalid(format!(
            "location {location:?} is outside the room"
        )));
    }
    let lambda = cfg.wavelength();
    let broadside = room.array_orientation.to_radians();
    // Unit vector along the array axis; rx index grows in this direction.
    let axis = [(broadside + TAU / 4.0).cos(), (broadside + TAU / 4.0).sin()];
    let refl_gain = 10f64.powf(-room.wall_reflection_loss / 20.0);
    let [rx, ry] = location;

    let paths_per_tx = room
        .tx_positions
        .iter()
        .enumerate()
        .map(|(t, &[tx, ty])| {
            let images = [
                ([tx, ty], None),
                ([-tx, ty], Some(0)),
                ([2.0 * room.width - tx, ty], Some(1)),
                ([tx, -ty], Some(2)),
                ([tx, 2.0 * room.height - ty], Some(3)),
            ];
            let mut paths = Vec::with_capacity(images.len());
            for ([ix, iy], wall) in images {
                let (dx, dy) = (ix - rx, iy - ry);
                let dist = dx.hypot(dy).max(MIN_DISTANCE);
                let tau = dist / cfg.c;
                if tau >= cfg.delay_span() {
                    continue;
                }
                let sin_theta = ((dx * axis[0] + dy * axis[1]) / dist).clamp(-1.0, 1.0);
                let mut alpha = lambda / (2.0 * TAU * dist);
                let mut phi = TAU * cfg.f_c * tau;
                if let Some(w) = wall {
                    alpha *= refl_gain;
                    phi += TAU / 2.0 + walls.0[t][w];
                }
                paths.push(PathComponent::new(
                    alpha,
                    phi.rem_euclid(TAU),
                    tau,
                    sin_theta.asin().to_degrees(),
                ));
            }
            paths
        })
        .collect();
    Ok(ScenePoint {
        location,
        paths_per_tx,
    })
}

/// Cell-centered RP grid positions for the given spacing.
pub fn rp_grid(room: &RoomSpec, spacing: f64) -> Result<Vec<[f64; 2]>> {
    if !(spacing.is_finite() && spacing > 0.0) || spacing >= room.width.min(room.height) {
        return Err(Error::invalid(format!(
            "grid spacing {spacing} must be positive and smaller than the room"
        )));
    }
    let nx = (room.width / spacing + 1e-9).floor() as usize;
    let ny = (room.height / spacing + 1e-9).floor() as usize;
    let x0 = (room.width - nx as f64 * spacing) / 2.0 + spacing / 2.0;
    let y0 = (room.height - ny as f64 * spacing) / 2.0 + spacing / 2.0;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push([x0 + i as f64 * spacing, y0 + j as f64 * spacing]);
        }
    }
    Ok(out)
}

/// Per-RP channel descriptions over a cell-centered grid. `seed` fixes the
/// wall phases; the geometry itself is deterministic.
pub fn make_radio_scene(
    room: &RoomSpec,
    rp_grid_spacing: f64,
    cfg: &RadioConfig,
    seed: u64,
) -> Result<Vec<ScenePoint>> {
    room.validate()?;
    cfg.validate()?;
    let walls = WallPhases::draw(room.tx_positions.len(), seed);
    rp_grid(room, rp_grid_spacing)?
        .into_iter()
        .map(|loc| scene_point(room, &walls, loc, cfg))
        .collect()
}
