//! Scene simulation and the on-disk survey layout (trace files plus a
//! manifest of true locations).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use angloc_core::csi::{load_trace, save_trace, CsiTrace, RadioConfig};
use angloc_core::locator::{PipelineConfig, Survey};
use angloc_core::sim::{
    ground_truth, rp_grid, scene_point, synth_trace_with_rng, SceneSpec, WallPhases,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};
use crate::output::{write_atomic, write_json, Provenance};

/// Test points keep this distance from the walls, meters.
const TEST_POINT_MARGIN: f64 = 0.3;
pub const DEFAULT_TEST_POINTS: usize = 20;

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub scene: SceneSpec,
    pub radio: RadioConfig,
    pub seed: u64,
    pub rp_packets: usize,
    pub test_packets: usize,
    pub n_test_points: usize,
}

impl SimulationPlan {
    /// Plan with trace lengths sized for `pipeline`: two fingerprint windows
    /// per RP (map plus held-out half) and one per test point.
    pub fn for_pipeline(scene: SceneSpec, pipeline: &PipelineConfig, seed: u64) -> Self {
        let need = pipeline.raw_packets_needed();
        Self {
            scene,
            radio: RadioConfig::default(),
            seed,
            rp_packets: 2 * need,
            test_packets: need,
            n_test_points: DEFAULT_TEST_POINTS,
        }
    }
}

/// First-path angle and delay seen from one AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPath {
    /// Degrees.
    pub theta: f64,
    /// Seconds.
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct SimulatedPoint {
    pub id: String,
    pub location: [f64; 2],
    /// One trace per AP, in AP order.
    pub traces: Vec<CsiTrace>,
    pub first_path: Vec<FirstPath>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub radio: RadioConfig,
    pub aps: Vec<String>,
    pub rps: Vec<SimulatedPoint>,
    pub tests: Vec<SimulatedPoint>,
}

impl Simulation {
    pub fn surveys(&self) -> Vec<Survey> {
        self.rps
            .iter()
            .map(|p| Survey {
                id: p.id.clone(),
                location: p.location,
                traces: self.aps.iter().cloned().zip(p.traces.clone()).collect(),
            })
            .collect()
    }
}

pub fn ap_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("ap{i}")).collect()
}

/// Random stream of one point; RPs and test points draw from disjoint streams.
fn point_rng(seed: u64, test: bool, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((test as u64) << 32) | index as u64);
    rng
}

/// Test locations: the scene's own list, or uniform draws inside the room.
pub fn test_locations(plan: &SimulationPlan) -> Vec<[f64; 2]> {
    if !plan.scene.test_points.is_empty() {
        return plan.scene.test_points.clone();
    }
    let room = &plan.scene.room;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(u64::MAX);
    let m = TEST_POINT_MARGIN;
    (0..plan.n_test_points)
        .map(|_| {
            [
                rng.random_range(m.min(room.width / 2.0)..=(room.width - m).max(room.width / 2.0)),
                rng.random_range(
                    m.min(room.height / 2.0)..=(room.height - m).max(room.height / 2.0),
                ),
            ]
        })
        .collect()
}

/// Generates every RP and test-point trace of the scene. Wall phases are
/// drawn from `seed`, so one seed fixes the whole environment.
pub fn simulate(plan: &SimulationPlan) -> CliResult<Simulation> {
    let scene = &plan.scene;
    scene.room.validate().context("scene")?;
    plan.radio.validate().context("radio config")?;
    if plan.rp_packets == 0 || plan.test_packets == 0 {
        return Err(CliError::usage("packet counts must be >= 1"));
    }
    let walls = WallPhases::draw(scene.room.tx_positions.len(), plan.seed);
    let grid = rp_grid(&scene.room, scene.rp_spacing).context("scene")?;
    let aps = ap_ids(scene.room.tx_positions.len());

    let point = |test: bool, index: usize, loc: [f64; 2]| -> CliResult<SimulatedPoint> {
        let sp = scene_point(&scene.room, &walls, loc, &plan.radio).context("scene")?;
        let mut rng = point_rng(plan.seed, test, index);
        let n = if test {
            plan.test_packets
        } else {
            plan.rp_packets
        };
        let (prefix, id) = if test {
            ("test", format!("tp{index:03}"))
        } else {
            ("rp", format!("rp{index:03}"))
        };
        let mut traces = Vec::with_capacity(sp.paths_per_tx.len());
        let mut first_path = Vec::with_capacity(sp.paths_per_tx.len());
        for (ap, paths) in aps.iter().zip(&sp.paths_per_tx) {
            let imp = scene
                .impairments
                .sample(&mut rng, plan.radio.n_sub, Some(scene.snr_db));
            let mut t = synth_trace_with_rng(paths, &plan.radio, &imp, n, &mut rng)
                .context(format!("{prefix} {id}"))?
                .with_location(loc[0], loc[1]);
            t.source_id = format!("{id}/{ap}");
            traces.push(t);
            let (theta, tau) = ground_truth(paths).context("scene")?;
            first_path.push(FirstPath { theta, tau });
        }
        Ok(SimulatedPoint {
            id,
            location: loc,
            traces,
            first_path,
        })
    };

    let rps = grid
        .par_iter()
        .enumerate()
        .map(|(i, &loc)| point(false, i, loc))
        .collect::<CliResult<Vec<_>>>()?;
    let tests = test_locations(plan)
        .par_iter()
        .enumerate()
        .map(|(i, &loc)| point(true, i, loc))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Simulation {
        radio: plan.radio,
        aps,
        rps,
        tests,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPoint {
    pub id: String,
    pub location: [f64; 2],
    /// Trace file per AP id, relative to the manifest's directory.
    pub traces: BTreeMap<String, String>,
    pub first_path: Vec<FirstPath>,
}

/// Index of a simulated (or hand-assembled) survey on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub provenance: Provenance,
    pub radio: RadioConfig,
    pub aps: Vec<String>,
    pub rps: Vec<ManifestPoint>,
    pub test_points: Vec<ManifestPoint>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes traces under `dir/rp` and `dir/test` plus `dir/manifest.json`.
pub fn write_simulation(sim: &Simulation, dir: &Path, provenance: Provenance) -> CliResult<()> {
    let write_points = |sub: &str, points: &[SimulatedPoint]| -> CliResult<Vec<ManifestPoint>> {
        points
            .par_iter()
            .map(|p| {
                let mut traces = BTreeMap::new();
                for (ap, t) in sim.aps.iter().zip(&p.traces) {
                    let rel = format!("{sub}/{}_{ap}.csit", p.id);
                    let mut buf = Vec::new();
                    save_trace(t, &mut buf).context(format!("encoding {rel}"))?;
                    write_atomic(&dir.join(&rel), &buf)?;
                    traces.insert(ap.clone(), rel);
                }
                Ok(ManifestPoint {
                    id: p.id.clone(),
                    location: p.location,
                    traces,
                    first_path: p.first_path.clone(),
                })
            })
            .collect()
    };
    let manifest = Manifest {
        provenance,
        radio: sim.radio,
        aps: sim.aps.clone(),
        rps: write_points("rp", &sim.rps)?,
        test_points: write_points("test", &sim.tests)?,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// A manifest with its base directory, for resolving trace paths.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base: PathBuf,
}

impl LoadedManifest {
    pub fn open(path: &Path) -> CliResult<Self> {
        let manifest: Manifest = crate::output::read_json(path)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { manifest, base })
    }

    fn load_point(&self, p: &ManifestPoint) -> CliResult<Vec<CsiTrace>> {
        self.manifest
            .aps
            .iter()
            .map(|ap| {
                let rel = p.traces.get(ap).ok_or_else(|| CliError::Core {
                    context: "manifest".into(),
                    source: angloc_core::Error::IncompleteSurvey {
                        rp: p.id.clone(),
                        ap: ap.clone(),
                    },
                })?;
                load_trace_file(&self.base.join(rel))
            })
            .collect()
    }

    pub fn surveys(&self) -> CliResult<Vec<Survey>> {
        self.manifest
            .rps
            .par_iter()
            .map(|p| {
                Ok(Survey {
                    id: p.id.clone(),
                    location: p.location,
                    traces: self
                        .manifest
                        .aps
                        .iter()
                        .cloned()
                        .zip(self.load_point(p)?)
                        .collect(),
                })
            })
            .collect()
    }

    /// `(id, true location, traces in AP order)` of every test point.
    pub fn test_points(&self) -> CliResult<Vec<(String, [f64; 2], Vec<CsiTrace>)>> {
        self.manifest
            .test_points
            .par_iter()
            .map(|p| Ok((p.id.clone(), p.location, self.load_point(p)?)))
            .collect()
    }
}

pub fn load_trace_file(path: &Path) -> CliResult<CsiTrace> {
    let file = std::fs::File::open(path).context(format!("opening {}", path.display()))?;
    load_trace(std::io::BufReader::new(file)).context(format!("decoding {}", path.display()))
}
