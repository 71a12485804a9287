//! Helpers shared by the CLI integration targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data_path(rel: &str) -> PathBuf {
    workspace_root().join("data").join(rel)
}

/// Runs the `angloc` binary in `cwd`.
pub fn angloc(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_angloc"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn angloc")
}

/// Runs the binary and panics with its stderr on a non-zero exit.
pub fn angloc_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = angloc(cwd, args);
    assert!(
        out.status.success(),
        "angloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("read json")).expect("parse json")
}

/// Compiles `data/schemas/<name>` with the shared definitions registered.
pub fn schema(name: &str) -> jsonschema::Validator {
    let dir = data_path("schemas");
    let common = read_json(&dir.join("common.schema.json"));
    let id = common["$id"].as_str().expect("common $id").to_owned();
    jsonschema::options()
        .with_resource(
            id,
            jsonschema::Resource::from_contents(common).expect("common schema"),
        )
        .build(&read_json(&dir.join(name)))
        .expect("compile schema")
}

/// Validation errors of `doc` against `data/schemas/<name>`, rendered.
pub fn schema_errors(name: &str, doc: &Value) -> Vec<String> {
    schema(name)
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect()
}

pub fn assert_valid(name: &str, doc: &Value) {
    let errs = schema_errors(name, doc);
    assert!(errs.is_empty(), "{name}: {errs:#?}");
}

/// A 4 x 3 m room with two APs and two fixed test points; 12 RPs.
pub const SMALL_SCENE: &str = "scenes/room_4x3.json";

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Whether `p` lies in the convex hull of `points`, up to `tol` meters.
pub fn inside_hull(p: [f64; 2], points: &[[f64; 2]], tol: f64) -> bool {
    let hull = convex_hull(points);
    match hull.len() {
        1 => segment_distance(p, hull[0], hull[0]) <= tol,
        2 => segment_distance(p, hull[0], hull[1]) <= tol,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            cross(a, b, p) / (b[0] - a[0]).hypot(b[1] - a[1]) >= -tol
        }),
    }
}

/// One Intel 5300 beamforming record built bit by bit; `values` is indexed
/// `[subcarrier][rx][tx]` and the antenna mapping is the identity.
pub fn pack_intel_record(values: &[(i8, i8)], n_rx: u8, n_tx: u8, timestamp: u32) -> Vec<u8> {
    let links = n_rx as usize * n_tx as usize;
    let len = (30 * (links * 16 + 3)).div_ceil(8);
    let mut payload = vec![0u8; len];
    let mut bit = 0usize;
    for k in 0..30 {
        bit += 3;
        for j in 0..links {
            let (re, im) = values[k * links + j];
            for byte in [re as u8, im as u8] {
                for b in 0..8 {
                    if byte & (1 << b) != 0 {
                        payload[bit / 8] |= 1 << (bit % 8);
                    }
                    bit += 1;
                }
            }
        }
    }
    let mut body = Vec::new();
    body.extend_from_slice(&timestamp.to_le_bytes());
    body.extend_from_slice(&[0, 0, 0, 0]);
    body.extend_from_slice(&[n_rx, n_tx, 30, 30, 30, 0xA0, 20, 0b10_01_00]);
    body.extend_from_slice(&(len as u16).to_le_bytes());
    body.extend_from_slice(&[0, 0]);
    body.extend_from_slice(&payload);
    let mut rec = ((body.len() + 1) as u16).to_be_bytes().to_vec();
    rec.push(0xBB);
    rec.extend(body);
    rec
}
