mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use angloc_core::csi::{save_trace, RadioConfig};
use angloc_core::locator::{kernel, MatchParams};
use angloc_core::sim::{synth_trace, ImpairmentSpec, PathComponent};
use common::*;
use serde_json::Value;
use tempfile::TempDir;

/// One simulated survey and map shared by the read-only tests.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn cwd(&self) -> &Path {
        self.dir.path()
    }
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let scene = data_path(SMALL_SCENE);
        let scene = scene.to_str().unwrap();
        angloc_ok(
            dir.path(),
            &["--seed", "3", "--out", "sim", "simulate", "--scene", scene],
        );
        angloc_ok(
            dir.path(),
            &[
                "--out",
                "map.json",
                "build-map",
                "--manifest",
                "sim/manifest.json",
            ],
        );
        Fixture { dir }
    })
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn stderr_json(out: &std::process::Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| {
        panic!(
            "stderr is not JSON: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn simulate_is_bit_identical_per_seed() {
    let tmp = TempDir::new().unwrap();
    let scene = data_path(SMALL_SCENE);
    let scene = scene.to_str().unwrap();
    for dir in ["a", "b"] {
        angloc_ok(
            tmp.path(),
            &[
                "--seed",
                "9",
                "--out",
                dir,
                "simulate",
                "--scene",
                scene,
                "--packets",
                "20",
                "--test-packets",
                "20",
            ],
        );
    }
    let a = files_under(&tmp.path().join("a"));
    let b = files_under(&tmp.path().join("b"));
    assert_eq!(a.len(), 12 * 2 + 2 * 2 + 1);
    assert_eq!(a, b);

    angloc_ok(
        tmp.path(),
        &[
            "--seed",
            "10",
            "--out",
            "c",
            "simulate",
            "--scene",
            scene,
            "--packets",
            "20",
            "--test-packets",
            "20",
        ],
    );
    let c = files_under(&tmp.path().join("c"));
    assert_ne!(
        a[Path::new("rp/rp000_ap1.csit")],
        c[Path::new("rp/rp000_ap1.csit")]
    );
}

#[test]
fn eight_by_eight_scene_has_64_reference_points() {
    let tmp = TempDir::new().unwrap();
    let scene = data_path("scenes/room_8x8.json");
    angloc_ok(
        tmp.path(),
        &[
            "--out",
            "sim",
            "simulate",
            "--scene",
            scene.to_str().unwrap(),
            "--packets",
            "2",
            "--test-packets",
            "2",
            "--test-points",
            "3",
        ],
    );
    let manifest = read_json(&tmp.path().join("sim/manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["rps"].as_array().unwrap().len(), 64);
    assert_eq!(manifest["test_points"].as_array().unwrap().len(), 3);
    let files = files_under(&tmp.path().join("sim"));
    assert_eq!(files.len(), (64 + 3) * 2 + 1);
    for rp in manifest["rps"].as_array().unwrap() {
        for fp in rp["first_path"].as_array().unwrap() {
            assert!(fp["theta"].as_f64().unwrap().abs() <= 90.0);
        }
    }
}

#[test]
fn zero_area_room_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("flat.json"),
        r#"{"width": 0.0, "height": 3.0, "tx_positions": [[0.0, 1.0]],
            "wall_reflection_loss": 6.0, "array_orientation": 0.0}"#,
    )
    .unwrap();
    let out = angloc(
        tmp.path(),
        &["--out", "sim", "simulate", "--scene", "flat.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 1);
    assert_eq!(err["error"]["kind"], "usage");
    assert!(!tmp.path().join("sim/manifest.json").exists());
}

#[test]
fn bad_flags_and_missing_files_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let usage = angloc(tmp.path(), &["locate", "--map", "m.json"]);
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(stderr_json(&usage)["error"]["kind"], "usage");

    let missing = angloc(tmp.path(), &["tune", "--map", "nope.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["error"]["kind"], "data");
}

#[test]
fn built_map_and_outputs_validate() {
    let f = fixture();
    let map = read_json(&f.path("map.json"));
    assert_valid("radio_map.schema.json", &map);
    assert_eq!(map["rps"].as_array().unwrap().len(), 12);
    assert_eq!(map["aps"], serde_json::json!(["ap1", "ap2"]));
    assert_valid(
        "manifest.schema.json",
        &read_json(&f.path("sim/manifest.json")),
    );

    let out = angloc_ok(
        f.cwd(),
        &[
            "locate",
            "--map",
            "map.json",
            "--trace",
            "ap1=sim/test/tp000_ap1.csit",
            "--trace",
            "ap2=sim/test/tp000_ap2.csit",
        ],
    );
    let est: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("location_estimate.schema.json", &est);

    let tmp = TempDir::new().unwrap();
    let report_path = tmp.path().join("eval.json");
    angloc_ok(
        f.cwd(),
        &[
            "--out",
            report_path.to_str().unwrap(),
            "evaluate",
            "--map",
            "map.json",
            "--manifest",
            "sim/manifest.json",
        ],
    );
    let report = read_json(&report_path);
    assert_valid("eval_report.schema.json", &report);
    let errors: Vec<f64> = report["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["error"].as_f64().unwrap())
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!((report["mean_error"].as_f64().unwrap() - mean).abs() < 1e-12);
    let cdf = std::fs::read_to_string(tmp.path().join("eval.json.cdf.csv")).unwrap();
    assert!(cdf.starts_with("error_m,cdf\n"));
    assert!(cdf.trim_end().ends_with(",1"));
}

fn locate_with(cwd: &Path, extra: &[&str]) -> Value {
    let mut args = vec![
        "locate",
        "--map",
        "map.json",
        "--trace",
        "ap1=sim/test/tp001_ap1.csit",
        "--trace",
        "ap2=sim/test/tp001_ap2.csit",
    ];
    args.extend_from_slice(extra);
    serde_json::from_slice(&angloc_ok(cwd, &args).stdout).unwrap()
}

/// Checks that every reported kernel is the one `p` implies for the reported
/// distances.
fn kernels_match(est: &Value, p: &MatchParams) -> bool {
    let d = est["distances"].as_array().unwrap();
    let k = est["kernels"].as_array().unwrap();
    d.len() == p.m_c
        && d.iter().zip(k).all(|(d, k)| {
            let want = kernel(
                d["entropy"].as_f64().unwrap(),
                d["aoa"].as_f64().unwrap(),
                p,
            );
            (want - k.as_f64().unwrap()).abs() <= 1e-12
        })
}

#[test]
fn zero_angle_weight_is_entropy_only() {
    let f = fixture();
    let est = locate_with(f.cwd(), &["--w-a", "0"]);
    let map = read_json(&f.path("map.json"));
    let p: MatchParams = serde_json::from_value(map["params"].clone()).unwrap();
    let p = p.with_angle_weight(0.0);
    assert!(kernels_match(&est, &p));
    for (d, k) in est["distances"]
        .as_array()
        .unwrap()
        .iter()
        .zip(est["kernels"].as_array().unwrap())
    {
        let want = (-p.rho_e * d["entropy"].as_f64().unwrap()).exp();
        assert!((k.as_f64().unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn tuned_parameters_apply_unless_overridden() {
    let f = fixture();
    let tmp = TempDir::new().unwrap();
    let tuned_path = tmp.path().join("tuned.json");
    angloc_ok(
        f.cwd(),
        &[
            "--out",
            tuned_path.to_str().unwrap(),
            "tune",
            "--map",
            "map.json",
        ],
    );
    let report = read_json(&tuned_path);
    assert_valid("tune_report.schema.json", &report);
    let tuned: MatchParams = serde_json::from_value(report["params"].clone()).unwrap();
    assert!((tuned.w_e + tuned.w_a - 1.0).abs() < 1e-12);

    let tp = tuned_path.to_str().unwrap();
    assert!(kernels_match(
        &locate_with(f.cwd(), &["--params", tp]),
        &tuned
    ));

    let overridden = MatchParams {
        rho_a: 0.37,
        ..tuned
    }
    .with_angle_weight(0.25);
    let est = locate_with(
        f.cwd(),
        &["--params", tp, "--w-a", "0.25", "--rho-a", "0.37"],
    );
    assert!(kernels_match(&est, &overridden));
    if tuned.w_a != 0.25 {
        assert!(!kernels_match(&est, &tuned));
    }
}

#[test]
fn spectrum_peak_matches_single_path() {
    let tmp = TempDir::new().unwrap();
    let (theta, tau) = (24.0, 60e-9);
    let trace = synth_trace(
        &[PathComponent::new(1.0, 0.7, tau, theta)],
        &RadioConfig::default(),
        &ImpairmentSpec::with_snr(30.0),
        15,
        4,
    )
    .unwrap();
    let path = tmp.path().join("one.csit");
    save_trace(&trace, std::fs::File::create(&path).unwrap()).unwrap();

    let run = || angloc_ok(tmp.path(), &["aoa-spectrum", "--trace", "one.csit"]).stdout;
    let csv = run();
    assert_eq!(csv, run());
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_deg,tau_ns,power_db"));
    let best = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    assert!((best.0 - theta).abs() <= 1.0, "theta {best:?}");
    assert!((best.1 - tau * 1e9).abs() <= 2.0, "tau {best:?}");
}

#[test]
fn empty_trace_file_is_rejected() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("empty.csit"), b"").unwrap();
    let out = angloc(tmp.path(), &["aoa-spectrum", "--trace", "empty.csit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].is_string());
}

#[test]
fn study_csv_has_fixed_header() {
    let tmp = TempDir::new().unwrap();
    let out = angloc_ok(
        tmp.path(),
        &["study", "--kind", "aoa-packets", "--seeds", "3"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_packets,mean_error_deg,median_error_deg");
    assert_eq!(lines.len(), 5);
}

#[test]
fn ingest_converts_intel_log_to_portable_trace() {
    let tmp = TempDir::new().unwrap();
    let log = pack_intel_record(&[(1, -1); 30], 1, 1, 5);
    std::fs::write(tmp.path().join("log.dat"), &log).unwrap();

    angloc_ok(
        tmp.path(),
        &[
            "--out",
            "t.csit",
            "ingest",
            "--input",
            "log.dat",
            "--source-id",
            "lab/ap1",
            "--location",
            "1.5,2",
        ],
    );
    let t = angloc_core::csi::load_trace(std::fs::File::open(tmp.path().join("t.csit")).unwrap())
        .unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.source_id, "lab/ap1");
    assert_eq!(t.location, Some((1.5, 2.0)));
    assert!(t.packets[0]
        .data()
        .iter()
        .all(|z| z.re == 1.0 && z.im == -1.0));
}
