use std::fs;

use nphoton::checkpoint;
use nphoton::config::{self, Overrides};
use nphoton::sweep::{self, Flag, RunOptions, ScanMode, ScanRequest};
use nphoton::Error;

const JC_GN: &str = r#"
[model]
name = "jc"
gamma_a = 0.1
gamma_s = 0.01
p_s = 0.01
n_max = 4

[[sensors]]
gamma = "gamma2"

[[sensors]]
omega = "R"
gamma = "gamma2"

[scan]
omega1 = { from = -2.5, to = 2.5, points = 13 }
"#;

fn request(text: &str, mode: ScanMode) -> ScanRequest {
    config::parse(text, mode, &Overrides::default()).unwrap().request
}

fn opts(workers: usize, dir: Option<&std::path::Path>) -> RunOptions {
    RunOptions {
        workers,
        checkpoint: dir.map(|d| (d.to_path_buf(), "scan".to_string())),
    }
}

#[test]
fn worker_count_does_not_change_values() {
    let req = request(JC_GN, ScanMode::GnZero);
    let serial = sweep::run(&req, &opts(1, None)).unwrap();
    let parallel = sweep::run(&req, &opts(4, None)).unwrap();
    assert_eq!(serial.points.len(), 13);
    for (a, b) in serial.points.iter().zip(&parallel.points) {
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.flag, b.flag);
        assert_eq!(a.coords, b.coords);
    }
    assert!(serial.points.iter().all(|p| p.flag == Flag::Ok));
}

#[test]
fn checkpoint_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let req = request(JC_GN, ScanMode::GnZero);
    let res = sweep::run(&req, &opts(2, Some(dir.path()))).unwrap();
    let on_disk = fs::read_to_string(checkpoint::csv_path(dir.path(), "scan")).unwrap();
    assert_eq!(on_disk, checkpoint::to_csv(&res));
    assert!(!on_disk.contains('\r'));
    let back = checkpoint::read(dir.path(), "scan").unwrap();
    assert_eq!(checkpoint::to_csv(&back), on_disk);
    assert_eq!(back.request, req);

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(checkpoint::meta_path(dir.path(), "scan")).unwrap()).unwrap();
    assert_eq!(meta["ladder"].as_array().unwrap().len(), 10);
    assert_eq!(meta["flags"]["ok"], 13);
    assert_eq!(meta["columns"][1], "g2");
}

#[test]
fn resume_recomputes_only_unfinished_points() {
    let dir = tempfile::tempdir().unwrap();
    let req = request(JC_GN, ScanMode::GnZero);
    let full = sweep::run(&req, &opts(2, None)).unwrap();

    // A scan interrupted after a few points, with one failed and one starved.
    let mut partial = full.clone();
    for p in &mut partial.points[5..] {
        p.value = f64::NAN;
        p.flag = Flag::Missing;
    }
    partial.points[1].flag = Flag::Error;
    partial.points[1].message = Some("interrupted".into());
    partial.points[2].flag = Flag::Starved;
    checkpoint::write(&partial, dir.path(), "scan").unwrap();

    let (resumed, recomputed) = sweep::resume(dir.path(), "scan", &opts(3, Some(dir.path()))).unwrap();
    assert_eq!(recomputed, 9);
    assert_eq!(resumed.points[2].flag, Flag::Starved);
    for (i, (a, b)) in full.points.iter().zip(&resumed.points).enumerate() {
        assert_eq!(a.value.to_bits(), b.value.to_bits(), "point {i}");
    }
    let (_, again) = sweep::resume(dir.path(), "scan", &opts(3, None)).unwrap();
    assert_eq!(again, 0);
}

#[test]
fn tampered_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let req = request(JC_GN, ScanMode::GnZero);
    sweep::run(&req, &opts(2, Some(dir.path()))).unwrap();
    let path = checkpoint::csv_path(dir.path(), "scan");
    let text = fs::read_to_string(&path).unwrap().replacen(",ok,", ",missing,", 1);
    fs::write(&path, text).unwrap();
    match checkpoint::read(dir.path(), "scan") {
        Err(Error::CheckpointUnreadable(m)) => assert!(m.contains("checksum"), "{m}"),
        other => panic!("expected checksum failure, got {other:?}"),
    }
}

#[test]
fn delay_scan_reaches_uncorrelated_limit() {
    let text = r#"
[model]
name = "thermal"
p_a = 0.05
gamma_a = 0.1
n_max = 20

[[sensors]]
omega = 0.0
gamma = 0.1

[[sensors]]
omega = 0.0
gamma = 0.1

[scan]
tau = [0.0, 1.0, 10.0, 600.0]
"#;
    let res = sweep::run(&request(text, ScanMode::GnTau), &opts(0, None)).unwrap();
    let v: Vec<f64> = res.points.iter().map(|p| p.value).collect();
    assert!(v[0] > 1.5 && v[0] < 2.05, "{v:?}");
    assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{v:?}");
    assert!((v[3] - 1.0).abs() < 1e-3, "{v:?}");
}
