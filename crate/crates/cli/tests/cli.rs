use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amc::activation::{rle_encode_raw, SparseActivation, HEADER_BYTES, PAIR_BYTES, Q88};
use amc::io::{read_dense, save_descriptor, write_dense, write_pgm};
use amc::motion::Frame;
use amc::{LayerSpec, NetworkDescriptor, Shape3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn amc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = amc(args);
    assert!(
        out.status.success(),
        "amc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// conv3 → relu → pool2 → conv3 → relu | pool2, on 1×32×32.
fn toy_net() -> NetworkDescriptor {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut w = |n: usize| {
        (0..n)
            .map(|_| rng.gen_range(-0.5f32..0.5))
            .collect::<Vec<_>>()
    };
    let layers = vec![
        LayerSpec::conv(1, 2, 3, 1, 1, w(18), vec![0.05, -0.05]).unwrap(),
        LayerSpec::relu(2),
        LayerSpec::maxpool(2, 2, 2, 0).unwrap(),
        LayerSpec::conv(2, 2, 3, 1, 1, w(36), vec![0.0, 0.1]).unwrap(),
        LayerSpec::relu(2),
        LayerSpec::maxpool(2, 2, 2, 0).unwrap(),
    ];
    NetworkDescriptor::new(Shape3::new(1, 32, 32), layers, 4).unwrap()
}

fn texture(h: usize, w: usize, dy: i64, dx: i64) -> Frame {
    Frame::from_fn(h, w, |y, x| {
        let (y, x) = (y as i64 - dy, x as i64 - dx);
        ((y * 31 + x * 17 + (x * y) % 13).rem_euclid(256)) as u8
    })
}

fn write_frame(dir: &Path, name: &str, f: &Frame) -> PathBuf {
    let p = dir.join(name);
    let mut buf = Vec::new();
    write_pgm(&mut buf, f.height(), f.width(), f.luma()).unwrap();
    std::fs::write(&p, buf).unwrap();
    p
}

struct Fixture {
    dir: TempDir,
    net: PathBuf,
}

fn fixture(frames: usize) -> Fixture {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("toy.json");
    save_descriptor(&toy_net(), &net).unwrap();
    let fdir = dir.path().join("frames");
    std::fs::create_dir(&fdir).unwrap();
    for i in 0..frames {
        write_frame(
            &fdir,
            &format!("f{i:03}.pgm"),
            &texture(32, 32, 0, 2 * i as i64),
        );
    }
    Fixture { dir, net }
}

fn run_records(fx: &Fixture, policy: &str, extra: &[&str]) -> Vec<Value> {
    let out = fx.dir.path().join("out.jsonl");
    let frames = fx.dir.path().join("frames");
    let mut args = vec![
        "run",
        "--net",
        s(&fx.net),
        "--frames",
        s(&frames),
        "--policy",
        policy,
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    std::fs::read_to_string(out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn run_single_frame_is_key() {
    let fx = fixture(1);
    let recs = run_records(&fx, "error:1000", &[]);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["type"], "frame");
    assert_eq!(recs[0]["is_key"], true);
    assert_eq!(recs[1]["type"], "summary");
    assert_eq!(recs[1]["key_fraction"], 1.0);
}

#[test]
fn run_static_one_is_all_keys() {
    let fx = fixture(5);
    let recs = run_records(&fx, "static:1", &[]);
    assert_eq!(recs.len(), 6);
    assert!(recs[..5].iter().all(|r| r["is_key"] == true));
}

#[test]
fn summary_recomputes_from_records() {
    let fx = fixture(8);
    let recs = run_records(&fx, "static:3", &["--fps", "30"]);
    let (frames, summary) = recs.split_at(recs.len() - 1);
    let summary = &summary[0];
    let energy: Vec<f64> = frames
        .iter()
        .map(|r| r["estimated_energy_mj"].as_f64().unwrap())
        .collect();
    let keys = frames.iter().filter(|r| r["is_key"] == true).count();
    let kf = keys as f64 / frames.len() as f64;
    assert_eq!(keys, 3);
    assert_eq!(summary["key_fraction"].as_f64().unwrap(), kf);
    let avg = energy.iter().sum::<f64>() / energy.len() as f64;
    assert!((summary["avg_energy_mj"].as_f64().unwrap() - avg).abs() <= 1e-12 * avg);
    let key_mean = frames
        .iter()
        .filter(|r| r["is_key"] == true)
        .map(|r| r["estimated_energy_mj"].as_f64().unwrap())
        .sum::<f64>()
        / keys as f64;
    let pred = summary["pred_energy_mj"].as_f64().unwrap();
    let weighted = kf * key_mean + (1.0 - kf) * pred;
    assert!((weighted - avg).abs() <= 1e-12 * avg);
    assert_eq!(frames[3]["timestamp_s"].as_f64().unwrap(), 0.1);
    for key in [
        "prefix_macs",
        "suffix_macs",
        "motion_ops",
        "warp_elements",
        "metric_value",
    ] {
        assert!(frames.iter().all(|r| r.get(key).is_some()), "missing {key}");
    }
}

#[test]
fn run_dumps_flow_and_activations() {
    let fx = fixture(3);
    let recs = run_records(
        &fx,
        "static:10",
        &["--dump-flow", "--dump-activations", "--memoize"],
    );
    assert_eq!(recs[1]["warp_elements"], 0);
    let out = fx.dir.path().join("out.jsonl");
    let flow = PathBuf::from(format!("{}.flow", out.display()));
    let acts = PathBuf::from(format!("{}.activations", out.display()));
    let f1: Value =
        serde_json::from_slice(&std::fs::read(flow.join("000001.json")).unwrap()).unwrap();
    assert_eq!(f1["fields_y"], 16);
    assert!(!flow.join("000000.json").exists());
    let a =
        SparseActivation::from_bytes(&std::fs::read(acts.join("000002.eva2")).unwrap()).unwrap();
    assert_eq!(a.shape(), Shape3::new(2, 16, 16));
}

#[test]
fn run_rejects_mismatched_frames() {
    let fx = fixture(2);
    write_frame(
        &fx.dir.path().join("frames"),
        "f999.pgm",
        &texture(16, 16, 0, 0),
    );
    let out = fx.dir.path().join("out.jsonl");
    let frames = fx.dir.path().join("frames");
    let r = amc(&[
        "run",
        "--net",
        s(&fx.net),
        "--frames",
        s(&frames),
        "--policy",
        "always",
        "--out",
        s(&out),
    ]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("f999.pgm"));

    let bad = amc(&[
        "run",
        "--net",
        s(&fx.net),
        "--frames",
        s(&frames),
        "--policy",
        "maybe",
        "--out",
        s(&out),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn estimate_toy_matches_hand_counts() {
    let fx = fixture(0);
    let v: Value = serde_json::from_str(&ok(&["estimate", "--net", s(&fx.net)])).unwrap();
    // conv1: 2·1·9·32·32, conv2: 2·2·9·16·16
    assert_eq!(v["prefix_macs"], 18432 + 9216);
    assert_eq!(v["suffix_macs"], 0);
    assert_eq!(v["geometry"]["size"], 8);
    assert_eq!(v["geometry"]["stride"], 2);
    // default search: radius 6, step 2 → 2R/S = 6 on a 16×16 map
    assert_eq!(v["unoptimized_ops"], 16 * 16 * 36 * 64);
    assert_eq!(v["rfbme_ops"], 16 * 16 * 64 * 37 / 4);
    assert_eq!(v["default_cost_layers"], 6);
    assert!(v["note"].as_str().unwrap().contains("default"));

    let table = fx.dir.path().join("cost.json");
    let entries: Vec<Value> = (0..6)
        .map(|i| serde_json::json!({"layer_index": i, "energy_mj": 1.0, "latency_ms": 2.0}))
        .collect();
    std::fs::write(&table, serde_json::to_string(&entries).unwrap()).unwrap();
    let v: Value = serde_json::from_str(&ok(&[
        "estimate",
        "--net",
        s(&fx.net),
        "--cost-table",
        s(&table),
    ]))
    .unwrap();
    assert_eq!(v["default_cost_layers"], 0);
    assert_eq!(v["frame_costs"]["key_energy"], 6.0);
    assert_eq!(v["frame_costs"]["key_latency"], 12.0);
}

#[test]
fn estimate_vgg16() {
    let net = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/vgg16.json");
    let v: Value = serde_json::from_str(&ok(&[
        "estimate",
        "--net",
        net,
        "--width",
        "1000",
        "--height",
        "562",
        "--radius",
        "48",
        "--search-stride",
        "16",
    ]))
    .unwrap();
    let macs = v["prefix_macs"].as_f64().unwrap();
    assert!((macs / 1.7e11 - 1.0).abs() <= 0.15, "{macs}");
    assert_eq!(v["target_shape"]["height"], 35);
    assert_eq!(v["target_shape"]["width"], 62);
}

#[test]
fn codec_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..20 {
        let shape = Shape3::new(
            rng.gen_range(1..4),
            rng.gen_range(1..20),
            rng.gen_range(1..20),
        );
        let values: Vec<Q88> = (0..shape.len())
            .map(|_| {
                if rng.gen_bool(0.7) {
                    Q88(0)
                } else {
                    Q88(rng.gen())
                }
            })
            .collect();
        let dense = dir.path().join(format!("{case}.evad"));
        let sparse = dir.path().join(format!("{case}.eva2"));
        let back = dir.path().join(format!("{case}.back.evad"));
        let mut buf = Vec::new();
        write_dense(&mut buf, shape, &values).unwrap();
        std::fs::write(&dense, &buf).unwrap();
        ok(&["codec", "encode", "--in", s(&dense), "--out", s(&sparse)]);
        ok(&["codec", "decode", "--in", s(&sparse), "--out", s(&back)]);
        assert_eq!(std::fs::read(&back).unwrap(), buf);
        let (sh, v) = read_dense(&std::fs::read(&back).unwrap()[..]).unwrap();
        assert_eq!((sh, v), (shape, values));
    }
}

#[test]
fn codec_all_zero_is_minimal() {
    let dir = TempDir::new().unwrap();
    let shape = Shape3::new(2, 4, 4);
    let dense = dir.path().join("z.evad");
    let sparse = dir.path().join("z.eva2");
    let mut buf = Vec::new();
    write_dense(&mut buf, shape, &[Q88(0); 32]).unwrap();
    std::fs::write(&dense, &buf).unwrap();
    ok(&["codec", "encode", "--in", s(&dense), "--out", s(&sparse)]);
    let bytes = std::fs::read(&sparse).unwrap();
    // one (15, 0) pair per channel plus its u32 count
    assert_eq!(bytes.len(), HEADER_BYTES + 2 * (4 + PAIR_BYTES));
    assert_eq!(
        bytes,
        rle_encode_raw(shape, &[Q88(0); 32], 0.0)
            .unwrap()
            .to_bytes()
    );

    let garbage = dir.path().join("g.eva2");
    std::fs::write(&garbage, b"EVA2junk").unwrap();
    assert!(
        !amc(&["codec", "decode", "--in", s(&garbage), "--out", s(&dense)])
            .status
            .success()
    );
}

fn flow(dir: &Path, cur: &Frame, key: &Frame, extra: &[&str]) -> Value {
    let c = write_frame(dir, "cur.pgm", cur);
    let k = write_frame(dir, "key.pgm", key);
    let mut args = vec![
        "flow",
        "--current",
        s(&c),
        "--key",
        s(&k),
        "--rf-size",
        "16",
        "--rf-stride",
        "8",
        "--radius",
        "16",
        "--search-stride",
        "4",
    ];
    args.extend_from_slice(extra);
    serde_json::from_str(&ok(&args)).unwrap()
}

#[test]
fn flow_identical_frames_are_still() {
    let dir = TempDir::new().unwrap();
    let f = texture(64, 64, 0, 0);
    let v = flow(dir.path(), &f, &f, &["--check-oracle"]);
    let vectors = v["field"]["vectors"].as_array().unwrap();
    assert_eq!(vectors.len(), 7 * 7);
    assert!(vectors.iter().all(|p| p[0] == 0 && p[1] == 0));
    assert_eq!(v["oracle"]["agrees"], true);
}

#[test]
fn flow_shift_is_uniform() {
    let dir = TempDir::new().unwrap();
    let key = texture(64, 64, 0, 0);
    let cur = texture(64, 64, 4, -8);
    let pgm = dir.path().join("mag.pgm");
    let v = flow(
        dir.path(),
        &cur,
        &key,
        &["--check-oracle", "--pgm", s(&pgm)],
    );
    let (fy, fx) = (7, 7);
    let vectors = v["field"]["vectors"].as_array().unwrap();
    // fields whose search window stays inside the frame
    for y in 2..fy - 2 {
        for x in 2..fx - 2 {
            let p = &vectors[y * fx + x];
            assert_eq!((p[0].as_i64().unwrap(), p[1].as_i64().unwrap()), (-4, 8));
        }
    }
    assert_eq!(v["oracle"]["agrees"], true);
    assert!(v["oracle"]["rfbme_ops"].as_u64() < v["oracle"]["exhaustive_ops"].as_u64());
    let img = amc::io::read_pnm(&std::fs::read(&pgm).unwrap()[..]).unwrap();
    assert_eq!((img.height, img.width), (7, 7));
}
