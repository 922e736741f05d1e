// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bzshape::metrics::{evaluate_masks, metrics_csv};
use bzshape::{BinaryMask, PiecewiseContour, Point2};

fn bzshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bzshape"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |row, col| {
        Point2::pixel_center(row, col).dist_sq(Point2::new(cx, cy)) <= r * r
    })
    .unwrap()
}

fn write_mask(path: &Path, mask: &BinaryMask) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, mask.to_pgm()).unwrap();
}

fn read_mask(path: &Path) -> BinaryMask {
    BinaryMask::from_pgm(&fs::read(path).unwrap(), 127).unwrap()
}

fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    evaluate_masks(a, b).unwrap().iou
}

fn encode_disc(dir: &Path) -> PathBuf {
    write_mask(&dir.join("in/disc.pgm"), &disc(96, 80, 45.0, 41.0, 25.0));
    let out = bzshape(&["encode", s(&dir.join("in/disc.pgm")), "--out", s(&dir.join("enc"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("enc/disc.json")
}

#[test]
fn encode_writes_four_quintic_segments() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    let contour = PiecewiseContour::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(contour.segments().len(), 4);
    assert!(contour.segments().iter().all(|seg| seg.control_points().len() == 6));
    assert_eq!((contour.width(), contour.height()), (96, 80));
    let report = fs::read_to_string(dir.path().join("enc/fit_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().nth(1).unwrap().starts_with("disc,5,"));
}

#[test]
fn empty_mask_fails_but_batch_continues() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_mask(&input.join("a_empty.pgm"), &BinaryMask::new(10, 10).unwrap());
    write_mask(&input.join("b_disc.pgm"), &disc(40, 40, 20.0, 20.0, 10.0));
    fs::write(input.join("c_bad.pgm"), b"P2 nonsense").unwrap();
    let out = bzshape(&["encode", s(&input), "--out", s(&dir.path().join("enc"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("a_empty.pgm"), "{stderr}");
    assert!(stderr.contains("empty"), "{stderr}");
    assert!(stderr.contains("c_bad.pgm"), "{stderr}");
    assert!(dir.path().join("enc/b_disc.json").exists());
    assert!(!dir.path().join("enc/a_empty.json").exists());
}

#[test]
fn missing_input_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = bzshape(&["encode", s(&dir.path().join("nope.pgm")), "--out", s(&dir.path().join("enc"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("enc").exists());
}

#[test]
fn decode_native_matches_library_raster() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    let out = bzshape(&["decode", s(&json), "--out", s(&dir.path().join("dec"))]);
    assert!(out.status.success());
    let contour = PiecewiseContour::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(read_mask(&dir.path().join("dec/disc.pgm")), contour.rasterize(128).unwrap());
}

#[test]
fn decode_at_double_resolution_downsamples_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    let native_dir = dir.path().join("native");
    let big_dir = dir.path().join("big");
    assert!(bzshape(&["decode", s(&json), "--out", s(&native_dir)]).status.success());
    assert!(bzshape(&["decode", s(&json), "--out", s(&big_dir), "--width", "192", "--height", "160"])
        .status
        .success());
    let native = read_mask(&native_dir.join("disc.pgm"));
    let big = read_mask(&big_dir.join("disc.pgm"));
    assert_eq!((big.width(), big.height()), (192, 160));
    let down = BinaryMask::from_fn(96, 80, |r, c| {
        let votes = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .filter(|(dr, dc)| big.get(2 * r + dr, 2 * c + dc))
            .count();
        votes >= 2
    })
    .unwrap();
    let iou = mask_iou(&down, &native);
    assert!(iou >= 0.97, "{iou}");
}

#[test]
fn decode_to_single_pixel_frame() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    let out = bzshape(&["decode", s(&json), "--out", s(&dir.path().join("tiny")), "--width", "1", "--height", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_mask(&dir.path().join("tiny/disc.pgm"));
    assert_eq!((m.width(), m.height()), (1, 1));
}

#[test]
fn decode_rejects_schema_violation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"version": 1, "width": 4}"#).unwrap();
    let out = bzshape(&["decode", s(&bad), "--out", s(&dir.path().join("dec"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn render_draws_fill_and_outline() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    assert!(bzshape(&["render", s(&json), "--out", s(&dir.path().join("ren"))]).status.success());
    let bytes = fs::read(dir.path().join("ren/disc.pgm")).unwrap();
    let header = b"P5\n96 80\n255\n";
    assert!(bytes.starts_with(header));
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), 96 * 80);
    assert_eq!(pixels[41 * 96 + 45], 128);
    assert_eq!(pixels[0], 0);
    assert!(pixels.contains(&255));
}

#[test]
fn eval_identical_masks_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    for (i, r) in [8.0, 12.0, 15.0].iter().enumerate() {
        let m = disc(40, 40, 20.0, 20.0, *r);
        write_mask(&dir.path().join(format!("pred/m{i}.pgm")), &m);
        write_mask(&dir.path().join(format!("gt/m{i}.pgm")), &m);
    }
    let csv = dir.path().join("metrics.csv");
    let out = bzshape(&[
        "eval",
        "--pred",
        s(&dir.path().join("pred")),
        "--gt",
        s(&dir.path().join("gt")),
        "--out",
        s(&csv),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let summary = text.lines().find(|l| l.starts_with("summary,")).unwrap();
    let fields: Vec<&str> = summary.split(',').collect();
    assert_eq!(fields[1], "1");
    assert_eq!(fields[2], "0");
}

#[test]
fn eval_mixed_pairs_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = [
        ("a", disc(32, 32, 16.0, 16.0, 8.0), disc(32, 32, 18.0, 15.0, 9.0)),
        ("b", disc(32, 32, 10.0, 10.0, 5.0), disc(32, 32, 22.0, 22.0, 5.0)),
        ("c", BinaryMask::new(32, 32).unwrap(), disc(32, 32, 16.0, 16.0, 6.0)),
    ];
    let mut rows = Vec::new();
    for (id, p, g) in &pairs {
        write_mask(&dir.path().join(format!("pred/{id}.pgm")), p);
        write_mask(&dir.path().join(format!("gt/{id}.pgm")), g);
        rows.push((id.to_string(), evaluate_masks(p, g).unwrap()));
    }
    let csv = dir.path().join("m.csv");
    let out = bzshape(&[
        "eval",
        "--pred",
        s(&dir.path().join("pred")),
        "--gt",
        s(&dir.path().join("gt")),
        "--out",
        s(&csv),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap(), metrics_csv(&rows).unwrap());
}

#[test]
fn eval_contour_predictions_and_skips_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let json = encode_disc(dir.path());
    let pred = dir.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    fs::copy(&json, pred.join("disc.json")).unwrap();
    fs::copy(&json, pred.join("orphan.json")).unwrap();
    let gt = dir.path().join("in");
    write_mask(&gt.join("lonely.pgm"), &disc(10, 10, 5.0, 5.0, 3.0));
    let csv = dir.path().join("m.csv");
    let out = bzshape(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--out", s(&csv)]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("orphan") && stderr.contains("lonely"), "{stderr}");
    let text = fs::read_to_string(&csv).unwrap();
    let row = text.lines().find(|l| l.starts_with("disc,")).unwrap();
    let iou: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(iou > 0.97, "{iou}");
}

#[test]
fn eval_with_nothing_matched_fails() {
    let dir = tempfile::tempdir().unwrap();
    write_mask(&dir.path().join("pred/x.pgm"), &disc(10, 10, 5.0, 5.0, 3.0));
    write_mask(&dir.path().join("gt/y.pgm"), &disc(10, 10, 5.0, 5.0, 3.0));
    let out = bzshape(&[
        "eval",
        "--pred",
        s(&dir.path().join("pred")),
        "--gt",
        s(&dir.path().join("gt")),
        "--out",
        s(&dir.path().join("m.csv")),
    ]);
    assert!(!out.status.success());
    assert!(!dir.path().join("m.csv").exists());
}

#[test]
fn eval_manifest_pairs_nonconforming_names() {
    let dir = tempfile::tempdir().unwrap();
    let m = disc(20, 20, 10.0, 10.0, 6.0);
    write_mask(&dir.path().join("p/prediction_one.pgm"), &m);
    write_mask(&dir.path().join("g/truth-1.pgm"), &m);
    let manifest = dir.path().join("pairs.csv");
    fs::write(&manifest, "# id,pred,gt\none,p/prediction_one.pgm,g/truth-1.pgm\ntwo,p/missing.pgm,g/truth-1.pgm\n").unwrap();
    let csv = dir.path().join("m.csv");
    let out = bzshape(&["eval", "--manifest", s(&manifest), "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two"));
    assert!(fs::read_to_string(&csv).unwrap().contains("\none,1,0,"));
}

#[test]
fn gradcheck_seed_zero_passes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = bzshape(&["gradcheck", "--seed", "0", "--pairs", "20", "--out", s(&csv)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn degree_sweep_residual_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = bzshape(&[
        "degree-sweep", "--kind", "blob", "--count", "12", "--size", "160", "--out", s(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let residuals: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(residuals.len(), 4);
    assert!(residuals.windows(2).all(|w| w[1] <= w[0]), "{residuals:?}");
}

#[test]
fn gen_synthetic_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        let o = bzshape(&["gen-synthetic", "--count", "10", "--seed", "1", "--size", "96", "--out", s(out), "--jobs", jobs]);
        assert!(o.status.success());
    }
    let names: Vec<_> = bzshape_cli::io::list_dir(&a, &["pgm"]).unwrap();
    assert_eq!(names.len(), 10);
    for p in names {
        let name = p.file_name().unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn fidelity_and_sensitivity_write_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.csv");
    let out = bzshape(&["fidelity", "--kind", "ellipse", "--count", "4", "--size", "96", "--out", s(&f)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&f).unwrap();
    assert!(text.starts_with("image_id,iou,hausdorff,mcc,fp,fn\nellipse_0000,"));
    assert_eq!(text.lines().count(), 7);

    let sens = dir.path().join("s.csv");
    let out = bzshape(&[
        "sensitivity", "--kind", "blob", "--count", "3", "--size", "96", "--deltas", "1,4", "--trials", "2", "--out",
        s(&sens),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&sens).unwrap();
    assert_eq!(text.lines().next(), Some("delta,representation,miou,trials"));
    assert_eq!(text.lines().count(), 5);
}
