use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const S3: f64 = 1.732_050_807_568_877_2;

fn kdv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdv")).args(args).output().unwrap()
}

fn kdv_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_kdv"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Parses a header-plus-rows CSV without quoted fields.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn rotation_spec(eps: f64, gamma: f64, eta: f64) -> String {
    format!(
        r#"{{"eta": {eta}, "complexPoles": [{{"alpha": {}, "beta": 0.5, "coeffs": [{{"eps": {eps}, "gamma": {gamma}}}]}}]}}"#,
        S3 / 2.0
    )
}

fn rotation_soliton_spec() -> String {
    format!(
        r#"{{"eta": 1, "complexPoles": [{{"alpha": {}, "beta": 0.5, "coeffs": [{{"eps": 0.5, "gamma": 0.5}}]}}],
            "boundStates": [{{"kappa": 2, "c": 3}}]}}"#,
        S3 / 2.0
    )
}

/// The worked example exactly as printed: A has −√3/2 above the diagonal.
fn printed_triplet(eps: f64, gamma: f64, eta: f64) -> String {
    format!(
        r#"{{"rawTriplet": {{"A": [[0.5, {m}], [{p}, 0.5]], "B": [[0], [1]], "C": [[{}, {}]], "eta": {eta}}}}}"#,
        2.0 * gamma,
        2.0 * eps,
        m = -S3 / 2.0,
        p = S3 / 2.0
    )
}

/// Hand-derived `u(x,t)` for the printed example with `ε = γ = 1/2`, `η = 1`.
fn printed_u(x: f64, t: f64) -> f64 {
    let s = x + 7.0 * t;
    let th = S3 * (x - t);
    let phi = 6.0 * (-2.0 * s).exp()
        - 4.0 * SQRT_2 * (-s).exp() * (th - PI / 12.0).sin()
        - 3.0 * FRAC_1_SQRT_2 * (-3.0 * s).exp() * (th + PI / 4.0).sin();
    let den = 1.0 - 0.375 * (-2.0 * s).exp() + FRAC_1_SQRT_2 * (-s).exp() * (th + PI / 12.0).cos();
    phi / (den * den)
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

#[test]
fn build_realizes_a_single_pole_pair() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_spec(0.3, 0.7, 1.0));
    let out = kdv(&["build", "-i", &input]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let raw = &doc["rawTriplet"];
    assert_eq!(matrix(&raw["A"]), vec![vec![0.5, S3 / 2.0], vec![-S3 / 2.0, 0.5]]);
    assert_eq!(matrix(&raw["B"]), vec![vec![0.0], vec![1.0]]);
    assert_eq!(matrix(&raw["C"]), vec![vec![1.4, 0.6]]);
    assert_eq!(raw["eta"], 1.0);
    assert_eq!(doc["info"]["dimension"], 2);
    assert_eq!(doc["info"]["diagnostics"]["valid"], true);
    assert_eq!(doc["info"]["diagnostics"]["spectrum"]["minRealPart"], 0.5);
}

#[test]
fn build_appends_bound_state_block() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_soliton_spec());
    let out = kdv(&["build", "-i", &input]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let a = matrix(&doc["rawTriplet"]["A"]);
    assert_eq!(a.len(), 3);
    assert_eq!(a[2], vec![0.0, 0.0, 2.0]);
    assert_eq!((a[0][2], a[1][2]), (0.0, 0.0));
    assert_eq!(matrix(&doc["rawTriplet"]["C"]), vec![vec![1.0, 1.0, 3.0]]);
}

#[test]
fn build_rejects_empty_spec() {
    let out = kdv_stdin(&["build", "-i", "-"], "{}");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nothing to build"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn build_output_round_trips_through_eval() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", &rotation_soliton_spec());
    let built = kdv(&[
        "build",
        "-i",
        &spec,
        "-o",
        dir.path().join("built.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&built), 0);
    let raw = dir.path().join("built.json");
    let grid = ["--x", "0:6:31", "--t", "0:1:5"];
    let from_spec = kdv(&[&["eval", "-i", &spec][..], &grid].concat());
    let from_raw = kdv(&[&["eval", "-i", raw.to_str().unwrap()][..], &grid].concat());
    assert_eq!(code(&from_spec), 0);
    assert_eq!(from_spec.stdout, from_raw.stdout);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_soliton_spec());
    for args in [
        vec!["build", "-i", &input],
        vec!["eval", "-i", &input, "--x", "0:5:41", "--t", "0:1:11"],
        vec![
            "eval", "-i", &input, "--x", "0:5:41", "--t", "0:1:11", "--format", "json",
        ],
        vec!["verify", "-i", &input],
    ] {
        let first = kdv(&args);
        assert_eq!(code(&first), 0, "{args:?}: {}", stderr(&first));
        assert_eq!(first.stdout, kdv(&args).stdout, "{args:?}");
    }
}

#[test]
fn eval_with_zero_coupling_is_zero() {
    let raw = r#"{"rawTriplet": {"A": [[1, 0], [0, 2]], "B": [[1], [1]], "C": [[0, 0]]}}"#;
    let out = kdv_stdin(&["eval", "-i", "-", "--x", "0:4:9", "--t", "0:1:3"], raw);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&stdout(&out));
    assert_eq!(header, ["x", "t", "u", "detGamma", "flag"]);
    assert_eq!(rows.len(), 27);
    let u = column(&header, "u");
    assert!(rows.iter().all(|r| r[u] == 0.0));
}

#[test]
fn eval_matches_printed_solution() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "printed.json", &printed_triplet(0.5, 0.5, 1.0));
    let out = kdv(&["eval", "-i", &input, "--x", "0:10:101", "--t", "0:5:51"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let (header, rows) = csv(&text);
    assert_eq!(rows.len(), 101 * 51);
    let (x, t, u) = (column(&header, "x"), column(&header, "t"), column(&header, "u"));
    let mut worst = 0.0f64;
    for (k, r) in rows.iter().enumerate() {
        // t-major, then x
        assert_eq!(r[t], 5.0 * (k / 101) as f64 / 50.0);
        assert_eq!(r[x], 10.0 * (k % 101) as f64 / 100.0);
        let reference = printed_u(r[x], r[t]);
        worst = worst.max((r[u] - reference).abs() / (1.0 + reference.abs()));
    }
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn eval_spec_and_printed_orientation_agree() {
    // the spec form realizes ΠR with γ → −γ relative to the printed matrices
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", &rotation_spec(0.5, -0.5, 1.0));
    let printed = write(&dir, "printed.json", &printed_triplet(0.5, 0.5, 1.0));
    let grid = ["--x", "0:8:17", "--t", "0:1:3"];
    let (h, a) = csv(&stdout(&kdv(&[&["eval", "-i", &spec][..], &grid].concat())));
    let (_, b) = csv(&stdout(&kdv(&[&["eval", "-i", &printed][..], &grid].concat())));
    let u = column(&h, "u");
    for (ra, rb) in a.iter().zip(&b) {
        assert!(
            (ra[u] - rb[u]).abs() <= 1e-12 * (1.0 + rb[u].abs()),
            "{} vs {}",
            ra[u],
            rb[u]
        );
    }
}

#[test]
fn eval_json_grid() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_spec(0.5, 0.5, 1.0));
    let out = kdv(&["eval", "-i", &input, "--x", "0:1:3", "--t", "0:0:1", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["xGrid"].as_array().unwrap().len(), 3);
    assert_eq!(doc["tGrid"].as_array().unwrap().len(), 1);
}

#[test]
fn eval_with_every_sample_overflowing_fails() {
    let out = kdv_stdin(
        &["eval", "-i", "-", "--x", "0:1:2", "--t", "10:11:2"],
        r#"{"boundStates": [{"kappa": 5, "c": 1}]}"#,
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("4 of 4 samples flagged"), "{}", stderr(&out));
}

#[test]
fn soliton_at_origin() {
    let out = kdv(&["soliton", "--kappa", "1", "--c", "2", "--x", "0:0:1", "--t", "0:0:1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = csv(&stdout(&out));
    assert_eq!(header, ["x", "t", "u", "detGamma", "detDirect", "flag"]);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][column(&header, "u")] + 2.0).abs() <= 1e-14);
    assert_eq!(rows[0][column(&header, "detGamma")], 2.0);
}

#[test]
fn soliton_compares_determinants() {
    let out = kdv(&[
        "soliton",
        "--kappa",
        "0.5,1,1.5",
        "--c",
        "1,2,3",
        "--eta",
        "1",
        "--x",
        "0:10:21",
        "--t",
        "0:1:3",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc["comparison"]["maxDeviation"].as_f64().unwrap() <= 1e-10);
    assert_eq!(doc["detDirect"].as_array().unwrap().len(), 63);
}

#[test]
fn soliton_rejects_mismatched_lists() {
    let out = kdv(&["soliton", "--kappa", "1,2", "--c", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--c"), "{}", stderr(&out));
    let out = kdv_stdin(&["soliton", "-i", "-"], &rotation_spec(0.5, 0.5, 0.0));
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_passes_for_rotation_with_soliton() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_soliton_spec());
    let out = kdv(&["verify", "-i", &input]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let outcomes: Vec<(&str, &str)> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["name"].as_str().unwrap(), c["outcome"].as_str().unwrap()))
        .collect();
    for name in ["positivity", "pde-residual", "marchenko-residual", "omega-quadrature"] {
        assert!(outcomes.contains(&(name, "pass")), "{outcomes:?}");
    }
    assert!(outcomes.contains(&("soliton-equivalence", "skipped")));
}

#[test]
fn verify_reports_sign_change_at_start() {
    let out = kdv_stdin(
        &["verify", "-i", "-", "--format", "csv"],
        &printed_triplet(3.0, 0.0, 0.0),
    );
    assert_eq!(code(&out), 4);
    let text = stdout(&out);
    assert!(text.starts_with("check,outcome,value,tolerance,note\n"));
    assert!(text.contains("positivity,fail,0.0000000000000000e0"), "{text}");
    assert!(text.contains("pde-residual,skipped"), "{text}");
    assert!(stderr(&out).contains("positivity"));
}

#[test]
fn verify_passes_trivially_without_coupling() {
    let raw = r#"{"rawTriplet": {"A": [[1, 0], [0, 2]], "B": [[1], [1]], "C": [[0, 0]]}}"#;
    let out = kdv_stdin(&["verify", "-i", "-"], raw);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
}

#[test]
fn verify_runs_soliton_equivalence_for_bound_states() {
    let out = kdv_stdin(
        &["verify", "-i", "-", "--format", "csv"],
        r#"{"boundStates": [{"kappa": 1, "c": 2}, {"kappa": 2, "c": 30}]}"#,
    );
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("soliton-equivalence,pass"));
}

fn frame_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn frames_single_time() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_spec(0.5, 0.5, 1.0));
    let frames = dir.path().join("frames");
    let out = kdv(&[
        "frames",
        "-i",
        &input,
        "-o",
        frames.to_str().unwrap(),
        "--x",
        "0:10:11",
        "--t",
        "0.5:0.5:1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(frame_files(&frames), ["frame_000.csv"]);
    let (header, rows) = csv(&fs::read_to_string(frames.join("frame_000.csv")).unwrap());
    assert_eq!(header, ["x", "u"]);
    assert_eq!(rows.len(), 11);
}

#[test]
fn frames_show_two_solitons() {
    let dir = TempDir::new().unwrap();
    let raw = format!(
        r#"{{"rawTriplet": {{"A": [[0.5, {m}, 0, 0], [{p}, 0.5, 0, 0], [0, 0, 1, 0], [0, 0, 0, 2]],
            "B": [[0], [1], [1], [1]], "C": [[1, 1, 2, 30]], "eta": 1}}}}"#,
        m = -S3 / 2.0,
        p = S3 / 2.0
    );
    let input = write(&dir, "two.json", &raw);
    let frames = dir.path().join("frames");
    let out = kdv(&[
        "frames",
        "-i",
        &input,
        "-o",
        frames.to_str().unwrap(),
        "--x",
        "0:40:801",
        "--t",
        "0:2:3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        frame_files(&frames),
        ["frame_000.csv", "frame_001.csv", "frame_002.csv"]
    );
    let (_, rows) = csv(&fs::read_to_string(frames.join("frame_002.csv")).unwrap());
    assert!(rows.iter().all(|r| r[1].is_finite()));
    let troughs: Vec<f64> = rows
        .windows(3)
        .filter(|w| w[1][1] < w[0][1] && w[1][1] < w[2][1] && w[1][1] < -1.0)
        .map(|w| w[1][1])
        .collect();
    // separated solitons have depth −2κ²
    assert_eq!(troughs.len(), 2, "{troughs:?}");
    assert!(
        (troughs[0] + 2.0).abs() < 1e-2 && (troughs[1] + 8.0).abs() < 1e-2,
        "{troughs:?}"
    );
}

#[test]
fn frames_json_and_padding() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_spec(0.5, 0.5, 1.0));
    let frames = dir.path().join("frames");
    let out = kdv(&[
        "frames",
        "-i",
        &input,
        "-o",
        frames.to_str().unwrap(),
        "--x",
        "0:1:3",
        "--t",
        "0:1:1200",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let names = frame_files(&frames);
    assert_eq!(names.len(), 1200);
    assert_eq!(
        (names[0].as_str(), names[1199].as_str()),
        ("frame_0000.json", "frame_1199.json")
    );
    let doc: Value = serde_json::from_str(&fs::read_to_string(frames.join("frame_1199.json")).unwrap()).unwrap();
    assert_eq!(doc["t"], 1.0);
}

#[test]
fn bad_ranges_are_rejected() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "spec.json", &rotation_spec(0.5, 0.5, 1.0));
    let frames = dir.path().join("frames");
    for range in ["0:1:0", "1:0:5", "-1:1:3", "0:1", "a:b:c"] {
        let out = kdv(&["frames", "-i", &input, "-o", frames.to_str().unwrap(), "--t", range]);
        assert_eq!(code(&out), 2, "{range}");
        let out = kdv(&["eval", "-i", &input, "--x", range]);
        assert_eq!(code(&out), 2, "{range}");
    }
    assert!(!frames.exists());
}

#[test]
fn build_rejects_csv() {
    let out = kdv_stdin(&["build", "-i", "-", "--format", "csv"], &rotation_spec(0.5, 0.5, 1.0));
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_input_is_io_error() {
    let out = kdv(&["eval", "-i", "/nonexistent/spec.json"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn negative_tolerance_is_rejected() {
    let out = kdv_stdin(&["eval", "-i", "-", "--tol-pivot", "-1"], &rotation_spec(0.5, 0.5, 1.0));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--tol-pivot"), "{}", stderr(&out));
}

/// Each mutation of a valid document must fail with exit 2 and name the field.
#[test]
fn mutated_documents_are_rejected_with_field_paths() {
    let a = S3 / 2.0;
    let corpus: Vec<(String, &str)> = vec![
        (r#"{"eta": "one", "boundStates": [{"kappa": 1, "c": 1}]}"#.into(), "eta"),
        (r#"{"eta": -1, "boundStates": [{"kappa": 1, "c": 1}]}"#.into(), "eta"),
        (r#"{"boundStates": [{"kappa": 1}]}"#.into(), "boundStates[0]"),
        (
            r#"{"boundStates": [{"kappa": -1, "c": 1}]}"#.into(),
            "boundStates[0].kappa",
        ),
        (r#"{"boundStates": [{"kappa": 1, "c": 0}]}"#.into(), "boundStates[0].c"),
        (
            r#"{"boundStates": [{"kappa": 1, "c": 1, "d": 2}]}"#.into(),
            "boundStates[0]",
        ),
        (r#"{"boundStates": {"kappa": 1, "c": 1}}"#.into(), "boundStates"),
        (
            r#"{"boundStates": [{"kappa": 1, "c": 1}, {"kappa": 1, "c": 2}]}"#.into(),
            "boundStates",
        ),
        (
            format!(r#"{{"complexPoles": [{{"alpha": {a}, "beta": 0.5}}]}}"#),
            "complexPoles[0]",
        ),
        (
            format!(r#"{{"complexPoles": [{{"alpha": {a}, "beta": -0.5, "coeffs": [{{"eps": 1, "gamma": 1}}]}}]}}"#),
            "complexPoles[0].beta",
        ),
        (
            format!(r#"{{"complexPoles": [{{"alpha": {a}, "beta": 0.5, "coeffs": []}}]}}"#),
            "complexPoles[0].coeffs",
        ),
        (
            format!(r#"{{"complexPoles": [{{"alpha": {a}, "beta": 0.5, "coeffs": [{{"eps": 1}}]}}]}}"#),
            "complexPoles[0].coeffs[0]",
        ),
        (
            format!(r#"{{"complexPoles": [{{"alpha": {a}, "beta": 0.5, "coeffs": [{{"eps": 1, "gamma": null}}]}}]}}"#),
            "complexPoles[0].coeffs[0].gamma",
        ),
        (
            r#"{"imagPoles": [{"omega": 0, "r": [1]}]}"#.into(),
            "imagPoles[0].omega",
        ),
        (r#"{"imagPoles": [{"omega": 1, "r": "x"}]}"#.into(), "imagPoles[0].r"),
        (r#"{"imagPoles": [{"omega": 1, "r": []}]}"#.into(), "imagPoles[0].r"),
        (r#"{"complexpoles": []}"#.into(), "complexpoles"),
        (r#"{"rawTriplet": {"A": [[1]], "B": [[1]]}}"#.into(), "rawTriplet"),
        (
            r#"{"rawTriplet": {"A": [[1, 2], [3]], "B": [[1]], "C": [[1]]}}"#.into(),
            "rawTriplet.A",
        ),
        (
            r#"{"rawTriplet": {"A": [[1, 0], [0, 1]], "B": [[1]], "C": [[1, 1]]}}"#.into(),
            "rawTriplet",
        ),
        (
            r#"{"rawTriplet": {"A": [[1]], "B": [[1]], "C": [[1]], "eta": "x"}}"#.into(),
            "rawTriplet.eta",
        ),
        (
            r#"{"rawTriplet": {"A": [[1]], "B": [[1]], "C": [[1]]}, "eta": 1}"#.into(),
            "rawTriplet",
        ),
        (r#"{"info": {}, "boundStates": [{"kappa": 1, "c": 1}]}"#.into(), "info"),
        (r#"[1, 2]"#.into(), "line 1"),
        (r#"{"boundStates": [{"kappa": 1, "c": 1}]"#.into(), "line 1"),
        ("".into(), "line 1"),
    ];
    for (doc, path) in &corpus {
        for cmd in [&["build"][..], &["eval", "--x", "0:1:2", "--t", "0:0:1"], &["verify"]] {
            let out = kdv_stdin(&[cmd, &["-i", "-"]].concat(), doc);
            assert_eq!(code(&out), 2, "{cmd:?} {doc}: {}", stderr(&out));
            assert!(
                stderr(&out).contains(path),
                "{cmd:?} {doc}: expected {path:?} in {}",
                stderr(&out)
            );
            assert!(!stderr(&out).contains("panicked"));
        }
    }
}
