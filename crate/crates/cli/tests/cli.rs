use std::path::Path;
use std::process::{Command, Output};

fn ftcdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftcdim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn json_reports_match_golden_files() {
    for (args, file) in [
        (
            &["analyze", "--preset", "sierpinski", "--json"][..],
            "analyze_sierpinski.json",
        ),
        (
            &["dimension", "--preset", "torus_gifs", "--json"][..],
            "dimension_torus_gifs.json",
        ),
        (
            &["types", "--preset", "golden_gasket", "--json"][..],
            "types_golden_gasket.json",
        ),
        (
            &[
                "wsc",
                "--preset",
                "sierpinski",
                "--b",
                "1/4",
                "--samples",
                "100",
                "--json",
            ][..],
            "wsc_sierpinski.json",
        ),
    ] {
        let o = ftcdim(args);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(stdout(&o), golden(file), "{args:?}");
    }
}

#[test]
fn identical_invocations_are_byte_identical() {
    let a = ftcdim(&["analyze", "--preset", "golden_gasket"]);
    let b = ftcdim(&["analyze", "--preset", "golden_gasket"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dimension_text() {
    let o = ftcdim(&["dimension", "--preset", "sierpinski"]);
    assert!(stdout(&o).contains("alpha: 1.584962500721156"));
    let o = ftcdim(&["analyze", "--preset", "torus_gifs"]);
    let text = stdout(&o);
    // the minimal automaton has 8 types
    assert!(text.contains("types: 8\n"), "{text}");
    assert!(text.contains("alpha: 1.771553303163612"), "{text}");
}

#[test]
fn lau_ngai_parameters() {
    let o = ftcdim(&[
        "dimension",
        "--preset",
        "lau_ngai",
        "--rho",
        "1/4",
        "--r",
        "1/4",
    ]);
    assert!(o.status.success());
    let alpha: f64 = stdout(&o)
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("alpha: ")
        .parse()
        .unwrap();
    assert!((alpha - (2.0 + 3f64.sqrt()).ln() / 4f64.ln()).abs() < 1e-12);
    let o = ftcdim(&[
        "analyze", "--preset", "lau_ngai", "--rho", "1/2", "--r", "1/2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("5/4"));
    let o = ftcdim(&["analyze", "--preset", "sierpinski", "--rho", "1/2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(
        ftcdim(&["analyze", "--preset", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ftcdim(&["analyze", "--preset", "torus_gifs", "--max-types", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ftcdim(&["verify", "--preset", "sierpinski"]).status.code(),
        Some(0)
    );
    let o = ftcdim(&["verify", "--preset", "golden_gasket"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL render.chart"));
    assert_eq!(
        ftcdim(&["verify", "--preset", "torus_gifs"]).status.code(),
        Some(0)
    );
}

#[test]
fn render_sphere_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = ftcdim(&[
        "render",
        "--preset",
        "sierpinski",
        "--chart",
        "sphere",
        "--max-diameter",
        "0.004",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    // leaves stop once the image diameter is at most 0.004: depth 9 of three maps
    assert_eq!(rows.len(), 3usize.pow(9));
    for p in &rows {
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12 && p[2] >= -1e-12);
    }
}

#[test]
fn render_torus_svg_and_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("t.svg");
    let o = ftcdim(&[
        "render",
        "--preset",
        "torus_gifs",
        "--max-diameter",
        "0.05",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let model = dir.path().join("halves.json");
    std::fs::write(
        &model,
        r#"{"field": {"d": "rational"}, "space_dim": 1, "kind": "ifs",
           "maps": [{"ratio": "1/2", "translation": ["0"]}, {"ratio": "1/2", "translation": ["1/2"]}],
           "omega": [["0"], ["1"]]}"#,
    )
    .unwrap();
    let o = ftcdim(&["dimension", "--model", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("alpha: 1.000000000000000"));

    std::fs::write(
        &model,
        "{\"field\": {\"d\": \"rational\"},\n \"space_dim\": 3}",
    )
    .unwrap();
    let o = ftcdim(&["analyze", "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn measure_and_matrix_csv() {
    let o = ftcdim(&[
        "measure",
        "--preset",
        "torus_gifs",
        "--depth",
        "2",
        "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["max_additivity_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["levels"].as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let o = ftcdim(&[
        "dimension",
        "--preset",
        "sierpinski",
        "--matrix-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(
        text.starts_with("i,j,symbolic,value\n1,1,3*(1/2)^a,"),
        "{text}"
    );
}
