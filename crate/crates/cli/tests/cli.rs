mod common;

use common::{affcap, json_of, stderr, write, CUBE};

#[test]
fn cube_info_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let cube = write(dir.path(), "cube.json", CUBE);
    let cube = cube.to_str().unwrap();
    let info = json_of(&affcap(&["body-info", "--body", cube]));
    assert_eq!(info["kind"], "polytope");
    assert_eq!(info["facets"], 6);
    assert_eq!(info["volume"], 8.0);
    let sp = json_of(&affcap(&["sp", "--body", cube, "--p", "2"]));
    assert_eq!(sp["sp"], 24.0);
    let phi = json_of(&affcap(&[
        "phi", "--body", cube, "--p", "2", "--tau", "-0.5",
    ]));
    assert!((phi["phi"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert_eq!(phi["method"], "exact-facet");
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        "{\n  \"kind\": \"ball\",\n  \"n\": 3,\n  \"radius\": -1\n}\n",
    );
    let out = affcap(&["body-info", "--body", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("radius") && msg.contains("line 4"), "{msg}");

    let open = write(
        dir.path(),
        "open.json",
        r#"{"kind":"polytope","n":2,"facets":[{"normal":[1,0],"offset":1,"area":2},{"normal":[0,1],"offset":1,"area":2},{"normal":[-1,0],"offset":1,"area":2}]}"#,
    );
    let out = affcap(&["body-info", "--body", open.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not closed"), "{}", stderr(&out));

    let singular = write(
        dir.path(),
        "flat.json",
        r#"{"kind":"ellipsoid","n":2,"matrix":[[1,2],[2,4]]}"#,
    );
    let out = affcap(&["phi", "--body", singular.to_str().unwrap(), "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cube = write(dir.path(), "cube.json", CUBE);
    let cube = cube.to_str().unwrap();
    for args in [
        vec!["cap-bounds", "--body", cube, "--p", "3"],
        vec!["phi", "--body", cube, "--p", "2", "--tau", "1.5"],
        vec!["phi", "--body", cube, "--p", "2", "--rule", "hexagon:12"],
        vec![
            "verify-chain",
            "--body",
            cube,
            "--p",
            "2",
            "--format",
            "xml",
        ],
        vec!["fuzz", "--count", "0"],
        vec!["constants", "--n", "3"],
    ] {
        assert_eq!(affcap(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn chain_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cube = write(dir.path(), "cube.json", CUBE);
    let cube = cube.to_str().unwrap();
    let doc = json_of(&affcap(&[
        "verify-chain",
        "--body",
        cube,
        "--p",
        "2",
        "--tau",
        "-0.3,0.6",
    ]));
    assert_eq!(doc["bodies"].as_array().unwrap().len(), 2);
    assert_eq!(doc["summary"]["pass"], true);
    assert_eq!(doc["bodies"][0]["body_id"], "cube");
    let csv = affcap(&[
        "verify-chain",
        "--body",
        cube,
        "--p",
        "2",
        "--format",
        "csv",
    ]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("body_id,kind,n,p,tau,link,lhs,rhs,slack,tolerance,pass\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn tau_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let simplex = dir.path().join("simplex.json");
    let gen = affcap(&[
        "generate",
        "--kind",
        "gl-simplex",
        "--n",
        "3",
        "--seed",
        "3",
        "--out",
        simplex.to_str().unwrap(),
    ]);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = affcap(&[
        "tau-curve",
        "--body",
        simplex.to_str().unwrap(),
        "--p",
        "1.5",
        "--points",
        "9",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,phi_p_tau"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].1, rows[8].1);
    assert!(rows[4].1 > rows[0].1);
}

#[test]
fn zero_tolerance_catches_quadrature_noise() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let curves = dir.path().join("curves.csv");
    let args = [
        "fuzz",
        "--count",
        "3",
        "--kinds",
        "qball",
        "--p",
        "1.5,2",
        "--tau",
        "0,0.5",
        "--rule",
        "fibonacci:1500",
        "--out",
        report.to_str().unwrap(),
        "--curves",
        curves.to_str().unwrap(),
    ];
    let strict: Vec<&str> = args.iter().copied().chain(["--tol-mult", "0"]).collect();
    let out = affcap(&strict);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(doc["summary"]["pass"], false);
    assert!(doc["summary"]["violations"].as_u64().unwrap() > 0);

    let out = affcap(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("body_id,n,p,tau,phi_p_tau\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2 * 2);
}

#[test]
fn sampled_bodies_default_to_a_smaller_rule_in_high_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(
        dir.path(),
        "q4.json",
        r#"{"kind":"star","n":4,"family":"qball","q":3}"#,
    );
    let q = q.to_str().unwrap();
    let phi = json_of(&affcap(&["phi", "--body", q, "--p", "2"]));
    assert_eq!(phi["rule"], "monte-carlo:4000");
    let phi = json_of(&affcap(&[
        "phi", "--body", q, "--p", "2", "--rule", "mc:2000",
    ]));
    assert_eq!(phi["rule"], "monte-carlo:2000");
}
