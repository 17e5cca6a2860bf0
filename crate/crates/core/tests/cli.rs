use std::fs;
use std::path::Path;

use msms::cli::{read_csv, run_command, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK};
use msms::scenario::{preset, ScenarioFile};

fn msms(args: &[&str]) -> i32 {
    run_command(std::iter::once("msms").chain(args.iter().copied()))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_horizon_writes_only_the_initial_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e1");
    let code = msms(&[
        "run",
        "--preset",
        "example1",
        "--out",
        path_str(&out),
        "--override",
        "time.T=0",
    ]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out.join("solution.csv")).unwrap();
    assert_eq!(
        header,
        ["t", "y", "rho_1", "rho_2", "rho_3", "x_1", "x_2", "x_3", "Phi"]
    );
    assert_eq!(rows.len(), 101);
    assert!(rows
        .iter()
        .all(|r| r[0] == 0.0 && (r[3] - 0.2).abs() < 1e-13));
    let (header, rows) = read_csv(&out.join("diagnostics.csv")).unwrap();
    assert_eq!(header[..3], ["t", "H", "H_rel"]);
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2].is_nan());
}

#[test]
fn frames_follow_output_every_and_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--preset".into(),
            "example3".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
            "--override".into(),
            "time.T=0.05".into(),
            "--override".into(),
            "time.output_every=10".into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            run_command(std::iter::once("msms".to_string()).chain(args(out))),
            EXIT_OK
        );
    }
    for name in ["solution.csv", "diagnostics.csv", "scenario.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let (_, rows) = read_csv(&a.join("solution.csv")).unwrap();
    assert_eq!(rows.len(), 6 * 101);
    let times: Vec<f64> = rows.iter().step_by(101).map(|r| r[0]).collect();
    assert_eq!(times, [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]);
    let (_, diag) = read_csv(&a.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.len(), 51);
    assert!(diag[1..].iter().all(|r| r[7] >= 1.0 && r[6] <= 1e-8));
}

#[test]
fn scenario_files_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let file = preset("example5")
        .unwrap()
        .with_overrides(&["time.T=1.2", "domain.n_p=40", "outputs.plots=true"])
        .unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, file.to_json()).unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        msms(&[
            "run",
            "--scenario",
            path_str(&path),
            "--out",
            path_str(&out)
        ]),
        EXIT_OK
    );
    for svg in [
        "densities.svg",
        "potential.svg",
        "entropy.svg",
        "relative_entropy.svg",
    ] {
        let text = fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg"), "{svg}");
    }
    let written = ScenarioFile::load(&out.join("scenario.json")).unwrap();
    assert_eq!(written, file);
    let (_, diag) = read_csv(&out.join("diagnostics.csv")).unwrap();
    assert!(diag.iter().all(|r| r[2] >= -1e-12));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = path_str(&out);
    assert_eq!(msms(&["presets"]), EXIT_OK);
    assert_eq!(
        msms(&["run", "--preset", "example7", "--out", out]),
        EXIT_INVALID
    );
    assert_eq!(msms(&["run", "--out", out]), EXIT_INVALID);
    assert_eq!(
        msms(&[
            "run",
            "--preset",
            "example1",
            "--out",
            out,
            "--override",
            "time.tau=-1"
        ]),
        EXIT_INVALID
    );
    assert_eq!(msms(&["run", "--bogus-flag"]), EXIT_INVALID);
    assert_eq!(
        msms(&[
            "run",
            "--preset",
            "example1",
            "--out",
            out,
            "--override",
            "solver.m_max=1",
            "--override",
            "time.T=0.01"
        ]),
        EXIT_NOT_CONVERGED
    );

    let bad = dir.path().join("bad.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&preset("example1").unwrap().to_json()).unwrap();
    doc["solver"]["newton"] = serde_json::Value::Bool(true);
    fs::write(&bad, doc.to_string()).unwrap();
    assert_eq!(
        msms(&["run", "--scenario", path_str(&bad), "--out", out]),
        EXIT_INVALID
    );

    let missing = dir.path().join("missing.json");
    let code = msms(&["run", "--scenario", path_str(&missing), "--out", out]);
    assert!(code != EXIT_OK && code != EXIT_INVALID && code != EXIT_NOT_CONVERGED);
}

#[test]
fn small_convergence_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    let code = msms(&[
        "convergence",
        "--out",
        path_str(&out),
        "--plots",
        "--override",
        "convergence.levels=[20,40,80]",
        "--override",
        "convergence.reference_n_p=1280",
        "--override",
        "time.T=0.005",
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "h,err_rho_1,err_rho_2,err_rho_3,err_Phi,rate_rho_1,rate_rho_2,rate_rho_3,rate_Phi"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("fit,"));
    let fitted: Vec<f64> = lines[4]
        .split(',')
        .skip(5)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(fitted.len(), 4);
    assert!(fitted.iter().all(|r| *r > 1.5), "{fitted:?}");
    assert!(fs::read_to_string(out.join("convergence.svg"))
        .unwrap()
        .contains("slope 2"));
}
