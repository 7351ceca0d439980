use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use supply_core::report::{Diagnostic, PlanDocument};
use supply_core::scenario::read_batch_csv;
use supply_core::trajectory::TrajectoryKind;

fn supply(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supply")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_two_users_one_fap() {
    let dir = tempfile::tempdir().unwrap();
    let out = tmp(&dir, "plan.json");
    let svg = tmp(&dir, "plan.svg");
    let o = supply(&[
        "plan",
        "--scenario",
        &data("scenarios/2g1f.json"),
        "--out",
        s(&out),
        "--svg",
        s(&svg),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = PlanDocument::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.faps.len(), 1);
    assert_eq!(doc.faps[0].chosen.kind, TrajectoryKind::Circular);
    assert!((doc.totals.saving_percent - 20.0).abs() < 5.0);
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains("GU1"));
}

#[test]
fn plan_document_round_trips_and_totals_recompute() {
    let o = supply(&["plan", "--scenario", &data("scenarios/5g2f.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let doc = PlanDocument::from_json(&text).unwrap();
    let again = PlanDocument::from_json(&doc.to_json()).unwrap();
    assert_eq!(doc, again);
    assert_eq!(doc.to_json() + "\n", text);
    let t = doc.recomputed_totals();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    assert!(rel(t.supply_energy, doc.totals.supply_energy) < 1e-6);
    assert!(rel(t.hover_energy, doc.totals.hover_energy) < 1e-6);
    assert_eq!(t.n_faps, doc.totals.n_faps);
}

#[test]
fn plan_flags_override_scenario() {
    let low = supply(&["plan", "--scenario", &data("scenarios/2g1f.json")]);
    let high = supply(&[
        "plan",
        "--scenario",
        &data("scenarios/2g1f.json"),
        "--altitude",
        "12",
        "--margin",
        "3",
    ]);
    assert_eq!(high.status.code(), Some(0));
    let a = PlanDocument::from_json(std::str::from_utf8(&low.stdout).unwrap()).unwrap();
    let b = PlanDocument::from_json(std::str::from_utf8(&high.stdout).unwrap()).unwrap();
    assert_eq!(b.scenario.altitude, 12.0);
    assert!(b.faps[0].region.cell_count < a.faps[0].region.cell_count);
}

#[test]
fn plan_with_explicit_model_files() {
    let o = supply(&[
        "plan",
        "--scenario",
        &data("scenarios/2g2f.json"),
        "--params",
        &data("uav_params.txt"),
        "--mcs",
        &data("mcs_80211ac_160mhz.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let d = supply(&["plan", "--scenario", &data("scenarios/2g2f.json")]);
    assert_eq!(o.stdout, d.stdout);
}

#[test]
fn malformed_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = tmp(&dir, "bad.json");
    std::fs::write(&bad, "{ \"gus\": [ ").unwrap();
    assert_eq!(supply(&["plan", "--scenario", s(&bad)]).status.code(), Some(1));
    assert_eq!(
        supply(&["plan", "--scenario", s(&tmp(&dir, "missing.json"))])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        supply(&["plan", "--scenario", &data("scenarios/2g1f.json"), "--params", s(&bad)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(supply(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(supply(&["plan"]).status.code(), Some(1));
    assert_eq!(supply(&["--help"]).status.code(), Some(0));
}

#[test]
fn infeasible_demand_exits_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = tmp(&dir, "heavy.json");
    let out = tmp(&dir, "diag.json");
    std::fs::write(
        &sc,
        r#"{"label":"heavy","gus":[{"x":10,"y":10,"offered_load":20},{"x":60,"y":40,"offered_load":600}]}"#,
    )
    .unwrap();
    let o = supply(&["plan", "--scenario", s(&sc), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let diag: Diagnostic = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(diag.status, "infeasible");
    assert_eq!(diag.gu, Some(1));
    assert_eq!(diag.offered_load, Some(600.0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("600"));
}

#[test]
fn batch_is_deterministic_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let a = tmp(&dir, "a.csv");
    let b = tmp(&dir, "b.csv");
    for p in [&a, &b] {
        let o = supply(&["batch", "--gus", "2", "--count", "200", "--seed", "42", "--out", s(p)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert!(bytes.starts_with(b"label,seed,n_gus,n_faps,supply_energy_j,hover_energy_j,energy_ratio,trajectories\n"));
    let rows = read_batch_csv(bytes.as_slice()).unwrap();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r.energy_ratio <= 1.0));
    assert_eq!(rows[0].seed, 42);

    let threaded = tmp(&dir, "c.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_supply"))
        .args([
            "batch",
            "--gus",
            "2",
            "--count",
            "20",
            "--seed",
            "42",
            "--out",
            s(&threaded),
        ])
        .env("SUPPLY_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let head = read_batch_csv(std::fs::read(&threaded).unwrap().as_slice()).unwrap();
    assert_eq!(head, rows[..20]);

    let report = supply(&["report", "--in", s(&a)]);
    assert_eq!(report.status.code(), Some(0));
    let text = String::from_utf8(report.stdout).unwrap();
    let p50: f64 = text
        .lines()
        .find(|l| l.starts_with("p50"))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((p50 - 0.77).abs() < 0.05, "p50 {p50}");
}

#[test]
fn batch_count_zero_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = supply(&["batch", "--gus", "2", "--count", "0", "--out", s(&tmp(&dir, "x.csv"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let one = tmp(&dir, "one.csv");
    let o = supply(&["batch", "--gus", "5", "--count", "1", "--seed", "7", "--out", s(&one)]);
    assert_eq!(o.status.code(), Some(0));
    let ratio = read_batch_csv(std::fs::read(&one).unwrap().as_slice()).unwrap()[0].energy_ratio;
    let svg = tmp(&dir, "cdf.svg");
    let r = supply(&[
        "report",
        "--in",
        s(&one),
        "--percentiles",
        "10,50,90,100",
        "--svg",
        s(&svg),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    let values: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with('p') && !l.starts_with("percentile"))
        .map(|l| l.split_whitespace().nth(1).unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    assert!(values.iter().all(|v| *v == format!("{ratio:.4}")));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<path"));

    let empty = tmp(&dir, "empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(supply(&["report", "--in", s(&empty)]).status.code(), Some(1));
    std::fs::write(
        &empty,
        "label,seed,n_gus,n_faps,supply_energy_j,hover_energy_j,energy_ratio,trajectories\n",
    )
    .unwrap();
    assert_eq!(supply(&["report", "--in", s(&empty)]).status.code(), Some(1));
    std::fs::write(&empty, "what,is,this\n1,2\n").unwrap();
    assert_eq!(supply(&["report", "--in", s(&empty)]).status.code(), Some(1));
    assert_eq!(
        supply(&["report", "--in", s(&tmp(&dir, "nope.csv"))]).status.code(),
        Some(1)
    );
    assert_eq!(
        supply(&["report", "--in", s(&one), "--percentiles", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let json = tmp(&dir, &format!("p{k}.json"));
        let svg = tmp(&dir, &format!("p{k}.svg"));
        let o = supply(&[
            "plan",
            "--scenario",
            &data("scenarios/10g2f.json"),
            "--out",
            s(&json),
            "--svg",
            s(&svg),
        ]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push((std::fs::read(json).unwrap(), std::fs::read(svg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}
