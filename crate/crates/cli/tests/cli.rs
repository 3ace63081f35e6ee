use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Copy of the twin fixture, shortened to `end_day`.
fn twin_copy(dir: &Path, end_day: f64) -> PathBuf {
    for e in fs::read_dir(fixture("twin")).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), dir.join(e.file_name())).unwrap();
    }
    let cfg = dir.join("config.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("end_day = 150.0", &format!("end_day = {end_day:.1}"));
    fs::write(&cfg, text).unwrap();
    cfg
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn grid_check_reports_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let bathy = fixture("rajae").join("bathymetry.csv");
    let ok = strata(&["grid-check", s(&bathy), "--expected-capacity", "165e6", "--out", s(dir.path())]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).contains("capacity PASS"));
    let curve = fs::read_to_string(dir.path().join("area_volume.csv")).unwrap();
    assert!(curve.starts_with("elevation_m,plan_area_m2,volume_m3\n"));
    assert_eq!(curve.lines().count(), 47);

    let off = strata(&["grid-check", s(&bathy), "--expected-capacity", "100e6", "--out", s(dir.path())]);
    assert_eq!(code(&off), 3);
}

#[test]
fn missing_inputs_exit_2() {
    let o = strata(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&o), 2);
    let o = strata(&["grid-check", "/nonexistent/bathymetry.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 30.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = strata(&["run", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3, "{names:?}");
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn overflow_without_spillway_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 60.0);
    let text = fs::read_to_string(&cfg).unwrap();
    let cut = text.find("[spillway]").unwrap();
    let rest = &text[cut..];
    let end = rest.find("\n\n").map_or(rest.len(), |i| i + 2);
    fs::write(&cfg, format!("{}{}", &text[..cut], &rest[end..])).unwrap();
    let o = strata(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn calibrate_single_point_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 150.0);
    let spec = dir.path().join("one.toml");
    fs::write(
        &spec,
        "[search]\nmax_evaluations = 1\n\n[[axis]]\nname = \"kz_max\"\nlo = 6e-5\nhi = 1e-4\npoints = 1\n",
    )
    .unwrap();
    let out = dir.path().join("cal");
    let obs = dir.path().join("observations.csv");
    let o = strata(&["calibrate", "--config", s(&cfg), "--spec", s(&spec), "--observations", s(&obs), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("calibration_report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("evaluation,kz_max,ame_temp_c"));
    let best = fs::read_to_string(out.join("best_params.toml")).unwrap();
    assert!(best.contains("kz_max"), "{best}");
}

#[test]
fn calibrate_with_no_observations_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 150.0);
    let obs = dir.path().join("empty.csv");
    fs::write(&obs, "day,station,depth_m,temp_c,do_mgl\n").unwrap();
    let spec = dir.path().join("calibration.toml");
    let o = strata(&["calibrate", "--config", s(&cfg), "--spec", s(&spec), "--observations", s(&obs)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn scenario_errors_and_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 40.0);
    let out = dir.path().join("sc");

    let outside = dir.path().join("outside.toml");
    fs::write(&outside, "[flood]\nwindow = [100.0, 120.0]\n").unwrap();
    let o = strata(&["scenario", "--config", s(&cfg), "--spec", s(&outside), "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let plain = dir.path().join("plain.toml");
    fs::write(&plain, "[flood]\nwindow = [10.0, 20.0]\npeak_multiplier = 3.0\n").unwrap();
    let o = strata(&["scenario", "--config", s(&cfg), "--spec", s(&plain), "--out", s(&out), "--assert-directional"]);
    assert_eq!(code(&o), 2);
    let o = strata(&["scenario", "--config", s(&cfg), "--spec", s(&plain), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("comparison.csv").exists());
    assert!(out.join("delta_profile_dam.csv").exists());

    let strict = dir.path().join("strict.toml");
    fs::write(
        &strict,
        "[flood]\nwindow = [10.0, 20.0]\npeak_multiplier = 3.0\n\n[directional]\nsuite = \"deep\"\n\
         upstream_distance_m = 100.0\nprobe_distance_m = 500.0\nmid_range_m = [100.0, 900.0]\n\
         min_mld_deepening_m = 1000.0\nmin_do_drop_mgl = 100.0\n",
    )
    .unwrap();
    let o = strata(&["scenario", "--config", s(&cfg), "--spec", s(&strict), "--out", s(&out), "--assert-directional"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn identity_scenario_contours_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = twin_copy(dir.path(), 40.0);
    let spec = dir.path().join("identity.toml");
    fs::write(&spec, "[flood]\nwindow = [10.0, 20.0]\n").unwrap();
    let out = dir.path().join("sc");
    let o = strata(&["scenario", "--config", s(&cfg), "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut matched = 0;
    for e in fs::read_dir(&out).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        if name.starts_with("contour_base_") {
            let other = name.replace("contour_base_", "contour_flood_");
            assert_eq!(fs::read(out.join(&name)).unwrap(), fs::read(out.join(&other)).unwrap(), "{name}");
            matched += 1;
        }
    }
    assert_eq!(matched, 6);
}

#[test]
fn synth_writes_a_runnable_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = strata(&["synth", "twin", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    for f in ["bathymetry.csv", "config.toml", "calibration.toml", "observations.csv"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(fixture("twin").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(code(&strata(&["synth", "nile", "--out", s(dir.path())])), 2);
}
