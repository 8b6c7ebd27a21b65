use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const RIG: &str = r#"
[system]
span_length_m = 1.5
stiffness_n_per_m = 18148.5
pretension = { value = 60, unit = "kgf" }
load_bearing_cables = 6

[roller]
radius_m = 0.02
omega_rad_s = 5.25

[[cafes]]
mass_kg = 1.4
x0_m = 0.7

[[cafes]]
mass_kg = 1.4
x0_m = 0.8
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cafe-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn timeline(entries: &[(f64, usize, &str)]) -> String {
    entries
        .iter()
        .map(|(t, id, s)| format!("\n[[timeline]]\nt_s = {t}\ncafe_id = {id}\nstate = \"{s}\"\n"))
        .collect()
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|rest| rest.split_whitespace().last())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
}

#[test]
fn validate_default_and_file() {
    let o = run(&["validate"]);
    assert!(o.status.success());
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "rig.toml", RIG);
    assert_eq!(run(&["validate", "--config", &p]).status.code(), Some(0));
}

#[test]
fn validate_negative_stiffness() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.toml", &RIG.replace("18148.5", "-18148.5"));
    let o = run(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("system.stiffness_n_per_m"), "{}", stderr(&o));
}

#[test]
fn validate_overlapping_switches() {
    let dir = TempDir::new().unwrap();
    let doc = format!("{RIG}{}", timeline(&[(1.0, 1, "right"), (1.1, 1, "stationary")]));
    let p = write(&dir, "overlap.toml", &doc);
    let o = run(&["validate", "--config", &p]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("cafe 1") && err.contains("1.1") && err.contains("1 s"), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let o = run(&["validate", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["simulate", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn equilibrium_report() {
    let o = run(&["equilibrium"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let sag = summary_value(&out, "max_sag_mm");
    assert!((1.5..=3.5).contains(&sag), "{out}");
    assert!(out.contains("seg2 tension_per_cable_N"));
    assert!(out.contains("horizontal_residual_N"));
}

#[test]
fn equilibrium_without_platforms() {
    let dir = TempDir::new().unwrap();
    let doc: String = RIG.split("[[cafes]]").next().unwrap().to_string();
    let p = write(&dir, "empty.toml", &doc);
    let o = run(&["equilibrium", "--config", &p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("cafe"));
}

#[test]
fn equilibrium_nonconvergence() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "stiff.toml", &RIG.replace("18148.5", "1e12"));
    let o = run(&["equilibrium", "--config", &p, "--dt", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("residual"), "{}", stderr(&o));
}

#[test]
fn go_and_stop_reaches_target() {
    // 5 × 0.25 m at 100 mm/s, each hop held for 2.5 s
    let mut cmds = Vec::new();
    let mut t = 0.0;
    for _ in 0..5 {
        cmds.push((t, 0, "right"));
        cmds.push((t + 2.8, 0, "stationary"));
        t += 3.6;
    }
    let doc = format!(
        "{}{}",
        RIG.replace("omega_rad_s = 5.25", "surface_speed_mm_s = 100")
            .replace("x0_m = 0.8", "x0_m = 1.45")
            .replace("x0_m = 0.7", "x0_m = 0.1"),
        timeline(&cmds)
    );
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "hops.toml", &doc);
    let out = dir.path().join("trace.csv");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let x: f64 = s
        .lines()
        .find(|l| l.starts_with("cafe0 final_x_m"))
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .unwrap();
    assert!((x - 1.35).abs() < 1e-9, "{s}");
}

#[test]
fn trace_shape_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["simulate", "--duration", "2", "--seed", "9", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t_s,drive_speed_m_s,cafe0_x_m"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2001);
    let cols = header.split(',').count();
    let mut prev = -1.0;
    for r in &rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f.len(), cols);
        let t: f64 = f[0].parse().unwrap();
        assert!(t > prev);
        prev = t;
    }
}

#[test]
fn seeds_differ_and_noise_off_is_ideal() {
    let dir = TempDir::new().unwrap();
    let trace = |name: &str, extra: &[&str]| {
        let p = dir.path().join(name);
        let mut args = vec!["simulate", "--kinematic", "--out", p.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read_to_string(p).unwrap(), stdout(&o))
    };
    let (ideal, summary) = trace("ideal.csv", &[]);
    let (s1, _) = trace("s1.csv", &["--seed", "1"]);
    let (s2, _) = trace("s2.csv", &["--seed", "2"]);
    assert_ne!(s1, s2);
    assert_ne!(ideal, s1);
    assert_eq!(summary_value(&summary, "separation_drift_m [cafe0,cafe1]"), 0.0);
}

#[test]
fn cooperative_cycle_has_no_drift() {
    let mut cmds = Vec::new();
    let mut t = 0.0;
    for _ in 0..50 {
        for id in 0..2 {
            cmds.push((t, id, "right"));
            cmds.push((t + 0.3 + 5.0, id, "stationary"));
            cmds.push((t + 5.6, id, "left"));
            cmds.push((t + 5.9 + 5.0, id, "stationary"));
        }
        t += 11.2;
    }
    let doc = format!(
        "{}{}",
        RIG.replace("omega_rad_s = 5.25", "surface_speed_mm_s = 100")
            .replace("x0_m = 0.7", "x0_m = 0.3")
            .replace("x0_m = 0.8", "x0_m = 0.5"),
        timeline(&cmds)
    );
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cycle.toml", &doc);
    let out = dir.path().join("cycle.csv");
    let o = run(&["simulate", "--kinematic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary_value(&stdout(&o), "separation_drift_m [cafe0,cafe1]"), 0.0);
}

#[test]
fn sweep_outputs() {
    let dir = TempDir::new().unwrap();
    let single = write(
        &dir,
        "one.toml",
        "span_lengths_m = [10.0]\nrobot_counts = [2]\npretensions = [588.399]\nrobot_mass_kg = 1.4\n",
    );
    let o = run(&["sweep", "--spec", &single]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert_eq!(
        text.lines().next().unwrap(),
        "span_m,count,pretension_N,max_sag_m,max_tension_N,converged"
    );

    let grid = write(
        &dir,
        "grid.toml",
        "span_lengths_m = [2.0, 5.0, 10.0, 20.0]\nrobot_counts = [1, 2, 4, 6]\n\
         pretensions = { values = [20, 40, 60, 100, 200], unit = \"kgf\" }\nrobot_mass_kg = 1.4\n",
    );
    let out = dir.path().join("grid.csv");
    let o = run(&["sweep", "--spec", &grid, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[5], "true");
            f[..5].iter().map(|v| v.parse().unwrap()).collect()
        })
        .collect();
    assert_eq!(rows.len(), 80);
    let sag = |span: f64, n: f64, i: usize| {
        rows.iter()
            .filter(|r| r[0] == span && r[1] == n)
            .nth(i)
            .map(|r| r[3])
            .unwrap()
    };
    for &n in &[1.0, 2.0, 4.0, 6.0] {
        for &span in &[2.0, 5.0, 10.0, 20.0] {
            for i in 1..5 {
                assert!(sag(span, n, i) <= sag(span, n, i - 1) + 1e-9);
            }
        }
        for i in 0..5 {
            assert!(sag(5.0, n, i) >= sag(2.0, n, i) - 1e-9);
            assert!(sag(20.0, n, i) >= sag(10.0, n, i) - 1e-9);
        }
    }
    assert!(rows
        .iter()
        .any(|r| r[0] == 10.0 && r[1] == 2.0 && (0.011..=0.015).contains(&r[3])));
}

#[test]
fn sweep_bad_spec() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.toml", "span_lengths_m = []\nrobot_counts = [1]\npretensions = [1.0]\nrobot_mass_kg = 1.4\n");
    let o = run(&["sweep", "--spec", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.span_lengths_m"));
    assert!(!Path::new(&dir.path().join("none.csv")).exists());
}

#[test]
fn shipped_scenarios_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let rig = root.join("rig.toml");
    assert!(run(&["validate", "--config", rig.to_str().unwrap()]).status.success());
    let o = run(&["sweep", "--spec", root.join("scalability.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 601);
}
