use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "CRLF in {}", path.display());
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn dim_on_the_circle() {
    let o = hdim(&["dim", "--delta", "1", "--level", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("dimension 1.000000"), "{}", stdout(&o));
}

#[test]
fn dim_inside_the_known_range() {
    let o = hdim(&["dim", "--delta", "0.5", "--level", "12", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let d = v["result"]["tau0"].as_f64().unwrap();
    assert!(d > 1.0 && d < 1.3, "{d}");
    for key in ["command", "params", "outputs", "duration_ms", "version"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn malformed_input_is_a_parse_error() {
    let o = hdim(&["dim", "--delta", "1+x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hdim(&["dim"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hdim(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_dimension_reports_category() {
    let o = hdim(&["theta0", "--d0", "1.6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("INVALID_DIMENSION"), "{}", stderr(&o));
    let o = hdim(&["theta0", "--d0", "1.6", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["error"]["category"], "INVALID_DIMENSION");
}

#[test]
fn outside_parameter_space() {
    let o = hdim(&["dim", "--delta", "3", "--level", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OUTSIDE_MAIN_DISK"));
}

#[test]
fn omega_table_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = hdim(&["omega", "--d0", "1.08", "--from", "-3", "--to", "3", "--step", "0.05", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&a.join("omega.csv"));
    assert_eq!(header, ["theta", "omega", "err"]);
    assert_eq!(rows.len(), 121);
    let om: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let at = |x: f64| om.iter().find(|(t, _)| (t - x).abs() < 1e-9).unwrap().1;
    assert!(at(0.0) < 0.0);
    assert!(at(1.2) < 0.0 && at(1.4) > 0.0);
    // 17 significant digits
    assert_eq!(rows[0][1].split('e').next().unwrap().chars().filter(char::is_ascii_digit).count(), 17);

    let manifest = a.join("omega.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "omega");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);

    let b = dir.path().join("b");
    let o = hdim(&["omega", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("omega.csv")).unwrap(), fs::read(b.join("omega.csv")).unwrap());

    let o = hdim(&["theta0", "--config", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "manifest from another command must be rejected");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# omega settings\nd0 = 1.2\nfrom = 0\nto = 1\nstep = 0.5\n").unwrap();
    let out = dir.path().join("o");
    let o = hdim(&["omega", "--config", cfg.to_str().unwrap(), "--step", "0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&out.join("omega.csv"));
    assert_eq!(rows.len(), 5);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("omega.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["params"]["d0"], "1.2");
    assert_eq!(m["params"]["step"], "0.25");

    fs::write(&cfg, "this line has no separator\n").unwrap();
    let o = hdim(&["omega", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn theta0_with_uncertainty() {
    let o = hdim(&["theta0", "--d0", "1.08", "--d0-err", "0.01", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let th = v["result"]["theta0"].as_f64().unwrap();
    assert!((1.15..=1.45).contains(&th));
    assert!(v["result"]["uncertainty"].as_f64().unwrap() > 0.0);
}

#[test]
fn ray_ratio_pipeline_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ray");
    let o = hdim(&[
        "ray", "--alpha", "pi/6", "--t-start", "0.4", "--t-end", "0.2", "--level", "9", "--d0", "1.08",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&out.join("ray.csv"));
    assert_eq!(rows.len(), 3);
    let mut prev_t = f64::INFINITY;
    for r in &rows {
        let get = |name: &str| r[col(&h, name)].parse::<f64>().unwrap();
        let (t, d, d0) = (get("t"), get("derivative"), get("d0"));
        assert!(t < prev_t);
        prev_t = t;
        assert_eq!(get("ratio"), hdim_cli::experiments::ratio(d, t, d0));
        assert!(get("ratio") < 0.0);
        let fd = get("derivative_fd");
        assert!(((fd - d) / fd).abs() < 0.05);
    }
    let (_, consts) = read_csv(&out.join("ray_constants.csv"));
    let get = |name: &str| consts.iter().find(|r| r[0] == name).unwrap()[1].parse::<f64>().unwrap();
    assert!(get("fitted_a") > 0.0);
    assert!((get("big_a") - get("big_a_from_h_mu")).abs() < 1e-12 * get("big_a"));
}

#[test]
fn mandelbrot_grid_properties() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = hdim(&[
        "mandelbrot", "--re-min", "-2", "--re-max", "2", "--im-min", "-1", "--im-max", "1", "--nx", "41", "--ny", "21",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = read_csv(&out.join("mandelbrot.csv"));
    assert_eq!(h, ["family", "re", "im", "inside"]);
    let cells: Vec<(String, f64, f64, bool)> = rows
        .iter()
        .map(|r| (r[0].clone(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3] == "true"))
        .collect();
    let lookup = |fam: &str, re: f64, im: f64| {
        cells
            .iter()
            .find(|c| c.0 == fam && (c.1 - re).abs() < 1e-9 && (c.2 - im).abs() < 1e-9)
            .unwrap()
            .3
    };
    assert!(lookup("delta", 1.0, 0.0));
    assert!(!lookup("epsilon", 1.0, 0.0));
    for c in cells.iter().filter(|c| c.0 == "delta") {
        assert_eq!(c.3, lookup("delta", -c.1, -c.2));
    }
}

#[test]
fn verify_single_suite() {
    let o = hdim(&["verify", "--suite", "appendix", "--samples", "500", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
    let o = hdim(&["verify", "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convexity_window() {
    let o = hdim(&[
        "convexity", "--eps-start=-0.03", "--eps-end=-0.02", "--spacing", "0.01", "--level", "10", "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["result"]["all_positive"], true);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn d0_estimate_at_low_level() {
    let o = hdim(&["d0", "--level", "10", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let d0 = v["result"]["value"].as_f64().unwrap();
    assert!(d0 > 1.0 && d0 < 1.295, "{d0}");
}

#[test]
fn help_exits_cleanly() {
    let o = hdim(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["dim", "omega", "theta0", "ray", "d0", "verify", "convexity", "mandelbrot"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
}
