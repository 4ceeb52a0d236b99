use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serfsim::output::{sha256_hex, RunManifest};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_serfsim");

fn serfsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Runs a subcommand into `out` and asserts success.
fn run_ok(cmd: &str, config: Option<&Path>, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--out", out.to_str().unwrap()];
    if let Some(c) = config {
        args.extend(["--config", c.to_str().unwrap()]);
    }
    args.extend(extra);
    let o = serfsim(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    serfsim(args).status.code().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_checksums(dir: &Path) -> RunManifest {
    let m = manifest(dir);
    assert!(!m.outputs.is_empty());
    for o in &m.outputs {
        let bytes = std::fs::read(dir.join(&o.file)).unwrap();
        assert_eq!(sha256_hex(&bytes), o.sha256, "{}", o.file);
        assert_eq!(bytes.len(), o.bytes);
    }
    m
}

const FIG2D_SMALL: &str = r#"
[fig2d]
spins = ["1/2", "3/2"]
P = [0.01, 0.5]
R_se = "1e6 1/s"
field_ratio = 0.05
n_trajectories = 4
mode = "stochastic"
n_samples = 200
tip_angle = 0.05
periods = 3.0
"#;

const STAR_PARAMS: &str = r#"
n_K = "1.2e11 cm-3"
n_H = "2.7e16 cm-3"
k_HK = "5.4e-10 cm3/s"
q_H = 2.0
q_K = "self_consistent"
Gamma_p = "1.2e7 1/s"
R_sd_K = "0 1/s"
R_se_K = "0 1/s"
Gamma_H = "40 1/s"
B_z = "50 uT"
B_perp = "BPERP"
V = "VOL"
"#;

fn sensitivity_config(b_perp: &str, volume: &str) -> String {
    format!("[sensitivity.params]\n{}", STAR_PARAMS.replace("BPERP", b_perp).replace("VOL", volume))
}

#[test]
fn fig2ab_default_rows_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fig2ab");
    run_ok("fig2ab", None, &out, &[]);
    let (header, rows) = read_csv(&out.join("fig2ab.csv"));
    assert_eq!(header, ["B_T", "I", "Gamma_per_s", "gamma_eff_over_gamma_e", "omega_rad_per_s", "kind"]);
    let half: Vec<_> = rows.iter().filter(|r| r[1] == "1/2").collect();
    assert_eq!(half.len(), 61);
    for r in &half {
        assert!((f(&r[2]) / 100.0 - 1.0).abs() < 0.01, "{r:?}");
        assert!((f(&r[3]) / 0.5 - 1.0).abs() < 1e-3, "{r:?}");
    }
    // γ_e B / R spans 1e-3 .. 1e3 at R = 1e6 s⁻¹, γ_e = 2π·28 GHz/T.
    let b: Vec<f64> = half.iter().filter(|r| r[5] == "grid").map(|r| f(&r[0])).collect();
    let gamma_e = 2.0 * std::f64::consts::PI * 28e9;
    assert!((b[0] * gamma_e / 1e6 / 1e-3 - 1.0).abs() < 1e-12);
    assert!((b[59] * gamma_e / 1e6 / 1e3 - 1.0).abs() < 1e-12);
    let markers: Vec<_> = rows.iter().filter(|r| r[5] == "marker").collect();
    assert_eq!(markers.len(), 2);
    assert!(markers.iter().all(|r| (f(&r[0]) - 50e-6).abs() < 1e-18));
    // I = 3/2 at the geomagnetic field: far from the slowing-down limit.
    let three = rows.iter().find(|r| r[1] == "3/2" && r[5] == "marker").unwrap();
    assert!(f(&three[3]) > 0.2 && f(&three[3]) < 0.25);
    let m = assert_checksums(&out);
    assert_eq!(m.subcommand, "fig2ab");
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.config["fig2ab"]["T1"], "10 ms");
    assert!((m.resolved["params"][0]["t1"].as_f64().unwrap() - 0.01).abs() < 1e-15);
}

#[test]
fn empty_field_grid_gives_header_only_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[fig2ab]\nspins = [\"1/2\"]\nR_se = \"1e6 1/s\"\nT1 = \"10 ms\"\nratio_min = 1e-3\nratio_max = 1e3\npoints = 0\nmarker = \"50 uT\"\n",
    );
    let out = tmp.path().join("o");
    run_ok("fig2ab", Some(&cfg), &out, &[]);
    assert_eq!(
        std::fs::read_to_string(out.join("fig2ab.csv")).unwrap(),
        "B_T,I,Gamma_per_s,gamma_eff_over_gamma_e,omega_rad_per_s,kind\n"
    );
    assert_checksums(&out);
}

#[test]
fn plotting_never_changes_csv() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("fig2ab", None, &a, &[]);
    run_ok("fig2ab", None, &b, &["--plot"]);
    assert_eq!(std::fs::read(a.join("fig2ab.csv")).unwrap(), std::fs::read(b.join("fig2ab.csv")).unwrap());
    let svg = std::fs::read_to_string(b.join("fig2ab.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(assert_checksums(&b).outputs.len(), 2);
    assert!(!a.join("fig2ab.svg").exists());
}

#[test]
fn fig2c_values_and_golden() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    run_ok("fig2c", None, &out, &[]);
    let (_, rows) = read_csv(&out.join("fig2c.csv"));
    assert_eq!(rows.len(), 2 * 4 * 64);
    for r in &rows {
        if r[0] == "1/2" {
            assert!(f(&r[3]).abs() < 1e-10 && f(&r[4]).abs() < 1e-10);
        }
        if f(&r[2]) == 0.0 {
            assert_eq!((f(&r[3]), f(&r[4])), (0.0, 0.0));
        }
    }

    let cfg = write(tmp.path(), "g.toml", "[fig2c]\nspins = [\"3/2\"]\nP = [0.2, 0.5, 0.9]\nphi_points = 8\n");
    let out = tmp.path().join("g");
    run_ok("fig2c", Some(&cfg), &out, &[]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fig2c_three_halves.csv");
    let (gh, grows) = read_csv(&golden);
    let (h, rows) = read_csv(&out.join("fig2c.csv"));
    assert_eq!(gh, h);
    assert_eq!(grows.len(), rows.len());
    for (g, r) in grows.iter().zip(&rows) {
        assert_eq!(&g[..3], &r[..3]);
        for k in 3..5 {
            assert!((f(&g[k]) - f(&r[k])).abs() < 1e-12, "{g:?} vs {r:?}");
        }
    }
}

#[test]
fn fig2d_is_seed_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "d.toml", FIG2D_SMALL);
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    run_ok("fig2d", Some(&cfg), &dirs[0], &["--seed", "7"]);
    run_ok("fig2d", Some(&cfg), &dirs[1], &["--seed", "7", "--threads", "2"]);
    run_ok("fig2d", Some(&cfg), &dirs[2], &["--seed", "8"]);
    let read = |d: &PathBuf| std::fs::read(d.join("fig2d.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
    let m = assert_checksums(&dirs[0]);
    assert_eq!(m.seed, 7);
    assert_eq!(m.resolved["base"]["seed"], 7);

    let (header, rows) = read_csv(&dirs[0].join("fig2d.csv"));
    assert_eq!(header, ["I", "P", "q", "gamma_fit_rad_per_s_T", "decay_per_s", "fit_residual", "flagged", "mode"]);
    for r in rows.iter().filter(|r| r[0] == "1/2") {
        assert!((f(&r[2]) - 2.0).abs() < 0.01, "{r:?}");
        assert_eq!(r[7], "stochastic");
    }
    let q0 = rows.iter().find(|r| r[0] == "3/2" && r[1] == "0.01").unwrap();
    assert!((f(&q0[2]) / 6.0 - 1.0).abs() < 0.05, "{q0:?}");
}

#[test]
fn fig3b_lockin_tracks_closed_form_on_hydrogen_line() {
    let tmp = TempDir::new().unwrap();
    let params = STAR_PARAMS.replace("BPERP", "0.035 nT").replace("VOL", "1 cm3");
    let cross = params.replace("2.7e16", "1e15").replace("1.2e7 1/s", "2e5 1/s");
    let text = format!(
        "[fig3b]\nf_min = \"150 kHz\"\nf_max = \"550 kHz\"\npoints = 21\nspan = \"10 Hz\"\nspan_points = 5\n\
         [[fig3b.sets]]\nlabel = \"cross\"\n[fig3b.sets.params]\n{cross}\n\
         [[fig3b.sets]]\nlabel = \"star\"\n[fig3b.sets.params]\n{params}\n"
    );
    let out = tmp.path().join("o");
    let stdout = run_ok("fig3b", Some(&write(tmp.path(), "b.toml", &text)), &out, &[]);
    assert!(stdout.contains("within ±span of ω_H"));
    let (header, rows) = read_csv(&out.join("fig3b.csv"));
    assert_eq!(header, ["set", "method", "f_Hz", "omega_rad_per_s", "re", "im", "abs", "phase_rad"]);
    assert_eq!(rows.len(), 2 * 2 * 26);
    let f_h = 700e3;
    for set in ["cross", "star"] {
        let pick = |m: &str| -> Vec<(f64, f64)> {
            rows.iter().filter(|r| r[0] == set && r[1] == m).map(|r| (f(&r[2]), f(&r[6]))).collect()
        };
        let (ana, lock) = (pick("analytic"), pick("lockin"));
        for (a, l) in ana.iter().zip(&lock).filter(|(a, _)| (a.0 - f_h).abs() <= 10.0) {
            assert!((l.1 / a.1 - 1.0).abs() < 0.05, "{set} at {} Hz: {} vs {}", a.0, l.1, a.1);
        }
        // The hydrogen line dominates the spectrum.
        let peak = ana.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert!((peak.0 - f_h).abs() < 1.0);
    }
    // Cross: a separate potassium maximum near f_K = 350 kHz in both methods.
    for m in ["analytic", "lockin"] {
        let wide: Vec<(f64, f64)> =
            rows.iter().filter(|r| r[0] == "cross" && r[1] == m && f(&r[2]) < 600e3).map(|r| (f(&r[2]), f(&r[6]))).collect();
        let top = wide.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert!((top.0 - 350e3).abs() < 40e3, "{m}: {top:?}");
    }
    let m = assert_checksums(&out);
    assert!(m.rates["star"]["p_kz"].as_f64().unwrap() > 0.9);
}

#[test]
fn fig3b_zero_drive_gives_zero_column() {
    let tmp = TempDir::new().unwrap();
    let params = STAR_PARAMS.replace("BPERP", "0 nT").replace("VOL", "1 cm3");
    let text = format!(
        "[fig3b]\nf_min = \"300 kHz\"\nf_max = \"400 kHz\"\npoints = 3\nspan = \"5 Hz\"\nspan_points = 3\n\
         [[fig3b.sets]]\nlabel = \"off\"\n[fig3b.sets.params]\n{params}\n"
    );
    let out = tmp.path().join("o");
    run_ok("fig3b", Some(&write(tmp.path(), "z.toml", &text)), &out, &[]);
    let (_, rows) = read_csv(&out.join("fig3b.csv"));
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| f(&r[6]) == 0.0));
}

#[test]
fn fig4_small_map() {
    let tmp = TempDir::new().unwrap();
    let base = STAR_PARAMS.replace("BPERP", "0.35 nT").replace("VOL", "1 cm3");
    let base: String = base.lines().filter(|l| !l.starts_with("n_")).collect::<Vec<_>>().join("\n");
    let text = format!(
        "[fig4]\nn_K_min = \"1.2e11 cm-3\"\nn_K_max = \"1e12 cm-3\"\nn_K_points = 2\n\
         n_H_min = \"2.7e16 cm-3\"\nn_H_max = \"2.7e17 cm-3\"\nn_H_points = 2\n\
         Gamma_p_min = \"1e2 1/s\"\nGamma_p_max = \"1e9 1/s\"\nB_perp_min = \"1e-5 nT\"\nB_perp_max = \"10 nT\"\n\
         rel_tol = 1e-3\nmax_evals = 400\n[fig4.base]\n{base}\n"
    );
    let cfg = write(tmp.path(), "m.toml", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let stdout = run_ok("fig4", Some(&cfg), &a, &["--plot"]);
    run_ok("fig4", Some(&cfg), &b, &[]);
    assert!(stdout.contains("fig4: optimum"));
    assert_eq!(std::fs::read(a.join("fig4.csv")).unwrap(), std::fs::read(b.join("fig4.csv")).unwrap());
    let (_, rows) = read_csv(&a.join("fig4.csv"));
    assert_eq!(rows.len(), 4);
    // Star cell: within ×3 of 10 aT√(cm³/Hz).
    let star = &rows[0];
    let db = f(&star[2]);
    assert!(db > 10.0 / 3.0 && db < 30.0, "{star:?}");
    assert_eq!(star[7], "true");
    // n_K = 1e12 cm⁻³ makes Γ_HK exceed Γ_H = 40 s⁻¹.
    for r in &rows[2..] {
        assert!(r[2].is_empty() && r[8].contains("infeasible"));
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("fig4_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["feasible_cells"], 2);
    assert_eq!(summary["monotone_in_n_H"], true);
    assert!(summary["argmin"]["delta_b_at"].as_f64().unwrap() <= db);
    assert_eq!(assert_checksums(&a).outputs.len(), 3);
}

#[test]
fn sensitivity_star_and_volume_scaling() {
    let tmp = TempDir::new().unwrap();
    let read = |vol: &str, name: &str| -> serde_json::Value {
        let cfg = write(tmp.path(), &format!("{name}.toml"), &sensitivity_config("0.35 nT", vol));
        let out = tmp.path().join(name);
        let stdout = run_ok("sensitivity", Some(&cfg), &out, &[]);
        let file: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("sensitivity.json")).unwrap()).unwrap();
        assert_eq!(file, serde_json::from_str::<serde_json::Value>(stdout.split("\nwrote").next().unwrap()).unwrap());
        assert_checksums(&out);
        file
    };
    let one = read("1 cm3", "one");
    let two = read("2 cm3", "two");
    let db1 = one["result"]["delta_b_at"].as_f64().unwrap();
    let db2 = two["result"]["delta_b_at"].as_f64().unwrap();
    assert!(db1 > 10.0 / 3.0 && db1 < 30.0, "{db1}");
    // δB√V is per unit volume; the bare δB falls as 1/√V.
    let bare1 = one["result"]["delta_b"].as_f64().unwrap() / 1f64.sqrt();
    let bare2 = two["result"]["delta_b"].as_f64().unwrap() / 2f64.sqrt();
    assert!((bare2 / bare1 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!((db1 - db2).abs() < 1e-9 * db1);
    let h = one["result"]["delta_b_hydrogen_at"].as_f64().unwrap();
    let k = one["result"]["delta_b_potassium_at"].as_f64().unwrap();
    assert!(((h * h + k * k).sqrt() / db1 - 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let good = sensitivity_config("0.35 nT", "1 cm3");
    let cfg = |name: &str, text: &str| write(tmp.path(), name, text).to_str().unwrap().to_string();

    let unknown = cfg("unknown.toml", &format!("{good}bogus = 1\n"));
    assert_eq!(exit_code(&["sensitivity", "--config", &unknown, "--out", o]), 2);
    let unitless = cfg("unitless.toml", &good.replace("\"50 uT\"", "\"50\""));
    assert_eq!(exit_code(&["sensitivity", "--config", &unitless, "--out", o]), 2);
    let wrong_table = cfg("table.toml", &good);
    assert_eq!(exit_code(&["fig2ab", "--config", &wrong_table, "--out", o]), 2);
    assert_eq!(exit_code(&["fig2ab", "--config", "/no/such/file.toml", "--out", o]), 2);
    assert_eq!(exit_code(&["fig2ab", "--bogus-flag"]), 2);
    // Drive beyond 2Γ_H/γ_H is rejected as input.
    let strong = cfg("strong.toml", &sensitivity_config("5 nT", "1 cm3"));
    assert_eq!(exit_code(&["sensitivity", "--config", &strong, "--out", o]), 2);
    // No drive: the phase slope vanishes, a numerical failure.
    let off = cfg("off.toml", &sensitivity_config("0 nT", "1 cm3"));
    assert_eq!(exit_code(&["sensitivity", "--config", &off, "--out", o]), 3);
    // Output directory below a regular file.
    let blocker = write(tmp.path(), "blocker", "");
    let bad_out = blocker.join("sub");
    assert_eq!(exit_code(&["sensitivity", "--config", &cfg("ok.toml", &good), "--out", bad_out.to_str().unwrap()]), 1);
    assert!(!out.exists(), "failed runs leave no output directory");
}

#[test]
fn builtin_configs_are_listed_and_selectable() {
    let o = serfsim(&["defaults"]);
    assert!(o.status.success());
    let names = String::from_utf8(o.stdout).unwrap();
    for n in ["fig2ab", "fig3b-cross", "fig3b-star", "fig4"] {
        assert!(names.lines().any(|l| l == n), "{n}");
    }
    let star = serfsim(&["defaults", "fig3b-star"]);
    assert!(String::from_utf8(star.stdout).unwrap().contains("n_H = \"2.7e16 cm-3\""));
    assert_eq!(exit_code(&["defaults", "nope"]), 2);

    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run_ok("sensitivity", None, &out, &["--config", "sensitivity"]);
    assert_eq!(manifest(&out).config["sensitivity"]["params"]["B_z"], "50 uT");
}
