use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orbit_core::{omt, Complex64, RTensor};
use orbit_mra::MraSignal;
use serde_json::{json, Value};

fn orbit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbit")).current_dir(dir).args(args).output().expect("spawn orbit")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p.display().to_string()
}

/// Run a stage with a config, asserting success.
fn stage(dir: &Path, command: &str, out: &str, cfg: Value, extra: &[&str]) -> PathBuf {
    let c = write_config(dir, &format!("{out}.json"), &cfg);
    let mut args = vec![command, "--config", &c, "--out", out];
    args.extend_from_slice(extra);
    let o = orbit(dir, &args);
    assert!(o.status.success(), "{command} failed: {}", String::from_utf8_lossy(&o.stderr));
    dir.join(out)
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn mixture() -> Value {
    json!({ "kind": "mixture", "components": [
        { "weight": 0.6, "mean": -0.1, "stddev": 0.08 },
        { "weight": 0.4, "mean": 0.2, "stddev": 0.05 } ] })
}

#[test]
fn unknown_config_field_exits_1_naming_the_path() {
    let t = tempfile::tempdir().unwrap();
    let cfg = json!({ "n": 8, "signal": mixture(), "density": { "kind": "uniform" }, "count": 10, "sigma": 0.1, "extra": 1 });
    let c = write_config(t.path(), "bad.json", &cfg);
    let o = orbit(t.path(), &["simulate-mra", "--config", &c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));

    let nested = json!({ "n": 8, "family": { "components": "two", "stddev_min": 0.05, "stddev_max": 0.1 }, "count": 3 });
    let c = write_config(t.path(), "nested.json", &nested);
    let o = orbit(t.path(), &["make-dataset", "--config", &c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("family.components"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_input_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let o = orbit(t.path(), &["moments-mra", "--config", "nope.json"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = json!({ "source": { "kind": "analytic", "signal": "absent.omt", "density": "absent.omt" } });
    let c = write_config(t.path(), "m.json", &cfg);
    let o = orbit(t.path(), &["moments-mra", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_a_diagnostic() {
    let t = tempfile::tempdir().unwrap();
    let sim = json!({ "n": 8, "signal": mixture(), "density": { "kind": "uniform" }, "count": 100, "sigma": 0.1 });
    stage(t.path(), "simulate-mra", "sim", sim, &[]);
    let cfg = json!({ "moments": "sim", "recon": { "iterations": 50, "lr": 1e300 } });
    let c = write_config(t.path(), "r.json", &cfg);
    let o = orbit(t.path(), &["recon-mra", "--config", &c, "--out", "r"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: Value = serde_json::from_slice(&fs::read(t.path().join("r/diagnostic.json")).unwrap()).unwrap();
    assert_eq!(diag["command"], "recon-mra");
}

/// A real signal with a flat (unit-modulus) spectrum and a density with
/// distinct entries, written as OMT1 files.
fn write_unit_modulus_instance(dir: &Path, n: usize) {
    let c = n / 2;
    let mut f = vec![Complex64::default(); n];
    for a in 0..n {
        let k = a as i64 - c as i64;
        let partner = (c as i64 - k).rem_euclid(n as i64) as usize;
        if partner == a || (k == -(c as i64) && n % 2 == 0) {
            f[a] = Complex64::new(if a % 3 == 0 { 1.0 } else { -1.0 }, 0.0);
        } else if k > 0 {
            let z = Complex64::from_polar(1.0, 0.7 + 1.3 * k as f64);
            f[a] = z;
            f[partner] = z.conj();
        }
    }
    let v = MraSignal::from_fourier(f).unwrap();
    omt::write_real(&dir.join("signal.omt"), &RTensor::from_vec(v.values), None).unwrap();
    let raw: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 + 0.1 * (i * i % 5) as f64).collect();
    let total: f64 = raw.iter().sum();
    omt::write_real(&dir.join("density.omt"), &RTensor::from_vec(raw.iter().map(|r| r / total).collect()), None).unwrap();
}

#[test]
fn spectral_pipeline_recovers_a_unit_modulus_signal() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    write_unit_modulus_instance(d, 8);
    let an = json!({ "source": { "kind": "analytic", "signal": "signal.omt", "density": "density.omt" } });
    stage(d, "moments-mra", "exact", an, &[]);
    stage(d, "invert-spectral", "inv", json!({ "moments": "exact" }), &[]);
    for (est, reference) in [("inv/density.omt", "density.omt"), ("inv/signal.omt", "signal.omt")] {
        let err = stage(d, "eval-error", "err", json!({ "kind": "signal", "estimate": est, "reference": reference }), &[]);
        let e = report(&err)["relative_error"].as_f64().unwrap();
        assert!(e < 1e-6, "{est}: {e}");
    }
    assert_eq!(report(&d.join("inv"))["degenerate"], json!(false));
    let err = stage(d, "eval-error", "err", json!({ "kind": "moments", "estimate": "exact", "reference": "exact" }), &[]);
    assert_eq!(report(&err)["m2_error"].as_f64(), Some(0.0));
}

#[test]
fn observations_route_matches_streamed_moments() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let sim = json!({ "n": 9, "signal": mixture(), "density": { "kind": "uniform" }, "count": 3000, "sigma": 0.5 });
    stage(d, "simulate-mra", "sim", sim, &["--seed", "4"]);
    stage(d, "moments-mra", "emp", json!({ "source": { "kind": "observations", "observations": "sim/observations.omt", "sigma": 0.5 } }), &[]);
    for name in ["m1.omt", "m2.omt"] {
        assert_eq!(omt::read(&d.join("sim").join(name)).unwrap(), omt::read(&d.join("emp").join(name)).unwrap());
    }
}

#[test]
fn encoder_training_and_refinement_write_traces() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    stage(d, "make-dataset", "data", json!({ "n": 8, "family": { "components": 1, "stddev_min": 0.05, "stddev_max": 0.2 }, "count": 40 }), &[]);
    let train = |head: &str| {
        json!({ "dataset": "data", "head": head,
                "train": { "dataset_size": 40, "test_fraction": 0.25, "batch_size": 8, "schedule": [{ "lr": 1e-3, "epochs": 2 }] } })
    };
    let ev = stage(d, "train-encoder", "enc_v", train("v"), &[]);
    let er = stage(d, "train-encoder", "enc_rho", train("rho"), &[]);
    let loss = fs::read_to_string(ev.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().next().unwrap(), "epoch,loss,log10_loss");
    assert_eq!(loss.lines().count(), 3);
    assert!(report(&er)["test_error"].as_f64().unwrap().is_finite());

    let sim = json!({ "n": 8, "signal": mixture(), "density": { "kind": "uniform" }, "count": 500, "sigma": 0.2, "save_observations": false });
    stage(d, "simulate-mra", "sim", sim, &[]);
    let recon = json!({ "moments": "sim", "encoder_v": "enc_v/encoder.params", "encoder_rho": "enc_rho/encoder.params",
                        "recon": { "iterations": 5 }, "truth": { "signal": "sim/signal.omt", "density": "sim/density.omt" } });
    let r = stage(d, "recon-mra", "recon", recon, &[]);
    let trace = fs::read_to_string(r.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,loss,m1_error,m2_error,signal_error,density_error,log10_loss"));
    assert_eq!(trace.lines().count(), 1 + 6);
    assert!(report(&r)["final"]["signal_error"].as_f64().is_some());
    // warm-start encoders round-trip through their files
    let v = omt::read(&r.join("signal.omt")).unwrap();
    assert_eq!(v.shape(), &[8]);
}

#[test]
fn fsc_of_identical_volumes_reaches_nyquist() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let sim = json!({ "n": 9, "volume": { "kind": "default" }, "count": 4, "sigma": 0.1 });
    stage(d, "simulate-cryoem", "sim", sim, &[]);
    let f = stage(d, "eval-fsc", "fsc", json!({ "a": "sim/volume.mrc", "b": "sim/volume.omt", "voxel": 1.5, "search": { "q1": 36, "q2": 4 } }), &[]);
    let r = report(&f);
    assert_eq!(r["resolution"].as_f64().unwrap(), 3.0);
    assert_eq!(r["alignment"]["shift"], json!([0, 0, 0]));
    let csv = fs::read_to_string(f.join("fsc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let images = omt::read(&d.join("sim/images.omt")).unwrap();
    assert_eq!(images.shape(), &[4, 9, 9]);
}

#[test]
fn cryo_pipeline_runs_end_to_end_and_reruns_bit_identically() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let sim = json!({ "n": 7, "volume": { "kind": "default" }, "count": 1500, "sigma": 0.3 });
    stage(d, "simulate-cryoem", "sim", sim.clone(), &["--workers", "2"]);
    stage(d, "moments-cryoem", "mom", json!({ "source": { "kind": "images", "images": "sim/images.omt", "sigma": 0.3 } }), &[]);
    let mut streamed = sim;
    streamed["kind"] = json!("simulate");
    stage(d, "moments-cryoem", "stream", json!({ "source": streamed }), &["--workers", "3"]);
    for name in ["m1.omt", "m2.omt"] {
        assert_eq!(omt::read(&d.join("mom").join(name)).unwrap(), omt::read(&d.join("stream").join(name)).unwrap());
    }
    let recon = json!({ "moments": "mom", "recon": { "schedule": [{ "lr": 1e-3, "epochs": 3 }], "q1": 12, "q2": 2, "init_epochs": 2,
                        "volume": { "width": 8, "depth": 2, "octaves": 3, "latent": 0 } } });
    let r = stage(d, "recon-cryoem", "recon", recon, &[]);
    for f in ["volume.mrc", "volume.omt", "z_rho.omt", "trace.csv", "volume.params", "encoder.params", "manifest.json"] {
        assert!(r.join(f).exists(), "{f}");
    }
    let z = omt::read(&r.join("z_rho.omt")).unwrap().into_real().unwrap();
    assert!((z.data().iter().sum::<f64>() - 1.0).abs() < 1e-10);

    for workers in ["1", "4"] {
        let out = format!("again{workers}");
        let o = orbit(d, &["rerun", "recon/manifest.json", "--out", &out, "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    // a changed input is refused
    fs::write(d.join("mom/m1.omt.json"), b"{}").unwrap();
    let o = orbit(d, &["rerun", "recon/manifest.json", "--out", "stale"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_volume_reports_an_approximation_error() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let cfg = json!({ "n": 7, "volume": { "kind": "default" }, "arch": { "width": 8, "depth": 2, "octaves": 3, "latent": 0 },
                      "fit": { "schedule": [{ "lr": 1e-2, "epochs": 30 }], "batch": 8192 } });
    let f = stage(d, "fit-volume", "fit", cfg, &[]);
    let e = report(&f)["approx_error"].as_f64().unwrap();
    assert!(e.is_finite() && e < 1.0, "{e}");
    let m = orbit_cryo::read_mrc(&f.join("volume.mrc")).unwrap();
    assert_eq!(m.data.shape(), &[7, 7, 7]);
    // the fitted volume can drive a simulation
    let sim = json!({ "source": { "kind": "quadrature", "n": 7, "volume": { "kind": "neural", "path": "fit/volume.params" }, "q1": 12, "q2": 2 } });
    stage(d, "moments-cryoem", "q", sim, &[]);
}
