use std::path::Path;
use std::process::{Command, Output};

use focusfuse::io::save_image;
use focusfuse::GrayImage;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_focusfuse"))
}

fn textured(w: usize, h: usize, phase: f64) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        0.5 + 0.3 * ((x as f64 * 0.7 + phase).sin() * (y as f64 * 0.45).cos()) + 0.1 * (((x * 7 + y * 3) % 5) as f64 / 4.0 - 0.5)
    })
    .unwrap()
}

fn write(dir: &Path, name: &str, img: &GrayImage) -> std::path::PathBuf {
    let p = dir.join(name);
    save_image(img, &p).unwrap();
    p
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn mismatched_sizes_fail_with_both_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.png", &textured(64, 64, 0.0));
    let b = write(tmp.path(), "b.png", &textured(64, 48, 1.0));
    let out = bin()
        .args(["--mode", "mfif", "fuse", "--visa"])
        .arg(&a)
        .arg("--visb")
        .arg(&b)
        .arg("--out")
        .arg(tmp.path().join("f.png"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert_eq!(msg.trim().lines().count(), 1, "{msg}");
    assert!(msg.contains("64x64") && msg.contains("64x48"), "{msg}");
}

#[test]
fn bad_flags_keys_and_files_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["fuse".into(), "--nope".into()],
        vec!["--pyr.level".into(), "3".into(), "fuse".into(), "--out".into(), "x.png".into()],
        vec!["--sf.window".into(), "4".into(), "decompose".into(), "--in".into(), "a.png".into(), "--out".into(), "o".into()],
        vec!["decompose".into(), "--in".into(), tmp.path().join("missing.png").display().to_string(), "--out".into(), "o".into()],
    ];
    for args in cases {
        let out = bin().args(&args).current_dir(tmp.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr(&out).trim().lines().count(), 1, "{args:?}: {}", stderr(&out));
    }
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "ssf.lamda = 0.1\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["decompose", "--in", "a.png", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ssf.lamda"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let img = write(tmp.path(), "img.png", &textured(40, 40, 0.3));
    let cfg = tmp.path().join("f.cfg");
    std::fs::write(&cfg, "ssf.lambda = 0.5\n").unwrap();
    let run = |dir: &str, extra: &[&str]| {
        let mut c = bin();
        c.args(extra).args(["decompose", "--in"]).arg(&img).arg("--out").arg(tmp.path().join(dir));
        assert!(c.status().unwrap().success());
        std::fs::read(tmp.path().join(dir).join("img_S.png")).unwrap()
    };
    let default = run("d", &[]);
    let file = run("f", &["--config", cfg.to_str().unwrap()]);
    let both = run("b", &["--config", cfg.to_str().unwrap(), "--ssf.lambda", "0.05"]);
    assert_ne!(default, file);
    assert_eq!(default, both);
}

#[test]
fn gendata_is_reproducible_and_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let clear = tmp.path().join("clear");
    std::fs::create_dir(&clear).unwrap();
    write(&clear, "one.png", &textured(64, 64, 0.0));
    write(&clear, "two.png", &textured(64, 64, 2.0));
    let gen = |out: &str| {
        let out = tmp.path().join(out);
        let ok = bin().args(["gendata", "--seed", "7", "--in"]).arg(&clear).arg("--out").arg(&out).status().unwrap();
        assert!(ok.success());
        out
    };
    let (a, b) = (gen("a"), gen("b"));
    for name in ["manifest.csv", "one_f1.png", "one_f2.png", "one_m1.png", "two_f1.png"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest = std::fs::read_to_string(a.join("manifest.csv")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "filename,seed,shape,area_frac");
    assert!(lines[1].starts_with("one.png,7,"));
    assert!(lines[2].starts_with("two.png,8,"));
    let m1 = focusfuse::io::load_image(a.join("one_m1.png")).unwrap();
    assert!(m1.data().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn eval_on_copies_hits_the_psnr_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let (fused, src) = (tmp.path().join("fused"), tmp.path().join("src"));
    std::fs::create_dir_all(&fused).unwrap();
    std::fs::create_dir_all(&src).unwrap();
    for (id, phase) in [("b", 1.0), ("a", 0.0)] {
        let img = textured(32, 32, phase);
        write(&fused, &format!("{id}.png"), &img);
        write(&src, &format!("{id}_a.png"), &img);
        write(&src, &format!("{id}_b.png"), &img);
    }
    let report = tmp.path().join("r.csv");
    let ok = bin()
        .args(["eval", "--fused-dir"])
        .arg(&fused)
        .arg("--src-dir")
        .arg(&src)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert!(ok.success());
    let text = std::fs::read_to_string(report).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["id", "q_g", "q_m", "q_s", "ag", "sf", "psnr", "runtime_ms"]);
    assert_eq!(rows.iter().skip(1).map(|r| r[0]).collect::<Vec<_>>(), ["a", "b", "MEAN"]);
    for r in &rows[1..] {
        assert_eq!(r[6], "100.000000");
        assert_eq!(r[3], "1.000000");
    }
}

#[test]
fn fuse_modes_and_colour_output() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.png", &textured(64, 64, 0.0));
    let b = write(tmp.path(), "b.png", &textured(64, 64, 1.0));
    let ir = write(tmp.path(), "ir.png", &textured(64, 64, 2.0));
    let run = |args: &[&std::ffi::OsStr]| bin().args(args).output().unwrap();
    let o = |s: &str| std::ffi::OsStr::new(s).to_os_string();
    let out = tmp.path().join("tri.png");
    let r = run(&[&o("fuse"), &o("--visa"), a.as_os_str(), &o("--visb"), b.as_os_str(), &o("--ir"), ir.as_os_str(), &o("--out"), out.as_os_str()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let r = run(&[&o("fuse"), &o("--visa"), a.as_os_str(), &o("--visb"), b.as_os_str(), &o("--out"), out.as_os_str()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("--ir"));

    let coffee = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/coffee_rgb.png");
    let ir = write(tmp.path(), "ir128.png", &textured(128, 128, 2.0));
    let out = tmp.path().join("rgb.png");
    let r = run(&[&o("--mode"), &o("mmif"), &o("fuse"), &o("--visa"), coffee.as_os_str(), &o("--ir"), ir.as_os_str(), &o("--out"), out.as_os_str()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let rgb = focusfuse::io::load_rgb(&out).unwrap();
    assert_ne!(rgb.r.data(), rgb.b.data());
    let out = tmp.path().join("gray.png");
    let r = run(&[&o("--mode"), &o("mmif"), &o("--chroma"), &o("gray"), &o("fuse"), &o("--visa"), coffee.as_os_str(), &o("--ir"), ir.as_os_str(), &o("--out"), out.as_os_str()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let rgb = focusfuse::io::load_rgb(&out).unwrap();
    assert_eq!(rgb.r.data(), rgb.b.data());
}
