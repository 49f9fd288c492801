use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rldeconv::io::{load_image, save_image};
use rldeconv::Image;

fn rldeconv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rldeconv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `scene.pgm`, `k.txt` and a blurred, noisy `in.pgm`.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let scene = Image::from_fn(32, 32, 1, |x, y, _| if (8..24).contains(&x) && (10..20).contains(&y) { 200.0 } else { 40.0 });
    save_image(&scene, dir.path().join("scene.pgm")).unwrap();
    fs::write(dir.path().join("k.txt"), "1 2 1\n2 4 2\n1 2 1\n").unwrap();
    let blur = rldeconv(&["blur", "--psf", "k.txt", "scene.pgm", "blurred.pgm"], dir.path());
    assert_eq!(code(&blur), 0, "{}", stderr(&blur));
    let noise = rldeconv(&["noise", "--fraction", "0.05", "--seed", "4", "blurred.pgm", "in.pgm"], dir.path());
    assert_eq!(code(&noise), 0, "{}", stderr(&noise));
    dir
}

#[test]
fn deconv_runs_every_method() {
    let dir = workspace();
    for method in ["rl", "regularised", "robust", "rrrl", "variational", "variational-constrained"] {
        let out = rldeconv(
            &[
                "deconv", "--method", method, "--iterations", "10", "--alpha", "0.01", "--psf", "k.txt",
                "--ground-truth", "scene.pgm", "in.pgm", "out.pgm",
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        assert!(stdout(&out).starts_with("snr_db="), "{method}: {}", stdout(&out));
        let restored = load_image(dir.path().join("out.pgm")).unwrap();
        assert_eq!((restored.width(), restored.height()), (32, 32));
        let raw = fs::read(dir.path().join("out.pgm")).unwrap();
        assert!(String::from_utf8_lossy(&raw).contains(&format!("# method {method} iterations 10")));
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = workspace();
    let cases: [&[&str]; 5] = [
        &["deconv", "--method", "rrrl", "--alpha", "-1", "--psf", "k.txt", "in.pgm", "out.pgm"],
        &["deconv", "--method", "landweber", "--psf", "k.txt", "in.pgm", "out.pgm"],
        &["deconv", "--psf", "k.txt", "in.pgm"],
        &["bench", "--preset", "fig9"],
        &["transmogrify"],
    ];
    for args in cases {
        let out = rldeconv(args, dir.path());
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
    assert!(!dir.path().join("out.pgm").exists());
}

#[test]
fn io_errors_exit_with_two() {
    let dir = workspace();
    fs::write(dir.path().join("even.txt"), "1 1\n1 1\n").unwrap();
    fs::write(dir.path().join("broken.pgm"), b"P5\n4 4\n255\nabc").unwrap();
    let cases: [&[&str]; 4] = [
        &["deconv", "--psf", "missing.txt", "in.pgm", "out.pgm"],
        &["deconv", "--psf", "even.txt", "in.pgm", "out.pgm"],
        &["deconv", "--psf", "k.txt", "broken.pgm", "out.pgm"],
        &["bench", "--assets", "nowhere"],
    ];
    for args in cases {
        let out = rldeconv(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error["), "{}", stderr(&out));
    }
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = workspace();
    let out = rldeconv(
        &["deconv", "--method", "variational-constrained", "--tau", "100", "--iterations", "5", "--psf", "k.txt", "in.pgm", "out.pgm"],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error[step-size]"), "{}", stderr(&out));
}

#[test]
fn config_file_layers_between_defaults_and_flags() {
    let dir = workspace();
    let dump = |extra: &[&str]| {
        let mut args = vec!["deconv", "--dump-config"];
        args.extend_from_slice(extra);
        let out = rldeconv(&args, dir.path());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    };
    let defaults = dump(&[]);
    assert!(defaults.contains("method = rrrl\n"));
    assert!(defaults.contains("iterations = 100\n"));
    assert!(defaults.contains("alpha = 0\n"));
    assert!(defaults.contains("smoothness = tv\n"));

    fs::write(dir.path().join("run.cfg"), "# tuned\nmethod = robust\nalpha = 0.2\niterations = 40\n").unwrap();
    let from_file = dump(&["--config", "run.cfg"]);
    assert!(from_file.contains("method = robust\n") && from_file.contains("alpha = 0.2\n"));
    let overridden = dump(&["--config", "run.cfg", "--iterations", "7", "--method", "variational"]);
    assert!(overridden.contains("method = variational\n"));
    assert!(overridden.contains("iterations = 7\n"));
    assert!(overridden.contains("alpha = 0.2\n"));
    assert!(overridden.contains("smoothness = pm\n"));

    fs::write(dir.path().join("dumped.cfg"), &overridden).unwrap();
    assert_eq!(dump(&["--config", "dumped.cfg"]), overridden);

    fs::write(dir.path().join("bad.cfg"), "alpha = 0.1\nbeta = 3\n").unwrap();
    let out = rldeconv(&["deconv", "--dump-config", "--config", "bad.cfg"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("beta"));
}

#[test]
fn bench_reads_asset_directory() {
    let dir = workspace();
    let assets = dir.path().join("assets");
    fs::create_dir(&assets).unwrap();
    fs::copy(dir.path().join("scene.pgm"), assets.join("camera256.pgm")).unwrap();
    fs::write(assets.join("psf_fig1.txt"), "0 1 0\n1 2 1\n0 1 0\n").unwrap();
    fs::write(assets.join("psf_fig2.txt"), "1 2 3 2 1\n").unwrap();
    let out = rldeconv(&["bench", "--preset", "fig2", "--seed", "3", "--assets", "assets", "--no-timing", "--out", "b.csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,variant,alpha,iterations,snr_db,energy_final,wall_s");
    let methods: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["RL", "regRL", "robustRL", "RRRL", "variational", "variational"]);
    assert!(lines[1..].iter().all(|l| l.ends_with(",0.000")));
}
