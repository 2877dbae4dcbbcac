use std::path::Path;
use std::process::{Command, Output};

fn pathmlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathmlp"))
        .args(args)
        .env_remove("PATHMLP_FIXTURES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_triangle(dir: &Path) -> String {
    std::fs::write(dir.join("t.edges"), "0 1\n1 2\n0 2\n").unwrap();
    std::fs::write(dir.join("t.features"), "3 2\n1 0\n0 1\n1 1\n").unwrap();
    std::fs::write(dir.join("t.labels"), "0\n0\n1\n").unwrap();
    std::fs::write(
        dir.join("t.manifest"),
        "name=triangle\nedges=t.edges\nfeatures=t.features\nlabels=t.labels\nnodes=3\nfeature_dim=2\nclasses=2\n",
    )
    .unwrap();
    dir.join("t.manifest").to_string_lossy().into_owned()
}

#[test]
fn homophily_on_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_triangle(dir.path());
    let out = pathmlp(&["homophily", "--data", &m]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("edge_homophily\t0.3333"), "{}", stdout(&out));
}

#[test]
fn unknown_flag_fails_with_usage() {
    let out = pathmlp(&["homophily", "--bogus"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn bad_label_is_reported_with_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_triangle(dir.path());
    std::fs::write(dir.path().join("t.labels"), "0\n7\n1\n").unwrap();
    let out = pathmlp(&["homophily", "--data", &m]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ") && err.contains("t.labels:2"), "{err}");
}

#[test]
fn sample_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_triangle(dir.path());
    let cache = dir.path().join("p.txt");
    let out = pathmlp(&["sample", "--data", &m, "--d", "2", "--n", "3", "--out", cache.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&cache).unwrap();
    assert!(text.starts_with("# pathmlp-paths d=2 n=3 strategy=similarity seed=0"));
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn train_then_eval_reproduces_validation_score() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let gen = pathmlp(&[
        "gen", "--kind", "heterophilous", "--nodes", "80", "--features", "6", "--classes", "4", "--seed", "3",
        "--out", data_dir.to_str().unwrap(),
    ]);
    assert!(gen.status.success(), "{gen:?}");
    let manifest = data_dir.join("synthetic-heterophilous.manifest");
    let m = manifest.to_str().unwrap();

    let run = |out: &Path| {
        let o = pathmlp(&[
            "train", "--data", m, "--runs", "2", "--max-epochs", "30", "--patience", "10", "--d", "2", "--n", "3",
            "--f-prime", "8", "--f-h", "8", "--seed", "5", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    for f in ["metrics.csv", "run-5.ckpt", "run-6.ckpt", "run-5.manifest", "run-6.paths"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between identical invocations");
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("dataset,variant,config_id,run,metric\nsynthetic-heterophilous,pathmlp,0,5,"), "{csv}");

    for extra in [None, Some(a.join("run-6.paths"))] {
        let mut args = vec![
            "eval".to_string(),
            "--data".into(),
            m.into(),
            "--manifest".into(),
            a.join("run-6.manifest").to_string_lossy().into_owned(),
            "--checkpoint".into(),
            a.join("run-6.ckpt").to_string_lossy().into_owned(),
        ];
        if let Some(p) = extra {
            args.extend(["--paths".into(), p.to_string_lossy().into_owned()]);
        }
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = pathmlp(&args);
        assert!(o.status.success(), "{o:?}");
        assert!(stdout(&o).contains("recorded_val"));
    }
}

#[test]
fn leakage_on_generated_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let gen = pathmlp(&["gen", "--kind", "leaked", "--nodes", "200", "--out", dir.path().to_str().unwrap()]);
    assert!(gen.status.success(), "{gen:?}");
    let m = dir.path().join("synthetic-leaked.manifest");
    let out = pathmlp(&["leakage", "--data", m.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("duplication_a_y=0.250000"), "{}", stdout(&out));
}

#[test]
fn missing_dataset_is_a_clean_error() {
    let out = pathmlp(&["homophily", "--data", "no-such-dataset"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("neither a manifest file nor a fixture"));
}
