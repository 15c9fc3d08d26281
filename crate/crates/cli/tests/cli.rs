use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_addmeta"))
        .args(args)
        .output()
        .expect("spawn addmeta")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_csv_reports_no_studies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    fs::write(&p, "study_id,m1,m2,m3,sd1,sd2,sd3,n1,n2,n3\n").unwrap();
    let o = run(&["effect", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no studies"), "{}", stderr(&o));
}

#[test]
fn bad_row_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(
        &p,
        "study_id,m1,m2,m3,sd1,sd2,sd3,n1,n2,n3\nA,1,2,3,1,1,1,10,10,10\nB,1,2,3,1,1,1,10,1,10\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["effect", p.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
    assert!(!out.exists(), "no partial output on failure");
}

#[test]
fn outputs_and_manifest_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = data("real_data.csv");
    let mut bodies = Vec::new();
    for (i, workers) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("sim{i}.csv"));
        let o = run(&[
            "effect",
            input.to_str().unwrap(),
            "--method",
            "sim",
            "--iterations",
            "500",
            "--seed",
            "9",
            "--workers",
            workers,
            "-o",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        bodies.push(fs::read(&out).unwrap());
        let manifest: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join(format!("sim{i}.csv.manifest.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest["command"], "effect");
        assert_eq!(manifest["seed"], 9);
        assert_eq!(manifest["iterations"], 500);
    }
    assert_eq!(bodies[0], bodies[1]);
    let text = String::from_utf8(bodies.remove(0)).unwrap();
    assert!(text.starts_with("study_id,method,beta,sd_beta,d,g,v_g,seed,iterations\n"));
    assert!(text.contains("SATIETY,sim,"));
    assert!(text.lines().nth(1).unwrap().ends_with(",9,500"));
}

#[test]
fn precision_override() {
    let o = run(&[
        "effect",
        data("real_data.csv").to_str().unwrap(),
        "--precision",
        "3",
    ]);
    assert!(o.status.success());
    assert!(
        stdout(&o)
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("SATIETY,crude,1.64,"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn meta_passthrough_and_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(
        &one,
        "study_id,method,beta,sd_beta,d,g,v_g,seed,iterations\nA,crude,1,1,0.5,0.5,0.04,,\n",
    )
    .unwrap();
    let o = run(&["meta", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "k,g_wm,v_wm,tau2,ci_lo,ci_hi\n1,0.500000,0.0400000,0,0.108000,0.892000\n"
    );

    let two = dir.path().join("two.csv");
    fs::write(&two, "study_id,g,v_g\nA,0.1,0.01\nB,0.5,0.01\n").unwrap();
    let o = run(&["meta", two.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row: Vec<String> = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[1], "0.300000");
    assert_eq!(row[3], "0.0700000");
}

#[test]
fn mc_replay_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(
        &scenario,
        "density = \"f3\"\nL = 5\nmean_vec = [4.0, 5.5, 7.0]\nsigma_ws = 5.0\nn_triplet = [10, 15, 5]\nseed = 12\n",
    )
    .unwrap();
    let a = run(&[
        "mc",
        scenario.to_str().unwrap(),
        "--reps",
        "6",
        "--inner-iterations",
        "100",
        "--workers",
        "1",
    ]);
    let b = run(&[
        "mc",
        scenario.to_str().unwrap(),
        "--reps",
        "6",
        "--inner-iterations",
        "100",
        "--workers",
        "2",
    ]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("density,L,sigma_ws,m1,m2,m3,n1,n2,n3,bias_g_crude"));
    let manifest: serde_json::Value = serde_json::from_str(&stderr(&a)).unwrap();
    assert_eq!(manifest["replicates"], 6);

    let o = run(&["mc", "--full-grid", scenario.to_str().unwrap()]);
    assert!(!o.status.success());
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "density = \"f3\"\nL = 4\nmean_vec = [4.0, 5.5, 7.0]\nsigma_ws = 5.0\nn_triplet = [10, 15, 5]\n").unwrap();
    assert!(!run(&["mc", bad.to_str().unwrap()]).status.success());
}

#[test]
fn or_command() {
    let o = run(&["or", data("or_fixture.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.starts_with("study_id,or_combined,ci_lo,ci_hi,pairing,ab_distance\nexample,1.72"),
        "{out}"
    );

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("incomplete.csv");
    fs::write(
        &p,
        "study_id,label,or,ci_lo,ci_hi,m_top,m_bottom\nS,AB_vs_AA,3,1.05,8.6,30,30\n",
    )
    .unwrap();
    assert!(!run(&["or", p.to_str().unwrap()]).status.success());
}
