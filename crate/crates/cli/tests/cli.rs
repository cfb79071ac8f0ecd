use std::path::Path;
use std::process::{Command, Output};

fn ddsplit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddsplit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ddsplit")
}

fn eps_column(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,t,eps"));
    lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

const MODEL: &[&str] = &["--sigma", "1", "--N1", "32", "--N2", "32", "--T", "0.01", "--steps", "10", "--n1", "2", "--n2", "1"];

#[test]
fn run_weighted_writes_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--scheme", "weighted", "--out", "w"];
    args.extend_from_slice(MODEL);
    let out = ddsplit(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let eps = eps_column(&dir.path().join("w_eps.csv"));
    assert_eq!(eps.len(), 11);
    assert_eq!(eps[0], 0.0);
    assert!(eps[10] > 0.0);
    let field = std::fs::read_to_string(dir.path().join("w_field.csv")).unwrap();
    assert_eq!(field.lines().count(), 1 + 31 * 31);
}

#[test]
fn vector_with_zero_steps_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddsplit(
        dir.path(),
        &["run", "--scheme", "vector", "--p", "2", "--overlap", "integer", "--steps", "0", "--out", "v"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(eps_column(&dir.path().join("v_eps.csv")), vec![0.0]);
}

#[test]
fn regmult_single_group_matches_weighted() {
    let dir = tempfile::tempdir().unwrap();
    for (scheme, prefix) in [("regmult", "m"), ("weighted", "w")] {
        let mut args = vec!["run", "--scheme", scheme, "--p", "1", "--out", prefix];
        args.extend_from_slice(MODEL);
        assert_eq!(ddsplit(dir.path(), &args).status.code(), Some(0));
    }
    let m = eps_column(&dir.path().join("m_eps.csv"));
    let w = eps_column(&dir.path().join("w_eps.csv"));
    assert_eq!(m.len(), w.len());
    for (a, b) in m.iter().zip(&w) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn compare_single_config_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--N1", "16", "--N2", "16", "--overlap", "half"];
    let mut run = vec!["run", "--scheme", "regadd", "--out", "r"];
    run.extend_from_slice(&common);
    assert_eq!(ddsplit(dir.path(), &run).status.code(), Some(0));
    let mut cmp = vec!["compare", "--schemes", "regadd", "--out", "c"];
    cmp.extend_from_slice(&common);
    assert_eq!(ddsplit(dir.path(), &cmp).status.code(), Some(0));

    let summary = std::fs::read_to_string(dir.path().join("c_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(&cols[..2], &["regadd", "half"]);
    let last = *eps_column(&dir.path().join("r_eps.csv")).last().unwrap();
    assert_eq!(cols[3].parse::<f64>().unwrap(), last);
    assert_eq!(
        std::fs::read(dir.path().join("r_eps.csv")).unwrap(),
        std::fs::read(dir.path().join("c_regadd_half_eps.csv")).unwrap()
    );
}

#[test]
fn compare_is_sorted_and_dedups_unsplit_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddsplit(
        dir.path(),
        &[
            "compare", "--schemes", "weighted,regadd,vector", "--overlaps", "integer,wide3h",
            "--N1", "16", "--N2", "16", "--with-norm", "--out", "c",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("c_summary.csv")).unwrap();
    let rows: Vec<Vec<String>> =
        summary.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().filter(|r| r[0] == "weighted").count(), 1);
    let eps: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[0] <= w[1]));
    for r in &rows {
        assert!(!r[4].is_empty());
        let volume: usize = r[5].parse().unwrap();
        assert_eq!(volume == 0, r[0] == "weighted");
    }
    let regadd = |o: &str| {
        rows.iter().find(|r| r[0] == "regadd" && r[1] == o).map(|r| r[3].parse::<f64>().unwrap()).unwrap()
    };
    assert!(regadd("wide3h") < regadd("integer"));
}

#[test]
fn stability_flags_explicit_beyond_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddsplit(
        dir.path(),
        &[
            "stability", "--schemes", "explicit,weighted", "--taus", "1e-3,10", "--sigmas", "1",
            "--tau-over-lmax", "2.5", "--N1", "8", "--N2", "8", "--out", "s",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("s_stability.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("scheme,sigma,tau,norm,flagged"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let explicit_limit = &rows[2];
    assert_eq!(explicit_limit[0], "explicit");
    assert!(explicit_limit[3].parse::<f64>().unwrap() >= 1.4);
    assert_eq!(explicit_limit[4], "true");
    for r in rows.iter().filter(|r| r[0] == "weighted") {
        assert!(r[3].parse::<f64>().unwrap() <= 1.0 + 1e-8);
        assert_eq!(r[4], "false");
    }
}

#[test]
fn stability_rejects_large_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddsplit(dir.path(), &["stability", "--N1", "64", "--N2", "64", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("s_stability.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--scheme", "bogus", "--out", "x"][..],
        &["run", "--overlap", "wide", "--out", "x"],
        &["run", "--sigma", "-1", "--out", "x"],
        &["run", "--axis", "3", "--out", "x"],
        &["run", "--N1", "1", "--out", "x"],
        &["run", "--T", "0.01"],
        &["compare", "--schemes", "", "--out", "x"],
        &["frobnicate"],
    ] {
        let out = ddsplit(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let missing = ddsplit(dir.path(), &["run", "--out", "no/such/dir/x"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |prefix: &'static str| {
        vec![
            "compare", "--schemes", "regadd,regmult,vector", "--overlaps", "integer,half",
            "--problem", "convdiff", "--N1", "12", "--N2", "12", "--with-norm", "--out", prefix,
        ]
    };
    assert_eq!(ddsplit(dir.path(), &args("a")).status.code(), Some(0));
    assert_eq!(ddsplit(dir.path(), &args("b")).status.code(), Some(0));
    let mut compared = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if let Some(rest) = name.strip_prefix("a_") {
            let a = std::fs::read(dir.path().join(&name)).unwrap();
            let b = std::fs::read(dir.path().join(format!("b_{rest}"))).unwrap();
            assert_eq!(a, b, "{name}");
            compared += 1;
        }
    }
    assert_eq!(compared, 1 + 6 * 2);
}
