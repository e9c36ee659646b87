use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ballrecycle")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Header and rows of a CSV with `#` comment lines.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn field(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap()
}

fn assert_error_line(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error code={code} kind=")), "{err}");
}

#[test]
fn simulate_fullest_bin_example() {
    let o = run(&[
        "simulate", "--strategy", "fullest-bin", "--dist", "uniform", "-m", "100", "-n", "10", "--rounds", "1000000", "--seed", "42",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# ballrecycle "));
    assert!(text.contains("# invocation: ballrecycle simulate --strategy fullest-bin"));
    assert!(text.contains("# seeds: 42\n"));
    let (h, rows) = parse_csv(&text);
    assert_eq!(
        h,
        ["strategy", "dist", "m", "n", "seed", "burnin", "rounds", "rate", "rate_ci95", "e_r2", "max_flow_residual"]
    );
    assert_eq!(rows.len(), 1);
    let rate = field(&h, &rows[0], "rate");
    assert!((18.18..=21.0).contains(&rate), "{rate}");
}

#[test]
fn exact_random_ball_example() {
    let o = run(&["exact", "--strategy", "random-ball", "--dist", "uniform", "-m", "2", "-n", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = parse_csv(&stdout(&o));
    assert!((field(&h, &rows[0], "rate") - 1.5).abs() < 1e-12);
    assert!((field(&h, &rows[0], "e_r2") - 2.5).abs() < 1e-12);
    assert!((field(&h, &rows[0], "gain_opt") - 1.5).abs() < 1e-10);
}

#[test]
fn bounds_skyscraper_example() {
    let o = run(&["bounds", "--dist", "skyscraper", "-m", "3", "-n", "4"]);
    assert!(o.status.success());
    let (h, rows) = parse_csv(&stdout(&o));
    let p0: f64 = 1.0 - 0.25 + 1.0 / 16.0;
    let norm = (p0.sqrt() + 3.0 * 0.0625f64.sqrt()).powi(2);
    let want = (2.0 * 3.0 + 4.0 - 1.0) / norm;
    let got = field(&h, &rows[0], "upper_general");
    assert!((got - want).abs() < 1e-12 && (got - 3.300).abs() < 5e-4, "{got}");
    // Uniform-only columns stay empty.
    let i = h.iter().position(|c| c == "uniform_upper").unwrap();
    assert_eq!(rows[0][i], "");
}

#[test]
fn bounds_table_is_labeled_text() {
    let o = run(&["bounds", "-m", "100", "-n", "10", "--table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("uniform_upper") && l.ends_with(" 21")));
}

#[test]
fn exit_codes() {
    assert_error_line(&run(&["simulate", "--strategy", "nope", "-m", "3", "-n", "2", "--seed", "1"]), 2);
    assert_error_line(&run(&["simulate", "--strategy", "fullest-bin", "-m", "3", "-n", "2"]), 2);
    assert_error_line(&run(&["frobnicate"]), 2);
    assert_error_line(&run(&["bounds", "-m", "3", "-n", "2", "--bogus-flag"]), 2);
    assert_error_line(&run(&["exact", "--strategy", "fullest-bin", "-m", "60", "-n", "30"]), 3);
    assert_error_line(&run(&["opt", "-m", "10", "-n", "10", "--state-cap", "100"]), 3);
    assert_error_line(&run(&["bounds", "--dist", "skyscraper", "-m", "3", "-n", "1"]), 2);
    assert_error_line(
        &run(&["simulate", "--strategy", "fullest-bin", "-m", "3", "-n", "2", "--seed", "1", "--ae-l-size", "1"]),
        2,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    assert_error_line(&run(&["bounds", "-m", "3", "-n", "2", "--out", out.to_str().unwrap()]), 4);
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn output_files_and_side_files_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("main.csv");
    let per_bin = dir.path().join("bins.csv");
    let o = run(&[
        "simulate", "--strategy", "random-ball", "-m", "8", "-n", "3", "--rounds", "20000", "--seed", "5",
        "--per-bin", per_bin.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    for path in [&out, &per_bin] {
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# ballrecycle "), "{}", path.display());
        assert!(text.contains("# seeds: 5\n"));
    }
    let (h, rows) = parse_csv(&std::fs::read_to_string(&per_bin).unwrap());
    assert_eq!(h, ["bin", "p_i", "f_i", "R_i", "flow_residual"]);
    assert_eq!(rows.len(), 3);

    let pi = dir.path().join("pi.csv");
    let o = run(&["exact", "--strategy", "fullest-bin", "-m", "2", "-n", "2", "--pi-out", pi.to_str().unwrap()]);
    assert!(o.status.success());
    let (h, rows) = parse_csv(&std::fs::read_to_string(&pi).unwrap());
    assert_eq!(h, ["state", "prob"]);
    assert_eq!(rows, [["2 0", "0.125"], ["1 1", "0.5"], ["0 2", "0.375"]]);
}

#[test]
fn stateful_strategies_report_nan_flow_residual() {
    let o = run(&["simulate", "--strategy", "golden-gate", "-m", "8", "-n", "3", "--rounds", "10000", "--seed", "1,2"]);
    assert!(o.status.success());
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!(field(&h, &rows[0], "max_flow_residual").is_nan());
}

#[test]
fn sweep_rows_follow_grid_order() {
    let o = run(&[
        "sweep", "--range", "m=2:6:2", "--list", "strategy=fullest-bin,random-ball", "--jobs", "2", "--",
        "exact", "-n", "3", "--dist", "powerlaw:1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(h[..2], ["m", "strategy"]);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let want: Vec<(String, String)> = ["2", "4", "6"]
        .iter()
        .flat_map(|m| ["fullest-bin", "random-ball"].map(|s| (m.to_string(), s.to_string())))
        .collect();
    assert_eq!(keys, want);
    for r in &rows {
        let (rate, gain, upper) = (field(&h, r, "rate"), field(&h, r, "gain_opt"), field(&h, r, "upper_bound"));
        assert!(rate <= gain + 1e-9 && gain <= upper + 1e-9, "{r:?}");
    }
}

#[test]
fn sweep_overrides_base_flags() {
    let o = run(&["sweep", "--list", "m=7", "--", "bounds", "-m", "3", "-n", "2"]);
    let (h, rows) = parse_csv(&stdout(&o));
    assert!((field(&h, &rows[0], "upper_general") - 7.5).abs() < 1e-12);
}

#[test]
fn empty_sweep_is_header_only() {
    let o = run(&["sweep", "--range", "m=5:1:1", "--", "simulate", "--strategy", "fullest-bin", "-n", "3", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(h[0], "m");
    assert_eq!(h[1], "strategy");
    assert!(rows.is_empty());
}

#[test]
fn sweep_rejects_nested_outputs() {
    assert_error_line(&run(&["sweep", "--list", "m=1,2", "--", "bounds", "-n", "2", "--out", "x.csv"]), 2);
    assert_error_line(&run(&["sweep", "--list", "m=1,2", "--", "sweep", "--", "bounds"]), 2);
    assert_error_line(&run(&["sweep", "--range", "m=1:2", "--", "bounds", "-n", "2"]), 2);
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn plot_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    write(&csv, "# a comment\nx,a,b\n1,2,3\n2,4,1\n");
    let o = run(&["plot", csv.to_str().unwrap(), "--x", "x", "--y", "a,b", "--title", "t <1>"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = stdout(&o);
    assert!(svg.starts_with("<!--\nballrecycle "));
    assert!(svg.contains(r#"version="1.1""#));
    let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(polylines.len(), 2);
    for p in polylines {
        let points = p.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(points.split(' ').count(), 2);
    }
    assert!(svg.contains("t &lt;1&gt;"));
    // No `--` inside the comment header.
    let comment = &svg[4..svg.find("-->").unwrap()];
    assert!(!comment.contains("--"));
}

#[test]
fn plot_missing_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    write(&csv, "x,a\n1,2\n");
    assert_error_line(&run(&["plot", csv.to_str().unwrap(), "--x", "x", "--y", "nope"]), 2);
    assert_error_line(&run(&["plot", csv.to_str().unwrap(), "--x", "z", "--y", "a"]), 2);
}

#[test]
fn plot_skips_non_numeric_cells() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    write(&csv, "x,a\n1,2\n2,NaN\n3,\n4,5\n");
    let svg = stdout(&run(&["plot", csv.to_str().unwrap(), "--x", "x", "--y", "a"]));
    let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    assert_eq!(line.matches(',').count(), 2);
}

#[test]
fn btree_is_deterministic_and_windowed() {
    let args = ["btree", "--policy", "fullest-bin", "--keydist", "normal", "--inserts", "25000", "--window", "10000", "--seed", "4"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let (h, rows) = parse_csv(&stdout(&a));
    let ins: Vec<f64> = rows.iter().map(|r| field(&h, r, "insertions")).collect();
    assert_eq!(ins, [10000.0, 20000.0, 25000.0]);
}
