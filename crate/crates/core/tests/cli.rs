use std::io::Write;
use std::process::{Command, Output};

fn tool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coded-caching")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const WORKED: [&str; 10] = ["--N", "4", "--K", "4", "--L", "3", "--Mhat", "2", "--M", "1"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: Vec<String>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    tool(&refs)
}

#[test]
fn rate_prints_exact_and_decimal() {
    let out =
        run(with(&["rate"], &with(&WORKED, &["--scheme", "proposed"]).iter().map(String::as_str).collect::<Vec<_>>()));
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("1 (1.000)"));
    for line in ["t: 1", "alpha: 1", "Fprime: 3/4", "Mprime: 8/3", "Rprime: 3/4", "scenario: 1"] {
        assert!(text.contains(line), "missing {line:?} in\n{text}");
    }
}

#[test]
fn equal_scheme_without_cache_sends_every_file() {
    let out = tool(&["rate", "--N", "4", "--K", "4", "--M", "0", "--scheme", "equal"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("4 (4.000)"));
}

#[test]
fn scheme1_is_no_better_than_proposed() {
    let out = run(with(&["rate", "--scheme", "scheme1", "--resolution", "16"], &WORKED));
    assert!(out.status.success());
    let first = stdout(&out).lines().next().unwrap().to_string();
    let exact = first.split_whitespace().next().unwrap();
    let value = coded_caching::combinatorics::parse_rational(exact).unwrap();
    assert!(value >= coded_caching::combinatorics::int(1), "{first}");
}

#[test]
fn invalid_input_exits_with_one() {
    assert_eq!(tool(&["rate", "--N", "4", "--K", "5", "--M", "1", "--scheme", "equal"]).status.code(), Some(1));
    assert_eq!(tool(&["rate", "--N", "4", "--K", "4", "--M", "x", "--scheme", "equal"]).status.code(), Some(1));
    assert_eq!(tool(&["sweep", "--N", "4", "--K", "4", "--L", "3", "--Mhat", "2"]).status.code(), Some(1));
    assert_eq!(tool(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn verify_exhaustive_worked_example() {
    let out = run(with(&["verify", "--exhaustive"], &WORKED));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("demands: 256/256 pass"), "{text}");
    assert!(text.contains("load: 1 (formula 1)"), "{text}");
}

#[test]
fn verify_equal_scheme() {
    let out = tool(&["verify", "--scheme", "equal", "--N", "4", "--K", "4", "--M", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("load: 3/2 (formula 3/2)"));
}

#[test]
fn injected_fault_fails_with_two() {
    let out = run(with(&["verify", "--inject-fault", "1:1"], &WORKED));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("first failing demand"));
}

#[test]
fn verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.tsv");
    let out = run(with(&["verify", "--report", path.to_str().unwrap()], &WORKED));
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.starts_with("demand=1,2,3,4\tstatus=ok,ok,ok,ok\tload=1\tformula=1\tbits=8\tpass=true\n"));
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let args = [
        "sweep",
        "--N",
        "10",
        "--K",
        "4",
        "--L",
        "2",
        "--sweep-axis",
        "ratio",
        "--ratio",
        "3",
        "--from",
        "0",
        "--to",
        "10/3",
        "--step",
        "1/3",
        "--scheme",
        "proposed,scheme1",
        "--resolution",
        "16",
        "--jobs",
        "2",
    ];
    let a = tool(&args);
    let b = tool(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("N,K,L,Mhat,M,scheme,rate_rational,rate_decimal,scenario,t_int,alpha,Fprime,Mprime,Rprime,Phi,gamma")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 22);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][5], "proposed");
        assert_eq!(pair[1][5], "scheme1");
        let ours = coded_caching::combinatorics::parse_rational(pair[0][6]).unwrap();
        let theirs = coded_caching::combinatorics::parse_rational(pair[1][6]).unwrap();
        assert!(ours <= theirs, "M={}: {ours} > {theirs}", pair[0][4]);
    }
}

#[test]
fn decimal_column_matches_rational() {
    let out = tool(&[
        "sweep",
        "--N",
        "5",
        "--K",
        "4",
        "--L",
        "1",
        "--M",
        "1/3",
        "--sweep-axis",
        "mhat",
        "--from",
        "1/3",
        "--to",
        "5",
        "--step",
        "1/3",
    ]);
    assert!(out.status.success());
    for line in stdout(&out).lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let exact = coded_caching::combinatorics::parse_rational(f[6]).unwrap();
        assert_eq!(f[7], coded_caching::combinatorics::to_decimal(&exact, 12), "{line}");
    }
}

#[test]
fn single_point_sweep_is_one_row() {
    let out = run(with(
        &["sweep", "--from", "1", "--to", "1", "--step", "1/4"],
        &["--N", "4", "--K", "4", "--L", "3", "--Mhat", "2"],
    ));
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn config_file_with_flag_override() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, r#"{{"N": 4, "K": 4, "L": 3, "Mhat": "2", "M": 0.5, "scheme": "proposed"}}"#).unwrap();
    let path = file.path().to_str().unwrap();

    let from_file = tool(&["rate", "--config", path]);
    assert!(from_file.status.success());
    let direct = tool(&["rate", "--N", "4", "--K", "4", "--L", "3", "--Mhat", "2", "--M", "1/2"]);
    assert_eq!(from_file.stdout, direct.stdout);

    let overridden = tool(&["rate", "--config", path, "--M", "1"]);
    assert!(stdout(&overridden).starts_with("1 (1.000)"));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, r#"{{"N": 4, "Kay": 4}}"#).unwrap();
    assert_eq!(tool(&["rate", "--config", bad.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn external_rates_add_columns_and_ratio() {
    let mut table = tempfile::NamedTempFile::new().unwrap();
    writeln!(table, "# N,K,L,Mhat,M,rate\n4,4,3,2,1,0.8\n4,4,3,2,3/2,1\n9,9,1,1,1,1").unwrap();
    let out = run(with(
        &["sweep", "--from", "1", "--to", "2", "--step", "1/2", "--external-rates", table.path().to_str().unwrap()],
        &["--N", "4", "--K", "4", "--L", "3", "--Mhat", "2"],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].ends_with(",gamma,external,ratio"));
    assert!(lines[1].ends_with(",4/5,1.25000000000"), "{}", lines[1]);
    assert!(lines[3].ends_with(",,"), "{}", lines[3]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("max ratio proposed/external: 5/4"), "{err}");
    assert!(err.contains("line 4"), "{err}");

    let mut broken = tempfile::NamedTempFile::new().unwrap();
    writeln!(broken, "4,4,3,2,1,0.8\n4,4,3,2,1").unwrap();
    let out = run(with(
        &["sweep", "--from", "1", "--to", "1", "--step", "1", "--external-rates", broken.path().to_str().unwrap()],
        &["--N", "4", "--K", "4", "--L", "3", "--Mhat", "2"],
    ));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn json_output_uses_same_columns() {
    let out = run(with(
        &["sweep", "--from", "1", "--to", "1", "--step", "1", "--format", "json"],
        &["--N", "4", "--K", "4", "--L", "3", "--Mhat", "2"],
    ));
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &rows[0];
    assert_eq!(row["rate_rational"], "1");
    assert_eq!(row["Fprime"], "3/4");
    assert_eq!(row["N"], 4);
    assert!(row["gamma"].is_null());
}
