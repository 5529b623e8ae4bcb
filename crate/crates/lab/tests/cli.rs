use std::path::Path;
use std::process::Command;

fn attncap(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_attncap")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const TINY_GRID: [&str; 12] = [
    "--t-values", "6,10", "--m-values", "10,40", "--trials", "2", "--set", "max_iters=40", "--set", "holdout=200", "--set",
    "restarts=1",
];

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(attncap(&[]).0, 2);
    assert_eq!(attncap(&["frobnicate"]).0, 2);
    assert_eq!(attncap(&["train", "--no-such-flag"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = attncap(&["train", "--set", "bogus=1", "--out", path(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("bogus"));
    assert_eq!(attncap(&["--help"]).0, 0);
}

#[test]
fn verify_passes_on_a_fresh_construction_and_fails_after_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    let (code, _, err) = attncap(&["construct", "--t", "7", "--s", "2", "--function", "parity", "--out", path(&c)]);
    assert_eq!(code, 0, "{err}");
    assert!(read(&c.join("manifest.toml")).contains("subcommand = \"construct\""));
    let v = dir.path().join("v");
    assert_eq!(attncap(&["verify", "--dir", path(&c), "--out", path(&v)]).0, 0);
    assert!(read(&v.join("verify_report.toml")).contains("passed = true"));

    let wq = c.join("head0_w_q.txt");
    let mut lines: Vec<String> = read(&wq).lines().map(String::from).collect();
    for l in lines.iter_mut().skip(1) {
        *l = l.split_whitespace().map(|x| format!("{:e}", x.parse::<f64>().unwrap() * 10.0 + 1.0)).collect::<Vec<_>>().join(" ");
    }
    std::fs::write(&wq, lines.join("\n") + "\n").unwrap();
    assert_eq!(attncap(&["verify", "--dir", path(&c), "--out", path(&v)]).0, 1);
    assert!(read(&v.join("manifest.toml")).contains("exit_code = 1"));

    std::fs::write(&wq, "1 1\n0.0\n").unwrap();
    assert_eq!(attncap(&["verify", "--dir", path(&c), "--out", path(&v)]).0, 2);
}

#[test]
fn shatter_and_capacity_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(attncap(&["shatter", "--out", path(dir.path())]).0, 0);
    let table = read(&dir.path().join("shatter.csv"));
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().skip(1).all(|l| l.ends_with(",1")));

    let cap = dir.path().join("cap");
    assert_eq!(attncap(&["capacity", "--constants", "explicit", "--out", path(&cap)]).0, 0);
    let values = read(&cap.join("capacity.csv"));
    assert!(values.starts_with("formula_id,value,convention\n"));
    assert!(values.contains(",explicit_constants"));
    let chain = read(&cap.join("chain.csv"));
    let bounds: Vec<f64> = chain.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(bounds.len(), 15);
    assert!(bounds.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn empty_grid_writes_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = attncap(&["scaling", "--set", "t_values=[]", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(&dir.path().join("scaling.csv")).lines().count(), 1);
    assert_eq!(read(&dir.path().join("thresholds.csv")).lines().count(), 1);
    roxmltree::Document::parse(&read(&dir.path().join("scaling.svg"))).unwrap();
}

#[test]
fn scaling_rows_cover_the_grid_and_the_chart_parses() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["scaling", "--out", path(dir.path())];
    args.extend(TINY_GRID);
    let (code, _, err) = attncap(&args);
    assert_eq!(code, 0, "{err}");
    let rows = read(&dir.path().join("scaling.csv"));
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    assert!(rows.starts_with("T,m,trial,"));
    let svg = read(&dir.path().join("scaling.svg"));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.tag_name().name() == "text"));
}

#[test]
fn attention_dump_rows_are_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["train", "--t", "8", "--s", "2", "--m", "60", "--max-iters", "30", "--dump-attention", "3"];
    let (code, _, err) = attncap(&[&args[..], &["--out", path(dir.path())]].concat());
    assert!(code == 0, "{err}");
    let dump = read(&dir.path().join("attention.csv"));
    let mut sums = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for line in dump.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *sums.entry((f[0].parse().unwrap(), f[1].parse().unwrap())).or_default() += f[3].parse::<f64>().unwrap();
    }
    assert_eq!(sums.len(), 3 * 16);
    assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-6));
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn replay_reproduces_csv_outputs_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let construct = d("construct");
    let runs: Vec<(String, Vec<&str>)> = vec![
        ("construct".into(), vec!["construct", "--t", "9", "--s", "3", "--function", "random", "--seed", "4"]),
        ("verify".into(), vec!["verify", "--dir", path(&construct)]),
        ("capacity".into(), vec!["capacity"]),
        ("shatter".into(), vec!["shatter"]),
        ("dataset".into(), vec!["dataset", "--n", "50", "--seed", "8", "--reject-ambiguous"]),
        ("train".into(), vec!["train", "--t", "8", "--s", "2", "--m", "40", "--max-iters", "20", "--dump-attention", "2"]),
        ("scaling".into(), [&["scaling"][..], &TINY_GRID[..]].concat()),
        ("parity".into(), vec!["parity", "--t", "6", "--s", "2", "--batch", "64", "--budget", "60", "--seeds", "2"]),
    ];
    for (name, args) in &runs {
        let out = d(name);
        let (code, _, err) = attncap(&[&args[..], &["--workers", "1", "--out", path(&out)]].concat());
        assert_eq!(code, 0, "{name}: {err}");
        let original = csv_files(&out);
        assert!(!original.is_empty(), "{name} wrote no CSV");
        let again = d(&format!("{name}-replay"));
        let (code, _, err) = attncap(&["replay", "--manifest", path(&out), "--workers", "2", "--out", path(&again)]);
        assert_eq!(code, 0, "{name} replay: {err}");
        assert_eq!(csv_files(&again), original, "{name}");
    }
}
