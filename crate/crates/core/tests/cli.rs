use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hbproxy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbproxy")).args(args).output().expect("spawn hbproxy")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_tiny(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--case", "tc-tiny", "--iterations", "4", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    hbproxy(&args)
}

#[test]
fn run_then_verify_across_configurations() {
    let tmp = tempfile::tempdir().unwrap();
    let (golden, other) = (tmp.path().join("golden"), tmp.path().join("other"));
    let a = run_tiny(&golden, &["--ranks", "1", "--io", "per-value"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = run_tiny(
        &other,
        &[
            "--ranks",
            "2",
            "--threads",
            "3",
            "--axis",
            "gridpoints",
            "--activation",
            "per-loop",
            "--exchange",
            "per-element",
            "--exchange-threads",
            "tagged",
            "--reduce",
            "per-item",
        ],
    );
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    let stdout = String::from_utf8(b.stdout).unwrap();
    assert!(stdout.starts_with("case,ranks,threads"));
    assert!(stdout.contains("tc-tiny,2,3,4,"));

    let v = hbproxy(&["verify", "--out", other.to_str().unwrap(), "--golden", golden.to_str().unwrap()]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));

    // One flipped byte is a verification failure.
    let path = other.join("flowtec_1.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes[20] ^= 1;
    fs::write(&path, bytes).unwrap();
    let v = hbproxy(&["verify", "--out", other.to_str().unwrap(), "--golden", golden.to_str().unwrap()]);
    assert_eq!(code(&v), 1);
    assert!(String::from_utf8_lossy(&v.stdout).contains("differs flowtec_1.bin at byte 20"));

    fs::remove_file(other.join("restart.bin")).unwrap();
    let v = hbproxy(&["verify", "--out", other.to_str().unwrap(), "--golden", golden.to_str().unwrap()]);
    assert_eq!(code(&v), 1);
    assert!(String::from_utf8_lossy(&v.stdout).contains("missing restart.bin"));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&run_tiny(&out, &["--ranks", "3"])), 2, "more ranks than blocks");
    assert_eq!(code(&hbproxy(&["run", "--case", "no-such-case", "--ranks", "1", "--out", "x"])), 2);
    assert_eq!(code(&run_tiny(&out, &["--ranks", "1", "--io", "sideways"])), 2);

    let bad = tmp.path().join("bad.case");
    fs::write(&bad, "[case]\nnharms = 1\ncolour = red\n").unwrap();
    let r = hbproxy(&["run", "--case", bad.to_str().unwrap(), "--ranks", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

#[test]
fn predict_reports_counts() {
    let out = hbproxy(&["predict", "--case", "tc-tiny", "--machine", "xe6", "--exchange", "per-element"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("messages per direction  8\n"), "{text}");
    assert!(text.contains("bytes per exchange      768\n"), "{text}");

    let local =
        hbproxy(&["predict", "--case", "tc-tiny", "--machine", "bgq", "--exchange", "aggregated", "--ranks", "1"]);
    assert!(String::from_utf8(local.stdout).unwrap().contains("messages per exchange   0\n"));
}

#[test]
fn report_from_records() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, (ranks, threads)) in [("1", "1"), ("2", "1"), ("1", "2")].into_iter().enumerate() {
        let dir = tmp.path().join(k.to_string());
        assert_eq!(code(&run_tiny(&dir, &["--ranks", ranks, "--threads", threads])), 0);
        files.push(dir.join("record.csv").to_str().unwrap().to_string());
    }
    let mut args = vec!["report", "--machine", "b510", "--records"];
    args.extend(files.iter().map(String::as_str));
    let out = hbproxy(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "case,machine,ranks,threads,iterations,wall_s,msgs,bytes,collectives,write_ops,activations,em,eh,wh_per_iter"
    );
    assert_eq!(lines.count(), 3);

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "case,ranks,threads,iterations,wall_s,msgs,bytes,collectives,write_ops,activations\n").unwrap();
    assert_eq!(code(&hbproxy(&["report", "--records", empty.to_str().unwrap()])), 2);
}
