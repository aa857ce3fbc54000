use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfree"))
        .args(args)
        .env_remove("BFREE_THREADS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).expect("schema compiles")
}

fn assert_valid(name: &str, v: &Value) {
    let errs: Vec<String> = schema(name)
        .iter_errors(v)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errs.is_empty(), "{name}: {errs:?}\n{v:#}");
}

fn family_file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn admissible_example_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(&dir, "f46.json", r#"{"type": "explicit", "mods": [4, 6]}"#);
    let out = bfree(&[
        "admissible",
        "--family",
        f.to_str().unwrap(),
        "--block",
        "110011100110",
        "--search",
        "12",
        "--dominated",
        "--ther",
    ]);
    let v = json_of(&out);
    assert_valid("admissible", &v);
    assert_eq!(v["found"], false);
    assert_eq!(v["definitive"], true);
    assert_eq!(v["admissible"], true);
    assert_eq!(v["ther"]["status"], "unsatisfiable");
}

#[test]
fn zero_length_sieve_is_usage_error() {
    let out = bfree(&["sieve", "--mods", "4,6", "--start", "0", "--len", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_and_bad_family_are_usage_errors() {
    assert_eq!(
        bfree(&["sieve", "--mods", "4", "--len", "5", "--frobnicate"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(&dir, "bad.json", r#"{"type": "circle"}"#);
    assert_eq!(
        bfree(&["sieve", "--family", f.to_str().unwrap(), "--len", "5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bfree(&["sieve", "--family", "/nonexistent.json", "--len", "5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn computation_error_exits_one() {
    // lcm of 2..=60 needs more than 64 bits
    let mods: Vec<String> = (2..=60).map(|m| m.to_string()).collect();
    let out = bfree(&[
        "entropy",
        "--mods",
        &mods.join(","),
        "--ngrid",
        "4",
        "--lcm-bits",
        "8",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn raw_sieve_dump_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bits.raw");
    let out = bfree(&[
        "sieve",
        "--mods",
        "4,6",
        "--start",
        "-3",
        "--len",
        "20",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let v = json_of(&out);
    assert_valid("sieve", &v);
    let bytes = std::fs::read(&out_path).unwrap();
    assert_eq!(i64::from_le_bytes(bytes[0..8].try_into().unwrap()), -3);
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 20);
    assert_eq!(bytes.len(), 16 + 3);
    for i in 0..20usize {
        let n = -3 + i as i64;
        let expected = n.rem_euclid(4) != 0 && n.rem_euclid(6) != 0;
        assert_eq!(bytes[16 + i / 8] >> (i % 8) & 1 == 1, expected, "n = {n}");
    }
    assert_eq!(
        v["ones"].as_u64().unwrap(),
        (0..20)
            .filter(|i| bytes[16 + i / 8] >> (i % 8) & 1 == 1)
            .count() as u64
    );

    let json_path = dir.path().join("bits.json");
    bfree(&[
        "sieve",
        "--mods",
        "4,6",
        "--start",
        "-3",
        "--len",
        "20",
        "--out",
        json_path.to_str().unwrap(),
    ]);
    let j: Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(j["bits"], "11101110101011101110");
}

#[test]
fn every_subcommand_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let sq = family_file(
        &dir,
        "sq.json",
        r#"{"type": "squares_of_primes", "limit": 100}"#,
    );
    let taut = family_file(
        &dir,
        "taut.json",
        r#"{"type": "union", "parts": [{"type": "explicit", "mods": [3]},
            {"type": "scaled", "c": 2, "behrend": true, "base": {"type": "primes", "limit": 1000}}]}"#,
    );
    let sq = sq.to_str().unwrap();
    let taut = taut.to_str().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("sieve", vec!["sieve", "--family", sq, "--len", "1000"]),
        (
            "density",
            vec![
                "density",
                "--family",
                sq,
                "--kgrid",
                "100,1000",
                "--sample-window",
                "100000",
            ],
        ),
        (
            "density",
            vec!["density", "--mods", "4,6,9", "--kgrid", "10"],
        ),
        (
            "taut",
            vec![
                "taut",
                "--family",
                taut,
                "--reduce",
                "--verify-mirsky",
                "--window",
                "100000",
            ],
        ),
        ("taut", vec!["taut", "--mods", "4,6"]),
        ("taut", vec!["taut", "--mods", "2,4"]),
        (
            "admissible",
            vec![
                "admissible",
                "--family",
                sq,
                "--block",
                "1101",
                "--ther",
                "--search",
                "100",
            ],
        ),
        (
            "entropy",
            vec!["entropy", "--mods", "2,3", "--ngrid", "6,12"],
        ),
        (
            "entropy",
            vec![
                "entropy",
                "--mods",
                "4,6",
                "--ngrid",
                "5",
                "--mode",
                "deficiency",
                "--deficiency",
                "4:2",
            ],
        ),
        (
            "proximal",
            vec!["proximal", "--family", sq, "--scan-window", "100000"],
        ),
        ("proximal", vec!["proximal", "--mods", "4,6"]),
        (
            "toeplitz-verify",
            vec![
                "toeplitz", "--mods", "6,20,56", "--verify", "--dyadic", "3,5,7", "--window",
                "1:10000",
            ],
        ),
        (
            "toeplitz-verify",
            vec!["toeplitz", "--mods", "4,6", "--verify"],
        ),
        (
            "toeplitz-skeleton",
            vec!["toeplitz", "--mods", "4,6", "--window", "-1000:2000"],
        ),
        (
            "sample-mme",
            vec![
                "sample-mme",
                "--mods",
                "2,3",
                "--len",
                "1000",
                "--seed",
                "7",
            ],
        ),
        (
            "abundant",
            vec![
                "abundant",
                "--limit",
                "10000",
                "--generators",
                "--runs",
                "3",
                "--coprime-k",
                "1",
            ],
        ),
        (
            "rogers-fuzz",
            vec!["rogers-fuzz", "--instances", "500", "--seed", "3"],
        ),
    ];
    for (name, args) in cases {
        let v = json_of(&bfree(&args));
        assert_valid(name, &v);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec![
            "sample-mme",
            "--mods",
            "2,3",
            "--len",
            "5000",
            "--seed",
            "11",
        ],
        vec!["rogers-fuzz", "--instances", "300", "--seed", "5"],
        vec![
            "density", "--mods", "4,6,9", "--kgrid", "5,10", "--format", "csv",
        ],
        vec![
            "entropy", "--mods", "2,3", "--ngrid", "6,12", "--format", "plain",
        ],
    ] {
        let a = bfree(&args);
        let b = bfree(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn output_independent_of_thread_count() {
    let args = [
        "sieve", "--mods", "4,9,25", "--start", "-100000", "--len", "3000000",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_bfree"))
        .args(args)
        .env("BFREE_THREADS", "1")
        .output()
        .unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_bfree"))
        .args(args)
        .args(["--threads", "1"])
        .env("BFREE_THREADS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_bfree"))
        .args(args)
        .env("BFREE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn density_json_flag_and_plain_format() {
    let out = bfree(&[
        "density", "--mods", "4,6", "--kgrid", "10", "--format", "plain", "--json",
    ]);
    let v = json_of(&out);
    assert_eq!(v["delta_estimate"]["num"], "1");
    assert_eq!(v["delta_estimate"]["den"], "3");
    let plain = bfree(&[
        "density", "--mods", "4,6", "--kgrid", "10", "--format", "plain",
    ]);
    let text = String::from_utf8(plain.stdout).unwrap();
    assert!(text.contains("delta_estimate.num = 1\n") && text.contains("delta_estimate.den = 3\n"));
}
