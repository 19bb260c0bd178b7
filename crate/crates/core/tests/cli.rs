use std::fs;
use std::path::Path;
use std::process::Command;

use ifsq::io::{parse_system_file, print_system_file, read_points_csv, write_points_csv};
use ifsq::system::{AffineMap2, Maps, MeasureMode, PointBuffer, Region, SystemSpec, WeightedPoint};
use proptest::prelude::*;

fn ifsq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ifsq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Reads a binary PGM: magic, width, height, maxval separated by single
/// whitespace runs, one whitespace byte, then raw samples.
fn read_pgm(bytes: &[u8]) -> (usize, usize, Vec<u8>) {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
    }
    pos += 1;
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    let (w, h) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    let data = bytes[pos..].to_vec();
    assert_eq!(data.len(), w * h);
    (w, h, data)
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let out = ifsq(&[
        "run",
        "--system",
        "maple_leaf",
        "--iters",
        "6",
        "--nmax",
        "8",
        "--points",
        path_str(&p("pts.csv")),
        "--stats",
        path_str(&p("stats.csv")),
        "--tree-dump",
        path_str(&p("tree.txt")),
        "--image",
        path_str(&p("img.pgm")),
        "--width",
        "64",
        "--height",
        "48",
        "--overlay-tree",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = summary.split_whitespace().collect();
    assert_eq!(fields.len(), 3);
    assert!(fields[0].starts_with("points=") && fields[1].starts_with("height="));
    assert!(fields[2].starts_with("time_s="));
    let n: usize = fields[0]["points=".len()..].parse().unwrap();

    let pts = read_points_csv(fs::read(p("pts.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(pts.len(), n);

    let stats = fs::read_to_string(p("stats.csv")).unwrap();
    let mut lines = stats.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,points,searches,comparisons,height,splits,overflow_inserts,out_of_region,time_s")
    );
    assert_eq!(lines.count(), 6);

    let tree = fs::read_to_string(p("tree.txt")).unwrap();
    let root: Vec<&str> = tree.lines().next().unwrap().split(' ').collect();
    assert_eq!(root[..2], ["0", "R"]);
    assert_eq!(root[6].parse::<usize>().unwrap(), n);

    let (w, h, data) = read_pgm(&fs::read(p("img.pgm")).unwrap());
    assert_eq!((w, h), (64, 48));
    assert!(data.contains(&255) && data.contains(&128) && data.contains(&0));
}

#[test]
fn points_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = ifsq(&["run", "--system", "example3", "--iters", "3", "--points", path_str(path)]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn print_output_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["maple_leaf", "barnsley_fern", "example3", "example4"] {
        let out = ifsq(&["print", "--system", name]);
        assert_eq!(out.status.code(), Some(0));
        let file = dir.path().join(format!("{name}.sys"));
        fs::write(&file, &out.stdout).unwrap();
        let again = ifsq(&["print", "--system", path_str(&file)]);
        assert_eq!(again.stdout, out.stdout);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sys");
    fs::write(&bad, "kind ifs\nmode idempotent\nregion 0 1 0 1\nmap 1 2 3\n").unwrap();
    assert_eq!(ifsq(&["run", "--system", path_str(&bad), "--iters", "1"]).status.code(), Some(2));

    let invalid = dir.path().join("invalid.sys");
    fs::write(&invalid, "kind ifs\nmode idempotent\nregion 0 1 0 1\nmap 0.5 0 0 0 0.5 0 -1\n").unwrap();
    assert_eq!(ifsq(&["run", "--system", path_str(&invalid), "--iters", "1"]).status.code(), Some(2));

    assert_eq!(ifsq(&["run", "--iters", "1"]).status.code(), Some(1));
    assert_eq!(
        ifsq(&["run", "--system", "maple_leaf", "--iters", "1", "--engine", "kd"]).status.code(),
        Some(1)
    );

    let out = ifsq(&["run", "--system", "maple_leaf", "--iters", "3", "--max-points", "10"]);
    assert_eq!(out.status.code(), Some(3));

    let unwritable = dir.path().join("missing").join("pts.csv");
    let out = ifsq(&["run", "--system", "maple_leaf", "--iters", "1", "--points", path_str(&unwritable)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sweep.csv");
    let out = ifsq(&[
        "sweep",
        "--system",
        "barnsley_fern",
        "--iters",
        "6",
        "--nmax-list",
        "16,4",
        "--repetitions",
        "1",
        "--linear-baseline",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("# linear_baseline_s="));
    assert_eq!(lines[1], "nmax,height,points,time_s,comparisons");
    let rows: Vec<Vec<&str>> = lines[2..].iter().map(|l| l.split(',').collect()).collect();
    assert_eq!((rows[0][0], rows[1][0]), ("4", "16"));
    assert_eq!(rows[0][2], rows[1][2]);
    assert!(rows[0][1].parse::<u32>().unwrap() >= rows[1][1].parse::<u32>().unwrap());
}

fn ifs_spec() -> impl Strategy<Value = SystemSpec> {
    let coeff = -1.0f64..1.0;
    let map = (coeff.clone(), coeff.clone(), coeff.clone(), coeff.clone(), coeff.clone(), coeff, -9.0f64..0.0)
        .prop_map(|(a11, a12, b1, a21, a22, b2, weight)| AffineMap2 { a11, a12, b1, a21, a22, b2, weight });
    (prop::collection::vec(map, 1..6), 0.0f64..1.0, 0.0f64..1.0).prop_map(|(mut maps, x, y)| {
        maps[0].weight = 0.0;
        SystemSpec {
            mode: MeasureMode::Idempotent,
            region: Region::UNIT,
            maps: Maps::Ifs(maps),
            initial: (x, y),
            initial_weight: 0.0,
        }
    })
}

proptest! {
    #[test]
    fn system_files_round_trip(spec in ifs_spec()) {
        prop_assert_eq!(parse_system_file(&print_system_file(&spec)).unwrap(), spec);
    }

    #[test]
    fn points_csv_round_trips_bits(pts in prop::collection::vec((any::<f64>(), any::<f64>(), any::<f64>()), 0..50)) {
        let pts: Vec<_> = pts.into_iter().filter(|(x, y, p)| !x.is_nan() && !y.is_nan() && !p.is_nan()).collect();
        let buffer = PointBuffer::from_points(pts.iter().map(|&(x, y, p)| WeightedPoint::new(x, y, p)).collect());
        let mut out = Vec::new();
        write_points_csv(&buffer, &mut out).unwrap();
        let back = read_points_csv(out.as_slice()).unwrap();
        prop_assert_eq!(back.len(), buffer.len());
        for (a, b) in back.iter().zip(buffer.iter()) {
            prop_assert_eq!((a.x.to_bits(), a.y.to_bits(), a.p.to_bits()), (b.x.to_bits(), b.y.to_bits(), b.p.to_bits()));
        }
    }
}
