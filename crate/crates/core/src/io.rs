//! Text formats: system definition files, point CSV dumps and per-iteration
//! statistics.
//!
//! A system file is line oriented. Blank lines and lines starting with `#`
//! are ignored; every other line is a directive:
//!
//! ```text
//! kind ifs|gifs
//! mode classic|idempotent
//! region a b c d
//! initial x0 y0                 (optional, defaults to the region center)
//! map a11 a12 b1 a21 a22 b2 w   (IFS)
//! map a11 a12 a13 a14 b1 a21 a22 a23 a24 b2 w   (GIFS)
//! ```

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::markov::RunStats;
use crate::system::{
    validate_system, AffineMap2, AffineMap4, Maps, MeasureMode, PointBuffer, Region, SystemKind,
    SystemSpec, ValidationErrors, WeightedPoint,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("line {line}: map needs {expected} numbers for kind {kind}, found {found}")]
    WrongArity {
        line: usize,
        kind: SystemKind,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate `{directive}` directive")]
    DuplicateDirective { line: usize, directive: &'static str },
    #[error("missing `{0}` directive")]
    MissingDirective(&'static str),
    #[error(transparent)]
    Invalid(#[from] ValidationErrors),
}

/// The bundled example systems, by name.
pub const BUNDLED_SYSTEMS: &[(&str, &str)] = &[
    ("maple_leaf", include_str!("../systems/maple_leaf.sys")),
    ("barnsley_fern", include_str!("../systems/barnsley_fern.sys")),
    ("example3", include_str!("../systems/example3.sys")),
    ("example4", include_str!("../systems/example4.sys")),
];

pub fn bundled_system_text(name: &str) -> Option<&'static str> {
    BUNDLED_SYSTEMS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Parses and validates a bundled system. Panics on unknown names.
pub fn bundled_system(name: &str) -> SystemSpec {
    let text = bundled_system_text(name).unwrap_or_else(|| panic!("no bundled system `{name}`"));
    parse_system_file(text).expect("bundled systems are valid")
}

fn parse_numbers(line: usize, fields: &[&str]) -> Result<Vec<f64>, ParseError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ParseError::SyntaxError {
                    line,
                    message: format!("`{f}` is not a finite number"),
                })
        })
        .collect()
}

fn set_once<T>(
    slot: &mut Option<T>,
    value: T,
    line: usize,
    directive: &'static str,
) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::DuplicateDirective { line, directive });
    }
    *slot = Some(value);
    Ok(())
}

fn exact_arity(line: usize, directive: &str, nums: &[f64], n: usize) -> Result<(), ParseError> {
    if nums.len() != n {
        return Err(ParseError::SyntaxError {
            line,
            message: format!("`{directive}` takes {n} numbers, found {}", nums.len()),
        });
    }
    Ok(())
}

/// Parses a system file and runs [`validate_system`] on the result.
pub fn parse_system_file(text: &str) -> Result<SystemSpec, ParseError> {
    let mut kind = None;
    let mut mode = None;
    let mut region = None;
    let mut initial = None;
    // (line, coefficients) kept until the kind is known.
    let mut maps: Vec<(usize, Vec<f64>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let directive = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        match directive {
            "kind" => {
                let k = match rest.as_slice() {
                    ["ifs"] => SystemKind::Ifs,
                    ["gifs"] => SystemKind::Gifs,
                    _ => {
                        return Err(ParseError::SyntaxError {
                            line,
                            message: "expected `kind ifs` or `kind gifs`".into(),
                        })
                    }
                };
                set_once(&mut kind, k, line, "kind")?;
            }
            "mode" => {
                let m = match rest.as_slice() {
                    ["classic"] => MeasureMode::Classic,
                    ["idempotent"] => MeasureMode::Idempotent,
                    _ => {
                        return Err(ParseError::SyntaxError {
                            line,
                            message: "expected `mode classic` or `mode idempotent`".into(),
                        })
                    }
                };
                set_once(&mut mode, m, line, "mode")?;
            }
            "region" => {
                let n = parse_numbers(line, &rest)?;
                exact_arity(line, "region", &n, 4)?;
                set_once(&mut region, Region::new(n[0], n[1], n[2], n[3]), line, "region")?;
            }
            "initial" => {
                let n = parse_numbers(line, &rest)?;
                exact_arity(line, "initial", &n, 2)?;
                set_once(&mut initial, (n[0], n[1]), line, "initial")?;
            }
            "map" => maps.push((line, parse_numbers(line, &rest)?)),
            other => {
                return Err(ParseError::SyntaxError {
                    line,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
    }

    let kind = kind.ok_or(ParseError::MissingDirective("kind"))?;
    let mode = mode.ok_or(ParseError::MissingDirective("mode"))?;
    let region = region.ok_or(ParseError::MissingDirective("region"))?;
    if maps.is_empty() {
        return Err(ParseError::MissingDirective("map"));
    }

    let expected = match kind {
        SystemKind::Ifs => 7,
        SystemKind::Gifs => 11,
    };
    if let Some((line, c)) = maps.iter().find(|(_, c)| c.len() != expected) {
        return Err(ParseError::WrongArity {
            line: *line,
            kind,
            expected,
            found: c.len(),
        });
    }
    let maps = match kind {
        SystemKind::Ifs => Maps::Ifs(
            maps.iter()
                .map(|(_, c)| AffineMap2 {
                    a11: c[0],
                    a12: c[1],
                    b1: c[2],
                    a21: c[3],
                    a22: c[4],
                    b2: c[5],
                    weight: c[6],
                })
                .collect(),
        ),
        SystemKind::Gifs => Maps::Gifs(
            maps.iter()
                .map(|(_, c)| AffineMap4 {
                    a11: c[0],
                    a12: c[1],
                    a13: c[2],
                    a14: c[3],
                    b1: c[4],
                    a21: c[5],
                    a22: c[6],
                    a23: c[7],
                    a24: c[8],
                    b2: c[9],
                    weight: c[10],
                })
                .collect(),
        ),
    };

    let spec = SystemSpec {
        mode,
        initial: initial.unwrap_or_else(|| region.center()),
        initial_weight: mode.initial_weight(),
        region,
        maps,
    };
    Ok(validate_system(spec)?)
}

/// Inverse of [`parse_system_file`]. Numbers use the shortest round-trip
/// representation, so parsing the output gives back an identical spec.
pub fn print_system_file(spec: &SystemSpec) -> String {
    let mut out = String::new();
    let r = spec.region;
    let _ = writeln!(out, "kind {}", spec.kind());
    let _ = writeln!(out, "mode {}", spec.mode);
    let _ = writeln!(out, "region {:?} {:?} {:?} {:?}", r.a, r.b, r.c, r.d);
    let _ = writeln!(out, "initial {:?} {:?}", spec.initial.0, spec.initial.1);
    match &spec.maps {
        Maps::Ifs(maps) => {
            for m in maps {
                let _ = writeln!(
                    out,
                    "map {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
                    m.a11, m.a12, m.b1, m.a21, m.a22, m.b2, m.weight
                );
            }
        }
        Maps::Gifs(maps) => {
            for m in maps {
                let _ = writeln!(
                    out,
                    "map {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
                    m.a11, m.a12, m.a13, m.a14, m.b1, m.a21, m.a22, m.a23, m.a24, m.b2, m.weight
                );
            }
        }
    }
    out
}

/// Writes `x,y,p` rows in buffer order, 17 significant digits each.
pub fn write_points_csv<W: Write>(buffer: &PointBuffer, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "x,y,p")?;
    for pt in buffer {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", pt.x, pt.y, pt.p)?;
    }
    out.flush()
}

pub fn read_points_csv<R: BufRead>(input: R) -> io::Result<PointBuffer> {
    let bad = |line: usize, msg: &str| {
        io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
    };
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "x,y,p" {
        return Err(bad(1, "expected header `x,y,p`"));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i + 2, "expected three fields"));
        }
        let mut v = [0.0; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| bad(i + 2, "not a number"))?;
        }
        points.push(WeightedPoint::new(v[0], v[1], v[2]));
    }
    Ok(PointBuffer::from_points(points))
}

pub fn write_stats_csv<W: Write>(stats: &RunStats, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(
        out,
        "iteration,points,searches,comparisons,height,splits,overflow_inserts,out_of_region,time_s"
    )?;
    for s in &stats.iterations {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6}",
            s.iteration,
            s.points,
            s.searches,
            s.comparisons,
            s.tree_height,
            s.split_count,
            s.overflow_inserts,
            s.out_of_region,
            s.wall_time.as_secs_f64()
        )?;
    }
    out.flush()
}
