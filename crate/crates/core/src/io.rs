//! Plain-text grid files.
//!
//! ```text
//! SVDGRID 1 <level> <N> <F>
//! v <x1> <x2> <x3>      (N lines, 17 significant digits)
//! t <i> <j> <k>         (F lines, 0-based, counterclockwise)
//! ```
//!
//! Only the primal grid is stored; the dual is rebuilt on load.

use std::io::{BufRead, Write};

use crate::error::FormatError;
use crate::geometry::UnitVector;
use crate::grid::DelaunayGrid;

const MAGIC: &str = "SVDGRID";
const VERSION: u32 = 1;

pub fn write_grid<W: Write>(grid: &DelaunayGrid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {VERSION} {} {} {}", grid.level(), grid.num_vertices(), grid.num_triangles())?;
    for v in grid.vertices() {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", v.x1(), v.x2(), v.x3())?;
    }
    for t in grid.triangles() {
        writeln!(out, "t {} {} {}", t[0], t[1], t[2])?;
    }
    out.flush()
}

pub fn grid_to_string(grid: &DelaunayGrid) -> String {
    let mut buf = Vec::new();
    write_grid(grid, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("grid files are ASCII")
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

fn fields<'a, const K: usize>(line: &'a str, tag: &str, lineno: usize) -> Result<[&'a str; K], FormatError> {
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(tag) {
        return Err(parse_err(lineno, format!("expected a '{tag}' record")));
    }
    let mut out = [""; K];
    for slot in out.iter_mut() {
        *slot = parts.next().ok_or_else(|| parse_err(lineno, "too few fields"))?;
    }
    if parts.next().is_some() {
        return Err(parse_err(lineno, "too many fields"));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T, FormatError> {
    s.parse().map_err(|_| parse_err(lineno, format!("cannot parse '{s}'")))
}

pub fn read_grid<R: BufRead>(input: R) -> Result<DelaunayGrid, FormatError> {
    let mut lines = input.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (lineno, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let [version, level, n, f] = fields::<4>(&header, MAGIC, lineno)?;
    if parse::<u32>(version, lineno)? != VERSION {
        return Err(parse_err(lineno, format!("unsupported version {version}")));
    }
    let level: u32 = parse(level, lineno)?;
    let n: usize = parse(n, lineno)?;
    let f: usize = parse(f, lineno)?;

    let mut vertices = Vec::with_capacity(n);
    let mut triangles = Vec::with_capacity(f);
    for _ in 0..n {
        let (lineno, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file"))?;
        let line = line?;
        let [a, b, c] = fields::<3>(&line, "v", lineno)?;
        let v = UnitVector::new(parse(a, lineno)?, parse(b, lineno)?, parse(c, lineno)?)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        vertices.push(v);
    }
    for _ in 0..f {
        let (lineno, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file"))?;
        let line = line?;
        let [a, b, c] = fields::<3>(&line, "t", lineno)?;
        triangles.push([parse(a, lineno)?, parse(b, lineno)?, parse(c, lineno)?]);
    }
    for (lineno, line) in lines {
        if !line?.trim().is_empty() {
            return Err(parse_err(lineno, "trailing data"));
        }
    }
    Ok(DelaunayGrid::from_parts(level, vertices, triangles)?)
}
