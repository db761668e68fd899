//! OFF-style text format.
//!
//! ```text
//! NV NF
//! x y z            (NV lines)
//! n i1 ... in      (NF lines, 0-based, counter-clockwise about the outward normal)
//! ```
//!
//! An optional leading `OFF` keyword line, a third count on the header line,
//! blank lines and `#` comments are accepted on input. Coordinates are written
//! with 17 significant digits, which round-trips every `f64` exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::polytope::{Polyhedron, PolytopeError, Vec3};

#[derive(Debug, Error)]
pub enum OffError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid polyhedron: {0}")]
    Invalid(#[from] PolytopeError),
}

fn parse_err(line: usize, message: impl Into<String>) -> OffError {
    OffError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_off(text: &str) -> Result<Polyhedron, OffError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (mut line_no, mut header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header == "OFF" {
        (line_no, header) = lines
            .next()
            .ok_or_else(|| parse_err(line_no + 1, "missing counts"))?;
    }
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(line_no, format!("bad count: {e}")))?;
    let (nv, nf) = match counts[..] {
        [nv, nf] | [nv, nf, _] => (nv, nf),
        _ => return Err(parse_err(line_no, "expected `NV NF`")),
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line_no, l) = lines
            .next()
            .ok_or_else(|| parse_err(line_no, "unexpected end of file in vertex list"))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(line_no, format!("bad coordinate: {e}")))?;
        if xyz.len() != 3 {
            return Err(parse_err(
                line_no,
                format!("expected 3 coordinates, got {}", xyz.len()),
            ));
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line_no, l) = lines
            .next()
            .ok_or_else(|| parse_err(line_no, "unexpected end of file in face list"))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(line_no, format!("bad face index: {e}")))?;
        let (&n, rest) = ids
            .split_first()
            .ok_or_else(|| parse_err(line_no, "empty face line"))?;
        if rest.len() != n {
            return Err(parse_err(
                line_no,
                format!("face declares {n} vertices but lists {}", rest.len()),
            ));
        }
        if let Some(&bad) = rest.iter().find(|&&i| i >= nv) {
            return Err(parse_err(
                line_no,
                format!("vertex index {bad} out of range (NV = {nv})"),
            ));
        }
        faces.push(rest.to_vec());
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(line_no, "trailing data after face list"));
    }

    Ok(Polyhedron::build(vertices, faces)?)
}

pub fn load_off(path: impl AsRef<Path>) -> Result<Polyhedron, OffError> {
    parse_off(&fs::read_to_string(path)?)
}

pub fn write_off(p: &Polyhedron, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{} {}", p.vertex_count(), p.face_count())?;
    for v in p.vertices() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for face in p.faces() {
        write!(out, "{}", face.len())?;
        for i in face {
            write!(out, " {i}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_off(p: &Polyhedron, path: impl AsRef<Path>) -> Result<(), OffError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_off(p, &mut file)?;
    file.flush()?;
    Ok(())
}
