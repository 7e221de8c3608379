//! ASCII PLY and XYZ/CSV point-cloud files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::linalg3::Vec3;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply_to(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

/// Coordinates are written with 17 significant digits so reading them back
/// reproduces the same doubles.
pub fn write_ply_to<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z"] {
        writeln!(w, "property double {name}")?;
    }
    if cloud.normals().is_some() {
        for name in ["nx", "ny", "nz"] {
            writeln!(w, "property double {name}")?;
        }
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            write!(w, " {:.16e} {:.16e} {:.16e}", n[0], n[1], n[2])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_ply_from(BufReader::new(File::open(path)?))
}

pub fn read_ply_from<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let next = |lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((n, Ok(l))) => Ok(Some((n, l))),
            Some((_, Err(e))) => Err(Error::Io(e)),
            None => Ok(None),
        }
    };

    match next(&mut lines)? {
        Some((_, l)) if l.trim() == "ply" => {}
        Some((n, _)) => return Err(parse_err(n, "missing 'ply' magic")),
        None => return Err(parse_err(1, "empty file")),
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((n, line)) = next(&mut lines)? else {
            return Err(parse_err(0, "header not terminated by end_header"));
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", other, ..] => return Err(Error::UnsupportedPly(format!("format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| parse_err(n, format!("bad element count {count:?}")))?;
                if *name == "vertex" {
                    vertex_count = Some(count);
                    in_vertex = true;
                } else if count > 0 {
                    return Err(Error::UnsupportedPly(format!("element {name}")));
                } else {
                    in_vertex = false;
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::UnsupportedPly("list property on vertex".into()));
            }
            ["property", _ty, name] => {
                if in_vertex {
                    props.push((*name).to_string());
                }
            }
            ["property", ..] => {}
            _ => return Err(parse_err(n, format!("unrecognized header line {line:?}"))),
        }
    }
    if !saw_format {
        return Err(parse_err(0, "missing format line"));
    }
    let count = vertex_count.ok_or_else(|| parse_err(0, "no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
        return Err(parse_err(0, "vertex element lacks x, y, z"));
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };

    let mut points: Vec<Point3> = Vec::with_capacity(count);
    let mut normals: Vec<Vec3> = Vec::new();
    while points.len() < count {
        let Some((n, line)) = next(&mut lines)? else {
            return Err(parse_err(0, format!("expected {count} vertices, found {}", points.len())));
        };
        if line.trim().is_empty() {
            continue;
        }
        let values = parse_numbers(n, line.split_whitespace())?;
        if values.len() != props.len() {
            return Err(parse_err(n, format!("expected {} values, found {}", props.len(), values.len())));
        }
        points.push([values[x], values[y], values[z]]);
        if let Some([a, b, c]) = normal_cols {
            normals.push([values[a], values[b], values[c]]);
        }
    }
    build(points, normal_cols.map(|_| normals))
}

fn parse_numbers<'a>(line: usize, fields: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    fields
        .map(|f| f.trim().parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {f:?}"))))
        .collect()
}

fn build(points: Vec<Point3>, normals: Option<Vec<Vec3>>) -> Result<PointCloud> {
    match normals {
        Some(ns) => PointCloud::with_normals(points, ns),
        None => PointCloud::new(points),
    }
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_xyz_to(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

/// One point per line, space separated; six columns when normals are present.
pub fn write_xyz_to<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<()> {
    for (i, p) in cloud.points().iter().enumerate() {
        write!(w, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            write!(w, " {:.16e} {:.16e} {:.16e}", n[0], n[1], n[2])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_xyz_from(File::open(path)?)
}

/// Accepts whitespace or comma separators and `#` comment lines. Every data
/// line must have the same number of columns, 3 or 6.
pub fn read_xyz_from<R: Read>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let n = i + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields = t.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty());
        let v = parse_numbers(n, fields)?;
        if v.len() != 3 && v.len() != 6 {
            return Err(parse_err(n, format!("expected 3 or 6 columns, found {}", v.len())));
        }
        match width {
            None => width = Some(v.len()),
            Some(w) if w != v.len() => {
                return Err(parse_err(n, format!("expected {w} columns, found {}", v.len())));
            }
            _ => {}
        }
        points.push([v[0], v[1], v[2]]);
        if v.len() == 6 {
            normals.push([v[3], v[4], v[5]]);
        }
    }
    build(points, (width == Some(6)).then_some(normals))
}
