//! Shape ingest (CSV polylines, OBJ, OFF) and export (CSV, OBJ, legacy VTK).
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use shellmatch_core::{AdaptiveGrid, Deformation, DiscreteShape, Vector};
use tempfile::NamedTempFile;

use crate::Error;

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let io = |e| Error::Io(path.to_path_buf(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: msg.into() }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Reads a closed shape: `.csv` polylines for d = 2, `.obj` (polylines via
/// `l` records in 2D, triangles via `f` in 3D) and `.off` for d = 3.
pub fn read_shape<const D: usize>(path: &Path) -> Result<DiscreteShape<D>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    let (vertices, elements) = match extension(path).as_str() {
        "csv" if D == 2 => {
            let v = parse_csv_points::<D>(path, &text)?;
            let n = v.len();
            let e = (0..n).map(|i| element::<D>(&[i, (i + 1) % n])).collect();
            (v, e)
        }
        "obj" => parse_obj::<D>(path, &text)?,
        "off" if D == 3 => parse_off::<D>(path, &text)?,
        ext => return Err(Error::Format(format!("cannot read .{ext} files as {D}D shapes"))),
    };
    DiscreteShape::new(vertices, elements).map_err(|e| Error::Shape(path.to_path_buf(), e))
}

fn element<const D: usize>(idx: &[usize]) -> [usize; D] {
    core::array::from_fn(|k| idx[k])
}

fn point<const D: usize>(path: &Path, line: usize, fields: &[&str]) -> Result<Vector<D>, Error> {
    if fields.len() < D {
        return Err(parse_err(path, line, format!("expected {D} coordinates")));
    }
    let mut p = [0.0; D];
    for (k, f) in fields.iter().take(D).enumerate() {
        p[k] = f.trim().parse().map_err(|_| parse_err(path, line, format!("bad number {f:?}")))?;
    }
    Ok(Vector(p))
}

fn parse_csv_points<const D: usize>(path: &Path, text: &str) -> Result<Vec<Vector<D>>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let fields: Vec<&str> = record.iter().collect();
        if i == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        points.push(point(path, i + 1, &fields)?);
    }
    Ok(points)
}

type Mesh<const D: usize> = (Vec<Vector<D>>, Vec<[usize; D]>);

fn parse_obj<const D: usize>(path: &Path, text: &str) -> Result<Mesh<D>, Error> {
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut fields = line.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        let index = |s: &&str| -> Result<usize, Error> {
            let head = s.split('/').next().unwrap_or("");
            let k: i64 = head.parse().map_err(|_| parse_err(path, i + 1, format!("bad index {s:?}")))?;
            let n = vertices.len() as i64;
            let k = if k < 0 { n + k } else { k - 1 };
            if k < 0 || k >= n {
                return Err(parse_err(path, i + 1, format!("index {s} out of range")));
            }
            Ok(k as usize)
        };
        match tag {
            "v" => vertices.push(point::<D>(path, i + 1, &rest)?),
            "l" if D == 2 => {
                let idx = rest.iter().map(index).collect::<Result<Vec<_>, _>>()?;
                for w in idx.windows(2) {
                    elements.push(element::<D>(w));
                }
            }
            "f" if D == 3 => {
                let idx = rest.iter().map(index).collect::<Result<Vec<_>, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(path, i + 1, "face with fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    elements.push(element::<D>(&[idx[0], idx[k], idx[k + 1]]));
                }
            }
            _ => {}
        }
    }
    Ok((vertices, elements))
}

fn parse_off<const D: usize>(path: &Path, text: &str) -> Result<Mesh<D>, Error> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(path, 0, format!("missing {what}")));
    let (n, header) = next("header")?;
    let counts_line = if header == "OFF" {
        next("counts")?
    } else if let Some(rest) = header.strip_prefix("OFF") {
        (n, rest.trim())
    } else {
        return Err(parse_err(path, n, "expected OFF header"));
    };
    let counts: Vec<usize> = counts_line
        .1
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(path, counts_line.0, "bad count")))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(parse_err(path, counts_line.0, "expected vertex and face counts"));
    }
    let mut vertices = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let (line, text) = next("vertex")?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        vertices.push(point::<D>(path, line, &fields)?);
    }
    let mut elements = Vec::with_capacity(counts[1]);
    for _ in 0..counts[1] {
        let (line, text) = next("face")?;
        let idx: Vec<usize> = text
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(path, line, "bad index")))
            .collect::<Result<_, _>>()?;
        let k = *idx.first().ok_or_else(|| parse_err(path, line, "empty face"))?;
        if k < 3 || idx.len() < k + 1 {
            return Err(parse_err(path, line, "malformed face"));
        }
        if let Some(bad) = idx[1..=k].iter().find(|&&v| v >= vertices.len()) {
            return Err(parse_err(path, line, format!("index {bad} out of range")));
        }
        for j in 2..k {
            elements.push(element::<D>(&[idx[1], idx[j], idx[j + 1]]));
        }
    }
    Ok((vertices, elements))
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{x:?}")
}

/// CSV of the polygon vertices in order (d = 2).
pub fn shape_csv<const D: usize>(shape: &DiscreteShape<D>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = ["x", "y", "z"][..D].to_vec();
    writer.write_record(&header).expect("in-memory write");
    for v in ordered_polyline(shape) {
        writer.write_record(v.0.iter().map(|c| fmt_f64(*c))).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory write")).expect("utf8")
}

/// Vertices of a closed polygon in traversal order.
fn ordered_polyline<const D: usize>(shape: &DiscreteShape<D>) -> Vec<Vector<D>> {
    let mut next = vec![usize::MAX; shape.vertices().len()];
    for e in shape.elements() {
        next[e[0]] = e[1];
    }
    let start = shape.elements()[0][0];
    let mut out = vec![shape.vertices()[start]];
    let mut v = next[start];
    while v != start && v != usize::MAX && out.len() <= shape.vertices().len() {
        out.push(shape.vertices()[v]);
        v = next[v];
    }
    out
}

/// Wavefront OBJ: `l` records in 2D, `f` records in 3D.
pub fn shape_obj<const D: usize>(shape: &DiscreteShape<D>) -> String {
    let mut s = String::new();
    for v in shape.vertices() {
        s.push('v');
        for c in v.0 {
            let _ = write!(s, " {}", fmt_f64(c));
        }
        s.push('\n');
    }
    let tag = if D == 2 { 'l' } else { 'f' };
    for e in shape.elements() {
        s.push(tag);
        for i in e {
            let _ = write!(s, " {}", i + 1);
        }
        s.push('\n');
    }
    s
}

pub fn shape_off<const D: usize>(shape: &DiscreteShape<D>) -> String {
    let mut s = format!("OFF\n{} {} 0\n", shape.vertices().len(), shape.elements().len());
    for v in shape.vertices() {
        let coords: Vec<String> = v.0.iter().map(|c| fmt_f64(*c)).collect();
        s.push_str(&coords.join(" "));
        s.push('\n');
    }
    for e in shape.elements() {
        let _ = write!(s, "{D}");
        for i in e {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    s
}

fn vtk_point<const D: usize>(s: &mut String, v: &Vector<D>) {
    let z = if D == 3 { v[2] } else { 0.0 };
    let _ = writeln!(s, "{} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(z));
}

/// Legacy ASCII VTK polydata: lines in 2D, triangles in 3D.
pub fn shape_vtk<const D: usize>(shape: &DiscreteShape<D>, title: &str) -> String {
    let mut s = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {} double", shape.vertices().len());
    for v in shape.vertices() {
        vtk_point(&mut s, v);
    }
    let n = shape.elements().len();
    let _ = writeln!(s, "{} {} {}", if D == 2 { "LINES" } else { "POLYGONS" }, n, n * (D + 1));
    for e in shape.elements() {
        let _ = write!(s, "{D}");
        for i in e {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    s
}

/// Legacy ASCII VTK unstructured grid of `phi`'s simplices at the deformed
/// positions, with the displacement and per-simplex `det Dφ`.
pub fn grid_vtk<const D: usize>(phi: &Deformation<D>, title: &str) -> String {
    let grid: &AdaptiveGrid<D> = phi.grid();
    let mut s = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", grid.num_vertices());
    for v in phi.values() {
        vtk_point(&mut s, v);
    }
    let nt = grid.num_simplices();
    let _ = writeln!(s, "CELLS {} {}", nt, nt * (D + 2));
    for t in 0..nt {
        let _ = write!(s, "{}", D + 1);
        for v in grid.simplex(t) {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    let cell_type = if D == 2 { "5" } else { "10" };
    for _ in 0..nt {
        s.push_str(cell_type);
        s.push('\n');
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", grid.num_vertices());
    for (v, y) in phi.values().iter().enumerate() {
        vtk_point(&mut s, &(*y - grid.vertex(v)));
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS det double 1\nLOOKUP_TABLE default");
    for t in 0..nt {
        let _ = writeln!(s, "{}", fmt_f64(phi.jacobian(t).det()));
    }
    s
}

/// `shape` with every vertex mapped through `phi`.
pub fn deformed_shape<const D: usize>(shape: &DiscreteShape<D>, phi: &Deformation<D>) -> Result<DiscreteShape<D>, Error> {
    shape.map_vertices(|x| phi.evaluate(x)).map_err(|e| Error::Shape("<deformed>".into(), e))
}

/// Writes the deformed shape next to `stem`: CSV (2D) or OBJ (3D), plus a
/// VTK copy. Returns the written paths.
pub fn export_deformed<const D: usize>(
    shape: &DiscreteShape<D>,
    phi: &Deformation<D>,
    stem: &Path,
) -> Result<Vec<std::path::PathBuf>, Error> {
    let out = deformed_shape(shape, phi)?;
    let (ext, text) = if D == 2 { ("csv", shape_csv(&out)) } else { ("obj", shape_obj(&out)) };
    let main = stem.with_extension(ext);
    let vtk = stem.with_extension("vtk");
    write_atomic(&main, text.as_bytes())?;
    write_atomic(&vtk, shape_vtk(&out, "deformed shape").as_bytes())?;
    Ok(vec![main, vtk])
}
