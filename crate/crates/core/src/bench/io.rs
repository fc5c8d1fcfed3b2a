//! Point-cloud and pose file I/O.
//!
//! Clouds are read from PLY (ascii or binary little-endian, 32-bit float
//! coordinates, optional 32-bit float normals) or from whitespace-separated
//! XYZ text with three or six columns per line. Poses are 4x4 row-major
//! matrices, one row per line. Sensor origins have no slot in either cloud
//! format and are not serialized.

use super::BenchError;
use crate::geom::{PointCloud, RigidTransform};
use nalgebra::Vector3;
use std::fmt::Write as _;
use std::path::Path;

/// On-disk encodings understood by [`save_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLittleEndian,
    Xyz,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Loads a cloud, detecting the container from the content: a file whose
/// first line is `ply` is parsed as PLY, anything else as XYZ text.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud, BenchError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let first_line_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .unwrap_or(bytes.len());
    let first_line = trim_line(&bytes[..first_line_end]);
    if first_line == b"ply" {
        load_ply(path, &bytes)
    } else {
        load_xyz(path, &bytes)
    }
}

fn trim_line(raw: &[u8]) -> &[u8] {
    let mut line = raw;
    while let Some((&last, rest)) = line.split_last() {
        if last == b'\r' || last == b' ' || last == b'\t' {
            line = rest;
        } else {
            break;
        }
    }
    line
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct PlyProperty {
    name: String,
    ty: String,
    is_list: bool,
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
    header_line: usize,
}

fn scalar_size(ty: &str) -> Option<usize> {
    match ty {
        "char" | "int8" | "uchar" | "uint8" => Some(1),
        "short" | "int16" | "ushort" | "uint16" => Some(2),
        "int" | "int32" | "uint" | "uint32" | "float" | "float32" => Some(4),
        "double" | "float64" => Some(8),
        _ => None,
    }
}

fn is_float32(ty: &str) -> bool {
    matches!(ty, "float" | "float32")
}

const COORD_NAMES: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

struct PlyHeader {
    binary: bool,
    elements: Vec<PlyElement>,
    data_start: usize,
    lines_consumed: usize,
}

fn parse_ply_header(path: &Path, bytes: &[u8]) -> Result<PlyHeader, BenchError> {
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut binary: Option<bool> = None;
    let mut cursor = 0usize;
    let mut line_no = 0usize;
    let mut saw_magic = false;
    loop {
        if cursor >= bytes.len() {
            return Err(parse_err(
                path,
                line_no,
                "header ended before 'end_header'",
            ));
        }
        let line_end = bytes[cursor..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| cursor + p)
            .unwrap_or(bytes.len());
        let raw = trim_line(&bytes[cursor..line_end]);
        line_no += 1;
        let next_cursor = (line_end + 1).min(bytes.len());
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(path, line_no, "header is not valid UTF-8"))?;
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or("");
        match keyword {
            "ply" if !saw_magic => saw_magic = true,
            "" | "comment" | "obj_info" => {}
            "format" => {
                let kind = tokens.next().unwrap_or("");
                match kind {
                    "ascii" => binary = Some(false),
                    "binary_little_endian" => binary = Some(true),
                    other => {
                        return Err(BenchError::UnknownFormat(format!(
                            "unsupported encoding '{other}' (only ascii and binary_little_endian are readable)"
                        )))
                    }
                }
            }
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, line_no, "element declaration is missing a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| {
                        parse_err(path, line_no, "element declaration needs a non-negative count")
                    })?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                    header_line: line_no,
                });
            }
            "property" => {
                let element = elements.last_mut().ok_or_else(|| {
                    parse_err(path, line_no, "property declared before any element")
                })?;
                let first = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, line_no, "property declaration is missing a type"))?;
                if first == "list" {
                    // list <count type> <value type> <name>
                    let _count_ty = tokens.next();
                    let _value_ty = tokens.next();
                    let name = tokens.next().unwrap_or("?");
                    element.props.push(PlyProperty {
                        name: name.to_string(),
                        ty: "list".to_string(),
                        is_list: true,
                    });
                } else {
                    let name = tokens.next().ok_or_else(|| {
                        parse_err(path, line_no, "property declaration is missing a name")
                    })?;
                    if scalar_size(first).is_none() {
                        return Err(BenchError::UnknownFormat(format!(
                            "unsupported property type '{first}'"
                        )));
                    }
                    element.props.push(PlyProperty {
                        name: name.to_string(),
                        ty: first.to_string(),
                        is_list: false,
                    });
                }
            }
            "end_header" => {
                let binary = binary.ok_or_else(|| {
                    parse_err(path, line_no, "header has no 'format' declaration")
                })?;
                return Ok(PlyHeader {
                    binary,
                    elements,
                    data_start: next_cursor,
                    lines_consumed: line_no,
                });
            }
            other => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unrecognized header keyword '{other}'"),
                ));
            }
        }
        cursor = next_cursor;
    }
}

/// Byte offsets of the six coordinate/normal properties within a vertex row,
/// plus the row stride. `None` entries are absent optional properties.
struct VertexLayout {
    /// Property index (ascii) or byte offset (binary) per coordinate name.
    slots: [Option<usize>; 6],
    stride: usize,
    n_props: usize,
    has_normals: bool,
}

fn vertex_layout(path: &Path, element: &PlyElement, binary: bool) -> Result<VertexLayout, BenchError> {
    let mut slots = [None; 6];
    let mut offset = 0usize;
    for (idx, prop) in element.props.iter().enumerate() {
        if prop.is_list {
            return Err(BenchError::UnknownFormat(format!(
                "vertex property '{}' is a list; vertex rows must be fixed-size",
                prop.name
            )));
        }
        if let Some(slot) = COORD_NAMES.iter().position(|&n| n == prop.name) {
            if !is_float32(&prop.ty) {
                return Err(BenchError::NonFloatProperty {
                    name: prop.name.clone(),
                    ty: prop.ty.clone(),
                });
            }
            slots[slot] = Some(if binary { offset } else { idx });
        }
        offset += scalar_size(&prop.ty).expect("scalar types validated during header parse");
    }
    for (slot, name) in COORD_NAMES.iter().enumerate().take(3) {
        if slots[slot].is_none() {
            return Err(parse_err(
                path,
                element.header_line,
                format!("vertex element is missing property '{name}'"),
            ));
        }
    }
    let has_normals = slots[3..].iter().all(Option::is_some);
    Ok(VertexLayout {
        slots,
        stride: offset,
        n_props: element.props.len(),
        has_normals,
    })
}

fn load_ply(path: &Path, bytes: &[u8]) -> Result<PointCloud, BenchError> {
    let header = parse_ply_header(path, bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| {
            parse_err(
                path,
                header.lines_consumed,
                "no 'element vertex' declaration in header",
            )
        })?;
    let vertex = &header.elements[vertex_pos];
    let layout = vertex_layout(path, vertex, header.binary)?;
    if header.binary {
        load_ply_binary(path, bytes, &header, vertex_pos, &layout)
    } else {
        load_ply_ascii(path, bytes, &header, vertex_pos, &layout)
    }
}

fn load_ply_ascii(
    path: &Path,
    bytes: &[u8],
    header: &PlyHeader,
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<PointCloud, BenchError> {
    let body = std::str::from_utf8(&bytes[header.data_start..])
        .map_err(|_| parse_err(path, header.lines_consumed + 1, "data is not valid UTF-8"))?;
    let mut lines = body.lines();
    let mut line_no = header.lines_consumed;
    // Skip rows of elements declared ahead of the vertex element.
    for element in &header.elements[..vertex_pos] {
        let mut remaining = element.count;
        while remaining > 0 {
            match lines.next() {
                Some(line) => {
                    line_no += 1;
                    if !line.trim().is_empty() {
                        remaining -= 1;
                    }
                }
                None => {
                    return Err(BenchError::ElementCountMismatch {
                        declared: element.count,
                        found: element.count - remaining,
                    })
                }
            }
        }
    }
    let declared = header.elements[vertex_pos].count;
    let mut points = Vec::with_capacity(declared);
    let mut normals = Vec::with_capacity(if layout.has_normals { declared } else { 0 });
    while points.len() < declared {
        let Some(line) = lines.next() else {
            return Err(BenchError::ElementCountMismatch {
                declared,
                found: points.len(),
            });
        };
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != layout.n_props {
            return Err(parse_err(
                path,
                line_no,
                format!(
                    "expected {} values per vertex row, found {}",
                    layout.n_props,
                    tokens.len()
                ),
            ));
        }
        let mut values = [0.0f64; 6];
        for (slot, stored) in layout.slots.iter().enumerate() {
            if let Some(&idx) = stored.as_ref() {
                let token = tokens[idx];
                let v: f32 = token.parse().map_err(|_| {
                    parse_err(path, line_no, format!("invalid float literal '{token}'"))
                })?;
                values[slot] = f64::from(v);
            }
        }
        points.push(Vector3::new(values[0], values[1], values[2]));
        if layout.has_normals {
            normals.push(Vector3::new(values[3], values[4], values[5]));
        }
    }
    finish_cloud(points, normals, layout.has_normals)
}

fn load_ply_binary(
    _path: &Path,
    bytes: &[u8],
    header: &PlyHeader,
    vertex_pos: usize,
    layout: &VertexLayout,
) -> Result<PointCloud, BenchError> {
    let mut cursor = header.data_start;
    for element in &header.elements[..vertex_pos] {
        let mut stride = 0usize;
        for prop in &element.props {
            if prop.is_list {
                return Err(BenchError::UnknownFormat(format!(
                    "element '{}' declared ahead of the vertex element has list property '{}'; its size cannot be determined",
                    element.name, prop.name
                )));
            }
            stride += scalar_size(&prop.ty).expect("scalar types validated during header parse");
        }
        let skip = element.count * stride;
        if bytes.len() - cursor < skip {
            return Err(BenchError::ElementCountMismatch {
                declared: element.count,
                found: if stride == 0 { 0 } else { (bytes.len() - cursor) / stride },
            });
        }
        cursor += skip;
    }
    let declared = header.elements[vertex_pos].count;
    let available = bytes.len() - cursor;
    if available < declared * layout.stride {
        return Err(BenchError::ElementCountMismatch {
            declared,
            found: if layout.stride == 0 { 0 } else { available / layout.stride },
        });
    }
    let read_f32 = |row_start: usize, offset: usize| -> f64 {
        let at = row_start + offset;
        let raw: [u8; 4] = bytes[at..at + 4].try_into().expect("bounds checked above");
        f64::from(f32::from_le_bytes(raw))
    };
    let mut points = Vec::with_capacity(declared);
    let mut normals = Vec::with_capacity(if layout.has_normals { declared } else { 0 });
    for row in 0..declared {
        let start = cursor + row * layout.stride;
        let mut values = [0.0f64; 6];
        for (slot, stored) in layout.slots.iter().enumerate() {
            if let Some(&offset) = stored.as_ref() {
                values[slot] = read_f32(start, offset);
            }
        }
        points.push(Vector3::new(values[0], values[1], values[2]));
        if layout.has_normals {
            normals.push(Vector3::new(values[3], values[4], values[5]));
        }
    }
    finish_cloud(points, normals, layout.has_normals)
}

fn finish_cloud(
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    has_normals: bool,
) -> Result<PointCloud, BenchError> {
    let cloud = PointCloud::new(points);
    if has_normals {
        cloud
            .with_normals(normals)
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))
    } else {
        Ok(cloud)
    }
}

// ---------------------------------------------------------------------------
// XYZ text
// ---------------------------------------------------------------------------

fn load_xyz(path: &Path, bytes: &[u8]) -> Result<PointCloud, BenchError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| parse_err(path, 0, "file is not valid UTF-8"))?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 3 && tokens.len() != 6 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 or 6 columns, found {}", tokens.len()),
            ));
        }
        match columns {
            None => columns = Some(tokens.len()),
            Some(c) if c != tokens.len() => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("inconsistent column count: {} after {}", tokens.len(), c),
                ));
            }
            Some(_) => {}
        }
        let mut values = [0.0f64; 6];
        for (i, token) in tokens.iter().enumerate() {
            values[i] = token.parse().map_err(|_| {
                parse_err(path, line_no, format!("invalid float literal '{token}'"))
            })?;
        }
        points.push(Vector3::new(values[0], values[1], values[2]));
        if tokens.len() == 6 {
            normals.push(Vector3::new(values[3], values[4], values[5]));
        }
    }
    finish_cloud(points, normals, columns == Some(6))
}

// ---------------------------------------------------------------------------
// Saving
// ---------------------------------------------------------------------------

/// Writes a cloud in the requested format. PLY stores 32-bit floats; XYZ
/// stores full-precision decimal text. Normals are written when present.
pub fn save_cloud(
    path: impl AsRef<Path>,
    cloud: &PointCloud,
    format: CloudFormat,
) -> Result<(), BenchError> {
    let path = path.as_ref();
    let with_normals = cloud.normals.is_some();
    match format {
        CloudFormat::Xyz => {
            let mut out = String::new();
            for (i, p) in cloud.points.iter().enumerate() {
                write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z).expect("string write");
                if let Some(normals) = &cloud.normals {
                    let n = normals[i];
                    write!(out, " {:?} {:?} {:?}", n.x, n.y, n.z).expect("string write");
                }
                out.push('\n');
            }
            std::fs::write(path, out)?;
        }
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLittleEndian => {
            let binary = format == CloudFormat::PlyBinaryLittleEndian;
            let mut out: Vec<u8> = Vec::new();
            out.extend_from_slice(b"ply\n");
            out.extend_from_slice(if binary {
                b"format binary_little_endian 1.0\n"
            } else {
                b"format ascii 1.0\n"
            });
            out.extend_from_slice(format!("element vertex {}\n", cloud.points.len()).as_bytes());
            for name in ["x", "y", "z"] {
                out.extend_from_slice(format!("property float {name}\n").as_bytes());
            }
            if with_normals {
                for name in ["nx", "ny", "nz"] {
                    out.extend_from_slice(format!("property float {name}\n").as_bytes());
                }
            }
            out.extend_from_slice(b"end_header\n");
            for (i, p) in cloud.points.iter().enumerate() {
                let mut row: Vec<f32> = vec![p.x as f32, p.y as f32, p.z as f32];
                if let Some(normals) = &cloud.normals {
                    let n = normals[i];
                    row.extend([n.x as f32, n.y as f32, n.z as f32]);
                }
                if binary {
                    for v in row {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                } else {
                    let mut line = String::new();
                    for (j, v) in row.iter().enumerate() {
                        if j > 0 {
                            line.push(' ');
                        }
                        write!(line, "{v}").expect("string write");
                    }
                    line.push('\n');
                    out.extend_from_slice(line.as_bytes());
                }
            }
            std::fs::write(path, out)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Poses
// ---------------------------------------------------------------------------

/// Reads a rigid transform stored as a 4x4 row-major matrix, four
/// whitespace-separated floats per line. The last row must be `0 0 0 1`.
pub fn load_pose(path: impl AsRef<Path>) -> Result<RigidTransform, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows = [[0.0f64; 4]; 4];
    let mut row = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if row == 4 {
            return Err(parse_err(path, line_no, "more than 4 matrix rows"));
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 4 values per row, found {}", tokens.len()),
            ));
        }
        for (col, token) in tokens.iter().enumerate() {
            rows[row][col] = token.parse().map_err(|_| {
                parse_err(path, line_no, format!("invalid float literal '{token}'"))
            })?;
        }
        row += 1;
    }
    if row != 4 {
        return Err(parse_err(path, 0, format!("expected 4 matrix rows, found {row}")));
    }
    let expected_last = [0.0, 0.0, 0.0, 1.0];
    for (col, &want) in expected_last.iter().enumerate() {
        if (rows[3][col] - want).abs() > 1e-6 {
            return Err(parse_err(
                path,
                4,
                "last row of a rigid transform must be 0 0 0 1",
            ));
        }
    }
    Ok(RigidTransform::from_rows_4x4(&rows))
}

/// Writes a rigid transform as a 4x4 row-major matrix with round-trip-exact
/// decimal formatting.
pub fn save_pose(path: impl AsRef<Path>, pose: &RigidTransform) -> Result<(), BenchError> {
    let rows = pose.to_rows_4x4();
    let mut out = String::new();
    for row in rows {
        for (col, v) in row.iter().enumerate() {
            if col > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RotationZYZ;

    fn sample_cloud(with_normals: bool) -> PointCloud {
        let points = vec![
            Vector3::new(0.125, -3.5, 7.75),
            Vector3::new(1.0e-3, 2.5e2, -0.625),
            Vector3::new(-9.0, 0.03125, 4.5),
        ];
        let cloud = PointCloud::new(points);
        if with_normals {
            cloud
                .with_normals(vec![
                    Vector3::new(0.0, 0.0, 1.0),
                    Vector3::new(1.0, 0.0, 0.0),
                    Vector3::new(0.0, -1.0, 0.0),
                ])
                .unwrap()
        } else {
            cloud
        }
    }

    fn quantize(cloud: &PointCloud) -> PointCloud {
        let q = |v: &Vector3<f64>| {
            Vector3::new(
                f64::from(v.x as f32),
                f64::from(v.y as f32),
                f64::from(v.z as f32),
            )
        };
        let out = PointCloud::new(cloud.points.iter().map(q).collect());
        match &cloud.normals {
            Some(normals) => out.with_normals(normals.iter().map(q).collect()).unwrap(),
            None => out,
        }
    }

    fn assert_clouds_equal(a: &PointCloud, b: &PointCloud) {
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p, q);
        }
        assert_eq!(a.normals.is_some(), b.normals.is_some());
        if let (Some(na), Some(nb)) = (&a.normals, &b.normals) {
            for (p, q) in na.iter().zip(nb) {
                assert_eq!(p, q);
            }
        }
    }

    #[test]
    fn ply_ascii_round_trip_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        for with_normals in [false, true] {
            let cloud = sample_cloud(with_normals);
            let path = dir.path().join(format!("cloud_{with_normals}.ply"));
            save_cloud(&path, &cloud, CloudFormat::PlyAscii).unwrap();
            let loaded = load_cloud(&path).unwrap();
            assert_clouds_equal(&loaded, &quantize(&cloud));
        }
    }

    #[test]
    fn ply_binary_round_trip_is_bitwise_stable() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = sample_cloud(true);
        let first = dir.path().join("first.ply");
        save_cloud(&first, &cloud, CloudFormat::PlyBinaryLittleEndian).unwrap();
        let loaded = load_cloud(&first).unwrap();
        assert_clouds_equal(&loaded, &quantize(&cloud));
        let second = dir.path().join("second.ply");
        save_cloud(&second, &loaded, CloudFormat::PlyBinaryLittleEndian).unwrap();
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap(),
            "a load/save cycle must reproduce the file byte for byte"
        );
    }

    #[test]
    fn xyz_round_trip_is_exact_in_double_precision() {
        let dir = tempfile::tempdir().unwrap();
        for with_normals in [false, true] {
            let cloud = sample_cloud(with_normals);
            let path = dir.path().join(format!("cloud_{with_normals}.xyz"));
            save_cloud(&path, &cloud, CloudFormat::Xyz).unwrap();
            let loaded = load_cloud(&path).unwrap();
            assert_clouds_equal(&loaded, &cloud);
        }
    }

    #[test]
    fn big_endian_ply_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.ply");
        std::fs::write(
            &path,
            "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        )
        .unwrap();
        let err = load_cloud(&path).unwrap_err();
        assert!(matches!(err, BenchError::UnknownFormat(_)), "{err}");
    }

    #[test]
    fn double_precision_coordinates_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("double.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty float y\nproperty float z\nend_header\n1 2 3\n",
        )
        .unwrap();
        let err = load_cloud(&path).unwrap_err();
        match err {
            BenchError::NonFloatProperty { name, ty } => {
                assert_eq!(name, "x");
                assert_eq!(ty, "double");
            }
            other => panic!("expected NonFloatProperty, got {other}"),
        }
    }

    #[test]
    fn list_property_on_vertex_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("list.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty list uchar int neighbors\nend_header\n1 2 3 0\n",
        )
        .unwrap();
        let err = load_cloud(&path).unwrap_err();
        assert!(matches!(err, BenchError::UnknownFormat(_)), "{err}");
    }

    #[test]
    fn declared_count_larger_than_data_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = dir.path().join("short.ply");
        std::fs::write(
            &ascii,
            "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n4 5 6\n7 8 9\n",
        )
        .unwrap();
        match load_cloud(&ascii).unwrap_err() {
            BenchError::ElementCountMismatch { declared, found } => {
                assert_eq!((declared, found), (5, 3));
            }
            other => panic!("expected ElementCountMismatch, got {other}"),
        }
        let binary = dir.path().join("short_bin.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&binary, bytes).unwrap();
        match load_cloud(&binary).unwrap_err() {
            BenchError::ElementCountMismatch { declared, found } => {
                assert_eq!((declared, found), (5, 2));
            }
            other => panic!("expected ElementCountMismatch, got {other}"),
        }
    }

    #[test]
    fn extra_scalar_properties_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let ascii = dir.path().join("extras.ply");
        std::fs::write(
            &ascii,
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty uchar red\nproperty float x\nproperty float y\nproperty float z\nproperty int label\nend_header\n255 1 2 3 7\n0 4 5 6 -1\n",
        )
        .unwrap();
        let cloud = load_cloud(&ascii).unwrap();
        assert_eq!(cloud.points[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(cloud.points[1], Vector3::new(4.0, 5.0, 6.0));

        let binary = dir.path().join("extras_bin.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty uchar red\nproperty float x\nproperty float y\nproperty float z\nproperty int label\nend_header\n".to_vec();
        bytes.push(255);
        for v in [1.5f32, 2.5, 3.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&42i32.to_le_bytes());
        std::fs::write(&binary, bytes).unwrap();
        let cloud = load_cloud(&binary).unwrap();
        assert_eq!(cloud.points[0], Vector3::new(1.5, 2.5, 3.5));
    }

    #[test]
    fn elements_before_and_after_vertex_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sandwich.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement camera 1\nproperty float fov\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n60.0\n1 2 3\n4 5 6\n3 0 1 0\n",
        )
        .unwrap();
        let cloud = load_cloud(&path).unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert_eq!(cloud.points[1], Vector3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn header_diagnostics_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelemen vertex 3\nend_header\n",
        )
        .unwrap();
        match load_cloud(&path).unwrap_err() {
            BenchError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("elemen"), "{message}");
            }
            other => panic!("expected Parse, got {other}"),
        }
    }

    #[test]
    fn xyz_rejects_inconsistent_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.xyz");
        std::fs::write(&path, "1 2 3\n4 5 6 0 0 1\n").unwrap();
        match load_cloud(&path).unwrap_err() {
            BenchError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other}"),
        }
        let path = dir.path().join("fourcol.xyz");
        std::fs::write(&path, "1 2 3 4\n").unwrap();
        assert!(load_cloud(&path).is_err());
    }

    #[test]
    fn pose_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pose.txt");
        let rot = RotationZYZ::new(0.3, 1.1, -2.4);
        let pose = RigidTransform::new(rot.to_matrix(), Vector3::new(0.25, -1.5, 3.75));
        save_pose(&path, &pose).unwrap();
        let loaded = load_pose(&path).unwrap();
        assert_eq!(loaded.rotation, pose.rotation);
        assert_eq!(loaded.translation, pose.translation);
    }

    #[test]
    fn pose_structure_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let short = dir.path().join("short.txt");
        std::fs::write(&short, "1 0 0 0\n0 1 0 0\n0 0 1 0\n").unwrap();
        assert!(matches!(load_pose(&short), Err(BenchError::Parse { .. })));
        let bad_last = dir.path().join("bad_last.txt");
        std::fs::write(&bad_last, "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0.5 1\n").unwrap();
        assert!(matches!(load_pose(&bad_last), Err(BenchError::Parse { .. })));
        let bad_token = dir.path().join("bad_token.txt");
        std::fs::write(&bad_token, "1 0 0 zero\n0 1 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
        assert!(matches!(load_pose(&bad_token), Err(BenchError::Parse { .. })));
    }
}
