//! PLY vertex reader (ASCII and binary little-endian) and a small writer.
//!
//! Only the `x`, `y`, `z` vertex properties are kept; faces and any other
//! elements or properties are skipped.

use std::io::Write;
use std::path::Path;

use super::{read_file, FormatError, Location};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Byte offset of the first body byte.
    body_start: usize,
    /// Line number (1-based) of the first body line.
    body_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, FormatError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| FormatError::parse(Location::Byte(pos), "header not terminated"))?;
        line_no += 1;
        let raw = &bytes[pos..end];
        let line = std::str::from_utf8(raw)
            .map_err(|_| FormatError::parse(Location::Line(line_no), "header is not UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        pos = end + 1;
        let at = Location::Line(line_no);
        if line_no == 1 {
            if line != "ply" {
                return Err(FormatError::parse(at, "missing 'ply' signature"));
            }
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittleEndian,
                    Some("binary_big_endian") => {
                        return Err(FormatError::Unsupported("binary_big_endian PLY".into()))
                    }
                    other => {
                        return Err(FormatError::parse(at, format!("unknown format {other:?}")))
                    }
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| FormatError::parse(at, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| FormatError::parse(at, "element without valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| FormatError::parse(at, "property before any element"))?;
                let ty = tok
                    .next()
                    .ok_or_else(|| FormatError::parse(at, "property without type"))?;
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => Property::List { count, item },
                        _ => return Err(FormatError::parse(at, "bad list property types")),
                    }
                } else {
                    let ty = Scalar::parse(ty)
                        .ok_or_else(|| FormatError::parse(at, format!("unknown type {ty}")))?;
                    let name = tok
                        .next()
                        .ok_or_else(|| FormatError::parse(at, "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(FormatError::parse(at, format!("unexpected header keyword {other}")))
            }
        }
    }
    let encoding =
        encoding.ok_or_else(|| FormatError::parse(Location::Line(line_no), "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_start: pos,
        body_line: line_no + 1,
    })
}

/// Indices of x, y, z among the vertex element's properties.
fn xyz_slots(el: &Element) -> Result<[usize; 3], FormatError> {
    let find = |want: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == want))
            .ok_or_else(|| {
                FormatError::parse(Location::Line(1), format!("vertex element lacks '{want}'"))
            })
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

fn narrow(v: f64) -> f64 {
    v as f32 as f64
}

/// Parses a PLY file image and returns its vertex positions.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud, FormatError> {
    let header = parse_header(bytes)?;
    let vidx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| FormatError::parse(Location::Line(1), "no vertex element"))?;
    let vertex = &header.elements[vidx];
    if vertex.count == 0 {
        return Err(FormatError::parse(
            Location::Line(header.body_line),
            "vertex count is zero",
        ));
    }
    let slots = xyz_slots(vertex)?;
    let body = &bytes[header.body_start..];
    let points = match header.encoding {
        PlyEncoding::Ascii => read_ascii(body, &header, vidx, slots)?,
        PlyEncoding::BinaryLittleEndian => read_binary(body, &header, vidx, slots)?,
    };
    Ok(PointCloud::new(points)?)
}

fn read_ascii(
    body: &[u8],
    header: &Header,
    vidx: usize,
    slots: [usize; 3],
) -> Result<Vec<Point3>, FormatError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| FormatError::parse(Location::Line(header.body_line), "body is not UTF-8"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_line + i, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut points = Vec::new();
    for (ei, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let (line_no, line) = lines.next().ok_or_else(|| {
                FormatError::parse(Location::Line(header.body_line), "unexpected end of body")
            })?;
            if ei != vidx {
                continue;
            }
            // Scalar vertex properties map 1:1 onto tokens unless a list
            // precedes them; walk the tokens to stay correct in both cases.
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut values = vec![f64::NAN; el.props.len()];
            let mut t = 0;
            for (pi, prop) in el.props.iter().enumerate() {
                let at = Location::Line(line_no);
                let next = |t: &mut usize| -> Result<f64, FormatError> {
                    let s = toks
                        .get(*t)
                        .ok_or_else(|| FormatError::parse(at, "too few values"))?;
                    *t += 1;
                    s.parse::<f64>()
                        .map_err(|_| FormatError::parse(at, format!("bad number {s:?}")))
                };
                match prop {
                    Property::Scalar { .. } => values[pi] = next(&mut t)?,
                    Property::List { .. } => {
                        let n = next(&mut t)? as usize;
                        for _ in 0..n {
                            next(&mut t)?;
                        }
                    }
                }
            }
            points.push(Point3::new(
                narrow(values[slots[0]]),
                narrow(values[slots[1]]),
                narrow(values[slots[2]]),
            ));
        }
        if ei == vidx {
            break;
        }
    }
    Ok(points)
}

fn read_binary(
    body: &[u8],
    header: &Header,
    vidx: usize,
    slots: [usize; 3],
) -> Result<Vec<Point3>, FormatError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], FormatError> {
        if *pos + n > body.len() {
            return Err(FormatError::parse(
                Location::Byte(header.body_start + *pos),
                format!("unexpected end of data (needed {n} bytes)"),
            ));
        }
        let s = &body[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let mut points = Vec::with_capacity(header.elements[vidx].count);
    for (ei, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let v = ty.read_le(take(&mut pos, ty.size())?);
                        if let Some(k) = slots.iter().position(|&s| s == pi) {
                            xyz[k] = v;
                        }
                    }
                    Property::List { count, item } => {
                        let n = count.read_le(take(&mut pos, count.size())?) as usize;
                        take(&mut pos, n * item.size())?;
                    }
                }
            }
            if ei == vidx {
                points.push(Point3::new(narrow(xyz[0]), narrow(xyz[1]), narrow(xyz[2])));
            }
        }
        if ei == vidx {
            break;
        }
    }
    Ok(points)
}

pub fn read_ply(path: &Path) -> Result<PointCloud, FormatError> {
    parse_ply(&read_file(path)?)
}

/// Writes vertices only, as float32 properties.
pub fn write_ply(cloud: &PointCloud, path: &Path, encoding: PlyEncoding) -> Result<(), FormatError> {
    let mut out = Vec::new();
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        out,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        cloud.len()
    )
    .unwrap();
    for p in cloud.points() {
        let v = [p.x as f32, p.y as f32, p.z as f32];
        match encoding {
            PlyEncoding::Ascii => writeln!(out, "{:?} {:?} {:?}", v[0], v[1], v[2]).unwrap(),
            PlyEncoding::BinaryLittleEndian => {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    super::write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII: &str = "ply\nformat ascii 1.0\ncomment hand made\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n\
0.5 -1.25 2 255\n1e-3 0 -7.5 0\n3 4 5 12\n3 0 1 2\n";

    #[test]
    fn ascii_fixture() {
        let c = parse_ply(ASCII.as_bytes()).unwrap();
        assert_eq!(
            c.points(),
            &[
                Point3::new(0.5, -1.25, 2.0),
                Point3::new(0.001f32 as f64, 0.0, -7.5),
                Point3::new(3.0, 4.0, 5.0)
            ]
        );
    }

    fn binary_fixture(double: bool) -> Vec<u8> {
        let ty = if double { "double" } else { "float" };
        let mut b = format!(
            "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty {ty} x\nproperty {ty} y\nproperty {ty} z\nproperty int flag\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        )
        .into_bytes();
        for v in [[1.5, -2.0, 0.25], [0.1, 0.2, 0.3]] {
            for c in v {
                if double {
                    b.extend_from_slice(&(c as f64).to_le_bytes());
                } else {
                    b.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            b.extend_from_slice(&7i32.to_le_bytes());
        }
        b.push(3);
        for i in 0..3i32 {
            b.extend_from_slice(&i.to_le_bytes());
        }
        b
    }

    #[test]
    fn binary_float_and_double_agree() {
        let f = parse_ply(&binary_fixture(false)).unwrap();
        let d = parse_ply(&binary_fixture(true)).unwrap();
        assert_eq!(f, d);
        assert_eq!(f.points()[1], Point3::new(0.1f32 as f64, 0.2f32 as f64, 0.3f32 as f64));
    }

    #[test]
    fn zero_vertices_is_parse_error() {
        let s = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse_ply(s.as_bytes()), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn big_endian_unsupported() {
        let s = "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse_ply(s.as_bytes()), Err(FormatError::Unsupported(_))));
    }

    #[test]
    fn bad_number_reports_line() {
        let s = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n1 x 3\n";
        match parse_ply(s.as_bytes()) {
            Err(FormatError::Parse { at, .. }) => assert_eq!(at, Location::Line(9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_binary_reports_byte_offset() {
        let mut b = binary_fixture(false);
        let header_len = b.len() - 2 * 16 - 13;
        b.truncate(header_len + 20);
        match parse_ply(&b) {
            Err(FormatError::Parse { at: Location::Byte(off), .. }) => assert_eq!(off, header_len + 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_read_both_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let c = PointCloud::new(vec![
            Point3::new(0.1f32 as f64, -3.5, 1e-7f32 as f64),
            Point3::new(123.456f32 as f64, 0.0, -0.0),
        ])
        .unwrap();
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let p = dir.path().join("c.ply");
            write_ply(&c, &p, enc).unwrap();
            let back = read_ply(&p).unwrap();
            for (a, b) in c.points().iter().zip(back.points()) {
                assert_eq!(a.x.to_bits(), b.x.to_bits());
                assert_eq!(a.y.to_bits(), b.y.to_bits());
                assert_eq!(a.z.to_bits(), b.z.to_bits());
            }
        }
    }
}
