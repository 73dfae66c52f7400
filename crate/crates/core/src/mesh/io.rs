//! OFF, PLY, OBJ and STL readers and writers.
//!
//! Polygons with more than three corners are fan-triangulated on load.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{MeshError, TriangleMesh};
use crate::geom::{triangle_normal, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Ply,
    Obj,
    Stl,
}

impl MeshFormat {
    /// Format implied by a file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(Self::Off),
            "ply" => Some(Self::Ply),
            "obj" => Some(Self::Obj),
            "stl" => Some(Self::Stl),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Off => "off",
            Self::Ply => "ply",
            Self::Obj => "obj",
            Self::Stl => "stl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

struct RawMesh {
    vertices: Vec<Vec3<f64>>,
    faces: Vec<[usize; 3]>,
    quality: Option<Vec<f64>>,
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Loads a mesh and checks index range, emptiness and manifoldness.
///
/// Degenerate and duplicate faces are kept so that
/// [`validate_and_repair`](super::validate_and_repair) can count them.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh<T>, MeshError> {
    let bytes = fs::read(path.as_ref())?;
    parse_mesh(&bytes, format)
}

/// Parses an in-memory file.
pub fn parse_mesh<T: Real>(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh<T>, MeshError> {
    let raw = match format {
        MeshFormat::Off => parse_off(&text(bytes)?)?,
        MeshFormat::Obj => parse_obj(&text(bytes)?)?,
        MeshFormat::Ply => parse_ply(bytes)?,
        MeshFormat::Stl => parse_stl(bytes)?,
    };
    let mut mesh = TriangleMesh::from_parts_unchecked(
        raw.vertices.iter().map(|v| v.cast()).collect(),
        raw.faces,
    );
    mesh.check_indices()?;
    let bad = mesh.non_manifold_edges();
    if !bad.is_empty() {
        return Err(MeshError::NonManifold(bad));
    }
    if let Some(q) = raw.quality {
        mesh.set_attribute(q.into_iter().map(T::of).collect());
    }
    Ok(mesh)
}

fn text(bytes: &[u8]) -> Result<String, MeshError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| perr(0, "file is not valid UTF-8 text"))
}

fn num<F: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<F, MeshError> {
    let t = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    t.parse().map_err(|_| perr(line, format!("invalid {what} '{t}'")))
}

fn push_polygon(faces: &mut Vec<[usize; 3]>, poly: &[usize]) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn parse_off(src: &str) -> Result<RawMesh, MeshError> {
    // tokens with their line numbers, comments stripped
    let mut toks = src.lines().enumerate().flat_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        l.split_whitespace().map(move |t| (i + 1, t))
    });
    let (l0, head) = toks.next().ok_or_else(|| perr(1, "empty file"))?;
    if head != "OFF" {
        return Err(perr(l0, format!("expected OFF header, found '{head}'")));
    }
    let mut next = |what: &str| -> Result<(usize, &str), MeshError> {
        toks.next().ok_or_else(|| perr(0, format!("unexpected end of file reading {what}")))
    };
    let (l, t) = next("vertex count")?;
    let nv: usize = num(Some(t), l, "vertex count")?;
    let (l, t) = next("face count")?;
    let nf: usize = num(Some(t), l, "face count")?;
    let (l, t) = next("edge count")?;
    let _: usize = num(Some(t), l, "edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for ck in &mut c {
            let (l, t) = next("vertex coordinate")?;
            *ck = num(Some(t), l, "vertex coordinate")?;
        }
        vertices.push(Vec3(c));
    }
    let mut faces = Vec::with_capacity(nf);
    let mut poly = Vec::new();
    for _ in 0..nf {
        let (l, t) = next("face size")?;
        let n: usize = num(Some(t), l, "face size")?;
        if n < 3 {
            return Err(perr(l, format!("face with {n} corners")));
        }
        poly.clear();
        for _ in 0..n {
            let (l, t) = next("face index")?;
            poly.push(num(Some(t), l, "face index")?);
        }
        push_polygon(&mut faces, &poly);
    }
    Ok(RawMesh { vertices, faces, quality: None })
}

fn parse_obj(src: &str) -> Result<RawMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let ln = i + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let x = num(it.next(), ln, "x")?;
                let y = num(it.next(), ln, "y")?;
                let z = num(it.next(), ln, "z")?;
                vertices.push(Vec3([x, y, z]));
            }
            Some("f") => {
                poly.clear();
                for t in it {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| perr(ln, format!("invalid face index '{t}'")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(perr(ln, "face index 0 is not allowed"));
                    };
                    if resolved < 0 {
                        return Err(perr(ln, format!("face index {idx} before first vertex")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(perr(ln, "face with fewer than 3 corners"));
                }
                push_polygon(&mut faces, &poly);
            }
            _ => {}
        }
    }
    Ok(RawMesh { vertices, faces, quality: None })
}

#[derive(Debug, Clone, Copy)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str, line: usize) -> Result<Self, MeshError> {
        Ok(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return Err(perr(line, format!("unknown PLY type '{s}'"))),
        })
    }

    fn read(self, c: &mut Cursor<&[u8]>) -> std::io::Result<f64> {
        Ok(match self {
            Self::I8 => c.read_i8()? as f64,
            Self::U8 => c.read_u8()? as f64,
            Self::I16 => c.read_i16::<LittleEndian>()? as f64,
            Self::U16 => c.read_u16::<LittleEndian>()? as f64,
            Self::I32 => c.read_i32::<LittleEndian>()? as f64,
            Self::U32 => c.read_u32::<LittleEndian>()? as f64,
            Self::F32 => c.read_f32::<LittleEndian>()? as f64,
            Self::F64 => c.read_f64::<LittleEndian>()?,
        })
    }
}

#[derive(Debug)]
enum PlyProp {
    Scalar(String, PlyType),
    List(String, PlyType, PlyType),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProp>,
}

fn parse_ply(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    const END: &[u8] = b"end_header";
    let end_pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| perr(0, "missing end_header"))?;
    let mut body_start = end_pos + END.len();
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..end_pos]).map_err(|_| perr(0, "PLY header is not text"))?;

    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(perr(1, "missing 'ply' magic")),
    }
    let mut binary = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (i, l) in lines {
        let ln = i + 1;
        let mut it = l.split_whitespace();
        match it.next() {
            Some("format") => {
                binary = Some(match it.next() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    Some(f) => return Err(MeshError::UnsupportedFormat(format!("PLY {f}"))),
                    None => return Err(perr(ln, "missing format")),
                });
            }
            Some("element") => {
                let name = it.next().ok_or_else(|| perr(ln, "missing element name"))?.to_string();
                let count = num(it.next(), ln, "element count")?;
                elements.push(PlyElement { name, count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| perr(ln, "property before element"))?;
                let t = it.next().ok_or_else(|| perr(ln, "missing property type"))?;
                if t == "list" {
                    let ct = PlyType::parse(it.next().unwrap_or(""), ln)?;
                    let vt = PlyType::parse(it.next().unwrap_or(""), ln)?;
                    let name = it.next().ok_or_else(|| perr(ln, "missing property name"))?;
                    el.props.push(PlyProp::List(name.to_string(), ct, vt));
                } else {
                    let ty = PlyType::parse(t, ln)?;
                    let name = it.next().ok_or_else(|| perr(ln, "missing property name"))?;
                    el.props.push(PlyProp::Scalar(name.to_string(), ty));
                }
            }
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| perr(0, "missing format line"))?;
    let body = if body_start <= bytes.len() { &bytes[body_start..] } else { &[][..] };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut quality: Option<Vec<f64>> = None;

    // Each record is a flat list of values: scalars as-is, lists prefixed by count.
    let mut ascii_tokens = if binary {
        None
    } else {
        let s = std::str::from_utf8(body).map_err(|_| perr(0, "PLY ascii body is not text"))?;
        Some(s.split_whitespace())
    };
    let mut cursor = Cursor::new(body);
    let mut read_value = |ty: PlyType| -> Result<f64, MeshError> {
        match ascii_tokens.as_mut() {
            Some(toks) => num(toks.next(), 0, "PLY value"),
            None => ty.read(&mut cursor).map_err(|_| perr(0, "truncated binary PLY body")),
        }
    };

    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let pos = |n: &str| {
            el.props.iter().position(|p| matches!(p, PlyProp::Scalar(name, _) if name == n))
        };
        let (ix, iy, iz) = (pos("x"), pos("y"), pos("z"));
        let iq = pos("quality");
        if is_vertex && (ix.is_none() || iy.is_none() || iz.is_none()) {
            return Err(perr(0, "vertex element lacks x/y/z"));
        }
        if is_vertex && iq.is_some() {
            quality = Some(Vec::with_capacity(el.count));
        }
        let mut poly = Vec::new();
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for (pi, p) in el.props.iter().enumerate() {
                match p {
                    PlyProp::Scalar(_, ty) => {
                        let v = read_value(*ty)?;
                        if is_vertex {
                            if Some(pi) == ix {
                                xyz[0] = v;
                            } else if Some(pi) == iy {
                                xyz[1] = v;
                            } else if Some(pi) == iz {
                                xyz[2] = v;
                            } else if Some(pi) == iq {
                                if let Some(q) = quality.as_mut() {
                                    q.push(v);
                                }
                            }
                        }
                    }
                    PlyProp::List(name, ct, vt) => {
                        let n = read_value(*ct)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(perr(0, format!("invalid list length {n}")));
                        }
                        let n = n as usize;
                        let take = is_face && (name == "vertex_indices" || name == "vertex_index");
                        poly.clear();
                        for _ in 0..n {
                            let v = read_value(*vt)?;
                            if take {
                                if v < 0.0 {
                                    return Err(perr(0, format!("negative face index {v}")));
                                }
                                poly.push(v as usize);
                            }
                        }
                        if take {
                            if n < 3 {
                                return Err(perr(0, format!("face with {n} corners")));
                            }
                            push_polygon(&mut faces, &poly);
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(Vec3(xyz));
            }
        }
    }
    Ok(RawMesh { vertices, faces, quality })
}

fn parse_stl(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let is_binary = bytes.len() >= 84 && {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        84 + 50 * n == bytes.len()
    };
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut intern = |p: [f64; 3], vertices: &mut Vec<Vec3<f64>>| -> usize {
        let key = [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()];
        *index.entry(key).or_insert_with(|| {
            vertices.push(Vec3(p));
            vertices.len() - 1
        })
    };
    if is_binary {
        let mut c = Cursor::new(&bytes[84..]);
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        for _ in 0..n {
            let mut tri = [0usize; 3];
            let rd = |c: &mut Cursor<&[u8]>| -> std::io::Result<[f64; 3]> {
                Ok([
                    c.read_f32::<LittleEndian>()? as f64,
                    c.read_f32::<LittleEndian>()? as f64,
                    c.read_f32::<LittleEndian>()? as f64,
                ])
            };
            let trunc = |_| perr(0, "truncated binary STL");
            rd(&mut c).map_err(trunc)?;
            for t in &mut tri {
                let p = rd(&mut c).map_err(trunc)?;
                *t = intern(p, &mut vertices);
            }
            c.read_u16::<LittleEndian>().map_err(trunc)?;
            faces.push(tri);
        }
    } else {
        let src = text(bytes)?;
        let mut corners = Vec::with_capacity(3);
        for (i, line) in src.lines().enumerate() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("vertex") => {
                    let x = num(it.next(), i + 1, "x")?;
                    let y = num(it.next(), i + 1, "y")?;
                    let z = num(it.next(), i + 1, "z")?;
                    corners.push(intern([x, y, z], &mut vertices));
                }
                Some("endloop") => {
                    if corners.len() < 3 {
                        return Err(perr(i + 1, "facet with fewer than 3 vertices"));
                    }
                    push_polygon(&mut faces, &corners);
                    corners.clear();
                }
                _ => {}
            }
        }
        if faces.is_empty() && !src.trim_start().starts_with("solid") {
            return Err(perr(1, "neither binary nor ASCII STL"));
        }
    }
    Ok(RawMesh { vertices, faces, quality: None })
}

/// Writes a mesh. PLY is written as binary little-endian.
pub fn save_mesh<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>, format: MeshFormat) -> Result<(), MeshError> {
    let bytes = match format {
        MeshFormat::Ply => encode_ply(mesh, PlyEncoding::BinaryLittleEndian, None),
        _ => encode_mesh(mesh, format),
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Serializes a mesh into the bytes of the given format.
pub fn encode_mesh<T: Real>(mesh: &TriangleMesh<T>, format: MeshFormat) -> Vec<u8> {
    let mut out = Vec::new();
    let w = &mut out;
    match format {
        MeshFormat::Off => {
            let _ = writeln!(w, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_faces());
            for v in mesh.vertices() {
                let _ = writeln!(w, "{} {} {}", v[0], v[1], v[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(w, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                let _ = writeln!(w, "v {} {} {}", v[0], v[1], v[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::Ply => return encode_ply(mesh, PlyEncoding::BinaryLittleEndian, None),
        MeshFormat::Stl => {
            w.extend_from_slice(&[0u8; 80]);
            let _ = w.write_u32::<LittleEndian>(mesh.num_faces() as u32);
            for fi in 0..mesh.num_faces() {
                let [a, b, c] = mesh.face_vertices(fi);
                let n = triangle_normal(&a, &b, &c).normalized();
                for p in [n, a, b, c] {
                    for k in 0..3 {
                        let _ = w.write_f32::<LittleEndian>(p[k].f64() as f32);
                    }
                }
                let _ = w.write_u16::<LittleEndian>(0);
            }
        }
    }
    out
}

/// PLY bytes, optionally with a per-vertex `quality` value and RGB colors.
pub fn encode_ply<T: Real>(mesh: &TriangleMesh<T>, enc: PlyEncoding, deviation: Option<&[T]>) -> Vec<u8> {
    let f64_coords = std::mem::size_of::<T>() == 8;
    let coord_ty = if f64_coords { "double" } else { "float" };
    let mut out = Vec::new();
    let _ = writeln!(out, "ply");
    let _ = writeln!(
        out,
        "format {} 1.0",
        if enc == PlyEncoding::Ascii { "ascii" } else { "binary_little_endian" }
    );
    let _ = writeln!(out, "element vertex {}", mesh.num_vertices());
    for c in ["x", "y", "z"] {
        let _ = writeln!(out, "property {coord_ty} {c}");
    }
    let colors = deviation.map(|d| {
        let max = d.iter().fold(0.0f64, |m, x| m.max(x.f64()));
        d.iter()
            .map(|x| deviation_color(if max > 0.0 { x.f64() / max } else { 0.0 }))
            .collect::<Vec<_>>()
    });
    if deviation.is_some() {
        let _ = writeln!(out, "property float quality");
        for c in ["red", "green", "blue"] {
            let _ = writeln!(out, "property uchar {c}");
        }
    }
    let _ = writeln!(out, "element face {}", mesh.num_faces());
    let _ = writeln!(out, "property list uchar int vertex_indices");
    let _ = writeln!(out, "end_header");
    for (i, v) in mesh.vertices().iter().enumerate() {
        match enc {
            PlyEncoding::Ascii => {
                let _ = write!(out, "{} {} {}", v[0], v[1], v[2]);
                if let (Some(d), Some(cs)) = (deviation, colors.as_ref()) {
                    let c = cs[i];
                    let _ = write!(out, " {} {} {} {}", d[i].f64() as f32, c[0], c[1], c[2]);
                }
                let _ = writeln!(out);
            }
            PlyEncoding::BinaryLittleEndian => {
                for k in 0..3 {
                    if f64_coords {
                        let _ = out.write_f64::<LittleEndian>(v[k].f64());
                    } else {
                        let _ = out.write_f32::<LittleEndian>(v[k].f64() as f32);
                    }
                }
                if let (Some(d), Some(cs)) = (deviation, colors.as_ref()) {
                    let _ = out.write_f32::<LittleEndian>(d[i].f64() as f32);
                    out.extend_from_slice(&cs[i]);
                }
            }
        }
    }
    for f in mesh.faces() {
        match enc {
            PlyEncoding::Ascii => {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
            PlyEncoding::BinaryLittleEndian => {
                out.push(3);
                for &i in f {
                    let _ = out.write_i32::<LittleEndian>(i as i32);
                }
            }
        }
    }
    out
}

/// Color for a normalized deviation `t` in `[0, 1]`: dark purple for small
/// values through red to light yellow for the largest.
pub fn deviation_color(t: f64) -> [u8; 3] {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [20.0, 12.0, 52.0]),
        (0.4, [120.0, 28.0, 109.0]),
        (0.7, [230.0, 90.0, 40.0]),
        (1.0, [252.0, 250.0, 170.0]),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    for w in STOPS.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            return [0, 1, 2].map(|k| (c0[k] + s * (c1[k] - c0[k])).round() as u8);
        }
    }
    [252, 250, 170]
}

/// Writes `mesh` as an ASCII PLY carrying a per-vertex `quality` channel
/// and colors scaled to the largest value.
pub fn write_deviation_ply<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>, values: &[T]) -> Result<(), MeshError> {
    assert_eq!(values.len(), mesh.num_vertices(), "one deviation per vertex");
    let bytes = encode_ply(mesh, PlyEncoding::Ascii, Some(values));
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}
