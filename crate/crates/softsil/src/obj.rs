//! Wavefront OBJ reader/writer for the subset this crate uses.
//!
//! Supported input: `v` lines with 3 or 6 floats (the extra triple is a
//! per-vertex RGB color), `f` lines with 1-based indices whose `/vt/vn`
//! suffixes are ignored, and `#` comments. Faces with more than three
//! vertices are fan-triangulated around the first listed vertex. Other
//! common OBJ keywords (`vn`, `vt`, `o`, `g`, `s`, `usemtl`, `mtllib`) are
//! skipped. Output writes floats with 6 fractional digits, which makes the
//! save/load cycle idempotent after the first round trip.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::vec3::Vec3;

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

fn parse_obj(text: &str, path: &Path) -> Result<Mesh> {
    let malformed = |line: usize, message: &str| Error::ObjParse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    };

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut colors: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "v" => {
                let nums: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| malformed(lineno, "vertex coordinate is not a number"))?;
                match nums.len() {
                    3 => {
                        if !colors.is_empty() {
                            return Err(malformed(
                                lineno,
                                "vertex without color after colored vertices",
                            ));
                        }
                        vertices.push([nums[0], nums[1], nums[2]]);
                    }
                    6 => {
                        if colors.len() != vertices.len() {
                            return Err(malformed(
                                lineno,
                                "colored vertex after uncolored vertices",
                            ));
                        }
                        vertices.push([nums[0], nums[1], nums[2]]);
                        colors.push([nums[3], nums[4], nums[5]]);
                    }
                    n => {
                        return Err(malformed(
                            lineno,
                            &format!("vertex line has {n} floats, expected 3 or 6"),
                        ))
                    }
                }
            }
            "f" => {
                let mut indices = Vec::new();
                for token in tokens {
                    let first = token.split('/').next().unwrap_or("");
                    let one_based: usize = first
                        .parse()
                        .map_err(|_| malformed(lineno, "face index is not a positive integer"))?;
                    if one_based == 0 || one_based > vertices.len() {
                        return Err(malformed(
                            lineno,
                            &format!("face index {one_based} out of range"),
                        ));
                    }
                    indices.push(one_based - 1);
                }
                if indices.len() < 3 {
                    return Err(malformed(lineno, "face has fewer than 3 vertices"));
                }
                // Fan split anchored at the first listed vertex.
                for k in 1..indices.len() - 1 {
                    faces.push([indices[0], indices[k], indices[k + 1]]);
                }
            }
            "vn" | "vt" | "vp" | "o" | "g" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => {
                return Err(malformed(lineno, &format!("unsupported keyword '{other}'")));
            }
        }
    }

    if colors.is_empty() {
        Mesh::new(vertices, faces)
    } else {
        Mesh::with_colors(vertices, faces, colors)
    }
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match mesh.colors() {
        Some(colors) => {
            for (v, c) in mesh.vertices().iter().zip(colors) {
                out.push_str(&format!(
                    "v {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}\n",
                    v[0], v[1], v[2], c[0], c[1], c[2]
                ));
            }
        }
        None => {
            for v in mesh.vertices() {
                out.push_str(&format!("v {:.6} {:.6} {:.6}\n", v[0], v[1], v[2]));
            }
        }
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
