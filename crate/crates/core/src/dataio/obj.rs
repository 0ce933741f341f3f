//! Minimal OBJ subset for ground-truth meshes: `v x y z` vertices and
//! `f i j k` triangles with positive 1-based indices. Other line types are
//! ignored.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::{parse_err, DataError};

pub fn read_obj(path: &Path) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>), DataError> {
    let text = fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| parse_err(path, line_no, format!("invalid vertex {line:?}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(path, line_no, "vertex needs exactly 3 coordinates"));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let indices: Vec<usize> = tokens
                    .map(|t| {
                        // Accept the common `v/vt/vn` form but only use the
                        // vertex index.
                        let first = t.split('/').next().unwrap_or(t);
                        first.parse::<usize>().map_err(|_| {
                            parse_err(path, line_no, format!("invalid face index {t:?}"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if indices.len() != 3 {
                    return Err(parse_err(path, line_no, "only triangle faces are supported"));
                }
                let mut tri = [0usize; 3];
                for (slot, idx) in tri.iter_mut().zip(&indices) {
                    if *idx == 0 {
                        return Err(parse_err(path, line_no, "face indices must be positive (1-based)"));
                    }
                    *slot = idx - 1;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    for tri in &triangles {
        for &i in tri {
            if i >= vertices.len() {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    message: format!("face references vertex {} but only {} exist", i + 1, vertices.len()),
                });
            }
        }
    }
    Ok((vertices, triangles))
}
