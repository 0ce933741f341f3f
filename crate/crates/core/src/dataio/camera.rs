//! Camera parameter files.
//!
//! Layout, line by line: the word `extrinsic`; four rows of the 4x4
//! world-to-camera matrix; a blank line; the word `intrinsic`; three rows of
//! the 3x3 intrinsic matrix; a blank line; a final line holding
//! `depth_min depth_interval` optionally followed by `depth_num depth_max`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};

use super::{parse_err, DataError};
use crate::geometry::{Extrinsics, Intrinsics};

/// Parsed contents of one camera file.
#[derive(Debug, Clone)]
pub struct CameraFile {
    pub extrinsics: Extrinsics,
    pub intrinsics: Intrinsics,
    pub depth_min: f64,
    pub depth_interval: f64,
    pub depth_num: Option<f64>,
    pub depth_max: Option<f64>,
}

impl CameraFile {
    /// The raw 4x4 world-to-camera matrix.
    pub fn extrinsic_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.extrinsics.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.extrinsics.translation);
        m
    }

    /// Rigid inverse of the stored extrinsics, for datasets that store the
    /// camera-to-world form.
    pub fn inverted_extrinsics(&self) -> Extrinsics {
        let rotation = self.extrinsics.rotation.transpose();
        let translation = -(rotation * self.extrinsics.translation);
        Extrinsics { rotation, translation }
    }
}

fn parse_row(
    path: &Path,
    line_no: usize,
    line: &str,
    expected: usize,
) -> Result<Vec<f64>, DataError> {
    let values: Result<Vec<f64>, _> =
        line.split_whitespace().map(|t| t.parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == expected => Ok(v),
        Ok(v) => Err(parse_err(path, line_no, format!("expected {expected} numbers, got {}", v.len()))),
        Err(_) => Err(parse_err(path, line_no, format!("invalid number in {line:?}"))),
    }
}

pub fn read_camera(path: &Path) -> Result<CameraFile, DataError> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    let expect_line = |i: usize| -> Result<&str, DataError> {
        lines.get(i).copied().ok_or_else(|| parse_err(path, i + 1, "unexpected end of file"))
    };

    if expect_line(0)?.trim() != "extrinsic" {
        return Err(parse_err(path, 1, "expected header `extrinsic`"));
    }
    let mut ext = Matrix4::zeros();
    for r in 0..4 {
        let row = parse_row(path, r + 2, expect_line(r + 1)?, 4)?;
        for c in 0..4 {
            ext[(r, c)] = row[c];
        }
    }
    if !expect_line(5)?.trim().is_empty() {
        return Err(parse_err(path, 6, "expected blank separator line after the extrinsic block"));
    }
    if expect_line(6)?.trim() != "intrinsic" {
        return Err(parse_err(path, 7, "expected header `intrinsic`"));
    }
    let mut intr = Matrix3::zeros();
    for r in 0..3 {
        let row = parse_row(path, r + 8, expect_line(r + 7)?, 3)?;
        for c in 0..3 {
            intr[(r, c)] = row[c];
        }
    }
    if !expect_line(10)?.trim().is_empty() {
        return Err(parse_err(path, 11, "expected blank separator line after the intrinsic block"));
    }
    let depth_line = expect_line(11)?;
    let depth_values: Vec<f64> = depth_line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(path, 12, format!("invalid depth line {depth_line:?}")))?;
    let (depth_min, depth_interval, depth_num, depth_max) = match depth_values.as_slice() {
        [min, step] => (*min, *step, None, None),
        [min, step, num, max] => (*min, *step, Some(*num), Some(*max)),
        other => {
            return Err(parse_err(
                path,
                12,
                format!("expected 2 or 4 depth values, got {}", other.len()),
            ))
        }
    };

    let bottom = ext.row(3);
    if (bottom[0], bottom[1], bottom[2], bottom[3]) != (0.0, 0.0, 0.0, 1.0) {
        return Err(parse_err(path, 5, "extrinsic bottom row must be `0 0 0 1`"));
    }
    let rotation = ext.fixed_view::<3, 3>(0, 0).into_owned();
    let translation = Vector3::new(ext[(0, 3)], ext[(1, 3)], ext[(2, 3)]);
    let extrinsics = Extrinsics::new(rotation, translation)
        .map_err(|e| parse_err(path, 2, format!("bad extrinsic matrix: {e}")))?;
    if intr[(0, 1)] != 0.0 || intr[(1, 0)] != 0.0 || intr.row(2) != Matrix3::identity().row(2) {
        return Err(parse_err(path, 8, "intrinsic matrix must be [fx 0 cx; 0 fy cy; 0 0 1]"));
    }
    let intrinsics = Intrinsics::new(intr[(0, 0)], intr[(1, 1)], intr[(0, 2)], intr[(1, 2)])
        .map_err(|e| parse_err(path, 8, format!("bad intrinsic matrix: {e}")))?;

    Ok(CameraFile { extrinsics, intrinsics, depth_min, depth_interval, depth_num, depth_max })
}

pub fn write_camera(path: &Path, camera: &CameraFile) -> Result<(), DataError> {
    let mut out = String::from("extrinsic\n");
    let ext = camera.extrinsic_matrix();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", ext[(r, c)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out.push('\n');
    out.push_str("intrinsic\n");
    let k = camera.intrinsics.matrix();
    for r in 0..3 {
        let row: Vec<String> = (0..3).map(|c| format!("{}", k[(r, c)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out.push('\n');
    match (camera.depth_num, camera.depth_max) {
        (Some(num), Some(max)) => {
            writeln!(out, "{} {} {} {}", camera.depth_min, camera.depth_interval, num, max).unwrap()
        }
        _ => writeln!(out, "{} {}", camera.depth_min, camera.depth_interval).unwrap(),
    }
    fs::write(path, out)?;
    Ok(())
}
