//! Grayscale PFM depth maps: header `Pf`, a `W H` line, a scale line whose
//! sign encodes endianness (negative = little-endian), then float32 rows
//! stored bottom-to-top.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DataError;
use crate::geometry::DepthMap;

fn format_err(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Format { path: path.display().to_string(), message: message.into() }
}

pub fn read_pfm(path: &Path) -> Result<DepthMap, DataError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = Vec::new();

    // Three whitespace-terminated header tokens lines: magic, dims, scale.
    let read_token_line = |reader: &mut BufReader<File>| -> Result<String, DataError> {
        let mut line = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            if reader.read(&mut byte)? == 0 {
                return Err(format_err(path, "unexpected end of header"));
            }
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
        }
        Ok(String::from_utf8_lossy(&line).trim_end_matches('\r').to_string())
    };

    for _ in 0..3 {
        header.push(read_token_line(&mut reader)?);
    }
    match header[0].as_str() {
        "Pf" => {}
        "PF" => return Err(format_err(path, "unsupported: color PFM")),
        other => return Err(format_err(path, format!("bad magic {other:?}, expected `Pf`"))),
    }
    let dims: Vec<&str> = header[1].split_whitespace().collect();
    if dims.len() != 2 {
        return Err(format_err(path, format!("bad dimension line {:?}", header[1])));
    }
    let width: usize =
        dims[0].parse().map_err(|_| format_err(path, format!("bad width {:?}", dims[0])))?;
    let height: usize =
        dims[1].parse().map_err(|_| format_err(path, format!("bad height {:?}", dims[1])))?;
    let scale: f64 = header[2]
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("bad scale line {:?}", header[2])))?;
    if scale == 0.0 {
        return Err(format_err(path, "scale must be non-zero"));
    }
    let little_endian = scale < 0.0;

    let mut raw = vec![0u8; width * height * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|e| format_err(path, format!("truncated pixel data: {e}")))?;
    let mut data = vec![0.0f64; width * height];
    for y in 0..height {
        // PFM rows run bottom-to-top.
        let src_row = height - 1 - y;
        for x in 0..width {
            let o = (src_row * width + x) * 4;
            let bytes: [u8; 4] = raw[o..o + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            data[y * width + x] = v as f64;
        }
    }
    DepthMap::from_vec(width, height, data)
        .map_err(|e| format_err(path, format!("invalid depth values: {e}")))
}

/// Write little-endian (scale line `-1.0`).
pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height())?;
    for y in (0..depth.height()).rev() {
        for x in 0..depth.width() {
            out.write_all(&(depth.get(x, y) as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> =
            (0..7 * 5).map(|_| rng.random_range(0.0f32..100.0) as f64).collect();
        let depth = DepthMap::from_vec(7, 5, data).unwrap();
        write_pfm(&path, &depth).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back, depth);
    }

    #[test]
    fn one_by_one_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.pfm");
        let depth = DepthMap::from_vec(1, 1, vec![5.0]).unwrap();
        write_pfm(&path, &depth).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..12], b"Pf\n1 1\n-1.0\n");
        assert_eq!(&bytes[12..], 5.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16);
    }

    #[test]
    fn big_endian_scale_is_honored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.5f32.to_be_bytes());
        bytes.extend_from_slice(&7.25f32.to_be_bytes());
        std::fs::write(&path, bytes).unwrap();
        let depth = read_pfm(&path).unwrap();
        assert_eq!(depth.get(0, 0), 3.5);
        assert_eq!(depth.get(1, 0), 7.25);
    }

    #[test]
    fn color_pfm_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("color.pfm");
        std::fs::write(&path, b"PF\n1 1\n-1.0\n\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        match read_pfm(&path) {
            Err(DataError::Format { message, .. }) => {
                assert!(message.contains("color PFM"), "{message}")
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rows_are_stored_bottom_to_top() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.pfm");
        let depth = DepthMap::from_vec(1, 2, vec![1.0, 2.0]).unwrap(); // y=0 -> 1.0
        write_pfm(&path, &depth).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 2.0); // bottom row first
    }
}
