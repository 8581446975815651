//! Little-endian binary IO helpers shared by the checkpoint and
//! feature-cache containers, plus grayscale PNG round-trips.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::num::Real;

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn read_string<R: Read>(r: &mut R) -> io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Writes a scalar slice as little-endian `f32`, the on-disk weight format.
pub fn write_f32_slice<W: Write, T: Real>(w: &mut W, data: &[T]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for &x in data {
        buf.extend_from_slice(&x.f32().to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_f32_vec<R: Read, T: Real>(r: &mut R, n: usize) -> io::Result<Vec<T>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| T::of_f32(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

/// Saves an `[0,1]` grayscale image as an 8-bit PNG.
pub fn save_gray_png<T: Real, P: AsRef<Path>>(path: P, img: &Array2<T>) -> io::Result<()> {
    let (h, w) = img.dim();
    let bytes: Vec<u8> = img
        .iter()
        .map(|&v| (v.f64().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, bytes)
        .expect("buffer matches dimensions");
    buf.save(path.as_ref())
        .map_err(|e| io::Error::new(io::ErrorKind::Other, e))
}

/// Loads an 8-bit grayscale PNG into `[0,1]` values (`k/255` exactly, so a
/// save/load round-trip of quantized data is bit-stable).
pub fn load_gray_png<T: Real, P: AsRef<Path>>(path: P) -> io::Result<Array2<T>> {
    let img = image::open(path.as_ref())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let data: Vec<T> = img
        .into_raw()
        .into_iter()
        .map(|b| T::of(b as f64 / 255.0))
        .collect();
    Array2::from_shape_vec((h as usize, w as usize), data)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Saves a label map (`0..=P` per pixel) as an 8-bit PNG of raw indices.
pub fn save_label_png<P: AsRef<Path>>(path: P, labels: &Array2<u8>) -> io::Result<()> {
    let (h, w) = labels.dim();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, labels.iter().copied().collect())
        .expect("buffer matches dimensions");
    buf.save(path.as_ref())
        .map_err(|e| io::Error::new(io::ErrorKind::Other, e))
}

pub fn load_label_png<P: AsRef<Path>>(path: P) -> io::Result<Array2<u8>> {
    let img = image::open(path.as_ref())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
        .into_luma8();
    let (w, h) = img.dimensions();
    Array2::from_shape_vec((h as usize, w as usize), img.into_raw())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// `create_dir_all` with the path folded into the error message.
pub fn ensure_dir<P: AsRef<Path>>(path: P) -> io::Result<()> {
    fs::create_dir_all(path.as_ref()).map_err(|e| {
        io::Error::new(
            e.kind(),
            format!("creating {}: {e}", path.as_ref().display()),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn f32_slice_round_trip() {
        let data = vec![0.0f32, -1.5, 3.25, f32::MIN_POSITIVE];
        let mut buf = Vec::new();
        write_f32_slice(&mut buf, &data).unwrap();
        let back: Vec<f32> = read_f32_vec(&mut buf.as_slice(), 4).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn gray_png_round_trip_is_exact_on_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = array![[0.0f32, 1.0], [128.0 / 255.0, 17.0 / 255.0]];
        save_gray_png(&path, &img).unwrap();
        let back: Array2<f32> = load_gray_png(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let labels = array![[0u8, 5], [2, 3]];
        save_label_png(&path, &labels).unwrap();
        assert_eq!(load_label_png(&path).unwrap(), labels);
    }
}
