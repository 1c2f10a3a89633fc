//! Minimal binary PGM (P5) writer and reader, 8 bits per pixel.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::dimension(
            "write_pgm",
            format!("{width}x{height} needs {} bytes, got {}", width * height, pixels.len()),
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let spath = path.display().to_string();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    let mut pos = 0;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Length { path: spath.clone(), detail: "truncated header".into() });
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(&bytes)? != "P5" {
        return Err(Error::Format { path: spath, detail: "missing P5 signature".into() });
    }
    let parse = |s: String| -> Result<usize> {
        s.parse().map_err(|_| Error::Format {
            path: path.display().to_string(),
            detail: format!("bad header field {s:?}"),
        })
    };
    let width = parse(next_token(&bytes)?)?;
    let height = parse(next_token(&bytes)?)?;
    let maxval = parse(next_token(&bytes)?)?;
    if maxval != 255 {
        return Err(Error::Format { path: spath, detail: format!("maxval {maxval}, expected 255") });
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height;
    if bytes.len() - pos != expected {
        return Err(Error::Length {
            path: spath,
            detail: format!("{} payload bytes, expected {expected}", bytes.len() - pos),
        });
    }
    Ok((width, height, bytes[pos..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let pixels: Vec<u8> = (0..u8::MAX).collect();
        write_pgm(&path, 15, 17, &vec![7u8; 15 * 17]).unwrap();
        let (w, h, data) = read_pgm(&path).unwrap();
        assert_eq!((w, h), (15, 17));
        assert!(data.iter().all(|&b| b == 7));

        write_pgm(&path, 255, 1, &pixels).unwrap();
        let (_, _, data) = read_pgm(&path).unwrap();
        assert_eq!(data, pixels);
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, b"P6\n2 2\n255\nxxxx").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Format { .. })));
        std::fs::write(&path, b"P5\n2 2\n255\nxx").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Length { .. })));
    }
}
