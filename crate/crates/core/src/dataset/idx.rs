//! The IDX container used by MNIST-style datasets: a big-endian header
//! (magic, then one u32 per dimension) followed by unsigned-byte payload.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Undecoded images exactly as stored in an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn truncated(&self) -> Error {
        Error::IoAt {
            path: self.path.to_path_buf(),
            offset: self.bytes.len() as u64,
            source: std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("file truncated (read position {})", self.pos),
            ),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.truncated())?;
        self.pos += 4;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| self.truncated())?;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| self.truncated())?;
        self.pos = end;
        Ok(b)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::Format(format!(
                "{}: magic number {found:#010x}, expected {expected:#010x}",
                self.path.display()
            )));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after payload",
                self.path.display(),
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn parse_idx_images(bytes: &[u8], origin: &Path) -> Result<RawImages> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path: origin,
    };
    r.magic(IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let pixels = r.take(count * rows * cols)?.to_vec();
    r.finish()?;
    Ok(RawImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8], origin: &Path) -> Result<Vec<u8>> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path: origin,
    };
    r.magic(LABEL_MAGIC)?;
    let count = r.u32()? as usize;
    let labels = r.take(count)?.to_vec();
    r.finish()?;
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Data(format!(
            "{}: label {} at index {pos} is outside 0-9",
            origin.display(),
            labels[pos]
        )));
    }
    Ok(labels)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::IoAt {
        path: path.to_path_buf(),
        offset: 0,
        source,
    })
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<RawImages> {
    let path = path.as_ref();
    parse_idx_images(&read(path)?, path)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&read(path)?, path)
}

pub fn encode_idx_images(images: &RawImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn here() -> &'static Path {
        Path::new("<memory>")
    }

    #[test]
    fn parses_image_header() {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 0x1c, 0, 0, 0, 0x1c];
        bytes.extend(std::iter::repeat(7u8).take(2 * 28 * 28));
        let raw = parse_idx_images(&bytes, here()).unwrap();
        assert_eq!((raw.count, raw.rows, raw.cols), (2, 28, 28));
        assert_eq!(encode_idx_images(&raw), bytes);
    }

    #[test]
    fn label_magic_in_image_file_is_rejected() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1];
        let err = parse_idx_images(&bytes, here()).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("0x00000803")), "{err}");
    }

    #[test]
    fn parses_labels() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 5, 0, 9];
        assert_eq!(parse_idx_labels(&bytes, here()).unwrap(), vec![5, 0, 9]);
    }

    #[test]
    fn empty_label_file_is_valid() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 0];
        assert!(parse_idx_labels(&bytes, here()).unwrap().is_empty());
    }

    #[test]
    fn label_above_nine_is_data_error() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 2, 3, 10];
        assert!(matches!(parse_idx_labels(&bytes, here()), Err(Error::Data(_))));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = [0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3];
        match parse_idx_images(&bytes, here()) {
            Err(Error::IoAt { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("expected truncation error, got {other:?}"),
        }
        assert!(matches!(
            parse_idx_labels(&[0, 0, 8], here()),
            Err(Error::IoAt { offset: 3, .. })
        ));
    }
}
