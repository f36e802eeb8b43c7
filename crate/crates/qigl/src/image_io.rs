//! Binary PGM (P5) and 8-bit grayscale PNG codecs, and directory loading.

use std::collections::BTreeSet;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use qigl_core::imaging::{Dataset, GrayImage, Provenance};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(Self::Pgm),
            "png" => Some(Self::Png),
            _ => None,
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm" => Ok(Self::Pgm),
            "png" => Ok(Self::Png),
            other => Err(Error::Invalid(format!("unknown image format {other:?} (expected pgm or png)"))),
        }
    }
}

/// `P5\n<w> <h>\n255\n` followed by the raw row-major bytes.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // Whitespace and `#` comments may separate header fields.
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PGM header")?);
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?}, expected binary PGM (P5)", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("invalid {what} {s:?}"));
    let (w, h, maxval) = (num(fields[1], "width")?, num(fields[2], "height")?, num(fields[3], "maxval")?);
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported, expected 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let payload = bytes.get(pos + 1..).unwrap_or(&[]);
    let size = w.checked_mul(h).ok_or("image dimensions overflow")?;
    if payload.len() < size {
        return Err(format!("raster has {} bytes, expected {size}", payload.len()));
    }
    GrayImage::new(w, h, payload[..size].to_vec()).map_err(|e| e.to_string())
}

pub fn encode_png(image: &GrayImage) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| e.to_string())?;
    writer.write_image_data(image.pixels()).map_err(|e| e.to_string())?;
    writer.finish().map_err(|e| e.to_string())?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| e.to_string())?;
    let size = reader.output_buffer_size().ok_or("PNG too large")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(format!("{other:?} PNG is not grayscale")),
    };
    let pixels = buf
        .chunks(info.line_size)
        .take(h)
        .flat_map(|row| row.iter().step_by(channels).take(w).copied())
        .collect();
    GrayImage::new(w, h, pixels).map_err(|e| e.to_string())
}

pub fn save_image(image: &GrayImage, path: &Path, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::Pgm => encode_pgm(image),
        ImageFormat::Png => encode_png(image).map_err(|m| Error::format(path, m))?,
    };
    fsutil::write_atomic(path, &bytes)
}

pub fn load_image(path: &Path) -> Result<GrayImage> {
    let format = ImageFormat::from_path(path).ok_or_else(|| Error::format(path, "unsupported image extension"))?;
    let bytes = fsutil::read(path)?;
    match format {
        ImageFormat::Pgm => decode_pgm(&bytes),
        ImageFormat::Png => decode_png(&bytes),
    }
    .map_err(|m| Error::format(path, m))
}

/// File names listed one per line; blank lines and `#` comments are ignored.
pub fn parse_exclusion_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Supported image files in `dir`, sorted by file name, minus `exclude`.
pub fn list_images(dir: &Path, exclude: &BTreeSet<String>) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if path.is_file() && ImageFormat::from_path(&path).is_some() && !exclude.contains(name) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Decodes every image in `dir`. All unreadable files are reported
/// together; a dimension mismatch names the first offending file.
pub fn load_dataset(dir: &Path, expected: Option<(usize, usize)>, exclude: &BTreeSet<String>) -> Result<Dataset> {
    let paths = list_images(dir, exclude)?;
    if paths.is_empty() {
        return Err(Error::format(dir, "no PGM or PNG images found"));
    }
    let mut images = Vec::with_capacity(paths.len());
    let mut failures = Vec::new();
    for path in &paths {
        match load_image(path) {
            Ok(img) => images.push((path, img)),
            Err(Error::Format { path, message }) => failures.push((path, message)),
            Err(e) => failures.push((path.clone(), e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Load(failures));
    }
    let want = expected.unwrap_or_else(|| images[0].1.dims());
    if let Some((path, img)) = images.iter().find(|(_, img)| img.dims() != want) {
        return Err(Error::format(
            *path,
            format!("image is {}x{}, expected {}x{}", img.width(), img.height(), want.0, want.1),
        ));
    }
    Ok(Dataset::new(images.into_iter().map(|(_, img)| img).collect(), Provenance::Loaded)?)
}
