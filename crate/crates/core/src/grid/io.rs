//! Field serialization: the `BIFG` binary format, CSV tables and PNG heatmaps.
//!
//! Binary layout, little endian:
//!
//! ```text
//! "BIFG"  version: u32 = 1  m: u8
//! per complex axis: min_re f64, max_re f64, min_im f64, max_im f64, res_re u32, res_im u32
//! values: f64 row-major, NaN for flagged cells
//! ```
//!
//! Readers that stop after the values see exactly that layout. The writer
//! appends an optional `BIFM` trailer with the slice embedding and the label
//! (`dim: u32`, origin and basis as re/im f64 pairs, `len: u32`, UTF-8 label)
//! so that a round trip restores the field exactly. Files without the trailer
//! import as the coordinate slice of `C^m`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Axis, Field, SliceSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BIFG";
const TRAILER: &[u8; 4] = b"BIFM";
const VERSION: u32 = 1;

fn encode(field: &Field) -> Vec<u8> {
    let slice = field.slice();
    let mut out = Vec::with_capacity(64 + 8 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(slice.m() as u8);
    for ax in slice.axes() {
        for v in [ax.re.0, ax.re.1, ax.im.0, ax.im.1] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(ax.res_re as u32).to_le_bytes());
        out.extend_from_slice(&(ax.res_im as u32).to_le_bytes());
    }
    for &v in field.values() {
        let v = if v == f64::NEG_INFINITY { f64::NAN } else { v };
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(TRAILER);
    out.extend_from_slice(&(slice.origin().len() as u32).to_le_bytes());
    let push_c = |out: &mut Vec<u8>, z: &Complex64| {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    };
    for z in slice.origin() {
        push_c(&mut out, z);
    }
    for b in slice.basis() {
        for z in b {
            push_c(&mut out, z);
        }
    }
    out.extend_from_slice(&(field.label().len() as u32).to_le_bytes());
    out.extend_from_slice(field.label().as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Malformed {
                offset: self.pos as u64,
                reason: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self, what: &str) -> Result<Complex64> {
        Ok(Complex64::new(self.f64(what)?, self.f64(what)?))
    }

    fn malformed(&self, at: usize, reason: impl Into<String>) -> Error {
        Error::Malformed {
            offset: at as u64,
            reason: reason.into(),
        }
    }
}

fn decode(bytes: &[u8]) -> Result<Field> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(r.malformed(0, "missing BIFG magic"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.malformed(4, format!("unsupported version {version}")));
    }
    let m = r.take(1, "dimension")?[0] as usize;
    if !(1..=2).contains(&m) {
        return Err(r.malformed(8, format!("slice dimension {m} is not 1 or 2")));
    }
    let mut axes = Vec::with_capacity(m);
    for _ in 0..m {
        let at = r.pos;
        let (a, b, c, d) = (r.f64("bounds")?, r.f64("bounds")?, r.f64("bounds")?, r.f64("bounds")?);
        let (nr, ni) = (r.u32("resolution")? as usize, r.u32("resolution")? as usize);
        let ax = Axis::new((a, b), (c, d), nr, ni);
        // Validate each axis through the slice constructor.
        SliceSpec::coordinate(1, &[0], vec![ax.clone()]).map_err(|e| r.malformed(at, e.to_string()))?;
        axes.push(ax);
    }
    let count: usize = axes.iter().map(|a| a.res_re * a.res_im).product();
    let values_at = r.pos;
    let raw = r.take(count * 8, "values")?;
    let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

    let (slice, label) = if r.pos == bytes.len() {
        (SliceSpec::coordinate(m, &(0..m).collect::<Vec<_>>(), axes)?, String::new())
    } else {
        let at = r.pos;
        if r.take(4, "trailer")? != TRAILER {
            return Err(r.malformed(at, "unexpected bytes after values"));
        }
        let dim = r.u32("embedding dimension")? as usize;
        if dim == 0 || dim > 1 << 16 {
            return Err(r.malformed(at + 4, format!("embedding dimension {dim} out of range")));
        }
        let origin = (0..dim).map(|_| r.complex("origin")).collect::<Result<Vec<_>>>()?;
        let basis = (0..m)
            .map(|_| (0..dim).map(|_| r.complex("basis")).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let len_at = r.pos;
        let len = r.u32("label length")? as usize;
        let label = std::str::from_utf8(r.take(len, "label")?)
            .map_err(|_| r.malformed(len_at + 4, "label is not UTF-8"))?
            .to_string();
        if r.pos != bytes.len() {
            return Err(r.malformed(r.pos, "trailing bytes after trailer"));
        }
        let slice = SliceSpec::new(origin, basis, axes).map_err(|e| r.malformed(at, e.to_string()))?;
        (slice, label)
    };
    Field::new(slice, values, label).map_err(|e| Error::Malformed {
        offset: values_at as u64,
        reason: e.to_string(),
    })
}

pub fn export_bin(field: &Field, path: &Path) -> Result<()> {
    std::fs::write(path, encode(field)).map_err(|e| Error::io(path, e))
}

pub fn import_bin(path: &Path) -> Result<Field> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// One row per cell: the slice coordinates of the cell center, then the value.
pub fn export_csv(field: &Field, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let slice = field.slice();
    let mut header: Vec<String> = (0..slice.m()).flat_map(|k| [format!("axis{k}_re"), format!("axis{k}_im")]).collect();
    header.push("value".into());
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in field.values().iter().enumerate() {
            for t in slice.local_coords(&slice.unravel(i)) {
                write!(w, "{},{},", t.re, t.im)?;
            }
            writeln!(w, "{v}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PngPalette {
    Gray,
    #[default]
    Viridis,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PngScale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PngOptions {
    pub palette: PngPalette,
    pub scale: PngScale,
}

/// Normalizes finite values to `[0, 1]`; flagged cells map to `None`.
fn normalized(values: &[f64], scale: PngScale) -> Vec<Option<f64>> {
    let finite = values.iter().filter(|v| v.is_finite());
    let lo = finite.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    values
        .iter()
        .map(|&v| {
            v.is_finite().then(|| {
                let s = (v - lo) / range;
                match scale {
                    PngScale::Linear => s,
                    PngScale::Log => (1.0 + s * 1e4).ln() / (1e4f64 + 1.0).ln(),
                }
            })
        })
        .collect()
}

/// Viridis sampled at eleven evenly spaced stops.
const VIRIDIS: [[u8; 3]; 11] = [
    [68, 1, 84],
    [72, 36, 117],
    [65, 68, 135],
    [53, 95, 141],
    [42, 120, 142],
    [33, 145, 140],
    [34, 168, 132],
    [68, 191, 112],
    [122, 209, 81],
    [189, 223, 38],
    [253, 231, 37],
];

fn viridis(t: f64) -> [u8; 3] {
    let x = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
}

/// Heatmap with the real axis to the right and the imaginary axis up. Fields
/// on two-dimensional slices are drawn as a mosaic of `(t_1.re, t_1.im)`
/// images indexed by `t_2`.
pub fn export_png(field: &Field, path: &Path, opts: PngOptions) -> Result<()> {
    let slice = field.slice();
    let shape = slice.shape();
    let (nx, ny) = (shape[0], shape[1]);
    let (tx, ty) = if slice.m() == 2 { (shape[2], shape[3]) } else { (1, 1) };
    let (width, height) = (nx * tx, ny * ty);
    let norm = normalized(field.values(), opts.scale);
    let channels = match opts.palette {
        PngPalette::Gray => 1,
        PngPalette::Viridis => 3,
    };
    let mut pixels = vec![0u8; width * height * channels];
    for (flat, v) in norm.iter().enumerate() {
        let idx = slice.unravel(flat);
        let (k, l) = if slice.m() == 2 { (idx[2], idx[3]) } else { (0, 0) };
        let x = k * nx + idx[0];
        let y = (ty - 1 - l) * ny + (ny - 1 - idx[1]);
        let p = (y * width + x) * channels;
        let Some(t) = v else { continue };
        match opts.palette {
            PngPalette::Gray => pixels[p] = (t * 255.0).round() as u8,
            PngPalette::Viridis => {
                pixels[p..p + 3].copy_from_slice(&viridis(*t));
            }
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(if channels == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
    writer.write_image_data(&pixels).map_err(|e| Error::Png(e.to_string()))?;
    writer.finish().map_err(|e| Error::Png(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> Field {
        let s = SliceSpec::coordinate(1, &[0], vec![Axis::new((-1.0, 2.0), (0.0, 1.0), 8, 9)]).unwrap();
        let mut values: Vec<f64> = (0..72).map(|i| (i as f64).sin()).collect();
        values[5] = f64::NEG_INFINITY;
        Field::new(s, values, "sin").unwrap()
    }

    #[test]
    fn decode_inverts_encode() {
        let f = field();
        let back = decode(&encode(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn header_only_files_import_as_coordinate_slices() {
        let f = field();
        let bytes = encode(&f);
        let plain = &bytes[..bytes.len() - (4 + 4 + 16 + 16 + 4 + 3)];
        let back = decode(plain).unwrap();
        assert_eq!(back.values().len(), 72);
        assert_eq!(back.slice().axes(), f.slice().axes());
        assert!(back.is_flagged(5));
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let bytes = encode(&field());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Malformed { offset: 0, .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Malformed { offset: 4, .. })));
        assert!(matches!(decode(&bytes[..100]), Err(Error::Malformed { offset: 49, .. })));
        let mut bad = bytes.clone();
        // res_re of the only axis set to 4.
        bad[41..45].copy_from_slice(&4u32.to_le_bytes());
        assert!(matches!(decode(&bad), Err(Error::Malformed { offset: 9, .. })));
    }
}
