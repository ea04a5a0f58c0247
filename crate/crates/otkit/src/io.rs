//! File input/output: CSV point clouds (`x1[,x2[,x3]],w`) and PGM images
//! (P2/P5, maxval <= 65535) that become weighted grid measures.

use crate::measures::{from_grayscale_grid, DiscreteMeasure};
use crate::{OtError, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Reads a point-cloud measure from a UTF-8 CSV file with header
/// `x1[,x2[,x3]],w` and one atom per row.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| OtError::Parse(format!("{}: empty file", path.display())))??;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let dim = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=dim)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("w".into()))
        .collect();
    if !(1..=3).contains(&dim) || cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(OtError::Parse(format!(
            "{}: expected header x1[,x2[,x3]],w, got {header:?}",
            path.display()
        )));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(OtError::Parse(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                idx + 2,
                dim + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| {
                OtError::Parse(format!("{}:{}: {e}: {s:?}", path.display(), idx + 2))
            })
        };
        let point: Vec<f64> = fields[..dim].iter().map(|s| parse(s)).collect::<Result<_>>()?;
        let w = parse(fields[dim])?;
        points.push(point);
        weights.push(w);
    }
    DiscreteMeasure::new(points, weights)
}

/// Writes a measure as CSV with 17 significant digits (lossless f64
/// round-trip).
pub fn write_measure_csv(path: &Path, measure: &DiscreteMeasure) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=measure.dim)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("w".into()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (p, w) in measure.points.iter().zip(&measure.weights) {
        let row: Vec<String> = p
            .iter()
            .chain(std::iter::once(w))
            .map(|v| format!("{v:.17e}"))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Grayscale image: row-major intensities in [0, 1].
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

/// Reads a PGM image (ASCII `P2` or binary `P5`), maxval <= 65535;
/// intensities are value / maxval.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut pos = 0usize;
    let bad = |msg: &str| OtError::Parse(format!("{}: {msg}", path.display()));

    // tokenizer over the header: whitespace-separated, '#' comments to EOL
    let next_token = |raw: &[u8], pos: &mut usize| -> Result<String> {
        loop {
            while *pos < raw.len() && raw[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < raw.len() && raw[*pos] == b'#' {
                while *pos < raw.len() && raw[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < raw.len() && !raw[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(OtError::Parse(format!(
                "{}: unexpected end of file in header",
                path.display()
            )));
        }
        Ok(String::from_utf8_lossy(&raw[start..*pos]).into_owned())
    };

    let magic = next_token(&raw, &mut pos)?;
    if magic != "P2" && magic != "P5" {
        return Err(bad(&format!("unsupported magic {magic:?}, expected P2 or P5")));
    }
    let parse_num = |t: String| -> Result<usize> {
        t.parse::<usize>()
            .map_err(|e| OtError::Parse(format!("{}: {e}: {t:?}", path.display())))
    };
    let cols = parse_num(next_token(&raw, &mut pos)?)?;
    let rows = parse_num(next_token(&raw, &mut pos)?)?;
    let maxval = parse_num(next_token(&raw, &mut pos)?)?;
    if cols == 0 || rows == 0 {
        return Err(bad("zero image dimensions"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(&format!("maxval {maxval} out of range 1..=65535")));
    }
    let count = rows * cols;
    let mut pixels = Vec::with_capacity(count);
    if magic == "P2" {
        for _ in 0..count {
            let v = parse_num(next_token(&raw, &mut pos)?)?;
            if v > maxval {
                return Err(bad(&format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / maxval as f64);
        }
    } else {
        // single whitespace byte separates header from raster
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if raw.len() < pos + need {
            return Err(bad("truncated raster"));
        }
        for i in 0..count {
            let v = if wide {
                u16::from_be_bytes([raw[pos + 2 * i], raw[pos + 2 * i + 1]]) as usize
            } else {
                raw[pos + i] as usize
            };
            if v > maxval {
                return Err(bad(&format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / maxval as f64);
        }
    }
    Ok(GrayImage { rows, cols, pixels })
}

/// Writes a binary (P5) PGM with maxval 255 from intensities in [0, 1].
pub fn write_pgm(path: &Path, rows: usize, cols: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != rows * cols {
        return Err(OtError::SizeMismatch(format!(
            "{} pixels for {rows}x{cols} image",
            pixels.len()
        )));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Loads a measure from either format, dispatching on the `.pgm`
/// extension; PGM pixels become grid atoms weighted by intensity.
pub fn read_measure(path: &Path, drop_zeros: bool) -> Result<DiscreteMeasure> {
    let is_pgm = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false);
    if is_pgm {
        let img = read_pgm(path)?;
        let grid: Vec<Vec<f64>> = img
            .pixels
            .chunks(img.cols)
            .map(|row| row.to_vec())
            .collect();
        from_grayscale_grid(&grid, drop_zeros)
    } else {
        read_measure_csv(path)
    }
}
