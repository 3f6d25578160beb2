//! Matrix files: CSV (`rows,cols` header then row-major values) and PGM.

use std::fs;
use std::path::Path;

use rarma::detection::BinaryMask;
use rarma::grid::DEFAULT_AMPLITUDE_FLOOR;
use rarma::{Grid, Image64};

use crate::error::{CliError, CliResult};

/// Parses a CSV matrix. The first line holds the dimensions; the remaining
/// tokens (comma or whitespace separated) are the values in row-major order.
pub fn parse_csv(text: &str) -> CliResult<Grid<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::io("empty CSV file"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(format!("bad CSV header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(CliError::io(format!("CSV header must be rows,cols, got {header:?}")));
    };
    let values: Vec<f64> = lines
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| CliError::io(format!("bad CSV value {t:?}: {e}")))
        })
        .collect::<CliResult<_>>()?;
    if values.len() != rows * cols {
        return Err(CliError::io(format!(
            "CSV declares {rows}x{cols} but holds {} values",
            values.len()
        )));
    }
    Grid::new(rows, cols, values).map_err(|e| CliError::io(e))
}

/// Writes values at 17 significant digits, one image row per line.
pub fn to_csv(grid: &Grid<f64>) -> String {
    let mut out = format!("{},{}\n", grid.rows(), grid.cols());
    for r in 0..grid.rows() {
        let row: Vec<String> = (0..grid.cols())
            .map(|c| format!("{:.16e}", grid.get(r, c)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Raw PGM raster: `rows x cols` grey levels with their `maxval`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub maxval: u16,
    pub pixels: Grid<u16>,
}

fn header_tokens(bytes: &[u8], count: usize) -> CliResult<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return Err(CliError::io("truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((tokens, i))
}

pub fn parse_pgm(bytes: &[u8]) -> CliResult<Pgm> {
    let (head, end) = header_tokens(bytes, 4)?;
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|e| CliError::io(format!("bad PGM {what} {s:?}: {e}")))
    };
    let cols = num(&head[1], "width")?;
    let rows = num(&head[2], "height")?;
    let maxval = num(&head[3], "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(CliError::io(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let n = rows * cols;
    let values: Vec<u16> = match head[0].as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let data = bytes.get(end + 1..).unwrap_or(&[]);
            let width = if maxval < 256 { 1 } else { 2 };
            if data.len() < n * width {
                return Err(CliError::io(format!(
                    "PGM raster has {} bytes, expected {}",
                    data.len(),
                    n * width
                )));
            }
            if width == 1 {
                data[..n].iter().map(|&b| b as u16).collect()
            } else {
                data[..2 * n]
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]))
                    .collect()
            }
        }
        "P2" => {
            let (tokens, _) = header_tokens(bytes, 4 + n)?;
            tokens[4..]
                .iter()
                .map(|t| {
                    t.parse::<u16>()
                        .map_err(|e| CliError::io(format!("bad PGM sample {t:?}: {e}")))
                })
                .collect::<CliResult<_>>()?
        }
        other => return Err(CliError::io(format!("unsupported PGM magic {other:?}"))),
    };
    if let Some(v) = values.iter().find(|&&v| v as usize > maxval) {
        return Err(CliError::io(format!("PGM sample {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        maxval: maxval as u16,
        pixels: Grid::new(rows, cols, values).map_err(CliError::io)?,
    })
}

/// Binary (P5) encoding; 16-bit samples are big-endian.
pub fn encode_pgm(pgm: &Pgm) -> Vec<u8> {
    let (rows, cols) = pgm.pixels.dims();
    let mut out = format!("P5\n{cols} {rows}\n{}\n", pgm.maxval).into_bytes();
    for &v in pgm.pixels.as_slice() {
        if pgm.maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

/// Grey level `v` maps to amplitude `(v + 1) / (maxval + 1)`, which lies in `(0, 1]`.
pub fn pgm_to_amplitudes(pgm: &Pgm) -> Grid<f64> {
    let scale = f64::from(pgm.maxval) + 1.0;
    pgm.pixels.map(|v| (f64::from(v) + 1.0) / scale)
}

/// 8-bit preview scaled so the largest amplitude maps to 255.
pub fn amplitude_preview(image: &Image64) -> Pgm {
    let max = image.as_slice().iter().cloned().fold(0.0, f64::max);
    Pgm {
        maxval: 255,
        pixels: image
            .grid()
            .map(|v| (255.0 * v / max).round().clamp(0.0, 255.0) as u16),
    }
}

/// Bilevel raster: set cells are 255, the rest 0.
pub fn mask_to_pgm(mask: &BinaryMask) -> Pgm {
    Pgm {
        maxval: 255,
        pixels: mask.grid().map(|b| if b { 255 } else { 0 }),
    }
}

fn is_pgm(bytes: &[u8]) -> bool {
    bytes.starts_with(b"P5") || bytes.starts_with(b"P2")
}

/// Reads an amplitude image from CSV or PGM, sniffing the format from the
/// first bytes. Non-positive CSV amplitudes are raised to a small floor.
pub fn read_image(path: &Path) -> CliResult<Image64> {
    let bytes = fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let grid = if is_pgm(&bytes) {
        pgm_to_amplitudes(&parse_pgm(&bytes)?)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::io(format!("{}: not UTF-8 text", path.display())))?;
        parse_csv(&text)?
    };
    let (rows, cols) = grid.dims();
    let (image, _) = Image64::from_amplitudes_clamped(rows, cols, grid.into_vec(), DEFAULT_AMPLITUDE_FLOOR)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(image)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let values = vec![0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02214076e23, f64::MIN_POSITIVE];
        let g = Grid::new(2, 3, values).unwrap();
        let back = parse_csv(&to_csv(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn csv_accepts_whitespace_and_rejects_bad_shapes() {
        let g = parse_csv("2,2\n1 2\n3,4\n").unwrap();
        assert_eq!(g.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(parse_csv("2,2\n1,2,3\n").is_err());
        assert!(parse_csv("2\n1,2\n").is_err());
        assert!(parse_csv("2,2\n1,x,3,4\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn pgm_round_trips_8_and_16_bit() {
        for maxval in [255u16, 1023, 65535] {
            let pixels = Grid::from_fn(3, 4, |r, c| (((r * 4 + c) as u32 * 9973) % (u32::from(maxval) + 1)) as u16);
            let pgm = Pgm { maxval, pixels };
            assert_eq!(parse_pgm(&encode_pgm(&pgm)).unwrap(), pgm);
        }
    }

    #[test]
    fn ascii_pgm_with_comments() {
        let text = b"P2\n# a comment\n3 2\n# another\n15\n0 1 2\n15 7 3\n";
        let pgm = parse_pgm(text).unwrap();
        assert_eq!(pgm.maxval, 15);
        assert_eq!(pgm.pixels.dims(), (2, 3));
        assert_eq!(pgm.pixels.as_slice(), &[0, 1, 2, 15, 7, 3]);
    }

    #[test]
    fn ingestion_maps_into_unit_interval() {
        let pgm = Pgm {
            maxval: 255,
            pixels: Grid::new(1, 3, vec![0, 127, 255]).unwrap(),
        };
        let a = pgm_to_amplitudes(&pgm);
        assert_eq!(a.as_slice(), &[1.0 / 256.0, 0.5, 1.0]);
    }

    #[test]
    fn malformed_pgm_is_rejected() {
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01").is_err());
        assert!(parse_pgm(b"P2\n1 1\n9\n10\n").is_err());
        assert!(parse_pgm(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
        assert!(parse_pgm(b"P5\n1 1\n0\n\x00").is_err());
    }
}
