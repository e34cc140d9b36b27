//! Text and image serialization of solver fields.
//!
//! CSV output uses `,` separators, `.` decimals, a header row and LF line
//! endings. Floats are printed with Rust's shortest round-trip formatting,
//! so files are byte-identical across runs that produce identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pgm::{write_pgm, GrayImage};
use crate::solver::ScalarField;

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut out = BufWriter::new(File::create(path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Rows `x,phi,psi` for a 1D field and its transition density.
pub fn write_field_csv_1d<W: Write>(out: &mut W, phi: &ScalarField, psi: &ScalarField) -> Result<()> {
    if phi.grid().dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: phi.grid().dim(),
        });
    }
    if psi.grid() != phi.grid() {
        return Err(Error::Invalid {
            what: "field export",
            reason: "phi and psi live on different grids".into(),
        });
    }
    writeln!(out, "x,phi,psi")?;
    for (k, (p, q)) in phi.values().iter().zip(psi.values()).enumerate() {
        writeln!(out, "{},{p},{q}", phi.grid().coordinate(k)[0])?;
    }
    Ok(())
}

/// Rows `row,col,value` for a 2D field.
pub fn write_field_csv_2d<W: Write>(out: &mut W, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: grid.dim(),
        });
    }
    writeln!(out, "row,col,value")?;
    let w = grid.width();
    for (k, v) in field.values().iter().enumerate() {
        writeln!(out, "{},{},{v}", k / w, k % w)?;
    }
    Ok(())
}

/// A 2D field quantized to 16 bits, with `value ~= gray * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedField {
    pub image: GrayImage,
    pub scale: f64,
    pub max_value: f64,
}

/// Scales a 2D field so its maximum maps to 65535. Grid row 0 becomes the
/// top image row. An all-zero field gives an all-zero image with scale 0.
pub fn quantize_field(field: &ScalarField) -> Result<QuantizedField> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: grid.dim(),
        });
    }
    let max_value = field.max_value();
    let scale = max_value / 65535.0;
    let pixels = field
        .values()
        .iter()
        .map(|&v| {
            if max_value > 0.0 {
                (v / max_value * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    Ok(QuantizedField {
        image: GrayImage {
            width: grid.width(),
            height: grid.height(),
            maxval: 65535,
            pixels,
        },
        scale,
        max_value,
    })
}

/// Writes `<stem>.pgm`, its `<stem>.scale.txt` sidecar and `<stem>.csv`
/// into `dir`. Returns the quantized image.
pub fn write_field_2d(dir: &Path, stem: &str, field: &ScalarField) -> Result<QuantizedField> {
    let q = quantize_field(field)?;
    write_file(&dir.join(format!("{stem}.pgm")), |out| write_pgm(out, &q.image))?;
    write_file(&dir.join(format!("{stem}.scale.txt")), |out| {
        writeln!(out, "# value = gray * scale")?;
        writeln!(out, "scale = {}", q.scale)?;
        writeln!(out, "max_value = {}", q.max_value)?;
        writeln!(out, "width = {}", q.image.width)?;
        writeln!(out, "height = {}", q.image.height)?;
        writeln!(out, "sha256 = {}", field_checksum(field))?;
        Ok(())
    })?;
    write_file(&dir.join(format!("{stem}.csv")), |out| write_field_csv_2d(out, field))?;
    Ok(q)
}

/// SHA-256 over the little-endian bytes of every node value, as hex.
pub fn field_checksum(field: &ScalarField) -> String {
    let mut h = Sha256::new();
    for v in field.values() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Rows `i,j,K` for every entry of a square matrix stored row-major.
pub fn write_kernel_csv<W: Write>(out: &mut W, n: usize, values: &[f64]) -> Result<()> {
    if values.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: values.len(),
        });
    }
    writeln!(out, "i,j,K")?;
    for i in 0..n {
        for j in 0..n {
            writeln!(out, "{i},{j},{}", values[i * n + j])?;
        }
    }
    Ok(())
}

/// Columns `x` and `y` numbered by position; 1D files use only `x`.
fn coordinate_headers(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["query_x"]
    } else {
        &["query_x", "query_y"]
    }
}

/// One classified query for [`write_classification_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRow {
    pub query: Vec<f64>,
    pub label: String,
    pub posterior: Vec<f64>,
}

/// Rows `query_x[,query_y],argmax_label,posterior_<label>...`.
pub fn write_classification_csv<W: Write>(
    out: &mut W,
    labels: &[String],
    rows: &[ClassificationRow],
) -> Result<()> {
    let dim = rows.first().map_or(1, |r| r.query.len());
    let mut header: Vec<String> = coordinate_headers(dim).iter().map(|s| s.to_string()).collect();
    header.push("argmax_label".into());
    header.extend(labels.iter().map(|l| format!("posterior_{l}")));
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        if r.query.len() != dim || r.posterior.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim + labels.len(),
                actual: r.query.len() + r.posterior.len(),
            });
        }
        let mut cells: Vec<String> = r.query.iter().map(|v| v.to_string()).collect();
        cells.push(r.label.clone());
        cells.extend(r.posterior.iter().map(|v| v.to_string()));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgm::parse_pgm;
    use crate::solver::Grid;

    fn text<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_1d_layout() {
        let g = Grid::interval(0.0, 1.0, 0.5).unwrap();
        let phi = ScalarField::new(g.clone(), vec![0.25, 0.5, 0.25]).unwrap();
        let psi = ScalarField::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        let s = text(|b| write_field_csv_1d(b, &phi, &psi));
        assert_eq!(s, "x,phi,psi\n0,0.25,0\n0.5,0.5,1\n1,0.25,0\n");
    }

    #[test]
    fn quantization_maps_max_to_full_scale() {
        let g = Grid::plane(3, 3, 1.0, [0.0, 0.0]).unwrap();
        let mut v = vec![0.0; 9];
        v[4] = 2.0;
        v[5] = 1.0;
        let f = ScalarField::new(g.clone(), v).unwrap();
        let q = quantize_field(&f).unwrap();
        assert_eq!(q.image.pixels[4], 65535);
        assert_eq!(q.image.pixels[5], 32768);
        assert!((q.scale * 65535.0 - 2.0).abs() < 1e-15);

        let zero = ScalarField::new(g, vec![0.0; 9]).unwrap();
        assert!(quantize_field(&zero).unwrap().image.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn field_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::plane(4, 3, 1.0, [0.0, 0.0]).unwrap();
        let f = ScalarField::new(g, (0..12).map(|k| k as f64).collect()).unwrap();
        let q = write_field_2d(dir.path(), "f", &f).unwrap();
        let img = parse_pgm(&std::fs::read(dir.path().join("f.pgm")).unwrap()).unwrap();
        assert_eq!(img, q.image);
        assert_eq!((img.width, img.height), (4, 3));
        let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.contains("\n2,3,11\n"));
        let side = std::fs::read_to_string(dir.path().join("f.scale.txt")).unwrap();
        assert!(side.contains(&field_checksum(&f)));
    }

    #[test]
    fn checksum_tracks_values() {
        let g = Grid::interval(0.0, 1.0, 0.5).unwrap();
        let a = ScalarField::new(g.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        let b = ScalarField::new(g, vec![0.0, 1.0, 1e-300]).unwrap();
        assert_eq!(field_checksum(&a), field_checksum(&a.clone()));
        assert_ne!(field_checksum(&a), field_checksum(&b));
        assert_eq!(field_checksum(&a).len(), 64);
    }

    #[test]
    fn kernel_and_classification_csv() {
        let s = text(|b| write_kernel_csv(b, 2, &[1.0, 0.5, 0.5, 1.0]));
        assert_eq!(s.lines().count(), 5);
        assert!(s.starts_with("i,j,K\n0,0,1\n0,1,0.5\n"));
        let labels = vec!["A".to_string(), "B".to_string()];
        let rows = vec![ClassificationRow {
            query: vec![0.5, 1.0],
            label: "A".into(),
            posterior: vec![0.75, 0.25],
        }];
        let s = text(|b| write_classification_csv(b, &labels, &rows));
        assert_eq!(
            s,
            "query_x,query_y,argmax_label,posterior_A,posterior_B\n0.5,1,A,0.75,0.25\n"
        );
    }
}
