//! Transmission-matrix datasets and the PRTM file format.
//!
//! ```text
//! "PRTM"  u8 version=1  u32 m_total  u32 n
//! f32 residuals[m_total]
//! f32 entries[2 · m_total · n]     interleaved (re, im), row-major
//! ```
//!
//! Residuals lie in `[0, 1]` and grade how well each row was calibrated.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use num_complex::Complex;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

const MAGIC: &[u8; 4] = b"PRTM";
const VERSION: u8 = 1;
const HEADER_LEN: u64 = 4 + 1 + 4 + 4;

/// A full transmission matrix with per-row calibration residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct TmDataset {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<Complex<f32>>,
    pub residuals: Vec<f32>,
}

impl TmDataset {
    pub fn new(rows: usize, cols: usize, matrix: Vec<Complex<f32>>, residuals: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Format(format!("empty transmission matrix {rows}x{cols}")));
        }
        if matrix.len() != rows * cols {
            return Err(Error::Format(format!(
                "{rows}x{cols} transmission matrix has {} entries",
                matrix.len()
            )));
        }
        if residuals.len() != rows {
            return Err(Error::Format(format!("{} residuals for {rows} rows", residuals.len())));
        }
        check_residuals(&residuals)?;
        Ok(TmDataset {
            rows,
            cols,
            matrix,
            residuals,
        })
    }

    /// Complex Gaussian rows (per-component standard deviation `entry_sd`)
    /// with residuals uniform on `[0.1, 1]`.
    pub fn synthetic(rows: usize, cols: usize, entry_sd: f64, seed: u64) -> Result<Self> {
        if entry_sd <= 0.0 || !entry_sd.is_finite() {
            return Err(Error::Config(format!("entry standard deviation {entry_sd} must be positive")));
        }
        let mut rng = seed::rng(seed, &[0x7A7A_0001]);
        let dist = Normal::new(0.0, entry_sd).expect("positive sd");
        let residuals = (0..rows).map(|_| (0.1 + 0.9 * rng.random::<f64>()) as f32).collect();
        let matrix = (0..rows * cols)
            .map(|_| Complex::new(dist.sample(&mut rng) as f32, dist.sample(&mut rng) as f32))
            .collect();
        TmDataset::new(rows, cols, matrix, residuals)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN as usize + 4 * self.rows + 8 * self.matrix.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for r in &self.residuals {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for c in &self.matrix {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let header = read_header(&mut file, path)?;
        let residuals = read_f32s(&mut file, header.rows, path)?;
        let raw = read_f32s(&mut file, 2 * header.rows * header.cols, path)?;
        let matrix = raw.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
        TmDataset::new(header.rows, header.cols, matrix, residuals)
    }

    /// Builds a dataset from a matrix CSV (one row per TM row, `2n` values
    /// interleaved re,im) and a residual CSV (one value per line). A
    /// non-numeric first line in either file is treated as a header.
    pub fn from_csv(matrix_path: impl AsRef<Path>, residual_path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_csv_numbers(matrix_path.as_ref())?;
        let res_rows = read_csv_numbers(residual_path.as_ref())?;
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 || width % 2 != 0 {
            return Err(Error::Format(format!(
                "matrix rows need an even, positive number of values (re,im pairs), got {width}"
            )));
        }
        let mut matrix = Vec::with_capacity(rows.len() * width / 2);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Format(format!("matrix row {i} has {} values, expected {width}", r.len())));
            }
            matrix.extend(r.chunks_exact(2).map(|p| Complex::new(p[0] as f32, p[1] as f32)));
        }
        let mut residuals = Vec::with_capacity(res_rows.len());
        for (i, r) in res_rows.iter().enumerate() {
            match r.as_slice() {
                [v] => residuals.push(*v as f32),
                _ => return Err(Error::Format(format!("residual line {i} must hold one value"))),
            }
        }
        TmDataset::new(rows.len(), width / 2, matrix, residuals)
    }
}

fn check_residuals(residuals: &[f32]) -> Result<()> {
    if let Some(i) = residuals.iter().position(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Format(format!("residual {i} = {} outside [0, 1]", residuals[i])));
    }
    Ok(())
}

fn read_csv_numbers(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().filter(|f| !f.is_empty()).map(str::parse).collect();
        match parsed {
            Ok(v) if !v.is_empty() => out.push(v),
            Ok(_) => {}
            Err(_) if i == 0 => {}
            Err(e) => return Err(Error::Format(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

struct Header {
    rows: usize,
    cols: usize,
}

fn read_header(file: &mut File, path: &Path) -> Result<Header> {
    let mut buf = [0u8; HEADER_LEN as usize];
    file.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{}: truncated PRTM header", path.display())))?;
    if &buf[..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad magic, expected \"PRTM\"", path.display())));
    }
    if buf[4] != VERSION {
        return Err(Error::Format(format!("{}: unsupported PRTM version {}", path.display(), buf[4])));
    }
    let rows = u32::from_le_bytes(buf[5..9].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(buf[9..13].try_into().expect("4 bytes")) as usize;
    let expect = HEADER_LEN + 4 * rows as u64 + 8 * rows as u64 * cols as u64;
    let actual = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if actual != expect {
        return Err(Error::Format(format!(
            "{}: {rows}x{cols} PRTM file should be {expect} bytes, is {actual}",
            path.display()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("{}: empty transmission matrix", path.display())));
    }
    Ok(Header { rows, cols })
}

fn read_f32s(file: &mut File, n: usize, path: &Path) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    file.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Rows drawn from a transmission matrix file.
#[derive(Clone, Debug, PartialEq)]
pub struct TmOperator<T> {
    pub(crate) dense: DenseOperator<T>,
    /// Row indices into the source matrix, ascending.
    pub row_indices: Vec<usize>,
    pub residuals: Vec<f32>,
}

impl<T: Real> TmOperator<T> {
    pub fn dense(&self) -> &DenseOperator<T> {
        &self.dense
    }
}

/// Indices of rows with residual strictly below `threshold`.
pub fn qualifying_rows(residuals: &[f32], threshold: f64) -> Vec<usize> {
    residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| (r as f64) < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Loads `rows` rows, drawn uniformly without replacement from those with
/// residual below `residual_threshold`. Only the selected rows are read from
/// disk.
pub fn load_tm<T: Real>(path: impl AsRef<Path>, residual_threshold: f64, rows: usize, seed: u64) -> Result<TmOperator<T>> {
    let path = path.as_ref();
    if rows == 0 {
        return Err(Error::Config("must select at least one TM row".into()));
    }
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let header = read_header(&mut file, path)?;
    let residuals = read_f32s(&mut file, header.rows, path)?;
    check_residuals(&residuals)?;
    let pool = qualifying_rows(&residuals, residual_threshold);
    if pool.len() < rows {
        return Err(Error::Data(format!(
            "only {} of {} TM rows have residual < {residual_threshold}, {rows} requested",
            pool.len(),
            header.rows
        )));
    }
    let mut rng = seed::rng(seed, &[0x7A7A_0002]);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), rows)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();

    let row_bytes = 8 * header.cols;
    let matrix_start = HEADER_LEN + 4 * header.rows as u64;
    let mut entries = Vec::with_capacity(rows * header.cols);
    let mut buf = vec![0u8; row_bytes];
    for &r in &picked {
        file.seek(SeekFrom::Start(matrix_start + (r * row_bytes) as u64))
            .and_then(|_| file.read_exact(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        entries.extend(buf.chunks_exact(8).map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex::new(T::of(re as f64), T::of(im as f64))
        }));
    }
    let selected_residuals = picked.iter().map(|&r| residuals[r]).collect();
    Ok(TmOperator {
        dense: DenseOperator::new(rows, header.cols, entries)?,
        row_indices: picked,
        residuals: selected_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_roundtrip_and_row_selection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tm.prtm");
        let ds = TmDataset::synthetic(50, 6, 0.3, 4).unwrap();
        ds.save(&path).unwrap();
        assert_eq!(TmDataset::load(&path).unwrap(), ds);

        let op = load_tm::<f64>(&path, 0.4, 5, 9).unwrap();
        assert_eq!(op.dense.rows(), 5);
        assert_eq!(op.dense.cols(), 6);
        for (k, &r) in op.row_indices.iter().enumerate() {
            assert!(ds.residuals[r] < 0.4);
            for j in 0..6 {
                let e = ds.matrix[r * 6 + j];
                assert_eq!(op.dense.row(k)[j], Complex::new(e.re as f64, e.im as f64));
            }
        }
        assert_eq!(op, load_tm::<f64>(&path, 0.4, 5, 9).unwrap());
    }

    #[test]
    fn zero_threshold_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tm.prtm");
        TmDataset::synthetic(20, 3, 1.0, 1).unwrap().save(&path).unwrap();
        assert!(matches!(load_tm::<f64>(&path, 0.0, 1, 0), Err(Error::Data(_))));
        assert!(matches!(load_tm::<f64>(&path, 1.1, 21, 0), Err(Error::Data(_))));
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.prtm");
        std::fs::write(&path, b"PRTX\x01\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(load_tm::<f64>(&path, 0.4, 1, 0), Err(Error::Format(_))));
        let mut bytes = TmDataset::synthetic(4, 2, 1.0, 0).unwrap().to_bytes();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(TmDataset::load(&path), Err(Error::Format(_))));
        let mut ds = TmDataset::synthetic(4, 2, 1.0, 0).unwrap();
        ds.residuals[0] = 1.5;
        std::fs::write(&path, ds.to_bytes()).unwrap();
        assert!(matches!(TmDataset::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn csv_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        let r = dir.path().join("r.csv");
        std::fs::write(&m, "re0,im0,re1,im1\n1,2,3,4\n-1,0.5,0,0\n").unwrap();
        std::fs::write(&r, "residual\n0.2\n0.9\n").unwrap();
        let ds = TmDataset::from_csv(&m, &r).unwrap();
        assert_eq!((ds.rows, ds.cols), (2, 2));
        assert_eq!(ds.matrix[1], Complex::new(3.0, 4.0));
        assert_eq!(ds.matrix[2], Complex::new(-1.0, 0.5));
        assert_eq!(ds.residuals, vec![0.2, 0.9]);

        std::fs::write(&m, "1,2,3\n").unwrap();
        assert!(matches!(TmDataset::from_csv(&m, &r), Err(Error::Format(_))));
    }
}
