//! Data ingestion and preprocessing: CSV loading, column standardization,
//! pre-whitening, and time-series windowing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which the sample covariance is
/// treated as rank-deficient.
pub const RANK_TOL: f64 = 1e-10;

/// An N×d data matrix with column-standardization metadata.
///
/// `column_means` / `column_scales` record the affine map applied by
/// [`standardize`], so estimates can be mapped back to the raw scale.
/// Freshly loaded data carries means of 0 and scales of 1.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub values: DMatrix<f64>,
    pub column_means: DVector<f64>,
    pub column_scales: DVector<f64>,
    standardized: bool,
}

impl Dataset {
    /// Wraps a raw matrix. Requires N ≥ 2, d ≥ 2, and all entries finite.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (n, d) = values.shape();
        if n < 2 || d < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 rows and 2 columns, got {n}x{d}"
            )));
        }
        if let Some((i, j)) = first_nonfinite(&values) {
            return Err(Error::MissingData { line: i + 1, col: j + 1 });
        }
        Ok(Self {
            column_means: DVector::zeros(d),
            column_scales: DVector::from_element(d, 1.0),
            values,
            standardized: false,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }
}

fn first_nonfinite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Options for [`load_csv`] and [`load_series`].
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: b',', has_header: false }
    }
}

/// Loads a rectangular numeric CSV into a raw (unstandardized) [`Dataset`].
///
/// Empty cells and the literal `NaN` are missing data and rejected here;
/// callers that can drop incomplete windows should use [`load_series`].
pub fn load_csv(path: &Path, options: CsvOptions) -> Result<Dataset> {
    let rows = read_numeric_rows(path, options)?;
    let header_off = if options.has_header { 1 } else { 0 };
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse { line: 1, msg: "empty table".into() });
    }
    let d = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Parse {
                line: i + 1 + header_off,
                msg: format!("expected {d} fields, found {}", row.len()),
            });
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MissingData { line: i + 1 + header_off, col: j + 1 });
            }
        }
    }
    let values = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    Dataset::from_matrix(values)
}

/// Loads a single-column CSV as a time series, mapping empty cells and
/// `NaN` to `f64::NAN` so windowing can drop the affected windows.
pub fn load_series(path: &Path, options: CsvOptions) -> Result<Vec<f64>> {
    let rows = read_numeric_rows(path, options)?;
    let header_off = if options.has_header { 1 } else { 0 };
    let mut series = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(Error::Parse {
                line: i + 1 + header_off,
                msg: format!("expected a single column for a series, found {}", row.len()),
            });
        }
        series.push(row[0]);
    }
    Ok(series)
}

/// Shared CSV reader: parses every cell to f64, mapping missing markers to NaN.
fn read_numeric_rows(path: &Path, options: CsvOptions) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse { line: 0, msg: format!("{other:?}") },
        })?;
    let header_off = if options.has_header { 1 } else { 0 };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + header_off;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                row.push(f64::NAN);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric cell {field:?}"),
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Centers each column to mean 0 and scales it to standard deviation 1,
/// using the population (1/N) variance convention so that the whitening
/// identity (1/N)ZᵀZ = I holds exactly downstream.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let x = &data.values;
    let (n, d) = x.shape();
    let mut means = DVector::zeros(d);
    let mut scales = DVector::zeros(d);
    let mut out = x.clone();
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd == 0.0 {
            return Err(Error::DegenerateColumn { col: j + 1 });
        }
        means[j] = mean;
        scales[j] = sd;
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
    }
    Ok(Dataset {
        values: out,
        // compose with any prior standardization so raw-scale recovery stays exact
        column_means: &data.column_means + &data.column_scales.component_mul(&means),
        column_scales: data.column_scales.component_mul(&scales),
        standardized: true,
    })
}

/// The pre-whitening transform: V and D from the spectral decomposition
/// (1/N)XᵀX = VD²Vᵀ, plus the whitened data Z = XVD⁻¹ with (1/N)ZᵀZ = I.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// Orthogonal eigenvector matrix, columns ordered by descending eigenvalue.
    pub v: DMatrix<f64>,
    /// Square roots of the eigenvalues of (1/N)XᵀX, descending.
    pub d_scales: DVector<f64>,
    /// Whitened samples, N×d.
    pub z: DMatrix<f64>,
}

impl Whitening {
    /// Maps additional rows (already standardized with the same statistics)
    /// into the whitened coordinates: Z' = X'VD⁻¹.
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.v;
        for j in 0..z.ncols() {
            let s = 1.0 / self.d_scales[j];
            z.column_mut(j).scale_mut(s);
        }
        z
    }

    /// M = W·D⁻¹·Vᵀ, mapping a demixing matrix from whitened back to
    /// standardized coordinates.
    pub fn demix_to_original(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut wd = w.clone();
        for j in 0..wd.ncols() {
            let s = 1.0 / self.d_scales[j];
            wd.column_mut(j).scale_mut(s);
        }
        wd * self.v.transpose()
    }
}

/// Computes the whitening transform of standardized data.
///
/// Eigenvalues are sorted descending and each eigenvector's sign is fixed so
/// its largest-magnitude entry is nonnegative, making the output
/// deterministic across runs and platforms.
pub fn whiten(data: &Dataset) -> Result<Whitening> {
    let x = &data.values;
    let (n, d) = x.shape();
    let cov = x.transpose() * x / n as f64;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    let smallest = eig.eigenvalues[order[d - 1]];
    if largest <= 0.0 || smallest < RANK_TOL * largest {
        return Err(Error::RankDeficient { ratio: smallest / largest.max(f64::MIN_POSITIVE) });
    }
    let mut v = DMatrix::zeros(d, d);
    let mut d_scales = DVector::zeros(d);
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // sign fix: largest-|entry| coordinate made nonnegative
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        v.column_mut(k).copy_from(&(col * sign));
        d_scales[k] = eig.eigenvalues[src].sqrt();
    }
    let whitening = Whitening { z: DMatrix::zeros(0, 0), v, d_scales };
    let z = whitening.transform(x);
    Ok(Whitening { z, ..whitening })
}

/// Slices a univariate series into non-overlapping windows of length
/// `window_len`, one window per row. Windows containing non-finite values
/// are dropped, as is a trailing partial window. With `log1p` set, applies
/// log(1+x) before windowing.
pub fn slice_windows(series: &[f64], window_len: usize, log1p: bool) -> Result<Dataset> {
    if window_len < 2 {
        return Err(Error::Parameter(format!(
            "window length must be at least 2, got {window_len}"
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for chunk in series.chunks_exact(window_len) {
        let window: Vec<f64> = if log1p {
            chunk.iter().map(|&v| v.ln_1p()).collect()
        } else {
            chunk.to_vec()
        };
        if window.iter().all(|v| v.is_finite()) {
            rows.push(window);
        }
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 complete windows of length {window_len}, got {}",
            rows.len()
        )));
    }
    let values = DMatrix::from_fn(rows.len(), window_len, |i, j| rows[i][j]);
    Dataset::from_matrix(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_parses_rectangular_table() {
        let f = write_temp("1,2\n3,4\n5,6\n");
        let data = load_csv(f.path(), CsvOptions::default()).unwrap();
        assert_eq!(data.n_samples(), 3);
        assert_eq!(data.n_vars(), 2);
        assert_eq!(data.values[(2, 1)], 6.0);
    }

    #[test]
    fn load_csv_skips_header_when_flagged() {
        let f = write_temp("a,b\n1,2\n3,4\n");
        let opts = CsvOptions { has_header: true, ..CsvOptions::default() };
        let data = load_csv(f.path(), opts).unwrap();
        assert_eq!(data.n_samples(), 2);
        assert_eq!(data.values[(0, 0)], 1.0);
    }

    #[test]
    fn load_csv_rejects_missing_and_ragged() {
        let f = write_temp("1,2\n3,NaN\n5,6\n");
        match load_csv(f.path(), CsvOptions::default()) {
            Err(Error::MissingData { line: 2, col: 2 }) => {}
            other => panic!("expected missing-data error, got {other:?}"),
        }
        let f = write_temp("1,2\n3\n");
        match load_csv(f.path(), CsvOptions::default()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error at line 2, got {other:?}"),
        }
        let f = write_temp("1,2\n3,x\n");
        assert!(matches!(
            load_csv(f.path(), CsvOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn standardize_centers_and_scales() {
        let data = Dataset::from_matrix(DMatrix::from_row_slice(3, 2, &[
            1.0, 10.0, //
            2.0, 20.0, //
            3.0, 30.0,
        ]))
        .unwrap();
        let std = standardize(&data).unwrap();
        for j in 0..2 {
            let col = std.values.column(j);
            let mean = col.sum() / 3.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(std.column_means[0], 2.0, epsilon = 1e-12);
        // population convention: sd of (1,2,3) is sqrt(2/3)
        assert_abs_diff_eq!(std.column_scales[0], (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let data = Dataset::from_matrix(DMatrix::from_row_slice(4, 2, &[
            0.3, -1.0, //
            -0.7, 2.0, //
            1.9, 0.5, //
            0.1, -0.4,
        ]))
        .unwrap();
        let once = standardize(&data).unwrap();
        let twice = standardize(&once).unwrap();
        assert!((&once.values - &twice.values).abs().max() < 1e-12);
        // metadata still maps back to the raw scale
        assert_abs_diff_eq!(twice.column_means[0], once.column_means[0], epsilon = 1e-12);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let data = Dataset::from_matrix(DMatrix::from_row_slice(3, 2, &[
            5.0, 1.0, //
            5.0, 2.0, //
            5.0, 3.0,
        ]))
        .unwrap();
        assert!(matches!(standardize(&data), Err(Error::DegenerateColumn { col: 1 })));
    }

    #[test]
    fn whiten_produces_identity_covariance() {
        // sample covariance [[1, 0.5], [0.5, 1]] has eigenvalues 1.5, 0.5
        // with eigenvectors (1,1)/√2 and (1,-1)/√2
        let n = 8;
        let mut x = DMatrix::zeros(n, 2);
        let a = (1.5f64).sqrt();
        let b = (0.5f64).sqrt();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // construct columns with exact covariance via orthogonal design
        for i in 0..n {
            let t1 = if i % 2 == 0 { 1.0 } else { -1.0 };
            let t2 = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            x[(i, 0)] = s * (a * t1 + b * t2);
            x[(i, 1)] = s * (a * t1 - b * t2);
        }
        let data = Dataset::from_matrix(x).unwrap();
        let wh = whiten(&data).unwrap();
        assert_abs_diff_eq!(wh.d_scales[0], 1.5f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(wh.d_scales[1], 0.5f64.sqrt(), epsilon = 1e-10);
        let zcov = wh.z.transpose() * &wh.z / n as f64;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(zcov[(i, j)], want, epsilon = 1e-8);
            }
        }
        // V is orthogonal
        let vtv = wh.v.transpose() * &wh.v;
        assert!((vtv - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn whiten_round_trip_reconstructs_data() {
        let mut x = DMatrix::zeros(50, 3);
        let mut state = 1u64;
        for v in x.iter_mut() {
            // small LCG; adequate for a reconstruction identity
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let data = standardize(&Dataset::from_matrix(x).unwrap()).unwrap();
        let wh = whiten(&data).unwrap();
        let mut zd = wh.z.clone();
        for j in 0..3 {
            zd.column_mut(j).scale_mut(wh.d_scales[j]);
        }
        let recon = zd * wh.v.transpose();
        assert!((recon - &data.values).abs().max() < 1e-8);
    }

    #[test]
    fn whiten_rejects_rank_deficiency() {
        let mut x = DMatrix::zeros(10, 2);
        for i in 0..10 {
            let v = i as f64 - 4.5;
            x[(i, 0)] = v;
            x[(i, 1)] = 2.0 * v; // duplicated direction
        }
        let data = Dataset::from_matrix(x).unwrap();
        let std = standardize(&data).unwrap();
        assert!(matches!(whiten(&std), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn slice_windows_drops_partial_and_missing() {
        let mut series: Vec<f64> = (0..100).map(|i| i as f64).collect();
        series[30] = f64::NAN; // poisons the second window
        let data = slice_windows(&series, 24, false).unwrap();
        // ⌊100/24⌋ = 4 complete windows, one dropped for the missing value
        assert_eq!(data.n_samples(), 3);
        assert_eq!(data.n_vars(), 24);
        // the surviving rows are windows 0, 2, 3
        assert_eq!(data.values[(1, 0)], 48.0);
    }

    #[test]
    fn slice_windows_window_count() {
        let series: Vec<f64> = (0..48).map(|i| (i as f64).sin()).collect();
        let data = slice_windows(&series, 24, false).unwrap();
        assert_eq!(data.n_samples(), 2);
    }

    #[test]
    fn slice_windows_applies_log1p_before_windowing() {
        let series: Vec<f64> = vec![0.0, std::f64::consts::E - 1.0, 1.0, 2.0, 3.0, 4.0];
        let data = slice_windows(&series, 3, true).unwrap();
        assert_abs_diff_eq!(data.values[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(data.values[(0, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn slice_windows_needs_two_windows() {
        let series: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert!(matches!(slice_windows(&series, 24, false), Err(Error::InsufficientData(_))));
    }
}
