//! Labeled binary-classification datasets: CSV I/O, the synthetic cones
//! generator, and seeded train/test splitting.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write as IoWrite;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::sampler::MpRng;
use crate::{Error, Label, Result, Scalar};

/// Dense row-major feature matrix with `±1` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    labels: Vec<Label>,
    n_rows: usize,
    n_cols: usize,
    feature_names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<T>,
        labels: Vec<Label>,
        n_cols: usize,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidDataset(format!(
                "need at least one row and one column, got {n_rows}x{n_cols}"
            )));
        }
        if features.len() != n_rows * n_cols {
            return Err(Error::InvalidDataset(format!(
                "feature buffer holds {} values, expected {}x{}",
                features.len(),
                n_rows,
                n_cols
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / n_cols,
                col: pos % n_cols,
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::InvalidDataset(format!("label {bad} is not -1 or +1")));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_cols {
                return Err(Error::InvalidDataset(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    n_cols
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            n_rows,
            n_cols,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.features.chunks_exact(self.n_cols)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.features[row * self.n_cols + col]
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Copies the `rows` x `cols` submatrix into a fresh row-major buffer,
    /// together with the matching labels.
    pub fn minipatch(&self, rows: &[usize], cols: &[usize]) -> (Vec<T>, Vec<Label>) {
        let mut x = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let row = self.row(i);
            x.extend(cols.iter().map(|&j| row[j]));
        }
        let y = rows.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.n_cols, self.feature_names.clone())
    }
}

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// A header name wins over a numeric reading of the same string.
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < headers.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::MissingLabelColumn(i.to_string())),
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < headers.len()))
                .ok_or_else(|| Error::MissingLabelColumn(name.clone())),
        }
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

impl From<usize> for LabelColumn {
    fn from(i: usize) -> Self {
        LabelColumn::Index(i)
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, col: usize) -> Result<T> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        col,
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let v = T::from_f64_lossy(v);
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(v)
}

/// Loads a labeled CSV file. Rows keep file order; cells equal to
/// `positive_label` map to `+1` and the other class to `-1`. Reported row
/// numbers are zero-based data rows (the header is not counted).
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    positive_label: &str,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = label_column.resolve(&headers)?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                raw_labels.push(cell.to_string());
            } else {
                features.push(parse_cell::<T>(cell, row, col)?);
            }
        }
    }

    let classes: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if classes.len() != 2 {
        return Err(Error::LabelCount {
            found: classes.len(),
        });
    }
    if !classes.contains(positive_label) {
        return Err(Error::UnknownPositiveLabel(positive_label.to_string()));
    }
    let labels = raw_labels
        .iter()
        .map(|l| if l == positive_label { 1 } else { -1 })
        .collect();
    let n_cols = names.len();
    Dataset::new(features, labels, n_cols, Some(names))
}

/// Loads an unlabeled feature CSV (header row required). When `drop_column`
/// is set, that column is skipped.
pub fn load_features_csv<T: Scalar>(
    path: impl AsRef<Path>,
    drop_column: Option<&LabelColumn>,
) -> Result<(Vec<T>, usize)> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let skip = drop_column.map(|c| c.resolve(&headers)).transpose()?;
    let width = headers.len() - usize::from(skip.is_some());
    let mut features = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            if Some(col) != skip {
                features.push(parse_cell::<T>(cell, row, col)?);
            }
        }
    }
    Ok((features, width))
}

/// Writes `data` as CSV with the label in the last column, encoded as
/// `1` / `-1`. Reals use the shortest representation that parses back to
/// the same value.
pub fn save_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>, label_name: &str) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = match data.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..data.n_cols()).map(|j| format!("x{j}")).collect(),
    };
    header.push(label_name.to_string());
    w.write_record(&header)?;
    for (row, &label) in data.rows().zip(data.labels()) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(io_err)?;
    w.into_inner()
        .map_err(|e| io_err(e.into_error()))?
        .flush()
        .map_err(io_err)
}

/// Two cones around the first coordinate axis plus pure-noise columns.
///
/// Directions are uniform on the unit sphere in `R^informative_dims`. A
/// direction `u` becomes a `+1` point when `u[0] >= margin` and a `-1` point
/// when `u[0] <= -margin`; anything in between is rejected, as is any point
/// whose class quota is already filled. Accepted directions are scaled by a
/// radius drawn uniformly from `(0.5, 2.0]`. `noise_dims` independent
/// standard-normal columns follow the informative ones.
pub fn generate_cones<T: Scalar>(
    n_samples: usize,
    informative_dims: usize,
    noise_dims: usize,
    margin: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "cones need at least 2 samples, got {n_samples}"
        )));
    }
    if informative_dims == 0 {
        return Err(Error::InvalidArgument("cones need at least one informative dimension".into()));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("cone margin must lie in (0, 1), got {margin}")));
    }

    let mut rng = MpRng::seed_from_u64(seed);
    let n_cols = informative_dims + noise_dims;
    let mut quota = [n_samples / 2, n_samples - n_samples / 2]; // [-1, +1]
    let mut features = Vec::with_capacity(n_samples * n_cols);
    let mut labels = Vec::with_capacity(n_samples);
    let mut direction = vec![0.0f64; informative_dims];

    while labels.len() < n_samples {
        let mut norm_sq = 0.0;
        for d in direction.iter_mut() {
            *d = rng.sample(StandardNormal);
            norm_sq += *d * *d;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let norm = norm_sq.sqrt();
        let axis = direction[0] / norm;
        let label: Label = if axis >= margin {
            1
        } else if axis <= -margin {
            -1
        } else {
            continue;
        };
        let slot = usize::from(label == 1);
        if quota[slot] == 0 {
            continue;
        }
        quota[slot] -= 1;

        let radius = 2.0 - 1.5 * rng.random::<f64>();
        features.extend(direction.iter().map(|d| T::from_f64_lossy(radius * d / norm)));
        for _ in 0..noise_dims {
            let z: f64 = rng.sample(StandardNormal);
            features.push(T::from_f64_lossy(z));
        }
        labels.push(label);
    }

    let names = (0..informative_dims)
        .map(|j| format!("cone_{j}"))
        .chain((0..noise_dims).map(|j| format!("noise_{j}")))
        .collect();
    Dataset::new(features, labels, n_cols, Some(names))
}

/// Shuffles rows with a seeded permutation and splits off
/// `N - ceil(N * (1 - test_fraction))` of them as the test part.
pub fn train_test_split<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = data.n_rows();
    let n_train = ((n as f64) * (1.0 - test_fraction)).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "splitting {n} rows at test fraction {test_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut MpRng::seed_from_u64(seed));
    let train = data.select_rows(&order[..n_train])?;
    let test = data.select_rows(&order[n_train..])?;
    Ok((train, test))
}

/// Writes a bare feature matrix (no labels) with a header row.
pub fn write_features_csv<T: Scalar>(
    mut out: impl IoWrite,
    rows: &[T],
    n_cols: usize,
    names: Option<&[String]>,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(&mut out);
    let header: Vec<String> = match names {
        Some(names) => names.to_vec(),
        None => (0..n_cols).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(&header)?;
    for row in rows.chunks_exact(n_cols) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()
}
