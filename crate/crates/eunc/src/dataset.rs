//! Observation container and the standardization step shared by every
//! estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{EuncError, Result};
use crate::linalg::{column_means, column_sds};

/// Columns are numerically constant below this sample-sd floor.
pub const DEGENERATE_SD: f64 = 1e-12;

/// Optional labels for the three column blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub z: Vec<String>,
    pub a: Vec<String>,
    pub y: String,
}

impl ColumnNames {
    pub fn canonical(l: usize, p: usize) -> Self {
        ColumnNames {
            z: (1..=l).map(|i| format!("Z{i}")).collect(),
            a: (1..=p).map(|j| format!("A{j}")).collect(),
            y: "Y".to_string(),
        }
    }
}

/// An n-row observation table with covariate block Z (n x l), treatment
/// block A (n x p) and outcome Y (n). Construction rejects non-finite
/// values; all blocks must share the same number of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: DMatrix<f64>,
    a: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Option<ColumnNames>,
}

impl Dataset {
    pub fn new(
        z: DMatrix<f64>,
        a: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Option<ColumnNames>,
    ) -> Result<Self> {
        let n = z.nrows();
        if n < 2 {
            return Err(EuncError::Precondition(format!(
                "need at least 2 rows, got {n}"
            )));
        }
        if z.ncols() < 1 || a.ncols() < 1 {
            return Err(EuncError::Precondition(
                "need at least one covariate and one treatment column".into(),
            ));
        }
        if a.nrows() != n || y.len() != n {
            return Err(EuncError::DimensionMismatch(format!(
                "row counts differ: z {}, a {}, y {}",
                n,
                a.nrows(),
                y.len()
            )));
        }
        if let Some(names) = &column_names {
            if names.z.len() != z.ncols() || names.a.len() != a.ncols() {
                return Err(EuncError::DimensionMismatch(
                    "column name count does not match block width".into(),
                ));
            }
        }
        let check_block = |m: &DMatrix<f64>, label: &str| -> Result<()> {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if !m[(i, j)].is_finite() {
                        return Err(EuncError::NonFinite {
                            name: format!("{label}{}", j + 1),
                            row: i,
                        });
                    }
                }
            }
            Ok(())
        };
        check_block(&z, "Z")?;
        check_block(&a, "A")?;
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(EuncError::NonFinite {
                    name: "Y".into(),
                    row: i,
                });
            }
        }
        Ok(Dataset {
            z,
            a,
            y,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn l(&self) -> usize {
        self.z.ncols()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> Option<&ColumnNames> {
        self.column_names.as_ref()
    }

    /// Names used for display and CSV output (canonical Z1../A1../Y when the
    /// dataset carries none).
    pub fn effective_names(&self) -> ColumnNames {
        self.column_names
            .clone()
            .unwrap_or_else(|| ColumnNames::canonical(self.l(), self.p()))
    }

    /// Row subset (with repetition allowed), used by the bootstrap.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let z = DMatrix::from_fn(idx.len(), self.l(), |i, j| self.z[(idx[i], j)]);
        let a = DMatrix::from_fn(idx.len(), self.p(), |i, j| self.a[(idx[i], j)]);
        let y = DVector::from_fn(idx.len(), |i, _| self.y[idx[i]]);
        Dataset {
            z,
            a,
            y,
            column_names: self.column_names.clone(),
        }
    }

    /// Write as CSV with a header row; columns ordered Z.., A.., Y.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let names = self.effective_names();
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = names
            .z
            .iter()
            .chain(names.a.iter())
            .map(String::as_str)
            .chain(std::iter::once(names.y.as_str()))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = Vec::with_capacity(self.l() + self.p() + 1);
            for j in 0..self.l() {
                row.push(format!("{:.17e}", self.z[(i, j)]));
            }
            for j in 0..self.p() {
                row.push(format!("{:.17e}", self.a[(i, j)]));
            }
            row.push(format!("{:.17e}", self.y[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

/// Per-column transform applied at ingestion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnTransform {
    Log,
}

/// Column-role assignment for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvRoles {
    pub z: Vec<String>,
    pub a: Vec<String>,
    pub y: String,
    /// (column name, transform) pairs applied after parsing.
    pub transforms: Vec<(String, ColumnTransform)>,
}

/// Read a dataset from CSV. The first row is a header; the role mapping
/// assigns Z/A/Y columns by name. Unlisted columns are ignored.
pub fn read_csv<R: Read>(reader: R, roles: &CsvRoles) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EuncError::Config(format!("column {name:?} not found in CSV header")))
    };
    let z_idx: Vec<usize> = roles.z.iter().map(|c| position(c)).collect::<Result<_>>()?;
    let a_idx: Vec<usize> = roles.a.iter().map(|c| position(c)).collect::<Result<_>>()?;
    let y_idx = position(&roles.y)?;

    let transform_of = |name: &str| -> Option<ColumnTransform> {
        roles
            .transforms
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, t)| *t)
    };

    let mut z_rows: Vec<f64> = Vec::new();
    let mut a_rows: Vec<f64> = Vec::new();
    let mut y_rows: Vec<f64> = Vec::new();
    for (row_i, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(idx)
                .ok_or_else(|| EuncError::Config(format!("row {row_i} is too short")))?;
            let mut v: f64 = raw.trim().parse().map_err(|_| EuncError::Config(format!(
                "row {row_i}, column {name:?}: cannot parse {raw:?} as a number"
            )))?;
            if let Some(ColumnTransform::Log) = transform_of(name) {
                if v <= 0.0 {
                    return Err(EuncError::Config(format!(
                        "row {row_i}, column {name:?}: log transform requires positive values, got {v}"
                    )));
                }
                v = v.ln();
            }
            if !v.is_finite() {
                return Err(EuncError::NonFinite {
                    name: name.to_string(),
                    row: row_i,
                });
            }
            Ok(v)
        };
        for (k, &idx) in z_idx.iter().enumerate() {
            z_rows.push(parse(idx, &roles.z[k])?);
        }
        for (k, &idx) in a_idx.iter().enumerate() {
            a_rows.push(parse(idx, &roles.a[k])?);
        }
        y_rows.push(parse(y_idx, &roles.y)?);
    }
    let n = y_rows.len();
    if n < 2 {
        return Err(EuncError::Precondition(format!(
            "need at least 2 data rows, got {n}"
        )));
    }
    let z = DMatrix::from_row_slice(n, z_idx.len(), &z_rows);
    let a = DMatrix::from_row_slice(n, a_idx.len(), &a_rows);
    let y = DVector::from_vec(y_rows);
    Dataset::new(
        z,
        a,
        y,
        Some(ColumnNames {
            z: roles.z.clone(),
            a: roles.a.clone(),
            y: roles.y.clone(),
        }),
    )
}

pub fn read_csv_path(path: &Path, roles: &CsvRoles) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, roles)
}

/// A dataset together with the centers and scales that standardized it.
/// Centers/scales are stored in Z.., A.., Y column order.
#[derive(Debug, Clone)]
pub struct StandardizedDataset {
    data: Dataset,
    centers: DVector<f64>,
    scales: DVector<f64>,
}

impl StandardizedDataset {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn centers(&self) -> &DVector<f64> {
        &self.centers
    }

    pub fn scales(&self) -> &DVector<f64> {
        &self.scales
    }

    pub fn scale_a(&self, j: usize) -> f64 {
        self.scales[self.data.l() + j]
    }

    pub fn scale_y(&self) -> f64 {
        self.scales[self.data.l() + self.data.p()]
    }

    /// Invert the standardization, recovering the original columns.
    pub fn destandardize(&self) -> Dataset {
        let l = self.data.l();
        let p = self.data.p();
        let z = DMatrix::from_fn(self.data.n(), l, |i, j| {
            self.data.z()[(i, j)] * self.scales[j] + self.centers[j]
        });
        let a = DMatrix::from_fn(self.data.n(), p, |i, j| {
            self.data.a()[(i, j)] * self.scales[l + j] + self.centers[l + j]
        });
        let y = DVector::from_fn(self.data.n(), |i, _| {
            self.data.y()[i] * self.scales[l + p] + self.centers[l + p]
        });
        Dataset {
            z,
            a,
            y,
            column_names: self.data.column_names().cloned(),
        }
    }
}

/// Center every column to mean zero and scale to unit sample standard
/// deviation (n-1 denominator), recording centers and scales for
/// back-transformation of effect estimates.
pub fn standardize(raw: &Dataset) -> Result<StandardizedDataset> {
    let names = raw.effective_names();
    let l = raw.l();
    let p = raw.p();
    let mut centers = DVector::zeros(l + p + 1);
    let mut scales = DVector::zeros(l + p + 1);

    let z_means = column_means(raw.z());
    let z_sds = column_sds(raw.z());
    let a_means = column_means(raw.a());
    let a_sds = column_sds(raw.a());
    let y_mean = raw.y().mean();
    let y_sd = {
        let ss: f64 = raw.y().iter().map(|v| (v - y_mean).powi(2)).sum();
        (ss / (raw.n() as f64 - 1.0)).sqrt()
    };

    for j in 0..l {
        if z_sds[j] <= DEGENERATE_SD {
            return Err(EuncError::DegenerateColumn {
                name: names.z[j].clone(),
                sd: z_sds[j],
                limit: DEGENERATE_SD,
            });
        }
        centers[j] = z_means[j];
        scales[j] = z_sds[j];
    }
    for j in 0..p {
        if a_sds[j] <= DEGENERATE_SD {
            return Err(EuncError::DegenerateColumn {
                name: names.a[j].clone(),
                sd: a_sds[j],
                limit: DEGENERATE_SD,
            });
        }
        centers[l + j] = a_means[j];
        scales[l + j] = a_sds[j];
    }
    if y_sd <= DEGENERATE_SD {
        return Err(EuncError::DegenerateColumn {
            name: names.y.clone(),
            sd: y_sd,
            limit: DEGENERATE_SD,
        });
    }
    centers[l + p] = y_mean;
    scales[l + p] = y_sd;

    let z = DMatrix::from_fn(raw.n(), l, |i, j| (raw.z()[(i, j)] - centers[j]) / scales[j]);
    let a = DMatrix::from_fn(raw.n(), p, |i, j| {
        (raw.a()[(i, j)] - centers[l + j]) / scales[l + j]
    });
    let y = DVector::from_fn(raw.n(), |i, _| (raw.y()[i] - centers[l + p]) / scales[l + p]);

    Ok(StandardizedDataset {
        data: Dataset {
            z,
            a,
            y,
            column_names: raw.column_names().cloned(),
        },
        centers,
        scales,
    })
}

/// Map a standardized-scale effect vector back to raw units:
/// `alpha_raw[j] = alpha_std[j] * scale_Y / scale_{A_j}`.
pub fn destandardize_effect(alpha_std: &DVector<f64>, std: &StandardizedDataset) -> DVector<f64> {
    let sy = std.scale_y();
    DVector::from_fn(alpha_std.len(), |j, _| alpha_std[j] * sy / std.scale_a(j))
}
