//! Individual-level risk-factor data and pairwise distance structures.
//!
//! A [`Population`] is a table of numeric covariates (one row per
//! individual, ids are 1-based row indices) plus an optional stack of
//! pairwise distance components. Multiple components allow an infection
//! kernel to mix, say, a Euclidean distance with same-class and
//! same-household indicators; expressions address them as `dist(i,k,c)`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, column `{column}`: value is not finite")]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: String,
    },
    #[error("{path}: row {row} has {got} fields, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("distance matrix {path} is {rows}x{cols}, expected {n}x{n} for this population")]
    MatrixShape {
        path: PathBuf,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("distance matrix {path}: row {row}, column {col}: cannot parse `{value}`")]
    BadMatrixCell {
        path: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },
    #[error("individual id {id} out of range 1..={n}")]
    IndividualOutOfRange { id: usize, n: usize },
    #[error("distance component {component} out of range 1..={d}")]
    ComponentOutOfRange { component: usize, d: usize },
    #[error("population has no distance structure")]
    NoDistances,
}

/// One component of a pairwise distance structure.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceSpec {
    /// Euclidean distance over the named covariate columns.
    Euclidean(Vec<String>),
    /// An explicit n-by-n matrix read from a CSV file (`inf` accepted).
    MatrixFile(PathBuf),
}

/// Immutable individual-level data: covariates and optional distances.
#[derive(Debug, Clone)]
pub struct Population {
    columns: Vec<String>,
    index: HashMap<String, usize>,
    /// Column-major covariate storage, each column has `n` entries.
    values: Vec<Vec<f64>>,
    /// Each component is an n*n row-major matrix; `distances[c][(i-1)*n + (k-1)]`.
    distances: Vec<Vec<f64>>,
    n: usize,
}

impl Population {
    /// Build directly from named columns. Used by tests and generators;
    /// file-based construction goes through [`load_population`].
    pub fn from_columns(
        columns: Vec<(String, Vec<f64>)>,
        distances: Vec<Vec<f64>>,
    ) -> Result<Self, PopulationError> {
        let n = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
        assert!(n >= 1, "population must contain at least one individual");
        let mut names = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        let mut index = HashMap::new();
        for (name, col) in columns {
            assert_eq!(col.len(), n, "column `{name}` length mismatch");
            index.insert(name.clone(), names.len());
            names.push(name);
            values.push(col);
        }
        for comp in &distances {
            assert_eq!(comp.len(), n * n, "distance component size mismatch");
        }
        Ok(Self {
            columns: names,
            index,
            values,
            distances,
            n,
        })
    }

    /// Number of individuals.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of distance components, 0 when no distances were supplied.
    pub fn distance_components(&self) -> usize {
        self.distances.len()
    }

    pub fn has_distances(&self) -> bool {
        !self.distances.is_empty()
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Covariate value for a 1-based individual id.
    pub fn covariate(&self, name: &str, individual: usize) -> Option<f64> {
        let col = *self.index.get(name)?;
        self.values[col].get(individual - 1).copied()
    }

    /// Stored pairwise entry; `i`, `k` and `component` are 1-based.
    ///
    /// Entries may be `+inf`; asymmetric matrices are permitted so no
    /// symmetry is assumed at read time.
    pub fn distance(&self, i: usize, k: usize, component: usize) -> Result<f64, PopulationError> {
        if self.distances.is_empty() {
            return Err(PopulationError::NoDistances);
        }
        if component < 1 || component > self.distances.len() {
            return Err(PopulationError::ComponentOutOfRange {
                component,
                d: self.distances.len(),
            });
        }
        for id in [i, k] {
            if id < 1 || id > self.n {
                return Err(PopulationError::IndividualOutOfRange { id, n: self.n });
            }
        }
        Ok(self.distances[component - 1][(i - 1) * self.n + (k - 1)])
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Population(n={}, covariates=[{}], distance components={})",
            self.n,
            self.columns.join(", "),
            self.distances.len()
        )
    }
}

/// Load risk factors from a CSV file (header row required) and assemble the
/// requested distance components. Euclidean components are computed once and
/// are symmetric with a zero diagonal; matrix files are taken verbatim.
pub fn load_population(
    risk_file: &Path,
    distance_specs: &[DistanceSpec],
) -> Result<Population, PopulationError> {
    let (columns, index, values, n) = read_risk_csv(risk_file)?;
    let mut distances = Vec::with_capacity(distance_specs.len());
    for spec in distance_specs {
        match spec {
            DistanceSpec::Euclidean(cols) => {
                let mut coord_cols = Vec::with_capacity(cols.len());
                for c in cols {
                    let idx =
                        *index
                            .get(c.as_str())
                            .ok_or_else(|| PopulationError::MissingColumn {
                                path: risk_file.to_path_buf(),
                                column: c.clone(),
                            })?;
                    coord_cols.push(&values[idx]);
                }
                distances.push(euclidean_matrix(&coord_cols, n));
            }
            DistanceSpec::MatrixFile(path) => {
                distances.push(read_matrix_csv(path, n)?);
            }
        }
    }
    Ok(Population {
        columns,
        index,
        values,
        distances,
        n,
    })
}

type RiskTable = (Vec<String>, HashMap<String, usize>, Vec<Vec<f64>>, usize);

fn read_risk_csv(path: &Path) -> Result<RiskTable, PopulationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => PopulationError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => PopulationError::Csv {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| PopulationError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.clone(), i);
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let mut n = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PopulationError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        if record.len() != headers.len() {
            return Err(PopulationError::Ragged {
                path: path.to_path_buf(),
                row: row_idx + 1,
                got: record.len(),
                expected: headers.len(),
            });
        }
        for (col_idx, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| PopulationError::BadCell {
                path: path.to_path_buf(),
                row: row_idx + 1,
                column: headers[col_idx].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(PopulationError::NonFinite {
                    path: path.to_path_buf(),
                    row: row_idx + 1,
                    column: headers[col_idx].clone(),
                });
            }
            values[col_idx].push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(PopulationError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok((headers, index, values, n))
}

fn euclidean_matrix(coords: &[&Vec<f64>], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let d2: f64 = coords
                .iter()
                .map(|col| {
                    let diff = col[i] - col[k];
                    diff * diff
                })
                .sum();
            let d = d2.sqrt();
            m[i * n + k] = d;
            m[k * n + i] = d;
        }
    }
    m
}

/// A distance matrix CSV has no header: n rows of n numeric fields.
/// `inf` (any case) and `Inf` parse to +infinity.
fn read_matrix_csv(path: &Path, n: usize) -> Result<Vec<f64>, PopulationError> {
    let text = std::fs::read_to_string(path).map_err(|e| PopulationError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut m = Vec::with_capacity(n * n);
    let mut rows = 0usize;
    for (row_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if rows == 0 && fields.len() != n {
            return Err(PopulationError::MatrixShape {
                path: path.to_path_buf(),
                rows: text.lines().filter(|l| !l.trim().is_empty()).count(),
                cols: fields.len(),
                n,
            });
        }
        if fields.len() != n {
            return Err(PopulationError::Ragged {
                path: path.to_path_buf(),
                row: row_idx + 1,
                got: fields.len(),
                expected: n,
            });
        }
        for (col_idx, cell) in fields.iter().enumerate() {
            let v = match cell.to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| PopulationError::BadMatrixCell {
                        path: path.to_path_buf(),
                        row: row_idx + 1,
                        col: col_idx + 1,
                        value: cell.to_string(),
                    })?,
            };
            m.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(PopulationError::MatrixShape {
            path: path.to_path_buf(),
            rows,
            cols: n,
            n,
        });
    }
    Ok(m)
}
