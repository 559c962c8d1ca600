//! Model frame: ingestion, validation and the outcome / quantile-index grids.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::stats::sort_floats;

/// Column names playing each role in the model frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnRoles {
    pub outcome: String,
    pub covariates: Vec<String>,
    pub weight: Option<String>,
    pub group: Option<String>,
    pub censoring: Option<String>,
    /// Counterfactual covariates, one per entry of `covariates`, same order.
    pub counterfactual: Vec<String>,
    /// Subset of `covariates` driving the scale in the location-scale model.
    pub scale: Vec<String>,
    /// Subset of `counterfactual` used as counterfactual scale variables.
    pub counterfactual_scale: Vec<String>,
}

impl ColumnRoles {
    pub fn new(outcome: impl Into<String>, covariates: &[&str]) -> Self {
        Self {
            outcome: outcome.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }
}

/// Outcome, design matrix (intercept in column 0) and optional role columns.
#[derive(Debug, Clone)]
pub struct ObservationTable<T> {
    outcome: Vec<T>,
    covariates: Matrix<T>,
    weights: Vec<T>,
    group: Option<Vec<u8>>,
    censoring: Option<Vec<bool>>,
    counterfactual: Option<Matrix<T>>,
    scale_columns: Option<Vec<usize>>,
    counterfactual_scale_columns: Option<Vec<usize>>,
    covariate_names: Vec<String>,
}

fn with_intercept<T: Real>(raw: &Matrix<T>) -> Matrix<T> {
    let (n, k) = (raw.nrows(), raw.ncols());
    let mut out = Matrix::zeros(n, k + 1);
    for i in 0..n {
        let row = out.row_mut(i);
        row[0] = T::one();
        row[1..].copy_from_slice(raw.row(i));
    }
    out
}

impl<T: Real> ObservationTable<T> {
    /// Builds a table from an outcome and a covariate matrix *without* the
    /// constant column; the intercept is prepended here.
    pub fn new(outcome: Vec<T>, covariates: Matrix<T>) -> Result<Self> {
        let n = outcome.len();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        if covariates.nrows() != n {
            return Err(Error::invalid(format!(
                "covariate matrix has {} rows, outcome has {n}",
                covariates.nrows()
            )));
        }
        if outcome.iter().any(|v| !v.is_finite()) || covariates.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in outcome or covariates"));
        }
        if n > 1 {
            for j in 0..covariates.ncols() {
                let first = covariates[(0, j)];
                if (1..n).all(|i| covariates[(i, j)] == first) {
                    return Err(Error::invalid(format!(
                        "covariate column {} is constant; the intercept is added automatically",
                        j + 1
                    )));
                }
            }
        }
        let covariate_names = (1..=covariates.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            outcome,
            covariates: with_intercept(&covariates),
            weights: vec![T::one(); n],
            group: None,
            censoring: None,
            counterfactual: None,
            scale_columns: None,
            counterfactual_scale_columns: None,
            covariate_names,
        })
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::invalid("weights length differs from outcome length"));
        }
        validate_weights(&weights)?;
        self.weights = weights;
        Ok(self)
    }

    pub fn with_group(mut self, group: Vec<u8>) -> Result<Self> {
        if group.len() != self.n() {
            return Err(Error::invalid("group length differs from outcome length"));
        }
        if let Some(bad) = group.iter().find(|&&g| g > 1) {
            return Err(Error::invalid(format!("group takes value {bad}; only 0 and 1 are allowed")));
        }
        for g in 0..=1u8 {
            if !group.contains(&g) {
                return Err(Error::EmptyGroup(g));
            }
        }
        self.group = Some(group);
        Ok(self)
    }

    pub fn with_censoring(mut self, censored: Vec<bool>) -> Result<Self> {
        if censored.len() != self.n() {
            return Err(Error::invalid("censoring length differs from outcome length"));
        }
        self.censoring = Some(censored);
        Ok(self)
    }

    /// Counterfactual covariates without the constant column, one column per
    /// covariate in the same order.
    pub fn with_counterfactual(mut self, counterfactual: Matrix<T>) -> Result<Self> {
        let expected = self.dx() - 1;
        if counterfactual.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: counterfactual.ncols(),
            });
        }
        if counterfactual.nrows() != self.n() {
            return Err(Error::invalid("counterfactual covariates row count differs from outcome length"));
        }
        self.counterfactual = Some(with_intercept(&counterfactual));
        Ok(self)
    }

    /// Scale-model columns as indices into the design (0 is the intercept,
    /// which is always included).
    pub fn with_scale_columns(mut self, columns: Vec<usize>, counterfactual: Option<Vec<usize>>) -> Result<Self> {
        let normalize = |mut cols: Vec<usize>| -> Result<Vec<usize>> {
            if let Some(&bad) = cols.iter().find(|&&c| c >= self.dx()) {
                return Err(Error::invalid(format!("scale column index {bad} out of range")));
            }
            cols.push(0);
            cols.sort_unstable();
            cols.dedup();
            Ok(cols)
        };
        let cols = normalize(columns)?;
        let cf = counterfactual.map(normalize).transpose()?;
        if let Some(cf) = &cf {
            if cf.len() != cols.len() {
                return Err(Error::DimensionMismatch {
                    expected: cols.len(),
                    found: cf.len(),
                });
            }
        }
        self.scale_columns = Some(cols);
        self.counterfactual_scale_columns = cf;
        Ok(self)
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Self {
        if names.len() == self.dx() - 1 {
            self.covariate_names = names;
        }
        self
    }

    /// Copy of the table carrying different observation weights (used by
    /// the bootstrap; zero weights are allowed here).
    pub(crate) fn reweighted(&self, weights: Vec<T>) -> Self {
        debug_assert_eq!(weights.len(), self.n());
        Self {
            weights,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    /// Number of design columns including the intercept.
    pub fn dx(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcome(&self) -> &[T] {
        &self.outcome
    }

    pub fn covariates(&self) -> &Matrix<T> {
        &self.covariates
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn group(&self) -> Option<&[u8]> {
        self.group.as_deref()
    }

    pub fn censoring(&self) -> Option<&[bool]> {
        self.censoring.as_deref()
    }

    pub fn counterfactual_covariates(&self) -> Option<&Matrix<T>> {
        self.counterfactual.as_ref()
    }

    pub fn scale_columns(&self) -> Option<&[usize]> {
        self.scale_columns.as_deref()
    }

    pub fn counterfactual_scale_columns(&self) -> Option<&[usize]> {
        self.counterfactual_scale_columns.as_deref()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }
}

fn validate_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    if weights.iter().copied().sum::<T>() <= T::zero() {
        return Err(Error::invalid("weights must sum to a positive value"));
    }
    Ok(())
}

/// Reads a comma-separated file with a header row. Rows with an empty cell in
/// any used column are dropped; retained rows keep their file order.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<ObservationTable<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, roles)
}

pub fn read_csv<T: Real, R: std::io::Read>(reader: R, roles: &ColumnRoles) -> Result<ObservationTable<T>> {
    if !roles.counterfactual.is_empty() && roles.counterfactual.len() != roles.covariates.len() {
        return Err(Error::invalid(format!(
            "counterfactual variables must contain exactly as many columns as covariates ({} vs {})",
            roles.counterfactual.len(),
            roles.covariates.len()
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let col = |name: &str| -> Result<usize> {
        index
            .get(name.trim())
            .copied()
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };

    let outcome_c = col(&roles.outcome)?;
    let cov_c = roles.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let cf_c = roles.counterfactual.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let weight_c = roles.weight.as_deref().map(col).transpose()?;
    let group_c = roles.group.as_deref().map(col).transpose()?;
    let cens_c = roles.censoring.as_deref().map(col).transpose()?;

    let position = |names: &[String], among: &[String], list: &str| -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                among
                    .iter()
                    .position(|c| c == n)
                    .map(|p| p + 1)
                    .ok_or_else(|| Error::invalid(format!("scale variable `{n}` must also be one of the {list}")))
            })
            .collect()
    };
    let scale_idx = position(&roles.scale, &roles.covariates, "covariates")?;
    let cf_scale_idx = position(&roles.counterfactual_scale, &roles.counterfactual, "counterfactual variables")?;

    let mut used: Vec<(usize, &str)> = vec![(outcome_c, roles.outcome.as_str())];
    used.extend(cov_c.iter().zip(&roles.covariates).map(|(&c, n)| (c, n.as_str())));
    used.extend(cf_c.iter().zip(&roles.counterfactual).map(|(&c, n)| (c, n.as_str())));
    for (c, n) in [(weight_c, &roles.weight), (group_c, &roles.group), (cens_c, &roles.censoring)] {
        if let (Some(c), Some(n)) = (c, n) {
            used.push((c, n.as_str()));
        }
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut cf = Vec::new();
    let mut w = Vec::new();
    let mut g = Vec::new();
    let mut cens = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let line = row_no + 2;
        let mut values = HashMap::with_capacity(used.len());
        let mut missing = false;
        for &(c, name) in &used {
            let cell = record.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                missing = true;
                break;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: line,
                column: name.to_string(),
                value: cell.to_string(),
            })?;
            values.insert(c, v);
        }
        if missing {
            continue;
        }
        y.push(T::lit(values[&outcome_c]));
        x.extend(cov_c.iter().map(|c| T::lit(values[c])));
        cf.extend(cf_c.iter().map(|c| T::lit(values[c])));
        if let Some(c) = weight_c {
            w.push(T::lit(values[&c]));
        }
        if let Some(c) = group_c {
            g.push(binary_cell(values[&c], roles.group.as_deref().unwrap_or(""), line)?);
        }
        if let Some(c) = cens_c {
            cens.push(binary_cell(values[&c], roles.censoring.as_deref().unwrap_or(""), line)? == 1);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let covs = Matrix::from_vec(n, cov_c.len(), x)?;
    let mut table = ObservationTable::new(y, covs)?.with_covariate_names(roles.covariates.clone());
    if weight_c.is_some() {
        table = table.with_weights(w)?;
    }
    if group_c.is_some() {
        table = table.with_group(g)?;
    }
    if cens_c.is_some() {
        table = table.with_censoring(cens)?;
    }
    if !cf_c.is_empty() {
        table = table.with_counterfactual(Matrix::from_vec(n, cf_c.len(), cf)?)?;
    }
    if !scale_idx.is_empty() || !cf_scale_idx.is_empty() {
        let base = if scale_idx.is_empty() {
            (1..table.dx()).collect()
        } else {
            scale_idx
        };
        let cf = (!cf_scale_idx.is_empty()).then_some(cf_scale_idx);
        table = table.with_scale_columns(base, cf)?;
    }
    Ok(table)
}

fn binary_cell(v: f64, column: &str, line: usize) -> Result<u8> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::invalid(format!(
            "column `{column}` must be 0/1, found {v} on line {line}"
        )))
    }
}

/// Strictly increasing outcome thresholds drawn from the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct YGrid<T>(Vec<T>);

impl<T: Real> YGrid<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of `y` in the grid, exact match only.
    pub fn position(&self, y: T) -> Option<usize> {
        self.0
            .binary_search_by(|v| v.partial_cmp(&y).expect("NaN in grid"))
            .ok()
    }

    /// Wraps already sorted, strictly increasing thresholds.
    pub fn from_sorted(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid values must be strictly increasing"));
        }
        Ok(Self(values))
    }
}

/// Selects `nreg` thresholds at evenly spaced order-statistic positions of
/// the distinct observed outcomes (all of them when `nreg` is at least the
/// number of distinct values).
pub fn make_ygrid<T: Real>(outcome: &[T], nreg: usize) -> Result<YGrid<T>> {
    if outcome.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if nreg == 0 {
        return Err(Error::invalid("nreg must be at least 1"));
    }
    let mut distinct = outcome.to_vec();
    sort_floats(&mut distinct);
    distinct.dedup();
    let m = distinct.len();
    if nreg >= m {
        return Ok(YGrid(distinct));
    }
    if nreg == 1 {
        // a single threshold only carries information at the top
        return Ok(YGrid(vec![distinct[m - 1]]));
    }
    let step = (m - 1) as f64 / (nreg - 1) as f64;
    let values = (0..nreg)
        .map(|i| {
            let pos = (1.0 + i as f64 * step).round() as usize;
            distinct[pos - 1]
        })
        .collect();
    Ok(YGrid(values))
}

/// Equally spaced quantile indexes from `trimming` to `1 - trimming`.
#[derive(Debug, Clone, PartialEq)]
pub struct UGrid<T>(Vec<T>);

impl<T: Real> UGrid<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn make_ugrid<T: Real>(trimming: T, nreg: usize) -> Result<UGrid<T>> {
    if !(trimming > T::zero() && trimming < T::lit(0.5)) {
        return Err(Error::invalid(format!("trimming {trimming} outside (0, 0.5)")));
    }
    if nreg < 2 {
        return Err(Error::invalid("the quantile grid needs nreg >= 2"));
    }
    let span = T::one() - trimming - trimming;
    let denom = T::lit((nreg - 1) as f64);
    let mut values: Vec<T> = (0..nreg)
        .map(|i| trimming + span * T::lit(i as f64) / denom)
        .collect();
    values[nreg - 1] = T::one() - trimming;
    Ok(UGrid(values))
}
