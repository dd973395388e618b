//! Datasets, role partitions and the cached design view used by every estimator.
//!
//! A dataset holds a target `y`, endogenous regressors `x` (n x d) and exogenous
//! variables `a` (n x q). A [`ModelPartition`] picks which columns of `x` and `a`
//! enter the structural equation; the design matrix is `Z = [X_* A_*]` while the
//! instrument matrix is always the full `A`.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub y_name: String,
    pub x_names: Vec<String>,
    pub a_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let x_names = (1..=x.ncols()).map(|j| format!("X{j}")).collect();
        let a_names = (1..=a.ncols()).map(|j| format!("A{j}")).collect();
        Self::with_names(y, x, a, "Y".into(), x_names, a_names)
    }

    pub fn with_names(
        y: DVector<f64>,
        x: DMatrix<f64>,
        a: DMatrix<f64>,
        y_name: String,
        x_names: Vec<String>,
        a_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || a.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, x has {}, a has {}",
                x.nrows(),
                a.nrows()
            )));
        }
        if x.ncols() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "need at least one endogenous and one exogenous column".into(),
            ));
        }
        if x_names.len() != x.ncols() || a_names.len() != a.ncols() {
            return Err(Error::DimensionMismatch("column names do not match column counts".into()));
        }
        let needed = x.ncols().max(a.ncols()).max(2);
        if n < needed {
            return Err(Error::TooFewRows { needed, got: n });
        }
        if y.iter().chain(x.iter()).chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains non-finite values".into()));
        }
        Ok(Self { y, x, a, y_name, x_names, a_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.a.ncols()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::DimensionMismatch(format!("row {bad} out of range")));
        }
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        let x = DMatrix::from_fn(rows.len(), self.d(), |i, j| self.x[(rows[i], j)]);
        let a = DMatrix::from_fn(rows.len(), self.q(), |i, j| self.a[(rows[i], j)]);
        Self::with_names(y, x, a, self.y_name.clone(), self.x_names.clone(), self.a_names.clone())
    }

    /// Prepends a column of ones named `const` to the exogenous block.
    pub fn with_intercept(&self) -> Self {
        let n = self.n();
        let mut a = DMatrix::from_element(n, self.q() + 1, 1.0);
        a.columns_mut(1, self.q()).copy_from(&self.a);
        let mut a_names = vec!["const".to_string()];
        a_names.extend(self.a_names.iter().cloned());
        Self { a, a_names, ..self.clone() }
    }
}

/// Which roles get demeaned by [`center`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roles {
    pub target: bool,
    pub endogenous: bool,
    pub exogenous: bool,
}

impl Roles {
    pub const ALL: Roles = Roles { target: true, endogenous: true, exogenous: true };
    pub const NONE: Roles = Roles { target: false, endogenous: false, exogenous: false };
}

fn demean_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Subtracts column means from the selected roles. A column named `const` is left alone.
pub fn center(ds: &Dataset, roles: Roles) -> Dataset {
    let mut out = ds.clone();
    if roles.target {
        let mean = out.y.mean();
        out.y.add_scalar_mut(-mean);
    }
    if roles.endogenous {
        out.x = demean_columns(&ds.x);
    }
    if roles.exogenous {
        for (j, name) in ds.a_names.iter().enumerate() {
            if name != "const" {
                let mean = ds.a.column(j).mean();
                out.a.column_mut(j).add_scalar_mut(-mean);
            }
        }
    }
    out
}

/// Column names for each role when reading a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub target: String,
    pub endogenous: Vec<String>,
    pub exogenous: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_csv(file, schema)
}

/// Reads a headed CSV. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let yi = find(&schema.target)?;
    let xi = schema.endogenous.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let ai = schema.exogenous.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut ys = Vec::new();
    let mut xs = Vec::new();
    let mut as_ = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |idx: usize, name: &str| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: row + 1,
                    column: name.to_string(),
                    value: raw.to_string(),
                })
        };
        ys.push(get(yi, &schema.target)?);
        for (&i, name) in xi.iter().zip(&schema.endogenous) {
            xs.push(get(i, name)?);
        }
        for (&i, name) in ai.iter().zip(&schema.exogenous) {
            as_.push(get(i, name)?);
        }
    }
    let n = ys.len();
    let needed = schema.endogenous.len().max(schema.exogenous.len()).max(2);
    if n < needed {
        return Err(Error::TooFewRows { needed, got: n });
    }
    Dataset::with_names(
        DVector::from_vec(ys),
        DMatrix::from_row_slice(n, schema.endogenous.len(), &xs),
        DMatrix::from_row_slice(n, schema.exogenous.len(), &as_),
        schema.target.clone(),
        schema.endogenous.clone(),
        schema.exogenous.clone(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentificationClass {
    Under,
    Just,
    Over,
}

impl std::fmt::Display for IdentificationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IdentificationClass::Under => "under-identified",
            IdentificationClass::Just => "just-identified",
            IdentificationClass::Over => "over-identified",
        })
    }
}

/// Indices of the endogenous and exogenous columns included in the structural equation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelPartition {
    pub included_endogenous: Vec<usize>,
    pub included_exogenous: Vec<usize>,
}

impl ModelPartition {
    pub fn new(included_endogenous: Vec<usize>, included_exogenous: Vec<usize>) -> Self {
        Self { included_endogenous, included_exogenous }
    }

    /// Every endogenous column included, every exogenous column excluded.
    pub fn all_endogenous(d: usize) -> Self {
        Self::new((0..d).collect(), Vec::new())
    }

    pub fn validate(&self, d: usize, q: usize) -> Result<()> {
        let check = |idx: &[usize], bound: usize, what: &str| -> Result<()> {
            let mut seen = HashSet::new();
            for &i in idx {
                if i >= bound {
                    return Err(Error::DimensionMismatch(format!("{what} index {i} out of range 0..{bound}")));
                }
                if !seen.insert(i) {
                    return Err(Error::DimensionMismatch(format!("{what} index {i} listed twice")));
                }
            }
            Ok(())
        };
        check(&self.included_endogenous, d, "endogenous")?;
        check(&self.included_exogenous, q, "exogenous")?;
        if self.included_endogenous.is_empty() && self.included_exogenous.is_empty() {
            return Err(Error::DimensionMismatch("structural equation has no regressors".into()));
        }
        Ok(())
    }

    /// Excluded instruments minus included endogenous regressors.
    pub fn degree(&self, q: usize) -> i64 {
        let q2 = q as i64 - self.included_exogenous.len() as i64;
        q2 - self.included_endogenous.len() as i64
    }

    pub fn identification(&self, q: usize) -> IdentificationClass {
        match self.degree(q) {
            d if d < 0 => IdentificationClass::Under,
            0 => IdentificationClass::Just,
            _ => IdentificationClass::Over,
        }
    }
}

fn pick_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Immutable, pre-multiplied view of a dataset under a partition.
///
/// Caches the Gram blocks so that a k-class solve costs O(p^3) after construction.
#[derive(Debug, Clone)]
pub struct DesignView {
    pub(crate) y: DVector<f64>,
    pub(crate) z: DMatrix<f64>,
    pub(crate) a: DMatrix<f64>,
    pub(crate) x_inc: DMatrix<f64>,
    pub(crate) a_inc: DMatrix<f64>,
    pub(crate) ztz: DMatrix<f64>,
    pub(crate) zty: DVector<f64>,
    pub(crate) atz: DMatrix<f64>,
    pub(crate) aty: DVector<f64>,
    /// (A'A)^{-1/2}
    pub(crate) ata_isqrt: DMatrix<f64>,
    /// Z' P_A Z
    pub(crate) ztpz: DMatrix<f64>,
    /// Z' P_A y
    pub(crate) ztpy: DVector<f64>,
    pub(crate) yty: f64,
    partition: ModelPartition,
    q: usize,
    rcond_ata: f64,
    regressor_names: Vec<String>,
}

impl DesignView {
    pub fn new(ds: &Dataset, partition: &ModelPartition) -> Result<Self> {
        partition.validate(ds.d(), ds.q())?;
        let x_inc = pick_columns(&ds.x, &partition.included_endogenous);
        let a_inc = pick_columns(&ds.a, &partition.included_exogenous);
        let mut z = DMatrix::zeros(ds.n(), x_inc.ncols() + a_inc.ncols());
        z.columns_mut(0, x_inc.ncols()).copy_from(&x_inc);
        z.columns_mut(x_inc.ncols(), a_inc.ncols()).copy_from(&a_inc);
        let a = ds.a.clone();
        let ata = a.transpose() * &a;
        let rcond_ata = linalg::check_gram(&ata, "A'A")?;
        let ata_isqrt = linalg::sym_inv_sqrt(&ata);
        let atz = a.transpose() * &z;
        let aty = a.transpose() * &ds.y;
        let sz = &ata_isqrt * &atz;
        let sy = &ata_isqrt * &aty;
        let mut regressor_names: Vec<String> =
            partition.included_endogenous.iter().map(|&j| ds.x_names[j].clone()).collect();
        regressor_names.extend(partition.included_exogenous.iter().map(|&j| ds.a_names[j].clone()));
        Ok(Self {
            ztz: z.transpose() * &z,
            zty: z.transpose() * &ds.y,
            ztpz: linalg::symmetrize(&(sz.transpose() * &sz)),
            ztpy: sz.transpose() * &sy,
            yty: ds.y.dot(&ds.y),
            y: ds.y.clone(),
            z,
            a,
            x_inc,
            a_inc,
            atz,
            aty,
            ata_isqrt,
            partition: partition.clone(),
            q: ds.q(),
            rcond_ata,
            regressor_names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of structural coefficients, d1 + q1.
    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d1(&self) -> usize {
        self.x_inc.ncols()
    }

    pub fn q1(&self) -> usize {
        self.a_inc.ncols()
    }

    pub fn q2(&self) -> usize {
        self.q - self.q1()
    }

    pub fn partition(&self) -> &ModelPartition {
        &self.partition
    }

    pub fn identification(&self) -> IdentificationClass {
        self.partition.identification(self.q)
    }

    pub fn rcond_ata(&self) -> f64 {
        self.rcond_ata
    }

    pub fn rcond_ztz(&self) -> f64 {
        linalg::rcond_sym(&self.ztz)
    }

    /// Names of the coefficients in the order of `Z`.
    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn residual(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.z * alpha
    }

    /// Mean squared residual, n^{-1} |y - Z alpha|^2.
    pub fn l_ols(&self, alpha: &DVector<f64>) -> f64 {
        self.residual(alpha).norm_squared() / self.n() as f64
    }

    /// n^{-1} r' P_A r with r = y - Z alpha.
    pub fn l_iv(&self, alpha: &DVector<f64>) -> f64 {
        let r = self.residual(alpha);
        let s = &self.ata_isqrt * (self.a.transpose() * r);
        s.norm_squared() / self.n() as f64
    }
}

/// P_A v for a full-column-rank `a`.
pub fn projection_apply(a: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != v.len() {
        return Err(Error::DimensionMismatch(format!("A has {} rows, v has {}", a.nrows(), v.len())));
    }
    linalg::check_gram(&(a.transpose() * a), "A'A")?;
    let q = a.clone().qr().q();
    Ok(&q * (q.transpose() * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, 3.0, -1.0]);
        let x = DMatrix::from_column_slice(5, 1, &[0.5, 1.0, 0.0, 2.0, -0.5]);
        let a = DMatrix::from_column_slice(5, 2, &[1.0, 0.0, -1.0, 2.0, 0.3, 0.2, 1.0, 0.5, -0.7, 0.1]);
        Dataset::new(y, x, a).unwrap()
    }

    #[test]
    fn identification_classes() {
        let p = ModelPartition::all_endogenous(1);
        assert_eq!(p.identification(2), IdentificationClass::Over);
        assert_eq!(p.identification(1), IdentificationClass::Just);
        let p = ModelPartition::all_endogenous(2);
        assert_eq!(p.identification(1), IdentificationClass::Under);
        let p = ModelPartition::new(vec![0], vec![0]);
        assert_eq!(p.identification(2), IdentificationClass::Just);
    }

    #[test]
    fn partition_validation() {
        assert!(ModelPartition::new(vec![1], vec![]).validate(1, 1).is_err());
        assert!(ModelPartition::new(vec![0, 0], vec![]).validate(2, 2).is_err());
        assert!(ModelPartition::new(vec![], vec![]).validate(1, 1).is_err());
    }

    #[test]
    fn csv_reads_roles_in_schema_order() {
        let text = "a1,y,x,a2\n1,2,3,4\n5,6,7,8\n9,10,11,13\n";
        let schema = ColumnSchema {
            target: "y".into(),
            endogenous: vec!["x".into()],
            exogenous: vec!["a2".into(), "a1".into()],
        };
        let ds = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.y.as_slice(), &[2.0, 6.0, 10.0]);
        assert_eq!(ds.a[(2, 0)], 13.0);
        assert_eq!(ds.a[(2, 1)], 9.0);
        assert_eq!(ds.a_names, vec!["a2", "a1"]);
    }

    #[test]
    fn csv_missing_column() {
        let schema = ColumnSchema { target: "y".into(), endogenous: vec!["x".into()], exogenous: vec!["z".into()] };
        let err = read_csv("y,x\n1,2\n3,4\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "z"));
    }

    #[test]
    fn csv_non_numeric_reports_row() {
        let schema = ColumnSchema { target: "y".into(), endogenous: vec!["x".into()], exogenous: vec!["a".into()] };
        let err = read_csv("y,x,a\n1,2,3\n4,NA,6\n7,8,9\n".as_bytes(), &schema).unwrap_err();
        match err {
            Error::NonNumeric { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_too_few_rows() {
        let schema = ColumnSchema { target: "y".into(), endogenous: vec!["x".into()], exogenous: vec!["a".into()] };
        assert!(matches!(read_csv("y,x,a\n1,2,3\n".as_bytes(), &schema), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn centering_zeroes_means_and_is_idempotent() {
        let ds = toy();
        let c = center(&ds, Roles::ALL);
        assert!(c.y.mean().abs() < 1e-15);
        for col in c.a.column_iter() {
            assert!(col.mean().abs() < 1e-15);
        }
        let cc = center(&c, Roles::ALL);
        assert!((cc.x.clone() - c.x.clone()).norm() < 1e-15);
    }

    #[test]
    fn centering_skips_intercept() {
        let ds = toy().with_intercept();
        let c = center(&ds, Roles::ALL);
        assert!(c.a.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn singular_instruments_rejected() {
        let mut ds = toy();
        let col = ds.a.column(0).clone_owned();
        ds.a.set_column(1, &(col * 2.0));
        let err = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap_err();
        assert!(matches!(err, Error::SingularGram { which: "A'A", .. }));
    }

    #[test]
    fn cached_losses_match_direct_computation() {
        let ds = toy();
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
        let alpha = DVector::from_vec(vec![0.7]);
        let r = &ds.y - &ds.x * &alpha;
        let pr = projection_apply(&ds.a, &r).unwrap();
        let n = ds.n() as f64;
        let ols = r.norm_squared() / n;
        let iv = r.dot(&pr) / n;
        assert!((view.l_ols(&alpha) - ols).abs() <= 1e-10 * ols);
        assert!((view.l_iv(&alpha) - iv).abs() <= 1e-10 * iv);
        let ztpz = ds.x.transpose() * DMatrix::from_columns(&[projection_apply(&ds.a, &ds.x.column(0).into_owned()).unwrap()]);
        assert!((view.ztpz[(0, 0)] - ztpz[(0, 0)]).abs() < 1e-10 * ztpz[(0, 0)].abs());
    }

    fn mat(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-3.0..3.0f64, rows * cols)
            .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_symmetric(a in mat(12, 3), u in mat(12, 1), v in mat(12, 1)) {
            prop_assume!(linalg::rcond_sym(&(a.transpose() * &a)) > 1e-6);
            let u = u.column(0).into_owned();
            let v = v.column(0).into_owned();
            let pv = projection_apply(&a, &v).unwrap();
            let ppv = projection_apply(&a, &pv).unwrap();
            prop_assert!((&ppv - &pv).norm() <= 1e-12 * (1.0 + pv.norm()));
            let pu = projection_apply(&a, &u).unwrap();
            let lhs = pu.dot(&v);
            let rhs = u.dot(&pv);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + u.norm() * v.norm()));
        }

        #[test]
        fn centering_commutes_with_projection(a in mat(10, 2), v in mat(10, 1)) {
            let y = v.column(0).into_owned();
            let ds = match Dataset::new(y.clone(), DMatrix::from_element(10, 1, 1.0), a) {
                Ok(ds) => ds,
                Err(_) => return Ok(()),
            };
            let c = center(&ds, Roles { target: false, endogenous: false, exogenous: true });
            prop_assume!(linalg::rcond_sym(&(c.a.transpose() * &c.a)) > 1e-6);
            let pv = projection_apply(&c.a, &y).unwrap();
            let cv = center(&Dataset { y: y.clone(), ..c.clone() }, Roles { target: true, endogenous: false, exogenous: false }).y;
            let pcv = projection_apply(&c.a, &cv).unwrap();
            let mean = pv.mean();
            let cpv = pv.add_scalar(-mean);
            prop_assert!((cpv - pcv).norm() <= 1e-10 * (1.0 + y.norm()));
        }
    }
}
