//! K-class family: OLS, TSLS, anchor regression, LIML, Fuller and the
//! minimum-norm-residual point of the IV moment set ("modified TSLS").
//!
//! Every k-class fit is computed from the Gram blocks cached in [`DesignView`]:
//!
//! ```text
//! alpha(kappa) = ((1-kappa) Z'Z + kappa Z'P_A Z)^{-1} ((1-kappa) Z'y + kappa Z'P_A y)
//! ```
//!
//! and for `kappa in [0, 1)` through the equivalent penalty form with
//! `lambda = kappa / (1 - kappa)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DesignView, IdentificationClass};
use crate::error::{Error, Result};
use crate::linalg;

/// kappa values this close below one are treated as exactly one when TSLS exists.
pub const KAPPA_ONE_BAND: f64 = 1e-8;

/// Above this penalty the under/just-identified solve switches to a bordered system.
const LAMBDA_BORDERED: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Ols,
    Tsls,
    KClass(f64),
    Anchor(f64),
    Liml,
    Fuller(f64),
    ModifiedTsls,
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Ols => write!(f, "ols"),
            EstimatorSpec::Tsls => write!(f, "tsls"),
            EstimatorSpec::KClass(k) => write!(f, "kclass:{k}"),
            EstimatorSpec::Anchor(l) => write!(f, "anchor:{l}"),
            EstimatorSpec::Liml => write!(f, "liml"),
            EstimatorSpec::Fuller(a) => write!(f, "fuller:{a}"),
            EstimatorSpec::ModifiedTsls => write!(f, "modified-tsls"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (lower.as_str(), None),
        };
        let num = |what: &str| -> Result<f64> {
            let raw = arg.ok_or_else(|| Error::InvalidParameter(format!("`{what}` needs a value, e.g. {what}:0.5")))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidParameter(format!("bad number `{raw}` for {what}")))
        };
        let spec = match head {
            "ols" => EstimatorSpec::Ols,
            "tsls" | "2sls" => EstimatorSpec::Tsls,
            "kclass" => EstimatorSpec::KClass(num("kclass")?),
            "anchor" => EstimatorSpec::Anchor(num("anchor")?),
            "liml" => EstimatorSpec::Liml,
            "fuller" => EstimatorSpec::Fuller(num("fuller")?),
            "modified-tsls" | "mtsls" => EstimatorSpec::ModifiedTsls,
            other => return Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
        };
        if arg.is_some() && !matches!(spec, EstimatorSpec::KClass(_) | EstimatorSpec::Anchor(_) | EstimatorSpec::Fuller(_)) {
            return Err(Error::InvalidParameter(format!("estimator `{head}` takes no argument")));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub identification: IdentificationClass,
    pub rcond_ztz: f64,
    pub rcond_ata: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub alpha: DVector<f64>,
    pub kappa_used: Option<f64>,
    pub lambda_used: Option<f64>,
    pub diagnostics: Diagnostics,
}

fn diagnostics(view: &DesignView, warnings: Vec<String>) -> Diagnostics {
    Diagnostics {
        identification: view.identification(),
        rcond_ztz: view.rcond_ztz(),
        rcond_ata: view.rcond_ata(),
        warnings,
    }
}

fn tsls_alpha(view: &DesignView) -> Result<DVector<f64>> {
    if view.identification() == IdentificationClass::Under {
        return Err(Error::UnidentifiedAtOne);
    }
    linalg::solve_checked(&view.ztpz, &view.ztpy, "Z'P_A Z")
}

/// Penalised least squares min |y - Z a|^2 + lambda |P_A (y - Z a)|^2 for lambda > -1.
pub(crate) fn anchor_alpha(view: &DesignView, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda > -1.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("anchor penalty must be finite and > -1, got {lambda}")));
    }
    if lambda > LAMBDA_BORDERED && view.identification() != IdentificationClass::Over {
        return bordered_alpha(view, lambda);
    }
    linalg::check_gram(&view.ztz, "Z'Z")?;
    let m = &view.ztz + &view.ztpz * lambda;
    let b = &view.zty + &view.ztpy * lambda;
    linalg::solve_checked(&m, &b, "k-class system")
}

/// Same solution as the penalty form, written as
/// `[Z'Z G'; G -I/lambda] [a; nu] = [Z'y; g]` with `G = (A'A)^{-1/2} A'Z`.
/// Stays well conditioned as lambda grows when G has full row rank.
fn bordered_alpha(view: &DesignView, lambda: f64) -> Result<DVector<f64>> {
    let (g, h) = whitened_constraint(view);
    let p = view.p();
    let q = g.nrows();
    let mut k = DMatrix::zeros(p + q, p + q);
    k.view_mut((0, 0), (p, p)).copy_from(&view.ztz);
    k.view_mut((0, p), (p, q)).copy_from(&g.transpose());
    k.view_mut((p, 0), (q, p)).copy_from(&g);
    for i in 0..q {
        k[(p + i, p + i)] = -1.0 / lambda;
    }
    let mut rhs = DVector::zeros(p + q);
    rhs.rows_mut(0, p).copy_from(&view.zty);
    rhs.rows_mut(p, q).copy_from(&h);
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularGram { which: "k-class system", rcond: 0.0 })?;
    Ok(sol.rows(0, p).into_owned())
}

fn whitened_constraint(view: &DesignView) -> (DMatrix<f64>, DVector<f64>) {
    (&view.ata_isqrt * &view.atz, &view.ata_isqrt * &view.aty)
}

/// Coefficients only; no diagnostics. Used in inner loops.
pub(crate) fn kclass_alpha(view: &DesignView, kappa: f64) -> Result<DVector<f64>> {
    if !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa must be finite, got {kappa}")));
    }
    let under = view.identification() == IdentificationClass::Under;
    if kappa == 1.0 {
        return tsls_alpha(view);
    }
    if kappa > 1.0 - KAPPA_ONE_BAND && kappa < 1.0 && !under {
        return tsls_alpha(view);
    }
    if (0.0..1.0).contains(&kappa) {
        return anchor_alpha(view, kappa / (1.0 - kappa));
    }
    let m = &view.ztz * (1.0 - kappa) + &view.ztpz * kappa;
    let b = &view.zty * (1.0 - kappa) + &view.ztpy * kappa;
    linalg::solve_checked(&m, &b, "k-class system")
}

fn kappa_lambda(kappa: f64) -> Option<f64> {
    (0.0..1.0).contains(&kappa).then(|| kappa / (1.0 - kappa))
}

pub fn kclass_estimate(view: &DesignView, kappa: f64) -> Result<EstimateResult> {
    let alpha = kclass_alpha(view, kappa)?;
    let mut warnings = Vec::new();
    if !(0.0..=1.0).contains(&kappa) {
        warnings.push(format!("kappa = {kappa} lies outside [0, 1]"));
    }
    Ok(EstimateResult {
        alpha,
        kappa_used: Some(kappa),
        lambda_used: kappa_lambda(kappa),
        diagnostics: diagnostics(view, warnings),
    })
}

pub fn anchor_estimate(view: &DesignView, lambda: f64) -> Result<EstimateResult> {
    let alpha = anchor_alpha(view, lambda)?;
    Ok(EstimateResult {
        alpha,
        kappa_used: Some(lambda / (1.0 + lambda)),
        lambda_used: Some(lambda),
        diagnostics: diagnostics(view, Vec::new()),
    })
}

pub fn ols_estimate(view: &DesignView) -> Result<EstimateResult> {
    kclass_estimate(view, 0.0)
}

pub fn tsls_estimate(view: &DesignView) -> Result<EstimateResult> {
    if view.identification() == IdentificationClass::Under {
        return Err(Error::UnderIdentified);
    }
    let alpha = tsls_alpha(view)?;
    Ok(EstimateResult {
        alpha,
        kappa_used: Some(1.0),
        lambda_used: None,
        diagnostics: diagnostics(view, Vec::new()),
    })
}

/// Least-squares point among all `a` with `A'Z a = A'y`.
pub(crate) fn modified_tsls_alpha(view: &DesignView) -> Result<DVector<f64>> {
    if view.identification() == IdentificationClass::Over {
        return Err(Error::InfeasibleConstraint);
    }
    let (g, h) = whitened_constraint(view);
    let p = view.p();
    let q = g.nrows();
    let mut k = DMatrix::zeros(p + q, p + q);
    k.view_mut((0, 0), (p, p)).copy_from(&view.ztz);
    k.view_mut((0, p), (p, q)).copy_from(&g.transpose());
    k.view_mut((p, 0), (q, p)).copy_from(&g);
    let mut rhs = DVector::zeros(p + q);
    rhs.rows_mut(0, p).copy_from(&view.zty);
    rhs.rows_mut(p, q).copy_from(&h);
    let sv = k.clone().singular_values();
    let top = sv.max();
    let sol = if top > 0.0 && sv.min() / top >= linalg::RCOND_MIN {
        k.lu().solve(&rhs).ok_or(Error::SingularGram { which: "KKT system", rcond: 0.0 })?
    } else {
        linalg::pinv(&k, linalg::RCOND_MIN) * rhs
    };
    Ok(sol.rows(0, p).into_owned())
}

pub fn modified_tsls_estimate(view: &DesignView) -> Result<EstimateResult> {
    let alpha = modified_tsls_alpha(view)?;
    Ok(EstimateResult {
        alpha,
        kappa_used: None,
        lambda_used: None,
        diagnostics: diagnostics(view, Vec::new()),
    })
}

/// Smallest root of det(W1 - k W) = 0, where W and W1 are the cross products of
/// `[y X_*]` after partialling out all of `A` and only the included `A_*`.
pub fn liml_kappa(view: &DesignView) -> Result<f64> {
    let mut yx = DMatrix::zeros(view.n(), 1 + view.d1());
    yx.set_column(0, &view.y);
    yx.columns_mut(1, view.d1()).copy_from(&view.x_inc);
    let r = linalg::residualize(&view.a, &yx);
    let r1 = linalg::residualize(&view.a_inc, &yx);
    let w = linalg::symmetrize(&(r.transpose() * &r));
    let w1 = linalg::symmetrize(&(r1.transpose() * &r1));
    linalg::min_generalized_eigenvalue(&w1, &w)
}

pub fn fuller_kappa(view: &DesignView, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("Fuller constant must be positive, got {a}")));
    }
    if view.n() <= view.q() {
        return Err(Error::TooFewRows { needed: view.q() + 1, got: view.n() });
    }
    Ok(liml_kappa(view)? - a / (view.n() - view.q()) as f64)
}

pub fn estimate(view: &DesignView, spec: &EstimatorSpec) -> Result<EstimateResult> {
    match *spec {
        EstimatorSpec::Ols => ols_estimate(view),
        EstimatorSpec::Tsls => tsls_estimate(view),
        EstimatorSpec::KClass(k) => kclass_estimate(view, k),
        EstimatorSpec::Anchor(l) => anchor_estimate(view, l),
        EstimatorSpec::Liml => kclass_estimate(view, liml_kappa(view)?).map(|mut r| {
            r.diagnostics.warnings.clear();
            r
        }),
        EstimatorSpec::Fuller(a) => kclass_estimate(view, fuller_kappa(view, a)?).map(|mut r| {
            r.diagnostics.warnings.clear();
            r
        }),
        EstimatorSpec::ModifiedTsls => modified_tsls_estimate(view),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, ModelPartition};
    use crate::test_util::{random_dataset, Lcg};

    fn scalar_view(y: &[f64], x: &[f64], a: &[f64]) -> DesignView {
        let n = y.len();
        let ds = Dataset::new(
            DVector::from_column_slice(y),
            DMatrix::from_column_slice(n, 1, x),
            DMatrix::from_column_slice(n, 1, a),
        )
        .unwrap();
        DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap()
    }

    #[test]
    fn scalar_kclass_matches_hand_sums() {
        let y = [1.0, -0.5, 2.0, 0.3, 1.1, -1.4];
        let x = [0.8, -0.1, 1.5, 0.2, 0.9, -1.0];
        let a = [1.0, 0.0, 1.2, -0.3, 0.4, -0.9];
        let view = scalar_view(&y, &x, &a);
        let s = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        for &k in &[0.0, 0.3, 0.75, 0.999, 1.0, 1.2, -0.4] {
            let pxy = s(&a, &x) * s(&a, &y) / s(&a, &a);
            let pxx = s(&a, &x).powi(2) / s(&a, &a);
            let num = (1.0 - k) * s(&x, &y) + k * pxy;
            let den = (1.0 - k) * s(&x, &x) + k * pxx;
            let got = kclass_estimate(&view, k).unwrap().alpha[0];
            assert!((got - num / den).abs() < 1e-12 * (1.0 + got.abs()), "kappa {k}");
        }
    }

    #[test]
    fn tsls_equals_two_stage_regression() {
        let mut rng = Lcg::new(3);
        let ds = random_dataset(&mut rng, 40, 2, 4, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        let fitted_x = {
            let coef = ds.a.clone().svd(true, true).solve(&ds.x, 1e-14).unwrap();
            &ds.a * coef
        };
        let second = fitted_x.clone().svd(true, true).solve(&ds.y, 1e-14).unwrap();
        let got = tsls_estimate(&view).unwrap().alpha;
        assert!((got - second).norm() < 1e-10);
    }

    #[test]
    fn ols_equals_least_squares() {
        let mut rng = Lcg::new(5);
        let ds = random_dataset(&mut rng, 30, 2, 3, 0.5);
        let part = ModelPartition::new(vec![0, 1], vec![2]);
        let view = DesignView::new(&ds, &part).unwrap();
        let lstsq = view.z.clone().svd(true, true).solve(&ds.y, 1e-14).unwrap();
        assert!((ols_estimate(&view).unwrap().alpha - lstsq).norm() < 1e-10);
    }

    #[test]
    fn anchor_and_kappa_forms_agree() {
        let mut rng = Lcg::new(11);
        let ds = random_dataset(&mut rng, 50, 2, 3, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        for &lam in &[0.0, 0.5, 3.0, 40.0, 1e4] {
            let a1 = anchor_estimate(&view, lam).unwrap().alpha;
            let a2 = kclass_estimate(&view, lam / (1.0 + lam)).unwrap().alpha;
            assert!((&a1 - &a2).norm() <= 1e-10 * (1.0 + a1.norm()), "lambda {lam}");
        }
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = Lcg::new(17);
        for _ in 0..20 {
            let ds = random_dataset(&mut rng, 35, 2, 3, 0.7);
            let view = DesignView::new(&ds, &ModelPartition::new(vec![0, 1], vec![0])).unwrap();
            for &k in &[0.0, 0.2, 0.6, 0.95] {
                let alpha = kclass_estimate(&view, k).unwrap().alpha;
                // Z'((1-k)I + k P_A)(y - Z a) = 0
                let r = view.residual(&alpha);
                let pr = crate::data::projection_apply(&ds.a, &r).unwrap();
                let py = crate::data::projection_apply(&ds.a, &ds.y).unwrap();
                let lhs = view.z.transpose() * (&r * (1.0 - k) + pr * k);
                let scale = (view.z.transpose() * (&ds.y * (1.0 - k) + py * k)).norm();
                assert!(lhs.norm() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn kappa_just_below_one_uses_tsls() {
        let mut rng = Lcg::new(23);
        let ds = random_dataset(&mut rng, 30, 1, 2, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
        let t = tsls_estimate(&view).unwrap().alpha;
        let k = kclass_estimate(&view, 1.0 - 1e-9).unwrap().alpha;
        assert_eq!(t, k);
    }

    #[test]
    fn under_identified_errors() {
        let mut rng = Lcg::new(29);
        let ds = random_dataset(&mut rng, 30, 2, 1, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        assert!(matches!(kclass_estimate(&view, 1.0), Err(Error::UnidentifiedAtOne)));
        assert!(matches!(tsls_estimate(&view), Err(Error::UnderIdentified)));
        // close to one is still a regular solve here
        assert!(kclass_estimate(&view, 1.0 - 1e-9).is_ok());
    }

    #[test]
    fn collinear_regressors_flagged() {
        let mut rng = Lcg::new(31);
        let mut ds = random_dataset(&mut rng, 30, 2, 3, 0.5);
        let c = ds.x.column(0).into_owned();
        ds.x.set_column(1, &(c * 3.0));
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        assert!(matches!(kclass_estimate(&view, 0.5), Err(Error::SingularGram { which: "Z'Z", .. })));
    }

    #[test]
    fn liml_just_identified_is_one_and_equals_tsls() {
        let mut rng = Lcg::new(37);
        let ds = random_dataset(&mut rng, 60, 2, 2, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        let k = liml_kappa(&view).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
        let l = estimate(&view, &EstimatorSpec::Liml).unwrap().alpha;
        let t = tsls_estimate(&view).unwrap().alpha;
        assert!((l - t).norm() < 1e-8);
    }

    #[test]
    fn liml_matches_quadratic_root_for_one_regressor() {
        // With [y x] two columns, kappa is the smaller root of det(W1 - k W) = 0.
        let mut rng = Lcg::new(41);
        let ds = random_dataset(&mut rng, 80, 1, 3, 0.6);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
        let yx = DMatrix::from_columns(&[ds.y.clone(), ds.x.column(0).into_owned()]);
        let mut r = yx.clone();
        for j in 0..2 {
            let c = yx.column(j).into_owned();
            let p = crate::data::projection_apply(&ds.a, &c).unwrap();
            r.set_column(j, &(c - p));
        }
        let w = r.transpose() * &r;
        let w1 = yx.transpose() * &yx;
        // det(W1 - k W) = a k^2 + b k + c
        let a = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
        let b = -(w1[(0, 0)] * w[(1, 1)] + w[(0, 0)] * w1[(1, 1)] - w1[(0, 1)] * w[(1, 0)] - w[(0, 1)] * w1[(1, 0)]);
        let c = w1[(0, 0)] * w1[(1, 1)] - w1[(0, 1)] * w1[(1, 0)];
        let root = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let k = liml_kappa(&view).unwrap();
        assert!((k - root).abs() < 1e-9 * root);
        assert!(k >= 1.0 - 1e-10);
    }

    #[test]
    fn liml_without_excluded_instruments_is_one() {
        let mut rng = Lcg::new(43);
        let ds = random_dataset(&mut rng, 40, 1, 2, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::new(vec![0], vec![0, 1])).unwrap();
        assert!((liml_kappa(&view).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fuller_shifts_liml() {
        let mut rng = Lcg::new(47);
        let ds = random_dataset(&mut rng, 100, 1, 3, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
        let l = liml_kappa(&view).unwrap();
        assert!((fuller_kappa(&view, 1.0).unwrap() - (l - 1.0 / 97.0)).abs() < 1e-14);
        assert!((fuller_kappa(&view, 4.0).unwrap() - (l - 4.0 / 97.0)).abs() < 1e-14);
        assert!(fuller_kappa(&view, 0.0).is_err());
    }

    #[test]
    fn modified_tsls_hits_moment_set_with_least_ols_loss() {
        let mut rng = Lcg::new(53);
        let ds = random_dataset(&mut rng, 50, 3, 2, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(3)).unwrap();
        let alpha = modified_tsls_estimate(&view).unwrap().alpha;
        let gap = ds.a.transpose() * view.residual(&alpha);
        assert!(gap.norm() < 1e-9 * (1.0 + (ds.a.transpose() * &ds.y).norm()));
        assert!(view.l_iv(&alpha) < 1e-20 + 1e-12 * view.l_ols(&alpha));
        // any move inside the null space of A'Z keeps feasibility but cannot lower the loss
        let atz = &view.atz;
        let eig = nalgebra::SymmetricEigen::new(atz.transpose() * atz);
        let (k, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        let null_dir = eig.eigenvectors.column(k).into_owned();
        assert!((atz * &null_dir).norm() < 1e-10 * atz.norm());
        let base = view.l_ols(&alpha);
        for &s in &[-0.1, 0.05, 0.3] {
            assert!(view.l_ols(&(&alpha + &null_dir * s)) >= base - 1e-14);
        }
    }

    #[test]
    fn modified_tsls_just_identified_is_tsls() {
        let mut rng = Lcg::new(59);
        let ds = random_dataset(&mut rng, 50, 2, 2, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        let m = modified_tsls_estimate(&view).unwrap().alpha;
        let t = tsls_estimate(&view).unwrap().alpha;
        assert!((m - t).norm() < 1e-9);
    }

    #[test]
    fn modified_tsls_over_identified_is_infeasible() {
        let mut rng = Lcg::new(61);
        let ds = random_dataset(&mut rng, 50, 1, 3, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
        assert!(matches!(modified_tsls_estimate(&view), Err(Error::InfeasibleConstraint)));
    }

    #[test]
    fn huge_penalty_under_identified_tends_to_modified_tsls() {
        let mut rng = Lcg::new(67);
        let ds = random_dataset(&mut rng, 60, 2, 1, 0.5);
        let view = DesignView::new(&ds, &ModelPartition::all_endogenous(2)).unwrap();
        let m = modified_tsls_alpha(&view).unwrap();
        let far = anchor_alpha(&view, 1e14).unwrap();
        assert!((&far - &m).norm() < 1e-6 * (1.0 + m.norm()));
        // both branches agree on either side of the switch
        let lo = anchor_alpha(&view, LAMBDA_BORDERED).unwrap();
        let hi = anchor_alpha(&view, LAMBDA_BORDERED * (1.0 + 1e-12)).unwrap();
        assert!((lo - hi).norm() < 1e-6);
    }

    #[test]
    fn spec_parsing_round_trips() {
        for s in ["ols", "tsls", "kclass:0.25", "anchor:3", "liml", "fuller:4", "modified-tsls"] {
            let spec: EstimatorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<EstimatorSpec>().unwrap(), spec);
        }
        assert!("kclass".parse::<EstimatorSpec>().is_err());
        assert!("ols:1".parse::<EstimatorSpec>().is_err());
        assert!("median".parse::<EstimatorSpec>().is_err());
    }
}
