//! Chi-squared quantiles, the scaled IV/OLS loss-ratio test, the
//! Anderson-Rubin statistic and a weak-instrument summary.

use nalgebra::DMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::data::DesignView;
use crate::error::{Error, Result};
use crate::linalg;

pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(0.5 * dof, 0.5 * x)
}

fn chi2_pdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * dof;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Inverse chi-squared CDF; accurate to 1e-12 in probability.
pub fn chi2_quantile(dof: f64, p: f64) -> Result<f64> {
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(Error::InvalidParameter(format!("degrees of freedom must be positive, got {dof}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("probability must lie in (0, 1), got {p}")));
    }
    // Wilson-Hilferty starting point
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let c = 2.0 / (9.0 * dof);
    let mut x = (dof * (1.0 - c + z * c.sqrt()).powi(3)).max(f64::MIN_POSITIVE);

    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    while chi2_cdf(dof, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = chi2_cdf(dof, x) - p;
        if f.abs() <= 4.0 * f64::EPSILON * p {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chi2_pdf(dof, x);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// c(n) = n
    Plain,
    /// c(n) = n - q + Q, which makes acceptance coincide with the Anderson-Rubin test.
    #[default]
    AndersonRubin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub p_min: f64,
    pub scaling: Scaling,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { p_min: 0.05, scaling: Scaling::AndersonRubin }
    }
}

impl TestConfig {
    pub fn new(p_min: f64, scaling: Scaling) -> Self {
        Self { p_min, scaling }
    }

    /// Threshold and scaling for a sample of size `n` with `q` instruments.
    pub fn context(&self, n: usize, q: usize) -> Result<TestContext> {
        if !(self.p_min > 0.0 && self.p_min < 1.0) {
            return Err(Error::InvalidParameter(format!("p_min must lie in (0, 1), got {}", self.p_min)));
        }
        let threshold = chi2_quantile(q as f64, 1.0 - self.p_min)?;
        let c_n = match self.scaling {
            Scaling::Plain => n as f64,
            Scaling::AndersonRubin => {
                if n <= q {
                    return Err(Error::TooFewRows { needed: q + 1, got: n });
                }
                (n - q) as f64 + threshold
            }
        };
        Ok(TestContext { c_n, threshold, q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestContext {
    pub c_n: f64,
    pub threshold: f64,
    pub q: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub p_value_bound: f64,
}

impl TestContext {
    pub fn statistic(&self, view: &DesignView, alpha: &DVector<f64>) -> Result<f64> {
        let n = view.n() as f64;
        let l_ols = view.l_ols(alpha);
        if l_ols <= 1e-14 * view.yty / n {
            return Err(Error::ZeroResidual);
        }
        Ok(self.c_n * view.l_iv(alpha) / l_ols)
    }

    pub fn evaluate(&self, view: &DesignView, alpha: &DVector<f64>) -> Result<TestResult> {
        let statistic = self.statistic(view, alpha)?;
        Ok(TestResult {
            statistic,
            threshold: self.threshold,
            accepted: statistic <= self.threshold,
            p_value_bound: 1.0 - chi2_cdf(self.q as f64, statistic),
        })
    }
}

/// T = c(n) l_IV(alpha) / l_OLS(alpha), compared with the chi-squared(q) quantile at 1 - p_min.
pub fn test_statistic(view: &DesignView, alpha: &DVector<f64>, cfg: &TestConfig) -> Result<TestResult> {
    cfg.context(view.n(), view.q())?.evaluate(view, alpha)
}

/// (n - q)/q * l_IV / (l_OLS - l_IV).
pub fn ar_statistic(view: &DesignView, alpha: &DVector<f64>) -> Result<f64> {
    let n = view.n();
    let q = view.q();
    if n <= q {
        return Err(Error::TooFewRows { needed: q + 1, got: n });
    }
    let l_ols = view.l_ols(alpha);
    let l_iv = view.l_iv(alpha);
    let gap = l_ols - l_iv;
    if gap <= 1e-14 * view.yty / n as f64 {
        return Err(Error::DegenerateResidual);
    }
    Ok((n - q) as f64 / q as f64 * l_iv / gap)
}

/// Anderson-Rubin acceptance at level `p_min`, using the chi-squared(q)/q cut-off.
pub fn ar_accepts(view: &DesignView, alpha: &DVector<f64>, p_min: f64) -> Result<bool> {
    let q = view.q() as f64;
    let cut = chi2_quantile(q, 1.0 - p_min)? / q;
    Ok(ar_statistic(view, alpha)? <= cut)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakInstrumentReport {
    #[serde(skip)]
    pub g_matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Smallest eigenvalue above 10.
    pub passes_rule_of_thumb: bool,
}

/// Concentration-type statistic G = S^{-1/2} X'P_A X S^{-1/2} / q with
/// S = X'(I - P_A)X / (n - q), for the included endogenous regressors.
pub fn weak_instrument_stat(view: &DesignView) -> Result<WeakInstrumentReport> {
    let n = view.n();
    let q = view.q();
    if view.d1() == 0 {
        return Err(Error::InvalidParameter("no included endogenous regressors".into()));
    }
    if n <= q {
        return Err(Error::TooFewRows { needed: q + 1, got: n });
    }
    let x = &view.x_inc;
    let r = linalg::residualize(&view.a, x);
    let sigma = linalg::symmetrize(&(r.transpose() * &r)) / (n - q) as f64;
    linalg::check_gram(&sigma, "residual covariance of X")?;
    let fitted = x - &r;
    let xpx = linalg::symmetrize(&(x.transpose() * fitted));
    let s = linalg::sym_inv_sqrt(&sigma);
    let g = linalg::symmetrize(&(&s * xpx * &s)) / q as f64;
    let min_eigenvalue = linalg::min_eigenvalue(&g);
    Ok(WeakInstrumentReport { g_matrix: g, min_eigenvalue, passes_rule_of_thumb: min_eigenvalue > 10.0 })
}
