//! PULSE: the k-class estimator with the smallest penalty whose residuals are
//! accepted by the loss-ratio test, plus the primal (constrained) route to the
//! same point.
//!
//! `T(lambda) = c(n) l_IV / l_OLS` evaluated along the anchor path is
//! non-increasing in lambda, so the smallest accepted lambda is found by
//! bracketing followed by bisection.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{DesignView, IdentificationClass};
use crate::error::{Error, Result};
use crate::estimators::{self, anchor_alpha, EstimatorSpec};
use crate::inference::{TestConfig, TestContext, TestResult};

/// Largest penalty tried before giving up on the bracket.
pub const LAMBDA_CAP: f64 = 1e30;

pub const DEFAULT_PRECISION: u64 = 1 << 20;

pub const MSG_OLS_ACCEPTED: &str = "Warning: The OLS is accepted.";
pub const MSG_TSLS_REJECTED: &str = "Warning: TSLS outside interior of acceptance region.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub test: TestConfig,
    /// The search stops once the bracket is shorter than 1 / precision.
    pub precision: u64,
    /// Used when TSLS itself is rejected. `None` turns that case into an error.
    pub fallback: Option<EstimatorSpec>,
    /// Start the bracket at a penalty known to be accepted (under/just-identified only).
    pub fast_init: bool,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            test: TestConfig::default(),
            precision: DEFAULT_PRECISION,
            fallback: Some(EstimatorSpec::Fuller(4.0)),
            fast_init: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaStar {
    Finite(f64),
    Infinite,
}

impl LambdaStar {
    pub fn finite(self) -> Option<f64> {
        match self {
            LambdaStar::Finite(v) => Some(v),
            LambdaStar::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseMessage {
    None,
    OlsAccepted,
    TslsRejectedFallback,
}

impl PulseMessage {
    pub fn text(self) -> Option<&'static str> {
        match self {
            PulseMessage::None => None,
            PulseMessage::OlsAccepted => Some(MSG_OLS_ACCEPTED),
            PulseMessage::TslsRejectedFallback => Some(MSG_TSLS_REJECTED),
        }
    }
}

impl fmt::Display for PulseMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text().unwrap_or(""))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseResult {
    pub alpha: DVector<f64>,
    pub lambda_star: LambdaStar,
    pub kappa_star: Option<f64>,
    pub message: PulseMessage,
    pub test_at_solution: TestResult,
    pub fallback_used: Option<EstimatorSpec>,
}

fn context(view: &DesignView, cfg: &PulseConfig) -> Result<TestContext> {
    if cfg.precision == 0 {
        return Err(Error::InvalidParameter("precision must be positive".into()));
    }
    cfg.test.context(view.n(), view.q())
}

fn stat_at(view: &DesignView, ctx: &TestContext, lambda: f64) -> Result<f64> {
    ctx.statistic(view, &anchor_alpha(view, lambda)?)
}

/// Statistic at TSLS when the model is over-identified. In the other cases the
/// moment set is reachable and the infimum of the statistic is zero.
fn tsls_statistic(view: &DesignView, ctx: &TestContext) -> Result<Option<f64>> {
    if view.identification() != IdentificationClass::Over {
        return Ok(None);
    }
    let alpha = estimators::kclass_alpha(view, 1.0)?;
    Ok(Some(ctx.statistic(view, &alpha)?))
}

/// Upper bound on the smallest accepted penalty, from any point of the moment set.
fn accepted_penalty_bound(view: &DesignView, ctx: &TestContext) -> Result<f64> {
    let tilde = estimators::modified_tsls_alpha(view)?;
    let ols = anchor_alpha(view, 0.0)?;
    Ok(ctx.c_n * view.l_ols(&tilde) / (view.l_ols(&ols) * ctx.threshold))
}

/// Bracket-and-bisect for the first penalty whose fit is accepted, assuming
/// OLS is rejected and TSLS (if it exists) is strictly accepted.
fn search(view: &DesignView, ctx: &TestContext, cfg: &PulseConfig) -> Result<f64> {
    let q = ctx.threshold;
    let mut lo = 0.0_f64;
    let mut hi = 2.0_f64;
    if cfg.fast_init && view.identification() != IdentificationClass::Over {
        let bound = accepted_penalty_bound(view, ctx)?;
        if bound.is_finite() && bound > 0.0 && stat_at(view, ctx, bound)? <= q {
            hi = bound;
        }
    }
    while stat_at(view, ctx, hi)? > q {
        lo = hi;
        hi = if hi < 2.0 { 2.0 } else { hi * hi };
        if hi >= LAMBDA_CAP {
            hi = LAMBDA_CAP;
            if stat_at(view, ctx, hi)? > q {
                return Err(Error::NonMonotoneDetected { lambda: hi });
            }
            break;
        }
    }
    let tol = 1.0 / cfg.precision as f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        // at large penalties the float grid can be coarser than the tolerance
        if mid <= lo || mid >= hi {
            break;
        }
        if stat_at(view, ctx, mid)? > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Smallest penalty (to within 1 / precision, from above) whose anchor fit is accepted.
pub fn lambda_star_search(view: &DesignView, cfg: &PulseConfig) -> Result<LambdaStar> {
    let ctx = context(view, cfg)?;
    if let Some(t) = tsls_statistic(view, &ctx)? {
        if t >= ctx.threshold {
            return Ok(LambdaStar::Infinite);
        }
    }
    if stat_at(view, &ctx, 0.0)? <= ctx.threshold {
        return Ok(LambdaStar::Finite(0.0));
    }
    search(view, &ctx, cfg).map(LambdaStar::Finite)
}

pub fn pulse_estimate(view: &DesignView, cfg: &PulseConfig) -> Result<PulseResult> {
    let ctx = context(view, cfg)?;
    if let Some(t) = tsls_statistic(view, &ctx)? {
        if t >= ctx.threshold {
            let spec = cfg.fallback.ok_or(Error::DualInfeasible)?;
            let est = estimators::estimate(view, &spec)?;
            let test_at_solution = ctx.evaluate(view, &est.alpha)?;
            return Ok(PulseResult {
                alpha: est.alpha,
                lambda_star: LambdaStar::Infinite,
                kappa_star: None,
                message: PulseMessage::TslsRejectedFallback,
                test_at_solution,
                fallback_used: Some(spec),
            });
        }
    }
    let ols = anchor_alpha(view, 0.0)?;
    let at_ols = ctx.evaluate(view, &ols)?;
    if at_ols.accepted {
        return Ok(PulseResult {
            alpha: ols,
            lambda_star: LambdaStar::Finite(0.0),
            kappa_star: Some(0.0),
            message: PulseMessage::OlsAccepted,
            test_at_solution: at_ols,
            fallback_used: None,
        });
    }
    let lambda = search(view, &ctx, cfg)?;
    let alpha = anchor_alpha(view, lambda)?;
    let test_at_solution = ctx.evaluate(view, &alpha)?;
    Ok(PulseResult {
        alpha,
        lambda_star: LambdaStar::Finite(lambda),
        kappa_star: Some(lambda / (1.0 + lambda)),
        message: PulseMessage::None,
        test_at_solution,
        fallback_used: None,
    })
}

/// Open lower and closed upper end of the admissible constraint levels.
pub fn primal_domain(view: &DesignView) -> Result<(f64, f64)> {
    let upper = view.l_iv(&anchor_alpha(view, 0.0)?);
    let lower = match view.identification() {
        IdentificationClass::Over => view.l_iv(&estimators::kclass_alpha(view, 1.0)?),
        _ => 0.0,
    };
    Ok((lower, upper))
}

fn primal_solve_in(view: &DesignView, t: f64, lower: f64, upper: f64) -> Result<DVector<f64>> {
    if !(t > lower) || t > upper * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain { t, lower, upper });
    }
    if t >= upper {
        return anchor_alpha(view, 0.0);
    }
    let l_iv_at = |lambda: f64| -> Result<f64> { Ok(view.l_iv(&anchor_alpha(view, lambda)?)) };
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while l_iv_at(hi)? > t {
        lo = hi;
        hi *= 4.0;
        if hi > LAMBDA_CAP {
            return Err(Error::NonMonotoneDetected { lambda: hi });
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if l_iv_at(mid)? > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    anchor_alpha(view, hi)
}

/// Minimiser of l_OLS subject to l_IV <= t, for t in the primal domain.
pub fn primal_solve(view: &DesignView, t: f64) -> Result<DVector<f64>> {
    let (lower, upper) = primal_domain(view)?;
    primal_solve_in(view, t, lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TStar {
    Finite(f64),
    NegInfinite,
}

/// Largest constraint level whose primal solution is accepted by the test.
pub fn t_star(view: &DesignView, cfg: &PulseConfig) -> Result<TStar> {
    let ctx = context(view, cfg)?;
    if let Some(t) = tsls_statistic(view, &ctx)? {
        if t >= ctx.threshold {
            return Ok(TStar::NegInfinite);
        }
    }
    let (lower, upper) = primal_domain(view)?;
    if stat_at(view, &ctx, 0.0)? <= ctx.threshold {
        return Ok(TStar::Finite(upper));
    }
    let mut lo = lower;
    let mut hi = upper;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let alpha = primal_solve_in(view, mid, lower, upper)?;
        if ctx.statistic(view, &alpha)? <= ctx.threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TStar::Finite(if lo > lower { lo } else { 0.5 * (lo + hi) }))
}
