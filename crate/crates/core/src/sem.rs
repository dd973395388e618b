//! Linear structural equation models with anchors, interventions on the anchors,
//! exact population moments and the simulation designs used in the experiments.
//!
//! Variables are ordered `[Y, X_1..X_d, H_1..H_r]` and satisfy the row equation
//!
//! ```text
//! [Y X' H'] = [Y X' H'] B + A' M + eps'
//! ```
//!
//! so a draw is `(A' M + eps') (I - B)^{-1}`. Noise coordinates are independent with
//! the given variances; correlated noise is expressed through hidden variables.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ModelPartition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::NormalStream;

/// Spectral radius of B must stay below 1 - this margin.
pub const STATIONARITY_MARGIN: f64 = 1e-8;

/// On-disk description of a model. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemSpec {
    pub target: String,
    pub endogenous: Vec<String>,
    #[serde(default)]
    pub hidden: Vec<String>,
    pub anchors: Vec<String>,
    /// (1+d+r) x (1+d+r); entry (i, j) is the coefficient of variable i in the equation of variable j.
    pub b: Vec<Vec<f64>>,
    /// q x (1+d+r); entry (k, j) is the coefficient of anchor k in the equation of variable j.
    pub m: Vec<Vec<f64>>,
    pub noise_variances: Vec<f64>,
    pub anchor_cov: Vec<Vec<f64>>,
    #[serde(default)]
    pub anchor_mean: Option<Vec<f64>>,
}

/// Replacement law for the anchors. A hard intervention is a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Intervention {
    None,
    Hard { value: Vec<f64> },
    Stochastic { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

fn to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what} must be {nrows} x {ncols}")));
    }
    let m = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    Ok(m)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Square-root factor L with L L' = cov, for PSD `cov`.
fn psd_factor(cov: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if (cov - cov.transpose()).amax() > 1e-12 * (1.0 + cov.amax()) {
        return Err(Error::InvalidParameter(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(linalg::symmetrize(cov));
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * top.max(1e-300)) {
        return Err(Error::InvalidParameter(format!("{what} is not positive semi-definite")));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

#[derive(Debug, Clone)]
pub struct SemModel {
    pub target: String,
    pub endogenous: Vec<String>,
    pub hidden: Vec<String>,
    pub anchors: Vec<String>,
    pub b: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub noise_var: DVector<f64>,
    pub anchor_mean: DVector<f64>,
    pub anchor_cov: DMatrix<f64>,
    gamma_inv: DMatrix<f64>,
}

impl SemModel {
    pub fn new(
        b: DMatrix<f64>,
        m: DMatrix<f64>,
        noise_var: DVector<f64>,
        anchor_cov: DMatrix<f64>,
        d: usize,
        r: usize,
    ) -> Result<Self> {
        let q = anchor_cov.nrows();
        let spec = SemSpec {
            target: "Y".into(),
            endogenous: (1..=d).map(|j| format!("X{j}")).collect(),
            hidden: (1..=r).map(|j| format!("H{j}")).collect(),
            anchors: (1..=q).map(|j| format!("A{j}")).collect(),
            b: to_rows(&b),
            m: to_rows(&m),
            noise_variances: noise_var.iter().cloned().collect(),
            anchor_cov: to_rows(&anchor_cov),
            anchor_mean: None,
        };
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &SemSpec) -> Result<Self> {
        let d = spec.endogenous.len();
        let r = spec.hidden.len();
        let q = spec.anchors.len();
        let p = 1 + d + r;
        if d == 0 || q == 0 {
            return Err(Error::DimensionMismatch("need at least one endogenous variable and one anchor".into()));
        }
        let b = to_matrix(&spec.b, p, p, "B")?;
        let m = to_matrix(&spec.m, q, p, "M")?;
        let anchor_cov = to_matrix(&spec.anchor_cov, q, q, "anchor_cov")?;
        if spec.noise_variances.len() != p {
            return Err(Error::DimensionMismatch(format!("noise_variances must have {p} entries")));
        }
        if spec.noise_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("noise variances must be finite and non-negative".into()));
        }
        let anchor_mean = match &spec.anchor_mean {
            Some(v) if v.len() != q => {
                return Err(Error::DimensionMismatch(format!("anchor_mean must have {q} entries")))
            }
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(q),
        };
        psd_factor(&anchor_cov, "anchor_cov")?;
        let radius = b
            .complex_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if !(radius < 1.0 - STATIONARITY_MARGIN) {
            return Err(Error::NonStationary { radius });
        }
        let gamma = DMatrix::identity(p, p) - &b;
        let gamma_inv = gamma.try_inverse().ok_or(Error::NonStationary { radius })?;
        Ok(Self {
            target: spec.target.clone(),
            endogenous: spec.endogenous.clone(),
            hidden: spec.hidden.clone(),
            anchors: spec.anchors.clone(),
            b,
            m,
            noise_var: DVector::from_column_slice(&spec.noise_variances),
            anchor_mean,
            anchor_cov,
            gamma_inv,
        })
    }

    pub fn to_spec(&self) -> SemSpec {
        SemSpec {
            target: self.target.clone(),
            endogenous: self.endogenous.clone(),
            hidden: self.hidden.clone(),
            anchors: self.anchors.clone(),
            b: to_rows(&self.b),
            m: to_rows(&self.m),
            noise_variances: self.noise_var.iter().cloned().collect(),
            anchor_cov: to_rows(&self.anchor_cov),
            anchor_mean: if self.anchor_mean.iter().all(|v| *v == 0.0) {
                None
            } else {
                Some(self.anchor_mean.iter().cloned().collect())
            },
        }
    }

    /// Number of endogenous regressors.
    pub fn d(&self) -> usize {
        self.endogenous.len()
    }

    pub fn r(&self) -> usize {
        self.hidden.len()
    }

    pub fn q(&self) -> usize {
        self.anchors.len()
    }

    /// Number of non-anchor variables, 1 + d + r.
    pub fn p(&self) -> usize {
        1 + self.d() + self.r()
    }

    /// (I - B)^{-1}
    pub fn gamma_inv(&self) -> &DMatrix<f64> {
        &self.gamma_inv
    }

    /// Reduced-form coefficients Pi = M (I - B)^{-1}.
    pub fn pi(&self) -> DMatrix<f64> {
        &self.m * &self.gamma_inv
    }

    /// Mean and covariance of the anchors under `iv`.
    pub fn anchor_law(&self, iv: &Intervention) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let q = self.q();
        match iv {
            Intervention::None => Ok((self.anchor_mean.clone(), self.anchor_cov.clone())),
            Intervention::Hard { value } => {
                if value.len() != q {
                    return Err(Error::DimensionMismatch(format!("intervention value must have {q} entries")));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("intervention value must be finite".into()));
                }
                Ok((DVector::from_column_slice(value), DMatrix::zeros(q, q)))
            }
            Intervention::Stochastic { mean, cov } => {
                if mean.len() != q {
                    return Err(Error::DimensionMismatch(format!("intervention mean must have {q} entries")));
                }
                let cov = to_matrix(cov, q, q, "intervention cov")?;
                psd_factor(&cov, "intervention cov")?;
                Ok((DVector::from_column_slice(mean), cov))
            }
        }
    }

    /// Non-anchor variables for given anchor and noise rows.
    pub fn solve_row(&self, anchors: &DVector<f64>, noise: &DVector<f64>) -> DVector<f64> {
        let rhs = self.m.transpose() * anchors + noise;
        self.gamma_inv.transpose() * rhs
    }
}

/// Anchors and every non-anchor variable, hidden ones included.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSample {
    pub anchors: DMatrix<f64>,
    /// n x (1+d+r), columns `[Y X H]`.
    pub variables: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

/// Draws `n` rows. Anchors and noise use separate streams of the same seed, so
/// changing the intervention leaves the noise draws untouched.
pub fn sample_full(model: &SemModel, n: usize, seed: u64, iv: &Intervention) -> Result<FullSample> {
    let (mean, cov) = model.anchor_law(iv)?;
    let l = psd_factor(&cov, "anchor covariance")?;
    let q = model.q();
    let p = model.p();
    let mut anchor_rng = NormalStream::new(seed, 0);
    let mut noise_rng = NormalStream::new(seed, 1);
    let mut z = vec![0.0; q];
    let mut e = vec![0.0; p];
    let mut anchors = DMatrix::zeros(n, q);
    let mut noise = DMatrix::zeros(n, p);
    let sd = model.noise_var.map(f64::sqrt);
    for i in 0..n {
        anchor_rng.fill_normal(&mut z);
        let a = &mean + &l * DVector::from_column_slice(&z);
        anchors.row_mut(i).copy_from(&a.transpose());
        noise_rng.fill_normal(&mut e);
        for j in 0..p {
            noise[(i, j)] = sd[j] * e[j];
        }
    }
    let variables = (&anchors * &model.m + &noise) * model.gamma_inv();
    Ok(FullSample { anchors, variables, noise })
}

/// Observed data (hidden variables dropped) as a [`Dataset`].
pub fn sample(model: &SemModel, n: usize, seed: u64, iv: &Intervention) -> Result<Dataset> {
    let full = sample_full(model, n, seed, iv)?;
    let d = model.d();
    Dataset::with_names(
        full.variables.column(0).into_owned(),
        full.variables.columns(1, d).into_owned(),
        full.anchors,
        model.target.clone(),
        model.endogenous.clone(),
        model.anchors.clone(),
    )
}

/// Exact second moments E[W W'] of W = (Y, X, H, A).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMoments {
    pub joint: DMatrix<f64>,
    d: usize,
    r: usize,
    q: usize,
}

/// Second-moment blocks needed by population k-class fits.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMoments {
    pub e_zz: DMatrix<f64>,
    pub e_za: DMatrix<f64>,
    pub e_aa: DMatrix<f64>,
    pub e_zy: DVector<f64>,
    pub e_ay: DVector<f64>,
    pub e_yy: f64,
}

impl PopulationMoments {
    fn anchor_index(&self, k: usize) -> usize {
        1 + self.d + self.r + k
    }

    pub fn for_partition(&self, part: &ModelPartition) -> Result<PartitionMoments> {
        part.validate(self.d, self.q)?;
        let z_idx: Vec<usize> = part
            .included_endogenous
            .iter()
            .map(|&j| 1 + j)
            .chain(part.included_exogenous.iter().map(|&k| self.anchor_index(k)))
            .collect();
        let a_idx: Vec<usize> = (0..self.q).map(|k| self.anchor_index(k)).collect();
        let s = &self.joint;
        let block = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| s[(rows[i], cols[j])]);
        Ok(PartitionMoments {
            e_zz: block(&z_idx, &z_idx),
            e_za: block(&z_idx, &a_idx),
            e_aa: block(&a_idx, &a_idx),
            e_zy: DVector::from_fn(z_idx.len(), |i, _| s[(z_idx[i], 0)]),
            e_ay: DVector::from_fn(a_idx.len(), |i, _| s[(a_idx[i], 0)]),
            e_yy: s[(0, 0)],
        })
    }
}

pub fn population_moments(model: &SemModel, iv: &Intervention) -> Result<PopulationMoments> {
    let (mean, cov) = model.anchor_law(iv)?;
    let s_a = cov + &mean * mean.transpose();
    let pi = model.pi();
    let gi = model.gamma_inv();
    let p = model.p();
    let q = model.q();
    let vv = pi.transpose() * &s_a * &pi + gi.transpose() * DMatrix::from_diagonal(&model.noise_var) * gi;
    let va = pi.transpose() * &s_a;
    let mut joint = DMatrix::zeros(p + q, p + q);
    joint.view_mut((0, 0), (p, p)).copy_from(&linalg::symmetrize(&vv));
    joint.view_mut((0, p), (p, q)).copy_from(&va);
    joint.view_mut((p, 0), (q, p)).copy_from(&va.transpose());
    joint.view_mut((p, p), (q, q)).copy_from(&s_a);
    Ok(PopulationMoments { joint, d: model.d(), r: model.r(), q })
}

impl PartitionMoments {
    /// E[Z A'] E[A A']^{-1} E[A Z'] and the matching vector for Y.
    fn projected(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if linalg::rcond_sym(&self.e_aa) < linalg::RCOND_MIN {
            return Err(Error::SingularPopulationGram("E[AA']"));
        }
        let inv = self.e_aa.clone().try_inverse().ok_or(Error::SingularPopulationGram("E[AA']"))?;
        Ok((&self.e_za * &inv * self.e_za.transpose(), &self.e_za * inv * &self.e_ay))
    }

    pub fn kclass(&self, kappa: f64) -> Result<DVector<f64>> {
        let (pzz, pzy) = self.projected()?;
        let m = &self.e_zz * (1.0 - kappa) + pzz * kappa;
        let b = &self.e_zy * (1.0 - kappa) + pzy * kappa;
        if linalg::rcond_sym(&m) < linalg::RCOND_MIN {
            return Err(Error::SingularPopulationGram("k-class moment matrix"));
        }
        m.lu().solve(&b).ok_or(Error::SingularPopulationGram("k-class moment matrix"))
    }

    /// E[(Y - a'Z)^2]
    pub fn l_ols(&self, alpha: &DVector<f64>) -> f64 {
        self.e_yy - 2.0 * alpha.dot(&self.e_zy) + alpha.dot(&(&self.e_zz * alpha))
    }

    /// E[A r]' E[AA']^{-1} E[A r] with r = Y - a'Z.
    pub fn l_iv(&self, alpha: &DVector<f64>) -> Result<f64> {
        let g = &self.e_ay - self.e_za.transpose() * alpha;
        let sol = self
            .e_aa
            .clone()
            .lu()
            .solve(&g)
            .ok_or(Error::SingularPopulationGram("E[AA']"))?;
        Ok(g.dot(&sol))
    }

    /// Least E[(Y - a'Z)^2] subject to E[A (Y - a'Z)] = 0; the kappa -> 1 limit.
    pub fn moment_set_minimizer(&self) -> Result<DVector<f64>> {
        let p = self.e_zz.nrows();
        let q = self.e_aa.nrows();
        let g = self.e_za.transpose();
        let mut k = DMatrix::zeros(p + q, p + q);
        k.view_mut((0, 0), (p, p)).copy_from(&self.e_zz);
        k.view_mut((0, p), (p, q)).copy_from(&g.transpose());
        k.view_mut((p, 0), (q, p)).copy_from(&g);
        let mut rhs = DVector::zeros(p + q);
        rhs.rows_mut(0, p).copy_from(&self.e_zy);
        rhs.rows_mut(p, q).copy_from(&self.e_ay);
        let sol = linalg::pinv(&k, linalg::RCOND_MIN) * rhs;
        Ok(sol.rows(0, p).into_owned())
    }
}

/// Population k-class coefficient under the observational law.
pub fn population_kclass(model: &SemModel, part: &ModelPartition, kappa: f64) -> Result<DVector<f64>> {
    population_moments(model, &Intervention::None)?.for_partition(part)?.kclass(kappa)
}

/// l_OLS + kappa / (1 - kappa) l_IV under the observational law, for kappa in [0, 1).
pub fn worst_case_mspe(model: &SemModel, part: &ModelPartition, alpha: &DVector<f64>, kappa: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    let pm = population_moments(model, &Intervention::None)?.for_partition(part)?;
    Ok(pm.l_ols(alpha) + kappa / (1.0 - kappa) * pm.l_iv(alpha)?)
}

/// E[(Y - a'Z)^2] under the intervened law.
pub fn interventional_mspe(model: &SemModel, part: &ModelPartition, alpha: &DVector<f64>, iv: &Intervention) -> Result<f64> {
    Ok(population_moments(model, iv)?.for_partition(part)?.l_ols(alpha))
}

/// Normalised confounding |rho|^2 = S_yx S_x^{-1} S_xy / S_y for noise blocks.
pub fn rho_norm_from_cov(s_x: &DMatrix<f64>, s_xy: &DVector<f64>, s_y: f64) -> Result<f64> {
    let sol = s_x
        .clone()
        .lu()
        .solve(s_xy)
        .ok_or(Error::SingularPopulationGram("noise covariance of X"))?;
    Ok((s_xy.dot(&sol) / s_y).sqrt())
}

/// |rho| for U_X = delta' H + N_X, U_Y = mu' H + N_Y with unit-variance H and N_Y.
pub fn rho_norm_multivariate(mu: &DVector<f64>, delta: &DMatrix<f64>, sigma2: &DVector<f64>) -> Result<f64> {
    let s_x = delta.transpose() * delta + DMatrix::from_diagonal(sigma2);
    let s_xy = delta.transpose() * mu;
    rho_norm_from_cov(&s_x, &s_xy, mu.norm_squared() + 1.0)
}

/// |rho| for unit-variance noise with corr(U_X1, U_X2) = eta, corr(U_Xi, U_Y) = phi_i.
pub fn rho_norm_fixed_noise(eta: f64, phi1: f64, phi2: f64) -> f64 {
    ((phi1 * phi1 + phi2 * phi2 - 2.0 * eta * phi1 * phi2) / (1.0 - eta * eta)).sqrt()
}

/// xi with q * xi^2 / (q * xi^2 + 1) = r2.
pub fn xi_from_r2(r2: f64, q: usize) -> f64 {
    (r2 / (q as f64 * (1.0 - r2))).sqrt()
}

fn assemble(
    d: usize,
    q: usize,
    structural: impl Fn(&mut DMatrix<f64>, &mut DMatrix<f64>),
    noise_cov: &DMatrix<f64>,
) -> Result<SemModel> {
    // noise over [Y, X] is generated as L h with h ~ N(0, I) hidden and no own noise
    let k = 1 + d;
    let l = psd_factor(noise_cov, "noise covariance")?;
    let r = k;
    let p = 1 + d + r;
    let mut b = DMatrix::zeros(p, p);
    let mut m = DMatrix::zeros(q, p);
    structural(&mut b, &mut m);
    for h in 0..r {
        for v in 0..k {
            b[(k + h, v)] = l[(v, h)];
        }
    }
    let mut noise = DVector::zeros(p);
    for h in 0..r {
        noise[k + h] = 1.0;
    }
    SemModel::new(b, m, noise, DMatrix::identity(q, q), d, r)
}

/// X = A + U_X, Y = X + U_Y with unit noise variances and corr(U_X, U_Y) = 0.5.
pub fn e1_model() -> SemModel {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    assemble(
        1,
        1,
        |b, m| {
            b[(1, 0)] = 1.0;
            m[(0, 1)] = 1.0;
        },
        &cov,
    )
    .expect("fixed model is valid")
}

/// Closed-form worst-case MSPE of gamma in the model of [`e1_model`] over
/// shift interventions of strength x.
pub fn e1_worst_case_mspe(gamma: f64, x: f64) -> f64 {
    x * x * (1.0 - gamma).powi(2) + gamma * gamma + 3.0 * (1.0 - gamma)
}

/// Range of x >= 0 on which `mid` has the smallest worst-case MSPE among
/// `mid`, `lo`, `hi` in the model of [`e1_model`].
pub fn e1_superiority_interval(mid: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let c = |g: f64| g * g + 3.0 * (1.0 - g);
    let slope = |g: f64| (1.0 - g).powi(2);
    let mut range = (0.0_f64, f64::INFINITY);
    for other in [lo, hi] {
        // slope(mid) x^2 + c(mid) <= slope(other) x^2 + c(other)
        let a = slope(mid) - slope(other);
        let k = c(other) - c(mid);
        if a == 0.0 {
            if k < 0.0 {
                return None;
            }
            continue;
        }
        let root2 = k / a;
        if a > 0.0 {
            if root2 < 0.0 {
                return None;
            }
            range.1 = range.1.min(root2.sqrt());
        } else if root2 > 0.0 {
            range.0 = range.0.max(root2.sqrt());
        }
    }
    (range.0 <= range.1).then_some(range)
}

/// Rounds an interval to `decimals` places inwards, so the reported
/// interval stays inside the exact one.
pub fn round_interval_inward(lo: f64, hi: f64, decimals: i32) -> (f64, f64) {
    let s = 10f64.powi(decimals);
    ((lo * s - 1e-9).ceil() / s, (hi * s + 1e-9).floor() / s)
}

/// Under-identified model: X1 = eta A + delta1 H + e1, Y = beta X1 + delta2 H + eY,
/// X2 = gamma Y + e2, with scalar A and H and unit noise.
pub fn e3_model(eta: f64, delta1: f64, delta2: f64, gamma: f64, beta: f64) -> SemModel {
    // order [Y, X1, X2, H]
    let mut b = DMatrix::zeros(4, 4);
    b[(1, 0)] = beta;
    b[(3, 0)] = delta2;
    b[(3, 1)] = delta1;
    b[(0, 2)] = gamma;
    let mut m = DMatrix::zeros(1, 4);
    m[(0, 1)] = eta;
    SemModel::new(b, m, DVector::from_element(4, 1.0), DMatrix::identity(1, 1), 2, 1).expect("acyclic model is valid")
}

/// Population limit of PULSE in [`e3_model`]; does not depend on eta or delta1.
pub fn e3_population_target(delta2: f64, gamma: f64, beta: f64) -> DVector<f64> {
    let s = 1.0 + delta2 * delta2;
    let a2 = s * gamma / (1.0 + s * gamma * gamma);
    DVector::from_vec(vec![(1.0 - a2 * gamma) * beta, a2])
}

/// X = A' xi_bar + U_X, Y = X + U_Y, A ~ N(0, I_q), unit noise with correlation rho,
/// every entry of xi_bar set so the first-stage R^2 equals `r2`.
pub fn univariate_design(q: usize, rho: f64, r2: f64) -> Result<SemModel> {
    if !(0.0..1.0).contains(&r2) || !(rho > -1.0 && rho < 1.0) || q == 0 {
        return Err(Error::InvalidParameter("need q >= 1, r2 in [0, 1), |rho| < 1".into()));
    }
    let xi = xi_from_r2(r2, q);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    assemble(
        1,
        q,
        |b, m| {
            b[(1, 0)] = 1.0;
            for k in 0..q {
                m[(k, 1)] = xi;
            }
        },
        &cov,
    )
}

/// Two-dimensional just-identified model X = xi' A + delta' H + N_X, Y = gamma' X + mu' H + N_Y.
pub fn mv_random_model(
    xi: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    mu: &DVector<f64>,
    sigma2: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<SemModel> {
    // order [Y, X1, X2, H1, H2]
    let mut b = DMatrix::zeros(5, 5);
    let mut m = DMatrix::zeros(2, 5);
    for j in 0..2 {
        b[(1 + j, 0)] = gamma[j];
        b[(3 + j, 0)] = mu[j];
        for i in 0..2 {
            m[(i, 1 + j)] = xi[(i, j)];
            b[(3 + i, 1 + j)] = delta[(i, j)];
        }
    }
    let noise = DVector::from_vec(vec![1.0, sigma2[0], sigma2[1], 1.0, 1.0]);
    SemModel::new(b, m, noise, DMatrix::identity(2, 2), 2, 2)
}

/// X = xi' A + U_X, Y = gamma' X + U_Y with (U_X, U_Y) unit-variance, corr(U_X1, U_X2) = eta
/// and corr(U_Xi, U_Y) = phi_i.
pub fn mv_fixed_noise_model(xi: &DMatrix<f64>, gamma: &DVector<f64>, eta: f64, phi1: f64, phi2: f64) -> Result<SemModel> {
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, phi1, phi2, phi1, 1.0, eta, phi2, eta, 1.0]);
    assemble(
        2,
        2,
        |b, m| {
            for j in 0..2 {
                b[(1 + j, 0)] = gamma[j];
                for i in 0..2 {
                    m[(i, 1 + j)] = xi[(i, j)];
                }
            }
        },
        &cov,
    )
}
