//! Finite Gaussian-mixture noise and its conjugate Gibbs updates.
//!
//! Each node's error term is a mixture `sum_k w_k N(mu_k, s2_k)`. Given
//! residuals, the latent component labels and the mixture parameters are
//! refreshed from their full conditionals under a Dirichlet prior on the
//! weights, a Normal prior on each mean and an Inverse-Gamma prior on each
//! variance.

use rand::Rng;

use crate::dist::{self, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    // ln w_k - 0.5 ln(2 pi s2_k), cached for density evaluation
    log_coef: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: if means.len() != k { means.len() } else { variances.len() },
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative".into()));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mixture weights must sum to 1".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("mixture means must be finite".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("mixture variances must be positive".into()));
        }
        Ok(Self::from_parts(weights, means, variances))
    }

    fn from_parts(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Self {
        let log_coef = weights
            .iter()
            .zip(&variances)
            .map(|(w, v)| w.ln() - 0.5 * (LN_2PI + v.ln()))
            .collect();
        GaussianMixture {
            weights,
            means,
            variances,
            log_coef,
        }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// Starting point for a chain: equal weights, means at evenly spaced
    /// quantiles of `values`, variances splitting the sample variance.
    pub fn initial(values: &[f64], k: usize) -> Self {
        assert!(k >= 1);
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let var = if var > 1e-8 { var } else { 1.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let means = (0..k)
            .map(|c| {
                if k == 1 || sorted.is_empty() {
                    mean
                } else {
                    let idx = ((c as f64 + 0.5) / k as f64 * sorted.len() as f64) as usize;
                    sorted[idx.min(sorted.len() - 1)]
                }
            })
            .collect();
        Self::from_parts(vec![1.0 / k as f64; k], means, vec![var / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(w, (m, v))| w * (v + (m - mu).powi(2)))
            .sum()
    }

    /// `ln sum_k w_k N(x; mu_k, s2_k)`.
    pub fn log_density(&self, x: f64) -> f64 {
        if self.k() == 1 {
            let d = x - self.means[0];
            return self.log_coef[0] - 0.5 * d * d / self.variances[0];
        }
        let mut terms = [0.0f64; 8];
        let mut heap;
        let terms: &mut [f64] = if self.k() <= terms.len() {
            &mut terms[..self.k()]
        } else {
            heap = vec![0.0; self.k()];
            &mut heap
        };
        for (c, t) in terms.iter_mut().enumerate() {
            let d = x - self.means[c];
            *t = self.log_coef[c] - 0.5 * d * d / self.variances[c];
        }
        dist::log_sum_exp(terms)
    }

    /// Same mixture with components reordered by `perm` (component `c` of the
    /// result is component `perm[c]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &[f64]| perm.iter().map(|&c| v[c]).collect::<Vec<_>>();
        Self::from_parts(pick(&self.weights), pick(&self.means), pick(&self.variances))
    }

    /// Draw a component label from the categorical weights.
    fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return c;
            }
        }
        self.k() - 1
    }
}

/// `ln` of the mixture density at `x`.
pub fn log_density(x: f64, mix: &GaussianMixture) -> f64 {
    mix.log_density(x)
}

/// Per-node noise distributions, independent across nodes and observations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub per_node: Vec<GaussianMixture>,
}

impl NoiseModel {
    pub fn new(per_node: Vec<GaussianMixture>) -> Self {
        NoiseModel { per_node }
    }

    pub fn uniform(p: usize, mix: GaussianMixture) -> Self {
        NoiseModel {
            per_node: vec![mix; p],
        }
    }

    pub fn p(&self) -> usize {
        self.per_node.len()
    }
}

/// Hyperprior on one node's mixture parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixtureHyper {
    /// Symmetric Dirichlet concentration on the weights.
    pub dirichlet_alpha: f64,
    /// Variance of the zero-mean Normal prior on each component mean.
    pub mean_prior_var: f64,
    /// Inverse-Gamma shape for each component variance.
    pub var_prior_shape: f64,
    /// Inverse-Gamma scale for each component variance.
    pub var_prior_scale: f64,
}

impl Default for MixtureHyper {
    fn default() -> Self {
        MixtureHyper {
            dirichlet_alpha: 1.0,
            mean_prior_var: 10.0,
            var_prior_shape: 2.0,
            var_prior_scale: 1.0,
        }
    }
}

impl MixtureHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.dirichlet_alpha,
            self.mean_prior_var,
            self.var_prior_shape,
            self.var_prior_scale,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("mixture hyperparameters must be positive".into()))
        }
    }
}

pub fn sample_noise<R: Rng + ?Sized>(mix: &GaussianMixture, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let c = mix.draw_component(rng);
            dist::normal(rng, mix.means[c], mix.variances[c])
        })
        .collect()
}

/// Draw each residual's component label from its full conditional,
/// proportional to `w_k N(r; mu_k, s2_k)`. Labels are 0-based.
pub fn gibbs_update_indicators<R: Rng + ?Sized>(
    residuals: &[f64],
    mix: &GaussianMixture,
    rng: &mut R,
) -> Vec<usize> {
    let mut z = vec![0; residuals.len()];
    update_indicators_into(residuals, mix, &mut z, rng);
    z
}

pub(crate) fn update_indicators_into<R: Rng + ?Sized>(
    residuals: &[f64],
    mix: &GaussianMixture,
    z: &mut [usize],
    rng: &mut R,
) {
    let k = mix.k();
    if k == 1 {
        z.fill(0);
        return;
    }
    let mut logp = vec![0.0; k];
    for (zq, &r) in z.iter_mut().zip(residuals) {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            let d = r - mix.means[c];
            logp[c] = mix.log_coef[c] - 0.5 * d * d / mix.variances[c];
            max = max.max(logp[c]);
        }
        let mut total = 0.0;
        for lp in logp.iter_mut() {
            *lp = (*lp - max).exp();
            total += *lp;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        *zq = k - 1;
        for (c, w) in logp.iter().enumerate() {
            acc += w;
            if u < acc {
                *zq = c;
                break;
            }
        }
    }
}

/// Dirichlet concentration of the weight posterior: `alpha + counts`.
pub fn weight_posterior(counts: &[usize], alpha: f64) -> Vec<f64> {
    counts.iter().map(|&c| alpha + c as f64).collect()
}

/// One Gibbs pass over a node's mixture parameters.
///
/// Weights are drawn from `Dirichlet(alpha + counts)`. Each component mean is
/// then drawn from its Normal full conditional given the current variance,
/// and each variance from its Inverse-Gamma full conditional given the new
/// mean. Components with no allocated residuals are drawn from the prior.
pub fn gibbs_update_mixture<R: Rng + ?Sized>(
    residuals: &[f64],
    z: &[usize],
    current: &GaussianMixture,
    hyper: &MixtureHyper,
    rng: &mut R,
) -> Result<GaussianMixture> {
    if residuals.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: residuals.len(),
            found: z.len(),
        });
    }
    let k = current.k();
    if let Some(&bad) = z.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidParameter(format!(
            "component label {bad} out of range for K = {k}"
        )));
    }
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for (&c, &r) in z.iter().zip(residuals) {
        counts[c] += 1;
        sums[c] += r;
    }

    let weights = if k == 1 {
        vec![1.0]
    } else {
        let draws: Vec<f64> = weight_posterior(&counts, hyper.dirichlet_alpha)
            .into_iter()
            .map(|a| dist::gamma(rng, a))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            draws.iter().map(|g| g / total).collect()
        } else {
            vec![1.0 / k as f64; k]
        }
    };

    let mut means = vec![0.0; k];
    let mut variances = vec![0.0; k];
    for c in 0..k {
        let v = current.variances[c];
        let precision = 1.0 / hyper.mean_prior_var + counts[c] as f64 / v;
        let m = (sums[c] / v) / precision;
        means[c] = dist::normal(rng, m, 1.0 / precision);
    }
    let mut sq = vec![0.0; k];
    for (&c, &r) in z.iter().zip(residuals) {
        sq[c] += (r - means[c]).powi(2);
    }
    for c in 0..k {
        let shape = hyper.var_prior_shape + 0.5 * counts[c] as f64;
        let scale = hyper.var_prior_scale + 0.5 * sq[c];
        // floor keeps the density finite if a component collapses onto one point
        variances[c] = dist::inv_gamma(rng, shape, scale).max(1e-300);
    }
    Ok(GaussianMixture::from_parts(weights, means, variances))
}
