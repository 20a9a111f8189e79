//! Likelihood kernels for the linear SEM `Y = B Y + e`.
//!
//! * [`collapsed_node_log_marginal`]: one node's regression likelihood with
//!   its coefficients integrated against the Gaussian slab, given
//!   per-observation noise variances (the mixture allocation). Exact in
//!   closed form; this is what the DAG sampler scores edges with.
//! * [`cyclic_log_likelihood`]: the change-of-variables density of `Y` when
//!   `I - B` is any invertible matrix, `n ln|det(I - B)| + sum ln p(e)`.
//! * [`simulate_sem`]: forward draws `Y = (I - B)^-1 e`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::LN_2PI;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::noise::{sample_noise, NoiseModel};

/// `|det(I - B)|` at or below this is treated as singular.
pub const DET_GUARD: f64 = 1e-10;

/// Observations in rows, variables in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|i| format!("x{i}")).collect();
        Self::with_names(values, names)
    }

    pub fn with_names(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() < 1 {
            return Err(Error::InvalidData("need at least one variable".into()));
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.ncols(),
                found: names.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let n = values.nrows();
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        Ok(DataMatrix { values, names })
    }

    /// Build from observation rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((q, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::RaggedRows {
                row: q + 1,
                expected: p,
                found: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |q, i| rows[q][i]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, q: usize, i: usize) -> f64 {
        self.values[(q, i)]
    }

    /// Column `i` as a contiguous slice (storage is column-major).
    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[i * n..(i + 1) * n]
    }

    pub fn row(&self, q: usize) -> Vec<f64> {
        self.values.row(q).iter().copied().collect()
    }

    /// Center each column and scale it to unit sample variance.
    pub fn standardize(&self) -> Result<(DataMatrix, Standardization)> {
        let n = self.n() as f64;
        let mut center = Vec::with_capacity(self.p());
        let mut scale = Vec::with_capacity(self.p());
        for i in 0..self.p() {
            let col = self.column(i);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if !(var > 0.0) {
                return Err(Error::InvalidData(format!(
                    "column {} ({}) is constant and cannot be standardized",
                    i + 1,
                    self.names[i]
                )));
            }
            center.push(mean);
            scale.push(var.sqrt());
        }
        let values = DMatrix::from_fn(self.n(), self.p(), |q, i| {
            (self.values[(q, i)] - center[i]) / scale[i]
        });
        let data = DataMatrix {
            values,
            names: self.names.clone(),
        };
        Ok((data, Standardization { center, scale }))
    }
}

/// Column-wise affine transform applied before sampling.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Coefficient `B[i][j]` fitted on standardized data, expressed on the
    /// original measurement scale.
    pub fn coefficient_to_original(&self, i: usize, j: usize, b: f64) -> f64 {
        b * self.scale[i] / self.scale[j]
    }
}

/// Graph plus coefficients supported on it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSem {
    graph: Graph,
    coefficients: DMatrix<f64>,
}

impl WeightedSem {
    /// `coefficients[(i, j)]` is the effect of `j` on `i`.
    pub fn new(graph: Graph, coefficients: DMatrix<f64>) -> Result<Self> {
        let p = graph.p();
        if coefficients.nrows() != p || coefficients.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: coefficients.nrows().max(coefficients.ncols()),
            });
        }
        for i in 0..p {
            for j in 0..p {
                let b = coefficients[(i, j)];
                if !b.is_finite() {
                    return Err(Error::InvalidParameter(format!("B[{i}][{j}] is not finite")));
                }
                if !graph.e(i, j) && b != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "B[{i}][{j}] = {b} but edge {j}->{i} is absent"
                    )));
                }
            }
        }
        Ok(WeightedSem {
            graph,
            coefficients,
        })
    }

    /// Support is read off the nonzero entries of `coefficients`.
    pub fn from_coefficients(coefficients: DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = coefficients
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let graph = Graph::from_matrix(&rows)?;
        Self::new(graph, coefficients)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }
}

/// `ln|det(I - B)|`, or `SingularSystem` at or below [`DET_GUARD`].
pub fn log_abs_det_i_minus_b(b: &DMatrix<f64>) -> Result<f64> {
    let p = b.nrows();
    let m = DMatrix::<f64>::identity(p, p) - b;
    let det = m.lu().determinant();
    if !(det.abs() > DET_GUARD) {
        return Err(Error::SingularSystem { det });
    }
    Ok(det.abs().ln())
}

/// Sufficient statistics for one node's heteroscedastic regression.
///
/// With per-observation precisions `d_q = 1/v_q` and response `y~`, holds
/// `G = sum d_q x_q x_q^T` over all candidate regressors, `c = sum d_q x_q y~_q`,
/// `sum d_q y~_q^2` and `sum ln v_q`.
#[derive(Debug, Clone)]
pub(crate) struct NodeStats {
    n: usize,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    yy: f64,
    log_det_d: f64,
}

impl NodeStats {
    /// `columns` lists every candidate regressor as a contiguous slice.
    pub(crate) fn new(y: &[f64], columns: &[&[f64]], obs_variances: &[f64]) -> Self {
        let n = y.len();
        let k = columns.len();
        let prec: Vec<f64> = obs_variances.iter().map(|v| 1.0 / v).collect();
        let mut gram = DMatrix::zeros(k, k);
        let mut cross = DVector::zeros(k);
        let mut weighted = vec![0.0; n];
        for a in 0..k {
            let xa = columns[a];
            for q in 0..n {
                weighted[q] = prec[q] * xa[q];
            }
            cross[a] = weighted.iter().zip(y).map(|(w, yq)| w * yq).sum();
            for b in a..k {
                let s: f64 = weighted.iter().zip(columns[b]).map(|(w, x)| w * x).sum();
                gram[(a, b)] = s;
                gram[(b, a)] = s;
            }
        }
        let yy = y.iter().zip(&prec).map(|(yq, d)| d * yq * yq).sum();
        let log_det_d = obs_variances.iter().map(|v| v.ln()).sum();
        NodeStats {
            n,
            gram,
            cross,
            yy,
            log_det_d,
        }
    }

    fn slab_system(&self, subset: &[usize], gamma1: f64) -> (DMatrix<f64>, DVector<f64>) {
        let k = subset.len();
        let a = DMatrix::from_fn(k, k, |r, c| {
            self.gram[(subset[r], subset[c])] + if r == c { 1.0 / gamma1 } else { 0.0 }
        });
        let c = DVector::from_fn(k, |r, _| self.cross[subset[r]]);
        (a, c)
    }

    /// Log marginal likelihood with the coefficients on `subset` integrated
    /// against independent `N(0, gamma1)` priors.
    pub(crate) fn log_marginal(&self, subset: &[usize], gamma1: f64) -> f64 {
        let base = -0.5 * (self.n as f64 * LN_2PI + self.log_det_d + self.yy);
        if subset.is_empty() {
            return base;
        }
        let k = subset.len() as f64;
        let (a, c) = self.slab_system(subset, gamma1);
        let chol = a.cholesky().expect("slab system is positive definite");
        let log_det_a = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let solved = chol.solve(&c);
        base - 0.5 * k * gamma1.ln() - 0.5 * log_det_a + 0.5 * c.dot(&solved)
    }

    /// Draw the coefficients on `subset` from their Gaussian full conditional
    /// `N(A^-1 c, A^-1)`, `A = G_S + I/gamma1`, given standard normal draws.
    pub(crate) fn draw_coefficients(
        &self,
        subset: &[usize],
        gamma1: f64,
        std_normals: &[f64],
    ) -> Vec<f64> {
        if subset.is_empty() {
            return Vec::new();
        }
        let (a, c) = self.slab_system(subset, gamma1);
        let chol = a.cholesky().expect("slab system is positive definite");
        let mean = chol.solve(&c);
        // A = L L^T, so L^-T z has covariance A^-1
        let z = DVector::from_column_slice(std_normals);
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("triangular factor is nonsingular");
        (mean + noise).iter().copied().collect()
    }
}

/// Exact log marginal likelihood of one node's regression.
///
/// `log int prod_q N(y_q; x_q^T b, v_q) prod_j N(b_j; 0, gamma1) db`, where
/// `x` is `n x k` (one column per parent) and `v_q = obs_variances[q]`. The
/// caller subtracts each observation's assigned component mean from `y`.
pub fn collapsed_node_log_marginal(
    y: &[f64],
    x: &DMatrix<f64>,
    obs_variances: &[f64],
    gamma1: f64,
) -> Result<f64> {
    let n = y.len();
    if x.nrows() != n && x.ncols() > 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    if obs_variances.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: obs_variances.len(),
        });
    }
    if !(gamma1.is_finite() && gamma1 > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma1 must be positive, got {gamma1}")));
    }
    if obs_variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter("observation variances must be positive".into()));
    }
    let columns: Vec<&[f64]> = (0..x.ncols())
        .map(|c| &x.as_slice()[c * n..(c + 1) * n])
        .collect();
    let stats = NodeStats::new(y, &columns, obs_variances);
    let subset: Vec<usize> = (0..x.ncols()).collect();
    Ok(stats.log_marginal(&subset, gamma1))
}

/// Residuals `e = (I - B) y` for every observation, as a column-major `n x p` matrix.
pub(crate) fn residual_matrix(data: &DataMatrix, b: &DMatrix<f64>) -> DMatrix<f64> {
    data.matrix() - data.matrix() * b.transpose()
}

/// `n ln|det(I - B)| + sum_q sum_i ln p_i(((I - B) Y_q)_i)`.
pub fn cyclic_log_likelihood(data: &DataMatrix, sem: &WeightedSem, noise: &NoiseModel) -> Result<f64> {
    let p = sem.p();
    if data.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: data.p(),
        });
    }
    if noise.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: noise.p(),
        });
    }
    let log_det = log_abs_det_i_minus_b(sem.coefficients())?;
    let resid = residual_matrix(data, sem.coefficients());
    let n = data.n();
    let mut total = n as f64 * log_det;
    for i in 0..p {
        let mix = &noise.per_node[i];
        total += resid.as_slice()[i * n..(i + 1) * n]
            .iter()
            .map(|&e| mix.log_density(e))
            .sum::<f64>();
    }
    Ok(total)
}

/// Output of [`simulate_sem`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: DataMatrix,
    /// Largest eigenvalue modulus of `B`.
    pub spectral_radius: f64,
}

impl Simulation {
    /// `false` when a cyclic system has spectral radius >= 1: the draw is
    /// still the equilibrium `(I - B)^-1 e`, but not the limit of iterating
    /// the equations.
    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Largest eigenvalue modulus. Falls back to Gelfand's formula
/// `||B^k||^(1/k)` at `k = 2^40` when the Schur iteration does not settle.
fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::linalg::Schur::try_new(b.clone(), f64::EPSILON, 10_000) {
        return schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
    }
    let mut m = b.clone();
    let mut log_scale = 0.0;
    for step in 0..40 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale += norm.ln() / 2f64.powi(step);
        m = &m * &m;
    }
    (log_scale + m.norm().ln() / 2f64.powi(40)).exp()
}

/// Draw `n` observations `Y = (I - B)^-1 e` with `e_i` from node `i`'s mixture.
///
/// Noise is drawn column by column (node 0 first) from a ChaCha8 stream
/// seeded with `seed`.
pub fn simulate_sem(sem: &WeightedSem, noise: &NoiseModel, n: usize, seed: u64) -> Result<Simulation> {
    let p = sem.p();
    if noise.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: noise.p(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 observations".into()));
    }
    let b = sem.coefficients();
    log_abs_det_i_minus_b(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps = DMatrix::zeros(n, p);
    for i in 0..p {
        let draws = sample_noise(&noise.per_node[i], n, &mut rng);
        eps.column_mut(i).copy_from_slice(&draws);
    }

    let values = match sem.graph().topological_order() {
        Some(order) => {
            let mut y = eps;
            for &v in &order {
                for j in sem.graph().parents(v).collect::<Vec<_>>() {
                    let coef = b[(v, j)];
                    for q in 0..n {
                        y[(q, v)] += coef * y[(q, j)];
                    }
                }
            }
            y
        }
        None => {
            // rows satisfy y^T = e^T (I - B)^-T, i.e. (I - B) Y^T = E^T
            let m = DMatrix::<f64>::identity(p, p) - b;
            let lu = m.lu();
            let sol = lu
                .solve(&eps.transpose())
                .ok_or(Error::SingularSystem { det: 0.0 })?;
            sol.transpose()
        }
    };

    let spectral_radius = if sem.graph().is_acyclic() {
        0.0
    } else {
        spectral_radius(b)
    };
    Ok(Simulation {
        data: DataMatrix::new(values)?,
        spectral_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GaussianMixture;

    #[test]
    fn no_parents_is_plain_gaussian() {
        let y = [0.3, -1.2, 2.0];
        let v = [1.0, 0.5, 2.0];
        let got = collapsed_node_log_marginal(&y, &DMatrix::zeros(3, 0), &v, 1.0).unwrap();
        let want: f64 = y
            .iter()
            .zip(&v)
            .map(|(yq, vq)| -0.5 * ((2.0 * std::f64::consts::PI * vq).ln() + yq * yq / vq))
            .sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn single_parent_single_observation() {
        let got =
            collapsed_node_log_marginal(&[0.0], &DMatrix::from_element(1, 1, 1.0), &[1.0], 1.0)
                .unwrap();
        let want = -0.5 * (4.0 * std::f64::consts::PI).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn marginal_argument_errors() {
        let x = DMatrix::from_element(2, 1, 1.0);
        assert!(collapsed_node_log_marginal(&[0.0, 1.0], &x, &[1.0, 1.0], 0.0).is_err());
        assert!(collapsed_node_log_marginal(&[0.0, 1.0], &x, &[1.0, -1.0], 1.0).is_err());
        assert!(collapsed_node_log_marginal(&[0.0, 1.0], &x, &[1.0], 1.0).is_err());
    }

    #[test]
    fn spike_limit() {
        // gamma1 -> 0 pins the coefficients at zero
        let y = [0.5, -0.4, 1.1, 0.2];
        let v = [1.0, 0.7, 1.3, 0.9];
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, -0.2, 0.8, 1.5]);
        let pinned = collapsed_node_log_marginal(&y, &DMatrix::zeros(4, 0), &v, 1.0).unwrap();
        let near = collapsed_node_log_marginal(&y, &x, &v, 1e-12).unwrap();
        assert!((near - pinned).abs() < 1e-9);
        let mut prev = f64::NEG_INFINITY;
        for g in [1e-1, 1e-2, 1e-4, 1e-8] {
            let l = collapsed_node_log_marginal(&y, &x, &v, g).unwrap();
            assert!((l - pinned).abs() < (prev - pinned).abs() || prev == f64::NEG_INFINITY);
            prev = l;
        }
    }

    #[test]
    fn two_cycle_jacobian() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!((log_abs_det_i_minus_b(&b).unwrap() - 0.75f64.ln()).abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            log_abs_det_i_minus_b(&singular),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn zero_b_likelihood_is_sum_of_marginals() {
        let data = DataMatrix::from_rows(&[vec![0.1, 2.0], vec![-0.7, 0.4], vec![1.5, -1.0]]).unwrap();
        let sem = WeightedSem::new(Graph::empty(2), DMatrix::zeros(2, 2)).unwrap();
        let noise = NoiseModel::new(vec![
            GaussianMixture::new(vec![0.4, 0.6], vec![-1.0, 1.0], vec![0.5, 0.8]).unwrap(),
            GaussianMixture::gaussian(0.2, 2.0).unwrap(),
        ]);
        let got = cyclic_log_likelihood(&data, &sem, &noise).unwrap();
        let mut want = 0.0;
        for q in 0..3 {
            for i in 0..2 {
                want += noise.per_node[i].log_density(data.get(q, i));
            }
        }
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn sem_support_enforced() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0]);
        assert!(WeightedSem::new(Graph::empty(2), b.clone()).is_err());
        let sem = WeightedSem::from_coefficients(b).unwrap();
        assert!(sem.graph().contains(1, 0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.6, -0.5, 0.0]);
        let sem = WeightedSem::from_coefficients(b).unwrap();
        let noise = NoiseModel::uniform(2, GaussianMixture::gaussian(0.0, 1.0).unwrap());
        let a = simulate_sem(&sem, &noise, 20, 3).unwrap();
        let b = simulate_sem(&sem, &noise, 20, 3).unwrap();
        assert_eq!(a.data, b.data);
        assert!(a.is_stable());
    }

    #[test]
    fn acyclic_substitution_matches_linear_solve() {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.7, 0.0, 0.0, -0.4, 1.2, 0.0]);
        let sem = WeightedSem::from_coefficients(b.clone()).unwrap();
        let noise = NoiseModel::uniform(3, GaussianMixture::gaussian(0.0, 1.0).unwrap());
        let sim = simulate_sem(&sem, &noise, 10, 11).unwrap();
        // every row must satisfy (I - B) y = e with e the noise of the same stream
        let resid = residual_matrix(&sim.data, &b);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..3 {
            let eps = sample_noise(&noise.per_node[i], 10, &mut rng);
            for q in 0..10 {
                assert!((resid[(q, i)] - eps[q]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardization() {
        let data = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]]).unwrap();
        let (z, t) = data.standardize().unwrap();
        for i in 0..2 {
            let col = z.column(i);
            assert!(col.iter().sum::<f64>().abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 2.0;
            assert!((var - 1.0).abs() < 1e-12);
        }
        assert_eq!(t.center, vec![3.0, 5.0]);
        let constant = DataMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(constant.standardize().is_err());
    }
}
