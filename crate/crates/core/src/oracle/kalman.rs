use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::params::Transform;
use crate::rates::EnvState;
use crate::rng::StreamRng;
use crate::sis::StateSpaceModel;

/// `n_t = F_t n_{t-1} + w_t`, `w_t ~ N(0, Q_t)`; `y_t = H n_t + v_t`,
/// `v_t ~ N(0, R)`; `n_0 ~ N(m_0, P_0)`. `F` and `Q` hold either one
/// matrix for every step or one per step.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    pub name: String,
    pub start_year: i32,
    pub transition: Vec<DMatrix<f64>>,
    pub process_cov: Vec<DMatrix<f64>>,
    pub observation: DMatrix<f64>,
    pub observation_cov: DMatrix<f64>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    /// `data[t - 1]` is `y_t`.
    pub data: Vec<Option<DVector<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct KalmanResult {
    /// Filtered beliefs for t = 0..T.
    pub beliefs: Vec<GaussianBelief>,
    pub log_likelihood: f64,
    /// Number of updates that needed symmetrization plus jitter to stay
    /// positive semidefinite.
    pub jitter_events: usize,
}

fn pick(ms: &[DMatrix<f64>], t: u32) -> &DMatrix<f64> {
    // past the last step the final matrix carries on
    &ms[(t as usize).saturating_sub(1).min(ms.len() - 1)]
}

/// Lower factor `L` with `L L' = cov`, tolerating semidefinite input.
fn sqrt_psd(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if cov.iter().all(|&v| v == 0.0) {
        return DMatrix::zeros(cov.nrows(), cov.ncols());
    }
    if let Some(c) = cov.clone().cholesky() {
        return c.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

fn mvn_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("observation covariance is not positive definite".into()))?;
    let r = x - mean;
    let z = chol.l().solve_lower_triangular(&r).expect("triangular solve");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (x.len() as f64 * (2.0 * PI).ln() + log_det + z.norm_squared()))
}

impl LinearGaussian {
    pub fn dim(&self) -> usize {
        self.initial_mean.len()
    }

    pub fn steps(&self) -> u32 {
        self.data.len() as u32
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let m = self.observation.nrows();
        let t = self.data.len();
        let sized = |ms: &[DMatrix<f64>]| ms.len() == 1 || ms.len() == t;
        if !sized(&self.transition) || !sized(&self.process_cov) {
            return Err(Error::Config("transition and process covariance need 1 or T matrices".into()));
        }
        if self.transition.iter().chain(&self.process_cov).any(|a| a.shape() != (d, d))
            || self.initial_cov.shape() != (d, d)
            || self.observation.ncols() != d
            || self.observation_cov.shape() != (m, m)
            || self.data.iter().flatten().any(|y| y.len() != m)
        {
            return Err(Error::Schema("linear-Gaussian model dimensions disagree".into()));
        }
        Ok(())
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let s = (&*p + p.transpose()) * 0.5;
    *p = s;
}

/// Keep `p` symmetric with eigenvalues above -1e-12; returns whether a
/// jitter was added.
fn repair(p: &mut DMatrix<f64>) -> bool {
    symmetrize(p);
    let min = p.clone().symmetric_eigen().eigenvalues.min();
    if min < -1e-12 {
        let n = p.nrows();
        *p += DMatrix::identity(n, n) * (-min + 1e-12);
        true
    } else {
        false
    }
}

/// Exact filtering by the Kalman recursion.
pub fn kalman_filter(model: &LinearGaussian) -> Result<KalmanResult> {
    model.validate()?;
    let d = model.dim();
    let h = &model.observation;
    let mut mean = model.initial_mean.clone();
    let mut cov = model.initial_cov.clone();
    let mut jitter = usize::from(repair(&mut cov));
    let mut beliefs = vec![GaussianBelief { mean: mean.clone(), cov: cov.clone() }];
    let mut ll = 0.0;
    for t in 1..=model.steps() {
        let f = pick(&model.transition, t);
        mean = f * &mean;
        cov = f * &cov * f.transpose() + pick(&model.process_cov, t);
        jitter += usize::from(repair(&mut cov));
        if let Some(y) = &model.data[t as usize - 1] {
            let s = h * &cov * h.transpose() + &model.observation_cov;
            let pred = h * &mean;
            ll += mvn_log_pdf(y, &pred, &s)?;
            let s_inv = s
                .clone()
                .cholesky()
                .ok_or_else(|| Error::SingularCovariance("innovation covariance is not positive definite".into()))?
                .inverse();
            let k = &cov * h.transpose() * s_inv;
            mean += &k * (y - pred);
            // Joseph form keeps the update symmetric and PSD
            let a = DMatrix::identity(d, d) - &k * h;
            cov = &a * &cov * a.transpose() + &k * &model.observation_cov * k.transpose();
            jitter += usize::from(repair(&mut cov));
        }
        beliefs.push(GaussianBelief { mean: mean.clone(), cov: cov.clone() });
    }
    Ok(KalmanResult { beliefs, log_likelihood: ll, jitter_events: jitter })
}

fn gaussian(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut StreamRng) -> Vec<f64> {
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| StandardNormal.sample(rng)));
    (mean + factor * z).iter().copied().collect()
}

impl StateSpaceModel for LinearGaussian {
    fn name(&self) -> &str {
        &self.name
    }

    fn steps(&self) -> u32 {
        LinearGaussian::steps(self)
    }

    fn year(&self, t: u32) -> i32 {
        self.start_year + t as i32
    }

    fn cell_labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn param_names(&self) -> &[String] {
        &[]
    }

    fn transforms(&self) -> &[Transform] {
        &[]
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((Vec::new(), gaussian(&self.initial_mean, &sqrt_psd(&self.initial_cov), rng)))
    }

    fn propagate(&self, _theta: &[f64], state: &[f64], _env: &mut EnvState, t: u32, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let mean = pick(&self.transition, t) * DVector::from_column_slice(state);
        Ok(gaussian(&mean, &sqrt_psd(pick(&self.process_cov, t)), rng))
    }

    fn expected_next(&self, _theta: &[f64], state: &[f64], t: u32) -> Result<Vec<f64>> {
        Ok((pick(&self.transition, t) * DVector::from_column_slice(state)).iter().copied().collect())
    }

    fn observed(&self, t: u32) -> bool {
        self.data.get(t as usize - 1).is_some_and(Option::is_some)
    }

    fn log_likelihood(&self, _theta: &[f64], state: &[f64], t: u32) -> Result<f64> {
        match &self.data[t as usize - 1] {
            Some(y) => mvn_log_pdf(y, &(&self.observation * DVector::from_column_slice(state)), &self.observation_cov),
            None => Ok(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(f: f64, q: f64, r: f64, m0: f64, p0: f64, data: Vec<Option<f64>>) -> LinearGaussian {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        LinearGaussian {
            name: "scalar".into(),
            start_year: 0,
            transition: vec![s(f)],
            process_cov: vec![s(q)],
            observation: s(1.0),
            observation_cov: s(r),
            initial_mean: DVector::from_element(1, m0),
            initial_cov: s(p0),
            data: data.into_iter().map(|y| y.map(|v| DVector::from_element(1, v))).collect(),
        }
    }

    #[test]
    fn noiseless_mean_follows_projection() {
        let f = DMatrix::from_row_slice(2, 2, &[0.6, 0.96, 0.5, 0.8]);
        let model = LinearGaussian {
            name: "det".into(),
            start_year: 0,
            transition: vec![f.clone()],
            process_cov: vec![DMatrix::zeros(2, 2)],
            observation: DMatrix::identity(2, 2),
            observation_cov: DMatrix::identity(2, 2),
            initial_mean: DVector::from_vec(vec![10.0, 20.0]),
            initial_cov: DMatrix::zeros(2, 2),
            data: vec![None; 4],
        };
        let k = kalman_filter(&model).unwrap();
        let mut n = DVector::from_vec(vec![10.0, 20.0]);
        for b in &k.beliefs[1..] {
            n = &f * n;
            assert!((&b.mean - &n).norm() < 1e-12);
        }
        assert_eq!(k.log_likelihood, 0.0);
    }

    #[test]
    fn equal_precision_update_is_midpoint() {
        let k = kalman_filter(&scalar(1.0, 0.0, 4.0, 10.0, 4.0, vec![Some(20.0)])).unwrap();
        assert!((k.beliefs[1].mean[0] - 15.0).abs() < 1e-12);
        assert!((k.beliefs[1].cov[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_marginal_likelihood() {
        // y_1 ~ N(f m0, f^2 p0 + q + r)
        let (f, q, r, m0, p0, y) = (0.9, 2.0, 3.0, 5.0, 1.5, 7.25);
        let k = kalman_filter(&scalar(f, q, r, m0, p0, vec![Some(y)])).unwrap();
        let v = f * f * p0 + q + r;
        let want = -0.5 * ((2.0 * PI * v).ln() + (y - f * m0) * (y - f * m0) / v);
        assert!((k.log_likelihood - want).abs() < 1e-12);
    }

    #[test]
    fn covariance_stays_psd() {
        let model = scalar(1.1, 1e-9, 1e-9, 0.0, 1e6, vec![Some(1.0); 30]);
        let k = kalman_filter(&model).unwrap();
        for b in &k.beliefs {
            assert!(b.cov.clone().symmetric_eigen().eigenvalues.min() >= -1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut model = scalar(1.0, 1.0, 1.0, 0.0, 1.0, vec![Some(1.0)]);
        model.observation = DMatrix::zeros(1, 2);
        assert!(matches!(kalman_filter(&model), Err(Error::Schema(_))));
    }
}
