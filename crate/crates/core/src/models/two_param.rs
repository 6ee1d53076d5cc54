use super::expfam::{exponentials, normals};
use super::tensor::MonomialTable;
use super::{check_finite, check_len, check_min_len, mean, Data, ModelFamily};
use crate::cumulant::CumulantBundle;
use crate::error::{Error, Result};
use crate::expansion::{coefficients_orthogonal, ExpansionCoefficients, OrthogonalCumulants};
use crate::rng::StreamRng;

fn check_positive(theta: &[f64], names: [&str; 2], from: usize) -> Result<()> {
    for (i, (&v, name)) in theta.iter().zip(names).enumerate().skip(from) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v} (index {i})")));
        }
    }
    Ok(())
}

/// `N(φ, β)` with mean `φ` under test and variance `β` as nuisance.
pub struct NormalMean;

const NORMAL_TABLE: MonomialTable = MonomialTable {
    rows: [
        [(-1.0, 0, 1), (0.0, 0, 0), (-0.5, 0, 2), (0.0, 0, 0), (0.0, 0, 0)],
        [(0.0, 0, 0), (1.0, 0, 2), (0.0, 0, 0), (2.0, 0, 3), (0.0, 0, 0)],
        [(0.0, 0, 0), (0.0, 0, 0), (-2.0, 0, 3), (0.0, 0, 0), (-9.0, 0, 4)],
    ],
};

impl ModelFamily for NormalMean {
    fn name(&self) -> &str {
        "normal2"
    }
    fn p(&self) -> usize {
        2
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["phi", "beta"]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_len(theta, 2)?;
        if !theta[0].is_finite() {
            return Err(Error::InvalidArgument("phi must be finite".into()));
        }
        check_positive(theta, ["phi", "beta"], 1)
    }

    fn sample(&self, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Data> {
        self.check_theta(theta)?;
        let sd = theta[1].sqrt();
        Ok(Data::One(normals(n, rng).into_iter().map(|z| theta[0] + sd * z).collect()))
    }

    fn validate(&self, data: &Data) -> Result<()> {
        check_min_len(data, 2)?;
        check_finite(data.one()?, 0)
    }

    fn fit_unrestricted(&self, data: &Data) -> Result<Vec<f64>> {
        let x = data.one()?;
        let m = mean(x);
        let v = mean(&x.iter().map(|v| (v - m).powi(2)).collect::<Vec<_>>());
        if !(v > 0.0) {
            return Err(Error::Degenerate("sample variance is zero".into()));
        }
        Ok(vec![m, v])
    }

    fn fit_restricted(&self, data: &Data, theta10: &[f64]) -> Result<Vec<f64>> {
        let x = data.one()?;
        let phi0 = theta10[0];
        let v = mean(&x.iter().map(|v| (v - phi0).powi(2)).collect::<Vec<_>>());
        if !(v > 0.0) {
            return Err(Error::Degenerate("all observations equal the null mean".into()));
        }
        Ok(vec![phi0, v])
    }

    fn score(&self, data: &Data, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let x = data.one()?;
        let (phi, beta) = (theta[0], theta[1]);
        let m2 = mean(&x.iter().map(|v| (v - phi).powi(2)).collect::<Vec<_>>());
        Ok(vec![(mean(x) - phi) / beta, -0.5 / beta + m2 / (2.0 * beta * beta)])
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        self.check_theta(theta)?;
        Ok(NORMAL_TABLE.bundle(theta[0], theta[1]))
    }

    fn closed_form_coefficients(&self, theta: &[f64]) -> Result<ExpansionCoefficients> {
        let b = self.cumulants(theta)?;
        Ok(coefficients_orthogonal(&OrthogonalCumulants::from_bundle(&b)?)?.coefficients)
    }

    /// `n (T1/T2) / (1 + T1/T2)`
    fn closed_form_statistic(&self, data: &Data, theta10: &[f64]) -> Option<Result<f64>> {
        Some(data.one().map(|x| {
            let n = x.len() as f64;
            let m = mean(x);
            let t1 = n * (m - theta10[0]).powi(2);
            let t2: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
            n * (t1 / t2) / (1.0 + t1 / t2)
        }))
    }
}

/// Two balanced exponential samples with means `μ` and `φμ`; `φ` under
/// test, `β = μ φ^(1/2)` as orthogonal nuisance. `n` counts both samples.
pub struct TwoSampleExponential;

const TWO_SAMPLE_TABLE: MonomialTable = MonomialTable {
    rows: [
        [(-0.25, 2, 0), (0.0, 0, 0), (-1.0, 0, 2), (0.0, 0, 0), (0.0, 0, 0)],
        [(0.75, 3, 0), (0.25, 2, 1), (0.0, 0, 0), (4.0, 0, 3), (0.0, 0, 0)],
        [(-45.0 / 16.0, 4, 0), (-0.75, 3, 1), (-0.5, 2, 2), (0.0, 0, 0), (-18.0, 0, 4)],
    ],
};

impl TwoSampleExponential {
    fn means(data: &Data) -> Result<(f64, f64)> {
        let (x, y) = data.two()?;
        Ok((mean(x), mean(y)))
    }
}

impl ModelFamily for TwoSampleExponential {
    fn name(&self) -> &str {
        "two-sample-exponential"
    }
    fn p(&self) -> usize {
        2
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["phi", "beta"]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_len(theta, 2)?;
        check_positive(theta, ["phi", "beta"], 0)
    }

    fn sample(&self, theta: &[f64], n: usize, rng: &mut StreamRng) -> Result<Data> {
        self.check_theta(theta)?;
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("balanced design needs an even n >= 2, got {n}")));
        }
        let (phi, beta) = (theta[0], theta[1]);
        let mu = beta / phi.sqrt();
        let x = exponentials(n / 2, rng).into_iter().map(|e| mu * e).collect();
        let y = exponentials(n / 2, rng).into_iter().map(|e| phi * mu * e).collect();
        Ok(Data::Two(x, y))
    }

    fn validate(&self, data: &Data) -> Result<()> {
        let (x, y) = data.two()?;
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "balanced design needs two non-empty samples of equal size, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        check_finite(x, 0)?;
        check_finite(y, x.len())?;
        for (i, &v) in x.iter().chain(y).enumerate() {
            if v <= 0.0 {
                return Err(Error::Support { index: i, value: v, reason: "observations must be positive" });
            }
        }
        Ok(())
    }

    fn fit_unrestricted(&self, data: &Data) -> Result<Vec<f64>> {
        let (m1, m2) = Self::means(data)?;
        Ok(vec![m2 / m1, (m1 * m2).sqrt()])
    }

    fn fit_restricted(&self, data: &Data, theta10: &[f64]) -> Result<Vec<f64>> {
        let (m1, m2) = Self::means(data)?;
        let r = theta10[0].sqrt();
        Ok(vec![theta10[0], 0.5 * (m1 * r + m2 / r)])
    }

    fn score(&self, data: &Data, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let (m1, m2) = Self::means(data)?;
        let (phi, beta) = (theta[0], theta[1]);
        let r = phi.sqrt();
        Ok(vec![
            (-m1 / r + m2 / (phi * r)) / (4.0 * beta),
            -1.0 / beta + (m1 * r + m2 / r) / (2.0 * beta * beta),
        ])
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        self.check_theta(theta)?;
        Ok(TWO_SAMPLE_TABLE.bundle(theta[0], theta[1]))
    }

    fn closed_form_coefficients(&self, theta: &[f64]) -> Result<ExpansionCoefficients> {
        let b = self.cumulants(theta)?;
        Ok(coefficients_orthogonal(&OrthogonalCumulants::from_bundle(&b)?)?.coefficients)
    }

    /// `n (x̄1 - x̄2)² / (4 x̄1 x̄)` for the hypothesis of equal means.
    fn closed_form_statistic(&self, data: &Data, theta10: &[f64]) -> Option<Result<f64>> {
        if theta10 != [1.0] {
            return None;
        }
        Some(Self::means(data).map(|(m1, m2)| {
            let n = data.len() as f64;
            n * (m1 - m2).powi(2) / (4.0 * m1 * 0.5 * (m1 + m2))
        }))
    }
}
