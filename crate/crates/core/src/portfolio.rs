//! Budget-constrained mean-variance portfolio selection as a QUBO.
//!
//! The unpenalized cost of a selection `x ∈ {0,1}^N` is
//! `q·xᵀσx − (1−q)·μᵀx`; the budget `Σx = B` is enforced with the quadratic
//! penalty `A·(B − Σx)²`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bits::{bits_from_index, check_binary};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const PENALTY_MARGIN: f64 = 1e-3;

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInstance {
    labels: Option<Vec<String>>,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    q: f64,
    budget: usize,
    penalty: f64,
}

impl PortfolioInstance {
    /// Validates and builds an instance. With `penalty = None` the weight is
    /// picked by [`choose_penalty`].
    pub fn new(
        mu: Vec<f64>,
        sigma: DMatrix<f64>,
        q: f64,
        budget: usize,
        penalty: Option<f64>,
    ) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidInstance("no assets".into()));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidInstance(format!(
                "sigma is {}x{}, expected {n}x{n}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite entry".into()));
        }
        if !is_symmetric(&sigma, SYMMETRY_TOL) {
            return Err(Error::InvalidInstance("sigma is not symmetric".into()));
        }
        let lam = min_eigenvalue(&sigma);
        if lam < -PSD_TOL {
            return Err(Error::InvalidInstance(format!(
                "sigma is not positive semidefinite (smallest eigenvalue {lam:e})"
            )));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInstance(format!("q = {q} outside [0, 1]")));
        }
        if budget == 0 || budget >= n {
            return Err(Error::InvalidInstance(format!(
                "budget {budget} must satisfy 0 < B < {n}"
            )));
        }
        let mu = DVector::from_vec(mu);
        let penalty = match penalty {
            Some(a) if !(a.is_finite() && a >= 0.0) => {
                return Err(Error::InvalidInstance(format!("penalty {a} must be >= 0")))
            }
            Some(a) => a,
            None => choose_penalty(&mu, &sigma, q),
        };
        Ok(PortfolioInstance {
            labels: None,
            mu,
            sigma,
            q,
            budget,
            penalty,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_assets() {
            return Err(Error::InvalidInstance(format!(
                "{} labels for {} assets",
                labels.len(),
                self.n_assets()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same instance with a different penalty weight.
    pub fn with_penalty(&self, penalty: f64) -> Result<Self> {
        if !(penalty.is_finite() && penalty >= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "penalty {penalty} must be >= 0"
            )));
        }
        Ok(PortfolioInstance {
            penalty,
            ..self.clone()
        })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn budget(&self) -> usize {
        self.budget
    }
    pub fn penalty(&self) -> f64 {
        self.penalty
    }
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    fn check_bits(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n_assets() {
            return Err(Error::LengthMismatch {
                expected: self.n_assets(),
                got: bits.len(),
            });
        }
        check_binary(bits)
    }

    /// Unpenalized cost `q·Σᵢⱼ xᵢxⱼσᵢⱼ − (1−q)·Σᵢ xᵢμᵢ`.
    pub fn portfolio_cost(&self, bits: &[u8]) -> Result<f64> {
        self.check_bits(bits)?;
        Ok(self.portfolio_cost_unchecked(bits))
    }

    fn portfolio_cost_unchecked(&self, bits: &[u8]) -> f64 {
        let n = self.n_assets();
        let mut risk = 0.0;
        let mut ret = 0.0;
        for i in 0..n {
            if bits[i] == 0 {
                continue;
            }
            ret += self.mu[i];
            for j in 0..n {
                if bits[j] != 0 {
                    risk += self.sigma[(i, j)];
                }
            }
        }
        self.q * risk - (1.0 - self.q) * ret
    }

    /// Portfolio cost of the basis state `index`.
    pub fn portfolio_cost_index(&self, index: usize) -> f64 {
        self.portfolio_cost_unchecked(&bits_from_index(index, self.n_assets()))
    }

    /// Portfolio cost plus the budget penalty `A·(B − Σxᵢ)²`.
    pub fn penalized_cost(&self, bits: &[u8]) -> Result<f64> {
        self.check_bits(bits)?;
        let selected: usize = bits.iter().filter(|&&b| b != 0).count();
        let violation = self.budget as f64 - selected as f64;
        Ok(self.portfolio_cost_unchecked(bits) + self.penalty * violation * violation)
    }

    pub fn is_feasible(&self, bits: &[u8]) -> bool {
        bits.iter().filter(|&&b| b != 0).count() == self.budget
    }

    /// Expands the penalized cost into `xᵀFx + fᵀx + c`.
    ///
    /// `F = q·σ + A·11ᵀ`, `f = −(1−q)·μ − 2AB·1`, `c = A·B²`. The linear term
    /// stays separate from the diagonal because the continuous relaxation
    /// distinguishes `xᵢ²` from `xᵢ`.
    pub fn to_qubo(&self) -> QuboProblem {
        let n = self.n_assets();
        let a = self.penalty;
        let b = self.budget as f64;
        let quad = DMatrix::from_fn(n, n, |i, j| self.q * self.sigma[(i, j)] + a);
        let lin = DVector::from_fn(n, |i, _| -(1.0 - self.q) * self.mu[i] - 2.0 * a * b);
        QuboProblem {
            quad,
            lin,
            offset: a * b * b,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> InstanceFile {
        let n = self.n_assets();
        InstanceFile {
            n_assets: n,
            labels: self.labels.clone(),
            mu: self.mu.iter().copied().collect(),
            sigma: (0..n)
                .map(|i| (0..n).map(|j| self.sigma[(i, j)]).collect())
                .collect(),
            q: self.q,
            budget: self.budget,
            penalty: Some(self.penalty),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Penalty weight that strictly separates feasible from infeasible selections.
///
/// For PSD `σ`, every selection's portfolio cost lies in an interval of width
/// at most `S = q·Σ|σᵢⱼ| + (1−q)·Σ|μᵢ|`. An infeasible selection pays at least
/// `A`, so any `A > S` puts it above every feasible one.
pub fn choose_penalty(mu: &DVector<f64>, sigma: &DMatrix<f64>, q: f64) -> f64 {
    let spread = q * sigma.iter().map(|v| v.abs()).sum::<f64>()
        + (1.0 - q) * mu.iter().map(|v| v.abs()).sum::<f64>();
    spread + PENALTY_MARGIN
}

/// On-disk instance document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n_assets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub q: f64,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<PortfolioInstance> {
        let n = self.n_assets;
        if self.mu.len() != n {
            return Err(Error::InvalidInstance(format!(
                "n_assets = {n} but mu has {} entries",
                self.mu.len()
            )));
        }
        if self.sigma.len() != n || self.sigma.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInstance(format!("sigma must be {n}x{n}")));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| self.sigma[i][j]);
        let inst = PortfolioInstance::new(self.mu, sigma, self.q, self.budget, self.penalty)?;
        match self.labels {
            Some(labels) => inst.with_labels(labels),
            None => Ok(inst),
        }
    }
}

/// `xᵀFx + fᵀx + offset` over binary `x`, with symmetric `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub offset: f64,
}

impl QuboProblem {
    pub fn new(quad: DMatrix<f64>, lin: DVector<f64>, offset: f64) -> Result<Self> {
        let n = lin.len();
        if quad.nrows() != n || quad.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: quad.nrows(),
            });
        }
        if !is_symmetric(&quad, SYMMETRY_TOL) {
            return Err(Error::InvalidArgument(
                "quadratic matrix is not symmetric".into(),
            ));
        }
        Ok(QuboProblem { quad, lin, offset })
    }

    pub fn n_vars(&self) -> usize {
        self.lin.len()
    }

    pub fn evaluate(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n_vars() {
            return Err(Error::LengthMismatch {
                expected: self.n_vars(),
                got: bits.len(),
            });
        }
        check_binary(bits)?;
        Ok(self.evaluate_unchecked(bits))
    }

    fn evaluate_unchecked(&self, bits: &[u8]) -> f64 {
        let n = self.n_vars();
        let mut value = 0.0;
        for i in 0..n {
            if bits[i] == 0 {
                continue;
            }
            let mut row = self.lin[i];
            for j in 0..n {
                if bits[j] != 0 {
                    row += self.quad[(i, j)];
                }
            }
            value += row;
        }
        value + self.offset
    }

    pub fn evaluate_index(&self, index: usize) -> f64 {
        self.evaluate_unchecked(&bits_from_index(index, self.n_vars()))
    }

    /// Objective on a continuous point (the relaxation's `F(x̃)`).
    pub fn evaluate_continuous(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.quad * x)[(0, 0)] + self.lin.dot(x) + self.offset
    }

    /// Gradient `2Fx + f` of the continuous objective.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.quad * x * 2.0 + &self.lin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits_from_index;
    use crate::instance_lab::appendix_instance;

    fn two_asset() -> PortfolioInstance {
        PortfolioInstance::new(vec![1.0, 0.0], DMatrix::zeros(2, 2), 0.5, 1, Some(0.0)).unwrap()
    }

    #[test]
    fn empty_portfolio_costs_nothing() {
        let inst = appendix_instance();
        assert_eq!(inst.portfolio_cost(&[0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn single_asset_cost_from_tables() {
        let inst = appendix_instance();
        let mut bits = [0u8; 10];
        bits[0] = 1;
        let v = inst.portfolio_cost(&bits).unwrap();
        assert!((v - 0.08437012).abs() < 1e-12, "{v}");
    }

    #[test]
    fn penalty_arithmetic() {
        let inst = appendix_instance().with_penalty(2.0).unwrap();
        assert_eq!(inst.penalized_cost(&[0; 10]).unwrap(), 50.0);
        let feasible = [1, 1, 0, 1, 0, 0, 1, 0, 1, 0];
        assert_eq!(
            inst.penalized_cost(&feasible).unwrap(),
            inst.portfolio_cost(&feasible).unwrap()
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let inst = appendix_instance();
        assert!(matches!(
            inst.portfolio_cost(&[0; 3]),
            Err(Error::LengthMismatch {
                expected: 10,
                got: 3
            })
        ));
        assert!(inst.penalized_cost(&[0; 11]).is_err());
        assert!(inst.to_qubo().evaluate(&[0; 2]).is_err());
    }

    #[test]
    fn return_only_limit() {
        let inst = PortfolioInstance::new(
            vec![0.3, -0.2, 0.1],
            DMatrix::identity(3, 3),
            0.0,
            1,
            Some(0.0),
        )
        .unwrap();
        let qubo = inst.to_qubo();
        assert!(qubo.quad.iter().all(|&v| v == 0.0));
        assert_eq!(qubo.lin.as_slice(), &[-0.3, 0.2, -0.1]);
        assert_eq!(qubo.offset, 0.0);
    }

    #[test]
    fn degenerate_instance_penalty() {
        let mu = DVector::zeros(4);
        let sigma = DMatrix::zeros(4, 4);
        assert_eq!(choose_penalty(&mu, &sigma, 0.5), 1e-3);
    }

    #[test]
    fn qubo_matches_penalized_cost_exhaustively() {
        let inst = appendix_instance();
        let qubo = inst.to_qubo();
        for idx in 0..1024 {
            let bits = bits_from_index(idx, 10);
            let a = qubo.evaluate(&bits).unwrap();
            let b = inst.penalized_cost(&bits).unwrap();
            assert!((a - b).abs() <= 1e-12, "{idx}: {a} vs {b}");
        }
    }

    #[test]
    fn chosen_penalty_separates_feasible_set() {
        let inst = appendix_instance();
        let (mut worst_feasible, mut best_infeasible) = (f64::NEG_INFINITY, f64::INFINITY);
        for idx in 0..1024 {
            let bits = bits_from_index(idx, 10);
            let v = inst.penalized_cost(&bits).unwrap();
            if inst.is_feasible(&bits) {
                worst_feasible = worst_feasible.max(v);
            } else {
                best_infeasible = best_infeasible.min(v);
            }
        }
        assert!(best_infeasible > worst_feasible);
    }

    #[test]
    fn qubo_quadratic_is_psd() {
        let inst = appendix_instance();
        assert!(min_eigenvalue(&inst.to_qubo().quad) >= -1e-10);
    }

    #[test]
    fn forced_two_asset_costs() {
        let inst = two_asset();
        assert_eq!(inst.portfolio_cost(&[1, 0]).unwrap(), -0.5);
        assert_eq!(inst.portfolio_cost(&[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_invalid_instances() {
        let sym = DMatrix::identity(3, 3);
        assert!(PortfolioInstance::new(vec![0.0; 3], sym.clone(), 1.5, 1, None).is_err());
        assert!(PortfolioInstance::new(vec![0.0; 3], sym.clone(), 0.5, 0, None).is_err());
        assert!(PortfolioInstance::new(vec![0.0; 3], sym.clone(), 0.5, 3, None).is_err());
        assert!(PortfolioInstance::new(vec![0.0; 3], sym.clone(), 0.5, 1, Some(-1.0)).is_err());
        let mut asym = sym.clone();
        asym[(0, 1)] = 0.1;
        assert!(PortfolioInstance::new(vec![0.0; 3], asym, 0.5, 1, None).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(PortfolioInstance::new(vec![0.0; 2], indefinite, 0.5, 1, None).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let inst = appendix_instance();
        let text = serde_json::to_string(&inst.to_file()).unwrap();
        let back = PortfolioInstance::from_json_str(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn missing_penalty_is_computed() {
        let text =
            r#"{"n_assets":2,"mu":[1.0,0.0],"sigma":[[0.0,0.0],[0.0,0.0]],"q":0.5,"budget":1}"#;
        let inst = PortfolioInstance::from_json_str(text).unwrap();
        assert!((inst.penalty() - (0.5 + 1e-3)).abs() < 1e-15);
    }
}
