//! Least squares and RBF kernel ridge regression with min-max scaling and
//! grid-search cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension min-max scaling to [0,1]; constant dimensions map to 0.
/// Values outside the fitted range are not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let dim = check_matrix(x)?;
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in x {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply(r)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::Fit("scaler bounds differ in length".into()));
        }
        if self
            .min
            .iter()
            .zip(&self.max)
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || hi < lo)
        {
            return Err(Error::Fit("scaler bounds must be finite with max ≥ min".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Linear {
        weights: Vec<f64>,
        intercept: f64,
    },
    KernelRbf {
        support: Vec<Vec<f64>>,
        alpha: Vec<f64>,
        gamma: f64,
    },
}

impl Predictor {
    fn dim(&self) -> Option<usize> {
        match self {
            Predictor::Linear { weights, .. } => Some(weights.len()),
            Predictor::KernelRbf { support, .. } => support.first().map(Vec::len),
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Linear { weights, intercept } => {
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            Predictor::KernelRbf { support, alpha, gamma } => {
                support.iter().zip(alpha).map(|(s, a)| a * rbf(s, x, *gamma)).sum()
            }
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub format_version: u32,
    /// Names the feature layout the model was trained on.
    pub schema: String,
    pub scaler: Option<Scaler>,
    pub predictor: Predictor,
}

impl RegressionModel {
    /// Linear model predicting 0 everywhere.
    pub fn zero(schema: impl Into<String>, dim: usize) -> Self {
        RegressionModel {
            format_version: MODEL_FORMAT_VERSION,
            schema: schema.into(),
            scaler: None,
            predictor: Predictor::Linear {
                weights: vec![0.0; dim],
                intercept: 0.0,
            },
        }
    }

    pub fn with_schema(mut self, schema: impl Into<String>) -> Self {
        self.schema = schema.into();
        self
    }

    pub fn dim(&self) -> Option<usize> {
        self.scaler.as_ref().map(Scaler::dim).or_else(|| self.predictor.dim())
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.scaler {
            Some(s) => self.predictor.predict(&s.apply(x)),
            None => self.predictor.predict(x),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: RegressionModel = serde_json::from_str(text).map_err(|e| Error::Fit(format!("model JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Fit(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if let Some(s) = &self.scaler {
            s.validate()?;
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.predictor {
            Predictor::Linear { weights, intercept } => {
                if !finite(weights) || !intercept.is_finite() {
                    return Err(Error::Fit("non-finite linear coefficients".into()));
                }
            }
            Predictor::KernelRbf { support, alpha, gamma } => {
                let dim = support.first().map_or(0, Vec::len);
                if support.len() != alpha.len()
                    || support.iter().any(|s| s.len() != dim || !finite(s))
                    || !finite(alpha)
                    || !(gamma.is_finite() && *gamma > 0.0)
                {
                    return Err(Error::Fit("inconsistent kernel model".into()));
                }
            }
        }
        match (self.scaler.as_ref().map(Scaler::dim), self.predictor.dim()) {
            (Some(a), Some(b)) if a != b => Err(Error::Fit("scaler and predictor dimensions differ".into())),
            _ => Ok(()),
        }
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Returns the common row length; rejects ragged or non-finite input.
fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Fit("rows differ in length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("features must be finite".into()));
    }
    Ok(dim)
}

fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Fit("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("targets must be finite".into()));
    }
    check_matrix(x)
}

/// Minimizes `Σ(y − w·x − b)² + ridge·‖w‖²`; the intercept `b` is not penalized.
/// Without a ridge term the minimum-norm least-squares solution is taken.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<RegressionModel> {
    let dim = check_xy(x, y)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Fit(format!("ridge must be a non-negative number, got {ridge}")));
    }
    let n = x.len();
    let a = DMatrix::from_fn(n, dim + 1, |i, j| if j == dim { 1.0 } else { x[i][j] });
    let b = DVector::from_column_slice(y);

    let solution = if ridge > 0.0 {
        let mut ata = a.transpose() * &a;
        for j in 0..dim {
            ata[(j, j)] += ridge;
        }
        let atb = a.transpose() * &b;
        match ata.clone().cholesky() {
            Some(c) => c.solve(&atb),
            None => pseudo_solve(ata, &atb)?,
        }
    } else {
        pseudo_solve(a, &b)?
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("linear solution is not finite".into()));
    }
    Ok(RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        schema: String::new(),
        scaler: None,
        predictor: Predictor::Linear {
            weights: solution.rows(0, dim).iter().copied().collect(),
            intercept: solution[dim],
        },
    })
}

fn pseudo_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = largest * 1e-12 * svd.singular_values.len().max(1) as f64;
    svd.solve(b, eps.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Fit(e.to_string()))
}

/// Kernel ridge regression: `α = (K + reg·I)⁻¹ y` with `K_ij = exp(−γ‖x_i − x_j‖²)`.
pub fn fit_kernel_rbf(x: &[Vec<f64>], y: &[f64], gamma: f64, reg: f64) -> Result<RegressionModel> {
    check_xy(x, y)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Fit(format!("gamma must be positive, got {gamma}")));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::Fit(format!("regularization must be non-negative, got {reg}")));
    }
    let n = x.len();
    let k = DMatrix::from_fn(n, n, |i, j| rbf(&x[i], &x[j], gamma) + if i == j { reg } else { 0.0 });
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::Fit("kernel system is not positive definite".into()))?;
    let alpha = chol.solve(&DVector::from_column_slice(y));
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("kernel solution is not finite".into()));
    }
    Ok(RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        schema: String::new(),
        scaler: None,
        predictor: Predictor::KernelRbf {
            support: x.to_vec(),
            alpha: alpha.iter().copied().collect(),
            gamma,
        },
    })
}

/// One learner configuration in a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Linear { ridge: f64 },
    KernelRbf { gamma: f64, reg: f64 },
}

impl Learner {
    /// Fits on raw features (no scaling).
    pub fn fit(&self, x: &[Vec<f64>], y: &[f64]) -> Result<RegressionModel> {
        match *self {
            Learner::Linear { ridge } => fit_linear(x, y, ridge),
            Learner::KernelRbf { gamma, reg } => fit_kernel_rbf(x, y, gamma, reg),
        }
    }

    /// Fits a scaler on `x`, then the learner on the scaled rows.
    pub fn fit_scaled(&self, x: &[Vec<f64>], y: &[f64]) -> Result<RegressionModel> {
        let scaler = Scaler::fit(x)?;
        let mut model = self.fit(&scaler.apply_all(x), y)?;
        model.scaler = Some(scaler);
        Ok(model)
    }
}

pub const DEFAULT_GAMMAS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_REGS: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

/// The RBF grid, γ-major.
pub fn rbf_grid(gammas: &[f64], regs: &[f64]) -> Vec<Learner> {
    gammas
        .iter()
        .flat_map(|&gamma| regs.iter().map(move |&reg| Learner::KernelRbf { gamma, reg }))
        .collect()
}

/// Grid search by k-fold cross-validation. Row `i` validates in fold `i % folds`;
/// each fold fits its own scaler on the training part. The grid point with the
/// lowest pooled squared error wins, ties going to the earlier point. A grid
/// point whose fit fails on any fold scores infinite loss.
pub fn cross_validate(x: &[Vec<f64>], y: &[f64], folds: usize, grid: &[Learner]) -> Result<(Learner, f64)> {
    check_xy(x, y)?;
    if folds < 2 {
        return Err(Error::Fit("cross-validation needs at least 2 folds".into()));
    }
    if x.len() < folds {
        return Err(Error::Fit(format!("{} rows cannot fill {folds} folds", x.len())));
    }
    if grid.is_empty() {
        return Err(Error::Fit("empty hyperparameter grid".into()));
    }
    let mut best: Option<(Learner, f64)> = None;
    for learner in grid {
        let loss = cv_loss(x, y, folds, learner);
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((*learner, loss));
        }
    }
    let best = best.expect("grid is non-empty");
    if !best.1.is_finite() {
        return Err(Error::Fit("every grid point failed to fit".into()));
    }
    Ok(best)
}

fn cv_loss(x: &[Vec<f64>], y: &[f64], folds: usize, learner: &Learner) -> f64 {
    let mut sse = 0.0;
    for fold in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, (row, &t)) in x.iter().zip(y).enumerate() {
            if i % folds == fold {
                vx.push(row.clone());
                vy.push(t);
            } else {
                tx.push(row.clone());
                ty.push(t);
            }
        }
        let Ok(model) = learner.fit_scaled(&tx, &ty) else {
            return f64::INFINITY;
        };
        sse += vx
            .iter()
            .zip(&vy)
            .map(|(r, t)| (model.predict(r) - t).powi(2))
            .sum::<f64>();
    }
    let loss = sse / x.len() as f64;
    if loss.is_finite() {
        loss
    } else {
        f64::INFINITY
    }
}

/// Picks hyperparameters by cross-validation (folds reduced to the row count when
/// needed, single grid point used as-is) and refits on all rows with scaling.
pub fn train(x: &[Vec<f64>], y: &[f64], folds: usize, grid: &[Learner]) -> Result<RegressionModel> {
    check_xy(x, y)?;
    let learner = match grid {
        [] => return Err(Error::Fit("empty hyperparameter grid".into())),
        [only] => *only,
        _ if x.len() < 2 => grid[0],
        _ => cross_validate(x, y, folds.min(x.len()).max(2), grid)?.0,
    };
    learner.fit_scaled(x, y)
}

pub fn rmse(model: &RegressionModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let sse: f64 = x.iter().zip(y).map(|(r, t)| (model.predict(r) - t).powi(2)).sum();
    (sse / y.len().max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    fn linear_parts(m: &RegressionModel) -> (Vec<f64>, f64) {
        match &m.predictor {
            Predictor::Linear { weights, intercept } => (weights.clone(), *intercept),
            _ => panic!("not linear"),
        }
    }

    #[test]
    fn exact_slope() {
        let m = fit_linear(&col(&[1.0, 2.0, 3.0, 4.0]), &[2.0, 4.0, 6.0, 8.0], 0.0).unwrap();
        let (w, b) = linear_parts(&m);
        assert_abs_diff_eq!(w[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            rmse(&m, &col(&[1.0, 2.0, 3.0, 4.0]), &[2.0, 4.0, 6.0, 8.0]),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn constant_target() {
        let x = vec![vec![1.0, 5.0], vec![2.0, -1.0], vec![3.0, 0.5], vec![4.0, 2.0]];
        let (w, b) = linear_parts(&fit_linear(&x, &[7.0; 4], 0.0).unwrap());
        assert_abs_diff_eq!(b, 7.0, epsilon = 1e-9);
        assert!(w.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn rank_deficient_and_ridge() {
        // duplicated column: SVD picks the minimum-norm split
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let (w, _) = linear_parts(&fit_linear(&x, &[2.0, 4.0, 6.0], 0.0).unwrap());
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-9);
        let (w, _) = linear_parts(&fit_linear(&x, &[2.0, 4.0, 6.0], 0.1).unwrap());
        assert!(w[0] < 1.0 && (w[0] - w[1]).abs() < 1e-9);
        assert!(fit_linear(&x, &[1.0], 0.0).is_err());
    }

    #[test]
    fn scaler_examples() {
        let s = Scaler::fit(&col(&[5.0, 10.0, 20.0])).unwrap();
        let scaled: Vec<f64> = s
            .apply_all(&col(&[5.0, 10.0, 20.0]))
            .into_iter()
            .map(|r| r[0])
            .collect();
        assert_eq!(scaled, [0.0, 1.0 / 3.0, 1.0]);
        assert_eq!(s.apply(&[25.0]), [4.0 / 3.0]);
        assert_eq!(Scaler::fit(&col(&[3.0, 3.0])).unwrap().apply(&[3.0]), [0.0]);
    }

    #[test]
    fn kernel_interpolates_with_small_reg() {
        let x = col(&[0.0, 0.5, 1.0, 1.5]);
        let y = [1.0, -1.0, 2.0, 0.0];
        let m = fit_kernel_rbf(&x, &y, 1.0, 1e-9).unwrap();
        for (r, t) in x.iter().zip(y) {
            assert_abs_diff_eq!(m.predict(r), t, epsilon = 1e-4);
        }
    }

    #[test]
    fn kernel_degenerate_gamma_is_constant() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let m = fit_kernel_rbf(&x, &[1.0, 2.0, 3.0, 4.0], 1e-9, 1e-3).unwrap();
        let a = m.predict(&[0.0]);
        assert_abs_diff_eq!(a, m.predict(&[3.0]), epsilon = 1e-3);
        assert_abs_diff_eq!(a, m.predict(&[10.0]), epsilon = 1e-3);
    }

    #[test]
    fn kernel_singular_without_reg() {
        let x = col(&[1.0, 1.0]);
        assert!(matches!(fit_kernel_rbf(&x, &[0.0, 1.0], 1.0, 0.0), Err(Error::Fit(_))));
    }

    #[test]
    fn kernel_beats_linear_on_sine() {
        let train_x: Vec<f64> = (0..40).map(|i| i as f64 / 40.0 * 6.0).collect();
        let test_x: Vec<f64> = (0..40).map(|i| (i as f64 + 0.5) / 40.0 * 6.0).collect();
        let y = |v: &[f64]| v.iter().map(|x| x.sin()).collect::<Vec<_>>();
        let lin = Learner::Linear { ridge: 0.0 }
            .fit_scaled(&col(&train_x), &y(&train_x))
            .unwrap();
        let ker = Learner::KernelRbf { gamma: 10.0, reg: 1e-3 }
            .fit_scaled(&col(&train_x), &y(&train_x))
            .unwrap();
        assert!(rmse(&ker, &col(&test_x), &y(&test_x)) < rmse(&lin, &col(&test_x), &y(&test_x)));
    }

    #[test]
    fn cv_rules() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
        let only = [Learner::KernelRbf { gamma: 1.0, reg: 1.0 }];
        assert_eq!(cross_validate(&x, &y, 3, &only).unwrap().0, only[0]);
        let grid = [
            Learner::KernelRbf { gamma: 0.01, reg: 1.0 },
            Learner::Linear { ridge: 0.0 },
        ];
        assert_eq!(cross_validate(&x, &y, 3, &grid).unwrap().0, grid[1]);
        let twins = [Learner::Linear { ridge: 0.0 }, Learner::Linear { ridge: 0.0 }];
        let (_, loss) = cross_validate(&x, &y, 3, &twins).unwrap();
        assert!(loss < 1e-18);
        assert!(cross_validate(&x[..2], &y[..2], 3, &grid).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = vec![vec![0.1, 0.7], vec![0.3, 0.2], vec![0.9, 0.4], vec![0.5, 0.5]];
        let y = [0.3, 0.1, 0.77, 1.0 / 3.0];
        for learner in [
            Learner::Linear { ridge: 0.01 },
            Learner::KernelRbf { gamma: 0.1, reg: 0.01 },
        ] {
            let m = learner.fit_scaled(&x, &y).unwrap().with_schema("s");
            let back = RegressionModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
        }
        assert!(RegressionModel::from_json("{}").is_err());
        let mut bad = RegressionModel::zero("s", 1);
        bad.format_version = 9;
        assert!(RegressionModel::from_json(&bad.to_json()).is_err());
    }
}
