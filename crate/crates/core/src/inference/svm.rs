//! RBF-kernel C-SVM trained by sequential minimal optimization with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::task::Label;

pub const MODEL_FORMAT: &str = "cogscreen-svm";
const MODEL_VERSION: u32 = 1;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// 1 / (n_features * variance of the standardized training entries).
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    /// KKT violation tolerance.
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: Gamma::Scale, tol: 1e-3 }
    }
}

/// Per-feature mean and standard deviation from the training set. A
/// constant feature keeps a scale of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSvmModel {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub c: f64,
    pub gamma: f64,
    pub standardizer: Standardizer,
    /// Standardized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i for each support vector, with AD = +1.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub decision_value: f64,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-gamma * d2).exp()
}

fn sign(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        -1.0
    }
}

fn validate(x: &[Vec<f64>], y: &[Label]) -> Result<usize, InferenceError> {
    if x.len() != y.len() {
        return Err(InferenceError::LengthMismatch(x.len(), y.len()));
    }
    let d = x.first().ok_or(InferenceError::Empty)?.len();
    for row in x {
        if row.len() != d {
            return Err(InferenceError::Width { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
    }
    if !(y.iter().any(|l| l.is_positive()) && y.iter().any(|l| !l.is_positive())) {
        return Err(InferenceError::SingleClass);
    }
    Ok(d)
}

/// Fit an RBF C-SVM. Samples are put in a canonical order first, so the
/// model does not depend on the order of the input rows.
pub fn svm_fit(
    x: &[Vec<f64>],
    y: &[Label],
    feature_names: &[&str],
    params: SvmParams,
) -> Result<KernelSvmModel, InferenceError> {
    let d = validate(x, y)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(InferenceError::Param(format!("C must be positive, got {}", params.c)));
    }
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(InferenceError::Param(format!("tolerance must be positive, got {}", params.tol)));
    }
    if !feature_names.is_empty() && feature_names.len() != d {
        return Err(InferenceError::Width { expected: d, got: feature_names.len() });
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let standardizer = Standardizer::fit(&sorted);
    let xs: Vec<Vec<f64>> = sorted.iter().map(|row| standardizer.transform(row)).collect();
    let ys: Vec<f64> = order.iter().map(|&i| sign(y[i])).collect();

    let gamma = match params.gamma {
        Gamma::Value(g) if g > 0.0 && g.is_finite() => g,
        Gamma::Value(g) => return Err(InferenceError::Param(format!("gamma must be positive, got {g}"))),
        Gamma::Scale => {
            let all: Vec<f64> = xs.iter().flatten().copied().collect();
            let m = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|v| (v - m).powi(2)).sum::<f64>() / all.len() as f64;
            if var > 0.0 {
                1.0 / (d as f64 * var)
            } else {
                1.0
            }
        }
    };

    let n = xs.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf(gamma, &xs[i], &xs[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * kernel[i * n + j];
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10 * n * n;
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmin = f64::INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], ys[t]) {
                continue;
            }
            let v = -ys[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = kernel[i * n + i] + kernel[t * n + t] - 2.0 * kernel[i * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax - gmin < params.tol {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += q(i, k) * di + q(j, k) * dj;
        }
    }

    let rho = {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in 0..n {
            let yg = ys[t] * grad[t];
            if alpha[t] >= c {
                if ys[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if ys[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            (ub + lb) / 2.0
        }
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(xs[t].clone());
            dual_coef.push(alpha[t] * ys[t]);
        }
    }
    Ok(KernelSvmModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        c,
        gamma,
        standardizer,
        support_vectors,
        dual_coef,
        rho,
        iterations,
        converged,
    })
}

pub fn svm_predict(model: &KernelSvmModel, features: &[f64]) -> Result<Prediction, InferenceError> {
    let d = model.standardizer.mean.len();
    if features.len() != d {
        return Err(InferenceError::Width { expected: d, got: features.len() });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(InferenceError::NonFinite);
    }
    Ok(model.predict_standardized(&model.standardizer.transform(features)))
}

impl KernelSvmModel {
    fn predict_standardized(&self, z: &[f64]) -> Prediction {
        let decision_value = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, coef)| coef * rbf(self.gamma, sv, z))
            .sum::<f64>()
            - self.rho;
        let label = if decision_value > 0.0 { Label::Ad } else { Label::Hc };
        Prediction { label, decision_value }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InferenceError> {
        let model: KernelSvmModel = serde_json::from_str(text).map_err(|e| InferenceError::Model(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(InferenceError::Model(format!("unexpected format `{}`", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(InferenceError::Model(format!("unsupported version {}", model.version)));
        }
        let d = model.standardizer.mean.len();
        if model.standardizer.scale.len() != d
            || model.support_vectors.len() != model.dual_coef.len()
            || model.support_vectors.iter().any(|sv| sv.len() != d)
        {
            return Err(InferenceError::Model("inconsistent dimensions".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor() -> (Vec<Vec<f64>>, Vec<Label>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![Label::Hc, Label::Hc, Label::Ad, Label::Ad],
        )
    }

    #[test]
    fn fits_xor_exactly() {
        let (x, y) = xor();
        let m = svm_fit(&x, &y, &[], SvmParams::default()).unwrap();
        assert!(m.converged);
        for (row, label) in x.iter().zip(&y) {
            assert_eq!(svm_predict(&m, row).unwrap().label, *label);
        }
        assert!(m.dual_coef.iter().all(|a| a.abs() <= m.c + 1e-12));
    }

    #[test]
    fn separable_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let (cx, l) = if i % 2 == 0 { (2.5, Label::Ad) } else { (-2.5, Label::Hc) };
            x.push(vec![cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(l);
        }
        let m = svm_fit(&x, &y, &["a", "b"], SvmParams::default()).unwrap();
        let correct = x.iter().zip(&y).filter(|(r, l)| svm_predict(&m, r).unwrap().label == **l).count();
        assert!(correct >= 99);
        let sv = &m.support_vectors[0];
        let raw: Vec<f64> =
            sv.iter().zip(&m.standardizer.mean).zip(&m.standardizer.scale).map(|((z, mu), s)| z * s + mu).collect();
        let own = if m.dual_coef[0] > 0.0 { Label::Ad } else { Label::Hc };
        assert_eq!(svm_predict(&m, &raw).unwrap().label, own);
    }

    #[test]
    fn symmetric_pair_midpoint_is_zero() {
        let x = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let m = svm_fit(&x, &[Label::Hc, Label::Ad], &[], SvmParams::default()).unwrap();
        assert!(svm_predict(&m, &[0.0, 0.0]).unwrap().decision_value.abs() < 1e-12);
        assert!(svm_predict(&m, &[1.0, 0.0]).unwrap().decision_value > 0.0);
    }

    #[test]
    fn rejects_single_class_and_bad_shapes() {
        let x = vec![vec![1.0], vec![1.0]];
        assert!(matches!(
            svm_fit(&x, &[Label::Ad, Label::Ad], &[], SvmParams::default()),
            Err(InferenceError::SingleClass)
        ));
        assert!(matches!(
            svm_fit(&x, &[Label::Ad], &[], SvmParams::default()),
            Err(InferenceError::LengthMismatch(2, 1))
        ));
        let (x, y) = xor();
        let m = svm_fit(&x, &y, &[], SvmParams::default()).unwrap();
        assert!(svm_predict(&m, &[1.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = xor();
        let m = svm_fit(&x, &y, &["p", "q"], SvmParams::default()).unwrap();
        let back = KernelSvmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for p in [[0.3, 0.7], [0.9, 0.1], [0.5, 0.5]] {
            let a = svm_predict(&m, &p).unwrap().decision_value;
            let b = svm_predict(&back, &p).unwrap().decision_value;
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(KernelSvmModel::from_json("{\"format\":\"other\"}").is_err());
    }
}
