//! Domain classifier and gradient reversal.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Two fully connected layers, `d → hidden` (ReLU) then `hidden → 1`, with a
/// logistic output giving the probability that a feature came from the
/// source domain. Parameters are laid out as W1 `[hidden × d]`, b1, w2, b2.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainClassifier {
    pub d: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl DomainClassifier {
    pub fn new(d: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seed::stream(seed, "classifier/init");
        let mut params = vec![0.0; hidden * d + hidden + hidden + 1];
        let b1 = 1.0 / (d as f64).sqrt();
        for p in &mut params[..hidden * d] {
            *p = rng.random_range(-b1..b1);
        }
        let b2 = 1.0 / (hidden as f64).sqrt();
        let w2 = hidden * d + hidden;
        for p in &mut params[w2..w2 + hidden] {
            *p = rng.random_range(-b2..b2);
        }
        Self { d, hidden, params }
    }

    /// Logit for one feature row, plus the hidden pre-activations.
    fn logit(&self, x: &[f64], pre: &mut [f64]) -> f64 {
        let (d, h) = (self.d, self.hidden);
        let p = &self.params;
        let mut z = p[h * d + 2 * h];
        for j in 0..h {
            let row = &p[j * d..(j + 1) * d];
            let a = p[h * d + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            pre[j] = a;
            z += p[h * d + h + j] * a.max(0.0);
        }
        z
    }

    /// Source-domain probabilities for each row.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut pre = vec![0.0; self.hidden];
        x.chunks(self.d).map(|r| 1.0 / (1.0 + (-self.logit(r, &mut pre)).exp())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialStep {
    /// Mean binary cross-entropy; source rows labeled 1, target rows 0.
    pub loss: f64,
    /// `−λ · ∂loss/∂features`, the reversed gradients sent to the feature extractor.
    pub grad_s: Vec<f64>,
    pub grad_t: Vec<f64>,
    /// `∂loss/∂classifier parameters`, for the classifier's own descent step.
    pub classifier_grad: Vec<f64>,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn adversarial_step(fs: &[f64], ft: &[f64], d: usize, clf: &DomainClassifier, lambda: f64) -> Result<AdversarialStep> {
    if d != clf.d || d == 0 || fs.len() % d != 0 || ft.len() % d != 0 || fs.is_empty() || ft.is_empty() {
        return Err(Error::Shape { expected: format!("non-empty batches of width {}", clf.d), got: format!("{} and {} values at width {d}", fs.len(), ft.len()) });
    }
    let h = clf.hidden;
    let p = &clf.params;
    let total = (fs.len() + ft.len()) / d;
    let inv = 1.0 / total as f64;
    let mut grad_s = vec![0.0; fs.len()];
    let mut grad_t = vec![0.0; ft.len()];
    let mut cg = vec![0.0; p.len()];
    let mut pre = vec![0.0; h];
    let mut loss = 0.0;
    for (x, g, label) in fs.chunks(d).zip(grad_s.chunks_mut(d)).map(|(x, g)| (x, g, 1.0)).chain(ft.chunks(d).zip(grad_t.chunks_mut(d)).map(|(x, g)| (x, g, 0.0))) {
        let z = clf.logit(x, &mut pre);
        // BCE(σ(z), y) = softplus(z) − y·z.
        loss += softplus(z) - label * z;
        let dz = (1.0 / (1.0 + (-z).exp()) - label) * inv;
        cg[h * d + 2 * h] += dz;
        for j in 0..h {
            let a = pre[j];
            if a <= 0.0 {
                continue;
            }
            cg[h * d + h + j] += dz * a;
            let da = dz * p[h * d + h + j];
            cg[h * d + j] += da;
            let row = &p[j * d..(j + 1) * d];
            for q in 0..d {
                cg[j * d + q] += da * x[q];
                g[q] += -lambda * da * row[q];
            }
        }
    }
    loss *= inv;
    if !loss.is_finite() || cg.iter().chain(&grad_s).chain(&grad_t).any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("adversarial step produced non-finite values (loss {loss})")));
    }
    Ok(AdversarialStep { loss, grad_s, grad_t, classifier_grad: cg })
}
