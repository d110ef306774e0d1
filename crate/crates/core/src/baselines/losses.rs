//! Distribution-alignment losses on row-major feature batches (`rows × d`).

use crate::error::{Error, Result};

fn rows_of(x: &[f64], d: usize, what: &str) -> Result<usize> {
    if d == 0 || x.len() % d != 0 {
        return Err(Error::Shape { expected: format!("{what}: rows of width {d}"), got: format!("{} values", x.len()) });
    }
    let n = x.len() / d;
    if n < 2 {
        return Err(Error::Shape { expected: format!("{what}: at least 2 rows"), got: n.to_string() });
    }
    Ok(n)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_bandwidths(b: &[f64]) -> Result<()> {
    if b.is_empty() || b.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Argument(format!("kernel bandwidths must be positive and non-empty, got {b:?}")));
    }
    Ok(())
}

/// Median of the pairwise Euclidean distances within the pooled batch;
/// 1.0 when every point coincides.
pub fn median_pairwise_distance(fs: &[f64], ft: &[f64], d: usize) -> f64 {
    let pooled: Vec<&[f64]> = fs.chunks(d).chain(ft.chunks(d)).collect();
    let mut dists = Vec::with_capacity(pooled.len() * pooled.len() / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let m = crate::data::percentile_in_place(&mut dists, 50.0);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Biased multi-kernel MMD² estimate: mean k(S,S) + mean k(T,T) − 2 mean k(S,T).
pub fn mmd_loss(fs: &[f64], ft: &[f64], d: usize, bandwidths: &[f64]) -> Result<f64> {
    mmd_with_grad(fs, ft, d, bandwidths, None)
}

/// MMD together with its gradient with respect to every feature. The
/// bandwidths are treated as constants.
pub fn mmd_loss_grad(fs: &[f64], ft: &[f64], d: usize, bandwidths: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut gs = vec![0.0; fs.len()];
    let mut gt = vec![0.0; ft.len()];
    let l = mmd_with_grad(fs, ft, d, bandwidths, Some((&mut gs, &mut gt)))?;
    Ok((l, gs, gt))
}

pub(crate) fn mmd_with_grad(fs: &[f64], ft: &[f64], d: usize, sig: &[f64], mut grads: Option<(&mut [f64], &mut [f64])>) -> Result<f64> {
    let n = rows_of(fs, d, "source features")?;
    let m = rows_of(ft, d, "target features")?;
    check_bandwidths(sig)?;
    if let Some((gs, gt)) = grads.as_mut() {
        gs.iter_mut().for_each(|g| *g = 0.0);
        gt.iter_mut().for_each(|g| *g = 0.0);
    }
    // dk/da for k = Σ exp(−‖a−b‖²/2σ²) is −Σ k_σ/σ² · (a − b).
    let kd = |d2: f64| -> (f64, f64) {
        let mut k = 0.0;
        let mut dk = 0.0;
        for s in sig {
            let e = (-d2 / (2.0 * s * s)).exp();
            k += e;
            dk -= e / (s * s);
        }
        (k, dk)
    };
    let block = |xa: &[f64], na: usize, xb: &[f64], nb: usize, coef: f64, grads: &mut Option<(&mut [f64], &mut [f64])>, which: u8| -> f64 {
        let mut sum = 0.0;
        for i in 0..na {
            let a = &xa[i * d..(i + 1) * d];
            for j in 0..nb {
                let b = &xb[j * d..(j + 1) * d];
                let (k, dk) = kd(sq_dist(a, b));
                sum += k;
                if let Some((gs, gt)) = grads.as_mut() {
                    let c = coef * dk;
                    for q in 0..d {
                        let diff = c * (a[q] - b[q]);
                        match which {
                            0 => {
                                gs[i * d + q] += diff;
                                gs[j * d + q] -= diff;
                            }
                            1 => {
                                gt[i * d + q] += diff;
                                gt[j * d + q] -= diff;
                            }
                            _ => {
                                gs[i * d + q] += diff;
                                gt[j * d + q] -= diff;
                            }
                        }
                    }
                }
            }
        }
        sum
    };
    let nn = (n * n) as f64;
    let mm = (m * m) as f64;
    let nm = (n * m) as f64;
    let kss = block(fs, n, fs, n, 1.0 / nn, &mut grads, 0);
    let ktt = block(ft, m, ft, m, 1.0 / mm, &mut grads, 1);
    let kst = block(fs, n, ft, m, -2.0 / nm, &mut grads, 2);
    Ok(kss / nn + ktt / mm - 2.0 * kst / nm)
}

/// Unbiased sample covariance (`d × d`, row-major) and the centred data.
fn covariance(x: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; d];
    for row in x.chunks(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let xc: Vec<f64> = x.chunks(d).flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect::<Vec<_>>()).collect();
    let mut c = vec![0.0; d * d];
    for row in xc.chunks(d) {
        for a in 0..d {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                c[a * d + b] += row[a] * row[b];
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    (c, xc)
}

/// `‖C_s − C_t‖²_F / (4d²)` with unbiased covariances.
pub fn coral_loss(fs: &[f64], ft: &[f64], d: usize) -> Result<f64> {
    let n = rows_of(fs, d, "source features")?;
    let m = rows_of(ft, d, "target features")?;
    let (cs, _) = covariance(fs, n, d);
    let (ct, _) = covariance(ft, m, d);
    let fro: f64 = cs.iter().zip(&ct).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(fro / (4.0 * (d * d) as f64))
}

/// CORAL and its feature gradients: `dL/dX_s = 2/(n−1) · X̄_s · G` with
/// `G = (C_s − C_t)/(2d²)`, and the negated counterpart for the target.
pub fn coral_loss_grad(fs: &[f64], ft: &[f64], d: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = rows_of(fs, d, "source features")?;
    let m = rows_of(ft, d, "target features")?;
    let (cs, xs) = covariance(fs, n, d);
    let (ct, xt) = covariance(ft, m, d);
    let scale = 1.0 / (2.0 * (d * d) as f64);
    let g: Vec<f64> = cs.iter().zip(&ct).map(|(a, b)| (a - b) * scale).collect();
    let loss = cs.iter().zip(&ct).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (4.0 * (d * d) as f64);
    let apply = |xc: &[f64], rows: usize, sign: f64| -> Vec<f64> {
        let c = sign * 2.0 / (rows - 1) as f64;
        let mut out = vec![0.0; xc.len()];
        for (row, o) in xc.chunks(d).zip(out.chunks_mut(d)) {
            for a in 0..d {
                if row[a] == 0.0 {
                    continue;
                }
                for b in 0..d {
                    o[b] += c * row[a] * g[a * d + b];
                }
            }
        }
        out
    };
    Ok((loss, apply(&xs, n, 1.0), apply(&xt, m, -1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> Vec<f64> {
        (0..n * d).map(|_| rng.random_range(-1.0..1.0) + shift).collect()
    }

    fn naive_mmd(s: &[Vec<f64>], t: &[Vec<f64>], sig: &[f64]) -> f64 {
        let k = |a: &Vec<f64>, b: &Vec<f64>| {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            sig.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum::<f64>()
        };
        let mut ss = 0.0;
        for a in s {
            for b in s {
                ss += k(a, b);
            }
        }
        let mut tt = 0.0;
        for a in t {
            for b in t {
                tt += k(a, b);
            }
        }
        let mut st = 0.0;
        for a in s {
            for b in t {
                st += k(a, b);
            }
        }
        let (n, m) = (s.len() as f64, t.len() as f64);
        ss / (n * n) + tt / (m * m) - 2.0 * st / (n * m)
    }

    fn naive_coral(s: &[Vec<f64>], t: &[Vec<f64>]) -> f64 {
        let cov = |x: &[Vec<f64>]| {
            let d = x[0].len();
            let n = x.len() as f64;
            let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
            let mut c = vec![vec![0.0; d]; d];
            for a in 0..d {
                for b in 0..d {
                    c[a][b] = x.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0);
                }
            }
            c
        };
        let (cs, ct) = (cov(s), cov(t));
        let d = cs.len();
        let mut f = 0.0;
        for a in 0..d {
            for b in 0..d {
                f += (cs[a][b] - ct[a][b]).powi(2);
            }
        }
        f / (4.0 * (d * d) as f64)
    }

    fn rows(x: &[f64], d: usize) -> Vec<Vec<f64>> {
        x.chunks(d).map(|r| r.to_vec()).collect()
    }

    #[test]
    fn identical_batches_have_zero_discrepancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = batch(&mut rng, 16, 5, 0.0);
        assert!(mmd_loss(&s, &s, 5, &[0.5, 1.0, 2.0]).unwrap().abs() <= 1e-12);
        assert_eq!(coral_loss(&s, &s, 5).unwrap(), 0.0);
    }

    #[test]
    fn two_point_mmd_closed_form() {
        let delta: f64 = 1.7;
        let s = [0.0, 0.0, 0.0, 0.0];
        let t = [delta, 0.0, delta, 0.0];
        let got = mmd_loss(&s, &t, 2, &[1.0]).unwrap();
        let want = 2.0 * (1.0 - (-delta * delta / 2.0).exp());
        assert!((got - want).abs() <= 1e-14, "{got} vs {want}");
    }

    #[test]
    fn coral_hand_case() {
        assert_eq!(coral_loss(&[0.0, 2.0], &[0.0, 0.0], 1).unwrap(), 1.0);
    }

    #[test]
    fn losses_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..20 {
            let d = 1 + trial % 6;
            let n = rng.random_range(2..=32);
            let m = rng.random_range(2..=32);
            let s = batch(&mut rng, n, d, 0.0);
            let t = batch(&mut rng, m, d, 0.3);
            let sig = [0.25, 0.5, 1.0, 2.0, 4.0];
            let a = mmd_loss(&s, &t, d, &sig).unwrap();
            let b = naive_mmd(&rows(&s, d), &rows(&t, d), &sig);
            assert!((a - b).abs() <= 1e-10);
            let c = coral_loss(&s, &t, d).unwrap();
            let e = naive_coral(&rows(&s, d), &rows(&t, d));
            assert!((c - e).abs() <= 1e-10);
        }
    }

    #[test]
    fn shape_errors() {
        assert_eq!(mmd_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0], 2, &[1.0]).unwrap_err().kind(), "shape");
        assert_eq!(coral_loss(&[1.0, 2.0], &[1.0, 2.0, 3.0, 4.0], 2).unwrap_err().kind(), "shape");
        assert_eq!(mmd_loss(&[1.0, 2.0], &[1.0, 2.0], 1, &[]).unwrap_err().kind(), "argument");
    }

    fn fd_check(f: impl Fn(&[f64], &[f64]) -> f64, s: &[f64], t: &[f64], gs: &[f64], gt: &[f64]) {
        let eps = 1e-6;
        let mut sp = s.to_vec();
        for k in 0..s.len() {
            let o = sp[k];
            sp[k] = o + eps;
            let up = f(&sp, t);
            sp[k] = o - eps;
            let dn = f(&sp, t);
            sp[k] = o;
            let num = (up - dn) / (2.0 * eps);
            assert!((num - gs[k]).abs() <= 1e-6 * num.abs().max(1e-3), "source {k}: {num} vs {}", gs[k]);
        }
        let mut tp = t.to_vec();
        for k in 0..t.len() {
            let o = tp[k];
            tp[k] = o + eps;
            let up = f(s, &tp);
            tp[k] = o - eps;
            let dn = f(s, &tp);
            tp[k] = o;
            let num = (up - dn) / (2.0 * eps);
            assert!((num - gt[k]).abs() <= 1e-6 * num.abs().max(1e-3), "target {k}: {num} vs {}", gt[k]);
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 3;
        let s = batch(&mut rng, 6, d, 0.0);
        let t = batch(&mut rng, 5, d, 0.5);
        let sig = [0.5, 1.0, 2.0];
        let (l, gs, gt) = mmd_loss_grad(&s, &t, d, &sig).unwrap();
        assert_eq!(l, mmd_loss(&s, &t, d, &sig).unwrap());
        fd_check(|a, b| mmd_loss(a, b, d, &sig).unwrap(), &s, &t, &gs, &gt);
        let (l, gs, gt) = coral_loss_grad(&s, &t, d).unwrap();
        assert!((l - coral_loss(&s, &t, d).unwrap()).abs() <= 1e-15);
        fd_check(|a, b| coral_loss(a, b, d).unwrap(), &s, &t, &gs, &gt);
    }

    #[test]
    fn median_heuristic() {
        assert_eq!(median_pairwise_distance(&[0.0, 0.0], &[0.0, 0.0], 1), 1.0);
        // Pooled {0, 1, 3}: distances 1, 3, 2.
        assert_eq!(median_pairwise_distance(&[0.0, 1.0], &[3.0], 1), 2.0);
    }

    proptest! {
        #[test]
        fn mmd_is_nonnegative_and_symmetric(seed in 0u64..10_000, n in 2usize..12, m in 2usize..12, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = batch(&mut rng, n, d, 0.0);
            let shift = rng.random_range(-1.0..1.0);
            let t = batch(&mut rng, m, d, shift);
            let sig = [0.25, 1.0, 4.0];
            let a = mmd_loss(&s, &t, d, &sig).unwrap();
            let b = mmd_loss(&t, &s, d, &sig).unwrap();
            prop_assert!(a >= -1e-10);
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn coral_is_rotation_invariant(seed in 0u64..10_000, n in 2usize..12, m in 2usize..12, angle in 0.0f64..6.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = batch(&mut rng, n, 2, 0.0);
            let t = batch(&mut rng, m, 2, 0.2);
            let (c, sn) = (angle.cos(), angle.sin());
            let rot = |x: &[f64]| -> Vec<f64> { x.chunks(2).flat_map(|p| [c * p[0] - sn * p[1], sn * p[0] + c * p[1]]).collect() };
            let a = coral_loss(&s, &t, 2).unwrap();
            let b = coral_loss(&rot(&s), &rot(&t), 2).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
            prop_assert_eq!(coral_loss(&s, &s, 2).unwrap(), 0.0);
        }
    }
}
