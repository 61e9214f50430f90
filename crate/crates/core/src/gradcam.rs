//! Grad-CAM over the last convolutional layer.

use crate::error::{Error, Result};
use crate::nn::{grad_last_conv, model_forward, ModelParams, Tensor4};
use crate::volume::{resample_bilinear, Slice2D};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CAM_BATCH: usize = 64;

/// A network Grad-CAM can explain: it exposes one target activation and the
/// gradient of a class logit with respect to it.
pub trait CamNetwork {
    /// Activation `A` with shape `(1, h, w, c)` and `d logit[class] / dA`
    /// of the same shape, for one prepared slice.
    fn activation_and_grad(&self, slice: &Slice2D, class: usize) -> Result<(Tensor4<f64>, Tensor4<f64>)>;
}

impl CamNetwork for ModelParams<f32> {
    fn activation_and_grad(&self, slice: &Slice2D, class: usize) -> Result<(Tensor4<f64>, Tensor4<f64>)> {
        let (h, w) = slice.dims();
        let x = Tensor4::new([1, h, w, 1], slice.data().to_vec())?;
        let (_, cache) = model_forward(self, &x)?;
        let mut onehot = [0.0f32; 3];
        onehot[class] = 1.0;
        let grad = grad_last_conv(self, &cache, &onehot)?;
        let widen = |t: &Tensor4<f32>| Tensor4::new(t.dims(), t.data().iter().map(|&v| v as f64).collect());
        Ok((widen(cache.last_conv())?, widen(&grad)?))
    }
}

/// Class-activation map aligned to the slice it explains.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    /// Values in `[0, 1]`, same dims as the input slice.
    pub values: Slice2D,
    pub target_class: usize,
    /// Maximum of the coarse map before normalization.
    pub raw_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapStats {
    pub raw_max: f64,
    pub mean: f64,
    /// Fraction of pixels at or above 0.5.
    pub foreground_fraction: f64,
}

/// Coarse map `ReLU(sum_c alpha_c A_c)` with `alpha_c` the spatial mean of
/// the gradient of channel `c`.
pub fn coarse_map(activation: &Tensor4<f64>, grad: &Tensor4<f64>) -> Result<Vec<f64>> {
    let [n, h, w, c] = activation.dims();
    if n != 1 || grad.dims() != activation.dims() {
        return Err(Error::Shape(format!(
            "activation {:?} and gradient {:?} must match with batch 1",
            activation.dims(),
            grad.dims()
        )));
    }
    let mut alpha = vec![0.0; c];
    for px in grad.data().chunks_exact(c) {
        for (a, &g) in alpha.iter_mut().zip(px) {
            *a += g;
        }
    }
    let area = (h * w) as f64;
    alpha.iter_mut().for_each(|a| *a /= area);
    Ok(activation
        .data()
        .chunks_exact(c)
        .map(|px| px.iter().zip(&alpha).map(|(v, a)| v * a).sum::<f64>().max(0.0))
        .collect())
}

fn heatmap_from(activation: &Tensor4<f64>, grad: &Tensor4<f64>, dims: (usize, usize), target_class: usize) -> Result<Heatmap> {
    let [_, ch, cw, _] = activation.dims();
    let coarse = coarse_map(activation, grad)?;
    let raw_max = coarse.iter().cloned().fold(0.0, f64::max);
    let (h, w) = dims;
    if raw_max <= 0.0 || !raw_max.is_finite() {
        return Ok(Heatmap {
            values: Slice2D::filled(h, w, 0.0)?,
            target_class,
            raw_max: 0.0,
        });
    }
    let scaled: Vec<f32> = coarse.iter().map(|&v| (v / raw_max) as f32).collect();
    let mut values = resample_bilinear(&Slice2D::new(ch, cw, scaled)?, h, w);
    values.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(Heatmap {
        values,
        target_class,
        raw_max,
    })
}

fn check_class(c: usize) -> Result<()> {
    if c > 2 {
        return Err(Error::Argument(format!("target class must be 0, 1 or 2, got {c}")));
    }
    Ok(())
}

/// Grad-CAM for any [`CamNetwork`].
pub fn gradcam_with(net: &impl CamNetwork, slice: &Slice2D, target_class: usize) -> Result<Heatmap> {
    check_class(target_class)?;
    let (activation, grad) = net.activation_and_grad(slice, target_class)?;
    heatmap_from(&activation, &grad, slice.dims(), target_class)
}

/// Grad-CAM for every sample of a `(n, s, s, 1)` batch, one target class
/// per sample. Same result as calling [`gradcam`] slice by slice.
pub fn gradcam_batch(params: &ModelParams<f32>, x: &Tensor4<f32>, classes: &[usize]) -> Result<Vec<Heatmap>> {
    let [n, h, w, c] = x.dims();
    if classes.len() != n {
        return Err(Error::Argument(format!("{} target classes for {n} slices", classes.len())));
    }
    classes.iter().try_for_each(|&k| check_class(k))?;
    let per = h * w * c;
    let chunks: Vec<Vec<Heatmap>> = x
        .data()
        .par_chunks(CAM_BATCH * per)
        .zip(classes.par_chunks(CAM_BATCH))
        .map(|(data, targets)| {
            let k = targets.len();
            let (_, cache) = model_forward(params, &Tensor4::new([k, h, w, c], data.to_vec())?)?;
            let mut onehot = vec![0.0f32; 3 * k];
            for (i, &t) in targets.iter().enumerate() {
                onehot[3 * i + t] = 1.0;
            }
            let grad = grad_last_conv(params, &cache, &onehot)?;
            let act = cache.last_conv();
            let [_, ah, aw, ac] = act.dims();
            (0..k)
                .map(|i| {
                    let one = |t: &Tensor4<f32>| {
                        Tensor4::new([1, ah, aw, ac], t.sample(i).iter().map(|&v| v as f64).collect())
                    };
                    heatmap_from(&one(act)?, &one(&grad)?, (h, w), targets[i])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Grad-CAM of the classifier's last conv layer for one prepared slice.
pub fn gradcam(params: &ModelParams<f32>, slice: &Slice2D, target_class: usize) -> Result<Heatmap> {
    gradcam_with(params, slice, target_class)
}

pub fn heatmap_stats(heatmap: &Heatmap) -> HeatmapStats {
    let data = heatmap.values.data();
    let n = data.len().max(1) as f64;
    HeatmapStats {
        raw_max: heatmap.raw_max,
        mean: data.iter().map(|&v| v as f64).sum::<f64>() / n,
        foreground_fraction: data.iter().filter(|&&v| v >= 0.5).count() as f64 / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ModelConfig, NUM_DENSE};
    use rand::{Rng, SeedableRng};

    fn random_slice(size: usize, seed: u64) -> Slice2D {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Slice2D::new(size, size, (0..size * size).map(|_| r.gen()).collect()).unwrap()
    }

    #[test]
    fn zero_network_gives_zero_map() {
        let p = ModelParams::<f32>::zeros(&ModelConfig::tiny()).unwrap();
        let h = gradcam(&p, &random_slice(22, 1), 1).unwrap();
        assert_eq!(h.raw_max, 0.0);
        assert!(h.values.data().iter().all(|&v| v == 0.0));
        let s = heatmap_stats(&h);
        assert_eq!((s.raw_max, s.mean, s.foreground_fraction), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bad_class_rejected() {
        let p = ModelParams::<f32>::zeros(&ModelConfig::tiny()).unwrap();
        assert!(matches!(gradcam(&p, &random_slice(22, 1), 3), Err(Error::Argument(_))));
    }

    #[test]
    fn constant_map_stats() {
        let h = Heatmap {
            values: Slice2D::filled(4, 5, 1.0).unwrap(),
            target_class: 0,
            raw_max: 2.5,
        };
        let s = heatmap_stats(&h);
        assert_eq!((s.raw_max, s.mean, s.foreground_fraction), (2.5, 1.0, 1.0));
    }

    fn live_params() -> (ModelParams<f32>, Slice2D, usize) {
        let cfg = ModelConfig {
            input_size: 30,
            ..ModelConfig::tiny()
        };
        let p = ModelParams::<f32>::init(&cfg).unwrap();
        let s = random_slice(30, 2);
        let class = (0..3)
            .find(|&c| gradcam(&p, &s, c).unwrap().raw_max > 0.0)
            .expect("some class has a non-zero map");
        (p, s, class)
    }

    #[test]
    fn scaling_target_row_scales_raw_map_only() {
        let (p, s, class) = live_params();
        let base = gradcam(&p, &s, class).unwrap();
        let lambda = 3.0f32;
        let mut q = p.clone();
        let n_in = q.dense_weight(NUM_DENSE - 1).len() / 3;
        for v in &mut q.dense_weight_mut(NUM_DENSE - 1)[class * n_in..(class + 1) * n_in] {
            *v *= lambda;
        }
        q.dense_bias_mut(NUM_DENSE - 1)[class] *= lambda;
        let scaled = gradcam(&q, &s, class).unwrap();
        assert!((scaled.raw_max / base.raw_max - lambda as f64).abs() < 1e-5);
        for (a, b) in base.values.data().iter().zip(scaled.values.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn other_logit_rows_do_not_matter() {
        let (p, s, class) = live_params();
        let base = gradcam(&p, &s, class).unwrap();
        let mut q = p.clone();
        let n_in = q.dense_weight(NUM_DENSE - 1).len() / 3;
        for c in (0..3).filter(|&c| c != class) {
            q.dense_weight_mut(NUM_DENSE - 1)[c * n_in..(c + 1) * n_in].fill(0.0);
            q.dense_bias_mut(NUM_DENSE - 1)[c] = 0.0;
        }
        let other = gradcam(&q, &s, class).unwrap();
        assert_eq!(base, other);
    }

    #[test]
    fn batch_matches_single() {
        let (p, s, _) = live_params();
        let s2 = random_slice(30, 9);
        let x = Tensor4::new([2, 30, 30, 1], [s.data(), s2.data()].concat()).unwrap();
        let maps = gradcam_batch(&p, &x, &[1, 2]).unwrap();
        assert_eq!(maps[0], gradcam(&p, &s, 1).unwrap());
        assert_eq!(maps[1], gradcam(&p, &s2, 2).unwrap());
    }

    #[test]
    fn heatmap_matches_slice_dims_and_range() {
        let (p, s, class) = live_params();
        let h = gradcam(&p, &s, class).unwrap();
        assert_eq!(h.values.dims(), s.dims());
        assert!(h.values.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
