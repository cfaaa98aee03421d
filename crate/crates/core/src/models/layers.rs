//! Building blocks for the convolutional model: output geometry, strided 2-D
//! convolution, average pooling, layer normalization and activations.

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Output side length `(input - kernel + 2 padding) / stride + 1`.
///
/// Geometries that do not divide evenly are rejected rather than floored.
pub fn conv_out_dim(input: usize, kernel: usize, padding: usize, stride: usize) -> Result<usize> {
    if input == 0 || kernel == 0 || stride == 0 {
        return Err(Error::config(
            "geometry",
            format!("input {input}, kernel {kernel} and stride {stride} must all be >= 1"),
        ));
    }
    let span = input + 2 * padding;
    if kernel > span {
        return Err(Error::config(
            "geometry",
            format!("kernel {kernel} larger than padded input {span}"),
        ));
    }
    let inner = span - kernel;
    if !inner.is_multiple_of(stride) {
        return Err(Error::config(
            "geometry",
            format!(
                "({input} - {kernel} + 2*{padding}) / {stride} + 1 = {} is not integral",
                inner as f64 / stride as f64 + 1.0
            ),
        ));
    }
    Ok(inner / stride + 1)
}

/// Convolution of a single-channel image with a set of kernels.
///
/// Out-of-bounds taps read zero padding. Returns one `out x out` map per kernel.
pub fn conv2d(
    image: &Matrix,
    kernels: &[Matrix],
    stride: usize,
    padding: usize,
) -> Result<Vec<Matrix>> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::invalid("conv2d needs at least one kernel"))?;
    let (kr, kc) = first.shape();
    if kernels.iter().any(|k| k.shape() != (kr, kc)) {
        return Err(Error::invalid("conv2d kernels must share one shape"));
    }
    let out_r = conv_out_dim(image.rows(), kr, padding, stride).map_err(as_invalid)?;
    let out_c = conv_out_dim(image.cols(), kc, padding, stride).map_err(as_invalid)?;
    let geom = ConvGeometry {
        in_rows: image.rows(),
        in_cols: image.cols(),
        k_rows: kr,
        k_cols: kc,
        stride,
        padding,
        out_rows: out_r,
        out_cols: out_c,
    };
    Ok(kernels
        .iter()
        .map(|k| {
            let mut out = Matrix::zeros(out_r, out_c);
            geom.correlate(image.as_slice(), k.as_slice(), out.as_mut_slice());
            out
        })
        .collect())
}

fn as_invalid(e: Error) -> Error {
    Error::invalid(e.to_string())
}

/// Precomputed geometry of a single-channel strided convolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ConvGeometry {
    pub in_rows: usize,
    pub in_cols: usize,
    pub k_rows: usize,
    pub k_cols: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_rows: usize,
    pub out_cols: usize,
}

impl ConvGeometry {
    #[inline]
    fn tap(&self, out: usize, k: usize) -> Option<usize> {
        (out * self.stride + k).checked_sub(self.padding)
    }

    /// `out[i, j] = sum_{u,v} kernel[u, v] * image[i S + u - P, j S + v - P]`.
    pub fn correlate(&self, image: &[f64], kernel: &[f64], out: &mut [f64]) {
        for i in 0..self.out_rows {
            for j in 0..self.out_cols {
                let mut acc = 0.0;
                for u in 0..self.k_rows {
                    let Some(r) = self.tap(i, u).filter(|&r| r < self.in_rows) else {
                        continue;
                    };
                    let row = &image[r * self.in_cols..(r + 1) * self.in_cols];
                    for v in 0..self.k_cols {
                        if let Some(c) = self.tap(j, v).filter(|&c| c < self.in_cols) {
                            acc += kernel[u * self.k_cols + v] * row[c];
                        }
                    }
                }
                out[i * self.out_cols + j] = acc;
            }
        }
    }

    /// Accumulates `d loss / d kernel` given `d loss / d out`.
    pub fn kernel_grad(&self, image: &[f64], d_out: &[f64], d_kernel: &mut [f64]) {
        for u in 0..self.k_rows {
            for v in 0..self.k_cols {
                let mut acc = 0.0;
                for i in 0..self.out_rows {
                    let Some(r) = self.tap(i, u).filter(|&r| r < self.in_rows) else {
                        continue;
                    };
                    for j in 0..self.out_cols {
                        if let Some(c) = self.tap(j, v).filter(|&c| c < self.in_cols) {
                            acc += d_out[i * self.out_cols + j] * image[r * self.in_cols + c];
                        }
                    }
                }
                d_kernel[u * self.k_cols + v] += acc;
            }
        }
    }
}

/// Mean over each `window x window` region, stepping by `stride`.
pub fn avg_pool(map: &Matrix, window: usize, stride: usize) -> Result<Matrix> {
    let out_r = conv_out_dim(map.rows(), window, 0, stride).map_err(as_invalid)?;
    let out_c = conv_out_dim(map.cols(), window, 0, stride).map_err(as_invalid)?;
    let mut out = Matrix::zeros(out_r, out_c);
    avg_pool_raw(map.as_slice(), map.cols(), window, stride, out_r, out_c, out.as_mut_slice());
    Ok(out)
}

pub(crate) fn avg_pool_raw(
    map: &[f64],
    cols: usize,
    window: usize,
    stride: usize,
    out_rows: usize,
    out_cols: usize,
    out: &mut [f64],
) {
    let count = (window * window) as f64;
    for i in 0..out_rows {
        for j in 0..out_cols {
            let mut acc = 0.0;
            for u in 0..window {
                let row = &map[(i * stride + u) * cols..];
                for v in 0..window {
                    acc += row[j * stride + v];
                }
            }
            out[i * out_cols + j] = acc / count;
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `gamma_i (a_i - mean) / sqrt(var + eps) + beta_i` with population variance.
pub fn layer_norm(a: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Result<Vec<f64>> {
    if a.is_empty() || a.len() != gamma.len() || a.len() != beta.len() {
        return Err(Error::invalid(format!(
            "layer_norm lengths differ or are empty: a {}, gamma {}, beta {}",
            a.len(),
            gamma.len(),
            beta.len()
        )));
    }
    let (normed, _) = normalize(a, eps);
    Ok(normed
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(x, (g, b))| g * x + b)
        .collect())
}

/// Pre-affine normalized values and `1 / sqrt(var + eps)`.
pub fn normalize(a: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    (a.iter().map(|x| (x - mean) * inv_std).collect(), inv_std)
}

/// Backward pass of [`normalize`]: maps `d loss / d xhat` to `d loss / d a`.
pub(crate) fn normalize_backward(xhat: &[f64], inv_std: f64, d_xhat: &[f64]) -> Vec<f64> {
    let n = xhat.len() as f64;
    let mean_d = d_xhat.iter().sum::<f64>() / n;
    let mean_dx = d_xhat.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / n;
    d_xhat
        .iter()
        .zip(xhat)
        .map(|(d, x)| inv_std * (d - mean_d - x * mean_dx))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Exact form `x * Phi(x)` with the standard normal CDF.
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Gelu => x * normal_cdf(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = self.apply(x);
                s * (1.0 - s)
            }
            Activation::Gelu => normal_cdf(x) + x * normal_pdf(x),
        }
    }
}

/// `activation(kind, x)`.
pub fn activation(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn conv_out_dim_examples() {
        assert_eq!(conv_out_dim(4, 2, 0, 2).unwrap(), 2);
        assert_eq!(conv_out_dim(28, 1, 0, 1).unwrap(), 28);
        assert_eq!(conv_out_dim(28, 5, 0, 1).unwrap(), 24);
        assert_eq!(conv_out_dim(24, 2, 0, 2).unwrap(), 12);
        assert_eq!(conv_out_dim(28, 4, 1, 2).unwrap(), 14);
        assert!(matches!(conv_out_dim(28, 5, 0, 2), Err(Error::Config { .. })));
        assert!(conv_out_dim(3, 5, 0, 1).is_err());
        assert!(conv_out_dim(3, 1, 0, 0).is_err());
    }

    #[test]
    fn conv_examples() {
        let img = Matrix::from_vec(4, 4, vec![1.0; 16]).unwrap();
        let k = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
        let out = conv2d(&img, &[k], 2, 0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].as_slice(), &[4.0; 4]);

        let img = Matrix::from_vec(4, 4, (0..16).map(f64::from).collect()).unwrap();
        let pick = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = conv2d(&img, &[pick], 2, 0).unwrap();
        assert_eq!(out[0].as_slice(), &[0.0, 2.0, 8.0, 10.0]);

        assert!(conv2d(&img, &[], 1, 0).is_err());
        let k3 = Matrix::zeros(3, 3);
        assert!(conv2d(&img, &[k3], 2, 0).is_err());
    }

    #[test]
    fn pool_examples() {
        let m = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
        assert_eq!(avg_pool(&m, 2, 2).unwrap().as_slice(), &[1.0]);
        let m = Matrix::from_vec(2, 2, vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(avg_pool(&m, 2, 2).unwrap().as_slice(), &[3.0]);
        let m = Matrix::zeros(3, 3);
        assert!(avg_pool(&m, 2, 2).is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let out = layer_norm(&[4.0; 5], &[2.0, -1.0, 3.0, 0.5, 7.0], &[0.1, 0.2, 0.3, 0.4, 0.5], 1e-5)
            .unwrap();
        assert_eq!(out, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        let out = layer_norm(&[1.0, 3.0], &[1.0, 1.0], &[0.0, 0.0], LAYER_NORM_EPS).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-4 && (out[1] - 1.0).abs() < 1e-4);
        assert!(layer_norm(&[1.0, 2.0], &[1.0], &[0.0, 0.0], 1e-5).is_err());
        assert!(layer_norm(&[], &[], &[], 1e-5).is_err());
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activation(Activation::Relu, -1.0), 0.0);
        assert_eq!(activation(Activation::Relu, 2.0), 2.0);
        assert_eq!(activation(Activation::Sigmoid, 0.0), 0.5);
        assert_eq!(activation(Activation::Gelu, 0.0), 0.0);
        assert!((activation(Activation::Gelu, 10.0) - 10.0).abs() < 1e-12);
        assert!(activation(Activation::Gelu, -10.0).abs() < 1e-12);
        // Phi(1) to double precision.
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for kind in [Activation::Sigmoid, Activation::Gelu, Activation::Relu] {
            for &x in &[-2.3, -0.4, 0.3, 1.7] {
                let h = 1e-6;
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                assert!((fd - kind.derivative(x)).abs() < 1e-8, "{kind:?} at {x}");
            }
        }
    }

    // Direct quadruple loop with explicit zero padding.
    fn conv_reference(img: &Matrix, k: &Matrix, s: usize, p: usize) -> Matrix {
        let (ir, ic) = img.shape();
        let (kr, kc) = k.shape();
        let mut padded = Matrix::zeros(ir + 2 * p, ic + 2 * p);
        for r in 0..ir {
            for c in 0..ic {
                padded.set(r + p, c + p, img.get(r, c));
            }
        }
        let or = (ir + 2 * p - kr) / s + 1;
        let oc = (ic + 2 * p - kc) / s + 1;
        let mut out = Matrix::zeros(or, oc);
        for i in 0..or {
            for j in 0..oc {
                let mut acc = 0.0;
                for u in 0..kr {
                    for v in 0..kc {
                        acc += padded.get(i * s + u, j * s + v) * k.get(u, v);
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn pool_reference(m: &Matrix, w: usize, s: usize) -> Matrix {
        let or = (m.rows() - w) / s + 1;
        let oc = (m.cols() - w) / s + 1;
        let mut out = Matrix::zeros(or, oc);
        for i in 0..or {
            for j in 0..oc {
                let mut acc = 0.0;
                for u in 0..w {
                    for v in 0..w {
                        acc += m.get(i * s + u, j * s + v);
                    }
                }
                out.set(i, j, acc / (w * w) as f64);
            }
        }
        out
    }

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_and_pool_match_reference_loops() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 100 {
            let side = rng.random_range(2..12);
            let f = rng.random_range(1..=side.min(5));
            let s = rng.random_range(1..4);
            let p = rng.random_range(0..3);
            let Ok(o) = conv_out_dim(side, f, p, s) else {
                continue;
            };
            let img = random_matrix(&mut rng, side, side);
            let ks: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng, f, f)).collect();
            let out = conv2d(&img, &ks, s, p).unwrap();
            for (k, m) in ks.iter().zip(&out) {
                assert_eq!(m.shape(), (o, o));
                assert_eq!(*m, conv_reference(&img, k, s, p));
            }
            let w = rng.random_range(1..=side);
            let ps = rng.random_range(1..4);
            if conv_out_dim(side, w, 0, ps).is_ok() {
                assert_eq!(avg_pool(&img, w, ps).unwrap(), pool_reference(&img, w, ps));
            }
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn normalize_moments(v in prop::collection::vec(-10.0f64..10.0, 2..64)) {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assume!(var >= 1e-2);
            let (x, _) = normalize(&v, LAYER_NORM_EPS);
            let m = x.iter().sum::<f64>() / n;
            let s2 = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-12);
            // eps shrinks the variance to var / (var + eps); that gap only
            // drops below 2e-5 once var >= 0.5.
            prop_assert!((s2 - var / (var + LAYER_NORM_EPS)).abs() < 2e-5);
            if var >= 1.0 {
                prop_assert!((s2 - 1.0).abs() < 2e-5);
            }
        }
    }
}
