use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Gaussian blobs in `d` dimensions, one per class, mapped into `[0, 1]`.
///
/// Class `c` is centered at `separation * u_c` where `u_c` is the `c`-th basis
/// vector when `C <= d` and a seeded random unit vector otherwise. Each point
/// gets unit isotropic noise, then the affine map `(v + 2) / (separation + 4)`
/// and a final clamp to the unit interval. Samples are interleaved by class.
pub fn synthetic_blobs(
    num_classes: usize,
    dims: usize,
    per_class: usize,
    separation: f64,
    rng: &RngStream,
) -> Result<LabeledDataset> {
    if num_classes < 2 {
        return Err(Error::invalid("synthetic_blobs needs at least two classes"));
    }
    if dims == 0 {
        return Err(Error::invalid("synthetic_blobs needs at least one dimension"));
    }
    if separation.is_nan() || separation <= 0.0 {
        return Err(Error::invalid("separation must be positive"));
    }
    let mut gen = rng.rng();
    let centers: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| {
            let mut u = vec![0.0; dims];
            if num_classes <= dims {
                u[c] = 1.0;
            } else {
                for v in u.iter_mut() {
                    *v = StandardNormal.sample(&mut gen);
                }
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                u.iter_mut().for_each(|v| *v /= norm);
            }
            u.iter().map(|v| v * separation).collect()
        })
        .collect();

    let scale = 1.0 / (separation + 4.0);
    let mut pixels = Vec::with_capacity(num_classes * per_class * dims);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for _ in 0..per_class {
        for (c, center) in centers.iter().enumerate() {
            for &m in center {
                let noise: f64 = StandardNormal.sample(&mut gen);
                pixels.push(((m + noise + 2.0) * scale).clamp(0.0, 1.0));
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(dims, 1, pixels, labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let s = RngStream::new(3);
        let a = synthetic_blobs(3, 4, 20, 5.0, &s).unwrap();
        assert_eq!(a, synthetic_blobs(3, 4, 20, 5.0, &s).unwrap());
        assert_eq!(a.len(), 60);
        assert_eq!(a.class_counts(), vec![20, 20, 20]);
        assert_eq!(a.image_shape(), (4, 1));
        assert!(synthetic_blobs(3, 4, 0, 5.0, &s).unwrap().is_empty());
        // More classes than dimensions falls back to random directions.
        assert_eq!(synthetic_blobs(5, 2, 3, 5.0, &s).unwrap().len(), 15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = RngStream::new(3);
        assert!(synthetic_blobs(1, 4, 2, 5.0, &s).is_err());
        assert!(synthetic_blobs(2, 0, 2, 5.0, &s).is_err());
        assert!(synthetic_blobs(2, 4, 2, 0.0, &s).is_err());
    }
}
