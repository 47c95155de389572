//! Stratified splitting and mean-face computation.
//!
//! Images are normalized elsewhere ([`crate::image::crop_resize`]); this
//! module owns the record-level preprocessing: deterministic stratified
//! train/validation/test splits and the per-set mean face used for
//! dataset-similarity scoring.

use crate::image::ImageTensor;
use crate::util::derive_seed;
use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("split fractions ({train}, {val}, {test}) must be positive and sum to 1")]
    InvalidFractions { train: f64, val: f64, test: f64 },
    #[error("stratum {stratum:?} has {count} records, need at least 3")]
    StratumTooSmall { stratum: String, count: usize },
    #[error("empty image list")]
    EmptyList,
    #[error("image {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },
}

/// Train/validation/test fractions plus the split seed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// Validated constructor: fractions positive and summing to 1 within 1e-9.
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self, PreprocessError> {
        let sum = train_frac + val_frac + test_frac;
        if train_frac <= 0.0 || val_frac <= 0.0 || test_frac <= 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(PreprocessError::InvalidFractions {
                train: train_frac,
                val: val_frac,
                test: test_frac,
            });
        }
        Ok(Self { train_frac, val_frac, test_frac, seed })
    }

    /// The default 60/20/20 split.
    pub fn default_with_seed(seed: u64) -> Self {
        Self { train_frac: 0.6, val_frac: 0.2, test_frac: 0.2, seed }
    }
}

/// Apportion `n` into three parts proportional to the fractions: floors
/// first, then leftover units to the largest fractional remainders (ties
/// resolve in train/val/test order). Every part ends within one record of
/// its exact share.
pub fn apportion_counts(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let exact = [
        n as f64 * spec.train_frac,
        n as f64 * spec.val_frac,
        n as f64 * spec.test_frac,
    ];
    let mut counts = [
        exact[0].floor() as usize,
        exact[1].floor() as usize,
        exact[2].floor() as usize,
    ];
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}

/// Deterministic stratified split.
///
/// Records are grouped by `strata_key`; each stratum is shuffled with a
/// sub-seed derived from the spec seed and the stratum name, then
/// apportioned. Partitions are disjoint and exhaustive, and per-stratum
/// counts stay within one record of the exact fractions.
pub fn stratified_split<T: Clone>(
    records: &[T],
    spec: &SplitSpec,
    strata_key: impl Fn(&T) -> String,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), PreprocessError> {
    SplitSpec::new(spec.train_frac, spec.val_frac, spec.test_frac, spec.seed)?;
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        strata.entry(strata_key(record)).or_default().push(i);
    }
    for (stratum, members) in &strata {
        if members.len() < 3 {
            return Err(PreprocessError::StratumTooSmall {
                stratum: stratum.clone(),
                count: members.len(),
            });
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (stratum, mut members) in strata {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("split/{stratum}")));
        members.shuffle(&mut rng);
        let (n_train, n_val, _) = apportion_counts(members.len(), spec);
        for (pos, idx) in members.into_iter().enumerate() {
            let item = records[idx].clone();
            if pos < n_train {
                train.push(item);
            } else if pos < n_train + n_val {
                val.push(item);
            } else {
                test.push(item);
            }
        }
    }
    Ok((train, val, test))
}

/// Elementwise arithmetic mean of a nonempty uniform-shape image list.
pub fn mean_face(images: &[ImageTensor]) -> Result<ImageTensor, PreprocessError> {
    let first = images.first().ok_or(PreprocessError::EmptyList)?;
    let shape = (first.height(), first.width());
    let mut acc = ndarray::Array3::<f64>::zeros((shape.0, shape.1, 3));
    for (index, img) in images.iter().enumerate() {
        if (img.height(), img.width()) != shape {
            return Err(PreprocessError::ShapeMismatch {
                index,
                got: (img.height(), img.width()),
                expected: shape,
            });
        }
        for ((r, c, ch), &v) in img.data().indexed_iter() {
            acc[[r, c, ch]] += f64::from(v);
        }
    }
    let n = images.len() as f64;
    let data = Array3::from_shape_fn((shape.0, shape.1, 3), |idx| (acc[idx] / n) as f32);
    Ok(ImageTensor::new(data).expect("mean of in-range values stays in range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn numbered(n: usize, stratum: &str) -> Vec<(String, usize)> {
        (0..n).map(|i| (stratum.to_string(), i)).collect()
    }

    #[test]
    fn ten_records_split_six_two_two() {
        let records = numbered(10, "only");
        let spec = SplitSpec::default_with_seed(7);
        let (train, val, test) = stratified_split(&records, &spec, |r| r.0.clone()).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(matches!(
            SplitSpec::new(0.5, 0.2, 0.2, 0),
            Err(PreprocessError::InvalidFractions { .. })
        ));
        assert!(matches!(
            SplitSpec::new(0.8, 0.2, 0.0, 0),
            Err(PreprocessError::InvalidFractions { .. })
        ));
    }

    #[test]
    fn small_stratum_rejected() {
        let mut records = numbered(10, "big");
        records.push(("tiny".to_string(), 0));
        let spec = SplitSpec::default_with_seed(1);
        let err = stratified_split(&records, &spec, |r| r.0.clone()).unwrap_err();
        assert!(matches!(err, PreprocessError::StratumTooSmall { .. }));
    }

    #[test]
    fn apportionment_respects_one_record_tolerance() {
        let spec = SplitSpec::default_with_seed(0);
        for n in 3..500 {
            let (a, b, c) = apportion_counts(n, &spec);
            assert_eq!(a + b + c, n);
            assert!((a as f64 - n as f64 * 0.6).abs() <= 1.0, "train off at n={n}");
            assert!((b as f64 - n as f64 * 0.2).abs() <= 1.0, "val off at n={n}");
            assert!((c as f64 - n as f64 * 0.2).abs() <= 1.0, "test off at n={n}");
        }
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let mut records = numbered(40, "a");
        records.extend(numbered(25, "b"));
        records.extend(numbered(9, "c"));
        let spec = SplitSpec::default_with_seed(99);
        let key = |r: &(String, usize)| r.0.clone();
        let (t1, v1, s1) = stratified_split(&records, &spec, key).unwrap();
        let (t2, v2, s2) = stratified_split(&records, &spec, key).unwrap();
        assert_eq!((&t1, &v1, &s1), (&t2, &v2, &s2));
        let mut all: Vec<_> = t1.iter().chain(&v1).chain(&s1).cloned().collect();
        all.sort();
        let mut expected = records.clone();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn mean_face_identities() {
        let x = ImageTensor::from_fn(4, 4, |r, c, ch| (r + c + ch) as f32 / 16.0);
        let mean = mean_face(&[x.clone(), x.clone(), x.clone()]).unwrap();
        for (a, b) in mean.data().iter().zip(x.data().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        let zeros = ImageTensor::constant(4, 4, 0.0);
        let ones = ImageTensor::constant(4, 4, 1.0);
        let mid = mean_face(&[zeros, ones]).unwrap();
        for &v in mid.data().iter() {
            assert!((v - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_face_matches_loop_oracle() {
        // Independent per-pixel summation oracle over 5 random 4x4 images.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let images: Vec<ImageTensor> = (0..5)
            .map(|_| ImageTensor::from_fn(4, 4, |_, _, _| rng.random_range(0.0..1.0)))
            .collect();
        let mean = mean_face(&images).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                for ch in 0..3 {
                    let mut total = 0.0f64;
                    for img in &images {
                        total += f64::from(img.data()[[r, c, ch]]);
                    }
                    let expected = total / images.len() as f64;
                    assert!((f64::from(mean.data()[[r, c, ch]]) - expected).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mean_face_errors() {
        assert!(matches!(mean_face(&[]), Err(PreprocessError::EmptyList)));
        let a = ImageTensor::constant(4, 4, 0.5);
        let b = ImageTensor::constant(5, 4, 0.5);
        assert!(matches!(
            mean_face(&[a, b]),
            Err(PreprocessError::ShapeMismatch { index: 1, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Per-stratum counts stay within one record of exact fractions.
        #[test]
        fn stratification_tolerance(sizes in proptest::collection::vec(3usize..60, 1..5)) {
            let mut records = Vec::new();
            for (s, n) in sizes.iter().enumerate() {
                records.extend((0..*n).map(|i| (format!("s{s}"), i)));
            }
            let spec = SplitSpec::default_with_seed(5);
            let (train, val, test) = stratified_split(&records, &spec, |r| r.0.clone()).unwrap();
            for (s, n) in sizes.iter().enumerate() {
                let name = format!("s{s}");
                let count = |part: &[(String, usize)]| part.iter().filter(|r| r.0 == name).count();
                let n = *n as f64;
                prop_assert!((count(&train) as f64 / n - 0.6).abs() <= 1.0 / n);
                prop_assert!((count(&val) as f64 / n - 0.2).abs() <= 1.0 / n);
                prop_assert!((count(&test) as f64 / n - 0.2).abs() <= 1.0 / n);
            }
        }

        /// Mean stays within the per-pixel min/max envelope.
        #[test]
        fn mean_face_within_bounds(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let images: Vec<ImageTensor> = (0..3)
                .map(|_| ImageTensor::from_fn(3, 3, |_, _, _| rng.random_range(0.0..1.0)))
                .collect();
            let mean = mean_face(&images).unwrap();
            for (idx, &v) in mean.data().indexed_iter() {
                let lo = images.iter().map(|i| i.data()[idx]).fold(f32::INFINITY, f32::min);
                let hi = images.iter().map(|i| i.data()[idx]).fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
            }
        }
    }
}
