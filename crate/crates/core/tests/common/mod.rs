#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use onn_core::dataset::{
    cap_per_digit, digit_samples, load_mnist, load_wdbc, split, DatasetSplit, DownsampleMethod, Task,
    DIGITS_PER_CLASS,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn digits_split(seed: u64) -> DatasetSplit {
    let dir = data_dir();
    let images = load_mnist(
        dir.join("mnist-06-images.idx3-ubyte"),
        dir.join("mnist-06-labels.idx1-ubyte"),
        &BTreeSet::from([0, 6]),
    )
    .unwrap();
    let images = cap_per_digit(images, DIGITS_PER_CLASS);
    let samples = digit_samples(&images, 0, 6, DownsampleMethod::BlockMean).unwrap();
    split(&samples, 920, 80, seed, Task::Digits).unwrap()
}

pub fn cancer_split(seed: u64) -> DatasetSplit {
    let samples = load_wdbc(data_dir().join("wdbc.data")).unwrap();
    split(&samples, 494, 75, seed, Task::Cancer).unwrap()
}

/// Straightforward O(N^2) correlation of the delayed copies: slot `s` of the
/// detector holds `sum_k p_k x_{s - (N - 1 - k)}` (0-based `k`).
pub fn brute_force_correlation(powers: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; 2 * n - 1];
    for (s, slot) in out.iter_mut().enumerate() {
        for (k, &p) in powers.iter().enumerate() {
            let shift = n - 1 - k;
            if s >= shift && s - shift < n {
                *slot += p * x[s - shift];
            }
        }
    }
    out
}

