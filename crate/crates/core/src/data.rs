//! Image datasets: CIFAR-10 binary batches, the `CNQE1` raw tensor format, and
//! synthetic two-class blobs.
//!
//! `CNQE1` layout (all integers little-endian):
//!
//! | bytes               | content                                   |
//! |---------------------|-------------------------------------------|
//! | 5                   | magic `CNQE1`                             |
//! | 4                   | `u32` train count                          |
//! | 4                   | `u32` test count                           |
//! | train + test        | labels, one byte each, train first         |
//! | 4 · 3072 per image  | `f32` pixels, channel-major, row-major     |

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::substream;

pub const CHANNELS: usize = 3;
pub const SIDE: usize = 32;
pub const IMAGE_LEN: usize = CHANNELS * SIDE * SIDE;
pub const CIFAR_RECORD_LEN: usize = 1 + IMAGE_LEN;
pub const TRAIN_PER_CLASS: usize = 400;
pub const TEST_PER_CLASS: usize = 100;

const RAW_MAGIC: &[u8; 5] = b"CNQE1";

pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing file {}", .0.display())]
    Missing(PathBuf),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: length {len} is not a multiple of {record}")]
    RecordLength { source_name: String, len: usize, record: usize },
    #[error("CIFAR-10 label {0} out of range")]
    BadCifarLabel(u8),
    #[error("class index {0} out of range 0..10")]
    BadClass(usize),
    #[error("classes must differ")]
    SameClass,
    #[error("class {class} has {found} samples, need {needed}")]
    InsufficientSamples { class: usize, found: usize, needed: usize },
    #[error("raw tensor does not start with CNQE1")]
    BadMagic,
    #[error("raw tensor length {found}, header implies {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("pixel {value} at record {record} outside [0, 1]")]
    PixelRange { record: usize, value: f64 },
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("record {record}: expected {expected} values, got {found}")]
    Shape { record: usize, expected: usize, found: usize },
    #[error("train split is unbalanced: {0} vs {1}")]
    Unbalanced(usize, usize),
    #[error("source id {0} appears in both splits")]
    Overlap(String),
    #[error("cannot upscale from {h}x{w} to {target}x{target}")]
    Upscale { h: usize, w: usize, target: usize },
    #[error("margin must be non-negative, got {0}")]
    BadMargin(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    /// `3×32×32`, channel-major, values in `[0, 1]`.
    pub pixels: Vec<f64>,
    pub label: u8,
    pub source_id: String,
}

impl ImageRecord {
    pub fn validate(&self, index: usize) -> Result<(), DataError> {
        if self.pixels.len() != IMAGE_LEN {
            return Err(DataError::Shape {
                record: index,
                expected: IMAGE_LEN,
                found: self.pixels.len(),
            });
        }
        if self.label > 1 {
            return Err(DataError::BadLabel(self.label));
        }
        if let Some(&v) = self.pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::PixelRange { record: index, value: v });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
    pub class_names: [String; 2],
}

impl DatasetSplit {
    pub fn validate(&self) -> Result<(), DataError> {
        for (i, r) in self.train.iter().chain(&self.test).enumerate() {
            r.validate(i)?;
        }
        let ones = self.train.iter().filter(|r| r.label == 1).count();
        let zeros = self.train.len() - ones;
        if ones != zeros {
            return Err(DataError::Unbalanced(zeros, ones));
        }
        let ids: std::collections::HashSet<&str> = self.train.iter().map(|r| r.source_id.as_str()).collect();
        if let Some(r) = self.test.iter().find(|r| ids.contains(r.source_id.as_str())) {
            return Err(DataError::Overlap(r.source_id.clone()));
        }
        Ok(())
    }

    pub fn train_images(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|r| r.pixels.clone()).collect()
    }

    pub fn test_images(&self) -> Vec<Vec<f64>> {
        self.test.iter().map(|r| r.pixels.clone()).collect()
    }

    pub fn train_labels(&self) -> Vec<u8> {
        self.train.iter().map(|r| r.label).collect()
    }

    pub fn test_labels(&self) -> Vec<u8> {
        self.test.iter().map(|r| r.label).collect()
    }
}

/// Splits CIFAR-10 binary data into `(label, pixel bytes)` records.
pub fn parse_cifar_records<'a>(bytes: &'a [u8], source_name: &str) -> Result<Vec<(u8, &'a [u8])>, DataError> {
    if bytes.len() % CIFAR_RECORD_LEN != 0 {
        return Err(DataError::RecordLength {
            source_name: source_name.to_string(),
            len: bytes.len(),
            record: CIFAR_RECORD_LEN,
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .map(|rec| {
            if rec[0] > 9 {
                Err(DataError::BadCifarLabel(rec[0]))
            } else {
                Ok((rec[0], &rec[1..]))
            }
        })
        .collect()
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    if !path.exists() {
        return Err(DataError::Missing(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `(source_id, pixels)` of every record of the two classes.
type ClassPool = Vec<(String, Vec<f64>)>;

fn collect_classes(files: &[PathBuf], classes: [usize; 2]) -> Result<[ClassPool; 2], DataError> {
    let mut pools: [ClassPool; 2] = [Vec::new(), Vec::new()];
    for path in files {
        let bytes = read(path)?;
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for (i, (label, px)) in parse_cifar_records(&bytes, &name)?.into_iter().enumerate() {
            if let Some(slot) = classes.iter().position(|&c| c == label as usize) {
                pools[slot].push((format!("{name}#{i}"), px.iter().map(|&b| f64::from(b) / 255.0).collect()));
            }
        }
    }
    Ok(pools)
}

fn cifar_dir(path: &Path) -> PathBuf {
    let nested = path.join("cifar-10-batches-bin");
    if nested.is_dir() {
        nested
    } else {
        path.to_path_buf()
    }
}

/// Two CIFAR-10 classes as a balanced 400/100-per-class split.
///
/// Train records come from `data_batch_{1..5}.bin`, test records from `test_batch.bin`.
/// Each class pool is shuffled with a seed-derived stream and the prefix is kept.
/// `class_a` maps to label 0 and `class_b` to label 1.
pub fn load_cifar10_pair(path: &Path, class_a: usize, class_b: usize, seed: u64) -> Result<DatasetSplit, DataError> {
    for c in [class_a, class_b] {
        if c > 9 {
            return Err(DataError::BadClass(c));
        }
    }
    if class_a == class_b {
        return Err(DataError::SameClass);
    }
    let dir = cifar_dir(path);
    let train_files: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
    let test_files = vec![dir.join("test_batch.bin")];
    let classes = [class_a, class_b];
    let mut split = DatasetSplit {
        train: Vec::new(),
        test: Vec::new(),
        class_names: [CIFAR10_CLASSES[class_a].to_string(), CIFAR10_CLASSES[class_b].to_string()],
    };
    for (files, per_class, phase) in [(&train_files, TRAIN_PER_CLASS, "train"), (&test_files, TEST_PER_CLASS, "test")] {
        let pools = collect_classes(files, classes)?;
        for (label, mut pool) in pools.into_iter().enumerate() {
            if pool.len() < per_class {
                return Err(DataError::InsufficientSamples {
                    class: classes[label],
                    found: pool.len(),
                    needed: per_class,
                });
            }
            pool.shuffle(&mut substream(seed, &format!("cifar.{phase}.{}", classes[label])));
            let out = if phase == "train" { &mut split.train } else { &mut split.test };
            out.extend(pool.into_iter().take(per_class).map(|(id, pixels)| ImageRecord {
                pixels,
                label: label as u8,
                source_id: id,
            }));
        }
    }
    split.validate()?;
    Ok(split)
}

/// Separable bilinear downsampling with half-pixel centers.
pub fn resize_bilinear(image: &[f64], channels: usize, h: usize, w: usize, target: usize) -> Result<Vec<f64>, DataError> {
    if h < target || w < target || target == 0 {
        return Err(DataError::Upscale { h, w, target });
    }
    if image.len() != channels * h * w {
        return Err(DataError::Shape {
            record: 0,
            expected: channels * h * w,
            found: image.len(),
        });
    }
    // (lower index, upper index, upper weight) per output coordinate.
    let taps = |src: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / target as f64;
        (0..target)
            .map(|d| {
                let x = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = x.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, x - lo as f64)
            })
            .collect()
    };
    let (ty, tx) = (taps(h), taps(w));
    let mut out = Vec::with_capacity(channels * target * target);
    for c in 0..channels {
        let plane = &image[c * h * w..(c + 1) * h * w];
        // Horizontal pass, then vertical.
        let mut rows = vec![0.0; h * target];
        for y in 0..h {
            for (x, &(lo, hi, f)) in tx.iter().enumerate() {
                rows[y * target + x] = (1.0 - f) * plane[y * w + lo] + f * plane[y * w + hi];
            }
        }
        for &(lo, hi, f) in &ty {
            for x in 0..target {
                let v = (1.0 - f) * rows[lo * target + x] + f * rows[hi * target + x];
                out.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Ok(out)
}

/// Serializes a split in the `CNQE1` format. Pixels are stored as `f32`.
pub fn encode_raw_tensor(split: &DatasetSplit) -> Vec<u8> {
    let n = split.train.len() + split.test.len();
    let mut out = Vec::with_capacity(13 + n * (1 + 4 * IMAGE_LEN));
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(split.train.len() as u32).to_le_bytes());
    out.extend_from_slice(&(split.test.len() as u32).to_le_bytes());
    let records = || split.train.iter().chain(&split.test);
    out.extend(records().map(|r| r.label));
    for r in records() {
        for &v in &r.pixels {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parses and validates a `CNQE1` buffer.
pub fn decode_raw_tensor(bytes: &[u8]) -> Result<DatasetSplit, DataError> {
    if bytes.len() < 13 || &bytes[..5] != RAW_MAGIC {
        return Err(DataError::BadMagic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (n_train, n_test) = (u32_at(5), u32_at(9));
    let n = n_train as u128 + n_test as u128;
    let expected = 13u128 + n * (1 + 4 * IMAGE_LEN as u128);
    if expected != bytes.len() as u128 {
        return Err(DataError::LengthMismatch {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            found: bytes.len(),
        });
    }
    let n = n as usize;
    let labels = &bytes[13..13 + n];
    let pixels = &bytes[13 + n..];
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let px: Vec<f64> = pixels[i * 4 * IMAGE_LEN..(i + 1) * 4 * IMAGE_LEN]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        let (phase, j) = if i < n_train { ("train", i) } else { ("test", i - n_train) };
        let rec = ImageRecord {
            pixels: px,
            label: labels[i],
            source_id: format!("raw:{phase}:{j}"),
        };
        rec.validate(i)?;
        records.push(rec);
    }
    let test = records.split_off(n_train);
    let split = DatasetSplit {
        train: records,
        test,
        class_names: ["class0".into(), "class1".into()],
    };
    split.validate()?;
    Ok(split)
}

pub fn load_raw_tensor(path: &Path) -> Result<DatasetSplit, DataError> {
    decode_raw_tensor(&read(path)?)
}

pub fn write_raw_tensor(split: &DatasetSplit, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, encode_raw_tensor(split)).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-pixel noise level of the synthetic classes.
pub const BLOB_SIGMA: f64 = 0.05;
const BLOB_BLOCK: usize = 4;

/// Two Gaussian classes around `0.5 ± (margin·σ/2)·P`, where `P` is a seeded ±1
/// pattern constant on 4×4 pixel blocks. The class means are `margin_sigma` noise
/// standard deviations apart in every pixel. The test split has a quarter as many
/// images per class (at least one).
pub fn synthetic_blobs(n_per_class: usize, margin_sigma: f64, seed: u64) -> Result<DatasetSplit, DataError> {
    if !(margin_sigma >= 0.0) || !margin_sigma.is_finite() {
        return Err(DataError::BadMargin(margin_sigma));
    }
    let mut prng = substream(seed, "blobs.pattern");
    let blocks = SIDE / BLOB_BLOCK;
    let signs: Vec<f64> = (0..CHANNELS * blocks * blocks)
        .map(|_| if rand::Rng::gen_bool(&mut prng, 0.5) { 1.0 } else { -1.0 })
        .collect();
    let pattern: Vec<f64> = (0..IMAGE_LEN)
        .map(|i| {
            let (c, y, x) = (i / (SIDE * SIDE), (i / SIDE) % SIDE, i % SIDE);
            signs[(c * blocks + y / BLOB_BLOCK) * blocks + x / BLOB_BLOCK]
        })
        .collect();
    let half = 0.5 * margin_sigma * BLOB_SIGMA;
    let normal = Normal::new(0.0, BLOB_SIGMA).expect("positive sigma");
    let n_test = (n_per_class / 4).max(1);
    let make = |phase: &str, count: usize| {
        let mut rng = substream(seed, &format!("blobs.{phase}"));
        let mut out = Vec::with_capacity(2 * count);
        for k in 0..count {
            for label in 0..2u8 {
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let pixels = pattern
                    .iter()
                    .map(|&p| (0.5 + sign * half * p + normal.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect();
                out.push(ImageRecord {
                    pixels,
                    label,
                    source_id: format!("blob:{phase}:{}", 2 * k + label as usize),
                });
            }
        }
        out
    };
    let train = make("train", n_per_class);
    let test = make("test", n_test);
    Ok(DatasetSplit {
        train,
        test,
        class_names: ["minus".into(), "plus".into()],
    })
}

/// Provenance record for a loaded split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub class_names: [String; 2],
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// SHA-256 over all record checksums in order.
    pub digest: String,
    pub train_checksums: Vec<String>,
    pub test_checksums: Vec<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the label byte followed by the pixels as little-endian `f64`.
pub fn record_checksum(r: &ImageRecord) -> String {
    let mut h = Sha256::new();
    h.update([r.label]);
    for v in &r.pixels {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn manifest(split: &DatasetSplit, source: &str, seed: u64) -> DatasetManifest {
    let train_checksums: Vec<String> = split.train.iter().map(record_checksum).collect();
    let test_checksums: Vec<String> = split.test.iter().map(record_checksum).collect();
    let mut h = Sha256::new();
    for c in train_checksums.iter().chain(&test_checksums) {
        h.update(c.as_bytes());
    }
    DatasetManifest {
        source: source.to_string(),
        class_names: split.class_names.clone(),
        seed,
        n_train: split.train.len(),
        n_test: split.test.len(),
        digest: hex(&h.finalize()),
        train_checksums,
        test_checksums,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cifar_record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend(std::iter::repeat_n(fill, IMAGE_LEN));
        r
    }

    fn write_fake_cifar(dir: &Path, per_file: usize) {
        for name in ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"] {
            let mut bytes = Vec::new();
            for i in 0..per_file {
                let label = (i % 10) as u8;
                bytes.extend(cifar_record(label, if label == 8 { 255 } else { (i % 256) as u8 }));
            }
            std::fs::write(dir.join(name), bytes).unwrap();
        }
    }

    #[test]
    fn cifar_loading() {
        let dir = tempfile::tempdir().unwrap();
        write_fake_cifar(dir.path(), 1000);
        let split = load_cifar10_pair(dir.path(), 6, 8, 3).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (800, 200));
        assert_eq!(split.class_names, ["frog".to_string(), "ship".to_string()]);
        // Ship records are all 255.
        let ship = split.train.iter().find(|r| r.label == 1).unwrap();
        assert!(ship.pixels.iter().all(|&v| v == 1.0));
        assert!(split.train.iter().filter(|r| r.label == 0).all(|r| r.source_id.contains('#')));
        let again = load_cifar10_pair(dir.path(), 6, 8, 3).unwrap();
        assert_eq!(split, again);
        let other = load_cifar10_pair(dir.path(), 6, 8, 4).unwrap();
        assert_ne!(split.train[0].source_id, other.train[0].source_id);
        assert!(matches!(load_cifar10_pair(dir.path(), 6, 6, 3), Err(DataError::SameClass)));
    }

    #[test]
    fn cifar_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_cifar10_pair(dir.path(), 0, 1, 0), Err(DataError::Missing(_))));
        write_fake_cifar(dir.path(), 100);
        assert!(matches!(load_cifar10_pair(dir.path(), 0, 1, 0), Err(DataError::InsufficientSamples { .. })));
        assert!(matches!(parse_cifar_records(&[0; 3072], "x"), Err(DataError::RecordLength { .. })));
        assert_eq!(parse_cifar_records(&cifar_record(6, 0), "x").unwrap()[0].0, 6);
    }

    #[test]
    fn resize_examples() {
        let c = vec![0.3; 3 * 64 * 64];
        assert!(resize_bilinear(&c, 3, 64, 64, 32).unwrap().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let checker: Vec<f64> = (0..64 * 64).map(|i| ((i / 64 + i % 64) % 2) as f64).collect();
        assert!(resize_bilinear(&checker, 1, 64, 64, 32).unwrap().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let img: Vec<f64> = (0..3 * 32 * 32).map(|i| (i % 97) as f64 / 96.0).collect();
        assert_eq!(resize_bilinear(&img, 3, 32, 32, 32).unwrap(), img);
        assert!(resize_bilinear(&img, 3, 32, 32, 64).is_err());
    }

    proptest! {
        #[test]
        fn resize_commutes_with_channel_permutation(v in proptest::collection::vec(0.0f64..1.0, 3 * 40 * 36)) {
            let plane = 40 * 36;
            let permuted: Vec<f64> = [2usize, 0, 1].iter().flat_map(|&c| v[c * plane..(c + 1) * plane].to_vec()).collect();
            let a = resize_bilinear(&v, 3, 40, 36, 32).unwrap();
            let b = resize_bilinear(&permuted, 3, 40, 36, 32).unwrap();
            let p = 32 * 32;
            for (k, &c) in [2usize, 0, 1].iter().enumerate() {
                prop_assert_eq!(&b[k * p..(k + 1) * p], &a[c * p..(c + 1) * p]);
            }
            prop_assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn raw_tensor_round_trip() {
        let mut split = synthetic_blobs(4, 3.0, 1).unwrap();
        for r in split.train.iter_mut().chain(split.test.iter_mut()) {
            for v in r.pixels.iter_mut() {
                *v = f64::from(*v as f32);
            }
        }
        split.class_names = ["class0".into(), "class1".into()];
        let bytes = encode_raw_tensor(&split);
        let back = decode_raw_tensor(&bytes).unwrap();
        assert_eq!(back.train.len(), split.train.len());
        for (a, b) in back.train.iter().chain(&back.test).zip(split.train.iter().chain(&split.test)) {
            assert_eq!((a.label, &a.pixels), (b.label, &b.pixels));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.cnqe");
        write_raw_tensor(&split, &path).unwrap();
        assert_eq!(load_raw_tensor(&path).unwrap(), back);
    }

    #[test]
    fn raw_tensor_errors() {
        assert!(matches!(decode_raw_tensor(&[]), Err(DataError::BadMagic)));
        let split = synthetic_blobs(2, 3.0, 1).unwrap();
        let mut bytes = encode_raw_tensor(&split);
        bytes[5] = 7;
        assert!(matches!(decode_raw_tensor(&bytes), Err(DataError::LengthMismatch { .. })));
        let mut bytes = encode_raw_tensor(&split);
        let last = bytes.len() - 4;
        bytes[last..].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(decode_raw_tensor(&bytes), Err(DataError::PixelRange { .. })));
    }

    #[test]
    fn blobs() {
        let a = synthetic_blobs(10, 10.0, 5).unwrap();
        a.validate().unwrap();
        assert_eq!((a.train.len(), a.test.len()), (20, 4));
        assert_eq!(a, synthetic_blobs(10, 10.0, 5).unwrap());
        // Class means sit margin·σ apart.
        let mean = |label: u8| -> Vec<f64> {
            let rs: Vec<&ImageRecord> = a.train.iter().filter(|r| r.label == label).collect();
            (0..IMAGE_LEN).map(|i| rs.iter().map(|r| r.pixels[i]).sum::<f64>() / rs.len() as f64).collect()
        };
        let (m0, m1) = (mean(0), mean(1));
        let gap = m0.iter().zip(&m1).map(|(a, b)| (a - b).abs()).sum::<f64>() / IMAGE_LEN as f64;
        assert!((gap - 10.0 * BLOB_SIGMA).abs() < 0.02, "{gap}");
        assert!(synthetic_blobs(1, -1.0, 0).is_err());
    }

    #[test]
    fn manifest_is_deterministic() {
        let s = synthetic_blobs(3, 2.0, 9).unwrap();
        let m = manifest(&s, "blobs", 9);
        assert_eq!(m.train_checksums.len(), 6);
        assert_eq!(m.digest.len(), 64);
        assert_eq!(m, manifest(&synthetic_blobs(3, 2.0, 9).unwrap(), "blobs", 9));
        assert_ne!(m.digest, manifest(&synthetic_blobs(3, 2.0, 10).unwrap(), "blobs", 10).digest);
    }
}
