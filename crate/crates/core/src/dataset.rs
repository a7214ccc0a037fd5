//! CIFAR-10 binary-format loading and the Vehicles/Animals relabeling.
//!
//! The binary distribution stores each record as one label byte followed by
//! 3,072 pixel bytes: the 1,024 red values, then green, then blue, each
//! plane row-major. Samples are kept as raw bytes in height-width-channel
//! order and normalized to `[0, 1]` when a tensor is requested.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Real, Rng, Tensor};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const IMAGE_BYTES: usize = IMAGE_SIDE * IMAGE_SIDE * IMAGE_CHANNELS;
pub const RECORD_BYTES: usize = 1 + IMAGE_BYTES;
pub const RECORDS_PER_FILE: usize = 10_000;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

pub const CLASS_NAMES: [&str; 10] = [
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

/// Binary task label. Vehicle is the positive class (a transmitter is
/// present). The discriminant is the class index used by the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Animal = 0,
    Vehicle = 1,
}

impl BinaryLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(BinaryLabel::Animal),
            1 => Ok(BinaryLabel::Vehicle),
            _ => Err(Error::Label(format!("binary class index {i}"))),
        }
    }
}

/// Maps a CIFAR-10 class id onto the two-label task: airplane, automobile,
/// ship and truck are vehicles; the six remaining classes are animals.
pub fn relabel_binary(label10: u8) -> Result<BinaryLabel> {
    match label10 {
        0 | 1 | 8 | 9 => Ok(BinaryLabel::Vehicle),
        2..=7 => Ok(BinaryLabel::Animal),
        _ => Err(Error::Label(format!(
            "CIFAR-10 class id {label10} out of range 0..=9"
        ))),
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct ImageSample {
    /// Height-width-channel bytes.
    pixels: Box<[u8]>,
    label10: u8,
    label2: BinaryLabel,
}

impl std::fmt::Debug for ImageSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageSample")
            .field("label10", &self.label10)
            .field("label2", &self.label2)
            .finish_non_exhaustive()
    }
}

impl ImageSample {
    /// Builds a sample from height-width-channel bytes.
    pub fn from_hwc(pixels: Vec<u8>, label10: u8) -> Result<Self> {
        if pixels.len() != IMAGE_BYTES {
            return Err(Error::shape("image bytes", &[IMAGE_BYTES], &[pixels.len()]));
        }
        Ok(ImageSample {
            pixels: pixels.into_boxed_slice(),
            label2: relabel_binary(label10)?,
            label10,
        })
    }

    /// Parses one binary record (label byte, then channel-planar pixels).
    pub fn from_record(record: &[u8]) -> Result<Self> {
        if record.len() != RECORD_BYTES {
            return Err(Error::shape("CIFAR-10 record", &[RECORD_BYTES], &[record.len()]));
        }
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        let planar = &record[1..];
        let mut hwc = vec![0u8; IMAGE_BYTES];
        for (i, px) in hwc.chunks_exact_mut(IMAGE_CHANNELS).enumerate() {
            for (c, v) in px.iter_mut().enumerate() {
                *v = planar[c * plane + i];
            }
        }
        Self::from_hwc(hwc, record[0])
    }

    pub fn label10(&self) -> u8 {
        self.label10
    }

    pub fn label2(&self) -> BinaryLabel {
        self.label2
    }

    pub fn raw_pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// `[32, 32, 3]` tensor with every byte divided by 255.
    pub fn pixels<T: Real>(&self) -> Tensor<T> {
        let scale = T::cast(1.0 / 255.0);
        let data = self.pixels.iter().map(|&b| T::cast(b as f64) * scale).collect();
        Tensor::from_vec(&[IMAGE_SIDE, IMAGE_SIDE, IMAGE_CHANNELS], data).expect("image length is fixed")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub train: Vec<ImageSample>,
    pub test: Vec<ImageSample>,
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptDataset {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads one batch file of exactly 10,000 records.
pub fn read_batch_file(path: &Path) -> Result<Vec<ImageSample>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| corrupt(path, format!("cannot open: {e}")))?
        .read_to_end(&mut bytes)?;
    let expected = RECORDS_PER_FILE * RECORD_BYTES;
    if bytes.len() != expected {
        return Err(corrupt(
            path,
            format!("size {} bytes, expected {expected}", bytes.len()),
        ));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            ImageSample::from_record(rec)
                .map_err(|_| corrupt(path, format!("record {i} has label byte {}", rec[0])))
        })
        .collect()
}

/// Loads the five training files and the test file from `dir`, in on-disk
/// order.
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut train = Vec::with_capacity(TRAIN_FILES.len() * RECORDS_PER_FILE);
    for name in TRAIN_FILES {
        train.extend(read_batch_file(&dir.join(name))?);
    }
    let test = read_batch_file(&dir.join(TEST_FILE))?;
    Ok(Dataset { train, test })
}

/// Paths of the six binary files under `dir`.
pub fn cifar10_files(dir: impl AsRef<Path>) -> Vec<PathBuf> {
    let dir = dir.as_ref();
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .map(|n| dir.join(n))
        .collect()
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let mut file = fs::File::open(path.as_ref())?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn verify_checksum(path: impl AsRef<Path>, expected_hex: &str) -> Result<()> {
    let path = path.as_ref();
    let got = sha256_file(path)?;
    if got.eq_ignore_ascii_case(expected_hex.trim()) {
        Ok(())
    } else {
        Err(corrupt(path, format!("sha256 {got}, expected {expected_hex}")))
    }
}

/// Index batches covering `0..len` exactly once. The last batch keeps the
/// remainder. With an rng the order is a seeded permutation.
pub fn batch_indices(len: usize, batch_size: usize, shuffle: Option<&mut Rng>) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    if let Some(rng) = shuffle {
        order.shuffle(rng);
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Batches of sample references, in on-disk order or shuffled by `rng`.
pub fn batch_iter<'a>(
    split: &'a [ImageSample],
    batch_size: usize,
    shuffle: Option<&mut Rng>,
) -> Result<impl Iterator<Item = Vec<&'a ImageSample>> + 'a> {
    let batches = batch_indices(split.len(), batch_size, shuffle)?;
    Ok(batches
        .into_iter()
        .map(move |b| b.into_iter().map(|i| &split[i]).collect()))
}

/// A small CIFAR-shaped stand-in with learnable class structure, for tests
/// and demos when the real files are not at hand.
///
/// Each of the ten classes has a fixed per-quadrant colour template; a sample
/// is its template blended with uniform noise. Class ids are drawn uniformly.
pub fn synthetic(n_train: usize, n_test: usize, seed: u64) -> Dataset {
    let mut template_rng = Rng::with_stream(seed, 0);
    let templates: Vec<[[f64; IMAGE_CHANNELS]; 4]> = (0..10)
        .map(|_| {
            let mut t = [[0.0; IMAGE_CHANNELS]; 4];
            for q in t.iter_mut() {
                for c in q.iter_mut() {
                    *c = template_rng.random::<f64>();
                }
            }
            t
        })
        .collect();
    let mut sample_rng = Rng::with_stream(seed, 1);
    let mut make = |n: usize| -> Vec<ImageSample> {
        (0..n)
            .map(|_| {
                let class = sample_rng.random_range(0..10u8);
                let tpl = &templates[class as usize];
                let mut px = vec![0u8; IMAGE_BYTES];
                for y in 0..IMAGE_SIDE {
                    for x in 0..IMAGE_SIDE {
                        let q = (y / 16) * 2 + x / 16;
                        for c in 0..IMAGE_CHANNELS {
                            let v = 0.6 * tpl[q][c] + 0.4 * sample_rng.random::<f64>();
                            px[(y * IMAGE_SIDE + x) * IMAGE_CHANNELS + c] = (v * 255.0).round() as u8;
                        }
                    }
                }
                ImageSample::from_hwc(px, class).expect("valid synthetic sample")
            })
            .collect()
    };
    let train = make(n_train);
    let test = make(n_test);
    Dataset { train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_map() {
        assert_eq!(relabel_binary(1).unwrap(), BinaryLabel::Vehicle);
        assert_eq!(relabel_binary(3).unwrap(), BinaryLabel::Animal);
        assert!(matches!(relabel_binary(10), Err(Error::Label(_))));
        let vehicles = (0..10u8)
            .filter(|&c| relabel_binary(c).unwrap() == BinaryLabel::Vehicle)
            .count();
        assert_eq!(vehicles, 4);
        // 6,000 images per class.
        assert_eq!(vehicles * 6_000, 24_000);
        assert_eq!((10 - vehicles) * 6_000, 36_000);
    }

    #[test]
    fn record_is_transposed_to_hwc() {
        let mut rec = vec![0u8; RECORD_BYTES];
        rec[0] = 8;
        rec[1] = 10; // red (0,0)
        rec[1 + 1024] = 20; // green (0,0)
        rec[1 + 2048 + 33] = 255; // blue (1,1)
        let s = ImageSample::from_record(&rec).unwrap();
        assert_eq!(s.label2(), BinaryLabel::Vehicle);
        assert_eq!(&s.raw_pixels()[..3], &[10, 20, 0]);
        let t = s.pixels::<f64>();
        assert_eq!(t.shape(), &[32, 32, 3]);
        assert_eq!(t.data()[(32 + 1) * 3 + 2], 1.0);
        assert_eq!(t.data()[5], 0.0);
    }

    #[test]
    fn batch_counts() {
        let b = batch_indices(50_000, 64, None).unwrap();
        assert_eq!(b.len(), 782);
        assert_eq!(b.last().unwrap().len(), 16);
        assert_eq!(b[0], (0..64).collect::<Vec<_>>());
        assert!(batch_indices(0, 64, None).unwrap().is_empty());
        assert!(batch_indices(10, 0, None).is_err());
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        let a = batch_indices(1000, 64, Some(&mut Rng::new(5))).unwrap();
        let b = batch_indices(1000, 64, Some(&mut Rng::new(5))).unwrap();
        assert_eq!(a, b);
        let mut flat: Vec<usize> = a.concat();
        assert_ne!(flat, (0..1000).collect::<Vec<_>>());
        flat.sort_unstable();
        assert_eq!(flat, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synthetic(20, 5, 3);
        let b = synthetic(20, 5, 3);
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 20);
        assert_eq!(a.test.len(), 5);
    }
}
