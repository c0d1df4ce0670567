//! MNIST ingestion and the 0-vs-1 amplitude-encoded dataset.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::Partition;
use crate::rng;
use crate::statevector::StateVector;

pub const IMAGE_SIDE: usize = 28;
pub const POOLED_SIDE: usize = 8;
pub const FEATURES: usize = POOLED_SIDE * POOLED_SIDE;
pub const ENCODED_QUBITS: usize = 6;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// One 28×28 greyscale digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub pixels: Vec<u8>,
    pub label: u8,
}

/// A unit-norm 64-feature vector with its 0/1 label and the 6-qubit state
/// whose amplitudes are those features.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub features: Vec<f64>,
    pub label: u8,
    pub state: StateVector,
}

impl EncodedExample {
    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Assignment of training indices to local nodes.
pub type ShardPlan = Partition;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::IdxFormat { path: path.to_owned(), msg: "header truncated".into() })
}

/// Reads an IDX image file and its label file (raw or gzip).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<RawExample>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_maybe_gz(ip)?;
    let labels = read_maybe_gz(lp)?;
    let fmt = |path: &Path, msg: String| Error::IdxFormat { path: path.to_owned(), msg };

    let magic = be_u32(&images, 0, ip)?;
    if magic != IMAGES_MAGIC {
        return Err(fmt(ip, format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(&images, 4, ip)? as usize;
    let rows = be_u32(&images, 8, ip)? as usize;
    let cols = be_u32(&images, 12, ip)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(fmt(ip, format!("images are {rows}x{cols}, expected 28x28")));
    }
    let pixels_len = count * rows * cols;
    if images.len() != 16 + pixels_len {
        return Err(fmt(ip, format!("payload is {} bytes, header implies {pixels_len}", images.len() - 16)));
    }

    let magic = be_u32(&labels, 0, lp)?;
    if magic != LABELS_MAGIC {
        return Err(fmt(lp, format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let label_count = be_u32(&labels, 4, lp)? as usize;
    if label_count != count {
        return Err(fmt(lp, format!("{label_count} labels for {count} images")));
    }
    if labels.len() != 8 + count {
        return Err(fmt(lp, format!("payload is {} bytes, header implies {count}", labels.len() - 8)));
    }

    Ok(images[16..]
        .chunks_exact(rows * cols)
        .zip(&labels[8..])
        .map(|(px, &label)| RawExample { pixels: px.to_vec(), label })
        .collect())
}

/// Standard MNIST file names inside a dataset directory (raw or `.gz`).
#[derive(Debug, Clone)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistFiles {
    pub const NAMES: [&'static str; 4] = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ];

    /// Finds the four files in `dir`, preferring uncompressed copies.
    pub fn locate(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let find = |name: &str| -> Result<PathBuf> {
            [dir.join(name), dir.join(format!("{name}.gz"))]
                .into_iter()
                .find(|p| p.is_file())
                .ok_or_else(|| Error::Dataset(format!("{name} not found in {}", dir.display())))
        };
        Ok(Self {
            train_images: find(Self::NAMES[0])?,
            train_labels: find(Self::NAMES[1])?,
            test_images: find(Self::NAMES[2])?,
            test_labels: find(Self::NAMES[3])?,
        })
    }

    pub fn load(&self) -> Result<(Vec<RawExample>, Vec<RawExample>)> {
        Ok((
            load_idx(&self.train_images, &self.train_labels)?,
            load_idx(&self.test_images, &self.test_labels)?,
        ))
    }

    pub fn paths(&self) -> [&Path; 4] {
        [&self.train_images, &self.train_labels, &self.test_images, &self.test_labels]
    }
}

/// Overlap of source pixel `i` (spanning [i, i+1)) with output cell `r`,
/// as a fraction of the cell width.
fn pool_weight(i: usize, r: usize, src: usize, dst: usize) -> f64 {
    let width = src as f64 / dst as f64;
    let (cell_lo, cell_hi) = (r as f64 * width, (r + 1) as f64 * width);
    let (px_lo, px_hi) = (i as f64, (i + 1) as f64);
    (cell_hi.min(px_hi) - cell_lo.max(px_lo)).max(0.0) / width
}

/// Area-weighted average pooling from `src`×`src` to `dst`×`dst`, row-major,
/// with pixel values scaled to [0, 1].
pub fn downsample(pixels: &[u8], src: usize, dst: usize) -> Vec<f64> {
    assert_eq!(pixels.len(), src * src, "pixel grid has the wrong size");
    let weights: Vec<Vec<(usize, f64)>> = (0..dst)
        .map(|r| {
            (0..src)
                .map(|i| (i, pool_weight(i, r, src, dst)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let mut out = vec![0.0; dst * dst];
    for (r, row_w) in weights.iter().enumerate() {
        for (c, col_w) in weights.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, wi) in row_w {
                for &(j, wj) in col_w {
                    acc += wi * wj * f64::from(pixels[i * src + j]);
                }
            }
            out[r * dst + c] = acc / 255.0;
        }
    }
    out
}

pub fn downsample_8x8(pixels: &[u8]) -> Vec<f64> {
    downsample(pixels, IMAGE_SIDE, POOLED_SIDE)
}

/// ℓ₂-normalizes `vec` and loads it as the amplitudes of a
/// log₂(len)-qubit state.
pub fn encode(vec: &[f64], label: u8) -> Result<EncodedExample> {
    let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let features: Vec<f64> = vec.iter().map(|x| x / norm).collect();
    let state = StateVector::from_amplitudes(features.iter().map(|&x| Complex64::new(x, 0.0)).collect())?;
    Ok(EncodedExample { features, label, state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub train_count: usize,
    pub test_count: usize,
    pub balanced: bool,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { train_count: 256, test_count: 500, balanced: true, seed: 0 }
    }
}

/// Seeded selection of `count` encoded 0/1 digits from one MNIST split.
/// Balanced mode takes ⌈count/2⌉ zeros and ⌊count/2⌋ ones. Images that pool
/// to an all-zero vector are skipped and the next candidate is drawn.
pub fn distill_split(raw: &[RawExample], count: usize, balanced: bool, seed: u64, split_tag: u64) -> Result<Vec<EncodedExample>> {
    let mut rng = rng::stream(seed, &[rng::purpose::DISTILL, split_tag]);
    let mut take = |mut candidates: Vec<usize>, n: usize| -> Result<Vec<EncodedExample>> {
        candidates.shuffle(&mut rng);
        let picked: Vec<EncodedExample> = candidates
            .into_iter()
            .filter_map(|i| encode(&downsample_8x8(&raw[i].pixels), raw[i].label).ok())
            .take(n)
            .collect();
        if picked.len() < n {
            return Err(Error::Dataset(format!("needed {n} usable examples, found {}", picked.len())));
        }
        Ok(picked)
    };
    let indices_of = |label: u8| -> Vec<usize> {
        raw.iter().enumerate().filter(|(_, r)| r.label == label).map(|(i, _)| i).collect()
    };
    if balanced {
        let zeros = take(indices_of(0), count.div_ceil(2))?;
        let ones = take(indices_of(1), count / 2)?;
        let mut out: Vec<EncodedExample> = zeros.into_iter().chain(ones).collect();
        out.shuffle(&mut rng);
        Ok(out)
    } else {
        let both: Vec<usize> =
            raw.iter().enumerate().filter(|(_, r)| r.label <= 1).map(|(i, _)| i).collect();
        take(both, count)
    }
}

/// Builds the train set from the MNIST train split and the test set from
/// the MNIST test split.
pub fn distill(
    train_raw: &[RawExample],
    test_raw: &[RawExample],
    cfg: &DistillConfig,
) -> Result<(Vec<EncodedExample>, Vec<EncodedExample>)> {
    Ok((
        distill_split(train_raw, cfg.train_count, cfg.balanced, cfg.seed, 0)?,
        distill_split(test_raw, cfg.test_count, cfg.balanced, cfg.seed, 1)?,
    ))
}

/// Seeded shuffle of `0..n` followed by a contiguous near-equal split.
pub fn shard(n: usize, q: usize, seed: u64) -> Result<ShardPlan> {
    if q == 0 || q > n {
        return Err(Error::Config(format!("cannot shard {n} examples over {q} nodes")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::purpose::SHARD, n as u64, q as u64]));
    Partition::split(order, q)
}

#[cfg(feature = "fetch")]
pub mod fetch {
    //! Downloads the four MNIST IDX files. The canonical hosts are often
    //! unreachable, so the default source is the npm package that bundles
    //! the original files; every file is checked against its SHA-256.

    use std::io::Read;
    use std::path::Path;

    use flate2::read::GzDecoder;
    use sha2::{Digest, Sha256};

    use super::MnistFiles;
    use crate::error::{Error, Result};

    pub const DEFAULT_URL: &str = "https://registry.npmjs.org/mnist-data/-/mnist-data-1.2.6.tgz";

    pub const SHA256: [(&str, &str); 4] = [
        ("train-images-idx3-ubyte", "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db"),
        ("train-labels-idx1-ubyte", "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5"),
        ("t10k-images-idx3-ubyte", "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7"),
        ("t10k-labels-idx1-ubyte", "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2"),
    ];

    fn sha256_hex(bytes: &[u8]) -> String {
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Ensures `dir` holds the dataset, downloading from `url` (a gzipped
    /// tarball containing the IDX files) when anything is missing.
    pub fn ensure_mnist(dir: &Path, url: Option<&str>) -> Result<MnistFiles> {
        if let Ok(files) = MnistFiles::locate(dir) {
            return Ok(files);
        }
        let url = url.unwrap_or(DEFAULT_URL);
        std::fs::create_dir_all(dir)?;
        let mut response = ureq::get(url).call().map_err(|e| Error::Fetch(format!("{url}: {e}")))?;
        let reader = response.body_mut().as_reader();
        let mut archive = tar::Archive::new(GzDecoder::new(reader));
        let mut written = 0;
        for entry in archive.entries()? {
            let mut entry = entry?;
            let path = entry.path()?.into_owned();
            let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            let Some((_, digest)) = SHA256.iter().find(|(n, _)| *n == name) else {
                continue;
            };
            let mut bytes = Vec::new();
            entry.read_to_end(&mut bytes)?;
            let got = sha256_hex(&bytes);
            if got != *digest {
                return Err(Error::Fetch(format!("{name}: sha256 {got} does not match {digest}")));
            }
            std::fs::write(dir.join(&name), bytes)?;
            written += 1;
        }
        if written != SHA256.len() {
            return Err(Error::Fetch(format!("archive held {written} of the 4 MNIST files")));
        }
        MnistFiles::locate(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn idx_images(count: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = IMAGES_MAGIC.to_be_bytes().to_vec();
        for x in [count, 28, 28] {
            v.extend(x.to_be_bytes());
        }
        v.extend_from_slice(payload);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend((labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn idx_round_trip_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let mut px = vec![0u8; 2 * 784];
        px[5] = 200;
        px[784 + 10] = 7;
        let img = write(dir.path(), "img", &idx_images(2, &px));
        let lab = write(dir.path(), "lab", &idx_labels(&[3, 1]));
        let ex = load_idx(&img, &lab).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].pixels[5], 200);
        assert_eq!((ex[0].label, ex[1].label), (3, 1));

        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        gz.write_all(&idx_images(2, &px)).unwrap();
        let gz_img = write(dir.path(), "img.gz", &gz.finish().unwrap());
        assert_eq!(load_idx(&gz_img, &lab).unwrap(), ex);
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let px = vec![0u8; 784];
        let lab = write(dir.path(), "lab", &idx_labels(&[0]));

        let mut bad = idx_images(1, &px);
        bad[3] = 0x01;
        let img = write(dir.path(), "bad", &bad);
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");

        let img = write(dir.path(), "short", &idx_images(1, &px[..700]));
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("payload"), "{err}");

        let img = write(dir.path(), "two", &idx_images(2, &[px.clone(), px].concat()));
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("labels for"), "{err}");
    }

    #[test]
    fn pooling_constant_and_zero_images() {
        assert!(downsample_8x8(&[0u8; 784]).iter().all(|&x| x == 0.0));
        let full = downsample_8x8(&[255u8; 784]);
        assert_eq!(full.len(), 64);
        for x in full {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pooling_single_pixel_overlap() {
        // Output cells are 3.5 pixels wide. Pixel 3 straddles cells 0 and 1
        // (half in each), pixel 0 lies wholly inside cell 0.
        let mut px = [0u8; 784];
        px[3 * 28 + 3] = 255;
        let out = downsample_8x8(&px);
        let quarter = (0.5f64 / 3.5).powi(2);
        for (k, &v) in out.iter().enumerate() {
            let (r, c) = (k / 8, k % 8);
            if r <= 1 && c <= 1 {
                assert_abs_diff_eq!(v, quarter, epsilon = 1e-15);
            } else {
                assert_eq!(v, 0.0);
            }
        }

        let mut px = [0u8; 784];
        px[0] = 255;
        let out = downsample_8x8(&px);
        assert_abs_diff_eq!(out[0], 4.0 / 49.0, epsilon = 1e-15);
        assert!(out[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoding_examples() {
        let mut e0 = vec![0.0; 64];
        e0[0] = 3.0;
        let ex = encode(&e0, 1).unwrap();
        assert_eq!(ex.state, StateVector::zero(6).unwrap());

        let ex = encode(&[0.2; 64], 0).unwrap();
        for a in ex.state.amplitudes() {
            assert_abs_diff_eq!(a.norm_sqr(), 1.0 / 64.0, epsilon = 1e-15);
        }
        assert!(matches!(encode(&[0.0; 64], 0), Err(Error::ZeroNorm)));
    }

    #[test]
    fn shard_sizes() {
        assert_eq!(shard(256, 32, 1).unwrap().sizes(), vec![8; 32]);
        assert_eq!(shard(256, 1, 1).unwrap().sizes(), vec![256]);
        assert_eq!(shard(256, 3, 1).unwrap().sizes(), vec![86, 85, 85]);
        assert!(shard(256, 0, 1).is_err());
        assert!(shard(4, 5, 1).is_err());
        let a = shard(256, 7, 42).unwrap();
        assert_eq!(a, shard(256, 7, 42).unwrap());
        assert!(a.covers_exactly(256));
    }

    fn synthetic_raw(n: usize) -> Vec<RawExample> {
        (0..n)
            .map(|i| {
                let mut pixels = vec![0u8; 784];
                // every fifth image of each class is blank
                if i % 10 >= 2 {
                    pixels[(i * 37) % 784] = 255;
                    pixels[(i * 91 + 5) % 784] = 128;
                }
                RawExample { pixels, label: (i % 3) as u8 }
            })
            .collect()
    }

    #[test]
    fn distill_is_balanced_deterministic_and_skips_blanks() {
        let raw = synthetic_raw(600);
        let cfg = DistillConfig { train_count: 41, test_count: 30, balanced: true, seed: 3 };
        let (train, test) = distill(&raw, &raw, &cfg).unwrap();
        assert_eq!((train.len(), test.len()), (41, 30));
        let ones = train.iter().filter(|e| e.label == 1).count();
        assert_eq!((train.len() - ones, ones), (21, 20));
        assert!(train.iter().chain(&test).all(|e| e.label <= 1));
        for e in &train {
            assert_abs_diff_eq!(e.state.norm_sqr(), 1.0, epsilon = 1e-10);
        }
        let (again, _) = distill(&raw, &raw, &cfg).unwrap();
        assert_eq!(train, again);

        let cfg = DistillConfig { balanced: false, ..cfg };
        let (train, _) = distill(&raw, &raw, &cfg).unwrap();
        assert_eq!(train.len(), 41);

        let too_many = DistillConfig { train_count: 1000, ..cfg };
        assert!(matches!(distill(&raw, &raw, &too_many), Err(Error::Dataset(_))));
    }
}
