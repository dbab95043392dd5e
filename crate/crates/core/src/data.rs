//! Dataset ingestion and synthetic generators.
//!
//! MNIST is read from the big-endian IDX container. Time series come from
//! a two-column CSV (`sample,label_or_blank`) cut into fixed windows. The
//! generators produce small separable image sets and a 4-class series set
//! whose classes differ only in temporal order.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::encoding::{IMAGE_PIXELS, IMAGE_SIDE};
use crate::error::DataError;
use crate::numerics::Rng;
use crate::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
pub const SERIES_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pixels: Vec<f64>,
    label: usize,
}

impl LabeledImage {
    pub fn new(pixels: Vec<f64>, label: usize) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(Error::Length {
                op: "LabeledImage::new",
                expected: IMAGE_PIXELS,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixels must lie in [0, 1]"));
        }
        if label > 9 {
            return Err(Error::invalid(format!("image label {label} outside 0..=9")));
        }
        Ok(Self { pixels, label })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn label(&self) -> usize {
        self.label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    samples: Vec<f64>,
    label: usize,
}

impl LabeledWindow {
    pub fn new(samples: Vec<f64>, label: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("series window must be non-empty"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("series sample".into()));
        }
        if label >= SERIES_CLASSES {
            return Err(Error::invalid(format!("series label {label} outside 0..=3")));
        }
        Ok(Self { samples, label })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn label(&self) -> usize {
        self.label
    }
}

/// Training and held-out examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<E> {
    pub train: Vec<E>,
    pub test: Vec<E>,
}

impl<E> Dataset<E> {
    pub fn new(train: Vec<E>, test: Vec<E>) -> Self {
        Self { train, test }
    }

    /// Holds out the last `fraction` of `all` (rounded down, at least one
    /// example when `all` has two or more).
    pub fn split_tail(mut all: Vec<E>, fraction: f64) -> Self {
        let mut n_test = (all.len() as f64 * fraction).floor() as usize;
        if n_test == 0 && all.len() >= 2 && fraction > 0.0 {
            n_test = 1;
        }
        let test = all.split_off(all.len() - n_test);
        Self { train: all, test }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            what,
            expected: offset + 4,
            actual: bytes.len(),
        })
}

/// Parses an IDX image file into rows of 784 pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>, DataError> {
    let magic = be_u32(bytes, 0, "image header")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::WrongMagic {
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4, "image header")? as usize;
    let rows = be_u32(bytes, 8, "image header")? as usize;
    let cols = be_u32(bytes, 12, "image header")? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(DataError::BadDimensions { rows, cols });
    }
    let body = &bytes[16..];
    let need = n * IMAGE_PIXELS;
    if body.len() < need {
        return Err(DataError::Truncated {
            what: "image payload",
            expected: need,
            actual: body.len(),
        });
    }
    Ok(body[..need]
        .chunks_exact(IMAGE_PIXELS)
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0, "label header")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DataError::WrongMagic {
            expected: IDX_LABEL_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4, "label header")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(DataError::Truncated {
            what: "label payload",
            expected: n,
            actual: body.len(),
        });
    }
    Ok(body[..n].to_vec())
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<LabeledImage>> {
    let images = parse_idx_images(&read_file(images_path)?)?;
    let labels = parse_idx_labels(&read_file(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        }
        .into());
    }
    images
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (pixels, label))| {
            if label > 9 {
                return Err(DataError::BadLabel {
                    line: i as u64 + 1,
                    value: label.to_string(),
                }
                .into());
            }
            Ok(LabeledImage {
                pixels,
                label: label as usize,
            })
        })
        .collect()
}

/// Loads the canonical train/test split from a directory holding the four
/// uncompressed MNIST files. `train_limit` keeps only the first examples.
pub fn load_mnist_dir(dir: &Path, train_limit: Option<usize>) -> Result<Dataset<LabeledImage>> {
    let mut train = load_mnist_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_mnist_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;
    if let Some(n) = train_limit {
        train.truncate(n);
    }
    Ok(Dataset { train, test })
}

fn csv_error(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Parses `sample,label_or_blank` rows and cuts windows of length `window`
/// every `stride` rows. A window takes the label written on its final row;
/// windows whose final row is unlabeled are dropped.
pub fn parse_series_csv<R: Read>(reader: R, window: usize, stride: usize) -> Result<Vec<LabeledWindow>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be positive"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut samples = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let first = rec.get(0).unwrap_or("");
        let sample = match first.parse::<f64>() {
            Ok(x) if x.is_finite() => x,
            _ if i == 0 => continue,
            _ => {
                return Err(DataError::BadSample {
                    line,
                    value: first.to_string(),
                }
                .into())
            }
        };
        let label = match rec.get(1).unwrap_or("") {
            "" => None,
            s => match s.parse::<usize>() {
                Ok(l) if l < SERIES_CLASSES => Some(l),
                _ => {
                    return Err(DataError::BadLabel {
                        line,
                        value: s.to_string(),
                    }
                    .into())
                }
            },
        };
        samples.push(sample);
        labels.push(label);
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    if window > samples.len() {
        return Err(DataError::WindowTooLong {
            window,
            len: samples.len(),
        }
        .into());
    }
    Ok((0..=samples.len() - window)
        .step_by(stride)
        .filter_map(|start| {
            let end = start + window;
            labels[end - 1].map(|label| LabeledWindow {
                samples: samples[start..end].to_vec(),
                label,
            })
        })
        .collect())
}

pub fn load_series_csv(path: &Path, window: usize, stride: usize) -> Result<Vec<LabeledWindow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(std::io::BufReader::new(file), window, stride)
}

/// Writes windows back to back with a header row, labeling only the last
/// row of each window. Reading with `stride == window` recovers them exactly.
pub fn write_series_csv(path: &Path, windows: &[LabeledWindow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    let io = |e: csv::Error| Error::from(csv_error(e));
    w.write_record(["sample", "label"]).map_err(io)?;
    for win in windows {
        let last = win.samples.len() - 1;
        for (i, x) in win.samples.iter().enumerate() {
            let label = if i == last {
                win.label.to_string()
            } else {
                String::new()
            };
            w.write_record([x.to_string(), label]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Separable synthetic digits. With 2 classes the left or right half is
/// bright; with 4 one quadrant is; with 10 the classes are the four row
/// bands, the two halves and the four quadrants. Labels cycle `0..classes`.
pub fn synth_images(n: usize, classes: usize, rng: &mut Rng) -> Result<Vec<LabeledImage>> {
    if n == 0 {
        return Err(Error::invalid("synth_images needs n >= 1"));
    }
    if ![2, 4, 10].contains(&classes) {
        return Err(Error::invalid(format!(
            "synth_images supports 2, 4 or 10 classes, got {classes}"
        )));
    }
    let half = IMAGE_SIDE / 2;
    let region = |class: usize, r: usize, c: usize| -> bool {
        let quadrant = |q: usize| (r < half) == (q < 2) && (c < half) == q.is_multiple_of(2);
        match (classes, class) {
            (2, k) => (c < half) == (k == 0),
            (4, q) => quadrant(q),
            (_, k) if k < 4 => r / 7 == k,
            (_, k) if k < 6 => (c < half) == (k == 4),
            (_, k) => quadrant(k - 6),
        }
    };
    Ok((0..n)
        .map(|i| {
            let label = i % classes;
            let pixels = (0..IMAGE_PIXELS)
                .map(|p| {
                    let (r, c) = (p / IMAGE_SIDE, p % IMAGE_SIDE);
                    let x = if region(label, r, c) {
                        rng.uniform_range(0.6, 1.0)
                    } else {
                        rng.uniform_range(0.0, 0.2)
                    };
                    x.clamp(0.0, 1.0)
                })
                .collect();
            LabeledImage { pixels, label }
        })
        .collect())
}

fn bump(x: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((x - centre) / width).powi(2)).exp()
}

/// One window of synthetic class `class` (0..=3).
///
/// - 0: a single bump early in the window
/// - 1: the class-0 window rotated right by 40% (same values, later bump)
/// - 2: two bumps of equal height
/// - 3: a slow linear ramp followed by a fast fall
///
/// Every class leaves the final 15% of the window as baseline noise.
pub fn synth_series_window(class: usize, window: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if class >= SERIES_CLASSES {
        return Err(Error::invalid(format!("series class {class} outside 0..=3")));
    }
    if window < 16 {
        return Err(Error::invalid(format!(
            "synthetic series windows need W >= 16, got {window}"
        )));
    }
    let w = window as f64;
    let sigma = w / 32.0;
    let amp = rng.uniform_range(0.8, 1.2);
    let noise: Vec<f64> = (0..window).map(|_| 0.05 * rng.normal()).collect();
    let signal: Vec<f64> = match class {
        0 | 1 => {
            let c = rng.uniform_range(0.2, 0.35) * w;
            (0..window).map(|i| amp * bump(i as f64, c, sigma)).collect()
        }
        2 => {
            let c1 = rng.uniform_range(0.15, 0.3) * w;
            let c2 = c1 + rng.uniform_range(0.3, 0.4) * w;
            (0..window)
                .map(|i| amp * (bump(i as f64, c1, sigma) + bump(i as f64, c2, sigma)))
                .collect()
        }
        _ => {
            let start = rng.uniform_range(0.15, 0.25) * w;
            let peak = rng.uniform_range(0.55, 0.65) * w;
            let fall = w / 16.0;
            (0..window)
                .map(|i| {
                    let x = i as f64;
                    if x < start || x >= peak + fall {
                        0.0
                    } else if x < peak {
                        amp * (x - start) / (peak - start)
                    } else {
                        amp * (1.0 - (x - peak) / fall)
                    }
                })
                .collect()
        }
    };
    let mut out: Vec<f64> = signal.iter().zip(&noise).map(|(s, n)| s + n).collect();
    if class == 1 {
        out.rotate_right((0.4 * w).round() as usize);
    }
    Ok(out)
}

/// `n` windows with labels cycling through the four classes.
pub fn synth_series(n: usize, window: usize, rng: &mut Rng) -> Result<Vec<LabeledWindow>> {
    if n == 0 {
        return Err(Error::invalid("synth_series needs n >= 1"));
    }
    (0..n)
        .map(|i| {
            let label = i % SERIES_CLASSES;
            Ok(LabeledWindow {
                samples: synth_series_window(label, window, rng)?,
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, fill: u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGE_MAGIC, n, 28, 28] {
            b.extend(v.to_be_bytes());
        }
        b.extend(std::iter::repeat_n(fill, n as usize * IMAGE_PIXELS));
        b
    }

    #[test]
    fn idx_examples() {
        let imgs = parse_idx_images(&idx_images(1, 255)).unwrap();
        assert_eq!(imgs.len(), 1);
        assert!(imgs[0].iter().all(|&p| p == 1.0));

        let mut bad = idx_images(1, 0);
        bad[3] = 0x01;
        assert_eq!(
            parse_idx_images(&bad).unwrap_err(),
            DataError::WrongMagic {
                expected: IDX_IMAGE_MAGIC,
                found: IDX_LABEL_MAGIC
            }
        );

        let short = &idx_images(2, 0)[..16 + IMAGE_PIXELS];
        assert!(matches!(parse_idx_images(short), Err(DataError::Truncated { .. })));
    }

    #[test]
    fn series_csv_arithmetic() {
        let csv = "1.0,\n2.0,1\n3.0,\n4.0,2\n";
        let w = parse_series_csv(csv.as_bytes(), 2, 2).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].samples(), &[1.0, 2.0]);
        assert_eq!(w[0].label(), 1);
        assert_eq!(w[1].label(), 2);

        assert!(parse_series_csv("".as_bytes(), 4, 1).unwrap().is_empty());
        assert!(parse_series_csv("sample,label\n".as_bytes(), 4, 1).unwrap().is_empty());
    }

    #[test]
    fn series_csv_header_and_errors() {
        let w = parse_series_csv("sample,label\n0.5,\n0.25,3\n".as_bytes(), 2, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples(), &[0.5, 0.25]);

        let err = parse_series_csv("1.0,\nabc,\n".as_bytes(), 1, 1).unwrap_err();
        assert!(
            matches!(err, Error::Data(DataError::BadSample { line: 2, .. })),
            "{err}"
        );
        let err = parse_series_csv("1.0,7\n".as_bytes(), 1, 1).unwrap_err();
        assert!(matches!(err, Error::Data(DataError::BadLabel { .. })), "{err}");
        let err = parse_series_csv("1.0,1\n".as_bytes(), 3, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Data(DataError::WindowTooLong { window: 3, len: 1 })
        ));
    }

    #[test]
    fn split_tail_holds_out_last_tenth() {
        let d = Dataset::split_tail((0..20).collect::<Vec<_>>(), 0.1);
        assert_eq!(d.train, (0..18).collect::<Vec<_>>());
        assert_eq!(d.test, vec![18, 19]);
    }

    #[test]
    fn synth_images_are_reproducible_and_balanced() {
        let a = synth_images(40, 10, &mut Rng::new(3)).unwrap();
        let b = synth_images(40, 10, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        for k in 0..10 {
            assert_eq!(a.iter().filter(|x| x.label() == k).count(), 4);
        }
        assert!(synth_images(4, 3, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn early_and_late_classes_share_histograms() {
        let mut r0 = Rng::new(17);
        let mut r1 = Rng::new(17);
        let mut early = synth_series_window(0, 64, &mut r0).unwrap();
        let mut late = synth_series_window(1, 64, &mut r1).unwrap();
        assert_ne!(early, late);
        early.sort_by(f64::total_cmp);
        late.sort_by(f64::total_cmp);
        assert_eq!(early, late);
    }
}
