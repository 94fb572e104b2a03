use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::binfmt::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::numerics::LabelledRow;
use crate::rng::SimRng;

/// Row-major feature matrix with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dims: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dims: usize, num_classes: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Structure("feature dimension must be >= 1".into()));
        }
        if features.len() != labels.len() * dims {
            return Err(Error::dim("dataset features", labels.len() * dims, features.len()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Structure(format!(
                "label {bad} not below class count {num_classes}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            dims,
            num_classes,
        })
    }

    pub fn empty(dims: usize, num_classes: usize) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            dims,
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> LabelledRow<'_> {
        (self.row(i), self.labels[i])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dims);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dims: self.dims,
            num_classes: self.num_classes,
        }
    }

    /// Concatenate datasets sharing dimension and class count.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Usage("concatenating zero datasets".into()))?;
        let mut out = first.clone();
        for d in iter {
            if d.dims != out.dims || d.num_classes != out.num_classes {
                return Err(Error::Structure("concatenated datasets disagree in shape".into()));
            }
            out.features.extend_from_slice(&d.features);
            out.labels.extend_from_slice(&d.labels);
        }
        Ok(out)
    }

    /// Binary layout: `n, d, K` as u64 LE, row-major f64 features, u64 labels.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BinWriter::new(out);
        w.u64(self.len() as u64)?;
        w.u64(self.dims as u64)?;
        w.u64(self.num_classes as u64)?;
        w.f64s(&self.features)?;
        for &y in &self.labels {
            w.u64(y as u64)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Dataset> {
        let mut r = BinReader::new(input);
        let n = r.usize()?;
        let d = r.usize()?;
        let k = r.usize()?;
        let features = r.f64s(n.checked_mul(d).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        let labels = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Dataset::new(features, labels, d, k).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + self.features.len() * 8 + self.labels.len() * 8);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Shuffle, then keep `round(fraction * n)` rows for training.
pub fn split_train_test(data: &Dataset, fraction: f64, rng: &mut SimRng) -> Result<(Dataset, Dataset)> {
    if data.is_empty() {
        return Err(Error::Usage("cannot split an empty dataset".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Usage(format!("train fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let n_train = (fraction * data.len() as f64).round() as usize;
    let (train, test) = idx.split_at(n_train);
    Ok((data.select(train), data.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn toy(n: usize) -> Dataset {
        let features = (0..n * 2).map(|v| v as f64 * 0.5).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new(features, labels, 2, 3).unwrap()
    }

    fn sorted_rows(d: &Dataset) -> Vec<(Vec<u64>, usize)> {
        let mut rows: Vec<_> = (0..d.len())
            .map(|i| (d.row(i).iter().map(|v| v.to_bits()).collect(), d.label(i)))
            .collect();
        rows.sort();
        rows
    }

    #[test]
    fn seventy_thirty() {
        let (tr, te) = split_train_test(&toy(100), 0.7, &mut rng_from(1, &[])).unwrap();
        assert_eq!((tr.len(), te.len()), (70, 30));
    }

    #[test]
    fn single_sample_stays_in_train() {
        let (tr, te) = split_train_test(&toy(1), 0.7, &mut rng_from(1, &[])).unwrap();
        assert_eq!((tr.len(), te.len()), (1, 0));
    }

    #[test]
    fn split_conserves_rows() {
        let d = toy(37);
        let (tr, te) = split_train_test(&d, 0.7, &mut rng_from(4, &[])).unwrap();
        let joined = Dataset::concat([&tr, &te]).unwrap();
        assert_eq!(sorted_rows(&joined), sorted_rows(&d));
    }

    #[test]
    fn split_rejects_empty_and_bad_fraction() {
        let mut rng = rng_from(0, &[]);
        assert!(split_train_test(&Dataset::empty(2, 3), 0.7, &mut rng).is_err());
        assert!(split_train_test(&toy(5), 1.0, &mut rng).is_err());
    }

    #[test]
    fn binary_layout_is_exact() {
        let d = Dataset::new(vec![1.5, -2.0], vec![1], 2, 3).unwrap();
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), 24 + 16 + 8);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[40..48], &1u64.to_le_bytes());
        assert_eq!(Dataset::read_from(bytes.as_slice()).unwrap(), d);
    }

    #[test]
    fn truncated_or_padded_input_rejected() {
        let bytes = toy(3).to_bytes();
        assert!(Dataset::read_from(&bytes[..bytes.len() - 1]).is_err());
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(Dataset::read_from(padded.as_slice()).is_err());
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(Dataset::new(vec![0.0], vec![3], 1, 3).is_err());
    }
}
