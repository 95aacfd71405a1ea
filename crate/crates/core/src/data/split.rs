use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::{sort_canonical, Sample};
use crate::error::{Error, Result};

pub const MIN_SPLIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.validation, self.test];
        if r.iter().any(|&x| !(x > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// Which part of a split a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Validation, Part::Test];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Validation => "validation",
            Part::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub split_seed: u64,
}

impl SplitSet {
    pub fn part(&self, p: Part) -> &[Sample] {
        match p {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
            Part::Test => &self.test,
        }
    }

    pub fn part_mut(&mut self, p: Part) -> &mut Vec<Sample> {
        match p {
            Part::Train => &mut self.train,
            Part::Validation => &mut self.validation,
            Part::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    /// Recombines all parts in canonical order.
    pub fn into_samples(self) -> Vec<Sample> {
        let mut all: Vec<Sample> = self.train;
        all.extend(self.validation);
        all.extend(self.test);
        sort_canonical(&mut all);
        all
    }
}

/// Whole-sample targets for each part: train and validation are rounded,
/// test takes the remainder.
pub fn part_sizes(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let train = (n as f64 * ratios.train).round() as usize;
    let val = ((n as f64 * ratios.validation).round() as usize).min(n - train);
    [train, val, n - train - val]
}

/// Per-class, per-part counts: each class gets its floor quota, and the
/// leftover units go to the (class, part) pairs with the largest fractional
/// quota until every part reaches its target size.
fn allocate(class_counts: [usize; 2], ratios: &SplitRatios) -> [[usize; 3]; 2] {
    let n: usize = class_counts.iter().sum();
    let targets = part_sizes(n, ratios);
    let r = ratios.as_array();
    let mut alloc = [[0usize; 3]; 2];
    let mut fracs = Vec::new();
    for c in 0..2 {
        for p in 0..3 {
            let q = class_counts[c] as f64 * r[p];
            alloc[c][p] = q.floor() as usize;
            fracs.push((q - q.floor(), c, p));
        }
    }
    let mut class_left: Vec<usize> = (0..2)
        .map(|c| class_counts[c] - alloc[c].iter().sum::<usize>())
        .collect();
    let mut part_left: Vec<usize> = (0..3)
        .map(|p| targets[p].saturating_sub(alloc[0][p] + alloc[1][p]))
        .collect();
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for &(_, c, p) in &fracs {
        if class_left[c] > 0 && part_left[p] > 0 {
            alloc[c][p] += 1;
            class_left[c] -= 1;
            part_left[p] -= 1;
        }
    }
    for c in 0..2 {
        for p in 0..3 {
            let k = class_left[c].min(part_left[p]);
            alloc[c][p] += k;
            class_left[c] -= k;
            part_left[p] -= k;
        }
    }
    alloc
}

/// Stratified index split: indices of each label are shuffled with the seed
/// and cut into contiguous train / validation / test runs.
pub fn split_indices(labels: &[u8], ratios: &SplitRatios, seed: u64) -> Result<[Vec<usize>; 3]> {
    ratios.validate()?;
    if labels.len() < MIN_SPLIT_SAMPLES {
        return Err(Error::Contract(format!(
            "cannot split {} samples; need at least {MIN_SPLIT_SAMPLES}",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Contract(format!("invalid label {bad}")));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let alloc = allocate([by_class[0].len(), by_class[1].len()], ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        let mut offset = 0;
        for p in 0..3 {
            parts[p].extend_from_slice(&idx[offset..offset + alloc[c][p]]);
            offset += alloc[c][p];
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

/// Canonically orders `samples`, then splits them with [`split_indices`].
/// Each part is returned in canonical order.
pub fn split(mut samples: Vec<Sample>, ratios: &SplitRatios, seed: u64) -> Result<SplitSet> {
    sort_canonical(&mut samples);
    for w in samples.windows(2) {
        if w[0].key() == w[1].key() {
            return Err(Error::Contract(format!(
                "duplicate sample {}@{}",
                w[0].patient_id, w[0].window_start_ms
            )));
        }
    }
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let parts = split_indices(&labels, ratios, seed)?;
    let mut assignment = vec![Part::Train; samples.len()];
    for (p, idx) in Part::ALL.iter().zip(&parts) {
        for &i in idx {
            assignment[i] = *p;
        }
    }
    let mut set = SplitSet {
        train: Vec::with_capacity(parts[0].len()),
        validation: Vec::with_capacity(parts[1].len()),
        test: Vec::with_capacity(parts[2].len()),
        split_seed: seed,
    };
    for (s, p) in samples.into_iter().zip(assignment) {
        set.part_mut(p).push(s);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, pos: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i < pos)).collect()
    }

    #[test]
    fn hundred_samples_split_60_20_20() {
        let parts = split_indices(&labels(100, 37), &SplitRatios::default(), 3).unwrap();
        assert_eq!([parts[0].len(), parts[1].len(), parts[2].len()], [60, 20, 20]);
    }

    #[test]
    fn tiny_inputs() {
        assert!(split_indices(&labels(4, 2), &SplitRatios::default(), 0).is_err());
        let parts = split_indices(&labels(5, 1), &SplitRatios::default(), 0).unwrap();
        assert_eq!([parts[0].len(), parts[1].len(), parts[2].len()], [3, 1, 1]);
    }

    #[test]
    fn allocation_hits_targets() {
        for n0 in 0..40 {
            for n1 in 0..40 {
                if n0 + n1 < 5 {
                    continue;
                }
                let a = allocate([n0, n1], &SplitRatios::default());
                let t = part_sizes(n0 + n1, &SplitRatios::default());
                for p in 0..3 {
                    assert_eq!(a[0][p] + a[1][p], t[p]);
                }
                assert_eq!(a[0].iter().sum::<usize>(), n0);
                assert_eq!(a[1].iter().sum::<usize>(), n1);
            }
        }
    }
}
