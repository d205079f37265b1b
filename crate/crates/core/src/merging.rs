//! Merging mappings and the merged search space.
//!
//! A [`MergingMapping`] partitions the variable indices `1..=n` into `r`
//! ordered blocks. Block `j` with `l_j` indices becomes a merged variable
//! whose values are the integers `0..2^l_j`; value `v` assigns the block's
//! bits from the binary expansion of `v`, most significant bit to the
//! block's first index. A [`MergedPoint`] is one value per block, and
//! [`MergingMapping::tau`] / [`MergingMapping::tau_inverse`] convert between
//! merged points and hypercube points.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::BitVector;

/// Largest block a mapping may hold; block values are stored in a `u64`.
pub const MAX_BLOCK_BITS: usize = 63;

/// Default cap on block size for mappings used in search: traversing a
/// block's domain costs `2^l` evaluations.
pub const DEFAULT_BLOCK_CAP: usize = 20;

const OCCUPANCY_MAX_DRAWS: usize = 1_000_000;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMapping", into = "RawMapping")]
pub struct MergingMapping {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawMapping {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<RawMapping> for MergingMapping {
    type Error = Error;

    fn try_from(raw: RawMapping) -> Result<Self> {
        Self::new(raw.n, raw.blocks)
    }
}

impl From<MergingMapping> for RawMapping {
    fn from(m: MergingMapping) -> Self {
        RawMapping {
            n: m.n,
            blocks: m.blocks,
        }
    }
}

/// How [`MergingMapping::random`] distributes variables over blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMode {
    /// Every variable lands in a uniformly random block; draws that leave a
    /// block empty are discarded and redrawn.
    #[default]
    Occupancy,
    /// Random permutation split into blocks whose sizes differ by at most one.
    Uniform,
}

impl FromStr for MappingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(Self::Occupancy),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown mapping mode {other:?} (expected occupancy or uniform)"
            ))),
        }
    }
}

impl fmt::Display for MappingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Occupancy => "occupancy",
            Self::Uniform => "uniform",
        })
    }
}

impl MergingMapping {
    /// Builds a mapping from 1-based index blocks.
    ///
    /// Blocks must be nonempty, pairwise disjoint and cover `1..=n`, and
    /// `1 <= r < n`.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let r = blocks.len();
        if r == 0 || r >= n {
            return Err(Error::InvalidMapping(format!(
                "need 1 <= r < n, got r = {r}, n = {n}"
            )));
        }
        let mut seen = vec![false; n + 1];
        for (j, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidMapping(format!("block {} is empty", j + 1)));
            }
            if block.len() > MAX_BLOCK_BITS {
                return Err(Error::InvalidMapping(format!(
                    "block {} has {} variables, more than the supported {MAX_BLOCK_BITS}",
                    j + 1,
                    block.len()
                )));
            }
            for &i in block {
                if i == 0 || i > n {
                    return Err(Error::InvalidMapping(format!(
                        "variable index {i} outside 1..={n}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidMapping(format!(
                        "variable {i} appears in more than one place"
                    )));
                }
            }
        }
        if let Some(missing) = (1..=n).find(|&i| !seen[i]) {
            return Err(Error::InvalidMapping(format!(
                "variable {missing} is not covered by any block"
            )));
        }
        Ok(Self { n, blocks })
    }

    /// Draws a random mapping of `n` variables onto `r` blocks.
    pub fn random<R: Rng + ?Sized>(n: usize, r: usize, mode: MappingMode, rng: &mut R) -> Result<Self> {
        if r == 0 || r >= n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r < n, got r = {r}, n = {n}"
            )));
        }
        let blocks = match mode {
            MappingMode::Uniform => {
                if n.div_ceil(r) > MAX_BLOCK_BITS {
                    return Err(Error::InvalidArgument(format!(
                        "uniform blocks of size {} exceed {MAX_BLOCK_BITS}",
                        n.div_ceil(r)
                    )));
                }
                let mut order: Vec<usize> = (1..=n).collect();
                order.shuffle(rng);
                let base = n / r;
                let extra = n % r;
                let mut blocks = Vec::with_capacity(r);
                let mut rest = order.as_slice();
                for j in 0..r {
                    let len = if j < extra { base + 1 } else { base };
                    let (head, tail) = rest.split_at(len);
                    let mut block = head.to_vec();
                    block.sort_unstable();
                    blocks.push(block);
                    rest = tail;
                }
                blocks
            }
            MappingMode::Occupancy => {
                let mut draws = 0;
                loop {
                    draws += 1;
                    if draws > OCCUPANCY_MAX_DRAWS {
                        return Err(Error::InvalidArgument(format!(
                            "occupancy sampling found no surjection onto {r} blocks in {OCCUPANCY_MAX_DRAWS} draws"
                        )));
                    }
                    let mut blocks = vec![Vec::new(); r];
                    for i in 1..=n {
                        blocks[rng.random_range(0..r)].push(i);
                    }
                    if blocks.iter().all(|b| !b.is_empty() && b.len() <= MAX_BLOCK_BITS) {
                        break blocks;
                    }
                }
            }
        };
        Self::new(n, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// `l* = max_j l_j`.
    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Cardinality of the radius-1 merged neighborhood of any point:
    /// `sum_j 2^l_j + 1 - r`.
    pub fn neighborhood_size(&self) -> u128 {
        let total: u128 = self.blocks.iter().map(|b| 1u128 << b.len()).sum();
        total + 1 - self.r() as u128
    }

    pub fn conforms(&self, point: &MergedPoint) -> bool {
        point.sizes.len() == self.blocks.len()
            && point.sizes.iter().zip(&self.blocks).all(|(&l, b)| l == b.len())
    }

    /// The hypercube point encoded by a merged point.
    pub fn tau(&self, point: &MergedPoint) -> Result<BitVector> {
        self.check_shape(point)?;
        let mut alpha = BitVector::zeros(self.n);
        for (j, &value) in point.values.iter().enumerate() {
            self.write_block(&mut alpha, j, value);
        }
        Ok(alpha)
    }

    /// The merged point encoding `alpha`.
    pub fn tau_inverse(&self, alpha: &BitVector) -> Result<MergedPoint> {
        self.check_dim(alpha)?;
        Ok(MergedPoint {
            sizes: self.block_sizes(),
            values: (0..self.r()).map(|j| self.block_value(alpha, j)).collect(),
        })
    }

    /// Value of block `j` (0-based) read from `alpha`.
    pub(crate) fn block_value(&self, alpha: &BitVector, j: usize) -> u64 {
        self.blocks[j]
            .iter()
            .fold(0u64, |acc, &i| acc << 1 | alpha.bit(i - 1) as u64)
    }

    /// Overwrites block `j` (0-based) of `alpha` with `value`.
    pub(crate) fn write_block(&self, alpha: &mut BitVector, j: usize, value: u64) {
        let block = &self.blocks[j];
        let l = block.len();
        for (k, &i) in block.iter().enumerate() {
            alpha.put(i - 1, value >> (l - 1 - k) & 1 == 1);
        }
    }

    /// Radius-1 neighborhood of `point` in the merged space.
    pub fn neighborhood(&self, point: &MergedPoint) -> Result<MergedNeighborhood> {
        self.check_shape(point)?;
        Ok(MergedNeighborhood {
            center: point.clone(),
        })
    }

    /// Fails when any block is larger than `cap`.
    pub fn check_block_cap(&self, cap: usize) -> Result<()> {
        match self.max_block_size() {
            l if l > cap => Err(Error::InvalidMapping(format!(
                "block of size {l} exceeds the cap {cap}"
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn check_dim(&self, alpha: &BitVector) -> Result<()> {
        if alpha.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: alpha.len(),
            });
        }
        Ok(())
    }

    fn check_shape(&self, point: &MergedPoint) -> Result<()> {
        if !self.conforms(point) {
            return Err(Error::ShapeMismatch(format!(
                "point has block sizes {:?}, mapping has {:?}",
                point.sizes,
                self.block_sizes()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for MergingMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MergingMapping(n={}, blocks={:?})", self.n, self.blocks)
    }
}

/// One value per merged variable; value `j` lies in `0..2^sizes[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergedPoint {
    sizes: Vec<usize>,
    values: Vec<u64>,
}

impl MergedPoint {
    pub fn new(sizes: Vec<usize>, values: Vec<u64>) -> Result<Self> {
        if sizes.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} block sizes but {} values",
                sizes.len(),
                values.len()
            )));
        }
        for (j, (&l, &v)) in sizes.iter().zip(&values).enumerate() {
            if l == 0 || l > MAX_BLOCK_BITS {
                return Err(Error::ShapeMismatch(format!("block {} has size {l}", j + 1)));
            }
            if v >> l != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "value {v} of block {} does not fit in {l} bits",
                    j + 1
                )));
            }
        }
        Ok(Self { sizes, values })
    }

    pub fn zeros(sizes: Vec<usize>) -> Result<Self> {
        let values = vec![0; sizes.len()];
        Self::new(sizes, values)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// Copy with block `j` (0-based) set to `value`.
    pub fn with_value(&self, j: usize, value: u64) -> Result<Self> {
        let l = *self.sizes.get(j).ok_or(Error::IndexOutOfRange {
            index: j + 1,
            n: self.sizes.len(),
        })?;
        if value >> l != 0 {
            return Err(Error::ShapeMismatch(format!(
                "value {value} does not fit in {l} bits"
            )));
        }
        let mut out = self.clone();
        out.values[j] = value;
        Ok(out)
    }

    /// Hamming distance over merged coordinates.
    pub fn distance(&self, other: &Self) -> Result<usize> {
        if self.sizes != other.sizes {
            return Err(Error::ShapeMismatch("points have different shapes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Every point of the merged space with the given block sizes, in
    /// odometer order (last block fastest). Only sensible for small spaces.
    pub fn enumerate(sizes: &[usize]) -> impl Iterator<Item = MergedPoint> {
        let sizes = sizes.to_vec();
        let total: u128 = sizes.iter().map(|&l| 1u128 << l).product();
        let mut values = vec![0u64; sizes.len()];
        let mut emitted = 0u128;
        std::iter::from_fn(move || {
            if emitted == total {
                return None;
            }
            let out = MergedPoint {
                sizes: sizes.clone(),
                values: values.clone(),
            };
            emitted += 1;
            for j in (0..sizes.len()).rev() {
                values[j] += 1;
                if values[j] >> sizes[j] == 0 {
                    break;
                }
                values[j] = 0;
            }
            Some(out)
        })
    }
}

/// The radius-1 neighborhood of a merged point.
///
/// Iteration yields the center first, then block by block every point that
/// differs from the center in that block only, values ascending. Each
/// block's part can be consumed independently through
/// [`MergedNeighborhood::block`], which is how parallel traversal splits work.
#[derive(Clone, Debug)]
pub struct MergedNeighborhood {
    center: MergedPoint,
}

impl MergedNeighborhood {
    pub fn center(&self) -> &MergedPoint {
        &self.center
    }

    pub fn num_blocks(&self) -> usize {
        self.center.sizes.len()
    }

    /// The `2^l_j - 1` points differing from the center in block `j` (0-based).
    pub fn block(&self, j: usize) -> impl Iterator<Item = MergedPoint> + '_ {
        let current = self.center.values[j];
        (0..1u64 << self.center.sizes[j])
            .filter(move |&v| v != current)
            .map(move |v| {
                let mut p = self.center.clone();
                p.values[j] = v;
                p
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = MergedPoint> + '_ {
        std::iter::once(self.center.clone()).chain((0..self.num_blocks()).flat_map(move |j| self.block(j)))
    }

    pub fn len(&self) -> u128 {
        let total: u128 = self.center.sizes.iter().map(|&l| 1u128 << l).sum();
        total + 1 - self.center.sizes.len() as u128
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Stirling number of the second kind `S(n, k)`.
pub fn stirling2(n: usize, k: usize) -> BigUint {
    // row[j] holds S(i, j) for the current i
    let mut row = vec![BigUint::zero(); k + 1];
    row[0] = BigUint::one();
    for _ in 1..=n {
        for j in (1..=k).rev() {
            let carried = std::mem::take(&mut row[j]) * BigUint::from(j) + &row[j - 1];
            row[j] = carried;
        }
        row[0] = BigUint::zero();
    }
    row[k].clone()
}

/// Number of distinct merging mappings of `n` variables:
/// `sum_{r=1}^{n-1} r! * S(n, r)`.
pub fn count_merging_mappings(n: usize) -> Result<BigUint> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    let mut total = BigUint::zero();
    let mut factorial = BigUint::one();
    for r in 1..n {
        factorial *= BigUint::from(r);
        total += &factorial * stirling2(n, r);
    }
    Ok(total)
}
