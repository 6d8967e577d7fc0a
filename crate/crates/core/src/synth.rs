//! Stochastic block model dataset with a smoothly splitting block.
//!
//! An input `x` in `[1, 6]` yields `floor(x)` blocks. As `x` moves toward the
//! next integer, the second half of block 0 separates into a new block: the
//! connection probability between the two halves is `p(x)` and its nodes take
//! the new label with probability `x - floor(x)`.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{one_hot_features, LabeledGraph};

pub const X_MIN: f64 = 1.0;
pub const X_MAX: f64 = 6.0;
pub const INTRA_PROB: f64 = 0.9;
pub const INTER_PROB: f64 = 0.01;
pub const MIN_NODES: usize = 40;
pub const MAX_NODES: usize = 45;
/// Labels range over `0..LABEL_COUNT`.
pub const LABEL_COUNT: usize = 6;

fn check_x(x: f64) -> Result<()> {
    if !(X_MIN..=X_MAX).contains(&x) {
        return Err(Error::OutOfRange { value: x, lo: X_MIN, hi: X_MAX });
    }
    Ok(())
}

/// Edge probability between the two halves of the splitting block:
/// `0.889 (x - floor(x)) + 0.01`.
pub fn split_probability(x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(0.889 * (x - x.floor()) + 0.01)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelEncoding {
    /// One column holding the label value.
    #[default]
    Scalar,
    /// `LABEL_COUNT` indicator columns.
    OneHot,
}

/// Block layout of a sample: `block[i]` is the block of node `i`. The
/// emerging block, if any, has index `floor(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmLayout {
    pub block: Vec<usize>,
    pub base_blocks: usize,
    pub emerging: bool,
}

/// Splits `n` nodes into `floor(x)` contiguous blocks as evenly as possible
/// (remainder to the lowest indices); for fractional `x`, the last
/// `floor(size_0 / 2)` nodes of block 0 form the emerging block.
pub fn block_layout(x: f64, n: usize) -> Result<SbmLayout> {
    check_x(x)?;
    let k = x.floor() as usize;
    let emerging = x > x.floor();
    let (base, rem) = (n / k, n % k);
    let mut block = Vec::with_capacity(n);
    for b in 0..k {
        let size = base + usize::from(b < rem);
        block.extend(std::iter::repeat_n(b, size));
    }
    if emerging {
        let size0 = base + usize::from(rem > 0);
        let start = size0 - size0 / 2;
        for b in block.iter_mut().take(size0).skip(start) {
            *b = k;
        }
    }
    Ok(SbmLayout { block, base_blocks: k, emerging })
}

fn pair_probability(a: usize, b: usize, k: usize, p_split: f64) -> f64 {
    if a == b {
        INTRA_PROB
    } else if (a == 0 && b == k) || (a == k && b == 0) {
        p_split
    } else {
        INTER_PROB
    }
}

/// Draws one graph at input `x`. Node labels are block indices, except that
/// emerging-block nodes keep label 0 with probability `1 - frac(x)`.
pub fn sample_graph<R: Rng + ?Sized>(x: f64, encoding: LabelEncoding, rng: &mut R) -> Result<LabeledGraph> {
    let p_split = split_probability(x)?;
    let n = rng.random_range(MIN_NODES..=MAX_NODES);
    let layout = block_layout(x, n)?;
    let k = layout.base_blocks;
    let frac = x - x.floor();

    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = pair_probability(layout.block[i], layout.block[j], k, p_split);
            if rng.random::<f64>() < p {
                c[(i, j)] = 1.0;
                c[(j, i)] = 1.0;
            }
        }
    }
    let labels: Vec<usize> = layout
        .block
        .iter()
        .map(|&b| if b == k && rng.random::<f64>() >= frac { 0 } else { b })
        .collect();
    let f = match encoding {
        LabelEncoding::Scalar => DMatrix::from_fn(n, 1, |i, _| labels[i] as f64),
        LabelEncoding::OneHot => one_hot_features(&labels, LABEL_COUNT)?,
    };
    LabeledGraph::new(c, f)
}

/// `n` samples with `x` uniform on `[1, 6]`. Each sample draws from its own
/// generator seeded from a master stream, so sample `i` does not depend on
/// how many samples follow it.
pub fn make_dataset(n: usize, seed: u64, encoding: LabelEncoding) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut graphs = Vec::with_capacity(n);
    for _ in 0..n {
        let x = master.random_range(X_MIN..=X_MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        graphs.push(sample_graph(x, encoding, &mut rng)?);
        inputs.push(vec![x]);
    }
    Ok(Dataset { inputs, graphs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MeasureGraph;

    #[test]
    fn split_probability_cases() {
        assert!((split_probability(2.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((split_probability(2.5).unwrap() - 0.4545).abs() < 1e-12);
        assert!((split_probability(2.999_999).unwrap() - 0.899).abs() < 1e-5);
        assert!(matches!(split_probability(0.5), Err(Error::OutOfRange { .. })));
        assert!(split_probability(6.01).is_err());
    }

    #[test]
    fn layouts() {
        let l = block_layout(6.0, 45).unwrap();
        assert_eq!(l.base_blocks, 6);
        assert!(!l.emerging);
        let counts: Vec<usize> = (0..6).map(|b| l.block.iter().filter(|v| **v == b).count()).collect();
        assert_eq!(counts, vec![8, 8, 8, 7, 7, 7]);

        let l = block_layout(2.5, 41).unwrap();
        let counts: Vec<usize> = (0..3).map(|b| l.block.iter().filter(|v| **v == b).count()).collect();
        assert_eq!(counts, vec![11, 20, 10]);
        assert_eq!(&l.block[11..21], &[2; 10]);
    }

    #[test]
    fn one_block_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut edges, mut pairs) = (0.0, 0.0);
        for _ in 0..200 {
            let g = sample_graph(1.0, LabelEncoding::Scalar, &mut rng).unwrap();
            let n = g.order();
            assert!((MIN_NODES..=MAX_NODES).contains(&n));
            assert!(g.features().iter().all(|v| *v == 0.0));
            edges += g.edge_count() as f64;
            pairs += (n * (n - 1) / 2) as f64;
        }
        assert!((edges / pairs - 0.9).abs() <= 0.02);
    }

    #[test]
    fn split_density_tracks_formula() {
        let x = 3.4;
        let p = split_probability(x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut edges, mut pairs) = (0.0, 0.0);
        for _ in 0..500 {
            let g = sample_graph(x, LabelEncoding::Scalar, &mut rng).unwrap();
            let layout = block_layout(x, g.order()).unwrap();
            for i in 0..g.order() {
                for j in 0..g.order() {
                    if layout.block[i] == 0 && layout.block[j] == 3 {
                        edges += g.adjacency()[(i, j)];
                        pairs += 1.0;
                    }
                }
            }
        }
        assert!((edges / pairs - p).abs() <= 0.03);
    }

    #[test]
    fn labels_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..60 {
            let x = 1.0 + 5.0 * i as f64 / 59.0;
            let g = sample_graph(x, LabelEncoding::Scalar, &mut rng).unwrap();
            let top = x.ceil() - 1.0;
            assert!(g.features().iter().all(|v| *v >= 0.0 && *v <= top && v.fract() == 0.0));
        }
        let g = sample_graph(6.0, LabelEncoding::Scalar, &mut rng).unwrap();
        let max = g.features().iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 5.0);
    }

    #[test]
    fn one_hot_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = sample_graph(4.7, LabelEncoding::OneHot, &mut rng).unwrap();
        assert_eq!(g.feature_dim(), LABEL_COUNT);
        for i in 0..g.order() {
            assert_eq!(g.features().row(i).sum(), 1.0);
        }
    }

    #[test]
    fn seeded_generation() {
        let a = sample_graph(3.3, LabelEncoding::Scalar, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_graph(3.3, LabelEncoding::Scalar, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let d1 = make_dataset(5, 11, LabelEncoding::Scalar).unwrap();
        let d2 = make_dataset(5, 11, LabelEncoding::Scalar).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(make_dataset(1, 11, LabelEncoding::Scalar).unwrap().len(), 1);
        assert!(make_dataset(0, 11, LabelEncoding::Scalar).is_err());
        // Prefix stability of the per-sample seeds.
        let d3 = make_dataset(3, 11, LabelEncoding::Scalar).unwrap();
        assert_eq!(d3.graphs[..], d1.graphs[..3]);
        assert!(d1.inputs.iter().all(|x| (X_MIN..=X_MAX).contains(&x[0])));
    }
}
