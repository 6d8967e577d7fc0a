//! Labeled graphs as metric measure spaces.
//!
//! A graph of `n` nodes is a pair `(C, F)` of a symmetric `n x n` structure
//! matrix and an `n x d` feature matrix. Node weights are always uniform
//! (`1/n`) and therefore never stored.
//!
//! [`LabeledGraph`] holds discrete graphs (binary adjacency) such as training
//! targets. [`RelaxedGraph`] holds continuous graphs with adjacency entries in
//! `[0, 1]`, which is what barycentric predictors output.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maximum tolerated asymmetry before an adjacency matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Read access to the `(C, F)` pair of a graph with uniform node weights.
pub trait MeasureGraph {
    fn adjacency(&self) -> &DMatrix<f64>;
    fn features(&self) -> &DMatrix<f64>;

    fn order(&self) -> usize {
        self.adjacency().nrows()
    }

    fn feature_dim(&self) -> usize {
        self.features().ncols()
    }
}

/// A discrete labeled graph: binary symmetric adjacency and one feature row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    c: DMatrix<f64>,
    f: DMatrix<f64>,
}

/// A continuous relaxed graph: symmetric adjacency with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedGraph {
    c: DMatrix<f64>,
    f: DMatrix<f64>,
}

fn check_shapes(c: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<()> {
    if c.nrows() != c.ncols() {
        return Err(Error::NonSquare {
            rows: c.nrows(),
            cols: c.ncols(),
        });
    }
    if c.nrows() == 0 {
        return Err(Error::EmptyGraph);
    }
    if f.nrows() != c.nrows() {
        return Err(Error::RowCountMismatch {
            nodes: c.nrows(),
            features: f.nrows(),
        });
    }
    Ok(())
}

fn max_asymmetry(c: &DMatrix<f64>) -> f64 {
    let n = c.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    worst
}

fn check_finite(c: &DMatrix<f64>) -> Result<()> {
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            let value = c[(i, j)];
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j, value });
            }
        }
    }
    Ok(())
}

impl LabeledGraph {
    /// Validates and builds a discrete graph.
    pub fn new(c: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        check_shapes(&c, &f)?;
        check_finite(&c)?;
        check_finite(&f)?;
        for j in 0..c.ncols() {
            for i in 0..c.nrows() {
                let value = c[(i, j)];
                if value != 0.0 && value != 1.0 {
                    return Err(Error::NonBinaryEntry { row: i, col: j, value });
                }
            }
        }
        let asym = max_asymmetry(&c);
        if asym > SYMMETRY_TOL {
            return Err(Error::AsymmetricAdjacency(asym));
        }
        Ok(Self { c, f })
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.c, self.f)
    }

    pub fn to_relaxed(&self) -> RelaxedGraph {
        RelaxedGraph {
            c: self.c.clone(),
            f: self.f.clone(),
        }
    }

    /// Number of undirected edges, self-loops counted once.
    pub fn edge_count(&self) -> usize {
        let n = self.order();
        let mut count = 0;
        for i in 0..n {
            for j in i..n {
                if self.c[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}

impl RelaxedGraph {
    /// Builds a relaxed graph, symmetrizing float drift up to [`SYMMETRY_TOL`]
    /// and clamping adjacency entries to `[0, 1]`.
    pub fn new(mut c: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        check_shapes(&c, &f)?;
        check_finite(&c)?;
        check_finite(&f)?;
        let asym = max_asymmetry(&c);
        if asym > SYMMETRY_TOL {
            return Err(Error::AsymmetricAdjacency(asym));
        }
        symmetrize_and_clamp(&mut c);
        Ok(Self { c, f })
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.c, self.f)
    }
}

/// Replaces `c` by `(c + c^T) / 2` and clamps every entry to `[0, 1]`.
pub fn symmetrize_and_clamp(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    for i in 0..n {
        c[(i, i)] = c[(i, i)].clamp(0.0, 1.0);
        for j in (i + 1)..n {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(0.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

impl MeasureGraph for LabeledGraph {
    fn adjacency(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn features(&self) -> &DMatrix<f64> {
        &self.f
    }
}

impl MeasureGraph for RelaxedGraph {
    fn adjacency(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn features(&self) -> &DMatrix<f64> {
        &self.f
    }
}

/// A bijection on `{0, .., n-1}`; node `i` is sent to `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
}

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n {
                return Err(Error::InvalidPermutation(format!("image {p} >= {n}")));
            }
            if seen[p] {
                return Err(Error::InvalidPermutation(format!("image {p} repeated")));
            }
            seen[p] = true;
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.perm[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }

    /// The `n x n` permutation matrix `P` with `P[i, perm[i]] = 1`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut p = DMatrix::zeros(n, n);
        for (i, &j) in self.perm.iter().enumerate() {
            p[(i, j)] = 1.0;
        }
        p
    }
}

fn permute_parts(
    c: &DMatrix<f64>,
    f: &DMatrix<f64>,
    p: &Permutation,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = c.nrows();
    if p.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let mut c2 = DMatrix::zeros(n, n);
    let mut f2 = DMatrix::zeros(n, f.ncols());
    for i in 0..n {
        let pi = p.apply(i);
        for j in 0..n {
            c2[(pi, p.apply(j))] = c[(i, j)];
        }
        f2.set_row(pi, &f.row(i));
    }
    Ok((c2, f2))
}

/// Relabels nodes: `C'[p(i), p(j)] = C[i, j]` and `F'[p(i)] = F[i]`.
pub fn permute(g: &LabeledGraph, p: &Permutation) -> Result<LabeledGraph> {
    let (c, f) = permute_parts(&g.c, &g.f, p)?;
    Ok(LabeledGraph { c, f })
}

/// Same as [`permute`] for relaxed graphs.
pub fn permute_relaxed(g: &RelaxedGraph, p: &Permutation) -> Result<RelaxedGraph> {
    let (c, f) = permute_parts(&g.c, &g.f, p)?;
    Ok(RelaxedGraph { c, f })
}

/// One-hot encoding: row `i` is the basis vector `e_{labels[i]}` of `R^d`.
pub fn one_hot_features(labels: &[usize], d: usize) -> Result<DMatrix<f64>> {
    let mut f = DMatrix::zeros(labels.len(), d);
    for (i, &label) in labels.iter().enumerate() {
        if label >= d {
            return Err(Error::LabelOutOfRange { label, dim: d });
        }
        f[(i, label)] = 1.0;
    }
    Ok(f)
}

/// `L = I - D^{-1/2} C D^{-1/2}`. Isolated nodes get a zero scaled row and
/// column, so `L[i, i] = 1` for them.
pub fn normalized_laplacian(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = c.row(i).sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - inv_sqrt[i] * c[(i, j)] * inv_sqrt[j]
    })
}

/// Heat-kernel diffusion of node features: `exp(-tau * L) F`, with `L` the
/// normalized Laplacian of `c`.
pub fn diffuse_features(c: &DMatrix<f64>, f: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    if c.nrows() != c.ncols() {
        return Err(Error::NonSquare {
            rows: c.nrows(),
            cols: c.ncols(),
        });
    }
    if f.nrows() != c.nrows() {
        return Err(Error::RowCountMismatch {
            nodes: c.nrows(),
            features: f.nrows(),
        });
    }
    if tau == 0.0 {
        return Ok(f.clone());
    }
    let lap = normalized_laplacian(c);
    let eig = SymmetricEigen::new(lap);
    let q = &eig.eigenvectors;
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|lambda| (-tau * lambda).exp()));
    let heat = q * decay * q.transpose();
    Ok(heat * f)
}

/// How features are treated when a relaxed graph is sampled into a discrete one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureDiscretization {
    /// Features are copied unchanged.
    #[default]
    Keep,
    /// Each row becomes the basis vector of its largest entry (lowest index on ties).
    SnapOneHot,
}

/// Draws a discrete graph whose edge `(i, j)`, `i < j`, is present with
/// probability `C[i, j]`. The diagonal is forced to zero.
pub fn bernoulli_sample(
    z: &RelaxedGraph,
    seed: u64,
    features: FeatureDiscretization,
) -> LabeledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bernoulli_sample_with(z, &mut rng, features)
}

/// [`bernoulli_sample`] drawing from a caller-supplied generator.
pub fn bernoulli_sample_with<R: Rng + ?Sized>(
    z: &RelaxedGraph,
    rng: &mut R,
    features: FeatureDiscretization,
) -> LabeledGraph {
    let n = z.order();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < z.c[(i, j)] {
                c[(i, j)] = 1.0;
                c[(j, i)] = 1.0;
            }
        }
    }
    let f = match features {
        FeatureDiscretization::Keep => z.f.clone(),
        FeatureDiscretization::SnapOneHot => snap_one_hot(&z.f),
    };
    LabeledGraph { c, f }
}

fn snap_one_hot(f: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(f.nrows(), f.ncols());
    for i in 0..f.nrows() {
        let mut best = 0;
        for k in 1..f.ncols() {
            if f[(i, k)] > f[(i, best)] {
                best = k;
            }
        }
        if f.ncols() > 0 {
            out[(i, best)] = 1.0;
        }
    }
    out
}

/// Connected components of the graph with an edge wherever `c[i, j] > threshold`.
pub fn connected_components(c: &DMatrix<f64>, threshold: f64) -> usize {
    let n = c.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && v != u && c[(u, v)] > threshold {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}
