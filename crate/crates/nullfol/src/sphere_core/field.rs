use crate::error::{invalid, Result};

/// Tensor type of a leaf field. Components are covariant and refer to the
/// round frame `(∂_θ, ∂_φ / sinθ)` at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    OneForm,
    SymTraceless2,
    /// Generic covariant tensor of the given order (derivatives, Hessians).
    Tensor(u8),
}

impl Rank {
    pub fn order(self) -> usize {
        match self {
            Rank::Scalar => 0,
            Rank::OneForm => 1,
            Rank::SymTraceless2 => 2,
            Rank::Tensor(k) => k as usize,
        }
    }

    /// Components per node, `2^order`.
    pub fn n_comp(self) -> usize {
        1 << self.order()
    }

    /// Canonical rank for an order (0 → scalar, 1 → one-form, else generic).
    pub fn of_order(k: usize) -> Rank {
        match k {
            0 => Rank::Scalar,
            1 => Rank::OneForm,
            _ => Rank::Tensor(k as u8),
        }
    }
}

/// A tensor field sampled at the grid nodes, node-major with `2^order`
/// components per node (first index most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct LeafField {
    rank: Rank,
    values: Vec<f64>,
}

impl LeafField {
    pub fn new(rank: Rank, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % rank.n_comp(), 0);
        Self { rank, values }
    }

    pub fn zeros(rank: Rank, n_nodes: usize) -> Self {
        Self::new(rank, vec![0.0; n_nodes * rank.n_comp()])
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self::new(Rank::Scalar, values)
    }

    pub fn constant(c: f64, n_nodes: usize) -> Self {
        Self::scalar(vec![c; n_nodes])
    }

    pub fn one_form(values: Vec<f64>) -> Self {
        Self::new(Rank::OneForm, values)
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.rank.n_comp()
    }

    /// Components at node `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        let nc = self.rank.n_comp();
        &self.values[k * nc..(k + 1) * nc]
    }

    pub fn with_rank(mut self, rank: Rank) -> Self {
        assert_eq!(rank.n_comp(), self.rank.n_comp());
        self.rank = rank;
        self
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.rank, self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self::new(
            self.rank,
            self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        )
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar(&self, f: &LeafField) -> Self {
        let nc = self.rank.n_comp();
        assert_eq!(f.values.len() * nc, self.values.len());
        let mut out = self.values.clone();
        for (k, chunk) in out.chunks_mut(nc).enumerate() {
            chunk.iter_mut().for_each(|v| *v *= f.values[k]);
        }
        Self::new(self.rank, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.rank, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_rank(&self, rank: Rank, what: &str) -> Result<()> {
        if self.rank.order() != rank.order() {
            return invalid(format!("{what}: expected {rank:?}, got {:?}", self.rank));
        }
        Ok(())
    }
}
