use super::StreetGraph;
use crate::tensor::Tensor;

/// `a` is the 0/1 adjacency with self-loops, `degree` its row sums and
/// `a_tilde = D^{-1/2} a D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub a: Tensor,
    pub degree: Vec<f64>,
    pub a_tilde: Tensor,
}

impl AdjacencyMatrix {
    /// Normalizes a dense symmetric 0/1 matrix whose diagonal is already set.
    pub fn from_self_looped(n: usize, a: Vec<f64>) -> Self {
        let degree: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum()).collect();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let aij = a[i * n + j];
                if aij != 0.0 {
                    // Same operand order for (i, j) and (j, i) keeps Ã exactly symmetric.
                    let (lo, hi) = (i.min(j), i.max(j));
                    t[i * n + j] = inv_sqrt[lo] * aij * inv_sqrt[hi];
                }
            }
        }
        Self {
            a: Tensor::matrix(n, n, a).expect("n*n entries"),
            degree,
            a_tilde: Tensor::matrix(n, n, t).expect("n*n entries"),
        }
    }

    /// Self-loops only: `a = a_tilde = I`.
    pub fn identity(n: usize) -> Self {
        Self {
            a: Tensor::identity(n),
            degree: vec![1.0; n],
            a_tilde: Tensor::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    /// Sum of `a`, including the diagonal.
    pub fn total(&self) -> f64 {
        self.a.data().iter().sum()
    }
}

/// Adds self-loops and symmetrically normalizes the adjacency of `g`.
pub fn normalize_adjacency(g: &StreetGraph) -> AdjacencyMatrix {
    let n = g.num_nodes();
    let mut a = g.adjacency_dense();
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    AdjacencyMatrix::from_self_looped(n, a)
}
