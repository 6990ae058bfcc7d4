//! Finite Markov chains: validated transition matrices, stationary
//! distributions and seeded trajectory sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
const STATIONARY_TOLERANCE: f64 = 1e-10;
const STATIONARY_MAX_SWEEPS: usize = 1_000_000;

/// Square row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    size: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidModel("transition matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidModel(format!(
                    "transition matrix row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidModel(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(StochasticMatrix {
            size,
            data: rows.concat(),
        })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        StochasticMatrix { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.size..(from + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    /// Every state reaches every other state.
    pub fn is_irreducible(&self) -> bool {
        (0..self.size).all(|start| {
            let mut seen = vec![false; self.size];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..self.size {
                    if self.get(i, j) > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        })
    }

    /// Draws the successor of `from` using one uniform variate.
    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = self.row(from);
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // rounding left u above the cumulative sum; take the last reachable state
        row.iter().rposition(|&p| p > 0.0).unwrap_or(from)
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        StochasticMatrix::new(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.rows()
    }
}

/// Solves `pi P = pi` by power iteration on the lazy chain `(I + P) / 2`,
/// which shares `P`'s stationary vector and converges for periodic chains.
pub fn stationary_distribution(matrix: &StochasticMatrix) -> Result<Vec<f64>> {
    if !matrix.is_irreducible() {
        return Err(Error::NoUniqueStationary);
    }
    let n = matrix.size();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_SWEEPS {
        let mut next = vec![0.0; n];
        for (i, &mass) in pi.iter().enumerate() {
            next[i] += 0.5 * mass;
            for (j, slot) in next.iter_mut().enumerate() {
                *slot += 0.5 * mass * matrix.get(i, j);
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if delta < STATIONARY_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(Error::NoUniqueStationary)
}

/// Markov trajectory of `length` states beginning at `initial`.
pub fn sample_chain(matrix: &StochasticMatrix, initial: usize, length: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(length);
    let mut state = initial;
    for i in 0..length {
        if i > 0 {
            state = matrix.step(state, &mut rng);
        }
        path.push(state);
    }
    path
}

/// Transition matrix of the harvest chain used in the reference setup.
pub fn reference_harvest_matrix() -> StochasticMatrix {
    StochasticMatrix::new(vec![
        vec![0.3, 0.7, 0.0, 0.0],
        vec![0.25, 0.5, 0.25, 0.0],
        vec![0.0, 0.25, 0.5, 0.25],
        vec![0.0, 0.0, 0.7, 0.3],
    ])
    .expect("reference harvest matrix is stochastic")
}

/// Good/normal/bad channel-gain chain of the reference setup.
pub fn reference_gain_matrix() -> StochasticMatrix {
    StochasticMatrix::new(vec![vec![0.3, 0.7, 0.0], vec![0.25, 0.5, 0.25], vec![0.0, 0.7, 0.3]])
        .expect("reference gain matrix is stochastic")
}
