//! Full-boundary dynamic time warping with unweighted steps (1,0), (0,1), (1,1).
//!
//! One engine serves posteriorgram distances, MCD and the frame pairing used
//! by the F0 metrics; callers plug in the local cost.
//!
//! Among paths with minimal cumulative cost the shortest one is kept, so the
//! result is unique and independent of argument order for symmetric costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    /// Aligned index pairs from (0, 0) to (len_a - 1, len_b - 1).
    pub path: Vec<(usize, usize)>,
    /// Local cost of every path cell.
    pub step_costs: Vec<f64>,
    /// Sum of `step_costs` divided by the path length.
    pub mean_cost: f64,
}

/// How the accumulated path cost is turned into a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostAveraging {
    /// Mean over alignment steps.
    #[default]
    PathLength,
    /// Total cost divided by the longer input length.
    LongerSequence,
    /// Total cost, unnormalized.
    Total,
}

impl DtwResult {
    pub fn total_cost(&self) -> f64 {
        self.step_costs.iter().sum()
    }

    pub fn averaged(&self, averaging: CostAveraging) -> f64 {
        match averaging {
            CostAveraging::PathLength => self.mean_cost,
            CostAveraging::LongerSequence => {
                let (i, j) = *self.path.last().expect("path is never empty");
                self.total_cost() / (i.max(j) + 1) as f64
            }
            CostAveraging::Total => self.total_cost(),
        }
    }

    /// Identity alignment of two equally long sequences.
    pub fn diagonal(len: usize, step_costs: Vec<f64>) -> Self {
        assert_eq!(len, step_costs.len());
        let mean_cost = if len == 0 { 0.0 } else { step_costs.iter().sum::<f64>() / len as f64 };
        Self {
            path: (0..len).map(|i| (i, i)).collect(),
            step_costs,
            mean_cost,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    cost: f64,
    len: usize,
    from: u8,
}

const FROM_DIAG: u8 = 0;
const FROM_UP: u8 = 1;
const FROM_LEFT: u8 = 2;

fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Aligns sequences of lengths `n` and `m` under `cost(i, j)`.
pub fn dtw<F>(n: usize, m: usize, mut cost: F) -> Result<DtwResult>
where
    F: FnMut(usize, usize) -> f64,
{
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput(format!("cannot align sequences of length {n} and {m}")));
    }
    let mut local = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::Degenerate(format!("non-finite local cost at ({i}, {j})")));
            }
            local[i * m + j] = c;
        }
    }

    let mut acc = vec![
        Cell {
            cost: 0.0,
            len: 0,
            from: FROM_DIAG
        };
        n * m
    ];
    for i in 0..n {
        for j in 0..m {
            let c = local[i * m + j];
            let cell = if i == 0 && j == 0 {
                Cell { cost: c, len: 1, from: FROM_DIAG }
            } else {
                let mut best: Option<(f64, usize, u8)> = None;
                let mut consider = |prev: &Cell, from: u8| {
                    let cand = (prev.cost + c, prev.len + 1);
                    if best.is_none_or(|(bc, bl, _)| better(cand, (bc, bl))) {
                        best = Some((cand.0, cand.1, from));
                    }
                };
                if i > 0 && j > 0 {
                    consider(&acc[(i - 1) * m + j - 1], FROM_DIAG);
                }
                if i > 0 {
                    consider(&acc[(i - 1) * m + j], FROM_UP);
                }
                if j > 0 {
                    consider(&acc[i * m + j - 1], FROM_LEFT);
                }
                let (cost, len, from) = best.expect("at least one predecessor");
                Cell { cost, len, from }
            };
            acc[i * m + j] = cell;
        }
    }

    let mut path = Vec::with_capacity(acc[n * m - 1].len);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        path.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match acc[i * m + j].from {
            FROM_DIAG => {
                i -= 1;
                j -= 1;
            }
            FROM_UP => i -= 1,
            _ => j -= 1,
        }
    }
    path.reverse();
    let step_costs: Vec<f64> = path.iter().map(|&(i, j)| local[i * m + j]).collect();
    let end = acc[n * m - 1];
    Ok(DtwResult {
        mean_cost: end.cost / end.len as f64,
        path,
        step_costs,
    })
}
