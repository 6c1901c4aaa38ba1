//! Linearizations of the model around one core or one diagonal factor.

use super::contraction::{contract_all, Leg};
use super::{evaluate, SvdInsTnModel};
use crate::error::{invalid, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Contraction of every core and diagonal except core `k`, as the matrix
/// `M_k` with `unfold_mode(X, k) = unfold_mode(G_k, k) · M_k`.
///
/// Rows follow the bonds of core `k` (other cores ascending, first fastest),
/// columns follow the remaining physical modes ascending.
pub fn env_matrix_core(model: &SvdInsTnModel, k: usize) -> Result<Matrix> {
    let n = model.order();
    if k >= n {
        return Err(invalid!("core {k} out of range for order {n}"));
    }
    let items = model.labeled(model.absorbed_cores(Some(k), None), Some(k));
    let acc = contract_all(items).expect("order >= 2 leaves at least one core");
    let rows: Vec<Leg> = (0..n).filter(|&j| j != k).map(|j| Leg::bond(j, k)).collect();
    let cols: Vec<Leg> = (0..n).filter(|&j| j != k).map(Leg::Phys).collect();
    Ok(acc.unfold(&rows, &cols))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeStrategy {
    /// Factored when the explicit columns would exceed a size budget.
    #[default]
    Auto,
    /// Explicit columns built by full network evaluations (reference route).
    Dense,
    /// Explicit columns built from the host-core environment.
    Columns,
    /// Never forms the columns; works through Gram products.
    Factored,
}

/// Column budget (in entries) above which `Auto` switches to `Factored`.
const COLUMN_BUDGET: usize = 1 << 24;

#[derive(Clone, Debug)]
enum Repr {
    Columns {
        // ∏I x R; rows follow either vec(X) or the mode-t unfolding of X
        columns: Matrix,
        mode_t_layout: bool,
    },
    Factored {
        host: Matrix,
        env: Matrix,
        blocks: Vec<Vec<usize>>,
    },
}

/// The environment `H_{t,l}` of one diagonal factor: column `r` is the
/// vectorized network with `s_{t,l}` replaced by the `r`-th unit vector, so
/// that `vec(evaluate(model)) = H_{t,l} s_{t,l}`.
#[derive(Clone, Debug)]
pub struct EdgeEnvironment {
    t: usize,
    l: usize,
    rank: usize,
    gram: Matrix,
    repr: Repr,
}

impl EdgeEnvironment {
    pub fn edge(&self) -> (usize, usize) {
        (self.t, self.l)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `H_{t,l}ᵀ H_{t,l}`
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.repr, Repr::Factored { .. })
    }

    /// `H_{t,l}ᵀ vec(y)`
    pub fn proj(&self, y: &DenseTensor) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Columns {
                columns,
                mode_t_layout,
            } => {
                let unfolded;
                let flat: &[f64] = if *mode_t_layout {
                    unfolded = y.unfold_mode(self.t)?;
                    unfolded.data()
                } else {
                    y.data()
                };
                if flat.len() != columns.rows() {
                    return Err(invalid!(
                        "tensor has {} entries, environment expects {}",
                        flat.len(),
                        columns.rows()
                    ));
                }
                Ok((0..self.rank)
                    .map(|r| columns.column(r).iter().zip(flat).map(|(a, b)| a * b).sum())
                    .collect())
            }
            Repr::Factored { host, env, blocks } => {
                let yu = y.unfold_mode(self.t)?;
                if yu.rows() != host.rows() || yu.cols() != env.cols() {
                    return Err(invalid!("tensor shape {:?} does not match the model", y.shape()));
                }
                let z = yu.matmul_tr(env);
                Ok(blocks
                    .iter()
                    .map(|block| {
                        block
                            .iter()
                            .map(|&a| host.column(a).iter().zip(z.column(a)).map(|(g, v)| g * v).sum::<f64>())
                            .sum()
                    })
                    .collect())
            }
        }
    }
}

/// Explicit `H_{t,l}` built column by column from full evaluations.
pub fn dense_edge_matrix(model: &SvdInsTnModel, t: usize, l: usize) -> Result<Matrix> {
    check_edge(model, t, l)?;
    let rank = model.ranks().get(t, l);
    let mut data = Vec::with_capacity(rank * model.dims().iter().product::<usize>());
    for r in 0..rank {
        let mut unit = vec![0.0; rank];
        unit[r] = 1.0;
        data.extend_from_slice(evaluate(&model.with_diagonal(t, l, unit)?).data());
    }
    let rows = data.len() / rank;
    Matrix::new(rows, rank, data)
}

fn check_edge(model: &SvdInsTnModel, t: usize, l: usize) -> Result<()> {
    if t >= l || l >= model.order() {
        Err(invalid!("invalid edge ({t}, {l}) for order {}", model.order()))
    } else {
        Ok(())
    }
}

pub fn env_edge(model: &SvdInsTnModel, t: usize, l: usize) -> Result<EdgeEnvironment> {
    env_edge_with(model, t, l, EdgeStrategy::Auto)
}

pub fn env_edge_with(
    model: &SvdInsTnModel,
    t: usize,
    l: usize,
    strategy: EdgeStrategy,
) -> Result<EdgeEnvironment> {
    check_edge(model, t, l)?;
    let rank = model.ranks().get(t, l);
    if strategy == EdgeStrategy::Dense {
        let columns = dense_edge_matrix(model, t, l)?;
        return Ok(EdgeEnvironment {
            t,
            l,
            rank,
            gram: columns.tr_matmul(&columns),
            repr: Repr::Columns {
                columns,
                mode_t_layout: false,
            },
        });
    }

    // Host the edge on core t: contract everything else with every diagonal
    // except s_{t,l} merged into the cores other than t.
    let n = model.order();
    let items = model.labeled(model.absorbed_cores(Some(t), Some((t, l))), Some(t));
    let acc = contract_all(items).expect("order >= 2 leaves at least one core");
    let bond_rows: Vec<Leg> = (0..n).filter(|&j| j != t).map(|j| Leg::bond(j, t)).collect();
    let phys_cols: Vec<Leg> = (0..n).filter(|&j| j != t).map(Leg::Phys).collect();
    let env = acc.unfold(&bond_rows, &phys_cols);
    let host = model.core(t).unfold_mode(t)?;

    // Bond (t,l) sits at position l-1 among the bonds of core t.
    let stride: usize = (0..n)
        .filter(|&j| j != t && j < l)
        .map(|j| model.ranks().get(j, t))
        .product();
    let mut blocks = vec![Vec::new(); rank];
    for a in 0..host.cols() {
        blocks[(a / stride) % rank].push(a);
    }

    let entries = rank * host.rows() * env.cols();
    let factored = match strategy {
        EdgeStrategy::Factored => true,
        EdgeStrategy::Columns => false,
        _ => entries > COLUMN_BUDGET,
    };
    if factored {
        let ggt = host.tr_matmul(&host);
        let mmt = env.matmul_tr(&env);
        let gram = Matrix::from_fn(rank, rank, |r, q| {
            let mut acc = 0.0;
            for &b in &blocks[q] {
                for &a in &blocks[r] {
                    acc += ggt.get(a, b) * mmt.get(a, b);
                }
            }
            acc
        });
        return Ok(EdgeEnvironment {
            t,
            l,
            rank,
            gram,
            repr: Repr::Factored { host, env, blocks },
        });
    }

    let len = host.rows() * env.cols();
    let mut data = Vec::with_capacity(entries);
    for block in &blocks {
        let y = host.select_columns(block).matmul(&env.select_rows(block));
        data.extend_from_slice(y.data());
    }
    let columns = Matrix::new(len, rank, data)?;
    Ok(EdgeEnvironment {
        t,
        l,
        rank,
        gram: columns.tr_matmul(&columns),
        repr: Repr::Columns {
            columns,
            mode_t_layout: true,
        },
    })
}
