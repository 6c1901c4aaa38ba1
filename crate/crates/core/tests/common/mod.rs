//! Reference implementations shared by the integration tests. Each one is
//! written from the definitions with plain loops and shares no code with the
//! library routines it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svdinstn::network::core_shape;
use svdinstn::{DenseTensor, Matrix, RankMatrix, SvdInsTnModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-major linear offset.
pub fn offset(shape: &[usize], index: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (&i, &d) in index.iter().zip(shape) {
        off += i * stride;
        stride *= d;
    }
    off
}

/// Steps a multi-index through `shape`, first index fastest. Returns false
/// after the last index.
pub fn advance(index: &mut [usize], shape: &[usize]) -> bool {
    for (i, &d) in index.iter_mut().zip(shape) {
        *i += 1;
        if *i < d {
            return true;
        }
        *i = 0;
    }
    false
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> DenseTensor {
    let n = shape.iter().product();
    DenseTensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_model(dims: &[usize], ranks: &RankMatrix, rng: &mut impl Rng) -> SvdInsTnModel {
    let cores = (0..dims.len()).map(|k| random_tensor(&core_shape(dims, ranks, k), rng)).collect();
    let diagonals = ranks
        .edges()
        .map(|(t, l)| (0..ranks.get(t, l)).map(|_| rng.random_range(0.25..1.5)).collect())
        .collect();
    SvdInsTnModel::new(dims.to_vec(), ranks.clone(), cores, diagonals).unwrap()
}

pub fn random_ranks(order: usize, max_rank: usize, rng: &mut impl Rng) -> RankMatrix {
    RankMatrix::from_fn(order, |_, _| rng.random_range(1..=max_rank)).unwrap()
}

/// Every entry of the network by explicit summation over all bond indices.
pub fn nested_sum_evaluate(model: &SvdInsTnModel) -> DenseTensor {
    let n = model.order();
    let dims = model.dims().to_vec();
    let ranks = model.ranks();
    let edges: Vec<(usize, usize)> = ranks.edges().collect();
    let bond_shape: Vec<usize> = edges.iter().map(|&(t, l)| ranks.get(t, l)).collect();
    let mut out = vec![0.0; dims.iter().product()];
    let mut phys = vec![0usize; n];
    loop {
        let mut total = 0.0;
        let mut bonds = vec![0usize; edges.len()];
        loop {
            let mut term = 1.0;
            for (e, s) in model.diagonals().iter().enumerate() {
                term *= s[bonds[e]];
            }
            for (k, core) in model.cores().iter().enumerate() {
                let idx: Vec<usize> = (0..n)
                    .map(|j| {
                        if j == k {
                            phys[k]
                        } else {
                            let (a, b) = (j.min(k), j.max(k));
                            bonds[edges.iter().position(|&e| e == (a, b)).unwrap()]
                        }
                    })
                    .collect();
                term *= core.data()[offset(core.shape(), &idx)];
            }
            total += term;
            if !advance(&mut bonds, &bond_shape) {
                break;
            }
        }
        out[offset(&dims, &phys)] = total;
        if !advance(&mut phys, &dims) {
            break;
        }
    }
    DenseTensor::new(dims, out).unwrap()
}

/// Contraction by looping over every index combination; output layout is
/// the free modes of `a` then those of `b`, each ascending.
pub fn loop_contract(a: &DenseTensor, ma: &[usize], b: &DenseTensor, mb: &[usize]) -> DenseTensor {
    let free_a: Vec<usize> = (0..a.order()).filter(|m| !ma.contains(m)).collect();
    let free_b: Vec<usize> = (0..b.order()).filter(|m| !mb.contains(m)).collect();
    let mut out_shape: Vec<usize> =
        free_a.iter().map(|&m| a.shape()[m]).chain(free_b.iter().map(|&m| b.shape()[m])).collect();
    if out_shape.is_empty() {
        out_shape.push(1);
    }
    let inner_shape: Vec<usize> = ma.iter().map(|&m| a.shape()[m]).collect();
    let mut out = vec![0.0; out_shape.iter().product()];
    let mut oi = vec![0usize; out_shape.len()];
    loop {
        let mut sum = 0.0;
        let mut ii = vec![0usize; inner_shape.len()];
        loop {
            let mut ia = vec![0usize; a.order()];
            let mut ib = vec![0usize; b.order()];
            for (p, &m) in free_a.iter().enumerate() {
                ia[m] = oi[p];
            }
            for (p, &m) in free_b.iter().enumerate() {
                ib[m] = oi[free_a.len() + p];
            }
            for (p, (&x, &y)) in ma.iter().zip(mb).enumerate() {
                ia[x] = ii[p];
                ib[y] = ii[p];
            }
            sum += a.data()[offset(a.shape(), &ia)] * b.data()[offset(b.shape(), &ib)];
            if inner_shape.is_empty() || !advance(&mut ii, &inner_shape) {
                break;
            }
        }
        out[offset(&out_shape, &oi)] = sum;
        if !advance(&mut oi, &out_shape) {
            break;
        }
    }
    DenseTensor::new(out_shape, out).unwrap()
}

/// Matricization by definition: row index from `rows` modes, column index
/// from `cols` modes, each first-fastest.
pub fn loop_unfold(x: &DenseTensor, rows: &[usize], cols: &[usize]) -> Matrix {
    let shape = x.shape();
    let rshape: Vec<usize> = rows.iter().map(|&m| shape[m]).collect();
    let cshape: Vec<usize> = cols.iter().map(|&m| shape[m]).collect();
    let (nr, nc) = (rshape.iter().product::<usize>(), cshape.iter().product::<usize>());
    let mut m = Matrix::zeros(nr, nc);
    let mut idx = vec![0usize; shape.len()];
    loop {
        let r = offset(&rshape, &rows.iter().map(|&k| idx[k]).collect::<Vec<_>>());
        let c = offset(&cshape, &cols.iter().map(|&k| idx[k]).collect::<Vec<_>>());
        m.set(r, c, x.data()[offset(shape, &idx)]);
        if !advance(&mut idx, shape) {
            break;
        }
    }
    m
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Dense `H_{t,l}` for a model: column `r` is the network evaluated with the
/// diagonal on `(t, l)` set to the `r`-th unit vector, via the nested-sum
/// reference.
pub fn dense_columns(model: &SvdInsTnModel, t: usize, l: usize) -> Vec<Vec<f64>> {
    let rank = model.ranks().get(t, l);
    (0..rank)
        .map(|r| {
            let mut unit = vec![0.0; rank];
            unit[r] = 1.0;
            nested_sum_evaluate(&model.with_diagonal(t, l, unit).unwrap()).into_data()
        })
        .collect()
}
