//! Contraction of tensors whose modes carry network labels.

use crate::tensor::{DenseTensor, Matrix};

/// Label of one tensor mode inside a network: a physical mode of the data
/// tensor or the bond shared by two cores (stored with `t < l`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    Phys(usize),
    Bond(usize, usize),
}

impl Leg {
    pub fn bond(a: usize, b: usize) -> Leg {
        Leg::Bond(a.min(b), a.max(b))
    }
}

/// Legs of core `k` in a fully-connected network of the given order: mode
/// `j` of the core is the bond to core `j`, mode `k` is physical.
pub fn core_legs(order: usize, k: usize) -> Vec<Leg> {
    (0..order)
        .map(|j| if j == k { Leg::Phys(k) } else { Leg::bond(j, k) })
        .collect()
}

#[derive(Clone, Debug)]
pub(crate) struct Labeled {
    pub tensor: DenseTensor,
    pub legs: Vec<Leg>,
}

impl Labeled {
    pub fn new(tensor: DenseTensor, legs: Vec<Leg>) -> Self {
        debug_assert_eq!(tensor.order(), legs.len());
        Self { tensor, legs }
    }

    fn shares_leg(&self, other: &Labeled) -> bool {
        self.legs.iter().any(|l| other.legs.contains(l))
    }

    /// Contracts every leg the two tensors have in common.
    pub fn contract(&self, other: &Labeled) -> Labeled {
        let mut modes_a = Vec::new();
        let mut modes_b = Vec::new();
        for (i, leg) in self.legs.iter().enumerate() {
            if let Some(j) = other.legs.iter().position(|l| l == leg) {
                modes_a.push(i);
                modes_b.push(j);
            }
        }
        let tensor = DenseTensor::contract(&self.tensor, &modes_a, &other.tensor, &modes_b)
            .expect("labeled legs carry consistent dimensions");
        let legs: Vec<Leg> = self
            .legs
            .iter()
            .enumerate()
            .filter(|(i, _)| !modes_a.contains(i))
            .map(|(_, &l)| l)
            .chain(
                other
                    .legs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !modes_b.contains(j))
                    .map(|(_, &l)| l),
            )
            .collect();
        if legs.is_empty() {
            // full contraction leaves a scalar of shape [1] with no label
            return Labeled {
                tensor,
                legs: Vec::new(),
            };
        }
        Labeled::new(tensor, legs)
    }

    fn positions(&self, legs: &[Leg]) -> Vec<usize> {
        legs.iter()
            .map(|leg| {
                self.legs
                    .iter()
                    .position(|l| l == leg)
                    .unwrap_or_else(|| panic!("leg {leg:?} not present in {:?}", self.legs))
            })
            .collect()
    }

    /// Transposes into the given leg order.
    pub fn arrange(&self, order: &[Leg]) -> DenseTensor {
        assert_eq!(order.len(), self.legs.len(), "arrangement must name every leg");
        self.tensor
            .transpose(&self.positions(order))
            .expect("positions form a permutation")
    }

    pub fn unfold(&self, rows: &[Leg], cols: &[Leg]) -> Matrix {
        self.tensor
            .unfold(&self.positions(rows), &self.positions(cols))
            .expect("legs partition the tensor modes")
    }
}

/// Contracts a collection of labeled tensors. Starting from the first, the
/// next operand is the earliest remaining tensor sharing a leg with the
/// running result (or simply the earliest when none does).
pub(crate) fn contract_all(items: Vec<Labeled>) -> Option<Labeled> {
    let mut remaining = items;
    if remaining.is_empty() {
        return None;
    }
    let mut acc = remaining.remove(0);
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .position(|t| acc.shares_leg(t))
            .unwrap_or(0);
        let operand = remaining.remove(next);
        acc = acc.contract(&operand);
    }
    Some(acc)
}
