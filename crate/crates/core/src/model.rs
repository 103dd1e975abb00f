//! Shared tables for one `(m, H, basis)` configuration.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::perm::{FixingSubgroup, Permutation, SymmetricGroup};
use crate::repr::{Basis, Mat, Rho1Table};

#[derive(Clone, Debug)]
pub struct Model {
    pub group: SymmetricGroup,
    pub h: FixingSubgroup,
    pub basis: Basis,
    pub rho: Rho1Table,
    /// `M_H = E_{h∈H} ρ¹(h)`.
    pub m_h: Mat,
    /// `g(K) = E_{y∈K} ρ¹(y)` for every coset.
    pub coset_g: Vec<Mat>,
    /// `classes[j-1][r-1]`: elements ranking alternative `j` at rank `r`.
    pub classes: Vec<Vec<Vec<u32>>>,
}

impl Model {
    pub fn new(m: usize, partition: &[Vec<usize>]) -> Result<Self> {
        Self::with_basis(FixingSubgroup::new(m, partition)?, Basis::helmert(m)?)
    }

    pub fn trivial(m: usize) -> Result<Self> {
        Self::with_basis(FixingSubgroup::trivial(m)?, Basis::helmert(m)?)
    }

    pub fn winner(m: usize) -> Result<Self> {
        Self::with_basis(FixingSubgroup::winner(m)?, Basis::helmert(m)?)
    }

    pub fn with_basis(h: FixingSubgroup, basis: Basis) -> Result<Self> {
        let m = h.m();
        let group = SymmetricGroup::new(m)?;
        let rho = Rho1Table::new(&group, &basis);
        let m_h = mean_representation(h.members(), &rho);
        let coset_g = h
            .cosets()
            .iter()
            .map(|c| mean_representation(&c.members, &rho))
            .collect();
        let mut classes = vec![vec![Vec::new(); m]; m];
        for x in 0..group.order() {
            for (j, class) in classes.iter_mut().enumerate() {
                class[group.rank(x, j + 1) - 1].push(x as u32);
            }
        }
        Ok(Model {
            group,
            h,
            basis,
            rho,
            m_h,
            coset_g,
            classes,
        })
    }

    pub fn m(&self) -> usize {
        self.group.m()
    }

    /// `|S_m|`.
    pub fn order(&self) -> usize {
        self.group.order()
    }
}

/// `E_{y∈set} ρ¹(y)` for an arbitrary set of permutations.
pub fn mean_representation(set: &[Permutation], rho: &Rho1Table) -> Mat {
    let d = rho.m() - 1;
    let sum = set
        .iter()
        .fold(DMatrix::zeros(d, d), |acc: Mat, y| acc + rho.get(y.lex_index()));
    sum / set.len() as f64
}
