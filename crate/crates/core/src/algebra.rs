//! Finite-dimensional C*-algebras carried by a faithful block-diagonal matrix
//! representation.
//!
//! Two constructions are supported: direct sums of full matrix algebras
//! `M_{d_1} (+) ... (+) M_{d_k}` with the matrix-unit basis, and group algebras
//! `C[G]` realized through the left regular representation. Elements are
//! coefficient vectors over the distinguished ordered basis.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{invalid, Result};
use crate::linalg::full_svd;
use crate::num::{cabs, cconj, cone, czero, CMatrix, CVector, Real, C};

/// Structural fingerprint of an algebra; two algebras built from the same
/// description share an id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlgebraId(u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    MatrixBlocks,
    GroupAlgebra { order: usize },
}

#[derive(Debug, Clone)]
pub struct Algebra<T: Real> {
    id: AlgebraId,
    origin: Origin,
    block_dims: Vec<usize>,
    /// Side of the represented matrices.
    size: usize,
    basis: Vec<CMatrix<T>>,
    /// `tr(e_a* e_a)`; the basis is orthogonal in the trace inner product.
    norms_sq: Vec<T>,
    unit_coords: CVector<T>,
    involution: Vec<usize>,
    group: Option<GroupTable>,
    /// Sparse coordinates of `e_a e_b`, indexed `a * D + b`.
    products: Vec<Vec<(usize, C<T>)>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element<T: Real> {
    pub algebra: AlgebraId,
    pub coords: CVector<T>,
}

impl<T: Real> Algebra<T> {
    /// `M_{d_1} (+) ... (+) M_{d_k}` with matrix units ordered block by block,
    /// row-major inside each block.
    pub fn from_matrix_blocks(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("block dimensions must be nonempty"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(invalid(format!("block dimension at position {pos} is zero")));
        }
        let size: usize = dims.iter().sum();
        let mut basis = Vec::new();
        let mut unit = Vec::new();
        let mut involution = Vec::new();
        let mut offset = 0;
        for &d in dims {
            let first = basis.len();
            for i in 0..d {
                for j in 0..d {
                    let mut e = CMatrix::zeros(size, size);
                    e[(offset + i, offset + j)] = cone();
                    basis.push(e);
                    unit.push(if i == j { cone() } else { czero() });
                    involution.push(first + j * d + i);
                }
            }
            offset += d;
        }
        let mut h = DefaultHasher::new();
        ("matrix_blocks", dims).hash(&mut h);
        Self::assemble(
            AlgebraId(h.finish()),
            Origin::MatrixBlocks,
            dims.to_vec(),
            size,
            basis,
            CVector::from_vec(unit),
            involution,
            None,
        )
    }

    /// Group algebra `C[G]` from a multiplication table (`table[g][h] = gh`),
    /// realized by the left regular representation.
    pub fn from_group_table(table: &[Vec<usize>], identity: usize) -> Result<Self> {
        let inverses = validate_group(table, identity)?;
        let n = table.len();
        let basis: Vec<CMatrix<T>> = (0..n)
            .map(|g| {
                let mut l = CMatrix::zeros(n, n);
                for h in 0..n {
                    l[(table[g][h], h)] = cone();
                }
                l
            })
            .collect();
        let mut unit = CVector::zeros(n);
        unit[identity] = cone();
        let mut h = DefaultHasher::new();
        ("group", table, identity).hash(&mut h);
        Self::assemble(
            AlgebraId(h.finish()),
            Origin::GroupAlgebra { order: n },
            vec![n],
            n,
            basis,
            unit,
            inverses,
            Some(GroupTable {
                table: table.to_vec(),
                identity,
            }),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        id: AlgebraId,
        origin: Origin,
        block_dims: Vec<usize>,
        size: usize,
        basis: Vec<CMatrix<T>>,
        unit_coords: CVector<T>,
        involution: Vec<usize>,
        group: Option<GroupTable>,
    ) -> Result<Self> {
        let dim = basis.len();
        let mut norms_sq = Vec::with_capacity(dim);
        for (a, ea) in basis.iter().enumerate() {
            for (b, eb) in basis.iter().enumerate().skip(a) {
                let ip = ea.dotc(eb);
                if a == b {
                    norms_sq.push(ip.re);
                } else if cabs(ip) != T::zero() {
                    return Err(invalid(format!("basis elements {a} and {b} are not orthogonal")));
                }
            }
        }
        if norms_sq.iter().any(|&s| s <= T::zero()) {
            return Err(invalid("basis contains a zero matrix"));
        }
        let mut alg = Self {
            id,
            origin,
            block_dims,
            size,
            basis,
            norms_sq,
            unit_coords,
            involution,
            group,
            products: Vec::new(),
        };
        let mut products = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                let coords = alg.expand(&(&alg.basis[a] * &alg.basis[b]));
                products.push(
                    coords
                        .iter()
                        .enumerate()
                        .filter(|(_, z)| cabs(**z) != T::zero())
                        .map(|(g, z)| (g, *z))
                        .collect(),
                );
            }
        }
        alg.products = products;
        Ok(alg)
    }

    pub fn id(&self) -> AlgebraId {
        self.id
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn group_table(&self) -> Option<&GroupTable> {
        self.group.as_ref()
    }

    /// Basis size `D`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Side of the represented matrices.
    pub fn matrix_size(&self) -> usize {
        self.size
    }

    pub fn basis(&self) -> &[CMatrix<T>] {
        &self.basis
    }

    pub fn unit_coords(&self) -> &CVector<T> {
        &self.unit_coords
    }

    /// Index of `(e_a)*` in the basis.
    pub fn involution(&self) -> &[usize] {
        &self.involution
    }

    /// Sparse coordinates of `e_a e_b`.
    pub fn basis_product(&self, a: usize, b: usize) -> &[(usize, C<T>)] {
        &self.products[a * self.dim() + b]
    }

    /// Sparse coordinates of `(e_a)* e_b`, the combination entering the
    /// scalar lift.
    pub fn adjoint_product(&self, a: usize, b: usize) -> &[(usize, C<T>)] {
        self.basis_product(self.involution[a], b)
    }

    pub fn element(&self, coords: CVector<T>) -> Result<Element<T>> {
        if coords.len() != self.dim() {
            return Err(invalid(format!(
                "element has {} coordinates, algebra dimension is {}",
                coords.len(),
                self.dim()
            )));
        }
        Ok(Element {
            algebra: self.id,
            coords,
        })
    }

    pub fn zero(&self) -> Element<T> {
        Element {
            algebra: self.id,
            coords: CVector::zeros(self.dim()),
        }
    }

    pub fn unit(&self) -> Element<T> {
        Element {
            algebra: self.id,
            coords: self.unit_coords.clone(),
        }
    }

    pub fn basis_element(&self, a: usize) -> Element<T> {
        let mut coords = CVector::zeros(self.dim());
        coords[a] = cone();
        Element {
            algebra: self.id,
            coords,
        }
    }

    fn check(&self, a: &Element<T>) -> Result<()> {
        if a.algebra != self.id || a.coords.len() != self.dim() {
            return Err(invalid("element belongs to a different algebra"));
        }
        Ok(())
    }

    /// The represented matrix `sum_a coords_a e_a`.
    pub fn represent(&self, a: &Element<T>) -> Result<CMatrix<T>> {
        self.check(a)?;
        Ok(self.represent_coords(&a.coords))
    }

    pub(crate) fn represent_coords(&self, coords: &CVector<T>) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.size, self.size);
        for (z, e) in coords.iter().zip(&self.basis) {
            if cabs(*z) != T::zero() {
                m += e * *z;
            }
        }
        m
    }

    /// Coordinates of a block-diagonal matrix in the basis (trace pairing
    /// against the orthogonal basis).
    pub fn expand(&self, m: &CMatrix<T>) -> CVector<T> {
        CVector::from_iterator(
            self.dim(),
            self.basis
                .iter()
                .zip(&self.norms_sq)
                .map(|(e, &ns)| e.dotc(m).unscale(ns)),
        )
    }

    pub fn multiply(&self, a: &Element<T>, b: &Element<T>) -> Result<Element<T>> {
        self.check(a)?;
        self.check(b)?;
        let prod = self.represent_coords(&a.coords) * self.represent_coords(&b.coords);
        Ok(Element {
            algebra: self.id,
            coords: self.expand(&prod),
        })
    }

    pub fn adjoint(&self, a: &Element<T>) -> Result<Element<T>> {
        self.check(a)?;
        let mut coords = CVector::zeros(self.dim());
        for (k, z) in a.coords.iter().enumerate() {
            coords[self.involution[k]] = cconj(*z);
        }
        Ok(Element {
            algebra: self.id,
            coords,
        })
    }

    /// `M_a` with `coords(a b) = M_a coords(b)`.
    pub fn left_mult_matrix(&self, a: &Element<T>) -> Result<CMatrix<T>> {
        self.check(a)?;
        Ok(self.left_mult_coords(&a.coords))
    }

    pub(crate) fn left_mult_coords(&self, coords: &CVector<T>) -> CMatrix<T> {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (a, z) in coords.iter().enumerate() {
            if cabs(*z) == T::zero() {
                continue;
            }
            for b in 0..d {
                for &(g, w) in self.basis_product(a, b) {
                    m[(g, b)] += *z * w;
                }
            }
        }
        m
    }

    /// Operator norm of the represented matrix.
    pub fn op_norm(&self, a: &Element<T>) -> Result<T> {
        let m = self.represent(a)?;
        let (sv, _, _) = full_svd(&m);
        Ok(sv.first().copied().unwrap_or_else(T::zero))
    }

    /// Diagonal block `k` of a represented basis matrix.
    pub fn basis_block(&self, a: usize, k: usize) -> CMatrix<T> {
        let off: usize = self.block_dims[..k].iter().sum();
        let d = self.block_dims[k];
        self.basis[a].view((off, off), (d, d)).into_owned()
    }

    /// Same description, so elements and kernels can be exchanged.
    pub fn same_as(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

/// Checks the group axioms and returns the inverse of every element.
fn validate_group(table: &[Vec<usize>], identity: usize) -> Result<Vec<usize>> {
    let n = table.len();
    if n == 0 {
        return Err(invalid("group table is empty"));
    }
    if let Some(g) = table.iter().position(|row| row.len() != n) {
        return Err(invalid(format!("group table is not square: row {g} has {} entries", table[g].len())));
    }
    for (g, row) in table.iter().enumerate() {
        if let Some(h) = row.iter().position(|&x| x >= n) {
            return Err(invalid(format!("closure: entry ({g},{h}) = {} out of range", row[h])));
        }
    }
    if identity >= n {
        return Err(invalid(format!("identity: index {identity} out of range")));
    }
    for g in 0..n {
        if table[identity][g] != g || table[g][identity] != g {
            return Err(invalid(format!("identity: element {identity} does not fix element {g}")));
        }
    }
    for g in 0..n {
        let mut row_seen = vec![false; n];
        let mut col_seen = vec![false; n];
        for h in 0..n {
            row_seen[table[g][h]] = true;
            col_seen[table[h][g]] = true;
        }
        if row_seen.iter().any(|s| !s) {
            return Err(invalid(format!("permutation: row {g} is not a permutation")));
        }
        if col_seen.iter().any(|s| !s) {
            return Err(invalid(format!("permutation: column {g} is not a permutation")));
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(invalid(format!("associativity: ({a}{b}){c} != {a}({b}{c})")));
                }
            }
        }
    }
    let inverses = (0..n)
        .map(|g| {
            (0..n)
                .find(|&h| table[g][h] == identity)
                .expect("latin square has an inverse")
        })
        .collect();
    Ok(inverses)
}

/// Multiplication table of the cyclic group `Z_n`, identity 0.
pub fn cyclic_group_table(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|g| (0..n).map(|h| (g + h) % n).collect()).collect()
}

/// Multiplication table of the symmetric group `S_k` with permutations in
/// lexicographic order (identity first) and product `(s t)(x) = s(t(x))`.
pub fn symmetric_group_table(k: usize) -> Vec<Vec<usize>> {
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        perms.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
    perms
        .iter()
        .map(|s| {
            perms
                .iter()
                .map(|t| index(&t.iter().map(|&x| s[x]).collect()))
                .collect()
        })
        .collect()
}
