//! Dense complex Hermitian matrix kernel.
//!
//! Every operator in the crate is a dense `dim × dim` complex matrix. Spectral
//! functions (square roots, inverse square roots, entropies, fidelities) go
//! through a Hermitian eigendecomposition. Before decomposing, the sparsity
//! pattern is split into connected components: operators built from commuting
//! or block-structured states (classical registers, diagonal outputs) then
//! decompose block by block, which is exact and much cheaper than a full
//! dense solve.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Tolerance for Hermiticity checks on user-supplied matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_TOL` are treated as zero when clipping.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of a density operator's trace from 1.
pub const TRACE_TOL: f64 = 1e-10;
/// Off-diagonal entries below this fraction of the Frobenius norm end a Jacobi sweep.
const JACOBI_FLOOR: f64 = 1e-18;
const JACOBI_MAX_SWEEPS: usize = 30;
/// Eigenvalues below this fraction of the largest one are round-off when
/// square roots enter a fidelity; `√1e-17` would otherwise add `3e-9`.
pub const FIDELITY_FLOOR: f64 = 1e-14;

/// A square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity within [`HERMITIAN_TOL`]; the error names the
    /// entry pair with the largest deviation.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        let n = m.nrows();
        let mut worst = (0, 0, 0.0f64);
        for c in 0..n {
            for r in c..n {
                let dev = (m[(r, c)] - m[(c, r)].conj()).norm();
                if dev > worst.2 {
                    worst = (r, c, dev);
                }
            }
        }
        if worst.2 > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                row: worst.0,
                col: worst.1,
                deviation: worst.2,
            });
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Symmetrizes `m` as `(m + m†)/2` without validation. Used for matrices
    /// that are Hermitian by construction up to rounding.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        let n = m.nrows();
        let mut m = m;
        for c in 0..n {
            m[(c, c)] = C64::new(m[(c, c)].re, 0.0);
            for r in (c + 1)..n {
                let avg = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                m[(r, c)] = avg;
                m[(c, r)] = avg.conj();
            }
        }
        Self { m }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = C64::new(d, 0.0);
        }
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    /// `|ψ⟩⟨ψ|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(psi: &[C64]) -> Self {
        let n = psi.len();
        let m = CMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj());
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.m[(k, k)].re).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: &self.m * C64::new(s, 0.0) }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let s = C64::new(s, 0.0);
        for (a, b) in self.m.iter_mut().zip(other.m.iter()) {
            *a += b * s;
        }
        Ok(())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_diff(&self, other: &Self) -> f64 {
        (&self.m - &other.m).norm()
    }

    /// Trace norm `‖self - other‖₁` (sum of absolute eigenvalues of the difference).
    pub fn trace_norm_diff(&self, other: &Self) -> f64 {
        let d = Self::from_matrix_unchecked(&self.m - &other.m);
        hermitian_eigs(&d).values.iter().map(|v| v.abs()).sum()
    }

    /// `Tr{self · other}` for Hermitian operators (real up to rounding).
    pub fn trace_product(&self, other: &Self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for c in 0..n {
            for r in 0..n {
                acc += (self.m[(r, c)] * other.m[(c, r)]).re;
            }
        }
        acc
    }

    /// `k · self · k` for Hermitian `k`.
    pub fn sandwich(&self, k: &Self) -> Self {
        let left = sparse_aware_mul(&k.m, &self.m);
        Self::from_matrix_unchecked(sparse_aware_mul(&left, &k.m))
    }
}

/// A positive semi-definite operator with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    /// Validates eigenvalues ≥ −[`PSD_TOL`] and trace 1 within [`TRACE_TOL`].
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = hermitian_eigs(&op)
            .values
            .last()
            .copied()
            .unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Wraps an operator known to be a state (e.g. a channel output).
    pub fn from_operator_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    /// Rescales a nonzero PSD operator to unit trace.
    pub fn normalized(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if tr <= 0.0 {
            return Err(Error::InvalidTrace(tr));
        }
        Ok(Self {
            op: op.scaled(1.0 / tr),
        })
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidTrace(0.0));
        }
        Ok(Self {
            op: HermitianOperator::outer(psi).scaled(1.0 / norm2),
        })
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut d = vec![0.0; dim];
        d[k] = 1.0;
        Self {
            op: HermitianOperator::from_real_diagonal(&d),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scaled(1.0 / dim as f64),
        }
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_real_diagonal(probs))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    /// `Σ_k w_k ρ_k` for weights summing to one.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let dim = parts.first().map(|(_, r)| r.dim()).unwrap_or(0);
        let mut acc = HermitianOperator::zeros(dim);
        for (w, r) in parts {
            acc.add_scaled(r.op(), *w)?;
        }
        Ok(Self { op: acc })
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        Self {
            op: tensor(&self.op, &other.op),
        }
    }

    pub fn trace_distance(&self, other: &DensityOperator) -> f64 {
        0.5 * self.op.trace_norm_diff(&other.op)
    }
}

/// Eigendecomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: CMatrix,
}

impl Eigen {
    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &l) in self.values.iter().enumerate() {
            let s = C64::new(f(l), 0.0);
            for r in 0..n {
                scaled[(r, k)] *= s;
            }
        }
        sparse_aware_mul(&scaled, &self.vectors.adjoint())
    }
}

/// Connected components of the nonzero pattern of `m` (exact zeros only).
fn components(mats: &[&CMatrix]) -> Vec<Vec<usize>> {
    let n = mats[0].nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in mats {
        for c in 0..n {
            for r in (c + 1)..n {
                if m[(r, c)] != C64::new(0.0, 0.0) || m[(c, r)] != C64::new(0.0, 0.0) {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for k in 0..n {
        let root = find(&mut parent, k);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(k);
    }
    groups
}

fn submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Unitary `J` with `J† [[a, c], [c̄, b]] J` diagonal, taking the smaller rotation.
fn jacobi_rotation(a: f64, b: f64, c: C64) -> [[C64; 2]; 2] {
    let r = c.norm();
    let e = c / r;
    let tau = (b - a) / (2.0 * r);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt())
    };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;
    [
        [C64::new(cs, 0.0), e * sn],
        [-e.conj() * sn, C64::new(cs, 0.0)],
    ]
}

fn rotate_columns(m: &mut CMatrix, p: usize, q: usize, j: &[[C64; 2]; 2]) {
    for k in 0..m.nrows() {
        let (x, y) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = x * j[0][0] + y * j[1][0];
        m[(k, q)] = x * j[0][1] + y * j[1][1];
    }
}

/// Cyclic Jacobi sweeps on `h = V† M V`, accumulating into `v`.
fn jacobi_polish(h: &mut CMatrix, v: &mut CMatrix) {
    let n = h.nrows();
    let floor = JACOBI_FLOOR * h.norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let c = h[(p, q)];
                let (a, b) = (h[(p, p)].re, h[(q, q)].re);
                if c.norm() <= floor.max(f64::EPSILON * (a * b).abs().sqrt()) {
                    continue;
                }
                rotated = true;
                let j = jacobi_rotation(a, b, c);
                rotate_columns(h, p, q, &j);
                for k in 0..n {
                    let (x, y) = (h[(p, k)], h[(q, k)]);
                    h[(p, k)] = j[0][0].conj() * x + j[1][0].conj() * y;
                    h[(q, k)] = j[0][1].conj() * x + j[1][1].conj() * y;
                }
                h[(p, q)] = C64::new(0.0, 0.0);
                h[(q, p)] = C64::new(0.0, 0.0);
                rotate_columns(v, p, q, &j);
            }
        }
        if !rotated {
            break;
        }
    }
}

// nalgebra's Hermitian solver can return eigenpairs that reconstruct the
// input only to ~1e-3 on clustered spectra, so its output only seeds a
// Jacobi refinement.
fn dense_eigs(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], CMatrix::identity(1, 1));
    }
    let mut v = if is_real(m) {
        m.map(|z| z.re).symmetric_eigen().eigenvectors.map(|x| C64::new(x, 0.0))
    } else {
        m.clone().symmetric_eigen().eigenvectors
    };
    let mut h = v.adjoint() * m * &v;
    jacobi_polish(&mut h, &mut v);
    ((0..n).map(|k| h[(k, k)].re).collect(), v)
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
pub fn hermitian_eigs(m: &HermitianOperator) -> Eigen {
    let n = m.dim();
    let groups = components(&[m.matrix()]);
    // (eigenvalue, group, column within the group's eigenvectors)
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    let mut locals = Vec::with_capacity(groups.len());
    for (g, idx) in groups.iter().enumerate() {
        let (vals, vecs) = dense_eigs(&submatrix(m.matrix(), idx));
        pairs.extend(vals.iter().enumerate().map(|(k, v)| (*v, g, k)));
        locals.push(vecs);
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, (v, g, k)) in pairs.into_iter().enumerate() {
        values.push(v);
        for (r, &row) in groups[g].iter().enumerate() {
            vectors[(row, col)] = locals[g][(r, k)];
        }
    }
    Eigen { values, vectors }
}

/// Applies `f` to the spectrum of `m`, block by block.
fn spectral_map(m: &CMatrix, f: &dyn Fn(f64) -> f64) -> CMatrix {
    let n = m.nrows();
    let groups = components(&[m]);
    if groups.len() == 1 {
        let (vals, vecs) = dense_eigs(m);
        return Eigen {
            values: vals,
            vectors: vecs,
        }
        .reconstruct_with(f);
    }
    let mut out = CMatrix::zeros(n, n);
    for idx in &groups {
        let (vals, vecs) = dense_eigs(&submatrix(m, idx));
        let block = Eigen {
            values: vals,
            vectors: vecs,
        }
        .reconstruct_with(f);
        for (c, &cc) in idx.iter().enumerate() {
            for (r, &rr) in idx.iter().enumerate() {
                out[(rr, cc)] = block[(r, c)];
            }
        }
    }
    out
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    components(&[m])
        .iter()
        .flat_map(|idx| dense_eigs(&submatrix(m, idx)).0)
        .fold(f64::INFINITY, f64::min)
}

/// Principal square root of a PSD operator. Eigenvalues in `[-psd_clip, 0)`
/// are set to zero; anything more negative is rejected.
pub fn matrix_sqrt(m: &HermitianOperator, psd_clip: f64) -> Result<HermitianOperator> {
    let min = min_eigenvalue(m.matrix());
    if min < -psd_clip {
        return Err(Error::NotPsd(min));
    }
    Ok(HermitianOperator::from_matrix_unchecked(spectral_map(
        m.matrix(),
        &|l| l.max(0.0).sqrt(),
    )))
}

/// Moore–Penrose inverse square root restricted to eigenvalues above `support_cut`.
pub fn pinv_sqrt(m: &HermitianOperator, support_cut: f64) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(spectral_map(m.matrix(), &|l| {
        if l > support_cut {
            1.0 / l.sqrt()
        } else {
            0.0
        }
    }))
}

/// Projector onto the span of eigenvectors with eigenvalue above `support_cut`.
pub fn support_projector(m: &HermitianOperator, support_cut: f64) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(spectral_map(m.matrix(), &|l| {
        if l > support_cut {
            1.0
        } else {
            0.0
        }
    }))
}

/// Square root with eigenvalues under [`FIDELITY_FLOOR`] relative to the largest set to zero.
fn floored_sqrt(values: Vec<f64>, vectors: CMatrix) -> CMatrix {
    let floor = FIDELITY_FLOOR * values.iter().fold(0.0, |m: f64, l| m.max(l.abs()));
    Eigen { values, vectors }.reconstruct_with(|l| if l > floor { l.sqrt() } else { 0.0 })
}

/// `‖AB‖₁ = Σ_k ‖(AB)† v_k‖` over eigenvectors `v_k` of `AB(AB)†`, which
/// keeps small singular values at absolute rather than square-root accuracy.
fn trace_norm_of_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let prod = sparse_aware_mul(a, b);
    if prod.nrows() == 1 {
        return prod[(0, 0)].norm();
    }
    let gram = &prod * prod.adjoint();
    let (_, v) = dense_eigs(&gram);
    let w = prod.adjoint() * v;
    w.column_iter().map(|c| c.norm()).sum()
}

/// `‖√A √B‖₁` for PSD operators of equal dimension (not necessarily normalized).
///
/// Computed from the singular values of `√A·√B`, split over the joint block
/// structure of `A` and `B`.
pub fn fidelity_psd(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let sq = |m: &CMatrix| {
        let (values, vectors) = dense_eigs(m);
        floored_sqrt(values, vectors)
    };
    let mut total = 0.0;
    for idx in components(&[a.matrix(), b.matrix()]) {
        let sa = submatrix(a.matrix(), &idx);
        let sb = submatrix(b.matrix(), &idx);
        total += trace_norm_of_product(&sq(&sa), &sq(&sb));
    }
    Ok(total)
}

/// Fidelity `F(ρ,σ) = ‖√ρ √σ‖₁`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    fidelity_psd(rho.op(), sigma.op())
}

/// Shannon entropy in bits of a list of nonnegative weights (0·log 0 = 0).
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

/// Spectrum entropy of a PSD operator (eigenvalues below zero are clipped).
pub fn spectral_entropy(m: &HermitianOperator) -> f64 {
    let mut total = 0.0;
    for idx in components(&[m.matrix()]) {
        let (vals, _) = dense_eigs(&submatrix(m.matrix(), &idx));
        total += shannon_entropy(&vals);
    }
    total
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    spectral_entropy(rho.op())
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        m: a.matrix().kronecker(b.matrix()),
    }
}

/// Partial trace of an operator on `A ⊗ B` (dimensions `da`, `db`). Keeps
/// `A` when `keep_first` is true, otherwise keeps `B`.
pub fn partial_trace(
    m: &HermitianOperator,
    da: usize,
    db: usize,
    keep_first: bool,
) -> Result<HermitianOperator> {
    if m.dim() != da * db {
        return Err(Error::DimensionMismatch(m.dim(), da * db));
    }
    let mm = m.matrix();
    let out = if keep_first {
        CMatrix::from_fn(da, da, |r, c| {
            (0..db).map(|k| mm[(r * db + k, c * db + k)]).sum()
        })
    } else {
        CMatrix::from_fn(db, db, |r, c| {
            (0..da).map(|k| mm[(k * db + r, k * db + c)]).sum()
        })
    };
    Ok(HermitianOperator::from_matrix_unchecked(out))
}

/// Matrix product that skips zero entries of the right factor when it is
/// mostly zero; falls back to the dense kernel otherwise.
pub fn sparse_aware_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let zero = C64::new(0.0, 0.0);
    let nnz = b.iter().filter(|z| **z != zero).count();
    if nnz * 4 > b.len() {
        return a * b;
    }
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMatrix::zeros(n, m);
    for j in 0..m {
        for l in 0..k {
            let s = b[(l, j)];
            if s == zero {
                continue;
            }
            let col_a = a.column(l);
            let mut col_out = out.column_mut(j);
            for r in 0..n {
                col_out[r] += col_a[r] * s;
            }
        }
    }
    out
}

/// Entropies and fidelity of a weighted pair of PSD operators, sharing one
/// eigendecomposition per operator and block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats {
    pub entropy_a: f64,
    pub entropy_b: f64,
    /// Entropy of `w·A + (1-w)·B`.
    pub entropy_mix: f64,
    /// `‖√A √B‖₁`.
    pub fidelity: f64,
}

pub fn pair_statistics(a: &HermitianOperator, b: &HermitianOperator, w: f64) -> Result<PairStats> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let mut out = PairStats {
        entropy_a: 0.0,
        entropy_b: 0.0,
        entropy_mix: 0.0,
        fidelity: 0.0,
    };
    for idx in components(&[a.matrix(), b.matrix()]) {
        let sa = submatrix(a.matrix(), &idx);
        let sb = submatrix(b.matrix(), &idx);
        let mix = &sa * C64::new(w, 0.0) + &sb * C64::new(1.0 - w, 0.0);
        let (va, ea) = dense_eigs(&sa);
        let (vb, eb) = dense_eigs(&sb);
        out.entropy_a += shannon_entropy(&va);
        out.entropy_b += shannon_entropy(&vb);
        out.entropy_mix += shannon_entropy(&dense_eigs(&mix).0);
        let ra = floored_sqrt(va, ea);
        let rb = floored_sqrt(vb, eb);
        out.fidelity += trace_norm_of_product(&ra, &rb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        ))
        .unwrap()
    }

    #[test]
    fn eigs_known_spectra() {
        let e = hermitian_eigs(&HermitianOperator::identity(2));
        assert_eq!(e.values, vec![1.0, 1.0]);
        let e = hermitian_eigs(&HermitianOperator::from_real_diagonal(&[0.25, 0.75]));
        assert_eq!(e.values, vec![0.75, 0.25]);
        let e = hermitian_eigs(&pauli_x());
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigs_reconstruct_and_orthonormal() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2., 0.),
                c(0.5, 0.3),
                c(0., -1.),
                c(0.5, -0.3),
                c(1., 0.),
                c(0.2, 0.),
                c(0., 1.),
                c(0.2, 0.),
                c(-1., 0.),
            ],
        );
        let h = HermitianOperator::new(m.clone()).unwrap();
        let e = hermitian_eigs(&h);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let rec = e.reconstruct_with(|l| l);
        assert!((rec - &m).norm() < 1e-10 * 3.0);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn non_hermitian_names_worst_pair() {
        let mut m = CMatrix::identity(3, 3);
        m[(2, 0)] = c(0.5, 0.0);
        m[(1, 0)] = c(1e-13, 0.0);
        match HermitianOperator::new(m) {
            Err(Error::NotHermitian { row, col, .. }) => assert_eq!((row, col), (2, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sqrt_examples() {
        let id = HermitianOperator::identity(2);
        assert!(matrix_sqrt(&id, PSD_TOL).unwrap().max_abs_diff(&id) < 1e-14);
        let d = HermitianOperator::from_real_diagonal(&[4.0, 9.0]);
        let s = matrix_sqrt(&d, PSD_TOL).unwrap();
        assert!(s.max_abs_diff(&HermitianOperator::from_real_diagonal(&[2.0, 3.0])) < 1e-14);
        let plus = [c(1.0 / 2f64.sqrt(), 0.), c(1.0 / 2f64.sqrt(), 0.)];
        let proj = HermitianOperator::outer(&plus);
        let s = matrix_sqrt(&proj, PSD_TOL).unwrap();
        assert!(s.max_abs_diff(&proj) < 1e-12);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let d = HermitianOperator::from_real_diagonal(&[1.0, -1e-3]);
        assert!(matches!(matrix_sqrt(&d, PSD_TOL), Err(Error::NotPsd(_))));
        let d = HermitianOperator::from_real_diagonal(&[1.0, -1e-12]);
        let s = matrix_sqrt(&d, PSD_TOL).unwrap();
        assert_eq!(s.matrix()[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn fidelity_examples() {
        let r = DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        let z0 = DensityOperator::basis(2, 0);
        let z1 = DensityOperator::basis(2, 1);
        assert!(fidelity(&z0, &z1).unwrap().abs() < 1e-14);
        let mixed = DensityOperator::maximally_mixed(2);
        assert!((fidelity(&z0, &mixed).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            fidelity(&z0, &DensityOperator::maximally_mixed(4)),
            Err(Error::DimensionMismatch(2, 4))
        ));
    }

    #[test]
    fn entropy_examples() {
        let plus = DensityOperator::pure(&[c(1., 0.), c(0., 1.)]).unwrap();
        assert!(von_neumann_entropy(&plus).abs() < 1e-10);
        assert!((von_neumann_entropy(&DensityOperator::maximally_mixed(2)) - 1.0).abs() < 1e-12);
        let d = DensityOperator::from_diagonal(&[0.25, 0.75]).unwrap();
        assert!((von_neumann_entropy(&d) - 0.811_278_124_459_132_9).abs() < 1e-12);
    }

    #[test]
    fn tensor_examples() {
        let i4 = tensor(&HermitianOperator::identity(2), &HermitianOperator::identity(2));
        assert_eq!(i4, HermitianOperator::identity(4));
        let t = tensor(
            &HermitianOperator::from_real_diagonal(&[1.0, 0.0]),
            &HermitianOperator::from_real_diagonal(&[0.0, 1.0]),
        );
        assert_eq!(t, HermitianOperator::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn pinv_sqrt_examples() {
        let id = HermitianOperator::identity(2);
        assert!(pinv_sqrt(&id, 1e-12).max_abs_diff(&id) < 1e-14);
        let d = HermitianOperator::from_real_diagonal(&[4.0, 0.0]);
        assert!(
            pinv_sqrt(&d, 1e-12).max_abs_diff(&HermitianOperator::from_real_diagonal(&[0.5, 0.0]))
                < 1e-14
        );
        let d = HermitianOperator::from_real_diagonal(&[9.0, 1e-20]);
        assert!(
            pinv_sqrt(&d, 1e-12)
                .max_abs_diff(&HermitianOperator::from_real_diagonal(&[1.0 / 3.0, 0.0]))
                < 1e-14
        );
    }

    #[test]
    fn density_validation() {
        assert!(matches!(
            DensityOperator::from_diagonal(&[0.5, 0.6]),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityOperator::from_diagonal(&[1.5, -0.5]),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DensityOperator::from_diagonal(&[0.2, 0.8]).unwrap();
        let b = DensityOperator::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        let ab = a.tensor(&b);
        let ra = partial_trace(ab.op(), 2, 2, true).unwrap();
        let rb = partial_trace(ab.op(), 2, 2, false).unwrap();
        assert!(ra.max_abs_diff(a.op()) < 1e-14);
        assert!(rb.max_abs_diff(b.op()) < 1e-14);
    }

    #[test]
    fn block_split_matches_dense() {
        // Block-diagonal after a permutation: indices {0,2} and {1,3}.
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(0.4, 0.);
        m[(2, 2)] = c(0.1, 0.);
        m[(0, 2)] = c(0.1, 0.05);
        m[(2, 0)] = c(0.1, -0.05);
        m[(1, 1)] = c(0.3, 0.);
        m[(3, 3)] = c(0.2, 0.);
        m[(1, 3)] = c(0.0, 0.1);
        m[(3, 1)] = c(0.0, -0.1);
        let h = HermitianOperator::new(m.clone()).unwrap();
        assert_eq!(components(&[&m]).len(), 2);
        let e = hermitian_eigs(&h);
        let dense = m.clone().symmetric_eigen();
        let mut dv: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        dv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (x, y) in e.values.iter().zip(&dv) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((e.reconstruct_with(|l| l) - &m).norm() < 1e-14);
    }

    #[test]
    fn eigenpairs_reach_round_off_on_degenerate_spectra() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let a = crate::random::random_density(&mut rng, 2, 2);
        let b = crate::random::random_density(&mut rng, 2, 2);
        // a⊗a⊗b⊗a has repeated eigenvalues
        let m = a.tensor(&a).tensor(&b).tensor(&a).op().scaled(3.0);
        let e = hermitian_eigs(&m);
        let err = (e.reconstruct_with(|l| l) - m.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err:e}");
        let sa = matrix_sqrt(&m, PSD_TOL).unwrap();
        let sq = HermitianOperator::from_matrix_unchecked(sa.matrix() * sa.matrix());
        assert!(sq.max_abs_diff(&m) < 1e-14);
    }
}