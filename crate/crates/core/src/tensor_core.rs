//! Dense complex-matrix primitives on multi-qubit Hilbert spaces.
//!
//! Qubits are numbered from 1. Qubit 1 is the most significant factor of the
//! Kronecker chain, so basis index `b` of an `n`-qubit space decodes to the bit
//! string `q1 q2 ... qn` with `q1` the highest bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Bit mask of qubit `q` (1-based) in an `n`-qubit basis index.
#[inline]
pub fn qubit_bit(q: usize, n: usize) -> usize {
    1 << (n - q)
}

/// A strictly increasing set of 1-based qubit indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QubitSubset(Vec<usize>);

impl QubitSubset {
    pub fn new(sites: Vec<usize>, n: usize) -> Result<Self> {
        if sites.iter().any(|&q| q == 0 || q > n) {
            return Err(Error::InvalidSites(format!("{sites:?} not within 1..={n}")));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSites(format!("{sites:?} not strictly increasing")));
        }
        Ok(Self(sites))
    }

    /// Qubits `from..=to`.
    pub fn range(from: usize, to: usize, n: usize) -> Result<Self> {
        Self::new((from..=to).collect(), n)
    }

    pub fn all(n: usize) -> Self {
        Self((1..=n).collect())
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mask(&self, n: usize) -> usize {
        self.0.iter().fold(0, |m, &q| m | qubit_bit(q, n))
    }
}

/// A normalized, Hermitian, positive semidefinite operator on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Wraps `matrix`, checking shape, Hermiticity and unit trace.
    /// Positivity is not checked here since it needs a full eigensolve; see
    /// [`DensityMatrix::min_eigenvalue`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let num_qubits = qubits_for_dim(matrix.nrows())?;
        if matrix.ncols() != matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(Self { num_qubits, matrix })
    }

    /// Wraps a matrix whose validity is guaranteed by construction.
    pub(crate) fn from_raw(num_qubits: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << num_qubits);
        Self { num_qubits, matrix }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let num_qubits = qubits_for_dim(psi.len())?;
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state vector norm^2 {norm} is not 1")));
        }
        let d = psi.len();
        let matrix = ComplexMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj());
        Ok(Self { num_qubits, matrix })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        let matrix = ComplexMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
        Self { num_qubits, matrix }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.matrix)?[0])
    }
}

fn qubits_for_dim(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("dimension {d} is not 2^k with k >= 1")));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..m.ncols() {
        for r in 0..=c.min(m.nrows() - 1) {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Offsets of the `2^k` local basis states of `sites` inside the full index.
/// Local index bit `k-1-j` belongs to `sites[j]` (first listed site is most significant).
pub(crate) fn local_offsets(sites: &[usize], n: usize) -> Vec<usize> {
    let k = sites.len();
    (0..1usize << k)
        .map(|local| {
            sites.iter().enumerate().fold(0, |acc, (j, &q)| {
                if local & (1 << (k - 1 - j)) != 0 {
                    acc | qubit_bit(q, n)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// All full indices whose bits on `sites` are zero.
pub(crate) fn rest_bases(sites: &[usize], n: usize) -> Vec<usize> {
    let mask = sites.iter().fold(0, |m, &q| m | qubit_bit(q, n));
    (0..1usize << n).filter(|b| b & mask == 0).collect()
}

fn check_ordered_sites(sites: &[usize], n: usize) -> Result<()> {
    if sites.is_empty() || sites.iter().any(|&q| q == 0 || q > n) {
        return Err(Error::InvalidSites(format!("{sites:?} not within 1..={n}")));
    }
    for (i, q) in sites.iter().enumerate() {
        if sites[..i].contains(q) {
            return Err(Error::InvalidSites(format!("{sites:?} repeats qubit {q}")));
        }
    }
    Ok(())
}

/// Lifts `op`, acting on `sites` in the listed order, to the full `2^n` space.
pub fn embed(op: &ComplexMatrix, sites: &[usize], n: usize) -> Result<ComplexMatrix> {
    check_ordered_sites(sites, n)?;
    let k = sites.len();
    if op.nrows() != 1 << k || op.ncols() != 1 << k {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but {} sites need {}x{}",
            op.nrows(),
            op.ncols(),
            k,
            1 << k,
            1 << k
        )));
    }
    let d = 1 << n;
    let offsets = local_offsets(sites, n);
    let mut out = ComplexMatrix::zeros(d, d);
    for base in rest_bases(sites, n) {
        for (lc, &oc) in offsets.iter().enumerate() {
            for (lr, &or) in offsets.iter().enumerate() {
                out[(base | or, base | oc)] = op[(lr, lc)];
            }
        }
    }
    Ok(out)
}

/// Reduced state on `keep`; every other qubit is traced out.
pub fn partial_trace(rho: &DensityMatrix, keep: &QubitSubset) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidSites("partial trace needs a nonempty keep set".into()));
    }
    let n = rho.num_qubits();
    if keep.sites().iter().any(|&q| q > n) {
        return Err(Error::InvalidSites(format!("{:?} exceeds {n} qubits", keep.sites())));
    }
    let k = keep.len();
    let keep_offsets = local_offsets(keep.sites(), n);
    let traced = rest_bases(keep.sites(), n);
    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(1 << k, 1 << k, |r, c| {
        let (or, oc) = (keep_offsets[r], keep_offsets[c]);
        traced.iter().map(|&e| m[(e | or, e | oc)]).sum()
    });
    Ok(DensityMatrix::from_raw(k, out))
}

/// Partial transpose with respect to `subsystem_b`:
/// `<i_A j_B| rho^T_B |k_A l_B> = <i_A l_B| rho |k_A j_B>`.
pub fn partial_transpose(rho: &DensityMatrix, subsystem_b: &QubitSubset) -> Result<ComplexMatrix> {
    let n = rho.num_qubits();
    if subsystem_b.is_empty() || subsystem_b.len() >= n {
        return Err(Error::InvalidSites(format!(
            "partial transpose needs a proper nonempty subsystem, got {:?} of {n}",
            subsystem_b.sites()
        )));
    }
    Ok(partial_transpose_matrix(rho.matrix(), subsystem_b.mask(n)))
}

pub(crate) fn partial_transpose_matrix(m: &ComplexMatrix, mask_b: usize) -> ComplexMatrix {
    let d = m.nrows();
    ComplexMatrix::from_fn(d, d, |r, c| {
        let rr = (r & !mask_b) | (c & mask_b);
        let cc = (c & !mask_b) | (r & mask_b);
        m[(rr, cc)]
    })
}

/// Real eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let herm = hermiticity_defect(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// `exp(-i h t)` for Hermitian `h`, by eigendecomposition.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let herm = hermiticity_defect(h);
    if herm > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t));
    let scaled = ComplexMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * phases[c]);
    Ok(scaled * v.adjoint())
}

/// In-place `m <- U m`, with `U` acting on `sites` (listed order).
pub(crate) fn apply_left(m: &mut ComplexMatrix, u: &ComplexMatrix, offsets: &[usize], bases: &[usize]) {
    let d = m.nrows();
    let k = offsets.len();
    let data = m.as_mut_slice();
    let mut buf = vec![ZERO; k];
    for col in 0..d {
        let column = &mut data[col * d..(col + 1) * d];
        for &base in bases {
            for (j, &o) in offsets.iter().enumerate() {
                buf[j] = column[base | o];
            }
            for (i, &o) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (j, b) in buf.iter().enumerate() {
                    acc += u[(i, j)] * b;
                }
                column[base | o] = acc;
            }
        }
    }
}

/// In-place `m <- m U^dagger`, with `U` acting on `sites`.
pub(crate) fn apply_right_adjoint(
    m: &mut ComplexMatrix,
    u: &ComplexMatrix,
    offsets: &[usize],
    bases: &[usize],
) {
    let d = m.nrows();
    let k = offsets.len();
    let uc = u.map(|z| z.conj());
    let data = m.as_mut_slice();
    let mut buf = vec![ZERO; k * d];
    for &base in bases {
        // Gather the k columns of this block, then write back their mixtures.
        for (j, &o) in offsets.iter().enumerate() {
            let src = (base | o) * d;
            buf[j * d..(j + 1) * d].copy_from_slice(&data[src..src + d]);
        }
        for (i, &o) in offsets.iter().enumerate() {
            let dst = (base | o) * d;
            let out = &mut data[dst..dst + d];
            out.fill(ZERO);
            for j in 0..k {
                let w = uc[(i, j)];
                if w == ZERO {
                    continue;
                }
                for (x, y) in out.iter_mut().zip(&buf[j * d..(j + 1) * d]) {
                    *x += w * y;
                }
            }
        }
    }
}

/// In-place `rho <- U rho U^dagger` without building the full-space unitary.
pub fn conjugate_local(rho: &mut ComplexMatrix, u: &ComplexMatrix, sites: &[usize], n: usize) {
    let offsets = local_offsets(sites, n);
    let bases = rest_bases(sites, n);
    apply_left(rho, u, &offsets, &bases);
    apply_right_adjoint(rho, u, &offsets, &bases);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    fn basis(n: usize, idx: usize) -> Vec<Complex64> {
        let mut v = vec![ZERO; 1 << n];
        v[idx] = ONE;
        v
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::from_pure(&[c(s), ZERO, ZERO, c(s)]).unwrap()
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4, 4));
        let zz = kron(&pauli_z(), &pauli_z());
        let expected = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0),
            c(-1.0),
            c(-1.0),
            c(1.0),
        ]));
        assert_eq!(zz, expected);
    }

    #[test]
    fn kron_xx_flips_both_bits() {
        let xx = kron(&pauli_x(), &pauli_x());
        let v = nalgebra::DVector::from_vec(basis(2, 0b00));
        let out = xx * v;
        assert_eq!(out.as_slice(), basis(2, 0b11).as_slice());
    }

    #[test]
    fn embed_front_and_back() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(embed(&pauli_z(), &[1], 2).unwrap(), kron(&pauli_z(), &i2));
        assert_eq!(embed(&pauli_z(), &[2], 2).unwrap(), kron(&i2, &pauli_z()));
    }

    #[test]
    fn embed_all_sites_is_identity_map() {
        let op = kron(&pauli_x(), &pauli_z());
        assert_eq!(embed(&op, &[1, 2], 2).unwrap(), op);
        // Reversed listing swaps the factor order.
        assert_eq!(embed(&op, &[2, 1], 2).unwrap(), kron(&pauli_z(), &pauli_x()));
    }

    #[test]
    fn embed_non_contiguous_swap_matches_permutation_oracle() {
        let swap = ComplexMatrix::from_fn(4, 4, |r, c| {
            let swapped = ((c & 1) << 1) | (c >> 1);
            if r == swapped {
                ONE
            } else {
                ZERO
            }
        });
        let full = embed(&swap, &[1, 3], 3).unwrap();
        // Oracle: exchange bits of qubit 1 (value 4) and qubit 3 (value 1).
        for b in 0..8usize {
            let q1 = (b >> 2) & 1;
            let q3 = b & 1;
            let image = (b & 0b010) | (q3 << 2) | q1;
            for r in 0..8 {
                let expected = if r == image { ONE } else { ZERO };
                assert_eq!(full[(r, b)], expected, "basis {b:03b}");
            }
        }
        assert_eq!(full[(0b001, 0b100)], ONE);
    }

    #[test]
    fn embed_rejects_bad_dimension() {
        assert!(matches!(embed(&pauli_x(), &[1, 2], 3), Err(Error::DimensionMismatch(_))));
        assert!(matches!(embed(&pauli_x(), &[4], 3), Err(Error::InvalidSites(_))));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = DensityMatrix::from_pure(&basis(2, 0)).unwrap();
        let red = partial_trace(&rho, &QubitSubset::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(red.matrix(), &ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]));

        // Summing the diagonal 2x2 blocks of the Bell projector by hand gives I/2.
        let red = partial_trace(&bell(), &QubitSubset::new(vec![2], 2).unwrap()).unwrap();
        assert!(max_abs_diff(red.matrix(), &(ComplexMatrix::identity(2, 2) * c(0.5))) < 1e-15);

        let all = partial_trace(&bell(), &QubitSubset::all(2)).unwrap();
        assert_eq!(all, bell());
        assert!(partial_trace(&bell(), &QubitSubset::new(vec![], 2).unwrap()).is_err());
    }

    #[test]
    fn partial_transpose_bell_spectrum() {
        let b = QubitSubset::new(vec![2], 2).unwrap();
        let pt = partial_transpose(&bell(), &b).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (x, y) in ev.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
        let back = partial_transpose(&DensityMatrix::from_raw(2, pt), &b).unwrap();
        assert_eq!(&back, bell().matrix());
        assert!(partial_transpose(&bell(), &QubitSubset::all(2)).is_err());
    }

    #[test]
    fn partial_transpose_of_product_is_local_transpose() {
        let s = 1.0 / 2f64.sqrt();
        let plus_i = [c(s), Complex64::new(0.0, s)];
        let rho_a = ComplexMatrix::from_row_slice(2, 2, &[c(0.7), c(0.1), c(0.1), c(0.3)]);
        let rho_b = ComplexMatrix::from_fn(2, 2, |r, cc| plus_i[r] * plus_i[cc].conj());
        let rho = DensityMatrix::new(kron(&rho_a, &rho_b)).unwrap();
        let pt = partial_transpose(&rho, &QubitSubset::new(vec![2], 2).unwrap()).unwrap();
        assert!(max_abs_diff(&pt, &kron(&rho_a, &rho_b.transpose())) < 1e-15);
        assert!(hermitian_eigenvalues(&pt).unwrap()[0] > -1e-12);
    }

    #[test]
    fn eigenvalues_known_spectra() {
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(1.0), c(2.0)]));
        let ev = hermitian_eigenvalues(&d).unwrap();
        for (x, y) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        let ev = hermitian_eigenvalues(&pauli_x()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        let nonherm = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(hermitian_eigenvalues(&nonherm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn conjugate_local_matches_embedded_product() {
        let u = kron(&pauli_x(), &pauli_z()) * Complex64::new(0.0, 1.0);
        let psi: Vec<Complex64> =
            (0..8).map(|i| Complex64::new(i as f64 + 1.0, 0.5 * i as f64)).collect();
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<Complex64> = psi.iter().map(|a| a / norm).collect();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let full = embed(&u, &[3, 1], 3).unwrap();
        let expected = &full * rho.matrix() * full.adjoint();
        let mut m = rho.matrix().clone();
        conjugate_local(&mut m, &u, &[3, 1], 3);
        assert!(max_abs_diff(&m, &expected) < 1e-14);
    }

    #[test]
    fn expm_hermitian_of_pauli() {
        let u = expm_hermitian(&pauli_z(), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u[(0, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((u[(1, 1)] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn subset_validation() {
        assert!(QubitSubset::new(vec![2, 1], 3).is_err());
        assert!(QubitSubset::new(vec![1, 1], 3).is_err());
        assert!(QubitSubset::new(vec![0], 3).is_err());
        assert_eq!(QubitSubset::range(4, 7, 7).unwrap().mask(7), 0b0001111);
    }
}
