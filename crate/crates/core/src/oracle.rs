//! Brute-force ground truth at tiny sizes.
//!
//! Nothing here uses the Hamming-weight reduction or the sampler's local
//! update logic: the dense routines act on the full `2^n`-dimensional
//! Hamiltonian and the Trotter routines evaluate the lattice weight straight
//! from its product form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{check_schedule, ProblemInstance};

pub const DENSE_MAX_QUBITS: usize = 12;
pub const ENUMERATION_MAX_BITS: usize = 18;
pub const TRANSFER_MAX_QUBITS: usize = 8;

fn hamming_cost(inst: &ProblemInstance, x: usize) -> f64 {
    let h = x.count_ones() as usize;
    let bump = if inst.in_window(h) { inst.height() } else { 0.0 };
    h as f64 + bump
}

fn check_dense(inst: &ProblemInstance) -> Result<()> {
    if inst.n() > DENSE_MAX_QUBITS {
        return Err(Error::OracleTooLarge(format!(
            "dense Hamiltonian needs n <= {DENSE_MAX_QUBITS}, got {}",
            inst.n()
        )));
    }
    Ok(())
}

/// The full `2^n x 2^n` matrix of `(1-s) H0 + s H1` in the computational
/// basis.
pub fn dense_hamiltonian(inst: &ProblemInstance, s: f64) -> Result<DMatrix<f64>> {
    check_schedule(s)?;
    check_dense(inst)?;
    let n = inst.n();
    let dim = 1usize << n;
    let hop = -(1.0 - s) / 2.0;
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(x, x)] = (1.0 - s) * n as f64 / 2.0 + s * hamming_cost(inst, x);
        for d in 0..n {
            m[(x, x ^ (1 << d))] = hop;
        }
    }
    Ok(m)
}

/// All `2^n` eigenvalues, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl DenseSpectrum {
    /// Number of eigenvalues within `tol` of `value`.
    pub fn multiplicity(&self, value: f64, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|e| (*e - value).abs() <= tol).count()
    }

    /// Whether some eigenvalue lies within `tol` of `value`.
    pub fn contains(&self, value: f64, tol: f64) -> bool {
        self.multiplicity(value, tol) > 0
    }

    /// Distinct levels (clustered within `tol`) with their multiplicities.
    pub fn levels(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &e in &self.eigenvalues {
            match out.last_mut() {
                Some((v, m)) if (e - *v).abs() <= tol => *m += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }
}

/// In-place unnormalised Walsh-Hadamard transform of a length-`2^k` slice.
fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi) {
                (*a, *b) = (*a + *b, *a - *b);
            }
        }
        h *= 2;
    }
}

/// `W m W / dim` with `W` the Hadamard matrix on both sides: an exact
/// orthogonal change to the X basis.
fn hadamard_conjugate(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let dim = m.nrows();
    for j in 0..dim {
        walsh_hadamard(m.column_mut(j).as_mut_slice());
    }
    let mut t = m.transpose();
    for j in 0..dim {
        walsh_hadamard(t.column_mut(j).as_mut_slice());
    }
    t / dim as f64
}

/// Full spectrum of the dense matrix (`n <= 12`).
///
/// At `s = 1` the matrix is diagonal and its diagonal is returned sorted. At
/// `s = 0` it is rotated into the X basis by a Walsh-Hadamard transform of
/// rows and columns; if the result is diagonal to rounding, its diagonal is
/// the spectrum. This replaces a 36 s diagonalisation at `n = 12` with a
/// fraction of a second. Everything else goes through the dense symmetric
/// eigensolver.
pub fn dense_spectrum(inst: &ProblemInstance, s: f64) -> Result<DenseSpectrum> {
    let m = dense_hamiltonian(inst, s)?;
    let mut eigenvalues: Vec<f64> = if s == 1.0 {
        m.diagonal().iter().copied().collect()
    } else if s == 0.0 {
        let scale = inst.n().max(1) as f64;
        let r = hadamard_conjugate(m.clone());
        let dim = r.nrows();
        let off_diagonal = (0..dim)
            .flat_map(|j| (0..dim).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|ij| r[ij].abs())
            .fold(0.0, f64::max);
        if off_diagonal <= 1e-12 * scale {
            r.diagonal().iter().copied().collect()
        } else {
            m.symmetric_eigenvalues().iter().copied().collect()
        }
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    eigenvalues.sort_by(f64::total_cmp);
    Ok(DenseSpectrum { eigenvalues })
}

/// The lowest `count` distinct eigenvalues of the `2^n`-dimensional
/// Hamiltonian by Lanczos with full reorthogonalisation from a random start.
///
/// The operator is applied matrix-free from its definition (diagonal cost plus
/// single-bit hops), so `n = 12` costs milliseconds per step. Iteration stops
/// once each of the lowest `count` Ritz values has residual below
/// `1e-11` times the operator's row-sum bound, which bounds its eigenvalue
/// error by the same amount. Exact degeneracies show up once: the Krylov
/// space holds one vector per distinct eigenvalue.
pub fn krylov_lowest_levels(inst: &ProblemInstance, s: f64, count: usize) -> Result<Vec<f64>> {
    check_schedule(s)?;
    check_dense(inst)?;
    let n = inst.n();
    let dim = 1usize << n;
    let diag: Vec<f64> = (0..dim)
        .map(|x| (1.0 - s) * n as f64 / 2.0 + s * hamming_cost(inst, x))
        .collect();
    let hop = -(1.0 - s) / 2.0;
    let apply = |v: &DVector<f64>| {
        DVector::from_fn(dim, |x, _| {
            let hops: f64 = (0..n).map(|d| v[x ^ (1 << d)]).sum();
            diag[x] * v[x] + hop * hops
        })
    };
    let scale = diag.iter().map(|d| d.abs()).fold(0.0, f64::max) + n as f64 * hop.abs();
    let tol = 1e-11 * scale.max(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();
    let mut basis: Vec<DVector<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    loop {
        let q = basis.last().unwrap();
        let mut w = apply(q);
        alphas.push(q.dot(&w));
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&w);
                w.axpy(-proj, b, 1.0);
            }
        }
        let beta = w.norm();
        let k = alphas.len();
        let exhausted = beta <= tol || k == dim;
        if exhausted || (k >= count && k.is_multiple_of(8)) {
            let eig = SymmetricEigen::new(tridiagonal_matrix(&alphas, &betas));
            let mut ritz: Vec<(f64, f64)> = (0..k)
                .map(|i| (eig.eigenvalues[i], (beta * eig.eigenvectors[(k - 1, i)]).abs()))
                .collect();
            ritz.sort_by(|a, b| a.0.total_cmp(&b.0));
            ritz.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * scale.max(1.0));
            let converged = ritz.len() >= count && ritz[..count].iter().all(|r| r.1 <= tol);
            if exhausted || converged {
                return Ok(ritz.into_iter().take(count).map(|r| r.0).collect());
            }
        }
        betas.push(beta);
        basis.push(w / beta);
    }
}

fn tridiagonal_matrix(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    })
}

/// `Tr exp(-beta H)` from the dense spectrum.
pub fn exact_partition_function(inst: &ProblemInstance, s: f64, beta: f64) -> Result<f64> {
    let spec = dense_spectrum(inst, s)?;
    Ok(spec.eigenvalues.iter().map(|e| (-beta * e).exp()).sum())
}

/// Trotter partition function and energy estimators by full enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterEnumeration {
    /// `Z(T)` normalised to approach `Tr exp(-beta H)` as `T` grows, i.e. the
    /// lattice weight sum divided by `2^(nT)`.
    pub z: f64,
    pub log_z: f64,
    pub mean_diag_energy: f64,
    pub mean_offdiag_energy: f64,
    /// Probability of every configuration, indexed by code with bit
    /// `tau * n + d` holding `x_d^(tau)`.
    pub probabilities: Vec<f64>,
}

impl TrotterEnumeration {
    pub fn mean_energy(&self) -> f64 {
        self.mean_diag_energy + self.mean_offdiag_energy
    }
}

fn slice_bits(code: u64, n: usize, tau: usize) -> usize {
    ((code >> (tau * n)) & ((1u64 << n) - 1)) as usize
}

/// Log lattice weight straight from the product form (log of `0` is `-inf`).
fn enumerated_log_weight(inst: &ProblemInstance, n: usize, t: usize, code: u64, s: f64, beta: f64) -> f64 {
    let a = beta * (1.0 - s) / (2.0 * t as f64);
    let mut log_w = 0.0;
    for tau in 0..t {
        let x = slice_bits(code, n, tau);
        let y = slice_bits(code, n, (tau + 1) % t);
        log_w -= beta / t as f64 * ((1.0 - s) * n as f64 / 2.0 + s * hamming_cost(inst, x));
        for d in 0..n {
            let sign = if (x >> d) & 1 == (y >> d) & 1 { 1.0 } else { -1.0 };
            log_w += (a.exp() + sign * (-a).exp()).ln();
        }
    }
    log_w
}

/// Enumerates all `2^(nT)` lattices (`nT <= 18`).
pub fn exact_trotter_partition(
    inst: &ProblemInstance,
    s: f64,
    beta: f64,
    slices: usize,
) -> Result<TrotterEnumeration> {
    check_schedule(s)?;
    let n = inst.n();
    if slices < 2 || n * slices > ENUMERATION_MAX_BITS {
        return Err(Error::OracleTooLarge(format!(
            "enumeration needs 2 <= T and n*T <= {ENUMERATION_MAX_BITS}, got n={n}, T={slices}"
        )));
    }
    let count = 1u64 << (n * slices);
    let logs: Vec<f64> = (0..count)
        .map(|code| enumerated_log_weight(inst, n, slices, code, s, beta))
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total = pairwise_sum(&weights);
    let log_z = peak + total.ln() - (n * slices) as f64 * std::f64::consts::LN_2;

    let a = beta * (1.0 - s) / (2.0 * slices as f64);
    let mut diag_terms = Vec::with_capacity(weights.len());
    let mut off_terms = Vec::with_capacity(weights.len());
    for (code, &w) in (0..count).zip(&weights) {
        if w == 0.0 {
            diag_terms.push(0.0);
            off_terms.push(0.0);
            continue;
        }
        let mut ed = 0.0;
        let mut eo = 0.0;
        for tau in 0..slices {
            let x = slice_bits(code, n, tau);
            let y = slice_bits(code, n, (tau + 1) % slices);
            ed += (1.0 - s) * n as f64 / 2.0 + s * hamming_cost(inst, x);
            if s < 1.0 {
                for d in 0..n {
                    let sign = if (x >> d) & 1 == (y >> d) & 1 { 1.0 } else { -1.0 };
                    eo += -(1.0 - s) / 2.0 * (a.exp() - sign * (-a).exp())
                        / (a.exp() + sign * (-a).exp());
                }
            }
        }
        diag_terms.push(w * ed / slices as f64);
        off_terms.push(w * eo / slices as f64);
    }
    Ok(TrotterEnumeration {
        z: log_z.exp(),
        log_z,
        mean_diag_energy: pairwise_sum(&diag_terms) / total,
        mean_offdiag_energy: pairwise_sum(&off_terms) / total,
        probabilities: weights.iter().map(|w| w / total).collect(),
    })
}

/// Trotter partition function `Tr (D L)^T` via the `2^n x 2^n` transfer
/// matrix, with `D = exp(-beta/T H_d)` and `L = exp(-beta/T H_o)` written
/// as the per-bit product of `cosh(a)` / `sinh(a)`.
///
/// Equal to [`exact_trotter_partition`]'s `z` but scales to large `T`.
pub fn transfer_matrix_partition(
    inst: &ProblemInstance,
    s: f64,
    beta: f64,
    slices: usize,
) -> Result<f64> {
    check_schedule(s)?;
    let n = inst.n();
    if n > TRANSFER_MAX_QUBITS || slices < 1 {
        return Err(Error::OracleTooLarge(format!(
            "transfer matrix needs n <= {TRANSFER_MAX_QUBITS} and T >= 1, got n={n}, T={slices}"
        )));
    }
    let dim = 1usize << n;
    let dtau = beta / slices as f64;
    let a = beta * (1.0 - s) / (2.0 * slices as f64);
    let step = DMatrix::from_fn(dim, dim, |x, y| {
        let diag = (-dtau * ((1.0 - s) * n as f64 / 2.0 + s * hamming_cost(inst, x))).exp();
        let flips = (x ^ y).count_ones() as i32;
        diag * a.cosh().powi(n as i32 - flips) * a.sinh().powi(flips)
    });
    let mut acc = DMatrix::identity(dim, dim);
    let mut base = step;
    let mut e = slices;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    Ok(acc.trace())
}

/// Sums by recursive halving so the result does not depend on thread count
/// or chunking.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> ProblemInstance {
        // barrier window too narrow to hold an integer weight
        ProblemInstance::new(n, 0.5, 0.05).unwrap()
    }

    #[test]
    fn two_qubit_spectra() {
        let inst = flat(2);
        for s in [0.0, 1.0] {
            let spec = dense_spectrum(&inst, s).unwrap();
            for (e, want) in spec.eigenvalues.iter().zip([0.0, 1.0, 1.0, 2.0]) {
                assert!((e - want).abs() < 1e-12, "s={s}: {e}");
            }
        }
    }

    #[test]
    fn hadamard_rotation_agrees_with_eigensolver() {
        let inst = ProblemInstance::new(7, 0.5, 1.0).unwrap();
        let fast = dense_spectrum(&inst, 0.0).unwrap().eigenvalues;
        let mut slow: Vec<f64> = dense_hamiltonian(&inst, 0.0)
            .unwrap()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_rejects_large_n() {
        let inst = ProblemInstance::new(13, 0.5, 1.0).unwrap();
        assert!(matches!(dense_spectrum(&inst, 0.5), Err(Error::OracleTooLarge(_))));
    }

    #[test]
    fn krylov_matches_full_dense() {
        let inst = ProblemInstance::new(8, 0.3, 1.0).unwrap();
        for s in [0.0, 0.25, 0.75] {
            let full = dense_spectrum(&inst, s).unwrap();
            let levels = full.levels(1e-9);
            let kry = krylov_lowest_levels(&inst, s, 3).unwrap();
            for (k, (lvl, _)) in kry.iter().zip(&levels) {
                assert!((k - lvl).abs() < 1e-10, "s={s}: {k} vs {lvl}");
            }
        }
    }

    #[test]
    fn single_bit_two_slices_closed_form() {
        // one qubit at s = 0: Z = e^(-beta/2) * 2 (cosh^2 a + sinh^2 a)
        // = 1 + e^-beta, with a = beta / 4
        let inst = flat(1);
        for beta in [0.3, 1.0, 4.0] {
            let e = exact_trotter_partition(&inst, 0.0, beta, 2).unwrap();
            let a: f64 = beta / 4.0;
            let closed = (-beta / 2.0f64).exp() * 2.0 * (a.cosh().powi(2) + a.sinh().powi(2));
            assert!((e.z - closed).abs() < 1e-12 * closed);
            assert!((e.z - (1.0 + (-beta).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_limit_counts_uniform_paths() {
        let inst = ProblemInstance::new(3, 0.5, 0.4).unwrap();
        let beta = 1.7;
        let e = exact_trotter_partition(&inst, 1.0, beta, 4).unwrap();
        // only time-uniform lattices survive; each carries 2^(nT) from the
        // unnormalised link factors, which the normalisation removes
        let mut want = 0.0;
        for h in 0..=3usize {
            let binom = [1.0, 3.0, 3.0, 1.0][h];
            want += binom * (-beta * inst.cost(h).unwrap()).exp();
        }
        assert!((e.z - want).abs() < 1e-12 * want);
        assert_eq!(e.mean_offdiag_energy, 0.0);
    }

    #[test]
    fn transfer_matrix_agrees_with_enumeration() {
        let inst = ProblemInstance::new(2, 0.5, 1.0).unwrap();
        for (s, t) in [(0.0, 2), (0.5, 3), (0.8, 8), (1.0, 4)] {
            let e = exact_trotter_partition(&inst, s, 2.0, t).unwrap();
            let tm = transfer_matrix_partition(&inst, s, 2.0, t).unwrap();
            assert!((e.z - tm).abs() < 1e-12 * tm, "s={s} T={t}: {} vs {tm}", e.z);
        }
    }

    #[test]
    fn partition_symmetric_under_relabelling() {
        let inst = ProblemInstance::new(3, 0.5, 0.6).unwrap();
        let (n, t) = (3, 4);
        let e = exact_trotter_partition(&inst, 0.4, 1.5, t).unwrap();
        let code_of = |f: &dyn Fn(usize, usize) -> bool| -> usize {
            let mut c = 0;
            for tau in 0..t {
                for d in 0..n {
                    if f(tau, d) {
                        c |= 1 << (tau * n + d);
                    }
                }
            }
            c
        };
        for code in (0..1usize << (n * t)).step_by(37) {
            let bit = |tau: usize, d: usize| (code >> (tau * n + d)) & 1 == 1;
            let shifted = code_of(&|tau, d| bit((tau + 1) % t, d));
            let permuted = code_of(&|tau, d| bit(tau, (d + 1) % n));
            let p = e.probabilities[code];
            assert!((p - e.probabilities[shifted]).abs() < 1e-15);
            assert!((p - e.probabilities[permuted]).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_size_cap() {
        let inst = flat(3);
        assert!(exact_trotter_partition(&inst, 0.5, 1.0, 7).is_err());
        assert!(exact_trotter_partition(&inst, 0.5, 1.0, 1).is_err());
    }
}
