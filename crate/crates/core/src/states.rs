//! Density matrices, pure states and the parameterized input families used
//! to probe the platypus channel.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, basis, hermitian_eig, kron_vec, re, vec_norm, ComplexMatrix, EigenDecomposition, C64,
};

/// Tolerance for Hermiticity, unit trace and positivity of a density matrix.
pub const STATE_TOL: f64 = 1e-9;
/// Eigenvalues at or below this are treated as exact zeros.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Hermitian, positive semidefinite, unit-trace matrix with subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates and wraps `mat` as a state on the given subsystems.
    pub fn new(mat: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(&mat, &dims)?;
        let norm = mat.frobenius_norm();
        let defect = mat.hermiticity_defect();
        if defect > STATE_TOL * norm.max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let mat = mat.hermitian_part();
        let min = *hermitian_eig(&mat)?.values.last().unwrap();
        if min < -STATE_TOL {
            return Err(Error::NegativeEigenvalue(min));
        }
        Ok(DensityMatrix { mat, dims })
    }

    /// Single-system state of dimension `mat.rows()`.
    pub fn from_matrix(mat: ComplexMatrix) -> Result<Self> {
        let d = mat.rows();
        Self::new(mat, vec![d])
    }

    /// Projects an arbitrary square matrix onto the set of density matrices:
    /// Hermitian part, negative eigenvalues clipped to zero, trace renormalized.
    pub fn project(mat: &ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(mat, &dims)?;
        let eig = hermitian_eig(&mat.hermitian_part())?;
        let total: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::InvalidState(
                "no positive spectral weight to project".into(),
            ));
        }
        let m = eig.map_values(|l| l.max(0.0) / total);
        Ok(DensityMatrix { mat: m, dims })
    }

    pub fn pure(psi: &PureState) -> Self {
        DensityMatrix {
            mat: ComplexMatrix::outer(&psi.vec, &psi.vec),
            dims: psi.dims.clone(),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            mat: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            dims: vec![d],
        }
    }

    /// Diagonal state Σ pᵢ |i⟩⟨i|.
    pub fn diagonal(probs: &[f64], dims: Vec<usize>) -> Result<Self> {
        Self::new(ComplexMatrix::from_diag(probs), dims)
    }

    /// Wraps a matrix already known to be a valid state (internal fast path).
    pub(crate) fn from_trusted(mat: ComplexMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(mat.rows(), dims.iter().product::<usize>());
        DensityMatrix {
            mat: mat.hermitian_part(),
            dims,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// Same matrix with new subsystem labels (product must match).
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        check_dims(&self.mat, &dims)?;
        Ok(DensityMatrix { mat: self.mat, dims })
    }

    pub fn eig(&self) -> Result<EigenDecomposition> {
        hermitian_eig(&self.mat)
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.eig()?.values)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let mat = self.mat.kron(&other.mat)?;
        let dims = self.dims.iter().chain(&other.dims).copied().collect();
        Ok(DensityMatrix { mat, dims })
    }

    /// U ρ U†.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        if u.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.cols(),
            });
        }
        let d = u.rows();
        Ok(DensityMatrix::from_trusted(u.sandwich(&self.mat), vec![d]))
    }

    /// Reorders subsystems so that new subsystem k is old subsystem `perm[k]`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Result<DensityMatrix> {
        let n = self.dims.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidSubsystems(format!(
                "{perm:?} is not a permutation of {n} subsystems"
            )));
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let d = self.dim();
        let map: Vec<usize> = (0..d)
            .map(|new_idx| {
                let digits = split_index(new_idx, &new_dims);
                let mut old_digits = vec![0; n];
                for (k, &p) in perm.iter().enumerate() {
                    old_digits[p] = digits[k];
                }
                join_index(&old_digits, &self.dims)
            })
            .collect();
        let mat = ComplexMatrix::from_fn(d, d, |i, j| self.mat[(map[i], map[j])]);
        Ok(DensityMatrix {
            mat,
            dims: new_dims,
        })
    }
}

fn check_dims(mat: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    if !mat.is_square() {
        return Err(Error::NotSquare {
            rows: mat.rows(),
            cols: mat.cols(),
        });
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidSubsystems(format!("bad dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != mat.rows() {
        return Err(Error::DimensionMismatch {
            expected: mat.rows(),
            found: prod,
        });
    }
    Ok(())
}

/// Mixed-radix digits of `idx` (most significant first).
pub(crate) fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

pub(crate) fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits
        .iter()
        .zip(dims)
        .fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Unit-norm state vector with subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    vec: Vec<C64>,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(vec: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let prod: usize = dims.iter().product();
        if dims.is_empty() || prod != vec.len() {
            return Err(Error::DimensionMismatch {
                expected: vec.len(),
                found: prod,
            });
        }
        let n = vec_norm(&vec);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("norm is {n}")));
        }
        Ok(PureState { vec, dims })
    }

    /// Normalizes `vec` before wrapping it.
    pub fn normalized(vec: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let n = vec_norm(&vec);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(vec.into_iter().map(|z| z / n).collect(), dims)
    }

    pub fn basis(dims: Vec<usize>, digits: &[usize]) -> Self {
        let d = dims.iter().product();
        PureState {
            vec: basis(d, join_index(digits, &dims)),
            dims,
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.vec
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::pure(self)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            vec: kron_vec(&self.vec, &other.vec),
            dims: self.dims.iter().chain(&other.dims).copied().collect(),
        }
    }
}

/// Von Neumann entropy in bits.
///
/// Eigenvalues in [−1e-9, 1e-12] contribute nothing; anything more negative is
/// rejected as an invalid state.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.spectrum()?)
}

/// −Σ λ log₂ λ over a spectrum, with the same clamping as [`von_neumann_entropy`].
pub fn entropy_of_spectrum(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in values {
        if l < -STATE_TOL {
            return Err(Error::NegativeEigenvalue(l));
        }
        if l > EIGEN_CLAMP {
            s -= l * l.log2();
        }
    }
    Ok(s.max(0.0))
}

/// Reduced state on the subsystems listed in `keep` (kept in ascending order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.dims.len();
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems("keep set is empty".into()));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidSubsystems(format!(
            "subsystem {bad} out of range for {n} subsystems"
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| rho.dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| rho.dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    let full_index = |ki: usize, ti: usize| {
        let kd = split_index(ki, &kept_dims);
        let td = split_index(ti, &traced_dims);
        let mut digits = vec![0; n];
        for (slot, &k) in kept.iter().enumerate() {
            digits[k] = kd[slot];
        }
        for (slot, &t) in traced.iter().enumerate() {
            digits[t] = td[slot];
        }
        join_index(&digits, &rho.dims)
    };
    let index: Vec<Vec<usize>> = (0..dk)
        .map(|ki| (0..dt).map(|ti| full_index(ki, ti)).collect())
        .collect();

    let mat = ComplexMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| rho.mat[(index[i][t], index[j][t])]).sum()
    });
    Ok(DensityMatrix::from_trusted(mat, kept_dims))
}

/// Purification Σ √λᵢ |vᵢ⟩⊗|i⟩ on dims [d, rank].
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let eig = rho.eig()?;
    let d = rho.dim();
    let support: Vec<usize> = (0..d).filter(|&k| eig.values[k] > EIGEN_CLAMP).collect();
    let rank = support.len().max(1);
    let mut vec = vec![C64::new(0.0, 0.0); d * rank];
    for (slot, &k) in support.iter().enumerate() {
        let amp = eig.values[k].sqrt();
        for i in 0..d {
            vec[i * rank + slot] += eig.vectors[(i, k)] * amp;
        }
    }
    let mut dims = vec![d];
    dims.push(rank);
    PureState::normalized(vec, dims)
}

/// Uhlmann fidelity (Tr √(√ρ σ √ρ))².
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let sqrt_rho = rho.eig()?.map_values(|l| l.max(0.0).sqrt());
    let inner = sqrt_rho.sandwich(&sigma.mat).hermitian_part();
    let vals = hermitian_eig(&inner)?.values;
    let tr: f64 = vals.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(Error::out_of_range(name, x, "[0, 1]"));
    }
    Ok(())
}

/// ρ(u) = (1−u)|0⟩⟨0| + u|2⟩⟨2| on a qutrit.
pub fn family_rho_u(u: f64) -> Result<DensityMatrix> {
    check_unit("u", u)?;
    DensityMatrix::diagonal(&[1.0 - u, 0.0, u], vec![3])
}

fn ket32(i: usize, j: usize) -> Vec<C64> {
    basis(6, 2 * i + j)
}

/// |φ(t)⟩ = √(1−t)|20⟩ + √t|11⟩ on the qutrit ⊗ qubit system.
fn mixed_branch(t: f64) -> Vec<C64> {
    let a = ket32(2, 0);
    let b = ket32(1, 1);
    a.iter()
        .zip(&b)
        .map(|(x, y)| x * (1.0 - t).sqrt() + y * t.sqrt())
        .collect()
}

/// ρ(w, v) = (1−w)|00⟩⟨00| + w|ξ⟩⟨ξ| with |ξ⟩ = √(1−v)|20⟩ + √v|11⟩, dims [3, 2].
pub fn family_rho_wv(w: f64, v: f64) -> Result<DensityMatrix> {
    check_unit("w", w)?;
    check_unit("v", v)?;
    let xi = mixed_branch(v);
    let zero = ket32(0, 0);
    let mat = &ComplexMatrix::outer(&zero, &zero).scale_real(1.0 - w)
        + &ComplexMatrix::outer(&xi, &xi).scale_real(w);
    DensityMatrix::new(mat, vec![3, 2])
}

/// ρ(r₁, r₂, r₃) = r₁|00⟩⟨00| + r₂|01⟩⟨01| + (1−r₁−r₂)|φ⟩⟨φ| with
/// |φ⟩ = √(1−r₃)|20⟩ + √r₃|11⟩, dims [3, 2].
pub fn family_rho_r(r1: f64, r2: f64, r3: f64) -> Result<DensityMatrix> {
    check_unit("r1", r1)?;
    check_unit("r2", r2)?;
    check_unit("r3", r3)?;
    if r1 + r2 > 1.0 + 1e-12 {
        return Err(Error::out_of_range("r1 + r2", r1 + r2, "[0, 1]"));
    }
    let rest = (1.0 - r1 - r2).max(0.0);
    let phi = mixed_branch(r3);
    let k00 = ket32(0, 0);
    let k01 = ket32(0, 1);
    let mut mat = ComplexMatrix::outer(&k00, &k00).scale_real(r1);
    mat = &mat + &ComplexMatrix::outer(&k01, &k01).scale_real(r2);
    mat = &mat + &ComplexMatrix::outer(&phi, &phi).scale_real(rest);
    DensityMatrix::new(mat, vec![3, 2])
}

/// Random full-rank state: G G† / Tr(G G†) for complex Gaussian G.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = linalg::random_gaussian(d, d, rng);
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::from_trusted(m.scale_real(1.0 / tr), vec![d])
}

/// Random pure state with Haar-distributed amplitudes.
pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> PureState {
    let g = linalg::random_gaussian(d, 1, rng);
    PureState::normalized(g.col(0), vec![d]).expect("gaussian vector is nonzero")
}

/// |Φ⁺⟩ = Σᵢ |ii⟩ / √d.
pub fn max_entangled(d: usize) -> PureState {
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = re(1.0 / (d as f64).sqrt());
    }
    PureState {
        vec: v,
        dims: vec![d, d],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        let zero = DensityMatrix::diagonal(&[1.0, 0.0], vec![2]).unwrap();
        assert_eq!(von_neumann_entropy(&zero).unwrap(), 0.0);
        assert!(close(
            von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).unwrap(),
            1.0,
            1e-12
        ));
        assert!(close(
            von_neumann_entropy(&DensityMatrix::maximally_mixed(6)).unwrap(),
            6f64.log2(),
            1e-12
        ));
        let s = von_neumann_entropy(&family_rho_u(0.3).unwrap()).unwrap();
        let h = -0.7 * 0.7f64.log2() - 0.3 * 0.3f64.log2();
        assert!(close(s, h, 1e-12));
        assert!(close(s, 0.8813, 1e-4));
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        assert!(matches!(
            entropy_of_spectrum(&[1.1, -0.1]),
            Err(Error::NegativeEigenvalue(_))
        ));
        assert_eq!(entropy_of_spectrum(&[1.0, -1e-10]).unwrap(), 0.0);
    }

    #[test]
    fn density_validation() {
        let bad_trace = ComplexMatrix::from_diag(&[0.5, 0.4]);
        assert!(DensityMatrix::from_matrix(bad_trace).is_err());
        let negative = ComplexMatrix::from_diag(&[1.5, -0.5]);
        assert!(matches!(
            DensityMatrix::from_matrix(negative),
            Err(Error::NegativeEigenvalue(_))
        ));
        let wrong_dims = ComplexMatrix::from_diag(&[0.5, 0.5]);
        assert!(DensityMatrix::new(wrong_dims, vec![3]).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = a.tensor(&b).unwrap();
        let ra = partial_trace(&ab, &[0]).unwrap();
        let rb = partial_trace(&ab, &[1]).unwrap();
        assert!(ra.matrix().max_abs_diff(a.matrix()) < 1e-12);
        assert!(rb.matrix().max_abs_diff(b.matrix()) < 1e-12);
        assert_eq!(rb.dims(), &[3]);

        let bell = max_entangled(2).to_density();
        let r = partial_trace(&bell, &[0]).unwrap();
        assert!(r
            .matrix()
            .max_abs_diff(DensityMatrix::maximally_mixed(2).matrix())
            < 1e-12);
    }

    #[test]
    fn partial_trace_matches_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let rho = random_density(4, &mut rng).with_dims(vec![2, 2]).unwrap();
        let got = partial_trace(&rho, &[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut expected = C64::new(0.0, 0.0);
                for k in 0..2 {
                    expected += rho.matrix()[(2 * i + k, 2 * j + k)];
                }
                assert!((got.matrix()[(i, j)] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_errors() {
        let rho = DensityMatrix::maximally_mixed(4).with_dims(vec![2, 2]).unwrap();
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[2]).is_err());
    }

    #[test]
    fn purify_examples() {
        let zero = DensityMatrix::diagonal(&[1.0, 0.0], vec![2]).unwrap();
        let p = purify(&zero).unwrap();
        assert_eq!(p.dims(), &[2, 1]);
        assert!((p.amplitudes()[0].norm() - 1.0).abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(2);
        let p = purify(&mixed).unwrap();
        assert_eq!(p.dims(), &[2, 2]);
        let back = partial_trace(&p.to_density(), &[0]).unwrap();
        assert!(back.matrix().max_abs_diff(mixed.matrix()) < 1e-12);

        let rho = family_rho_u(0.445).unwrap();
        let back = partial_trace(&purify(&rho).unwrap().to_density(), &[0]).unwrap();
        assert!(close(fidelity(&back, &rho).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn fidelity_examples() {
        let zero = DensityMatrix::diagonal(&[1.0, 0.0], vec![2]).unwrap();
        let one = DensityMatrix::diagonal(&[0.0, 1.0], vec![2]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(close(fidelity(&zero, &zero).unwrap(), 1.0, 1e-12));
        assert!(close(fidelity(&zero, &one).unwrap(), 0.0, 1e-12));
        assert!(close(fidelity(&zero, &mixed).unwrap(), 0.5, 1e-12));
        assert!(fidelity(&zero, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..20 {
            let a = random_density(3, &mut rng);
            let b = random_density(3, &mut rng);
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            assert!(close(fab, fba, 1e-8));
            assert!(fab < 1.0 - 1e-6);
        }
    }

    #[test]
    fn family_u_examples() {
        let r0 = family_rho_u(0.0).unwrap();
        assert_eq!(r0.matrix(), &ComplexMatrix::from_diag(&[1.0, 0.0, 0.0]));
        let r1 = family_rho_u(1.0).unwrap();
        assert_eq!(r1.matrix(), &ComplexMatrix::from_diag(&[0.0, 0.0, 1.0]));
        let r = family_rho_u(0.445).unwrap();
        assert!(r
            .matrix()
            .max_abs_diff(&ComplexMatrix::from_diag(&[0.555, 0.0, 0.445]))
            < 1e-15);
        assert!(family_rho_u(1.2).is_err());
        assert!(family_rho_u(-0.1).is_err());
    }

    #[test]
    fn family_wv_examples() {
        let r = family_rho_wv(0.0, 0.3).unwrap();
        assert_eq!(r.matrix()[(0, 0)], re(1.0));
        assert_eq!(r.dims(), &[3, 2]);
        let r = family_rho_wv(1.0, 0.0).unwrap();
        assert!((r.matrix()[(4, 4)] - re(1.0)).norm() < 1e-15);

        let r = family_rho_wv(0.05, 0.27).unwrap();
        let e = r.eig().unwrap();
        assert!(close(e.values[0], 0.95, 1e-12));
        assert!(close(e.values[1], 0.05, 1e-12));
        assert!(e.values[2..].iter().all(|l| l.abs() < 1e-12));
        let v = e.vector(1);
        // √0.73|20⟩ + √0.27|11⟩ up to global phase.
        assert!(close(v[4].norm(), 0.73f64.sqrt(), 1e-12));
        assert!(close(v[3].norm(), 0.27f64.sqrt(), 1e-12));
        assert!(family_rho_wv(0.5, 1.5).is_err());
    }

    #[test]
    fn family_r_examples() {
        let r = family_rho_r(1.0, 0.0, 0.7).unwrap();
        assert_eq!(r.matrix()[(0, 0)], re(1.0));
        let r = family_rho_r(0.0, 0.0, 1.0).unwrap();
        assert!((r.matrix()[(3, 3)] - re(1.0)).norm() < 1e-15);
        let r = family_rho_r(0.44, 0.07, 0.27).unwrap();
        assert!(close(r.matrix().trace().re, 1.0, 1e-12));
        let rank = r.spectrum().unwrap().iter().filter(|&&l| l > 1e-12).count();
        assert_eq!(rank, 3);
        assert!(family_rho_r(0.7, 0.4, 0.5).is_err());
    }

    #[test]
    fn permute_subsystems_swaps_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        let swapped = ab.permute_subsystems(&[1, 0]).unwrap();
        assert_eq!(swapped.dims(), &[3, 2]);
        assert!(swapped.matrix().max_abs_diff(ba.matrix()) < 1e-14);
        assert!(ab.permute_subsystems(&[0, 0]).is_err());
    }

    #[test]
    fn project_clips_negative_weight() {
        let m = ComplexMatrix::from_diag(&[0.8, 0.3, -0.1]);
        let p = DensityMatrix::project(&m, vec![3]).unwrap();
        let s = p.spectrum().unwrap();
        assert!(close(s[0], 0.8 / 1.1, 1e-12));
        assert!(close(s[2], 0.0, 1e-12));
    }
}
