//! Continuous-time LQR synthesis and the exact mapping of the state
//! feedback onto a bank of PD controllers with feedforward.
//!
//! The Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved by
//! extracting the stable invariant subspace of the Hamiltonian matrix
//! (eigenvector basis via shifted inverse iteration) and polishing the
//! result with Newton–Kleinman steps, each of which is a Lyapunov solve.
//! When the subspace extraction is unusable (defective or ill-separated
//! spectra) the iteration restarts from a stabilizing gain obtained by
//! eigenvalue shifting.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::{Error, Result};

/// Newton–Kleinman iteration cap.
const NEWTON_MAX_ITERS: usize = 200;
/// Relative Riccati residual targeted by the refinement.
const RESIDUAL_TARGET: f64 = 1e-10;
/// Residual bound the solution must satisfy to be accepted.
const RESIDUAL_ACCEPT: f64 = 1e-9;

/// Diagonal state weight and scalar control weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    q_diag: DVector<f64>,
    r: f64,
}

impl LqrWeights {
    /// Validates `q_diag ≥ 0` (entrywise) and `r > 0`.
    pub fn new(q_diag: DVector<f64>, r: f64) -> Result<Self> {
        if q_diag.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "state weights must be finite and nonnegative".into(),
            ));
        }
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Config("control weight must be positive".into()));
        }
        Ok(Self { q_diag, r })
    }

    pub fn state_dim(&self) -> usize {
        self.q_diag.len()
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.q_diag)
    }

    pub fn q_diag(&self) -> &DVector<f64> {
        &self.q_diag
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

/// State-feedback gain together with its PD-bank decomposition.
///
/// Only the full row `K` and the split point are stored, so the
/// invariants `K = [K_p | K_d]` and `K_ref = K_p` hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    k: RowDVector<f64>,
    q: usize,
}

impl GainSet {
    /// Builds the set from a full feedback row of even length `2q`.
    pub fn from_feedback(k: RowDVector<f64>) -> Result<Self> {
        if !k.len().is_multiple_of(2) || k.is_empty() {
            return Err(Error::Dimension {
                what: "feedback gain row (must have even length 2q)",
                expected: k.len() + 1,
                got: k.len(),
            });
        }
        let q = k.len() / 2;
        Ok(Self { k, q })
    }

    /// Builds the set from proportional and derivative gain rows.
    pub fn from_pd(k_p: RowDVector<f64>, k_d: RowDVector<f64>) -> Result<Self> {
        if k_p.len() != k_d.len() || k_p.is_empty() {
            return Err(Error::Dimension {
                what: "PD gain rows (must have equal positive length)",
                expected: k_p.len(),
                got: k_d.len(),
            });
        }
        let q = k_p.len();
        let mut k = RowDVector::zeros(2 * q);
        k.columns_mut(0, q).copy_from(&k_p);
        k.columns_mut(q, q).copy_from(&k_d);
        Ok(Self { k, q })
    }

    pub fn output_dim(&self) -> usize {
        self.q
    }

    pub fn state_dim(&self) -> usize {
        2 * self.q
    }

    /// Full state-feedback row `K`.
    pub fn k(&self) -> &RowDVector<f64> {
        &self.k
    }

    /// Proportional gains `K_p` (first `q` entries of `K`).
    pub fn k_p(&self) -> RowDVector<f64> {
        self.k.columns(0, self.q).into_owned()
    }

    /// Derivative gains `K_d` (last `q` entries of `K`).
    pub fn k_d(&self) -> RowDVector<f64> {
        self.k.columns(self.q, self.q).into_owned()
    }

    /// Feedforward gains; equal to `K_p`.
    pub fn k_ref(&self) -> RowDVector<f64> {
        self.k_p()
    }
}

/// Solves `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` for the stabilizing `P`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    weights: &LqrWeights,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            what: "state matrix (must be square)",
            expected: n,
            got: a.ncols(),
        });
    }
    if b.nrows() != n || b.ncols() != 1 {
        return Err(Error::Dimension {
            what: "input matrix (must be n x 1)",
            expected: n,
            got: b.nrows(),
        });
    }
    if weights.state_dim() != n {
        return Err(Error::Dimension {
            what: "state weight diagonal",
            expected: n,
            got: weights.state_dim(),
        });
    }

    let report = crate::linearize::controllability_of(a, b);
    if !report.controllable {
        return Err(Error::Design(format!(
            "pair (A, B) is not controllable (rank {} < {})",
            report.rank, n
        )));
    }

    let q_mat = weights.q_matrix();
    let r = weights.r();

    let p0 = stable_subspace_solution(a, b, &q_mat, r)
        .filter(|p| initial_is_stabilizing(a, b, r, p))
        .or_else(|| bass_initial_solution(a, b, &q_mat, r));
    let p0 = p0.ok_or_else(|| {
        Error::Design("no stabilizing initialization found for the Riccati solve".into())
    })?;

    let p = newton_kleinman(a, b, &q_mat, r, p0)?;

    let res = care_residual(a, b, &q_mat, r, &p);
    if res >= RESIDUAL_ACCEPT {
        return Err(Error::Convergence {
            what: "Riccati refinement",
            residual: res,
        });
    }
    if !is_hurwitz(&closed_loop_from_p(a, b, r, &p)) {
        return Err(Error::Design(
            "Riccati solution does not stabilize the closed loop".into(),
        ));
    }
    Ok(p)
}

/// LQR design: `K = R⁻¹BᵀP`, split into `K_p`, `K_d`, `K_ref = K_p`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &LqrWeights) -> Result<GainSet> {
    let p = solve_care(a, b, weights)?;
    let k = feedback_row(b, weights.r(), &p);
    GainSet::from_feedback(k)
}

/// `A − B·K` for a designed gain set.
pub fn closed_loop_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, gains: &GainSet) -> DMatrix<f64> {
    a - b * gains.k()
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True when every eigenvalue of `m` has a negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    spectral_abscissa(m) < 0.0
}

/// Relative Riccati residual `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F / max(1, ‖P‖_F)`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q_mat: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> f64 {
    let pb = p * b;
    let res = a.transpose() * p + p * a - &pb * (pb.transpose() / r) + q_mat;
    res.norm() / libm::fmax(1.0, p.norm())
}

fn modulus(c: Complex<f64>) -> f64 {
    libm::hypot(c.re, c.im)
}

fn feedback_row(b: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> RowDVector<f64> {
    let k = (b.transpose() * p) / r;
    RowDVector::from_row_slice(k.row(0).transpose().as_slice())
}

fn closed_loop_from_p(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    a - b * ((b.transpose() * p) / r)
}

fn initial_is_stabilizing(a: &DMatrix<f64>, b: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> bool {
    p.iter().all(|v| v.is_finite()) && is_hurwitz(&closed_loop_from_p(a, b, r, p))
}

/// Stable invariant subspace of the Hamiltonian `[[A, −BBᵀ/r], [−Q, −Aᵀ]]`;
/// returns `U2 U1⁻¹` or `None` when the subspace cannot be extracted.
fn stable_subspace_solution(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q_mat: &DMatrix<f64>,
    r: f64,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let m = 2 * n;
    let s = b * (b.transpose() / r);
    let mut h = DMatrix::zeros(m, m);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q_mat));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let eigs = h.clone().complex_eigenvalues();
    let stable: Vec<Complex<f64>> = eigs.iter().copied().filter(|l| l.re < 0.0).collect();
    if stable.len() != n {
        return None;
    }

    let h_norm = h.norm();
    let hc = h.map(|v| Complex::new(v, 0.0));
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for lambda in stable.iter().filter(|l| l.im >= 0.0) {
        let v = inverse_iteration(&hc, *lambda, h_norm)?;
        if lambda.im == 0.0 {
            basis.push(align_real(&v)?);
        } else {
            basis.push(v.map(|c| c.re));
            basis.push(v.map(|c| c.im));
        }
    }
    if basis.len() != n {
        return None;
    }

    let u = DMatrix::from_columns(&basis);
    let u1 = u.rows(0, n).into_owned();
    let u2 = u.rows(n, n).into_owned();
    // X = U2 U1⁻¹, computed as the solution of U1ᵀ Xᵀ = U2ᵀ.
    let xt = u1.transpose().lu().solve(&u2.transpose())?;
    let x = xt.transpose();
    let sym = (&x + x.transpose()) * 0.5;
    sym.iter().all(|v| v.is_finite()).then_some(sym)
}

/// Shifted inverse iteration for one eigenvector of `hc`.
fn inverse_iteration(
    hc: &DMatrix<Complex<f64>>,
    lambda: Complex<f64>,
    h_norm: f64,
) -> Option<DVector<Complex<f64>>> {
    let m = hc.nrows();
    let ident = DMatrix::<Complex<f64>>::identity(m, m);
    // A slight shift keeps the factorization well defined while the
    // eigendirection still dominates the solve.
    for &shift in &[1e-9, 1e-6] {
        let delta = Complex::new(shift * (1.0 + modulus(lambda)), 0.0);
        let lu = (hc - &ident * (lambda + delta)).lu();
        let mut v = DVector::from_fn(m, |i, _| {
            Complex::new(1.0 + 0.3 * i as f64, 0.7 - 0.1 * i as f64)
        });
        v /= Complex::new(v.norm(), 0.0);
        let mut ok = true;
        for _ in 0..4 {
            match lu.solve(&v) {
                Some(w) => {
                    let norm = w.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w / Complex::new(norm, 0.0);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let residual = (hc * &v - &v * lambda).norm();
        if residual <= 1e-6 * libm::fmax(1.0, h_norm) {
            return Some(v);
        }
    }
    None
}

/// Rotates a numerically real eigenvector onto the real axis.
fn align_real(v: &DVector<Complex<f64>>) -> Option<DVector<f64>> {
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, c)| {
        let a = modulus(*c);
        if a > acc.1 {
            (i, a)
        } else {
            acc
        }
    });
    let pivot = v[imax];
    if modulus(pivot) == 0.0 {
        return None;
    }
    let phase = pivot / Complex::new(modulus(pivot), 0.0);
    let rotated = v.map(|c| c * phase.conj());
    let imag_norm = rotated.map(|c| c.im).norm();
    if imag_norm > 1e-6 * rotated.map(modulus).norm() {
        return None;
    }
    Some(rotated.map(|c| c.re))
}

/// Stabilizing initialization by eigenvalue shifting: with `β` beyond the
/// spectral radius, `(A+βI)Z + Z(A+βI)ᵀ = 2BBᵀ` has `Z ≻ 0` and
/// `K₀ = BᵀZ⁻¹` places the closed loop in the left half-plane. The first
/// Newton step then produces the starting `P`.
fn bass_initial_solution(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q_mat: &DMatrix<f64>,
    r: f64,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::identity(n, n) * beta;
    let z = solve_lyapunov_transposed(&shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let k0 = z.clone().lu().solve(b)?.transpose();
    let a_c = a - b * &k0;
    if !is_hurwitz(&a_c) {
        return None;
    }
    let rhs = -(q_mat + k0.transpose() * &k0 * r);
    let p = solve_lyapunov_transposed(&a_c, &rhs)?;
    let sym = (&p + p.transpose()) * 0.5;
    sym.iter().all(|v| v.is_finite()).then_some(sym)
}

/// Newton–Kleinman refinement: each step solves
/// `A_cᵀP + P A_c = −(Q + KᵀRK)` with `A_c = A − BK`.
fn newton_kleinman(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q_mat: &DMatrix<f64>,
    r: f64,
    p0: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut p = p0;
    let mut best_res = care_residual(a, b, q_mat, r, &p);
    let mut best = p.clone();
    for _ in 0..NEWTON_MAX_ITERS {
        if best_res < RESIDUAL_TARGET {
            break;
        }
        let k = feedback_row(b, r, &p);
        let k_mat = DMatrix::from_rows(&[k]);
        let a_c = a - b * &k_mat;
        let rhs = -(q_mat + k_mat.transpose() * &k_mat * r);
        let next = match solve_lyapunov_transposed(&a_c, &rhs) {
            Some(x) => (&x + x.transpose()) * 0.5,
            None => break,
        };
        let res = care_residual(a, b, q_mat, r, &next);
        if !res.is_finite() {
            break;
        }
        if res < best_res {
            best_res = res;
            best = next.clone();
        } else if res > 10.0 * best_res {
            break;
        }
        p = next;
    }
    if best_res.is_finite() {
        Ok(best)
    } else {
        Err(Error::Convergence {
            what: "Newton iteration for the Riccati equation",
            residual: best_res,
        })
    }
}

/// Solves `MᵀX + XM = C` through the Kronecker-sum linear system.
/// Unique solvability needs `λ_i(M) + λ_j(M) ≠ 0`, which holds for the
/// stable closed-loop matrices this solver is called with.
fn solve_lyapunov_transposed(m: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let nn = n * n;
    let mut coeff = DMatrix::zeros(nn, nn);
    // vec(MᵀX) = (I ⊗ Mᵀ) vec(X): block-diagonal copies of Mᵀ.
    for blk in 0..n {
        for row in 0..n {
            for col in 0..n {
                coeff[(blk * n + row, blk * n + col)] += m[(col, row)];
            }
        }
    }
    // vec(XM) = (Mᵀ ⊗ I) vec(X).
    for bi in 0..n {
        for bj in 0..n {
            let v = m[(bj, bi)];
            if v != 0.0 {
                for d in 0..n {
                    coeff[(bi * n + d, bj * n + d)] += v;
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = coeff.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, sol.as_slice()))
}
