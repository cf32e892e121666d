//! Exact two-qubit density-matrix engine.
//!
//! States are 4x4 complex matrices over the product basis |00>, |01>, |10>,
//! |11> where the first (left) tensor factor is the client qubit and the
//! second is the server qubit. All gates and measurements are exact; the only
//! randomness is the uniform draw injected into [`measure_qubit`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DIM: usize = 4;

/// Hermiticity and unit-trace tolerance for state validation.
pub const HERM_TOL: f64 = 1e-12;
/// Eigenvalues may dip slightly negative from accumulated rounding.
pub const PSD_TOL: f64 = 1e-9;

type Mat4 = [[Complex64; 4]; 4];
type Mat2 = [[Complex64; 2]; 2];

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StateError {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("negative eigenvalue {0:.3e} below PSD tolerance")]
    NotPositive(f64),
    #[error("rotation steps {0} outside [-31, 32]")]
    BadRotationSteps(i32),
}

/// Which half of the pair an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    Client,
    Server,
}

impl Qubit {
    pub fn peer(self) -> Qubit {
        match self {
            Qubit::Client => Qubit::Server,
            Qubit::Server => Qubit::Client,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Qubit::Client => 0,
            Qubit::Server => 1,
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qubit::Client => write!(f, "client"),
            Qubit::Server => write!(f, "server"),
        }
    }
}

/// The four maximally entangled two-qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub fn label(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi_plus",
            BellState::PhiMinus => "phi_minus",
            BellState::PsiPlus => "psi_plus",
            BellState::PsiMinus => "psi_minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

/// Measurement basis: an axis plus a readout orientation. Measuring in
/// `(axis, -1)` is statistic-equivalent to measuring in `(axis, +1)` with the
/// outcome bit flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasBasis {
    pub axis: Axis,
    /// +1 or -1.
    pub sign: i8,
}

impl MeasBasis {
    pub fn new(axis: Axis, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1, "basis sign must be +1 or -1");
        MeasBasis { axis, sign }
    }

    pub fn positive(axis: Axis) -> Self {
        MeasBasis { axis, sign: 1 }
    }

    pub fn label(self) -> String {
        format!("{}{}", if self.sign >= 0 { "+" } else { "-" }, self.axis.label())
    }

    pub fn parse(s: &str) -> Option<MeasBasis> {
        let (sign, axis) = match s.as_bytes().first()? {
            b'+' => (1, &s[1..]),
            b'-' => (-1, &s[1..]),
            _ => (1, s),
        };
        let axis = match axis {
            "X" | "x" => Axis::X,
            "Y" | "y" => Axis::Y,
            "Z" | "z" => Axis::Z,
            _ => return None,
        };
        Some(MeasBasis { axis, sign })
    }
}

/// A single-qubit rotation in units of pi/16 about X, Y or Z.
///
/// 32 steps is a pi rotation; composition of a rotation and its inverse is
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rotation {
    pub axis: Axis,
    /// Multiple of pi/16, in [-31, 32].
    pub steps: i32,
}

impl Rotation {
    pub fn new(axis: Axis, steps: i32) -> Result<Self, StateError> {
        if !(-31..=32).contains(&steps) {
            return Err(StateError::BadRotationSteps(steps));
        }
        Ok(Rotation { axis, steps })
    }

    pub fn angle(self) -> f64 {
        self.steps as f64 * std::f64::consts::PI / 16.0
    }

    pub fn inverse(self) -> Rotation {
        // 32 steps == pi; -32 is out of range but represents the same unitary
        // sign-flipped, so map the inverse of 32 back to 32 would be wrong for
        // the unitary itself. Steps in [-31, 32] always have -steps in
        // [-32, 31]; only steps == 32 needs the wraparound, and exp(-i*pi*s) =
        // -exp(+i*pi*s) differs by a global phase that cancels in U rho U'.
        let steps = if self.steps == 32 { 32 } else { -self.steps };
        Rotation { axis: self.axis, steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    pub fn matrix(self) -> Mat2 {
        let i = Complex64::new(0.0, 1.0);
        match self {
            PauliOp::I => [[C1, C0], [C0, C1]],
            PauliOp::X => [[C0, C1], [C1, C0]],
            PauliOp::Y => [[C0, -i], [i, C0]],
            PauliOp::Z => [[C1, C0], [C0, -C1]],
        }
    }

    pub fn from_axis(axis: Axis) -> PauliOp {
        match axis {
            Axis::X => PauliOp::X,
            Axis::Y => PauliOp::Y,
            Axis::Z => PauliOp::Z,
        }
    }
}

/// A two-qubit density matrix: Hermitian, unit trace, positive semidefinite
/// within tolerance.
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DensityMatrix [")?;
        for row in &self.m {
            write!(f, "  ")?;
            for e in row {
                write!(f, "{:+.4}{:+.4}i  ", e.re, e.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl DensityMatrix {
    /// Wraps a raw matrix, validating the state invariants.
    pub fn new(m: Mat4) -> Result<Self, StateError> {
        let dm = DensityMatrix { m };
        dm.validate()?;
        Ok(dm)
    }

    /// Wraps without validation; used internally where the result is exact by
    /// construction. Debug builds still check.
    fn new_unchecked(m: Mat4) -> Self {
        let dm = DensityMatrix { m };
        debug_assert_eq!(dm.validate(), Ok(()));
        dm
    }

    pub fn elements(&self) -> &Mat4 {
        &self.m
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    /// Population of the computational basis state `|idx>`.
    pub fn population(&self, idx: usize) -> f64 {
        self.m[idx][idx].re
    }

    pub fn maximally_mixed() -> Self {
        let mut m = [[C0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        DensityMatrix::new_unchecked(m)
    }

    /// Product state |b_c b_s><b_c b_s| of two computational basis states.
    pub fn basis_state(client_bit: u8, server_bit: u8) -> Self {
        let idx = (client_bit as usize) * 2 + server_bit as usize;
        let mut m = [[C0; 4]; 4];
        m[idx][idx] = C1;
        DensityMatrix::new_unchecked(m)
    }

    pub fn trace(&self) -> Complex64 {
        (0..DIM).map(|i| self.m[i][i]).sum()
    }

    /// Checks all state invariants: Hermitian to 1e-12 per element, trace
    /// within 1e-12 of one, eigenvalues above -1e-9.
    pub fn validate(&self) -> Result<(), StateError> {
        let mut max_asym = 0.0f64;
        for i in 0..DIM {
            for j in 0..DIM {
                let asym = (self.m[i][j] - self.m[j][i].conj()).norm();
                max_asym = max_asym.max(asym);
            }
        }
        if max_asym > HERM_TOL {
            return Err(StateError::NotHermitian(max_asym));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > HERM_TOL || tr.im.abs() > HERM_TOL {
            return Err(StateError::BadTrace(tr.re));
        }
        let (evals, _) = hermitian_eigen(&self.m);
        if let Some(&min) = evals
            .iter()
            .min_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"))
        {
            if min < -PSD_TOL {
                return Err(StateError::NotPositive(min));
            }
        }
        Ok(())
    }

    /// Purity Tr(rho^2).
    pub fn purity(&self) -> f64 {
        let sq = mat_mul(&self.m, &self.m);
        (0..DIM).map(|i| sq[i][i].re).sum()
    }

    /// Reduced state of one qubit (2x2), tracing out the other.
    pub fn marginal(&self, qubit: Qubit) -> Mat2 {
        let mut out = [[C0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..2 {
                    let (r, c) = match qubit {
                        // keep client index, trace server
                        Qubit::Client => (a * 2 + k, b * 2 + k),
                        // keep server index, trace client
                        Qubit::Server => (k * 2 + a, k * 2 + b),
                    };
                    out[a][b] += self.m[r][c];
                }
            }
        }
        out
    }

    /// Replaces one qubit's share with the maximally mixed single-qubit state,
    /// keeping the other qubit's marginal: the affected qubit carries no
    /// information afterwards.
    pub fn with_qubit_scrambled(&self, qubit: Qubit) -> DensityMatrix {
        let other = self.marginal(qubit.peer());
        let half = Complex64::new(0.5, 0.0);
        let eye = [[half, C0], [C0, half]];
        let m = match qubit {
            Qubit::Client => kron(&eye, &other),
            Qubit::Server => kron(&other, &eye),
        };
        DensityMatrix::new_unchecked(m)
    }

    /// Single-qubit depolarizing channel: with probability `p` the named
    /// qubit is replaced by the maximally mixed state.
    pub fn depolarize_qubit(&self, qubit: Qubit, p: f64) -> DensityMatrix {
        assert!((0.0..=1.0).contains(&p), "depolarization probability in [0,1]");
        if p == 0.0 {
            return self.clone();
        }
        let scrambled = self.with_qubit_scrambled(qubit);
        let mut m = [[C0; 4]; 4];
        for i in 0..DIM {
            for j in 0..DIM {
                m[i][j] = self.m[i][j] * (1.0 - p) + scrambled.m[i][j] * p;
            }
        }
        DensityMatrix::new_unchecked(m)
    }
}

/// Pure projector of the named Bell state.
///
/// Sign conventions: Phi+- = (|00> +- |11>)/sqrt(2), Psi+- = (|01> +- |10>)/sqrt(2).
pub fn bell_density(b: BellState) -> DensityMatrix {
    let h = Complex64::new(0.5, 0.0);
    let (i1, i2, sign) = match b {
        BellState::PhiPlus => (0, 3, 1.0),
        BellState::PhiMinus => (0, 3, -1.0),
        BellState::PsiPlus => (1, 2, 1.0),
        BellState::PsiMinus => (1, 2, -1.0),
    };
    let mut m = [[C0; 4]; 4];
    m[i1][i1] = h;
    m[i2][i2] = h;
    m[i1][i2] = h * sign;
    m[i2][i1] = h * sign;
    DensityMatrix::new_unchecked(m)
}

/// 2x2 unitary exp(-i * angle * sigma_axis / 2).
pub fn rotation_unitary(r: Rotation) -> Mat2 {
    let half = r.angle() / 2.0;
    let c = Complex64::new(half.cos(), 0.0);
    let ms = Complex64::new(0.0, -half.sin());
    let sigma = PauliOp::from_axis(r.axis).matrix();
    let mut u = [[C0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            u[i][j] = sigma[i][j] * ms;
        }
        u[i][i] += c;
    }
    u
}

/// Applies `U rho U^dagger` with U the rotation on the named qubit.
pub fn apply_local_rotation(rho: &DensityMatrix, qubit: Qubit, r: Rotation) -> DensityMatrix {
    let u2 = rotation_unitary(r);
    apply_local_unitary(rho, qubit, &u2)
}

/// Applies an arbitrary single-qubit unitary to one side.
pub fn apply_local_unitary(rho: &DensityMatrix, qubit: Qubit, u2: &Mat2) -> DensityMatrix {
    let eye = [[C1, C0], [C0, C1]];
    let u4 = match qubit {
        Qubit::Client => kron(u2, &eye),
        Qubit::Server => kron(&eye, u2),
    };
    let tmp = mat_mul(&u4, rho.elements());
    let m = mat_mul(&tmp, &adjoint(&u4));
    DensityMatrix::new_unchecked(hermitize(m))
}

/// Born-rule measurement of one qubit in the given basis.
///
/// Returns the outcome bit and the post-measurement state. Bit 0 corresponds
/// to the +1 eigenvalue of `sign * sigma_axis`; the measured qubit is left in
/// the corresponding eigenstate, and the partner qubit collapses accordingly.
/// `rand` must be a uniform draw in [0, 1).
pub fn measure_qubit(
    rho: &DensityMatrix,
    qubit: Qubit,
    basis: MeasBasis,
    rand: f64,
) -> (u8, DensityMatrix) {
    debug_assert!((0.0..1.0).contains(&rand));
    let proj0 = eigen_projector(basis, 0);
    let eye = [[C1, C0], [C0, C1]];
    let p0_full = match qubit {
        Qubit::Client => kron(&proj0, &eye),
        Qubit::Server => kron(&eye, &proj0),
    };
    let collapsed0 = mat_mul(&mat_mul(&p0_full, rho.elements()), &p0_full);
    let p0: f64 = (0..DIM).map(|i| collapsed0[i][i].re).sum();

    let (bit, mut post, norm) = if rand < p0 {
        (0u8, collapsed0, p0)
    } else {
        let proj1 = eigen_projector(basis, 1);
        let p1_full = match qubit {
            Qubit::Client => kron(&proj1, &eye),
            Qubit::Server => kron(&eye, &proj1),
        };
        let collapsed1 = mat_mul(&mat_mul(&p1_full, rho.elements()), &p1_full);
        (1u8, collapsed1, 1.0 - p0)
    };
    for row in post.iter_mut() {
        for e in row.iter_mut() {
            *e /= norm;
        }
    }
    (bit, DensityMatrix::new_unchecked(hermitize(post)))
}

/// Probability that measuring `qubit` in `basis` yields bit 0.
pub fn outcome_probability_zero(rho: &DensityMatrix, qubit: Qubit, basis: MeasBasis) -> f64 {
    let proj0 = eigen_projector(basis, 0);
    let eye = [[C1, C0], [C0, C1]];
    let p0_full = match qubit {
        Qubit::Client => kron(&proj0, &eye),
        Qubit::Server => kron(&eye, &proj0),
    };
    let collapsed = mat_mul(&p0_full, rho.elements());
    (0..DIM).map(|i| collapsed[i][i].re).sum()
}

/// Projector onto the eigenstate of `sign * sigma_axis` selected by `bit`
/// (bit 0 -> +1 eigenvalue).
fn eigen_projector(basis: MeasBasis, bit: u8) -> Mat2 {
    let sigma = PauliOp::from_axis(basis.axis).matrix();
    // P = (I + e * sign * sigma) / 2 with e = +1 for bit 0, -1 for bit 1
    let e = if bit == 0 { 1.0 } else { -1.0 };
    let scale = e * basis.sign as f64 * 0.5;
    let mut p = [[C0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            p[i][j] = sigma[i][j] * scale;
        }
        p[i][i] += Complex64::new(0.5, 0.0);
    }
    p
}

/// Tr(rho * (sigma_client (x) sigma_server)). Real within 1e-12 for valid states.
pub fn pauli_expectation(rho: &DensityMatrix, client_obs: PauliOp, server_obs: PauliOp) -> f64 {
    let op = kron(&client_obs.matrix(), &server_obs.matrix());
    let prod = mat_mul(rho.elements(), &op);
    let tr: Complex64 = (0..DIM).map(|i| prod[i][i]).sum();
    debug_assert!(tr.im.abs() < 1e-10, "expectation has imaginary part {}", tr.im);
    tr.re
}

/// Overlap <target| rho |target> with the named Bell state.
pub fn fidelity_with_pure(rho: &DensityMatrix, target: BellState) -> f64 {
    let proj = bell_density(target);
    let prod = mat_mul(rho.elements(), proj.elements());
    let tr: Complex64 = (0..DIM).map(|i| prod[i][i]).sum();
    tr.re
}

// --- small dense linear algebra -------------------------------------------

pub(crate) fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for i in 0..DIM {
        for k in 0..DIM {
            let aik = a[i][k];
            if aik == C0 {
                continue;
            }
            for j in 0..DIM {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub(crate) fn adjoint(a: &Mat4) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

/// Forces exact Hermitian symmetry, averaging away rounding asymmetry.
fn hermitize(a: Mat4) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = (a[i][j] + a[j][i].conj()) * 0.5;
        }
    }
    out
}

pub(crate) fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i * 2 + k][j * 2 + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a 4x4 Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues (ascending) and the unitary whose columns
/// are the matching eigenvectors.
pub fn hermitian_eigen(m: &Mat4) -> ([f64; 4], Mat4) {
    let mut a = *m;
    let mut v: Mat4 = [[C0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = C1;
    }

    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..DIM {
            for q in (p + 1)..DIM {
                off = off.max(a[p][q].norm());
            }
        }
        if off < 1e-15 {
            break;
        }
        for p in 0..DIM {
            for q in (p + 1)..DIM {
                let apq = a[p][q];
                let r = apq.norm();
                if r < 1e-18 {
                    continue;
                }
                let phase = apq / r;
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // plane rotation R: R[p][p]=c, R[p][q]=s, R[q][p]=-s*conj(phase),
                // R[q][q]=c*conj(phase); apply A <- R^dag A R, V <- V R
                let rp = [Complex64::new(c, 0.0), Complex64::new(s, 0.0)];
                let rq = [-phase.conj() * s, phase.conj() * c];

                for k in 0..DIM {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = akp * rp[0] + akq * rq[0];
                    a[k][q] = akp * rp[1] + akq * rq[1];
                }
                for k in 0..DIM {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = apk * rp[0].conj() + aqk * rq[0].conj();
                    a[q][k] = apk * rp[1].conj() + aqk * rq[1].conj();
                }
                for k in 0..DIM {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = vkp * rp[0] + vkq * rq[0];
                    v[k][q] = vkp * rp[1] + vkq * rq[1];
                }
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    let evals_raw: Vec<f64> = (0..DIM).map(|i| a[i][i].re).collect();
    order.sort_by(|&i, &j| {
        evals_raw[i]
            .partial_cmp(&evals_raw[j])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let mut evals = [0.0; 4];
    let mut vecs: Mat4 = [[C0; 4]; 4];
    for (col, &src) in order.iter().enumerate() {
        evals[col] = evals_raw[src];
        for row in 0..DIM {
            vecs[row][col] = v[row][src];
        }
    }
    (evals, vecs)
}

/// Rebuilds sum_k lambda_k |v_k><v_k| from an eigensystem.
pub fn from_eigen(evals: &[f64; 4], vecs: &Mat4) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for k in 0..DIM {
        if evals[k] == 0.0 {
            continue;
        }
        for i in 0..DIM {
            for j in 0..DIM {
                out[i][j] += vecs[i][k] * vecs[j][k].conj() * evals[k];
            }
        }
    }
    hermitize(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn approx_eq(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> bool {
        (0..DIM).all(|i| (0..DIM).all(|j| (a.element(i, j) - b.element(i, j)).norm() <= tol))
    }

    pub(crate) fn random_density(rng: &mut ChaCha12Rng) -> DensityMatrix {
        // rho = A A^dag / Tr, always a valid state
        let mut a = [[C0; 4]; 4];
        for row in a.iter_mut() {
            for e in row.iter_mut() {
                *e = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let aad = mat_mul(&a, &adjoint(&a));
        let tr: f64 = (0..DIM).map(|i| aad[i][i].re).sum();
        let mut m = [[C0; 4]; 4];
        for i in 0..DIM {
            for j in 0..DIM {
                m[i][j] = aad[i][j] / tr;
            }
        }
        DensityMatrix::new(m).expect("random construction is a valid state")
    }

    #[test]
    fn bell_densities_match_definitions() {
        let phi = bell_density(BellState::PhiPlus);
        assert!((phi.element(0, 0).re - 0.5).abs() < 1e-15);
        assert!((phi.element(3, 3).re - 0.5).abs() < 1e-15);
        assert!((phi.element(0, 3).re - 0.5).abs() < 1e-15);
        assert!((phi.element(3, 0).re - 0.5).abs() < 1e-15);
        assert_eq!(phi.element(1, 1), C0);

        let psi = bell_density(BellState::PsiPlus);
        assert!((psi.element(1, 1).re - 0.5).abs() < 1e-15);
        assert!((psi.element(2, 2).re - 0.5).abs() < 1e-15);
        assert!((psi.element(1, 2).re - 0.5).abs() < 1e-15);

        let psim = bell_density(BellState::PsiMinus);
        assert!((psim.element(1, 2).re + 0.5).abs() < 1e-15);
        assert!((psim.element(2, 1).re + 0.5).abs() < 1e-15);
        assert!((psim.element(1, 1).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bell_states_are_pure() {
        for b in [
            BellState::PhiPlus,
            BellState::PhiMinus,
            BellState::PsiPlus,
            BellState::PsiMinus,
        ] {
            assert!((bell_density(b).purity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn client_x_pi_maps_psi_plus_to_phi_plus() {
        let rot = Rotation::new(Axis::X, 32).unwrap();
        let out = apply_local_rotation(&bell_density(BellState::PsiPlus), Qubit::Client, rot);
        assert!(approx_eq(&out, &bell_density(BellState::PhiPlus), 1e-12));
    }

    #[test]
    fn client_y_pi_maps_psi_minus_to_phi_plus() {
        let rot = Rotation::new(Axis::Y, 32).unwrap();
        let out = apply_local_rotation(&bell_density(BellState::PsiMinus), Qubit::Client, rot);
        assert!(approx_eq(&out, &bell_density(BellState::PhiPlus), 1e-12));
    }

    #[test]
    fn zero_step_rotation_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let rho = random_density(&mut rng);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let out = apply_local_rotation(&rho, Qubit::Server, Rotation::new(axis, 0).unwrap());
            assert!(approx_eq(&out, &rho, 1e-14));
        }
    }

    #[test]
    fn rotation_then_inverse_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rho = random_density(&mut rng);
            let steps = rng.gen_range(-31..=32);
            let axis = [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)];
            let q = if rng.gen::<bool>() { Qubit::Client } else { Qubit::Server };
            let r = Rotation::new(axis, steps).unwrap();
            let there = apply_local_rotation(&rho, q, r);
            let back = apply_local_rotation(&there, q, r.inverse());
            assert!(approx_eq(&back, &rho, 1e-10));
        }
    }

    #[test]
    fn measure_phi_plus_in_z_correlates() {
        let (bit, post) = measure_qubit(
            &bell_density(BellState::PhiPlus),
            Qubit::Client,
            MeasBasis::positive(Axis::Z),
            0.3,
        );
        assert_eq!(bit, 0);
        // server collapsed to |0>
        let server = post.marginal(Qubit::Server);
        assert!((server[0][0].re - 1.0).abs() < 1e-12);
        assert!(server[1][1].norm() < 1e-12);
    }

    #[test]
    fn measuring_an_eigenstate_is_deterministic() {
        let rho = DensityMatrix::basis_state(0, 0);
        for rand in [0.0, 0.3, 0.9999] {
            let (bit, _) = measure_qubit(&rho, Qubit::Client, MeasBasis::positive(Axis::Z), rand);
            assert_eq!(bit, 0);
        }
    }

    #[test]
    fn measure_phi_plus_in_y_anticorrelates() {
        // <YY> = -1 for Phi+: client bit 1 leaves the server in |+y>
        let (bit, post) = measure_qubit(
            &bell_density(BellState::PhiPlus),
            Qubit::Client,
            MeasBasis::positive(Axis::Y),
            0.7,
        );
        assert_eq!(bit, 1);
        let server = post.marginal(Qubit::Server);
        // |+y><+y| = [[0.5, -0.5i], [0.5i, 0.5]]
        assert!((server[0][0].re - 0.5).abs() < 1e-12);
        assert!((server[0][1] - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((server[1][0] - Complex64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn negative_orientation_flips_the_bit() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let rho = random_density(&mut rng);
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let p_plus = outcome_probability_zero(&rho, Qubit::Client, MeasBasis::new(axis, 1));
                let p_minus =
                    outcome_probability_zero(&rho, Qubit::Client, MeasBasis::new(axis, -1));
                assert!((p_plus + p_minus - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stabilizer_expectations() {
        let phi = bell_density(BellState::PhiPlus);
        assert!((pauli_expectation(&phi, PauliOp::X, PauliOp::X) - 1.0).abs() < 1e-12);
        assert!((pauli_expectation(&phi, PauliOp::Y, PauliOp::Y) + 1.0).abs() < 1e-12);
        assert!((pauli_expectation(&phi, PauliOp::Z, PauliOp::Z) - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed();
        assert!(pauli_expectation(&mixed, PauliOp::Z, PauliOp::Z).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let phi = bell_density(BellState::PhiPlus);
        assert!((fidelity_with_pure(&phi, BellState::PhiPlus) - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fidelity_with_pure(&mixed, BellState::PhiPlus) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_reference_tomography_state() {
        // A reconstructed two-qubit state from an NV-pair entanglement
        // experiment; its Phi+ overlap is (0.442 + 0.469)/2 + 0.328.
        let re = [
            [0.442, 0.003, 0.003, 0.328],
            [0.003, 0.033, -0.023, -0.000],
            [0.003, -0.023, 0.056, -0.003],
            [0.328, -0.000, -0.003, 0.469],
        ];
        let im = [
            [0.0, -0.014, -0.005, 0.032],
            [0.014, 0.0, -0.002, 0.001],
            [0.005, 0.002, 0.0, -0.000],
            [-0.032, -0.001, 0.000, 0.0],
        ];
        let mut m = [[C0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = Complex64::new(re[i][j], im[i][j]);
            }
        }
        let rho = DensityMatrix::new(m).expect("reference matrix is a valid state");
        let f = fidelity_with_pure(&rho, BellState::PhiPlus);
        assert!((f - 0.7835).abs() < 1e-9, "got {f}");
    }

    #[test]
    fn born_statistics_match_expectations() {
        // Seeded sampling agrees with the analytic probability within 4 sigma.
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let rho = apply_local_rotation(
            &bell_density(BellState::PsiMinus),
            Qubit::Server,
            Rotation::new(Axis::Y, 5).unwrap(),
        );
        for (qubit, basis) in [
            (Qubit::Client, MeasBasis::positive(Axis::X)),
            (Qubit::Server, MeasBasis::positive(Axis::Y)),
            (Qubit::Client, MeasBasis::new(Axis::Z, -1)),
        ] {
            let p0 = outcome_probability_zero(&rho, qubit, basis);
            let n = 10_000;
            let mut zeros = 0u32;
            for _ in 0..n {
                let (bit, _) = measure_qubit(&rho, qubit, basis, rng.gen::<f64>());
                if bit == 0 {
                    zeros += 1;
                }
            }
            let freq = zeros as f64 / n as f64;
            let sigma = (p0 * (1.0 - p0) / n as f64).sqrt();
            assert!(
                (freq - p0).abs() < 4.0 * sigma.max(1e-4),
                "freq {freq} vs p0 {p0}"
            );
        }
    }

    #[test]
    fn no_signaling_under_remote_rotation() {
        // Marginal outcome probabilities are unaffected by the other side's
        // local unitaries, exactly.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let rho = random_density(&mut rng);
            let basis = MeasBasis::new(
                [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)],
                if rng.gen::<bool>() { 1 } else { -1 },
            );
            let p_before = outcome_probability_zero(&rho, Qubit::Client, basis);
            let steps = rng.gen_range(-31..=32);
            let axis = [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)];
            let rotated =
                apply_local_rotation(&rho, Qubit::Server, Rotation::new(axis, steps).unwrap());
            let p_after = outcome_probability_zero(&rotated, Qubit::Client, basis);
            assert!((p_before - p_after).abs() < 1e-12);
        }
    }

    #[test]
    fn operations_preserve_invariants() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut rho = bell_density(BellState::PsiPlus);
        for _ in 0..200 {
            let steps = rng.gen_range(-31..=32);
            let axis = [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)];
            let q = if rng.gen::<bool>() { Qubit::Client } else { Qubit::Server };
            rho = apply_local_rotation(&rho, q, Rotation::new(axis, steps).unwrap());
            assert_eq!(rho.validate(), Ok(()));
        }
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..50 {
            let rho = random_density(&mut rng);
            let (evals, vecs) = hermitian_eigen(rho.elements());
            let back = from_eigen(&evals, &vecs);
            for i in 0..DIM {
                for j in 0..DIM {
                    assert!((back[i][j] - rho.element(i, j)).norm() < 1e-10);
                }
            }
            assert!(evals.iter().all(|e| *e >= -1e-12));
            assert!((evals.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_step_bounds_enforced() {
        assert!(Rotation::new(Axis::X, 33).is_err());
        assert!(Rotation::new(Axis::X, -32).is_err());
        assert!(Rotation::new(Axis::Z, 32).is_ok());
    }
}
