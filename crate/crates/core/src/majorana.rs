//! Explicit Majorana operators and the identities connecting them to logical
//! single- and two-qubit gates in the four-quasiparticle encoding.
//!
//! Modes are built by Jordan-Wigner: for fermionic mode `k` (zero based),
//! `b_{2k+1} = Z^{⊗k} ⊗ X ⊗ I…` and `b_{2k+2} = Z^{⊗k} ⊗ Y ⊗ I…`. One logical
//! qubit uses two fermionic modes (four Majoranas); its logical states are the
//! even-parity pair `|0_L⟩ = |00⟩`, `|1_L⟩ = |11⟩`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::gateset::{evaluate, GateId, GateSequence};
use crate::linalg::{fidelity_distance, pauli_x, pauli_y, pauli_z, UnitaryGate, C64};

pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Whether this is a literal statement of the encoding's identities
    /// (`true`) or a diagnostic showing the nearest identity that does hold.
    pub literal: bool,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MajoranaReport {
    pub checks: Vec<IdentityCheck>,
}

impl MajoranaReport {
    pub fn literal_checks_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.literal).all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn dense(m: &nalgebra::Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    factors
        .iter()
        .fold(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)), |acc, f| acc.kronecker(f))
}

/// The `2n` Majorana operators on `n` fermionic modes.
pub fn majorana_operators(modes: usize) -> Vec<DMatrix<C64>> {
    let (x, y, z) = (dense(&pauli_x()), dense(&pauli_y()), dense(&pauli_z()));
    let id = DMatrix::<C64>::identity(2, 2);
    let mut ops = Vec::with_capacity(2 * modes);
    for k in 0..modes {
        for local in [&x, &y] {
            let factors: Vec<_> = (0..modes)
                .map(|m| match m.cmp(&k) {
                    std::cmp::Ordering::Less => z.clone(),
                    std::cmp::Ordering::Equal => local.clone(),
                    std::cmp::Ordering::Greater => id.clone(),
                })
                .collect();
            ops.push(kron_all(&factors));
        }
    }
    ops
}

/// Matrix exponential for `A` with `A² = ±I` (all exponents used here):
/// `exp(θA) = cosh/cos(θ) I + sinh/sin(θ) A`.
fn exp_square_scalar(a: &DMatrix<C64>, theta: C64) -> DMatrix<C64> {
    let n = a.nrows();
    let sq = a * a;
    let id = DMatrix::<C64>::identity(n, n);
    let plus = (&sq - &id).norm() < 1e-12;
    let minus = (&sq + &id).norm() < 1e-12;
    assert!(plus || minus, "exponent does not square to ±I");
    if plus {
        id * theta.cosh() + a * theta.sinh()
    } else {
        id * theta.cos() + a * theta.sin()
    }
}

/// Computational-basis indices of the two-mode-per-qubit logical states.
fn logical_indices(qubits: usize) -> Vec<usize> {
    (0..1usize << qubits)
        .map(|l| {
            // logical bit q occupies fermionic modes 2q and 2q+1 (mode 0 is the MSB)
            let mut idx = 0usize;
            for q in 0..qubits {
                let bit = (l >> (qubits - 1 - q)) & 1;
                idx = (idx << 2) | (bit * 0b11);
            }
            idx
        })
        .collect()
}

fn restrict(op: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| op[(idx[i], idx[j])])
}

/// Leakage out of the logical subspace: norm of `op` restricted to
/// (complement × logical).
fn leakage(op: &DMatrix<C64>, idx: &[usize]) -> f64 {
    let mut acc = 0.0;
    for r in 0..op.nrows() {
        if idx.contains(&r) {
            continue;
        }
        for &c in idx {
            acc += op[(r, c)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Distance between `a` and `b` modulo a global phase, in Frobenius norm.
fn phase_free_deviation(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 1e-15 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    (a - b * phase).norm()
}

fn check(name: &str, literal: bool, max_deviation: f64) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        literal,
        max_deviation,
        passed: max_deviation <= IDENTITY_TOL,
    }
}

/// Runs every identity and returns the per-identity deviations.
///
/// Literal checks (anticommutators, the three Pauli bilinears, the braid
/// Hadamard, the controlled-phase product) are accompanied by diagnostic
/// checks that pin down what the bilinears and the product actually equal
/// in this encoding.
pub fn verify_majorana_identities() -> MajoranaReport {
    let mut checks = Vec::new();
    let mi = C64::new(0.0, -1.0);

    // (i) anticommutators on the eight-operator, four-mode register
    let b8 = majorana_operators(4);
    let dim = b8[0].nrows();
    let id = DMatrix::<C64>::identity(dim, dim);
    let mut anti = 0.0f64;
    let mut herm = 0.0f64;
    for (i, bi) in b8.iter().enumerate() {
        herm = herm.max((bi - bi.adjoint()).norm());
        for (j, bj) in b8.iter().enumerate() {
            let expect = if i == j { &id * C64::new(2.0, 0.0) } else { DMatrix::zeros(dim, dim) };
            anti = anti.max((bi * bj + bj * bi - expect).norm());
        }
    }
    checks.push(check("anticommutator {b_i,b_j} = 2δ_ij", true, anti));
    checks.push(check("hermiticity b_i† = b_i", true, herm));

    // (ii) Pauli bilinears in the single-qubit logical sector
    let b = majorana_operators(2);
    let idx = logical_indices(1);
    let (sx, sy, sz) = (dense(&pauli_x()), dense(&pauli_y()), dense(&pauli_z()));
    let bilinear = |p: usize, q: usize| &b[p] * &b[q] * mi;
    let pauli_dev = |op: DMatrix<C64>, target: &DMatrix<C64>| {
        (restrict(&op, &idx) - target).norm() + leakage(&op, &idx)
    };
    checks.push(check("σx = -i b2 b3", true, pauli_dev(bilinear(1, 2), &sx)));
    checks.push(check("σy = -i b1 b3", true, pauli_dev(bilinear(0, 2), &sy)));
    checks.push(check("σz = -i b1 b2", true, pauli_dev(bilinear(0, 1), &sz)));
    // -i b1b3 · -i b2b3 algebra fixes the sign: σy must be +i b1 b3
    checks.push(check("σy = +i b1 b3 (sign forced by σxσy = iσz)", false, pauli_dev(&b[0] * &b[2] * C64::new(0.0, 1.0), &sy)));

    // H from braids
    use GateId::*;
    let h_seq = GateSequence::new(vec![B23, B23, B12Inv, B23, B12Inv, B23, B23]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = UnitaryGate::new(nalgebra::Matrix2::new(
        C64::new(h, 0.0),
        C64::new(h, 0.0),
        C64::new(h, 0.0),
        C64::new(-h, 0.0),
    ))
    .expect("Hadamard is unitary");
    checks.push(check(
        "H = B23² B12⁻¹ B23 B12⁻¹ B23²",
        true,
        fidelity_distance(&evaluate(&h_seq), &hadamard),
    ));

    // (iii) controlled phase from the four-fermion product
    let pi4 = std::f64::consts::FRAC_PI_4;
    let b34 = &b8[2] * &b8[3];
    let b56 = &b8[4] * &b8[5];
    let b3456 = &b34 * &b56;
    let product = exp_square_scalar(&b34, C64::new(-pi4, 0.0))
        * exp_square_scalar(&b56, C64::new(-pi4, 0.0))
        * exp_square_scalar(&b3456, C64::new(0.0, pi4))
        * C64::from_polar(1.0, pi4);
    let idx2 = logical_indices(2);
    let logical = restrict(&product, &idx2);
    let one = C64::new(1.0, 0.0);
    let cz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![one, one, one, -one]));
    checks.push(check(
        "Π(σz) product = diag(1,1,1,-1) up to phase",
        true,
        phase_free_deviation(&logical, &cz) + leakage(&product, &idx2),
    ));
    let cz00 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-one, one, one, one]));
    checks.push(check(
        "Π(σz) product = diag(-1,1,1,1) up to phase (phase flip on |00⟩)",
        false,
        phase_free_deviation(&logical, &cz00) + leakage(&product, &idx2),
    ));

    MajoranaReport { checks }
}
