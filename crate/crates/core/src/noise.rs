//! Parameterized hardware error models: the delivered entangled-state model,
//! readout errors, charge-state dynamics, and the calibration table mapping a
//! physical-layer fidelity target to delivered-state parameters.

use crate::netsim::Ns;
use crate::qstate::{
    apply_local_rotation, bell_density, fidelity_with_pure, Axis, BellState, DensityMatrix, Qubit,
    Rotation,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NoiseError {
    #[error("heralded state must be Psi+ or Psi-, got {0:?}")]
    BadHeraldedState(BellState),
    #[error("requested fidelity {0} outside [0.25, 0.97]")]
    RequestedFidelityOutOfRange(f64),
    #[error("physical target {0} outside the calibration table domain [{1}, {2}]")]
    TargetOutsideTable(f64, f64, f64),
    #[error("invalid noise parameter: {0}")]
    InvalidParameter(String),
}

/// Parameters of the delivered two-qubit state for one heralded pair.
///
/// `(1, 0, 1)` is the noiseless limit: the pure heralded Bell state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveredModel {
    /// Weight on the heralded Bell projector; the remainder is maximally
    /// mixed.
    pub bell_weight: f64,
    /// Extra population shifted into |00> (double bright-state occupancy of
    /// the single-photon protocol). The weight is taken from the branch that
    /// the originator's pi correction maps onto |00>, so the corrected state
    /// shows the measured population asymmetry rho_00 < rho_11.
    pub pop_asym: f64,
    /// Damping factor on the heralded coherence, in [0, 1].
    pub dephase: f64,
}

impl DeliveredModel {
    pub const IDEAL: DeliveredModel =
        DeliveredModel { bell_weight: 1.0, pop_asym: 0.0, dephase: 1.0 };

    pub fn validate(&self) -> Result<(), NoiseError> {
        let ok = (0.0..=1.0).contains(&self.bell_weight)
            && (0.0..=1.0).contains(&self.dephase)
            && self.pop_asym >= 0.0;
        if !ok {
            return Err(NoiseError::InvalidParameter(format!("{self:?}")));
        }
        // the population shift must not exceed the |10> population
        let p10 = self.bell_weight / 2.0 + (1.0 - self.bell_weight) / 4.0;
        if self.pop_asym > p10 {
            return Err(NoiseError::InvalidParameter(format!(
                "pop_asym {} exceeds available population {}",
                self.pop_asym, p10
            )));
        }
        Ok(())
    }
}

/// The state handed to the nodes when a batch heralds `heralded`.
///
/// Construction: `bell_weight` on the heralded projector with the coherence
/// additionally scaled by `dephase`, the remaining weight maximally mixed,
/// then `pop_asym` population moved from |10> into |00>.
pub fn delivered_state(
    m: &DeliveredModel,
    heralded: BellState,
) -> Result<DensityMatrix, NoiseError> {
    let sign = match heralded {
        BellState::PsiPlus => 1.0,
        BellState::PsiMinus => -1.0,
        other => return Err(NoiseError::BadHeraldedState(other)),
    };
    m.validate()?;
    let w = m.bell_weight;
    let rest = (1.0 - w) / 4.0;
    let mut mat = [[Complex64::new(0.0, 0.0); 4]; 4];
    mat[0][0] = Complex64::new(rest + m.pop_asym, 0.0);
    mat[1][1] = Complex64::new(w / 2.0 + rest, 0.0);
    mat[2][2] = Complex64::new(w / 2.0 + rest - m.pop_asym, 0.0);
    mat[3][3] = Complex64::new(rest, 0.0);
    let coh = Complex64::new(sign * w / 2.0 * m.dephase, 0.0);
    mat[1][2] = coh;
    mat[2][1] = coh;
    DensityMatrix::new(mat)
        .map_err(|e| NoiseError::InvalidParameter(format!("delivered state invalid: {e}")))
}

/// The Pauli correction that maps the heralded state onto Phi+ when applied
/// to the request originator's qubit: X180 for Psi+, Y180 for Psi-.
pub fn correction_rotation(heralded: BellState) -> Result<Rotation, NoiseError> {
    let axis = match heralded {
        BellState::PsiPlus => Axis::X,
        BellState::PsiMinus => Axis::Y,
        other => return Err(NoiseError::BadHeraldedState(other)),
    };
    Ok(Rotation::new(axis, 32).expect("32 steps is in range"))
}

/// Phi+ fidelity of the delivered state after the originator-side Pauli
/// correction. This is the quantity the calibration table pins to its target.
pub fn corrected_fidelity(m: &DeliveredModel, heralded: BellState) -> Result<f64, NoiseError> {
    let raw = delivered_state(m, heralded)?;
    let corrected = apply_local_rotation(&raw, Qubit::Client, correction_rotation(heralded)?);
    Ok(fidelity_with_pure(&corrected, BellState::PhiPlus))
}

/// Classical readout error: the true bit is reported faithfully with
/// probability `f0` (for bit 0) or `f1` (for bit 1), flipped otherwise.
pub fn apply_readout_error(true_bit: u8, f0: f64, f1: f64, rand: f64) -> u8 {
    debug_assert!(true_bit <= 1);
    let fidelity = if true_bit == 0 { f0 } else { f1 };
    if rand < fidelity {
        true_bit
    } else {
        1 - true_bit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutFidelity {
    /// Probability that a true 0 is read as 0.
    pub f0: f64,
    /// Probability that a true 1 is read as 1.
    pub f1: f64,
}

impl ReadoutFidelity {
    pub fn perfect() -> Self {
        ReadoutFidelity { f0: 1.0, f1: 1.0 }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for f in [self.f0, self.f1] {
            if !(f > 0.5 && f <= 1.0) {
                return Err(NoiseError::InvalidParameter(format!(
                    "readout fidelity {f} outside (0.5, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Charge condition of one node's emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargeState {
    Resonant,
    /// Wrong charge state; detectable only by the next readiness check
    /// reading zero counts.
    WrongCharge,
    /// Client only: resonance drifted far enough that recovery takes tens of
    /// seconds (manual retuning).
    LongOutage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeEvent {
    /// An entanglement batch finished on this node; `attempts` were played.
    BatchCompleted { attempts: u64 },
    /// One recovery try during a readiness check while off-resonant.
    CrTry,
}

/// Per-node charge-state dynamics parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeModel {
    /// Per-attempt probability of falling into the wrong charge state while
    /// a batch is playing. Longer batches carry more risk.
    pub entry_prob_per_attempt: f64,
    /// Per-try probability that a recovery pulse restores resonance.
    pub recovery_prob: f64,
    /// Duration of one recovery try (fast check reading zero counts plus a
    /// repump pulse).
    pub recovery_try_ns: Ns,
    /// Probability per recovery try of drifting into a long outage instead
    /// (zero for the server's randomization strategy).
    pub long_outage_prob: f64,
    /// Long-outage duration bounds, drawn uniformly.
    pub outage_min_ns: Ns,
    pub outage_max_ns: Ns,
}

impl ChargeModel {
    pub fn never() -> Self {
        ChargeModel {
            entry_prob_per_attempt: 0.0,
            recovery_prob: 1.0,
            recovery_try_ns: 20_000,
            long_outage_prob: 0.0,
            outage_min_ns: 0,
            outage_max_ns: 0,
        }
    }

    /// Probability that a batch of `attempts` attempts knocks the node into
    /// the wrong charge state.
    pub fn batch_entry_prob(&self, attempts: u64) -> f64 {
        1.0 - (1.0 - self.entry_prob_per_attempt).powi(attempts as i32)
    }
}

/// Advances the charge state for one event. All randomness comes in through
/// `rand`.
pub fn step_charge(
    state: ChargeState,
    node: Qubit,
    event: ChargeEvent,
    params: &NoiseParams,
    rand: f64,
) -> ChargeState {
    let model = params.charge(node);
    match (state, event) {
        (ChargeState::Resonant, ChargeEvent::BatchCompleted { attempts }) => {
            if rand < model.batch_entry_prob(attempts) {
                ChargeState::WrongCharge
            } else {
                ChargeState::Resonant
            }
        }
        (ChargeState::WrongCharge, ChargeEvent::CrTry) => {
            if rand < model.long_outage_prob {
                ChargeState::LongOutage
            } else if rand < model.long_outage_prob + model.recovery_prob {
                ChargeState::Resonant
            } else {
                ChargeState::WrongCharge
            }
        }
        (s, _) => s,
    }
}

/// One row of the fidelity calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidTableRow {
    /// Physical-layer target fidelity this row is calibrated for.
    pub phys_target: f64,
    pub model: DeliveredModel,
    /// Per-attempt heralding success probability at this working point.
    pub p_succ: f64,
}

/// Piecewise-linear calibration map from physical fidelity target to the
/// delivered-state parameters and attempt success probability.
///
/// There is no analytic fidelity-to-rate law here; the rows are working
/// points, and only monotonicity is contractual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidTable {
    rows: Vec<FidTableRow>,
}

/// Delivered-state shape anchors at the top working point, extracted from the
/// reference tomography reconstruction: the mixture deficit, coherence
/// damping, and population shift that reproduce its populations and Phi+
/// coherence.
const SHAPE_MIX: f64 = 0.047;
const SHAPE_DEPHASE: f64 = 0.251;
const SHAPE_POP: f64 = 0.027;

/// The seven physical-layer working points, 0.03 above the requestable range
/// 0.50..=0.80.
pub const PHYS_TARGETS: [f64; 7] = [0.53, 0.58, 0.63, 0.68, 0.73, 0.78, 0.83];

impl FidTable {
    /// Calibrates a table row for every physical target in `targets`.
    ///
    /// Each row's model is found by scaling the shape anchors with a single
    /// degradation factor and bisecting it until the corrected fidelity
    /// matches the target, so the table is exact at its knots.
    pub fn calibrated(targets: &[f64]) -> FidTable {
        let rows = targets
            .iter()
            .map(|&t| FidTableRow {
                phys_target: t,
                model: calibrate_model(t),
                p_succ: p_succ_for_target(t),
            })
            .collect();
        FidTable { rows }
    }

    pub fn paper_defaults() -> FidTable {
        FidTable::calibrated(&PHYS_TARGETS)
    }

    /// Single-row table delivering perfect states; used by noiseless tests.
    pub fn ideal() -> FidTable {
        FidTable {
            rows: vec![FidTableRow {
                phys_target: 1.0,
                model: DeliveredModel::IDEAL,
                p_succ: 5e-5,
            }],
        }
    }

    pub fn rows(&self) -> &[FidTableRow] {
        &self.rows
    }

    pub fn domain(&self) -> (f64, f64) {
        (
            self.rows.first().map(|r| r.phys_target).unwrap_or(f64::NAN),
            self.rows.last().map(|r| r.phys_target).unwrap_or(f64::NAN),
        )
    }

    /// Looks up the delivered-state parameters for a physical target,
    /// interpolating linearly between rows. Targets outside the table domain
    /// are an error.
    pub fn lookup(&self, phys_target: f64) -> Result<FidTableRow, NoiseError> {
        let (lo, hi) = self.domain();
        let eps = 1e-9;
        if self.rows.is_empty() || phys_target < lo - eps || phys_target > hi + eps {
            return Err(NoiseError::TargetOutsideTable(phys_target, lo, hi));
        }
        let t = phys_target.clamp(lo, hi);
        let idx = self
            .rows
            .iter()
            .position(|r| r.phys_target >= t - eps)
            .expect("target is within domain");
        if (self.rows[idx].phys_target - t).abs() <= eps || idx == 0 {
            return Ok(self.rows[idx]);
        }
        let a = &self.rows[idx - 1];
        let b = &self.rows[idx];
        let frac = (t - a.phys_target) / (b.phys_target - a.phys_target);
        let lerp = |x: f64, y: f64| x + (y - x) * frac;
        Ok(FidTableRow {
            phys_target: t,
            model: DeliveredModel {
                bell_weight: lerp(a.model.bell_weight, b.model.bell_weight),
                pop_asym: lerp(a.model.pop_asym, b.model.pop_asym),
                dephase: lerp(a.model.dephase, b.model.dephase),
            },
            p_succ: lerp(a.p_succ, b.p_succ),
        })
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for r in &self.rows {
            r.model.validate()?;
            if !(r.phys_target > 0.25 && r.phys_target <= 1.0) {
                return Err(NoiseError::InvalidParameter(format!(
                    "table key {} outside (0.25, 1]",
                    r.phys_target
                )));
            }
            if !(0.0..=1.0).contains(&r.p_succ) {
                return Err(NoiseError::InvalidParameter(format!("p_succ {}", r.p_succ)));
            }
        }
        if !self.rows.windows(2).all(|w| w[0].phys_target < w[1].phys_target) {
            return Err(NoiseError::InvalidParameter("table keys not increasing".into()));
        }
        Ok(())
    }
}

/// Attempt success probability per working point: 5e-5 at the 0.83 target
/// scaling linearly up to 1e-4 at 0.53. Higher fidelity costs rate.
fn p_succ_for_target(phys_target: f64) -> f64 {
    5e-5 * (1.0 + (0.83 - phys_target) / 0.30)
}

/// Degrades the shape anchors by a factor `g` (g = 0 is noiseless).
fn model_at(g: f64) -> DeliveredModel {
    DeliveredModel {
        bell_weight: 1.0 - g * SHAPE_MIX,
        pop_asym: g * SHAPE_POP,
        dephase: 1.0 - g * SHAPE_DEPHASE,
    }
}

/// Bisects the degradation factor until the corrected Phi+ fidelity equals
/// `target`.
fn calibrate_model(target: f64) -> DeliveredModel {
    let f = |g: f64| {
        corrected_fidelity(&model_at(g), BellState::PsiPlus)
            .expect("family members are valid models")
    };
    let (mut lo, mut hi) = (0.0, 1.0 / SHAPE_DEPHASE - 1e-6);
    assert!(
        f(hi) < target && target <= f(lo),
        "target {target} outside calibratable range [{}, {}]",
        f(hi),
        f(lo)
    );
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    model_at(0.5 * (lo + hi))
}

/// Maps a link-layer minimum-fidelity request to the physical-layer target:
/// 0.03 higher, clamped to 1.
pub fn fidelity_to_phys_target(requested_min_fidelity: f64) -> Result<f64, NoiseError> {
    if !(0.25..=0.97).contains(&requested_min_fidelity) {
        return Err(NoiseError::RequestedFidelityOutOfRange(requested_min_fidelity));
    }
    Ok((requested_min_fidelity + 0.03).min(1.0))
}

/// Full calibration bundle for the simulated hardware pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Baseline per-attempt heralding success probability, used where no
    /// fidelity working point applies.
    pub p_succ: f64,
    /// Probability the heralded state is Psi+ rather than Psi-.
    pub psi_plus_fraction: f64,
    pub fid_table: FidTable,
    pub readout_client: ReadoutFidelity,
    pub readout_server: ReadoutFidelity,
    pub charge_client: ChargeModel,
    pub charge_server: ChargeModel,
    /// Per-try pass probability of the charge-resonance check when resonant.
    pub cr_pass_prob: f64,
    /// Duration of one resonant readiness try.
    pub cr_try_ns: Ns,
    /// Per-qubit depolarization probability applied when a heralded qubit
    /// enters protected storage (0 disables it).
    pub protected_decay: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p_succ: 5e-5,
            psi_plus_fraction: 0.5,
            fid_table: FidTable::paper_defaults(),
            readout_client: ReadoutFidelity { f0: 0.928, f1: 0.997 },
            readout_server: ReadoutFidelity { f0: 0.957, f1: 0.9955 },
            charge_client: ChargeModel {
                entry_prob_per_attempt: 1.69e-5,
                recovery_prob: 0.10,
                recovery_try_ns: 20_000,
                long_outage_prob: 1e-4,
                outage_min_ns: 10_000_000_000,
                outage_max_ns: 60_000_000_000,
            },
            charge_server: ChargeModel {
                entry_prob_per_attempt: 1.73e-4,
                recovery_prob: 0.10,
                recovery_try_ns: 20_000,
                long_outage_prob: 0.0,
                outage_min_ns: 0,
                outage_max_ns: 0,
            },
            cr_pass_prob: 0.30,
            cr_try_ns: 180_000,
            protected_decay: 0.0,
        }
    }
}

impl NoiseParams {
    /// The working point that reproduces the reference hardware run:
    /// defaults plus the real-time storage penalty that accounts for the
    /// measured few-percent fidelity drop of kept qubits.
    pub fn paper_calibrated() -> Self {
        NoiseParams { protected_decay: 0.0373, ..NoiseParams::default() }
    }

    /// Noiseless variant: perfect delivered states, perfect readout, no
    /// charge dynamics, no storage decay. Heralding probability is kept.
    pub fn noiseless() -> Self {
        NoiseParams {
            p_succ: 5e-5,
            psi_plus_fraction: 0.5,
            fid_table: FidTable::ideal(),
            readout_client: ReadoutFidelity::perfect(),
            readout_server: ReadoutFidelity::perfect(),
            charge_client: ChargeModel::never(),
            charge_server: ChargeModel::never(),
            cr_pass_prob: 1.0,
            cr_try_ns: 100_000,
            protected_decay: 0.0,
        }
    }

    pub fn charge(&self, node: Qubit) -> &ChargeModel {
        match node {
            Qubit::Client => &self.charge_client,
            Qubit::Server => &self.charge_server,
        }
    }

    pub fn readout(&self, node: Qubit) -> ReadoutFidelity {
        match node {
            Qubit::Client => self.readout_client,
            Qubit::Server => self.readout_server,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for p in [self.p_succ, self.psi_plus_fraction, self.cr_pass_prob, self.protected_decay] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NoiseError::InvalidParameter(format!("probability {p}")));
            }
        }
        if self.cr_pass_prob == 0.0 {
            return Err(NoiseError::InvalidParameter("cr_pass_prob must be positive".into()));
        }
        self.readout_client.validate()?;
        self.readout_server.validate()?;
        self.fid_table.validate()?;
        for c in [&self.charge_client, &self.charge_server] {
            for p in [c.entry_prob_per_attempt, c.recovery_prob, c.long_outage_prob] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(NoiseError::InvalidParameter(format!("charge probability {p}")));
                }
            }
            if c.recovery_prob + c.long_outage_prob > 1.0 {
                return Err(NoiseError::InvalidParameter(
                    "recovery_prob + long_outage_prob exceeds 1".into(),
                ));
            }
        }
        Ok(())
    }
}
