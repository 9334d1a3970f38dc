//! Small pure-state simulator used to check the quantum operations that the
//! routing layer reduces to success probabilities: Bell-state swapping,
//! GHZ fusion and the CNOT fan-out.
//!
//! Qubit `0` is the most significant bit of a basis index. Projective
//! operations enumerate every outcome branch instead of sampling one, and
//! measured qubits are removed from the post-measurement state (indices of
//! the remaining qubits shift down, order preserved). Classical Pauli
//! corrections are applied to each branch and listed in the outcome, using
//! post-measurement indices.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Outcome branches below this probability are treated as impossible.
const BRANCH_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    qubits: usize,
    amps: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub bits: Vec<u8>,
    pub probability: f64,
    /// Corrections already applied to `post_state`, in application order.
    pub corrections: Vec<(usize, Pauli)>,
    pub post_state: PureState,
}

impl PureState {
    /// `|0…0⟩` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self> {
        Self::basis(qubits, 0)
    }

    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        check_size(qubits)?;
        if index >= 1 << qubits {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(PureState { qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("amplitude count {len} is not a power of two >= 2")));
        }
        let qubits = len.trailing_zeros() as usize;
        check_size(qubits)?;
        let state = PureState { qubits, amps };
        if (state.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!("state not normalised: {}", state.norm_sqr())));
        }
        Ok(state)
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn bell_pair() -> Self {
        Self::ghz(2).expect("two qubits fit")
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(qubits: usize) -> Result<Self> {
        if qubits < 2 {
            return Err(Error::invalid("GHZ state needs at least two qubits"));
        }
        check_size(qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[(1 << qubits) - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(PureState { qubits, amps })
    }

    /// `count` independent Bell pairs on qubits `(0,1), (2,3), …`.
    pub fn bell_pairs(count: usize) -> Result<Self> {
        let mut state = Self::bell_pair();
        for _ in 1..count {
            state = state.tensor(&Self::bell_pair())?;
        }
        Ok(state)
    }

    /// `self ⊗ other`; `other`'s qubits follow `self`'s.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        check_size(self.qubits + other.qubits)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(PureState { qubits: self.qubits + other.qubits, amps })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    #[inline]
    fn mask(&self, q: usize) -> usize {
        1 << (self.qubits - 1 - q)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.qubits {
            Ok(())
        } else {
            Err(Error::invalid(format!("qubit {q} out of range for {} qubits", self.qubits)))
        }
    }

    pub fn apply_gate(&self, gate: Gate) -> Result<Self> {
        let mut out = self.clone();
        out.apply_in_place(gate)?;
        Ok(out)
    }

    fn apply_in_place(&mut self, gate: Gate) -> Result<()> {
        match gate {
            Gate::H(q) => {
                self.check_qubit(q)?;
                let m = self.mask(q);
                for i in (0..self.amps.len()).filter(|i| i & m == 0) {
                    let (a, b) = (self.amps[i], self.amps[i | m]);
                    self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                    self.amps[i | m] = (a - b) * FRAC_1_SQRT_2;
                }
            }
            Gate::X(q) => {
                self.check_qubit(q)?;
                let m = self.mask(q);
                for i in (0..self.amps.len()).filter(|i| i & m == 0) {
                    self.amps.swap(i, i | m);
                }
            }
            Gate::Z(q) => {
                self.check_qubit(q)?;
                let m = self.mask(q);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a = -*a;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(Error::invalid("CNOT control and target coincide"));
                }
                let (mc, mt) = (self.mask(control), self.mask(target));
                for i in (0..self.amps.len()).filter(|i| i & mc != 0 && i & mt == 0) {
                    self.amps.swap(i, i | mt);
                }
            }
        }
        Ok(())
    }

    fn apply_pauli(&mut self, q: usize, p: Pauli) -> Result<()> {
        self.apply_in_place(match p {
            Pauli::X => Gate::X(q),
            Pauli::Z => Gate::Z(q),
        })
    }

    /// Computational-basis measurement of `qubits` (in the given order),
    /// enumerating every outcome with non-negligible probability.
    pub fn measure(&self, qubits: &[usize]) -> Result<Vec<(Vec<u8>, f64, PureState)>> {
        check_distinct(qubits)?;
        for &q in qubits {
            self.check_qubit(q)?;
        }
        if qubits.len() >= self.qubits {
            return Err(Error::invalid("measurement must leave at least one qubit"));
        }
        let kept: Vec<usize> = (0..self.qubits).filter(|q| !qubits.contains(q)).collect();
        let k = qubits.len();
        let rest = kept.len();
        let mut buckets = vec![vec![Complex64::new(0.0, 0.0); 1 << rest]; 1 << k];
        for (i, &a) in self.amps.iter().enumerate() {
            let outcome = qubits.iter().fold(0, |acc, &q| (acc << 1) | usize::from(i & self.mask(q) != 0));
            let index = kept.iter().fold(0, |acc, &q| (acc << 1) | usize::from(i & self.mask(q) != 0));
            buckets[outcome][index] = a;
        }
        let mut out = Vec::new();
        for (outcome, amps) in buckets.into_iter().enumerate() {
            let prob: f64 = amps.iter().map(Complex64::norm_sqr).sum();
            if prob < BRANCH_FLOOR {
                continue;
            }
            let scale = 1.0 / prob.sqrt();
            let amps = amps.into_iter().map(|a| a * scale).collect();
            let bits = (0..k).map(|j| ((outcome >> (k - 1 - j)) & 1) as u8).collect();
            out.push((bits, prob, PureState { qubits: rest, amps }));
        }
        Ok(out)
    }
}

fn check_size(qubits: usize) -> Result<()> {
    if qubits == 0 || qubits > MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count {qubits} outside 1..={MAX_QUBITS}")));
    }
    Ok(())
}

fn check_distinct(qubits: &[usize]) -> Result<()> {
    for (i, q) in qubits.iter().enumerate() {
        if qubits[..i].contains(q) {
            return Err(Error::invalid(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Index of `q` after the `removed` qubits are deleted.
fn reindex(q: usize, removed: &[usize]) -> usize {
    q - removed.iter().filter(|&&r| r < q).count()
}

fn finish(
    branches: Vec<(Vec<u8>, f64, PureState)>,
    corrections: impl Fn(&[u8]) -> Vec<(usize, Pauli)>,
) -> Result<Vec<MeasurementOutcome>> {
    branches
        .into_iter()
        .map(|(bits, probability, mut post_state)| {
            let corrections = corrections(&bits);
            for &(q, p) in &corrections {
                post_state.apply_pauli(q, p)?;
            }
            Ok(MeasurementOutcome { bits, probability, corrections, post_state })
        })
        .collect()
}

/// Bell-basis measurement on `(a, b)`. `partner` is the far end of the pair
/// that `b` belongs to; it receives the `X^{m_b} Z^{m_a}` correction so the
/// surviving pair is `(|00⟩ + |11⟩)/√2`.
pub fn bell_swap(state: &PureState, a: usize, b: usize, partner: usize) -> Result<Vec<MeasurementOutcome>> {
    check_distinct(&[a, b, partner])?;
    state.check_qubit(partner)?;
    let rotated = state.apply_gate(Gate::Cnot { control: a, target: b })?.apply_gate(Gate::H(a))?;
    let target = reindex(partner, &[a, b]);
    finish(rotated.measure(&[a, b])?, |bits| {
        let mut c = Vec::new();
        if bits[1] == 1 {
            c.push((target, Pauli::X));
        }
        if bits[0] == 1 {
            c.push((target, Pauli::Z));
        }
        c
    })
}

/// GHZ-basis fusion of co-located `center` qubits, each half of a Bell pair
/// whose other half is the matching entry of `leaves`. After correction the
/// leaves hold an n-party GHZ state.
pub fn ghz_fuse(state: &PureState, center: &[usize], leaves: &[usize]) -> Result<Vec<MeasurementOutcome>> {
    if center.len() < 2 {
        return Err(Error::invalid("fusion needs at least two center qubits"));
    }
    if leaves.len() != center.len() {
        return Err(Error::invalid("one leaf qubit per center qubit required"));
    }
    let all: Vec<usize> = center.iter().chain(leaves).copied().collect();
    check_distinct(&all)?;
    for &q in &all {
        state.check_qubit(q)?;
    }
    let mut rotated = state.clone();
    for &c in &center[1..] {
        rotated.apply_in_place(Gate::Cnot { control: center[0], target: c })?;
    }
    rotated.apply_in_place(Gate::H(center[0]))?;
    let targets: Vec<usize> = leaves.iter().map(|&l| reindex(l, center)).collect();
    finish(rotated.measure(center)?, |bits| {
        let mut c: Vec<(usize, Pauli)> =
            bits[1..].iter().zip(&targets[1..]).filter(|(b, _)| **b == 1).map(|(_, &t)| (t, Pauli::X)).collect();
        if bits[0] == 1 {
            c.push((targets[0], Pauli::Z));
        }
        c
    })
}

/// Measurement-completed fan-out at a node holding `keep` (half of a Bell
/// pair with B) and `spare` (half of a Bell pair with C = `far`): CNOT from
/// `keep` onto `spare`, measure `spare` in Z, correct `far` with X on outcome
/// 1. Leaves a GHZ state on (`keep`, B, C).
pub fn fanout_ghz(state: &PureState, keep: usize, spare: usize, far: usize) -> Result<Vec<MeasurementOutcome>> {
    check_distinct(&[keep, spare, far])?;
    state.check_qubit(far)?;
    let rotated = state.apply_gate(Gate::Cnot { control: keep, target: spare })?;
    let target = reindex(far, &[spare]);
    finish(rotated.measure(&[spare])?, |bits| if bits[0] == 1 { vec![(target, Pauli::X)] } else { Vec::new() })
}

/// `Σ_env |⟨x, env | ψ⟩ ± ⟨x̄, env | ψ⟩|² / 2` for every party pattern `x`
/// with leading bit 0, i.e. the weight of each GHZ-basis vector on `parties`.
fn ghz_basis_weights(state: &PureState, parties: &[usize]) -> Result<Vec<f64>> {
    if parties.len() < 2 {
        return Err(Error::invalid("GHZ fidelity needs at least two parties"));
    }
    check_distinct(parties)?;
    for &q in parties {
        state.check_qubit(q)?;
    }
    let k = parties.len();
    let env: Vec<usize> = (0..state.qubits).filter(|q| !parties.contains(q)).collect();
    let mut table = vec![vec![Complex64::new(0.0, 0.0); 1 << env.len()]; 1 << k];
    for (i, &a) in state.amps.iter().enumerate() {
        let x = parties.iter().fold(0, |acc, &q| (acc << 1) | usize::from(i & state.mask(q) != 0));
        let e = env.iter().fold(0, |acc, &q| (acc << 1) | usize::from(i & state.mask(q) != 0));
        table[x][e] = a;
    }
    let full = (1 << k) - 1;
    let mut weights = Vec::with_capacity(1 << k);
    for x in 0..(1 << (k - 1)) {
        let (row, flip) = (&table[x], &table[x ^ full]);
        for sign in [1.0, -1.0] {
            let w: f64 = row.iter().zip(flip).map(|(a, b)| (a + b * sign).norm_sqr()).sum::<f64>() / 2.0;
            weights.push(w);
        }
    }
    Ok(weights)
}

/// Fidelity of the `parties` subsystem with `(|0…0⟩ + |1…1⟩)/√2`, without
/// any correction.
pub fn ghz_overlap(state: &PureState, parties: &[usize]) -> Result<f64> {
    Ok(ghz_basis_weights(state, parties)?[0])
}

/// Best fidelity with the GHZ state over local Pauli corrections on the
/// parties.
pub fn ghz_fidelity(state: &PureState, parties: &[usize]) -> Result<f64> {
    Ok(ghz_basis_weights(state, parties)?.into_iter().fold(0.0, f64::max).min(1.0))
}

/// One line of the built-in verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

fn worst_fidelity(outcomes: &[MeasurementOutcome], parties: &[usize]) -> Result<f64> {
    outcomes.iter().map(|o| ghz_overlap(&o.post_state, parties)).try_fold(1.0f64, |acc, f| Ok(acc.min(f?)))
}

fn probability_total(outcomes: &[MeasurementOutcome]) -> f64 {
    outcomes.iter().map(|o| o.probability).sum()
}

/// Three-link chain `(0,1)(2,3)(4,5)`, swapped at `(1,2)` and then at the
/// middle node's remaining pair; returns every final branch over qubits (0, 1).
pub fn swap_chain(links: usize) -> Result<Vec<MeasurementOutcome>> {
    if links < 1 {
        return Err(Error::invalid("chain needs at least one link"));
    }
    let mut branches = vec![MeasurementOutcome {
        bits: Vec::new(),
        probability: 1.0,
        corrections: Vec::new(),
        post_state: PureState::bell_pairs(links)?,
    }];
    // After each swap the end-to-end pair sits on qubits (0, 1) and the next
    // untouched pair on (2, 3).
    for _ in 1..links {
        let mut next = Vec::new();
        for branch in branches {
            for mut o in bell_swap(&branch.post_state, 1, 2, 3)? {
                o.probability *= branch.probability;
                let mut bits = branch.bits.clone();
                bits.extend(&o.bits);
                o.bits = bits;
                next.push(o);
            }
        }
        branches = next;
    }
    Ok(branches)
}

/// Centralised route: a common parent fuses three Bell pairs
/// `(A,R1)(R2,B)(R3,C)` laid out as qubits `(0,1)(2,3)(4,5)`.
/// The GHZ state lands on qubits (0, 1, 2) = (A, B, C).
pub fn fuse_route() -> Result<Vec<MeasurementOutcome>> {
    ghz_fuse(&PureState::bell_pairs(3)?, &[1, 2, 4], &[0, 3, 5])
}

/// Fan-out route: pairs `(A_r, Root1)(Root2, B)(A_c, C)` on `(0,1)(2,3)(4,5)`.
/// The root swaps its two qubits to give a pair `(A_r, B)`, then A fans out
/// using its pair with C. The GHZ state lands on qubits (0, 1, 2) = (A, B, C).
pub fn fanout_route() -> Result<Vec<MeasurementOutcome>> {
    let mut out = Vec::new();
    for swap in bell_swap(&PureState::bell_pairs(3)?, 1, 2, 3)? {
        // Remaining qubits: A_r=0, B=1, A_c=2, C=3.
        for mut o in fanout_ghz(&swap.post_state, 0, 2, 3)? {
            o.probability *= swap.probability;
            let mut bits = swap.bits.clone();
            bits.extend(&o.bits);
            o.bits = bits;
            out.push(o);
        }
    }
    Ok(out)
}

/// Fidelity and probability checks printed by the `verify` command.
pub fn standard_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut push = |name: String, value: f64, expected: f64, tolerance: f64| {
        checks.push(Check { name, value, expected, tolerance });
    };

    let chain = swap_chain(3)?;
    push("swap_chain_3_links.fidelity".into(), worst_fidelity(&chain, &[0, 1])?, 1.0, 1e-9);
    push("swap_chain_3_links.probability_sum".into(), probability_total(&chain), 1.0, 1e-12);

    for n in 2..=6 {
        let state = PureState::bell_pairs(n)?;
        let center: Vec<usize> = (0..n).map(|i| 2 * i + 1).collect();
        let leaves: Vec<usize> = (0..n).map(|i| 2 * i).collect();
        let outcomes = ghz_fuse(&state, &center, &leaves)?;
        let parties: Vec<usize> = (0..n).collect();
        push(format!("ghz_fuse_{n}.fidelity"), worst_fidelity(&outcomes, &parties)?, 1.0, 1e-9);
        push(format!("ghz_fuse_{n}.probability_sum"), probability_total(&outcomes), 1.0, 1e-12);
    }

    let fan = fanout_ghz(&PureState::bell_pairs(2)?, 0, 2, 3)?;
    push("fanout.fidelity".into(), worst_fidelity(&fan, &[0, 1, 2])?, 1.0, 1e-9);
    push("fanout.probability_sum".into(), probability_total(&fan), 1.0, 1e-12);

    let fuse = fuse_route()?;
    let fanout = fanout_route()?;
    let (f_fuse, f_fan) = (worst_fidelity(&fuse, &[0, 1, 2])?, worst_fidelity(&fanout, &[0, 1, 2])?);
    push("route.fuse.fidelity".into(), f_fuse, 1.0, 1e-9);
    push("route.fanout.fidelity".into(), f_fan, 1.0, 1e-9);
    push("route.fidelity_difference".into(), (f_fuse - f_fan).abs(), 0.0, 1e-9);
    push("route.fanout.probability_sum".into(), probability_total(&fanout), 1.0, 1e-12);
    Ok(checks)
}
