//! Cascaded single-qubit compilation with a crosstalk ledger, deferred
//! z-frames and Mølmer–Sørensen gate insertion.
//!
//! Conventions: for every ion the physical evolution so far equals
//! `stored · R_z(−frame) · requested`, where `requested` is the logical
//! evolution already emitted and `pending` is queued logical work. Pulses are
//! planned in the ion's virtual frame at phase `φ` and sent to the laser at
//! `φ − frame − optical_phase`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::chain::{couplings_at, equilibrium_positions, radial_modes, BeamProfile, RadialModes, TrapConfig, WellMode};
use crate::decompose::{Decomposer, DecompositionResult, Factor, Target, Z_AXIS};
use crate::error::{Error, Result};
use crate::gates;
use crate::ir::{Circuit, Gate};
use crate::linalg::{aligned_max_diff2, Mat2};
use crate::ms::{area_for_pair, echo_sequence, EchoStyle};
use crate::program::{MsSegmentOp, Op, PulseOp, PulseProgram, Slot, Timing};
use crate::pulses::{CompositePulse, Scheme};

const X_AXIS: [f64; 3] = [1.0, 0.0, 0.0];
const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Cascade from ion 0 upward; crosstalk tracked on higher-index neighbours.
    #[default]
    Ascending,
    Descending,
}

impl Direction {
    fn step(self) -> isize {
        match self {
            Direction::Ascending => 1,
            Direction::Descending => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsSettings {
    pub loops: u32,
    /// Signed gap `ν − δ` (rad/s).
    pub gap: f64,
    pub eta: f64,
    /// Radial mode used for the gate (0 = highest frequency).
    pub mode_index: usize,
    /// Decouple spectator ions with echo flips by default.
    pub echo: bool,
    pub echo_style: EchoStyle,
    /// Spectators with weight below this fraction of the largest are left alone.
    pub echo_threshold: f64,
}

impl Default for MsSettings {
    fn default() -> Self {
        Self {
            loops: 2,
            gap: -2.0 * std::f64::consts::PI * 11.834e3,
            eta: 0.1,
            mode_index: 0,
            echo: true,
            echo_style: EchoStyle::FlipDecoupled,
            echo_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerConfig {
    pub trap: TrapConfig,
    pub beam: BeamProfile,
    pub scheme: Scheme,
    pub decomposer: Decomposer,
    /// Number of neighbours on the trailing side whose crosstalk is tracked.
    pub crosstalk_depth: usize,
    pub direction: Direction,
    pub ms: MsSettings,
    pub timing: Timing,
    /// Treat every ion as starting in |0⟩, which lets a z-rotation ahead of
    /// its first operation go unimplemented.
    pub assume_ground_state: bool,
    /// Search the CNOT optimization angles on a grid.
    pub optimize_cnot: bool,
    /// Let MS-targeted ions keep a rotation about their interaction axis
    /// instead of flushing everything but z components.
    pub ms_axis_freedom: bool,
    pub grid: usize,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        Self {
            trap: TrapConfig::default(),
            beam: BeamProfile::default(),
            scheme: Scheme::Pb1,
            decomposer: Decomposer::default(),
            crosstalk_depth: 2,
            direction: Direction::Ascending,
            ms: MsSettings::default(),
            timing: Timing::default(),
            assume_ground_state: true,
            optimize_cnot: true,
            ms_axis_freedom: false,
            grid: 16,
        }
    }
}

impl CompilerConfig {
    pub fn with_ions(n_ions: usize) -> Self {
        let mut cfg = Self::default();
        cfg.trap.n_ions = n_ions;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonLedger {
    /// Physical unitary not yet accounted for by the requested evolution.
    pub stored: Mat2,
    /// Deferred z-rotation angle.
    pub frame: f64,
    /// Logical work queued since the last flush.
    pub pending: Mat2,
    /// Logical state is still |0⟩ up to phase.
    pub fresh: bool,
}

impl Default for IonLedger {
    fn default() -> Self {
        Self { stored: Mat2::identity(), frame: 0.0, pending: Mat2::identity(), fresh: true }
    }
}

impl IonLedger {
    /// `stored · R_z(−frame)`: the physical-minus-logical unitary.
    pub fn offset(&self) -> Mat2 {
        self.stored * gates::rz(-self.frame)
    }
}

/// Chain geometry cached per compiler.
#[derive(Debug, Clone)]
struct Geometry {
    sq_positions: Vec<f64>,
    tq_positions: Vec<f64>,
    tq_modes: RadialModes,
    slot_centers: Vec<f64>,
}

impl Geometry {
    fn new(cfg: &CompilerConfig) -> Result<Self> {
        cfg.trap.validate()?;
        cfg.beam.validate()?;
        let n = cfg.trap.n_ions;
        let sq_positions = equilibrium_positions(&cfg.trap, WellMode::SingleQubit)?;
        let tq_positions = equilibrium_positions(&cfg.trap, WellMode::TwoQubit)?;
        let tq_modes = radial_modes(&cfg.trap, WellMode::TwoQubit)?;
        if cfg.ms.mode_index >= n {
            return Err(Error::Config(format!("MS mode index {} out of range", cfg.ms.mode_index)));
        }
        let s = cfg.direction.step();
        let x = &sq_positions;
        let slot_centers = (0..n)
            .map(|i| {
                if n == 1 {
                    return x[0];
                }
                let j = i as isize + s;
                let partner = if j >= 0 && (j as usize) < n {
                    x[j as usize]
                } else {
                    // mirror the neighbour on the other side
                    let k = (i as isize - s) as usize;
                    2.0 * x[i] - x[k]
                };
                cfg.beam.balanced_center(x[i].min(partner), x[i].max(partner))
            })
            .collect();
        Ok(Self { sq_positions, tq_positions, tq_modes, slot_centers })
    }
}

/// Angle `α` with `m ∝ R_z(α)`, if `m` is diagonal.
fn diagonal_angle(m: &Mat2) -> Option<f64> {
    if m[(0, 1)].norm() < DIAGONAL_TOL && m[(1, 0)].norm() < DIAGONAL_TOL {
        Some(m[(1, 1)].arg() - m[(0, 0)].arg())
    } else {
        None
    }
}

fn is_identity(m: &Mat2) -> bool {
    aligned_max_diff2(m, &Mat2::identity()) < DIAGONAL_TOL
}

/// How a flushed ion must be left.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FlushKind {
    /// Any final frame.
    Free,
    /// Ready for an MS gate: final frame free, extra rotation about the
    /// frame's x axis allowed.
    MsFree,
    /// Ready for an MS gate with the final frame fixed.
    MsFixed(f64),
}

#[derive(Debug, Clone)]
pub struct Compiler {
    cfg: CompilerConfig,
    geo: Geometry,
    decomposer: Decomposer,
    ledger: Vec<IonLedger>,
    program: PulseProgram,
    slot: Slot,
    well: WellMode,
}

impl Compiler {
    pub fn new(cfg: CompilerConfig) -> Result<Self> {
        let geo = Geometry::new(&cfg)?;
        let n = cfg.trap.n_ions;
        let home = match cfg.direction {
            Direction::Ascending => 0,
            Direction::Descending => n - 1,
        };
        let mut program = PulseProgram::empty(n, cfg.timing);
        program.initial_slot = Slot::Ion(home);
        program.initial_center = geo.slot_centers[home];
        Ok(Self {
            decomposer: cfg.decomposer.clone(),
            cfg,
            geo,
            ledger: vec![IonLedger::default(); n],
            program,
            slot: Slot::Ion(home),
            well: WellMode::SingleQubit,
        })
    }

    pub fn config(&self) -> &CompilerConfig {
        &self.cfg
    }

    pub fn n_ions(&self) -> usize {
        self.ledger.len()
    }

    pub fn ledger(&self) -> &[IonLedger] {
        &self.ledger
    }

    pub fn program(&self) -> &PulseProgram {
        &self.program
    }

    /// Beam centre used to address ion `i` in the single-qubit well.
    pub fn slot_center(&self, i: usize) -> f64 {
        self.geo.slot_centers[i]
    }

    pub fn single_qubit_positions(&self) -> &[f64] {
        &self.geo.sq_positions
    }

    fn check_ion(&self, ion: usize) -> Result<()> {
        if ion >= self.n_ions() {
            return Err(Error::QubitOutOfRange { index: ion, n_qubits: self.n_ions() });
        }
        Ok(())
    }

    /// Queues logical work `g` on `ion` (applied after what is already queued).
    pub fn queue(&mut self, ion: usize, g: &Mat2) -> Result<()> {
        self.check_ion(ion)?;
        let l = &mut self.ledger[ion];
        l.pending = g * l.pending;
        Ok(())
    }

    /// Logical `R_z(α)` on `ion` without emitting anything.
    pub fn defer_rz(&mut self, ion: usize, alpha: f64) -> Result<()> {
        self.check_ion(ion)?;
        let l = &mut self.ledger[ion];
        if is_identity(&l.pending) {
            l.frame += alpha;
        } else {
            l.pending = gates::rz(alpha) * l.pending;
        }
        Ok(())
    }

    fn cascade_order(&self, ions: &[usize]) -> Vec<usize> {
        let mut v = ions.to_vec();
        v.sort_unstable();
        v.dedup();
        if self.cfg.direction == Direction::Descending {
            v.reverse();
        }
        v
    }

    fn emit(&mut self, op: Op) {
        self.program.ops.push(op);
    }

    fn change_well(&mut self, to: WellMode) {
        if self.well != to {
            self.emit(Op::WellChange { to });
            self.well = to;
        }
    }

    fn move_to(&mut self, slot: Slot, center: f64) {
        if self.slot != slot {
            self.emit(Op::Transport { slot, center });
            self.slot = slot;
        }
    }

    /// Emits the single-qubit work needed on `ions`, in cascade order.
    pub fn flush(&mut self, ions: &[usize]) -> Result<()> {
        for i in self.cascade_order(ions) {
            self.check_ion(i)?;
            self.flush_ion(i, FlushKind::Free)?;
        }
        Ok(())
    }

    pub fn flush_all(&mut self) -> Result<()> {
        let all: Vec<usize> = (0..self.n_ions()).collect();
        self.flush(&all)
    }

    fn flush_ion(&mut self, i: usize, kind: FlushKind) -> Result<()> {
        let l = self.ledger[i].clone();
        let frame = l.frame;
        // undo of the ledger, expressed in the virtual frame
        let undo = gates::rz(frame) * l.stored.adjoint() * gates::rz(-frame);
        let m = l.pending * undo;
        let ground = self.cfg.assume_ground_state && l.fresh;
        let axis_free = self.cfg.ms_axis_freedom;
        let fresh_after = l.fresh && diagonal_angle(&l.pending).is_some();

        if kind == FlushKind::Free {
            if let Some(alpha) = diagonal_angle(&m) {
                self.ledger[i] = IonLedger {
                    stored: Mat2::identity(),
                    frame: frame + alpha,
                    pending: Mat2::identity(),
                    fresh: fresh_after,
                };
                return Ok(());
            }
        }

        let mut factors = Vec::new();
        match kind {
            FlushKind::Free => factors.push(Factor::Free(Z_AXIS)),
            FlushKind::MsFree => {
                factors.push(Factor::Free(Z_AXIS));
                if axis_free {
                    factors.push(Factor::Free(X_AXIS));
                }
            }
            FlushKind::MsFixed(target_frame) => {
                factors.push(Factor::Fixed(gates::rz(frame - target_frame)));
                if axis_free {
                    factors.push(Factor::Free(X_AXIS));
                }
            }
        }
        if ground {
            // a z-rotation on the logical |0⟩ is free
            factors.push(Factor::Fixed(l.pending));
            factors.push(Factor::Free(Z_AXIS));
            factors.push(Factor::Fixed(undo));
        } else {
            factors.push(Factor::Fixed(m));
        }
        let res = self.decomposer.solve(&Target { factors })?;

        let x_free = |k: usize| if axis_free { res.free_angles[k] } else { 0.0 };
        let (new_frame, x_angle) = match kind {
            FlushKind::Free => (frame - res.free_angles[0], 0.0),
            FlushKind::MsFree => (frame - res.free_angles[0], x_free(1)),
            FlushKind::MsFixed(target_frame) => (target_frame, x_free(0)),
        };
        self.emit_pulses(i, frame, &res);
        let stored = gates::rz(-new_frame) * gates::rx(x_angle) * gates::rz(new_frame);
        let l = &mut self.ledger[i];
        l.stored = stored;
        l.frame = new_frame;
        l.pending = Mat2::identity();
        l.fresh = fresh_after;
        Ok(())
    }

    /// Per-ion (relative Rabi rate, optical phase) with the beam at `center`.
    fn illumination(&self, center: f64) -> Vec<(f64, f64)> {
        self.geo
            .sq_positions
            .iter()
            .map(|x| (self.cfg.beam.relative_rabi(x - center), self.cfg.beam.phase(x - center)))
            .collect()
    }

    fn emit_pulses(&mut self, i: usize, frame: f64, res: &DecompositionResult) {
        if res.phases.is_empty() {
            return;
        }
        self.change_well(WellMode::SingleQubit);
        let center = self.geo.slot_centers[i];
        self.move_to(Slot::Ion(i), center);
        let ill = self.illumination(center);
        let (r_i, p_i) = ill[i];
        let rabi: Vec<f64> = ill.iter().map(|(r, _)| r / r_i).collect();
        let phase: Vec<f64> = ill.iter().map(|(_, p)| *p).collect();
        let n = self.n_ions() as isize;
        let s = self.cfg.direction.step();
        let tracked: Vec<usize> = (1..=self.cfg.crosstalk_depth as isize)
            .map(|k| i as isize + k * s)
            .filter(|&j| j >= 0 && j < n)
            .map(|j| j as usize)
            .collect();
        for &phi in &res.phases {
            let laser = phi - frame - p_i;
            let composite =
                CompositePulse::new(self.cfg.scheme, FRAC_PI_2, laser).expect("π/2 is inside the composite range");
            for &j in &tracked {
                let x = composite.unitary_with(rabi[j], phase[j]);
                self.ledger[j].stored = x * self.ledger[j].stored;
            }
            self.emit(Op::Pulse(PulseOp { target: i, composite, rabi: rabi.clone(), phase: phase.clone() }));
        }
    }

    /// Beam centre and coupling data for an MS gate on `(a, b)`.
    fn ms_geometry(&self, a: usize, b: usize) -> (f64, crate::chain::ChainModel) {
        let x = &self.geo.tq_positions;
        let center = self.cfg.beam.balanced_center(x[a].min(x[b]), x[a].max(x[b]));
        let model = couplings_at(
            &self.cfg.beam,
            center,
            x.clone(),
            self.geo.tq_modes.clone(),
            WellMode::TwoQubit,
            self.cfg.ms.mode_index,
        );
        (center, model)
    }

    /// `exp(−iθ X_a X_b)` in the logical frame.
    pub fn compile_ms(&mut self, a: usize, b: usize, theta: f64, echo: Option<bool>) -> Result<()> {
        self.check_ion(a)?;
        self.check_ion(b)?;
        if a.abs_diff(b) != 1 {
            return Err(Error::NotAdjacent(a, b));
        }
        let (center, model) = self.ms_geometry(a, b);
        let order = self.cascade_order(&[a, b]);
        let (first, second) = (order[0], order[1]);

        // Prepare both ions so that their frames differ by the optical phase
        // difference at the gate position.
        self.flush_ion(first, FlushKind::MsFree)?;
        let psi = -self.ledger[first].frame - model.phase[first];
        self.flush_ion(second, FlushKind::MsFixed(-psi - model.phase[second]))?;

        let n = self.n_ions();
        let phases: Vec<f64> = (0..n).map(|j| psi + model.phase[j]).collect();
        let area = area_for_pair(&model.c, a, b, theta);
        let cmax = model.c.iter().cloned().fold(0.0, f64::max);
        let use_echo = echo.unwrap_or(self.cfg.ms.echo);
        let spectators: Vec<usize> =
            (0..n).filter(|&j| j != a && j != b && model.c[j] > self.cfg.ms.echo_threshold * cmax).collect();

        let (segments, flips): (usize, Vec<Vec<usize>>) = if use_echo && !spectators.is_empty() {
            let seq = echo_sequence(spectators.len() + 2, &[0, 1], self.cfg.ms.echo_style)?;
            // map local indices (0, 1 = pair, 2.. = spectators) back to the chain
            let map = |k: usize| {
                if k == 0 {
                    a
                } else if k == 1 {
                    b
                } else {
                    spectators[k - 2]
                }
            };
            let flips = seq.flips.iter().map(|f| f.iter().map(|&k| map(k)).collect()).collect();
            (seq.n_segments(), flips)
        } else {
            (1, vec![Vec::new()])
        };
        let total_loops = (self.cfg.ms.loops as usize).max(segments);
        let loops = total_loops.div_ceil(segments) as u32;

        self.change_well(WellMode::TwoQubit);
        self.move_to(Slot::Pair(a.min(b), a.max(b)), center);
        for flip in flips.iter().take(segments) {
            self.emit(Op::MsSegment(MsSegmentOp {
                pair: (a.min(b), a.max(b)),
                c: model.c.clone(),
                area: area / segments as f64,
                phases: phases.clone(),
                loops,
                gap: self.cfg.ms.gap,
            }));
            for &k in flip {
                self.emit(Op::EchoFlip { ion: k, phase: phases[k] });
            }
        }
        self.change_well(WellMode::SingleQubit);
        self.ledger[a].fresh = false;
        self.ledger[b].fresh = false;
        Ok(())
    }

    fn cnot_parts(phi1: f64, phi2: f64) -> ([Mat2; 2], [Mat2; 2]) {
        let pre = [gates::ry(FRAC_PI_2) * gates::rz(-phi1), gates::rx(-phi2)];
        let post =
            [gates::rz(phi1) * gates::ry(-FRAC_PI_2) * gates::rx(-FRAC_PI_2), gates::rx(phi2) * gates::rx(-FRAC_PI_2)];
        (pre, post)
    }

    /// CNOT with explicit optimization angles.
    pub fn compile_cnot_with(&mut self, control: usize, target: usize, phi1: f64, phi2: f64) -> Result<()> {
        self.check_ion(control)?;
        self.check_ion(target)?;
        if control.abs_diff(target) != 1 {
            return Err(Error::NotAdjacent(control, target));
        }
        self.apply_cnot(control, target, phi1, phi2)
    }

    fn apply_cnot(&mut self, control: usize, target: usize, phi1: f64, phi2: f64) -> Result<()> {
        let (pre, post) = Self::cnot_parts(phi1, phi2);
        self.queue(control, &pre[0])?;
        self.queue(target, &pre[1])?;
        self.compile_ms(control, target, FRAC_PI_4, None)?;
        self.queue(control, &post[0])?;
        self.queue(target, &post[1])
    }

    /// Pulses emitted by a trial CNOT whose trailing work is flushed at once.
    fn trial_cost(&self, control: usize, target: usize, phi1: f64, phi2: f64) -> Result<usize> {
        let mut trial = self.clone();
        let before = trial.program.ops.len();
        trial.apply_cnot(control, target, phi1, phi2)?;
        trial.flush(&[control, target])?;
        Ok(trial.program.ops[before..].iter().filter(|o| matches!(o, Op::Pulse(_))).count())
    }

    /// CNOT through one MS gate. The optimization angles `φ₁` (z on the
    /// control) and `φ₂` (x on the target) cancel in the ideal gate and are
    /// chosen on a grid to minimize the emitted pulse count.
    pub fn compile_cnot(&mut self, control: usize, target: usize) -> Result<(f64, f64)> {
        self.check_ion(control)?;
        self.check_ion(target)?;
        if control.abs_diff(target) != 1 {
            return Err(Error::NotAdjacent(control, target));
        }
        let (mut phi1, mut phi2) = (0.0, 0.0);
        if self.cfg.optimize_cnot && self.cfg.grid > 1 {
            let grid: Vec<f64> =
                (0..self.cfg.grid).map(|k| 2.0 * std::f64::consts::PI * k as f64 / self.cfg.grid as f64).collect();
            let control_first = self.cascade_order(&[control, target])[0] == control;
            for pass in 0..2 {
                let vary_phi1 = (pass == 0) == control_first;
                let mut best = (usize::MAX, 0.0);
                for &g in &grid {
                    let (p1, p2) = if vary_phi1 { (g, phi2) } else { (phi1, g) };
                    let cost = self.trial_cost(control, target, p1, p2)?;
                    if cost < best.0 {
                        best = (cost, g);
                    }
                }
                if vary_phi1 {
                    phi1 = best.1;
                } else {
                    phi2 = best.1;
                }
            }
        }
        self.apply_cnot(control, target, phi1, phi2)?;
        Ok((phi1, phi2))
    }

    /// Queues every target, then runs one cascade over the chain.
    pub fn compile_cascade(&mut self, targets: &[Mat2]) -> Result<()> {
        if targets.len() != self.n_ions() {
            return Err(Error::DimensionMismatch { expected: self.n_ions(), got: targets.len() });
        }
        for (i, t) in targets.iter().enumerate() {
            self.queue(i, t)?;
        }
        self.flush_all()
    }

    /// Flushes remaining work and returns the program.
    pub fn finish(mut self, measure: bool) -> Result<PulseProgram> {
        self.flush_all()?;
        self.change_well(WellMode::SingleQubit);
        if measure {
            self.emit(Op::Measure);
        }
        self.program.frames = self.ledger.iter().map(|l| l.frame).collect();
        self.program.validate()?;
        Ok(self.program)
    }
}

/// Compiles a whole circuit. Single-qubit gates are concatenated per ion and
/// only emitted when an entangling gate, barrier or the end requires it.
pub fn compile_circuit(circuit: &Circuit, cfg: &CompilerConfig) -> Result<PulseProgram> {
    circuit.validate(cfg.trap.n_ions)?;
    let mut c = Compiler::new(cfg.clone())?;
    let mut measure = false;
    for (index, gate) in circuit.gates.iter().enumerate() {
        let tag = |e: Error| match e {
            Error::InvalidGate { .. } => e,
            other => Error::InvalidGate { index, reason: other.to_string() },
        };
        match *gate {
            Gate::Prep | Gate::Barrier => {
                if *gate == Gate::Barrier {
                    c.flush_all().map_err(tag)?;
                }
            }
            Gate::Measure => measure = true,
            Gate::Single { ion, gate } => match gate {
                crate::ir::SingleGate::Rz(alpha) => c.defer_rz(ion, alpha)?,
                _ => c.queue(ion, &gate.matrix())?,
            },
            Gate::Ms { a, b, theta, echo } => c.compile_ms(a, b, theta, echo).map_err(tag)?,
            Gate::Cnot { control, target } => {
                c.compile_cnot(control, target).map_err(tag)?;
            }
        }
    }
    c.finish(measure)
}
