//! Physical operation lists produced by the compiler.

use serde::{Deserialize, Serialize};

use crate::chain::WellMode;
use crate::error::{Error, Result};
use crate::pulses::{CompositePulse, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    /// Duration of one calibrated π/2 (s).
    pub pi_half: f64,
    /// Fixed overhead added to every passband composite (s).
    pub composite_overhead: f64,
    pub transport: f64,
    pub well_change: f64,
    /// Single echo flip (s).
    pub echo_flip: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self { pi_half: 4e-6, composite_overhead: 52e-6, transport: 100e-6, well_change: 50e-6, echo_flip: 8e-6 }
    }
}

/// Where the beam sits relative to the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slot {
    /// Single-qubit addressing position for an ion.
    Ion(usize),
    /// Two-qubit gate position for a pair.
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseOp {
    /// Ion the intensity is calibrated on.
    pub target: usize,
    /// Laser-frame sequence.
    pub composite: CompositePulse,
    /// Per-ion area scale relative to the target (target = 1).
    pub rabi: Vec<f64>,
    /// Per-ion optical phase added to every component.
    pub phase: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSegmentOp {
    pub pair: (usize, usize),
    /// Per-ion coupling weights.
    pub c: Vec<f64>,
    /// Geometric area of this segment.
    pub area: f64,
    /// Per-ion spin phase of the interaction axis, including the optical phase.
    pub phases: Vec<f64>,
    pub loops: u32,
    pub gap: f64,
}

impl MsSegmentOp {
    pub fn duration(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.loops as f64 / self.gap.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Op {
    WellChange {
        to: WellMode,
    },
    Transport {
        slot: Slot,
        center: f64,
    },
    Pulse(PulseOp),
    MsSegment(MsSegmentOp),
    /// Ideal π rotation about `phase + π/2` on one ion.
    EchoFlip {
        ion: usize,
        phase: f64,
    },
    Measure,
}

impl Op {
    pub fn is_gate(&self) -> bool {
        matches!(self, Op::Pulse(_) | Op::MsSegment(_) | Op::EchoFlip { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub pulses: usize,
    pub quarter_turns: usize,
    pub transports: usize,
    pub well_changes: usize,
    pub ms_segments: usize,
    pub echo_flips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub n_ions: usize,
    /// Beam position before the first op.
    pub initial_slot: Slot,
    pub initial_center: f64,
    pub ops: Vec<Op>,
    /// Deferred z-rotation per ion at the end of the program: the logical
    /// result is `⊗ R_z(frames[i])` applied after the physical one.
    pub frames: Vec<f64>,
    pub timing: Timing,
}

impl PulseProgram {
    pub fn empty(n_ions: usize, timing: Timing) -> Self {
        Self {
            n_ions,
            initial_slot: Slot::Ion(0),
            initial_center: 0.0,
            ops: Vec::new(),
            frames: vec![0.0; n_ions],
            timing,
        }
    }

    pub fn op_duration(&self, op: &Op) -> f64 {
        let t = &self.timing;
        match op {
            Op::WellChange { .. } => t.well_change,
            Op::Transport { .. } => t.transport,
            Op::Pulse(p) => {
                let base = p.composite.quarter_turns() as f64 * t.pi_half;
                match p.composite.scheme {
                    Scheme::Bare => base,
                    Scheme::Pb1 => base + t.composite_overhead,
                }
            }
            Op::MsSegment(m) => m.duration(),
            Op::EchoFlip { .. } => t.echo_flip,
            Op::Measure => 0.0,
        }
    }

    pub fn total_time(&self) -> f64 {
        self.ops.iter().fold(0.0, |acc, o| acc + self.op_duration(o))
    }

    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for op in &self.ops {
            match op {
                Op::WellChange { .. } => c.well_changes += 1,
                Op::Transport { .. } => c.transports += 1,
                Op::Pulse(p) => {
                    c.pulses += 1;
                    c.quarter_turns += p.composite.quarter_turns();
                }
                Op::MsSegment(_) => c.ms_segments += 1,
                Op::EchoFlip { .. } => c.echo_flips += 1,
                Op::Measure => {}
            }
        }
        c
    }

    /// Pulses occur only in the single-qubit well, MS segments and echo flips
    /// only in the two-qubit well, every MS block is bracketed by well
    /// changes, and nothing follows a measurement.
    pub fn validate(&self) -> Result<()> {
        let mut well = WellMode::SingleQubit;
        let mut measured = false;
        let mut ms_since_change = false;
        for (k, op) in self.ops.iter().enumerate() {
            let fail = |msg: String| Err(Error::IllegalProgram(format!("op {k}: {msg}")));
            if measured {
                return fail("operation after measurement".into());
            }
            match op {
                Op::WellChange { to } => {
                    if *to == well {
                        return fail(format!("redundant well change to {to:?}"));
                    }
                    if well == WellMode::TwoQubit && !ms_since_change {
                        return fail("two-qubit well entered without an MS segment".into());
                    }
                    well = *to;
                    ms_since_change = false;
                }
                Op::Pulse(p) => {
                    if well != WellMode::SingleQubit {
                        return fail(format!("pulse in {well:?} well"));
                    }
                    if p.rabi.len() != self.n_ions || p.phase.len() != self.n_ions || p.target >= self.n_ions {
                        return fail("pulse dimensions do not match the chain".into());
                    }
                }
                Op::MsSegment(m) => {
                    if well != WellMode::TwoQubit {
                        return fail(format!("MS segment in {well:?} well"));
                    }
                    if m.c.len() != self.n_ions || m.phases.len() != self.n_ions {
                        return fail("MS dimensions do not match the chain".into());
                    }
                    ms_since_change = true;
                }
                Op::EchoFlip { ion, .. } => {
                    if well != WellMode::TwoQubit {
                        return fail("echo flip outside the two-qubit well".into());
                    }
                    if *ion >= self.n_ions {
                        return fail(format!("echo flip on ion {ion}"));
                    }
                }
                Op::Transport { .. } => {}
                Op::Measure => measured = true,
            }
        }
        if well == WellMode::TwoQubit {
            return Err(Error::IllegalProgram("program ends in the two-qubit well".into()));
        }
        Ok(())
    }

    /// Indices of ops that act on the qubits.
    pub fn gate_steps(&self) -> Vec<usize> {
        self.ops.iter().enumerate().filter(|(_, o)| o.is_gate()).map(|(k, _)| k).collect()
    }

    /// Human-readable listing, one op per line with start times in μs.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        let mut t = 0.0;
        for (k, op) in self.ops.iter().enumerate() {
            let line = match op {
                Op::WellChange { to } => format!("well-change  -> {to:?}"),
                Op::Transport { slot, center } => format!("transport    {slot:?} (beam at {center:+.3} um)"),
                Op::Pulse(p) => format!(
                    "pulse        ion {} {:?} theta={:.4} phi={:+.4} ({} sub-pulses)",
                    p.target,
                    p.composite.scheme,
                    p.composite.theta,
                    p.composite.phi,
                    p.composite.pulses.len()
                ),
                Op::MsSegment(m) => format!(
                    "ms-segment   ions {:?} area={:.4} loops={} gap={:.1} Hz",
                    m.pair,
                    m.area,
                    m.loops,
                    m.gap / (2.0 * std::f64::consts::PI)
                ),
                Op::EchoFlip { ion, phase } => format!("echo-flip    ion {ion} phase={phase:+.4}"),
                Op::Measure => "measure".to_string(),
            };
            out.push_str(&format!("{k:4}  {:9.1}  {line}\n", t * 1e6));
            t += self.op_duration(op);
        }
        out.push_str(&format!("total {:.1} us\n", t * 1e6));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::pb1;
    use std::f64::consts::FRAC_PI_2;

    fn pulse(n: usize) -> Op {
        Op::Pulse(PulseOp {
            target: 0,
            composite: pb1(FRAC_PI_2, 0.0).unwrap(),
            rabi: vec![1.0; n],
            phase: vec![0.0; n],
        })
    }

    fn ms(n: usize) -> Op {
        Op::MsSegment(MsSegmentOp {
            pair: (0, 1),
            c: vec![0.5; n],
            area: 1.0,
            phases: vec![0.0; n],
            loops: 2,
            gap: -2.0 * std::f64::consts::PI * 11.834e3,
        })
    }

    #[test]
    fn pb1_quarter_pulse_takes_120_us() {
        let mut p = PulseProgram::empty(2, Timing::default());
        p.ops.push(pulse(2));
        assert!((p.total_time() - 120e-6).abs() < 1e-12);
        assert_eq!(p.counts().quarter_turns, 17);
    }

    #[test]
    fn ms_segment_duration() {
        let Op::MsSegment(m) = ms(2) else { unreachable!() };
        assert!((m.duration() - 169.0e-6).abs() < 0.1e-6);
    }

    #[test]
    fn legality() {
        let mut p = PulseProgram::empty(2, Timing::default());
        p.ops = vec![
            pulse(2),
            Op::WellChange { to: WellMode::TwoQubit },
            Op::Transport { slot: Slot::Pair(0, 1), center: 0.0 },
            ms(2),
            Op::WellChange { to: WellMode::SingleQubit },
            pulse(2),
            Op::Measure,
        ];
        assert!(p.validate().is_ok());
        let mut bad = p.clone();
        bad.ops.swap(2, 3);
        bad.ops.insert(3, pulse(2));
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.ops.remove(4);
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.ops.push(pulse(2));
        assert!(bad.validate().is_err());
        assert_eq!(p.gate_steps(), vec![0, 3, 5]);
    }
}
