//! Subcommand implementations. Each returns an [`Outcome`] for the caller
//! to print or write.

use std::path::{Path, PathBuf};

use anyhow::Context;
use ioncascade::bell::{parity_scan, round_half_even};
use ioncascade::ir::{Circuit, Gate, SingleGate};
use ioncascade::pauli::PauliString;
use ioncascade::program::PulseProgram;
use ioncascade::qpt::{qpt_run, setting_labels, N_PAULI};
use ioncascade::rb::rb_run;
use ioncascade::sim::{gate_scan, ideal_state, run_program};
use ioncascade::state::basis_label;
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::report::{fmt, wilson, Outcome, Table};

type Result<T> = std::result::Result<T, Failure>;

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::input)?;
    Circuit::parse(&text).map_err(|e| Failure::input(anyhow::Error::from(e).context(path.display().to_string())))
}

fn circuit_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn compile(circuit: &Circuit, cfg: &RunConfig) -> Result<PulseProgram> {
    Ok(ioncascade::compiler::compile_circuit(circuit, &cfg.compiler_config())?)
}

fn program_json(program: &PulseProgram) -> serde_json::Value {
    json!({
        "n_ions": program.n_ions,
        "total_time": program.total_time(),
        "counts": program.counts(),
        "gate_steps": program.gate_steps().len(),
    })
}

pub fn compile_cmd(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let circuit = read_circuit(path)?;
    let program = compile(&circuit, cfg)?;
    let listing = program.listing();
    let c = program.counts();
    Ok(Outcome {
        command: "compile",
        summary: format!(
            "{}: {} pulses ({} quarter turns), {} transports, {} MS segments, {:.1} µs",
            circuit_name(path),
            c.pulses,
            c.quarter_turns,
            c.transports,
            c.ms_segments,
            program.total_time() * 1e6
        ),
        results: json!({ "circuit": circuit_name(path), "program": program_json(&program), "listing": listing }),
        tables: Vec::new(),
        files: vec![(format!("{}.pulses", circuit_name(path)), listing)],
    })
}

/// Every product preparation from {I, H, X} on each ion, ion 0 varying
/// slowest.
pub fn preparations(n: usize) -> Vec<Vec<SingleGate>> {
    let choices = [SingleGate::I, SingleGate::H, SingleGate::X];
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            let mut v = vec![SingleGate::I; n];
            for q in (0..n).rev() {
                v[q] = choices[k % 3];
                k /= 3;
            }
            v
        })
        .collect()
}

fn prep_label(prep: &[SingleGate]) -> String {
    prep.iter()
        .map(|g| match g {
            SingleGate::H => 'H',
            SingleGate::X => 'X',
            _ => 'I',
        })
        .collect()
}

fn with_preparation(circuit: &Circuit, prep: &[SingleGate]) -> Circuit {
    let mut gates = vec![Gate::Prep];
    gates.extend(
        prep.iter().enumerate().filter(|(_, g)| **g != SingleGate::I).map(|(ion, &gate)| Gate::Single { ion, gate }),
    );
    gates.extend(circuit.gates.iter().filter(|g| **g != Gate::Prep).cloned());
    Circuit::new(gates)
}

fn with_measure(circuit: &Circuit) -> Circuit {
    let mut c = circuit.clone();
    if c.gates.last() != Some(&Gate::Measure) {
        c.gates.push(Gate::Measure);
    }
    c
}

pub fn run_cmd(cfg: &RunConfig, paths: &[PathBuf], all_preparations: bool) -> Result<Outcome> {
    if paths.is_empty() {
        return Err(Failure::input(anyhow::anyhow!("no circuit files given")));
    }
    let n = cfg.chain.trap.n_ions;
    let states: Vec<String> = (0..1usize << n).map(|s| basis_label(s, n)).collect();
    let mut header = vec!["circuit".to_string(), "preparation".into(), "shots".into()];
    for s in &states {
        header.extend([format!("P{s}"), format!("P{s}_lo"), format!("P{s}_hi"), format!("P{s}_ideal")]);
    }
    let mut table = Table { name: "populations".into(), header, rows: Vec::new() };
    let mut runs = Vec::new();
    let mut seed = cfg.sim.seed;
    for path in paths {
        let name = circuit_name(path);
        let circuit = read_circuit(path)?;
        let preps = if all_preparations { preparations(n) } else { vec![vec![SingleGate::I; n]] };
        for prep in preps {
            let label = if all_preparations { prep_label(&prep) } else { String::new() };
            let program = compile(&with_measure(&with_preparation(&circuit, &prep)), cfg)?;
            let rec = run_program(&program, &cfg.sim.noise, cfg.sim.shots, seed)?;
            let ideal = ideal_state(&program, None)?.probabilities();
            let freq = rec.frequencies();
            let mut row = vec![name.clone(), label.clone(), rec.shots.to_string()];
            let mut ci = Vec::new();
            for (s, &k) in rec.counts.iter().enumerate() {
                let (lo, hi) = wilson(k, rec.shots);
                ci.push([lo, hi]);
                row.extend([fmt(freq[s]), fmt(lo), fmt(hi), fmt(ideal[s])]);
            }
            table.rows.push(row);
            runs.push(json!({
                "circuit": name,
                "preparation": label,
                "seed": seed,
                "shots": rec.shots,
                "states": states,
                "counts": rec.counts,
                "frequencies": freq,
                "wilson95": ci,
                "ideal": ideal,
                "program": program_json(&program),
            }));
            seed = seed.wrapping_add(1);
        }
    }
    Ok(Outcome {
        command: "run",
        summary: format!("{} runs of {} shots on {} ions", runs.len(), cfg.sim.shots, n),
        results: json!({ "runs": runs }),
        tables: vec![table],
        files: Vec::new(),
    })
}

/// Measured and ideal populations with the gate beam stopped after each
/// gate op in turn.
pub fn scan_cmd(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let name = circuit_name(path);
    let program = compile(&with_measure(&read_circuit(path)?), cfg)?;
    let n = program.n_ions;
    let steps = program.gate_steps().len();
    let states: Vec<String> = (0..1usize << n).map(|s| basis_label(s, n)).collect();
    let mut header = vec!["step".to_string()];
    for s in &states {
        header.extend([format!("P{s}"), format!("P{s}_ideal")]);
    }
    let mut table = Table { name: "scan".into(), header, rows: Vec::new() };
    let mut trace = Vec::new();
    for k in 0..=steps {
        let rec = gate_scan(&program, k, &cfg.sim.noise, cfg.sim.shots, cfg.sim.seed.wrapping_add(k as u64))?;
        let ideal = ideal_state(&program, Some(k))?.probabilities();
        let freq = rec.frequencies();
        let mut row = vec![k.to_string()];
        for s in 0..states.len() {
            row.extend([fmt(freq[s]), fmt(ideal[s])]);
        }
        table.rows.push(row);
        trace.push(json!({ "step": k, "frequencies": freq, "ideal": ideal }));
    }
    Ok(Outcome {
        command: "scan",
        summary: format!("{name}: {} scan points of {} shots", steps + 1, cfg.sim.shots),
        results: json!({ "circuit": name, "states": states, "gate_steps": steps, "trace": trace }),
        tables: vec![table],
        files: Vec::new(),
    })
}

pub fn rb_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let rb = &cfg.characterization.rb;
    let exp = rb_run(rb.n_ions, &cfg.rb_settings(), &cfg.rb_mode())?;
    let mut table = Table::new("rb", &["ion", "length", "survival", "sem"]);
    let mut ions = Vec::new();
    for (ion, fit) in exp.fits.iter().enumerate() {
        let avg = exp.averages(ion);
        for (len, (m, s)) in exp.lengths.iter().zip(&avg) {
            table.push([ion.to_string(), len.to_string(), fmt(*m), fmt(*s)]);
        }
        ions.push(json!({
            "ion": ion,
            "eps_g": fit.eps_g,
            "eps_g_err": fit.eps_g_err,
            "eps_m": fit.eps_m,
            "eps_m_err": fit.eps_m_err,
            "offset": fit.offset,
            "fidelity": fit.fidelity(),
            "reduced_chi2": fit.reduced_chi2,
            "survival": avg.iter().map(|a| a.0).collect::<Vec<_>>(),
            "sem": avg.iter().map(|a| a.1).collect::<Vec<_>>(),
        }));
    }
    let mean_f = exp.fits.iter().map(|f| f.fidelity()).sum::<f64>() / exp.fits.len() as f64;
    Ok(Outcome {
        command: "rb",
        summary: format!(
            "{} ions, mean Clifford fidelity {:.4}; {}",
            exp.fits.len(),
            mean_f,
            exp.fits
                .iter()
                .enumerate()
                .map(|(i, f)| format!("ion {i}: eps_g {:.4}±{:.4}, eps_m {:.4}", f.eps_g, f.eps_g_err, f.eps_m))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        results: json!({ "mode": rb.mode, "lengths": exp.lengths, "fidelity": mean_f, "ions": ions }),
        tables: vec![table],
        files: Vec::new(),
    })
}

pub fn bell_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let scan = parity_scan(&cfg.compiler_config(), &cfg.sim.noise, &cfg.characterization.bell)?;
    let mut table = Table::new("parity", &["phase", "parity"]);
    for (p, v) in scan.phases.iter().zip(&scan.parity) {
        table.push([fmt(*p), fmt(*v)]);
    }
    let rounded = round_half_even(scan.fidelity, 2);
    Ok(Outcome {
        command: "bell",
        summary: format!(
            "P00 {:.3}, P11 {:.3}, parity amplitude {:.3}, fidelity {:.3} ({rounded:.2})",
            scan.p00, scan.p11, scan.amplitude, scan.fidelity
        ),
        results: json!({
            "p00": scan.p00,
            "p11": scan.p11,
            "amplitude": scan.amplitude,
            "phase": scan.phase,
            "offset": scan.offset,
            "fidelity": scan.fidelity,
            "fidelity_rounded": rounded,
            "spectator_p1": scan.spectator_p1,
            "phases": scan.phases,
            "parity": scan.parity,
        }),
        tables: vec![table],
        files: Vec::new(),
    })
}

pub fn qpt_cmd(cfg: &RunConfig, path: Option<&Path>) -> Result<Outcome> {
    let (name, body) = match path {
        Some(p) => (circuit_name(p), read_circuit(p)?),
        None => {
            let text = &cfg.characterization.qpt.circuit;
            (text.trim().to_string(), Circuit::parse(text)?)
        }
    };
    let pm = qpt_run(&body, &cfg.compiler_config_for(2), &cfg.sim.noise, &cfg.qpt_settings())?;
    let labels: Vec<String> = (0..N_PAULI).map(|k| PauliString::from_index(k, 2).to_string()).collect();
    let grid = |m: &ioncascade::linalg::CMat, f: fn(ioncascade::C64) -> f64| -> Vec<Vec<f64>> {
        (0..N_PAULI).map(|i| (0..N_PAULI).map(|j| f(m[(i, j)])).collect()).collect()
    };
    let (re, im) = (grid(&pm.chi, |v| v.re), grid(&pm.chi, |v| v.im));
    let chi_table = |tname: &str, g: &[Vec<f64>]| {
        let mut header = vec!["pauli".to_string()];
        header.extend(labels.iter().cloned());
        let mut t = Table { name: tname.into(), header, rows: Vec::new() };
        for (i, row) in g.iter().enumerate() {
            t.push(std::iter::once(labels[i].clone()).chain(row.iter().map(|v| fmt(*v))));
        }
        t
    };
    let mut p00 = Table::new("qpt_p00", &["setting", "preparation", "analysis", "p00"]);
    for (s, p) in pm.p00.iter().enumerate() {
        let (a, b) = setting_labels(s);
        p00.push([s.to_string(), a, b, fmt(*p)]);
    }
    let ideal_nonzero = pm.ideal.iter().filter(|v| v.norm() > 1e-9).count();
    Ok(Outcome {
        command: "qpt",
        summary: format!(
            "{name}: process fidelity {:.4}, bootstrap {:.4}±{:.4} ({} resamples of {} shots)",
            pm.fidelity, pm.bootstrap_mean, pm.bootstrap_std, cfg.characterization.qpt.bootstrap, pm.shots
        ),
        results: json!({
            "circuit": name,
            "fidelity": pm.fidelity,
            "bootstrap_mean": pm.bootstrap_mean,
            "bootstrap_std": pm.bootstrap_std,
            "element_std": pm.element_std,
            "shots": pm.shots,
            "labels": labels,
            "chi_re": re,
            "chi_im": im,
            "ideal_re": grid(&pm.ideal, |v| v.re),
            "ideal_im": grid(&pm.ideal, |v| v.im),
            "ideal_nonzero": ideal_nonzero,
            "p00": pm.p00,
        }),
        tables: vec![chi_table("qpt_chi_re", &re), chi_table("qpt_chi_im", &im), p00],
        files: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preparation_order() {
        let p = preparations(2);
        assert_eq!(p.len(), 9);
        assert_eq!(prep_label(&p[0]), "II");
        assert_eq!(prep_label(&p[1]), "IH");
        assert_eq!(prep_label(&p[3]), "HI");
        assert_eq!(prep_label(&p[8]), "XX");
    }

    #[test]
    fn preparation_goes_after_prep_marker() {
        let c = Circuit::parse("PREP\nCNOT 0 1\n").unwrap();
        let c = with_preparation(&c, &[SingleGate::X, SingleGate::I]);
        assert_eq!(c.gates[0], Gate::Prep);
        assert_eq!(c.gates[1], Gate::Single { ion: 0, gate: SingleGate::X });
        assert_eq!(c.gates.len(), 3);
    }
}
