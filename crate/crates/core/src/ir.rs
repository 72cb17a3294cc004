//! Line-oriented circuit description.
//!
//! One gate per line: `GATE ion [ion] [angle ...]`. Gate names are case
//! insensitive, `#` starts a comment, and angles accept expressions in `pi`
//! with `+ - * /` and parentheses.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordTable, GROUP_ORDER};
use crate::error::{Error, Result};
use crate::gates;
use crate::linalg::{to_dyn, CMat, Mat2, Unitary};
use crate::ms::weighted_xx;
use crate::state::{index_to_bits, QuantumState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingleGate {
    I,
    X,
    Y,
    Z,
    H,
    S,
    T,
    R { theta: f64, phi: f64 },
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Clifford(usize),
}

impl SingleGate {
    pub fn matrix(&self) -> Mat2 {
        match *self {
            SingleGate::I => gates::identity(),
            SingleGate::X => gates::x(),
            SingleGate::Y => gates::y(),
            SingleGate::Z => gates::z(),
            SingleGate::H => gates::h(),
            SingleGate::S => gates::s(),
            SingleGate::T => gates::t(),
            SingleGate::R { theta, phi } => gates::r_phi(theta, phi),
            SingleGate::Rx(a) => gates::rx(a),
            SingleGate::Ry(a) => gates::ry(a),
            SingleGate::Rz(a) => gates::rz(a),
            SingleGate::Clifford(k) => CliffordTable::get().matrix(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Single {
        ion: usize,
        gate: SingleGate,
    },
    /// `exp(−iθ X_a X_b)`; `echo` overrides the compiler default.
    Ms {
        a: usize,
        b: usize,
        theta: f64,
        echo: Option<bool>,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Prep,
    Measure,
    /// Forces all pending single-qubit work to be emitted.
    Barrier,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(gates: Vec<Gate>) -> Self {
        Self { gates }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut gates = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            gates.push(parse_line(line).map_err(|reason| Error::Parse { line: k + 1, reason })?);
        }
        Ok(Self { gates })
    }

    /// Largest ion index referenced, if any.
    pub fn max_ion(&self) -> Option<usize> {
        self.gates
            .iter()
            .filter_map(|g| match *g {
                Gate::Single { ion, .. } => Some(ion),
                Gate::Ms { a, b, .. } => Some(a.max(b)),
                Gate::Cnot { control, target } => Some(control.max(target)),
                _ => None,
            })
            .max()
    }

    /// Noiseless unitary of the gate list on `n_ions` qubits; preparation,
    /// barriers and measurement are ignored.
    pub fn ideal_unitary(&self, n_ions: usize) -> Result<Unitary> {
        self.validate(n_ions)?;
        let dim = 1usize << n_ions;
        let mut m = CMat::zeros(dim, dim);
        for col in 0..dim {
            let mut st = QuantumState::basis(&index_to_bits(col, n_ions));
            for g in &self.gates {
                match *g {
                    Gate::Single { ion, gate } => st.apply_mut(&to_dyn(&gate.matrix()), &[ion])?,
                    Gate::Ms { a, b, theta, .. } => {
                        st.apply_mut(&weighted_xx(&[1.0, 1.0], theta / 2.0, &[0.0, 0.0]), &[a, b])?
                    }
                    Gate::Cnot { control, target } => st.apply_mut(gates::cnot(0, 1).matrix(), &[control, target])?,
                    Gate::Prep | Gate::Measure | Gate::Barrier => {}
                }
            }
            let v = st.amplitudes().expect("pure state");
            m.set_column(col, v);
        }
        Ok(Unitary::from_matrix_unchecked(m))
    }

    pub fn validate(&self, n_ions: usize) -> Result<()> {
        let bad = |index: usize, reason: String| Err(Error::InvalidGate { index, reason });
        let check = |index: usize, ion: usize| -> Result<()> {
            if ion >= n_ions {
                return bad(index, format!("ion {ion} outside a {n_ions}-ion chain"));
            }
            Ok(())
        };
        let mut started = false;
        let mut measured = false;
        for (index, g) in self.gates.iter().enumerate() {
            if measured {
                return bad(index, "gates after MEASURE".into());
            }
            match *g {
                Gate::Prep => {
                    if started {
                        return bad(index, "PREP must precede all other gates".into());
                    }
                }
                Gate::Measure => measured = true,
                Gate::Barrier => {}
                Gate::Single { ion, gate } => {
                    check(index, ion)?;
                    if let SingleGate::Clifford(k) = gate {
                        if k >= GROUP_ORDER {
                            return bad(index, format!("Clifford index {k} outside 0..24"));
                        }
                    }
                }
                Gate::Ms { a, b, .. } => {
                    check(index, a)?;
                    check(index, b)?;
                    if a.abs_diff(b) != 1 {
                        return bad(index, format!("MS ions {a} and {b} are not nearest neighbours"));
                    }
                }
                Gate::Cnot { control, target } => {
                    check(index, control)?;
                    check(index, target)?;
                    if control.abs_diff(target) != 1 {
                        return bad(index, format!("CNOT ions {control} and {target} are not nearest neighbours"));
                    }
                }
            }
            started = true;
        }
        Ok(())
    }
}

fn fmt_angle(a: f64) -> String {
    format!("{a:?}")
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Single { ion, gate } => match gate {
                SingleGate::I => write!(f, "I {ion}"),
                SingleGate::X => write!(f, "X {ion}"),
                SingleGate::Y => write!(f, "Y {ion}"),
                SingleGate::Z => write!(f, "Z {ion}"),
                SingleGate::H => write!(f, "H {ion}"),
                SingleGate::S => write!(f, "S {ion}"),
                SingleGate::T => write!(f, "T {ion}"),
                SingleGate::R { theta, phi } => write!(f, "R {ion} {} {}", fmt_angle(theta), fmt_angle(phi)),
                SingleGate::Rx(a) => write!(f, "RX {ion} {}", fmt_angle(a)),
                SingleGate::Ry(a) => write!(f, "RY {ion} {}", fmt_angle(a)),
                SingleGate::Rz(a) => write!(f, "RZ {ion} {}", fmt_angle(a)),
                SingleGate::Clifford(k) => write!(f, "C {ion} {k}"),
            },
            Gate::Ms { a, b, theta, echo } => {
                write!(f, "MS {a} {b} {}", fmt_angle(theta))?;
                match echo {
                    Some(true) => write!(f, " echo"),
                    Some(false) => write!(f, " noecho"),
                    None => Ok(()),
                }
            }
            Gate::Cnot { control, target } => write!(f, "CNOT {control} {target}"),
            Gate::Prep => write!(f, "PREP"),
            Gate::Measure => write!(f, "MEASURE"),
            Gate::Barrier => write!(f, "BARRIER"),
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

fn parse_line(line: &str) -> std::result::Result<Gate, String> {
    let mut words = line.split_whitespace();
    let name = words.next().unwrap_or("").to_ascii_uppercase();
    let args: Vec<&str> = words.collect();
    let want = |n: usize| -> std::result::Result<(), String> {
        if args.len() != n {
            Err(format!("{name} takes {n} argument(s), got {}", args.len()))
        } else {
            Ok(())
        }
    };
    let ion = |s: &str| s.parse::<usize>().map_err(|_| format!("bad ion index '{s}'"));
    let single = |gate: SingleGate, n: usize| -> std::result::Result<Gate, String> {
        want(n)?;
        Ok(Gate::Single { ion: ion(args[0])?, gate })
    };
    match name.as_str() {
        "I" => single(SingleGate::I, 1),
        "X" => single(SingleGate::X, 1),
        "Y" => single(SingleGate::Y, 1),
        "Z" => single(SingleGate::Z, 1),
        "H" => single(SingleGate::H, 1),
        "S" => single(SingleGate::S, 1),
        "T" => single(SingleGate::T, 1),
        "R" => {
            want(3)?;
            let gate = SingleGate::R { theta: eval_angle(args[1])?, phi: eval_angle(args[2])? };
            single(gate, 3)
        }
        "RX" | "RY" | "RZ" => {
            want(2)?;
            let a = eval_angle(args[1])?;
            let gate = match name.as_str() {
                "RX" => SingleGate::Rx(a),
                "RY" => SingleGate::Ry(a),
                _ => SingleGate::Rz(a),
            };
            single(gate, 2)
        }
        "C" => {
            want(2)?;
            let k = args[1].parse::<usize>().map_err(|_| format!("bad Clifford index '{}'", args[1]))?;
            single(SingleGate::Clifford(k), 2)
        }
        "MS" => {
            let echo = match args.len() {
                3 => None,
                4 => match args[3].to_ascii_lowercase().as_str() {
                    "echo" => Some(true),
                    "noecho" => Some(false),
                    other => return Err(format!("unknown MS flag '{other}'")),
                },
                n => return Err(format!("MS takes 3 or 4 arguments, got {n}")),
            };
            Ok(Gate::Ms { a: ion(args[0])?, b: ion(args[1])?, theta: eval_angle(args[2])?, echo })
        }
        "CNOT" => {
            want(2)?;
            Ok(Gate::Cnot { control: ion(args[0])?, target: ion(args[1])? })
        }
        "PREP" => want(0).map(|_| Gate::Prep),
        "MEASURE" => want(0).map(|_| Gate::Measure),
        "BARRIER" => want(0).map(|_| Gate::Barrier),
        "" => Err("empty gate".into()),
        other => Err(format!("unknown gate '{other}'")),
    }
}

/// Evaluates an angle expression such as `-3*pi/4` or `pi/2+0.1`.
pub fn eval_angle(s: &str) -> std::result::Result<f64, String> {
    let tokens = tokenize(s)?;
    let mut p = ExprParser { tokens: &tokens, pos: 0 };
    let v = p.sum()?;
    if p.pos != tokens.len() {
        return Err(format!("unexpected trailing input in angle '{s}'"));
    }
    if !v.is_finite() {
        return Err(format!("angle '{s}' is not finite"));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
}

fn tokenize(s: &str) -> std::result::Result<Vec<Tok>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if "+-*/()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| format!("bad number '{text}'"))?));
        } else if ch.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect::<String>().to_ascii_lowercase();
            match word.as_str() {
                "pi" => out.push(Tok::Num(PI)),
                _ => return Err(format!("unknown symbol '{word}'")),
            }
        } else {
            return Err(format!("unexpected character '{ch}'"));
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    tokens: &'a [Tok],
    pos: usize,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn sum(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.product()?;
            v = if op == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> std::result::Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Tok::Op(op @ ('*' | '/'))) => {
                    self.pos += 1;
                    let r = self.unary()?;
                    v = if op == '*' { v * r } else { v / r };
                }
                // implicit product, e.g. `3pi`
                Some(Tok::Num(_)) => v *= self.unary()?,
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Op(op)) => Err(format!("unexpected '{op}'")),
            None => Err("missing value".into()),
        }
    }
}
