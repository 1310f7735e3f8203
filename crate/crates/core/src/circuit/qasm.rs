//! OpenQASM 2.0 (u3/cx subset) and JSON mirrors of a circuit.

use super::{Circuit, Gate, GateKind, Provenance};
use crate::error::{bail, Error, Result};
use crate::linalg::{CMat, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// `%.12g`: twelve significant digits, trailing zeros removed.
pub fn format_angle(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mant.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".to_string() } else { t.to_string() }
}

fn u3_of(g: &Gate) -> Option<[f64; 3]> {
    Some(match g.kind {
        GateKind::U3(a, b, c) => [a, b, c],
        GateKind::Rx(t) => [t, -FRAC_PI_2, FRAC_PI_2],
        GateKind::Ry(t) => [t, 0.0, 0.0],
        GateKind::Rz(t) => [0.0, 0.0, t],
        _ => return None,
    })
}

/// Deterministic OpenQASM 2.0 text. RX/RY/RZ are written as u3 (RZ up to
/// global phase); opaque blocks cannot be exported.
pub fn to_qasm(c: &Circuit) -> Result<String> {
    let mut out = String::new();
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    out.push_str(&format!("// provenance: {}\n", c.provenance.label()));
    out.push_str(&format!("qreg q[{}];\n", c.n));
    for g in &c.gates {
        if let GateKind::Cnot = g.kind {
            out.push_str(&format!("cx q[{}],q[{}];\n", g.wires[0], g.wires[1]));
        } else if let Some([a, b, l]) = u3_of(g) {
            out.push_str(&format!("u3({},{},{}) q[{}];\n", format_angle(a), format_angle(b), format_angle(l), g.wires[0]));
        } else {
            bail!(Validation, "opaque {}-qubit block has no u3/cx form; decompose it first", g.wires.len());
        }
    }
    Ok(out)
}

/// Parses the subset written by [`to_qasm`], plus rx/ry/rz/u and simple
/// `pi` expressions.
pub fn from_qasm(text: &str) -> Result<Circuit> {
    let mut provenance = Provenance::Mpd;
    let mut body = String::new();
    for line in text.lines() {
        let (code, comment) = match line.find("//") {
            Some(i) => (&line[..i], Some(&line[i + 2..])),
            None => (line, None),
        };
        if let Some(p) = comment.and_then(|c| c.trim().strip_prefix("provenance:")) {
            provenance = Provenance::parse(p.trim()).ok_or_else(|| Error::Format(format!("unknown provenance {p:?}")))?;
        }
        body.push_str(code);
        body.push('\n');
    }
    let mut circuit: Option<Circuit> = None;
    for stmt in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        if stmt.starts_with("OPENQASM") || stmt.starts_with("include") {
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qreg") {
            let n = parse_index(rest)?;
            if circuit.is_some() {
                bail!(Format, "only one qreg is supported");
            }
            circuit = Some(Circuit::new(n, provenance));
            continue;
        }
        let c = circuit.as_mut().ok_or_else(|| Error::Format("gate before qreg".into()))?;
        let (head, args) = split_head(stmt)?;
        let (name, params) = match head.find('(') {
            Some(i) => {
                let inner = head[i + 1..].strip_suffix(')').ok_or_else(|| Error::Format(format!("bad parameters in {stmt:?}")))?;
                let ps: Result<Vec<f64>> = inner.split(',').map(eval_angle).collect();
                (head[..i].trim(), ps?)
            }
            None => (head.trim(), vec![]),
        };
        let wires: Result<Vec<usize>> = args.split(',').map(parse_index).collect();
        let wires = wires?;
        let gate = match (name, params.as_slice(), wires.as_slice()) {
            ("u3" | "u" | "U", [a, b, l], [w]) => Gate::u3(*w, *a, *b, *l),
            ("rx", [t], [w]) => Gate::rx(*w, *t),
            ("ry", [t], [w]) => Gate::ry(*w, *t),
            ("rz", [t], [w]) => Gate::rz(*w, *t),
            ("cx" | "CX", [], [a, b]) => Gate::cnot(*a, *b),
            _ => bail!(Format, "unsupported statement {stmt:?}"),
        };
        c.push(gate).map_err(|e| Error::Format(e.to_string()))?;
    }
    circuit.ok_or_else(|| Error::Format("missing qreg".into()))
}

fn split_head(stmt: &str) -> Result<(&str, &str)> {
    // the argument list starts after the parameter list, if any
    let start = stmt.find(')').map_or(0, |i| i + 1);
    let sp = stmt[start..].find(char::is_whitespace).map(|i| i + start).ok_or_else(|| Error::Format(format!("bad statement {stmt:?}")))?;
    Ok((&stmt[..sp], stmt[sp..].trim()))
}

fn parse_index(s: &str) -> Result<usize> {
    let s = s.trim();
    let open = s.find('[').ok_or_else(|| Error::Format(format!("expected q[i], got {s:?}")))?;
    let close = s.find(']').ok_or_else(|| Error::Format(format!("expected q[i], got {s:?}")))?;
    s[open + 1..close].trim().parse().map_err(|_| Error::Format(format!("bad index in {s:?}")))
}

/// Products and quotients of numbers and `pi`, with a leading sign.
fn eval_angle(s: &str) -> Result<f64> {
    let s = s.trim();
    let (sign, s) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r.trim()),
        None => (1.0, s.strip_prefix('+').unwrap_or(s).trim()),
    };
    let mut value = 1.0;
    let mut op = '*';
    let mut token = String::new();
    let apply = |tok: &str, op: char, value: &mut f64| -> Result<()> {
        let x = if tok == "pi" { PI } else { tok.parse::<f64>().map_err(|_| Error::Format(format!("bad angle {s:?}")))? };
        if op == '*' {
            *value *= x;
        } else {
            *value /= x;
        }
        Ok(())
    };
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let exponent_sign = (ch == '-' || ch == '+') && i > 0 && matches!(chars[i - 1], 'e' | 'E');
        if (ch == '*' || ch == '/') && !token.is_empty() {
            apply(token.trim(), op, &mut value)?;
            token.clear();
            op = ch;
        } else if !ch.is_whitespace() || exponent_sign {
            token.push(ch);
        }
        i += 1;
    }
    if token.is_empty() {
        bail!(Format, "empty angle");
    }
    apply(token.trim(), op, &mut value)?;
    Ok(sign * value)
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    n: usize,
    provenance: Provenance,
    global_phase: f64,
    gates: Vec<GateRecord>,
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    gate: String,
    wires: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
    /// Row-major [re, im] pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modeled_cost: Option<u64>,
}

pub(crate) fn matrix_pairs(m: &CMat) -> Vec<[f64; 2]> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| [m[(i, j)].re, m[(i, j)].im]).collect()
}

pub(crate) fn matrix_from_pairs(p: &[[f64; 2]]) -> Result<CMat> {
    let d = (p.len() as f64).sqrt().round() as usize;
    if d * d != p.len() {
        bail!(Format, "matrix with {} entries is not square", p.len());
    }
    Ok(CMat::from_fn(d, d, |i, j| C64::new(p[i * d + j][0], p[i * d + j][1])))
}

/// JSON mirror of the gate list; floats round-trip exactly.
pub fn to_json(c: &Circuit) -> String {
    let gates = c
        .gates
        .iter()
        .map(|g| {
            let (name, matrix, cost) = match &g.kind {
                GateKind::Rx(_) => ("rx", None, None),
                GateKind::Ry(_) => ("ry", None, None),
                GateKind::Rz(_) => ("rz", None, None),
                GateKind::U3(..) => ("u3", None, None),
                GateKind::Cnot => ("cx", None, None),
                GateKind::Opaque2Q(m) => ("opaque2q", Some(matrix_pairs(m)), None),
                GateKind::OpaqueKQ { matrix, modeled_cost } => ("opaquekq", Some(matrix_pairs(matrix)), Some(*modeled_cost)),
            };
            GateRecord { gate: name.into(), wires: g.wires.clone(), params: g.params(), matrix, modeled_cost: cost }
        })
        .collect();
    let rec = CircuitRecord { n: c.n, provenance: c.provenance, global_phase: c.global_phase, gates };
    serde_json::to_string_pretty(&rec).expect("circuit record serialises")
}

pub fn from_json(text: &str) -> Result<Circuit> {
    let rec: CircuitRecord = serde_json::from_str(text)?;
    let mut c = Circuit::new(rec.n, rec.provenance);
    c.global_phase = rec.global_phase;
    for g in rec.gates {
        let p = |k: usize| -> Result<&[f64]> {
            if g.params.len() != k {
                bail!(Format, "{} expects {k} parameters", g.gate);
            }
            Ok(&g.params)
        };
        let kind = match g.gate.as_str() {
            "rx" => GateKind::Rx(p(1)?[0]),
            "ry" => GateKind::Ry(p(1)?[0]),
            "rz" => GateKind::Rz(p(1)?[0]),
            "u3" => {
                let v = p(3)?;
                GateKind::U3(v[0], v[1], v[2])
            }
            "cx" => GateKind::Cnot,
            "opaque2q" | "opaquekq" => {
                let m = matrix_from_pairs(g.matrix.as_deref().ok_or_else(|| Error::Format("opaque gate without matrix".into()))?)?;
                if g.gate == "opaque2q" {
                    GateKind::Opaque2Q(m)
                } else {
                    GateKind::OpaqueKQ { matrix: m, modeled_cost: g.modeled_cost.unwrap_or_default() }
                }
            }
            other => bail!(Format, "unknown gate {other:?}"),
        };
        c.push(Gate { kind, wires: g.wires }).map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(c)
}
