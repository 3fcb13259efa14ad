//! Gate matrices, their continuous-time generators, and the encoding circuits.
//!
//! Every gate is defined by an exponential form `G = exp(-i H tau)`; the
//! matrices below are the closed forms of those exponentials (global phases
//! included), and the generators are the corresponding Hermitian `H` for a
//! gate applied over a duration `tau` (with hbar = 1).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor_core::{embed, expm_hermitian, hermiticity_defect, ComplexMatrix, ONE, ZERO};

pub const UNITARY_TOL: f64 = 1e-12;
pub const GENERATOR_HERMITIAN_TOL: f64 = 1e-12;

/// Gate duration of every gate except the parametrized SWAP.
pub const GATE_TIME: f64 = 1.0;
/// Duration of one parametrized SWAP, chosen so both encoders last 8 gate times.
pub const PSWAP_TIME: f64 = 4.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

fn xx() -> ComplexMatrix {
    pauli_x().kronecker(&pauli_x())
}

/// `XX(phi) = exp[(i phi / 2) X (x) X]`.
pub fn xx_gate(phi: f64) -> ComplexMatrix {
    identity(4) * re((phi / 2.0).cos()) + xx() * (I * (phi / 2.0).sin())
}

/// `R_Z(phi) = exp[(i phi / 2) Z] = diag(e^{i phi/2}, e^{-i phi/2})`.
pub fn rz_gate(phi: f64) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[Complex64::from_polar(1.0, phi / 2.0), ZERO, ZERO, Complex64::from_polar(1.0, -phi / 2.0)],
    )
}

/// `CNOT = exp[(i pi / 4)(1 - Z) (x) (1 - X)]`, control on the first qubit.
/// The exponent is `i pi |1><1| (x) |-><-|`, so the closed form carries no global phase.
pub fn cnot_gate() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        4,
        4,
        &[
            ONE, ZERO, ZERO, ZERO, //
            ZERO, ONE, ZERO, ZERO, //
            ZERO, ZERO, ZERO, ONE, //
            ZERO, ZERO, ONE, ZERO,
        ],
    )
}

/// `HAD = exp[(i pi / (2 sqrt 2))(X + Z)] = i (X + Z) / sqrt 2`.
pub fn hadamard_gate() -> ComplexMatrix {
    (pauli_x() + pauli_z()) * (I / SQRT_2)
}

pub fn swap_gate() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        4,
        4,
        &[
            ONE, ZERO, ZERO, ZERO, //
            ZERO, ZERO, ONE, ZERO, //
            ZERO, ONE, ZERO, ZERO, //
            ZERO, ZERO, ZERO, ONE,
        ],
    )
}

/// Projector onto the singlet `(|01> - |10>)/sqrt 2`.
fn singlet_projector() -> ComplexMatrix {
    let h = re(0.5);
    ComplexMatrix::from_row_slice(
        4,
        4,
        &[
            ZERO, ZERO, ZERO, ZERO, //
            ZERO, h, -h, ZERO, //
            ZERO, -h, h, ZERO, //
            ZERO, ZERO, ZERO, ZERO,
        ],
    )
}

/// The principal logarithm of SWAP, `(i pi / 2) [[0,0,0,0],[0,1,-1,0],[0,-1,1,0],[0,0,0,0]]`.
pub fn ln_swap() -> ComplexMatrix {
    singlet_projector() * (I * PI)
}

/// `exp[exponent * lnSWAP]` for `exponent = sign * alpha`.
fn pswap_from_exponent(exponent: f64) -> ComplexMatrix {
    identity(4) + singlet_projector() * (Complex64::from_polar(1.0, PI * exponent) - ONE)
}

/// `exp[sign * alpha * lnSWAP]`, a partial exchange of two qubits.
pub fn param_swap(alpha: f64, sign: f64) -> Result<ComplexMatrix> {
    check_alpha(alpha)?;
    check_sign(sign)?;
    Ok(pswap_from_exponent(sign * alpha))
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn check_sign(sign: f64) -> Result<()> {
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::OutOfRange(format!("sign = {sign} must be +1 or -1")));
    }
    Ok(())
}

pub fn xx_generator(phi: f64, tau: f64) -> ComplexMatrix {
    xx() * re(-phi / (2.0 * tau))
}

/// For `R_Z(pi/2)` over `tau` this is `-(pi / 4 tau) Z`.
pub fn rz_generator(phi: f64, tau: f64) -> ComplexMatrix {
    pauli_z() * re(-phi / (2.0 * tau))
}

pub fn cnot_generator(tau: f64) -> ComplexMatrix {
    let a = identity(2) - pauli_z();
    let b = identity(2) - pauli_x();
    a.kronecker(&b) * re(-FRAC_PI_4 / tau)
}

pub fn hadamard_generator(tau: f64) -> ComplexMatrix {
    (pauli_x() + pauli_z()) * re(-PI / (2.0 * SQRT_2 * tau))
}

/// Generator `H = i * exponent * lnSWAP / tau`.
pub fn param_swap_generator(exponent: f64, tau: f64) -> ComplexMatrix {
    singlet_projector() * re(-PI * exponent / tau)
}

pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let id = identity(u.nrows());
    prod.iter().zip(id.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Gate families used in schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Xx,
    Rz,
    Cnot,
    Had,
    /// Parametrized SWAP; the parameter is the exponent `sign * alpha`.
    ParamSwap,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rz | GateKind::Had => 1,
            GateKind::Xx | GateKind::Cnot | GateKind::ParamSwap => 2,
        }
    }

    pub fn takes_param(self) -> bool {
        !matches!(self, GateKind::Cnot | GateKind::Had)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Xx => "XX",
            GateKind::Rz => "RZ",
            GateKind::Cnot => "CNOT",
            GateKind::Had => "HAD",
            GateKind::ParamSwap => "PSWAP",
        }
    }

    pub fn matrix(self, param: f64) -> ComplexMatrix {
        match self {
            GateKind::Xx => xx_gate(param),
            GateKind::Rz => rz_gate(param),
            GateKind::Cnot => cnot_gate(),
            GateKind::Had => hadamard_gate(),
            GateKind::ParamSwap => pswap_from_exponent(param),
        }
    }

    pub fn generator(self, param: f64, tau: f64) -> ComplexMatrix {
        match self {
            GateKind::Xx => xx_generator(param, tau),
            GateKind::Rz => rz_generator(param, tau),
            GateKind::Cnot => cnot_generator(tau),
            GateKind::Had => hadamard_generator(tau),
            GateKind::ParamSwap => param_swap_generator(param, tau),
        }
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "XX" => Ok(GateKind::Xx),
            "RZ" => Ok(GateKind::Rz),
            "CNOT" => Ok(GateKind::Cnot),
            "HAD" | "H" => Ok(GateKind::Had),
            "PSWAP" | "LNSWAP" => Ok(GateKind::ParamSwap),
            other => Err(format!("unknown gate '{other}'")),
        }
    }
}

/// A Hermitian generator applied to `sites` during `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSegment {
    pub label: String,
    pub generator: ComplexMatrix,
    pub sites: Vec<usize>,
    pub start: f64,
    pub duration: f64,
}

impl GateSegment {
    pub fn new(
        label: impl Into<String>,
        generator: ComplexMatrix,
        sites: Vec<usize>,
        start: f64,
        duration: f64,
    ) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() || !start.is_finite() {
            return Err(Error::OutOfRange(format!(
                "segment window start {start}, duration {duration} is invalid"
            )));
        }
        if generator.nrows() != 1 << sites.len() || generator.ncols() != generator.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{} for {} sites",
                generator.nrows(),
                generator.ncols(),
                sites.len()
            )));
        }
        let herm = hermiticity_defect(&generator);
        if herm > GENERATOR_HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        Ok(Self { label: label.into(), generator, sites, start, duration })
    }

    /// A segment of a known gate family, with the analytic generator.
    pub fn from_kind(
        kind: GateKind,
        param: f64,
        sites: Vec<usize>,
        start: f64,
        duration: f64,
    ) -> Result<Self> {
        if sites.len() != kind.arity() {
            return Err(Error::InvalidSites(format!(
                "{} acts on {} qubits, got {:?}",
                kind.name(),
                kind.arity(),
                sites
            )));
        }
        let label = if kind.takes_param() {
            format!("{}({param:.6})", kind.name())
        } else {
            kind.name().to_string()
        };
        Self::new(label, kind.generator(param, duration), sites, start, duration)
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// `exp(-i H duration)`.
    pub fn total_unitary(&self) -> ComplexMatrix {
        expm_hermitian(&self.generator, self.duration).expect("generator checked Hermitian")
    }

    /// `exp(-i H dt)`.
    pub fn step_unitary(&self, dt: f64) -> ComplexMatrix {
        expm_hermitian(&self.generator, dt).expect("generator checked Hermitian")
    }
}

/// Turns a unitary gate into a continuous segment, `H = (i / tau) log(gate)`
/// with the principal logarithm.
pub fn segmentize(gate: &ComplexMatrix, sites: &[usize], start: f64, tau: f64) -> Result<GateSegment> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange(format!("tau = {tau} must be positive")));
    }
    let defect = unitarity_defect(gate);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let generator = principal_generator(gate, tau)?;
    GateSegment::new("segment", generator, sites.to_vec(), start, tau)
}

/// Hermitian `H` with `exp(-i H tau) = u` for unitary `u`.
///
/// A unitary is normal, so its eigenvectors diagonalize the Hermitian pencil
/// `Re(u) + c Im(u)`. An irrational weight `c` keeps distinct eigenphases from
/// colliding; the reconstruction is verified and other weights are tried if it fails.
fn principal_generator(u: &ComplexMatrix, tau: f64) -> Result<ComplexMatrix> {
    let herm_part = (u + u.adjoint()) * re(0.5);
    let anti_part = (u - u.adjoint()) * (-I * 0.5);
    for weight in [0.577_215_664_901_532_9, 1.414_213_562_373_095_1, 2.718_281_828_459_045] {
        let pencil = &herm_part + &anti_part * re(weight);
        let eig = pencil.symmetric_eigen();
        let v = eig.eigenvectors;
        let d = u.nrows();
        let mut h = ComplexMatrix::zeros(d, d);
        for k in 0..d {
            let col = v.column(k);
            let lambda = (col.adjoint() * u * col)[(0, 0)];
            // u = e^{i theta}, so H contributes -theta / tau on this eigenvector.
            let theta = lambda.arg();
            h += (col * col.adjoint()) * re(-theta / tau);
        }
        let h = (&h + h.adjoint()) * re(0.5);
        let rebuilt = expm_hermitian(&h, tau)?;
        if crate::tensor_core::max_abs_diff(&rebuilt, u) < 1e-10 {
            return Ok(h);
        }
    }
    Err(Error::NotUnitary(unitarity_defect(u)))
}

/// Which three-qubit encoder the protocol uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EncodingKind {
    Scrambling,
    Swap,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 2] = [EncodingKind::Scrambling, EncodingKind::Swap];

    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::Scrambling => "scrambling",
            EncodingKind::Swap => "swap",
        }
    }

    /// The checked-in transcription of this encoder's gate window.
    pub fn default_template(self) -> &'static ScheduleTemplate {
        use std::sync::OnceLock;
        static SCRAMBLING: OnceLock<ScheduleTemplate> = OnceLock::new();
        static SWAP: OnceLock<ScheduleTemplate> = OnceLock::new();
        match self {
            EncodingKind::Scrambling => SCRAMBLING.get_or_init(|| {
                ScheduleTemplate::parse(include_str!("../schedules/scrambling.sched"))
                    .expect("bundled scrambling schedule parses")
            }),
            EncodingKind::Swap => SWAP.get_or_init(|| {
                ScheduleTemplate::parse(include_str!("../schedules/swap.sched"))
                    .expect("bundled swap schedule parses")
            }),
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scrambling" | "scr" => Ok(EncodingKind::Scrambling),
            "swap" => Ok(EncodingKind::Swap),
            other => Err(format!("unknown protocol '{other}' (expected scrambling or swap)")),
        }
    }
}

/// `constant + slope * alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearExpr {
    pub constant: f64,
    pub slope: f64,
}

impl LinearExpr {
    pub fn eval(&self, alpha: f64) -> f64 {
        self.constant + self.slope * alpha
    }

    /// Parses sums of products/quotients of numbers, `pi` and at most one `alpha`
    /// per term, e.g. `-alpha*pi/2`, `pi/2`, `0.5*alpha + 1`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let tokens = tokenize(text)?;
        if tokens.is_empty() {
            return Err("empty expression".into());
        }
        let mut expr = LinearExpr { constant: 0.0, slope: 0.0 };
        let mut pos = 0;
        let mut first = true;
        while pos < tokens.len() {
            let mut sign = 1.0;
            match tokens[pos] {
                Token::Plus => pos += 1,
                Token::Minus => {
                    sign = -1.0;
                    pos += 1;
                }
                _ if first => {}
                _ => return Err(format!("expected '+' or '-' in '{text}'")),
            }
            first = false;
            let (coef, alpha_power, next) = parse_term(&tokens, pos, text)?;
            pos = next;
            if alpha_power == 0 {
                expr.constant += sign * coef;
            } else {
                expr.slope += sign * coef;
            }
        }
        Ok(expr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(f64),
    Pi,
    Alpha,
    Plus,
    Minus,
    Star,
    Slash,
}

fn tokenize(text: &str) -> std::result::Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            'π' => {
                tokens.push(Token::Pi);
                i += 1;
            }
            'α' => {
                tokens.push(Token::Alpha);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '-' || chars[i] == '+')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let value = lit.parse::<f64>().map_err(|_| format!("bad number '{lit}'"))?;
                tokens.push(Token::Num(value));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.to_ascii_lowercase().as_str() {
                    "pi" => tokens.push(Token::Pi),
                    "alpha" | "a" => tokens.push(Token::Alpha),
                    _ => return Err(format!("unknown symbol '{word}'")),
                }
            }
            other => return Err(format!("unexpected character '{other}'")),
        }
    }
    Ok(tokens)
}

fn parse_term(
    tokens: &[Token],
    mut pos: usize,
    text: &str,
) -> std::result::Result<(f64, u32, usize), String> {
    let mut coef = 1.0;
    let mut alpha_power = 0;
    let mut divide = false;
    let mut expect_factor = true;
    while pos < tokens.len() {
        let tok = tokens[pos];
        if expect_factor {
            let value = match tok {
                Token::Num(v) => v,
                Token::Pi => PI,
                Token::Alpha => {
                    if divide {
                        return Err(format!("division by alpha in '{text}'"));
                    }
                    alpha_power += 1;
                    if alpha_power > 1 {
                        return Err(format!("'{text}' is not linear in alpha"));
                    }
                    1.0
                }
                _ => return Err(format!("expected a number, pi or alpha in '{text}'")),
            };
            if divide {
                if value == 0.0 {
                    return Err(format!("division by zero in '{text}'"));
                }
                coef /= value;
            } else {
                coef *= value;
            }
            expect_factor = false;
            pos += 1;
        } else {
            match tok {
                Token::Star => divide = false,
                Token::Slash => divide = true,
                Token::Plus | Token::Minus => break,
                Token::Pi | Token::Alpha => {
                    // Juxtaposition such as `2pi` or `απ` multiplies.
                    divide = false;
                    expect_factor = true;
                    continue;
                }
                _ => return Err(format!("missing operator in '{text}'")),
            }
            expect_factor = true;
            pos += 1;
        }
    }
    if expect_factor {
        return Err(format!("dangling operator in '{text}'"));
    }
    Ok((coef, alpha_power, pos))
}

/// One `GATE` line of a transcription file.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateEntry {
    pub line: usize,
    pub kind: GateKind,
    pub sites: Vec<usize>,
    pub start: f64,
    pub duration: f64,
    pub param: LinearExpr,
}

/// A gate window transcribed as
/// `GATE <name> SITES <i[,j]> START <t> DUR <tau> PARAM <expr(alpha)>`, one gate per line.
/// `#` starts a comment; `PARAM` may be omitted for `CNOT` and `HAD`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleTemplate {
    pub entries: Vec<TemplateEntry>,
}

impl ScheduleTemplate {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            entries.push(parse_entry(content, line)?);
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn instantiate(&self, alpha: f64) -> Result<Vec<GateSegment>> {
        check_alpha(alpha)?;
        self.entries
            .iter()
            .map(|e| {
                let param = e.param.eval(alpha);
                if e.kind == GateKind::ParamSwap && param.abs() > 1.0 + 1e-12 {
                    return Err(Error::ScheduleParse {
                        line: e.line,
                        message: format!("PSWAP exponent {param} outside [-1, 1]"),
                    });
                }
                GateSegment::from_kind(e.kind, param, e.sites.clone(), e.start, e.duration)
            })
            .collect()
    }
}

fn parse_entry(content: &str, line: usize) -> Result<TemplateEntry> {
    let err = |message: String| Error::ScheduleParse { line, message };
    let words: Vec<&str> = content.split_whitespace().collect();
    let mut fields: std::collections::HashMap<&str, String> = std::collections::HashMap::new();
    let mut i = 0;
    while i < words.len() {
        let key = words[i];
        if !matches!(key, "GATE" | "SITES" | "START" | "DUR" | "PARAM") {
            return Err(err(format!("unexpected token '{key}'")));
        }
        // PARAM takes the rest of the line so expressions may contain spaces.
        let value = if key == "PARAM" {
            let rest = words[i + 1..].join(" ");
            i = words.len();
            rest
        } else {
            let v = words.get(i + 1).ok_or_else(|| err(format!("{key} needs a value")))?;
            i += 2;
            v.to_string()
        };
        if value.is_empty() {
            return Err(err(format!("{key} needs a value")));
        }
        if fields.insert(key, value).is_some() {
            return Err(err(format!("duplicate field {key}")));
        }
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| err(format!("missing {k}")));
    let kind: GateKind = get("GATE")?.parse().map_err(err)?;
    let sites: Vec<usize> = get("SITES")?
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| err(format!("bad site '{s}'"))))
        .collect::<Result<_>>()?;
    if sites.len() != kind.arity() {
        return Err(err(format!("{} needs {} sites, got {}", kind.name(), kind.arity(), sites.len())));
    }
    if sites.iter().any(|&q| q == 0 || q > crate::protocol::NUM_QUBITS)
        || (sites.len() == 2 && sites[0] == sites[1])
    {
        return Err(err(format!("sites {sites:?} must be distinct qubits in 1..=7")));
    }
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse::<f64>().map_err(|_| err(format!("{k} is not a number")))
    };
    let start = num("START")?;
    let duration = num("DUR")?;
    if !(duration > 0.0) || start < 0.0 {
        return Err(err("START must be >= 0 and DUR > 0".into()));
    }
    let param = match fields.get("PARAM") {
        Some(p) if p != "-" => LinearExpr::parse(p).map_err(err)?,
        _ if kind.takes_param() => return Err(err(format!("{} needs PARAM", kind.name()))),
        _ => LinearExpr { constant: 0.0, slope: 0.0 },
    };
    Ok(TemplateEntry { line, kind, sites, start, duration, param })
}

/// Encoder (qubits 1-3) and decoder (qubits 4-6) segments of one encoding window.
#[derive(Debug, Clone)]
pub struct EncodingCircuit {
    pub kind: EncodingKind,
    pub alpha: f64,
    pub encoder: Vec<GateSegment>,
    pub decoder: Vec<GateSegment>,
}

impl EncodingCircuit {
    pub fn from_template(kind: EncodingKind, alpha: f64, template: &ScheduleTemplate) -> Result<Self> {
        let segments = template.instantiate(alpha)?;
        let (mut encoder, mut decoder): (Vec<_>, Vec<_>) =
            segments.into_iter().partition(|s| s.sites.iter().all(|&q| q <= 3));
        if decoder.iter().any(|s| s.sites.iter().any(|&q| !(4..=6).contains(&q))) {
            return Err(Error::InvalidSchedule(
                "encoding window gates must act within qubits 1-3 or within 4-6".into(),
            ));
        }
        encoder.sort_by(|a, b| a.start.total_cmp(&b.start));
        decoder.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self { kind, alpha, encoder, decoder })
    }

    /// Net encoder unitary on qubits (1, 2, 3).
    pub fn encoder_unitary(&self) -> ComplexMatrix {
        compose(&self.encoder, |q| q)
    }

    /// Net decoder unitary in mirrored order: qubits (6, 5, 4) play the roles of (1, 2, 3).
    pub fn decoder_unitary(&self) -> ComplexMatrix {
        compose(&self.decoder, |q| 7 - q)
    }
}

fn compose(segments: &[GateSegment], role: impl Fn(usize) -> usize) -> ComplexMatrix {
    let mut u = identity(8);
    for seg in segments {
        let sites: Vec<usize> = seg.sites.iter().map(|&q| role(q)).collect();
        let full = embed(&seg.total_unitary(), &sites, 3).expect("segment sites lie in 1..=3");
        u = full * u;
    }
    u
}

pub fn encoding_circuit(kind: EncodingKind, alpha: f64) -> Result<EncodingCircuit> {
    EncodingCircuit::from_template(kind, alpha, kind.default_template())
}

/// `U_scr(alpha)` on qubits 1-3 and its conjugate, as realized by the decoder.
pub fn scrambling_unitary(alpha: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let circuit = encoding_circuit(EncodingKind::Scrambling, alpha)?;
    Ok((circuit.encoder_unitary(), circuit.decoder_unitary()))
}

/// Encoder and decoder sequences of two parametrized SWAPs each.
pub fn swap_unitary(alpha: f64) -> Result<EncodingCircuit> {
    encoding_circuit(EncodingKind::Swap, alpha)
}

/// Angle of the Bell-pair creation gates.
pub const BELL_ANGLE: f64 = FRAC_PI_2;
