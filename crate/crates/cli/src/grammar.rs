//! Text format for circuits.
//!
//! ```text
//! # teleport one qubit
//! qubits 3
//! cbits 2
//! gate H 1
//! gate CNOT 1 2
//! bell 0 1 -> 0 1
//! cif c0 gate X 2
//! cif c1 gate Z 2
//! ```
//!
//! Statements: `gate NAME q...`, `gate matrix [[a, b], [c, d]] q...`, `measure q -> c`,
//! `bell q1 q2 -> cx cz`, `cif EXPR gate ...`, `reset q`. `qubits N` must come first;
//! `cbits M` is optional and defaults to 0. Conditions use bits `c0, c1, …`, the
//! constants `0` and `1`, `!`, `==`, `&` and `|` (tightest first) and parentheses.
//! Matrix entries are complex literals such as `1`, `-0.5i` or `0.5-0.5i`.
//!
//! [`render`] writes the canonical form: no comments, single spaces, `cbits` always
//! present, library gates by name, other gates as matrices with every entry written
//! `re±imi`.

use std::fmt;

use num_complex::Complex64;
use teleportal::linalg::{self, Matrix};
use teleportal::statevector::{Condition, Op};
use teleportal::{Circuit, GateUnitary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = std::result::Result<T, ParseError>;

/// A whitespace-delimited word and its 1-based column.
#[derive(Debug, Clone, Copy)]
struct Word<'a> {
    col: usize,
    text: &'a str,
}

fn words(line: &str, offset: usize) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Word { col: offset + s + 1, text: &line[s..i] });
                start = None;
            }
            _ => {}
        }
    }
    out
}

struct LineCtx {
    line: usize,
    n_qubits: usize,
    n_cbits: usize,
}

impl LineCtx {
    fn err(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column, message: message.into() }
    }

    fn index(&self, w: Word<'_>, what: &str) -> PResult<usize> {
        w.text.parse().map_err(|_| self.err(w.col, format!("expected a {what} index, found {:?}", w.text)))
    }

    fn qubit(&self, w: Word<'_>) -> PResult<usize> {
        let q = self.index(w, "qubit")?;
        if q >= self.n_qubits {
            return Err(self.err(w.col, format!("qubit {q} out of range for {} qubits", self.n_qubits)));
        }
        Ok(q)
    }

    fn cbit(&self, w: Word<'_>) -> PResult<usize> {
        let c = self.index(w, "classical bit")?;
        if c >= self.n_cbits {
            return Err(self.err(w.col, format!("classical bit {c} out of range for {} bits", self.n_cbits)));
        }
        Ok(c)
    }

    fn arrow(&self, w: Option<Word<'_>>, after: usize) -> PResult<()> {
        match w {
            Some(w) if w.text == "->" => Ok(()),
            Some(w) => Err(self.err(w.col, format!("expected '->', found {:?}", w.text))),
            None => Err(self.err(after, "expected '->'")),
        }
    }

    fn exact(&self, ws: &[Word<'_>], n: usize, usage: &str) -> PResult<()> {
        if ws.len() != n {
            let col = ws.get(n).or(ws.last()).map_or(1, |w| w.col);
            return Err(self.err(col, format!("expected `{usage}`")));
        }
        Ok(())
    }
}

pub fn parse_circuit(text: &str) -> PResult<Circuit> {
    let mut header: Option<LineCtx> = None;
    let mut circuit: Option<Circuit> = None;
    let mut saw_op = false;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let ws = words(content, 0);
        let Some(first) = ws.first().copied() else { continue };
        let ctx_err = |col: usize, msg: String| ParseError { line: line_no, column: col, message: msg };
        match first.text {
            "qubits" => {
                if header.is_some() {
                    return Err(ctx_err(first.col, "duplicate `qubits` header".into()));
                }
                let probe = LineCtx { line: line_no, n_qubits: 0, n_cbits: 0 };
                probe.exact(&ws, 2, "qubits N")?;
                let n = probe.index(ws[1], "qubit count")?;
                if n == 0 {
                    return Err(ctx_err(ws[1].col, "a circuit needs at least one qubit".into()));
                }
                header = Some(LineCtx { line: line_no, n_qubits: n, n_cbits: 0 });
            }
            "cbits" => {
                let Some(h) = header.as_mut() else {
                    return Err(ctx_err(first.col, "`qubits N` must come first".into()));
                };
                if saw_op || h.n_cbits > 0 || circuit.is_some() {
                    return Err(ctx_err(first.col, "`cbits` must follow `qubits` directly".into()));
                }
                h.line = line_no;
                h.exact(&ws, 2, "cbits M")?;
                h.n_cbits = h.index(ws[1], "bit count")?;
            }
            _ => {
                let Some(h) = header.as_mut() else {
                    return Err(ctx_err(first.col, "`qubits N` must come first".into()));
                };
                h.line = line_no;
                let circ = circuit.get_or_insert_with(|| Circuit::new(h.n_qubits, h.n_cbits));
                saw_op = true;
                let op = parse_op(h, content, &ws)?;
                circ.push(op).map_err(|e| h.err(first.col, e.to_string()))?;
            }
        }
    }
    let Some(h) = header else {
        return Err(ParseError { line: last_line.max(1), column: 1, message: "missing `qubits N` header".into() });
    };
    Ok(circuit.unwrap_or_else(|| Circuit::new(h.n_qubits, h.n_cbits)))
}

fn parse_op(h: &LineCtx, content: &str, ws: &[Word<'_>]) -> PResult<Op> {
    let first = ws[0];
    match first.text {
        "gate" => {
            let (gate, targets) = parse_gate(h, content, &ws[1..], first.col + first.text.len())?;
            Ok(Op::Gate { gate, targets })
        }
        "measure" => {
            h.exact(ws, 4, "measure q -> c")?;
            let qubit = h.qubit(ws[1])?;
            h.arrow(ws.get(2).copied(), ws[1].col)?;
            Ok(Op::Measure { qubit, cbit: h.cbit(ws[3])? })
        }
        "bell" => {
            h.exact(ws, 6, "bell q1 q2 -> cx cz")?;
            let (q1, q2) = (h.qubit(ws[1])?, h.qubit(ws[2])?);
            h.arrow(ws.get(3).copied(), ws[2].col)?;
            Ok(Op::Bell { q1, q2, cx: h.cbit(ws[4])?, cz: h.cbit(ws[5])? })
        }
        "reset" => {
            h.exact(ws, 2, "reset q")?;
            Ok(Op::Reset { qubit: h.qubit(ws[1])? })
        }
        "cif" => {
            let Some(pos) = ws.iter().position(|w| w.text == "gate") else {
                return Err(h.err(first.col, "expected `cif EXPR gate ...`"));
            };
            let start = first.col + first.text.len() - 1;
            let end = ws[pos].col - 1;
            let cond = parse_condition(h, &content[start..end], start)?;
            if let Some(b) = cond.max_bit() {
                if b >= h.n_cbits {
                    return Err(h.err(first.col + 4, format!("classical bit {b} out of range for {} bits", h.n_cbits)));
                }
            }
            let g = ws[pos];
            let (gate, targets) = parse_gate(h, content, &ws[pos + 1..], g.col + g.text.len())?;
            Ok(Op::CondGate { cond, gate, targets })
        }
        other => Err(h.err(first.col, format!("unknown statement {other:?}"))),
    }
}

/// `NAME q...` or `matrix [...] q...`; `after` is the column just past `gate`.
fn parse_gate(h: &LineCtx, content: &str, ws: &[Word<'_>], after: usize) -> PResult<(GateUnitary, Vec<usize>)> {
    let Some(name) = ws.first().copied() else {
        return Err(h.err(after, "expected a gate name"));
    };
    let (gate, rest) = if name.text == "matrix" {
        let open = content[name.col - 1..].find('[').map(|i| i + name.col - 1);
        let Some(open) = open else {
            return Err(h.err(name.col, "expected a matrix literal"));
        };
        let (m, close) = parse_matrix(h, content, open)?;
        let gate = GateUnitary::new(m, None).map_err(|e| h.err(open + 1, e.to_string()))?;
        let rest: Vec<Word<'_>> = ws.iter().copied().filter(|w| w.col > close).collect();
        (gate, rest)
    } else {
        let gate = GateUnitary::named(name.text).map_err(|e| h.err(name.col, e.to_string()))?;
        (gate, ws[1..].to_vec())
    };
    if rest.len() != gate.n() {
        let col = rest.get(gate.n()).map_or(name.col, |w| w.col);
        return Err(h.err(col, format!("{} acts on {} qubits, {} given", gate, gate.n(), rest.len())));
    }
    let targets = rest.iter().map(|&w| h.qubit(w)).collect::<PResult<Vec<_>>>()?;
    Ok((gate, targets))
}

/// Character cursor with absolute columns.
struct Cursor<'a> {
    h: &'a LineCtx,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(h: &'a LineCtx, text: &str, offset: usize) -> Self {
        Cursor { h, chars: text.char_indices().map(|(i, c)| (offset + i + 1, c)).collect(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|(_, c)| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn col(&self) -> usize {
        self.chars.get(self.pos).map_or_else(|| self.chars.last().map_or(1, |&(c, _)| c + 1), |&(c, _)| c)
    }

    fn eat(&mut self, ch: char) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: char) -> PResult<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{ch}'")))
        }
    }

    fn err(&mut self, message: String) -> ParseError {
        self.skip_ws();
        self.h.err(self.col(), message)
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            if !f(c) {
                break;
            }
            s.push(c);
            self.pos += 1;
        }
        s
    }
}

fn parse_condition(h: &LineCtx, text: &str, offset: usize) -> PResult<Condition> {
    let mut cur = Cursor::new(h, text, offset);
    let c = cond_or(&mut cur)?;
    if cur.peek().is_some() {
        return Err(cur.err("unexpected text in condition".into()));
    }
    Ok(c)
}

fn cond_or(cur: &mut Cursor<'_>) -> PResult<Condition> {
    let mut acc = cond_and(cur)?;
    while cur.eat('|') {
        acc = Condition::or(acc, cond_and(cur)?);
    }
    Ok(acc)
}

fn cond_and(cur: &mut Cursor<'_>) -> PResult<Condition> {
    let mut acc = cond_eq(cur)?;
    while cur.eat('&') {
        acc = Condition::and(acc, cond_eq(cur)?);
    }
    Ok(acc)
}

fn cond_eq(cur: &mut Cursor<'_>) -> PResult<Condition> {
    let left = cond_unary(cur)?;
    if cur.eat('=') {
        cur.expect('=')?;
        return Ok(Condition::eq(left, cond_unary(cur)?));
    }
    Ok(left)
}

fn cond_unary(cur: &mut Cursor<'_>) -> PResult<Condition> {
    match cur.peek() {
        Some('!') => {
            cur.pos += 1;
            Ok(Condition::not(cond_unary(cur)?))
        }
        Some('(') => {
            cur.pos += 1;
            let c = cond_or(cur)?;
            cur.expect(')')?;
            Ok(c)
        }
        Some('0') | Some('1') => {
            let v = cur.take_while(|c| c.is_ascii_digit());
            match v.as_str() {
                "0" => Ok(Condition::Const(false)),
                "1" => Ok(Condition::Const(true)),
                _ => Err(cur.err(format!("expected a bit like c{v}"))),
            }
        }
        Some('c') => {
            cur.pos += 1;
            let col = cur.col();
            let digits = cur.take_while(|c| c.is_ascii_digit());
            digits.parse().map(Condition::bit).map_err(|_| cur.h.err(col, "expected a bit index after 'c'"))
        }
        _ => Err(cur.err("expected a condition".into())),
    }
}

/// Parses `[[..], ..]` starting at byte `open`; returns the matrix and the column of the
/// closing bracket.
fn parse_matrix(h: &LineCtx, content: &str, open: usize) -> PResult<(Matrix, usize)> {
    let mut cur = Cursor::new(h, &content[open..], open);
    cur.expect('[')?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    loop {
        cur.expect('[')?;
        let mut row = vec![complex(&mut cur)?];
        while cur.eat(',') {
            row.push(complex(&mut cur)?);
        }
        cur.expect(']')?;
        rows.push(row);
        if !cur.eat(',') {
            break;
        }
    }
    cur.skip_ws();
    let close_col = cur.col();
    cur.expect(']')?;
    let dim = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
        return Err(h.err(open + 1, format!("matrix row {bad} has {} entries, expected {dim}", rows[bad].len())));
    }
    let m = Matrix::from_fn(dim, dim, |r, c| rows[r][c]);
    Ok((m, close_col))
}

fn complex(cur: &mut Cursor<'_>) -> PResult<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut first = true;
    loop {
        let sign = match cur.peek() {
            Some('+') => {
                cur.pos += 1;
                1.0
            }
            Some('-') => {
                cur.pos += 1;
                -1.0
            }
            _ if first => 1.0,
            _ => break,
        };
        first = false;
        total += sign * term(cur)?;
        if !matches!(cur.peek(), Some('+') | Some('-')) {
            break;
        }
    }
    Ok(total)
}

/// A real literal, optionally followed by `i`, or a bare `i`.
fn term(cur: &mut Cursor<'_>) -> PResult<Complex64> {
    cur.skip_ws();
    let col = cur.col();
    let mut text = cur.take_while(|c| c.is_ascii_digit() || c == '.');
    if matches!(cur.chars.get(cur.pos), Some((_, 'e' | 'E'))) && !text.is_empty() {
        text.push('e');
        cur.pos += 1;
        if let Some(&(_, s @ ('+' | '-'))) = cur.chars.get(cur.pos) {
            text.push(s);
            cur.pos += 1;
        }
        text.push_str(&cur.take_while(|c| c.is_ascii_digit()));
    }
    let imaginary = matches!(cur.chars.get(cur.pos), Some((_, 'i')));
    if imaginary {
        cur.pos += 1;
    }
    let value = match (text.is_empty(), imaginary) {
        (true, true) => 1.0,
        (true, false) => return Err(cur.h.err(col, "expected a number")),
        _ => text.parse::<f64>().map_err(|_| cur.h.err(col, format!("bad number {text:?}")))?,
    };
    Ok(if imaginary { Complex64::new(0.0, value) } else { Complex64::new(value, 0.0) })
}

/// Canonical text of `circuit`.
pub fn render(circuit: &Circuit) -> String {
    let mut out = format!("qubits {}\ncbits {}\n", circuit.n_qubits(), circuit.n_cbits());
    for op in circuit.ops() {
        let line = match op {
            Op::Gate { gate, targets } => format!("gate {}", render_gate(gate, targets)),
            Op::Measure { qubit, cbit } => format!("measure {qubit} -> {cbit}"),
            Op::Bell { q1, q2, cx, cz } => format!("bell {q1} {q2} -> {cx} {cz}"),
            Op::CondGate { cond, gate, targets } => {
                format!("cif {} gate {}", render_condition(cond), render_gate(gate, targets))
            }
            Op::Reset { qubit } => format!("reset {qubit}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn render_gate(gate: &GateUnitary, targets: &[usize]) -> String {
    let qubits: Vec<String> = targets.iter().map(usize::to_string).collect();
    let by_name = gate
        .name()
        .and_then(|n| GateUnitary::named(n).ok())
        .filter(|g| g.n() == gate.n() && linalg::max_abs_diff(g.matrix(), gate.matrix()) == 0.0);
    let head = match by_name {
        Some(g) => g.to_string(),
        None => format!("matrix {}", render_matrix(gate.matrix())),
    };
    format!("{head} {}", qubits.join(" "))
}

fn render_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|r| {
            let entries: Vec<String> = (0..m.ncols()).map(|c| render_complex(m[(r, c)])).collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn render_complex(z: Complex64) -> String {
    let (re, im) = (z.re + 0.0, z.im + 0.0);
    let sign = if im.is_sign_negative() { '-' } else { '+' };
    format!("{re}{sign}{}i", im.abs())
}

fn precedence(c: &Condition) -> u8 {
    match c {
        Condition::Or(..) => 1,
        Condition::And(..) => 2,
        Condition::Eq(..) => 3,
        _ => 4,
    }
}

pub fn render_condition(c: &Condition) -> String {
    let wrap = |child: &Condition, min: u8| {
        let s = render_condition(child);
        if precedence(child) < min { format!("({s})") } else { s }
    };
    match c {
        Condition::Const(v) => u8::from(*v).to_string(),
        Condition::Bit(b) => format!("c{b}"),
        Condition::Not(x) => format!("!{}", wrap(x, 4)),
        // both sides of == are unary; chains of & and | associate to the left
        Condition::Eq(a, b) => format!("{} == {}", wrap(a, 4), wrap(b, 4)),
        Condition::And(a, b) => format!("{} & {}", wrap(a, 2), wrap(b, 3)),
        Condition::Or(a, b) => format!("{} | {}", wrap(a, 1), wrap(b, 2)),
    }
}

/// One complex literal such as `0.5-0.5i`, outside any circuit.
pub fn parse_complex(text: &str) -> PResult<Complex64> {
    let h = LineCtx { line: 1, n_qubits: 0, n_cbits: 0 };
    let mut cur = Cursor::new(&h, text, 0);
    let z = complex(&mut cur)?;
    if cur.peek().is_some() {
        return Err(cur.err(format!("unexpected text in {text:?}")));
    }
    Ok(z)
}
