//! Plain-text numeric files: a header (magic tag and version, kind, dims)
//! followed by whitespace-separated decimals, complex entries written as
//! interleaved real/imaginary pairs with 17 significant digits.
//!
//! ```text
//! TDCB-MATRIX 1
//! kind hermitian
//! dims 2 2
//! 1.0000000000000000e0 0.0000000000000000e0 ...
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex;

use crate::codebook::{Codebook, CodebookKind};
use crate::error::{invalid, Result};
use crate::linalg::{CMatrix, Hermitian};
use crate::scalar::Real;
use crate::tucker::TuckerRotation;

pub const MATRIX_MAGIC: &str = "TDCB-MATRIX";
pub const TUCKER_MAGIC: &str = "TDCB-TUCKER";
pub const CODEBOOK_MAGIC: &str = "TDCB-CODEBOOK";
pub const VERSION: u32 = 1;

fn push_row<T: Real>(out: &mut String, row: impl IntoIterator<Item = Complex<T>>) {
    let mut first = true;
    for z in row {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{:.16e} {:.16e}", z.re.as_f64(), z.im.as_f64());
    }
    out.push('\n');
}

fn push_matrix<T: Real>(out: &mut String, m: &CMatrix<T>) {
    for i in 0..m.rows() {
        push_row(out, m.row(i).iter().copied());
    }
}

pub fn write_matrix<T: Real>(m: &Hermitian<T>) -> String {
    let mut out = format!(
        "{MATRIX_MAGIC} {VERSION}\nkind hermitian\ndims {} {}\n",
        m.dim(),
        m.dim()
    );
    push_matrix(&mut out, m.matrix());
    out
}

pub fn write_tucker<T: Real>(t: &TuckerRotation<T>) -> String {
    let mut out = format!("{TUCKER_MAGIC} {VERSION}\ndims {} {}\nV\n", t.n1(), t.n2());
    push_matrix(&mut out, &t.v);
    out.push_str("U\n");
    push_matrix(&mut out, &t.u);
    out.push_str("lambda\n");
    let line: Vec<String> = t.lambda.iter().map(|l| format!("{:.16e}", l.as_f64())).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
    out
}

pub fn write_codebook<T: Real>(cb: &Codebook<T>) -> String {
    let mut out = format!(
        "{CODEBOOK_MAGIC} {VERSION}\nkind {}\ndims {} {}\n",
        cb.kind().as_str(),
        cb.dim(),
        cb.bits()
    );
    for c in cb.codewords() {
        push_row(&mut out, c.iter().copied());
    }
    out
}

/// Line cursor that skips blank lines and reports 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Self {
            inner: s.lines().enumerate(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(invalid(format!("unexpected end of file, expected {what}")))
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next(key)?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(invalid(format!("line {n}: expected `{key}`, found `{l}`")));
        }
        Ok((n, parts.collect()))
    }

    fn end(&mut self) -> Result<()> {
        match self.next("") {
            Ok((n, l)) => Err(invalid(format!("line {n}: trailing content `{l}`"))),
            Err(_) => Ok(()),
        }
    }
}

fn parse<V: FromStr>(n: usize, tok: &str) -> Result<V> {
    tok.parse()
        .map_err(|_| invalid(format!("line {n}: cannot parse `{tok}`")))
}

fn header(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    let (n, rest) = lines.keyword(magic)?;
    match rest.as_slice() {
        [v] if parse::<u32>(n, v)? == VERSION => Ok(()),
        _ => Err(invalid(format!("line {n}: unsupported {magic} version"))),
    }
}

fn dims(lines: &mut Lines<'_>) -> Result<(usize, usize)> {
    let (n, rest) = lines.keyword("dims")?;
    match rest.as_slice() {
        [a, b] => Ok((parse(n, a)?, parse(n, b)?)),
        _ => Err(invalid(format!("line {n}: `dims` needs two integers"))),
    }
}

fn complex_row<T: Real>(lines: &mut Lines<'_>, len: usize) -> Result<Vec<Complex<T>>> {
    let (n, l) = lines.next("a data row")?;
    let vals = l
        .split_whitespace()
        .map(|t| parse::<f64>(n, t))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != 2 * len {
        return Err(invalid(format!(
            "line {n}: expected {} numbers, found {}",
            2 * len,
            vals.len()
        )));
    }
    Ok(vals
        .chunks(2)
        .map(|p| Complex::new(T::lit(p[0]), T::lit(p[1])))
        .collect())
}

fn matrix_body<T: Real>(lines: &mut Lines<'_>, rows: usize, cols: usize) -> Result<CMatrix<T>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        data.extend(complex_row::<T>(lines, cols)?);
    }
    CMatrix::new(rows, cols, data)
}

/// Reads a Hermitian PSD matrix, validating symmetry and definiteness.
pub fn read_matrix<T: Real>(s: &str) -> Result<Hermitian<T>> {
    let mut lines = Lines::new(s);
    header(&mut lines, MATRIX_MAGIC)?;
    let (n, kind) = lines.keyword("kind")?;
    if kind.as_slice() != ["hermitian"] {
        return Err(invalid(format!("line {n}: only `kind hermitian` is supported")));
    }
    let (r, c) = dims(&mut lines)?;
    if r != c {
        return Err(invalid(format!("a Hermitian matrix must be square, got {r}x{c}")));
    }
    let m = matrix_body(&mut lines, r, c)?;
    lines.end()?;
    Hermitian::new(m)
}

pub fn read_tucker<T: Real>(s: &str) -> Result<TuckerRotation<T>> {
    let mut lines = Lines::new(s);
    header(&mut lines, TUCKER_MAGIC)?;
    let (n1, n2) = dims(&mut lines)?;
    lines.keyword("V")?;
    let v = matrix_body(&mut lines, n1, n1)?;
    lines.keyword("U")?;
    let u = matrix_body(&mut lines, n2, n2)?;
    lines.keyword("lambda")?;
    let (n, l) = lines.next("the core values")?;
    let lambda = l
        .split_whitespace()
        .map(|t| parse::<f64>(n, t).map(T::lit))
        .collect::<Result<Vec<_>>>()?;
    lines.end()?;
    TuckerRotation::new(v, u, lambda)
}

pub fn read_codebook<T: Real>(s: &str) -> Result<Codebook<T>> {
    let mut lines = Lines::new(s);
    header(&mut lines, CODEBOOK_MAGIC)?;
    let (n, kind) = lines.keyword("kind")?;
    let kind = match kind.as_slice() {
        [k] => CodebookKind::parse(k).ok_or_else(|| invalid(format!("line {n}: unknown codebook kind `{k}`")))?,
        _ => return Err(invalid(format!("line {n}: `kind` needs one value"))),
    };
    let (dim, bits) = dims(&mut lines)?;
    let bits = u32::try_from(bits).map_err(|_| invalid("bits out of range"))?;
    if bits > crate::codebook::MAX_CODEBOOK_BITS {
        return Err(crate::Error::ResourceLimit(format!("{bits}-bit codebook file")));
    }
    let words = (0..1usize << bits)
        .map(|_| complex_row::<T>(&mut lines, dim))
        .collect::<Result<Vec<_>>>()?;
    lines.end()?;
    Codebook::new(dim, bits, words, kind)
}
