//! Plain-text instance dumps for debugging and regression fixtures.
//!
//! ```text
//! # qns-ip v1
//! dim 2 rows 1 swaps 1 denom 1
//! c -1 -1
//! q 1 1
//! ub 1 1
//! row 1 1 <= 1
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::IpInstance;

const HEADER: &str = "# qns-ip v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DumpError {
    #[error("missing or unsupported header")]
    Header,
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

pub fn write_dump(inst: &IpInstance) -> String {
    let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(
        out,
        "dim {} rows {} swaps {} denom {}",
        inst.dim(),
        inst.a.len(),
        inst.n_swaps,
        inst.denom
    );
    let _ = writeln!(out, "c {}", join(&inst.c));
    let _ = writeln!(out, "q {}", join(&inst.qdiag));
    let _ = writeln!(out, "ub {}", join(&inst.ub));
    for (row, b) in inst.a.iter().zip(&inst.b) {
        let _ = writeln!(out, "row {} <= {b}", join(row));
    }
    out
}

pub fn parse_dump(text: &str) -> Result<IpInstance, DumpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == HEADER => {}
        _ => return Err(DumpError::Header),
    }
    let err = |line: usize, msg: &str| DumpError::Syntax {
        line,
        msg: msg.to_string(),
    };
    let nums = |line: usize, toks: &[&str]| -> Result<Vec<i64>, DumpError> {
        toks.iter()
            .map(|t| t.parse::<i64>().map_err(|_| err(line, &format!("bad integer {t:?}"))))
            .collect()
    };

    let (ln, sizes) = lines.next().ok_or_else(|| err(0, "missing size line"))?;
    let toks: Vec<&str> = sizes.split_whitespace().collect();
    if toks.len() != 8 || toks[0] != "dim" || toks[2] != "rows" || toks[4] != "swaps" || toks[6] != "denom" {
        return Err(err(ln, "expected `dim D rows M swaps N denom K`"));
    }
    let v = nums(ln, &[toks[1], toks[3], toks[5], toks[7]])?;
    if v[0] < 0 || v[1] < 0 || v[2] < 0 {
        return Err(err(ln, "negative size"));
    }
    let (dim, rows, swaps, denom) = (v[0] as usize, v[1] as usize, v[2] as usize, v[3]);

    let mut vector = |key: &str| -> Result<Vec<i64>, DumpError> {
        let (ln, l) = lines.next().ok_or_else(|| err(0, &format!("missing `{key}` line")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.first() != Some(&key) || toks.len() != dim + 1 {
            return Err(err(ln, &format!("expected `{key}` with {dim} entries")));
        }
        nums(ln, &toks[1..])
    };
    let c = vector("c")?;
    let qdiag = vector("q")?;
    let ub = vector("ub")?;

    let mut a = Vec::with_capacity(rows);
    let mut b = Vec::with_capacity(rows);
    for (ln, l) in lines.by_ref() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != dim + 3 || toks[0] != "row" || toks[dim + 1] != "<=" {
            return Err(err(ln, &format!("expected `row` with {dim} coefficients, `<=`, rhs")));
        }
        a.push(nums(ln, &toks[1..=dim])?);
        b.push(nums(ln, &toks[dim + 2..])?[0]);
    }
    if a.len() != rows {
        return Err(err(0, &format!("declared {rows} rows, found {}", a.len())));
    }
    Ok(IpInstance {
        c,
        qdiag,
        denom,
        a,
        b,
        ub,
        n_swaps: swaps,
    })
}
