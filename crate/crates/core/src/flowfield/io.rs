//! Text grid format.
//!
//! ```text
//! FLOWGRID 1
//! origin_x origin_y dx dy nx ny
//! u v        # nx*ny lines, row-major, y-major rows
//! ```
//!
//! Anything after `#` is a comment; blank lines are skipped.

use std::io::{BufRead, Write};

use super::{FlowError, GridField};
use crate::geometry::Vec2;

fn parse_err(line: usize, message: impl Into<String>) -> FlowError {
    FlowError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, FlowError> {
    let x: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse {tok:?} as a number")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("{what}: non-finite value {tok:?}")));
    }
    Ok(x)
}

pub fn load_grid(source: impl BufRead) -> Result<GridField, FlowError> {
    let mut lines = source.lines().enumerate().filter_map(|(k, l)| match l {
        Err(e) => Some(Err(FlowError::Io(e.to_string()))),
        Ok(l) => {
            let body = l.split('#').next().unwrap_or("").trim().to_string();
            (!body.is_empty()).then_some(Ok((k + 1, body)))
        }
    });

    let (ln, magic) = lines.next().ok_or_else(|| parse_err(1, "empty input"))??;
    let toks: Vec<&str> = magic.split_whitespace().collect();
    if toks != ["FLOWGRID", "1"] {
        return Err(parse_err(
            ln,
            format!("expected `FLOWGRID 1`, found {magic:?}"),
        ));
    }

    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(ln + 1, "missing header line"))??;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 {
        return Err(parse_err(
            ln,
            format!(
                "header needs `origin_x origin_y dx dy nx ny`, got {} fields",
                toks.len()
            ),
        ));
    }
    let ox = parse_f64(toks[0], ln, "origin_x")?;
    let oy = parse_f64(toks[1], ln, "origin_y")?;
    let dx = parse_f64(toks[2], ln, "dx")?;
    let dy = parse_f64(toks[3], ln, "dy")?;
    let parse_dim = |t: &str, what: &str| -> Result<usize, FlowError> {
        t.parse::<usize>().map_err(|_| {
            parse_err(
                ln,
                format!("{what}: expected a positive integer, got {t:?}"),
            )
        })
    };
    let nx = parse_dim(toks[4], "nx")?;
    let ny = parse_dim(toks[5], "ny")?;
    if nx < 2 || ny < 2 {
        return Err(parse_err(
            ln,
            format!("grid must be at least 2x2, got {nx}x{ny}"),
        ));
    }
    if !(dx > 0.0 && dy > 0.0) {
        return Err(parse_err(ln, "spacing must be strictly positive"));
    }

    let n = nx
        .checked_mul(ny)
        .ok_or_else(|| parse_err(ln, "grid too large"))?;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut last = ln;
    for item in lines {
        let (ln, body) = item?;
        last = ln;
        if u.len() == n {
            return Err(parse_err(ln, format!("more than nx*ny = {n} sample lines")));
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(
                ln,
                format!("sample line needs `u v`, got {} fields", toks.len()),
            ));
        }
        u.push(parse_f64(toks[0], ln, "u")?);
        v.push(parse_f64(toks[1], ln, "v")?);
    }
    if u.len() != n {
        return Err(parse_err(
            last,
            format!("expected nx*ny = {n} sample lines, found {}", u.len()),
        ));
    }
    GridField::new(Vec2::new(ox, oy), (dx, dy), nx, ny, u, v)
}

/// Writes `grid` so that [`load_grid`] reproduces every sample bit for bit.
pub fn save_grid(grid: &GridField, mut out: impl Write) -> std::io::Result<()> {
    let o = grid.origin();
    let (dx, dy) = grid.spacing();
    let (nx, ny) = grid.dims();
    writeln!(out, "FLOWGRID 1")?;
    writeln!(out, "{} {} {} {} {} {}", o.x, o.y, dx, dy, nx, ny)?;
    for (u, v) in grid.u_samples().iter().zip(grid.v_samples()) {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}
