//! Deterministic serialization of linear programs: a fixed-field MPS layout
//! and a CPLEX-style LP text form, each with a reference parser used for
//! round-trip verification.
//!
//! MPS layout (columns are 1-based):
//!
//! ```text
//! field 1: cols  2-3   (section codes N/G/L/E, bound codes UP/LO/FX/FR/MI)
//! field 2: cols  5-16  (name, up to 12 chars)
//! field 3: cols 19-30  (name)
//! field 4: cols 33-58  (value)
//! field 5: cols 61-72  (name)
//! field 6: cols 75-100 (value)
//! ```
//!
//! Values are printed in shortest exponential form, which round-trips
//! losslessly through `str::parse::<f64>`.

use super::{LinearProgram, Relation};
use crate::error::{Error, Result};

const NAME_W: usize = 12;
const VAL_W: usize = 26;
const OBJ_ROW: &str = "COST";

fn fmt_val(v: f64) -> String {
    format!("{v:e}")
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.len() > NAME_W || name.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Argument(format!(
            "name {name:?} must be 1..={NAME_W} chars without whitespace"
        )));
    }
    if name == OBJ_ROW {
        return Err(Error::Argument(format!(
            "name {OBJ_ROW:?} is reserved for the objective row"
        )));
    }
    Ok(())
}

fn check_names(lp: &LinearProgram) -> Result<()> {
    for n in &lp.var_names {
        check_name(n)?;
    }
    for r in &lp.rows {
        check_name(&r.name)?;
    }
    Ok(())
}

fn pair_line(code: &str, f2: &str, f3: &str, v3: f64, f5: Option<(&str, f64)>) -> String {
    let mut s = format!(
        " {:<2} {:<NAME_W$}  {:<NAME_W$}  {:<VAL_W$}",
        code,
        f2,
        f3,
        fmt_val(v3)
    );
    if let Some((n, v)) = f5 {
        s.push_str(&format!("  {:<NAME_W$}  {:<VAL_W$}", n, fmt_val(v)));
    }
    while s.ends_with(' ') {
        s.pop();
    }
    s.push('\n');
    s
}

/// Fixed-field MPS serialization.
pub fn write_mps(lp: &LinearProgram) -> Result<Vec<u8>> {
    check_names(lp)?;
    let mut out = String::new();
    out.push_str("NAME          LP\n");
    out.push_str("ROWS\n");
    out.push_str(&format!(" {:<2} {}\n", "N", OBJ_ROW));
    for row in &lp.rows {
        let code = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        out.push_str(&format!(" {:<2} {}\n", code, row.name));
    }
    out.push_str("COLUMNS\n");
    // Entries grouped per variable, objective first, then rows in order.
    for j in 0..lp.num_vars() {
        let mut entries: Vec<(&str, f64)> = Vec::new();
        if lp.objective[j] != 0.0 {
            entries.push((OBJ_ROW, lp.objective[j]));
        }
        for row in &lp.rows {
            for &(jj, v) in &row.coeffs {
                if jj == j {
                    entries.push((&row.name, v));
                }
            }
        }
        let mut it = entries.chunks(2);
        for chunk in &mut it {
            let second = chunk.get(1).map(|&(n, v)| (n, v));
            out.push_str(&pair_line(
                "",
                &lp.var_names[j],
                chunk[0].0,
                chunk[0].1,
                second,
            ));
        }
    }
    out.push_str("RHS\n");
    let rhs_entries: Vec<(&str, f64)> = lp
        .rows
        .iter()
        .filter(|r| r.rhs != 0.0)
        .map(|r| (r.name.as_str(), r.rhs))
        .collect();
    for chunk in rhs_entries.chunks(2) {
        let second = chunk.get(1).map(|&(n, v)| (n, v));
        out.push_str(&pair_line("", "RHS", chunk[0].0, chunk[0].1, second));
    }
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let name = &lp.var_names[j];
        if lo == 0.0 && hi == f64::INFINITY {
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            out.push_str(&format!(" {:<2} {:<NAME_W$}  {}\n", "FR", "BND", name));
            continue;
        }
        if lo == hi {
            out.push_str(&pair_line("FX", "BND", name, lo, None));
            continue;
        }
        if lo == f64::NEG_INFINITY {
            out.push_str(&format!(" {:<2} {:<NAME_W$}  {}\n", "MI", "BND", name));
        } else if lo != 0.0 {
            out.push_str(&pair_line("LO", "BND", name, lo, None));
        }
        if hi != f64::INFINITY {
            out.push_str(&pair_line("UP", "BND", name, hi, None));
        }
    }
    out.push_str("ENDATA\n");
    Ok(out.into_bytes())
}

/// Parse the MPS layout produced by [`write_mps`]. Fields are
/// whitespace-separated; names contain no whitespace by construction.
pub fn parse_mps(text: &str) -> Result<LinearProgram> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }
    let mut lp = LinearProgram::new();
    let mut section = Section::None;
    let mut row_index: std::collections::HashMap<String, usize> = Default::default();
    let mut var_index: std::collections::HashMap<String, usize> = Default::default();
    let mut pending: Vec<(usize, Vec<(usize, f64)>)> = Vec::new(); // per-var row coeffs
    let err = |line: usize, msg: &str| Error::Argument(format!("MPS line {}: {msg}", line + 1));

    for (ln, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') {
            let head = raw.split_whitespace().next().unwrap_or("");
            section = match head {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                _ => return Err(err(ln, &format!("unknown section {head:?}"))),
            };
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err(ln, "ROWS lines carry a code and a name"));
                }
                if toks[0] == "N" {
                    continue; // objective row
                }
                let rel = match toks[0] {
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    other => return Err(err(ln, &format!("unknown row code {other:?}"))),
                };
                row_index.insert(toks[1].to_string(), lp.rows.len());
                lp.add_row(toks[1], Vec::new(), rel, 0.0);
            }
            Section::Columns => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(ln, "COLUMNS lines carry 1 or 2 (row, value) pairs"));
                }
                let var = *var_index.entry(toks[0].to_string()).or_insert_with(|| {
                    let j = lp.add_var(toks[0], 0.0, 0.0, f64::INFINITY);
                    pending.push((j, Vec::new()));
                    j
                });
                for pair in toks[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(ln, &format!("bad number {:?}", pair[1])))?;
                    if pair[0] == OBJ_ROW {
                        lp.objective[var] = value;
                    } else {
                        let &ri = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, &format!("unknown row {:?}", pair[0])))?;
                        pending
                            .iter_mut()
                            .find(|(j, _)| *j == var)
                            .expect("pending entry exists")
                            .1
                            .push((ri, value));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(ln, "RHS lines carry 1 or 2 (row, value) pairs"));
                }
                for pair in toks[1..].chunks(2) {
                    let &ri = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, &format!("unknown row {:?}", pair[0])))?;
                    lp.rows[ri].rhs = pair[1]
                        .parse()
                        .map_err(|_| err(ln, &format!("bad number {:?}", pair[1])))?;
                }
            }
            Section::Bounds => {
                let code = toks[0];
                let needs_value = matches!(code, "UP" | "LO" | "FX");
                if toks.len() != if needs_value { 4 } else { 3 } {
                    return Err(err(ln, "malformed BOUNDS line"));
                }
                let &j = var_index
                    .get(toks[2])
                    .ok_or_else(|| err(ln, &format!("unknown column {:?}", toks[2])))?;
                let value = if needs_value {
                    toks[3]
                        .parse::<f64>()
                        .map_err(|_| err(ln, &format!("bad number {:?}", toks[3])))?
                } else {
                    0.0
                };
                match code {
                    "UP" => lp.upper[j] = value,
                    "LO" => lp.lower[j] = value,
                    "FX" => {
                        lp.lower[j] = value;
                        lp.upper[j] = value;
                    }
                    "FR" => {
                        lp.lower[j] = f64::NEG_INFINITY;
                        lp.upper[j] = f64::INFINITY;
                    }
                    "MI" => lp.lower[j] = f64::NEG_INFINITY,
                    "PL" => lp.upper[j] = f64::INFINITY,
                    other => return Err(err(ln, &format!("unknown bound code {other:?}"))),
                }
            }
            Section::None | Section::Done => {
                return Err(err(ln, "data outside any section"));
            }
        }
    }
    if section != Section::Done {
        return Err(Error::Argument("MPS input ended without ENDATA".into()));
    }
    for (j, coeffs) in pending {
        for (ri, v) in coeffs {
            lp.rows[ri].coeffs.push((j, v));
        }
    }
    for row in &mut lp.rows {
        row.coeffs.sort_by_key(|&(j, _)| j);
    }
    Ok(lp)
}

/// CPLEX-style LP text. Every variable appears in the objective (zero
/// coefficients included) so the variable order survives a round trip.
pub fn write_lp_text(lp: &LinearProgram) -> Result<Vec<u8>> {
    check_names(lp)?;
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    for j in 0..lp.num_vars() {
        let c = lp.objective[j];
        let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
        out.push_str(&format!(" {sign} {} {}", fmt_val(mag), lp.var_names[j]));
    }
    out.push_str("\nSubject To\n");
    for row in &lp.rows {
        out.push_str(&format!(" {}:", row.name));
        for &(j, v) in &row.coeffs {
            let (sign, mag) = if v < 0.0 { ("-", -v) } else { ("+", v) };
            out.push_str(&format!(" {sign} {} {}", fmt_val(mag), lp.var_names[j]));
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        out.push_str(&format!(" {rel} {}\n", fmt_val(row.rhs)));
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let name = &lp.var_names[j];
        if lo == 0.0 && hi == f64::INFINITY {
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            out.push_str(&format!(" {name} free\n"));
        } else if lo == hi {
            out.push_str(&format!(" {name} = {}\n", fmt_val(lo)));
        } else if hi == f64::INFINITY {
            out.push_str(&format!(" {} <= {name}\n", fmt_val(lo)));
        } else if lo == f64::NEG_INFINITY {
            out.push_str(&format!(" {name} <= {}\n", fmt_val(hi)));
        } else {
            out.push_str(&format!(" {} <= {name} <= {}\n", fmt_val(lo), fmt_val(hi)));
        }
    }
    out.push_str("End\n");
    Ok(out.into_bytes())
}

/// Parse the LP text produced by [`write_lp_text`].
pub fn parse_lp_text(text: &str) -> Result<LinearProgram> {
    let mut lp = LinearProgram::new();
    let mut var_index: std::collections::HashMap<String, usize> = Default::default();
    let err = |msg: &str| Error::Argument(format!("LP text: {msg}"));

    #[derive(PartialEq)]
    enum Sec {
        Start,
        Objective,
        Constraints,
        Bounds,
        End,
    }
    let mut sec = Sec::Start;

    // Term lists are "(+|-) value name" triples after a label.
    let parse_terms = |toks: &[&str],
                           lp: &mut LinearProgram,
                           var_index: &mut std::collections::HashMap<String, usize>|
     -> Result<Vec<(usize, f64)>> {
        if toks.len() % 3 != 0 {
            return Err(Error::Argument(format!(
                "LP text: malformed term list {:?}",
                toks.join(" ")
            )));
        }
        let mut out = Vec::new();
        for t in toks.chunks(3) {
            let sign = match t[0] {
                "+" => 1.0,
                "-" => -1.0,
                other => {
                    return Err(Error::Argument(format!(
                        "LP text: expected sign, got {other:?}"
                    )))
                }
            };
            let mag: f64 = t[1]
                .parse()
                .map_err(|_| Error::Argument(format!("LP text: bad number {:?}", t[1])))?;
            let var = *var_index.entry(t[2].to_string()).or_insert_with(|| {
                lp.add_var(t[2], 0.0, 0.0, f64::INFINITY)
            });
            out.push((var, sign * mag));
        }
        Ok(out)
    };

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" => {
                sec = Sec::Objective;
                continue;
            }
            "Subject To" => {
                sec = Sec::Constraints;
                continue;
            }
            "Bounds" => {
                sec = Sec::Bounds;
                continue;
            }
            "End" => {
                sec = Sec::End;
                continue;
            }
            _ => {}
        }
        match sec {
            Sec::Objective => {
                let rest = line
                    .strip_prefix("obj:")
                    .ok_or_else(|| err("objective must start with 'obj:'"))?;
                let toks: Vec<&str> = rest.split_whitespace().collect();
                for (j, c) in parse_terms(&toks, &mut lp, &mut var_index)? {
                    lp.objective[j] = c;
                }
            }
            Sec::Constraints => {
                let colon = line.find(':').ok_or_else(|| err("missing row label"))?;
                let name = &line[..colon];
                let rest = &line[colon + 1..];
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let rel_pos = toks
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "="))
                    .ok_or_else(|| err("missing relation"))?;
                let relation = match toks[rel_pos] {
                    "<=" => Relation::Le,
                    ">=" => Relation::Ge,
                    _ => Relation::Eq,
                };
                let rhs: f64 = toks
                    .get(rel_pos + 1)
                    .ok_or_else(|| err("missing right-hand side"))?
                    .parse()
                    .map_err(|_| err("bad right-hand side"))?;
                let coeffs = parse_terms(&toks[..rel_pos], &mut lp, &mut var_index)?;
                lp.add_row(name, coeffs, relation, rhs);
            }
            Sec::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let get = |name: &str| -> Result<usize> {
                    var_index
                        .get(name)
                        .copied()
                        .ok_or_else(|| err(&format!("bounds reference unknown variable {name:?}")))
                };
                match toks.as_slice() {
                    [name, "free"] => {
                        let j = get(name)?;
                        lp.lower[j] = f64::NEG_INFINITY;
                        lp.upper[j] = f64::INFINITY;
                    }
                    [name, "=", v] => {
                        let j = get(name)?;
                        let v: f64 = v.parse().map_err(|_| err("bad bound"))?;
                        lp.lower[j] = v;
                        lp.upper[j] = v;
                    }
                    [lo, "<=", name, "<=", hi] => {
                        let j = get(name)?;
                        lp.lower[j] = lo.parse().map_err(|_| err("bad bound"))?;
                        lp.upper[j] = hi.parse().map_err(|_| err("bad bound"))?;
                    }
                    [a, "<=", b] => {
                        // Either "lo <= x" or "x <= hi".
                        if let Ok(j) = get(b) {
                            lp.lower[j] = a.parse().map_err(|_| err("bad bound"))?;
                        } else {
                            let j = get(a)?;
                            lp.upper[j] = b.parse().map_err(|_| err("bad bound"))?;
                        }
                    }
                    _ => return Err(err(&format!("malformed bounds line {line:?}"))),
                }
            }
            Sec::Start | Sec::End => return Err(err("data outside any section")),
        }
    }
    if sec != Sec::End {
        return Err(err("missing End marker"));
    }
    Ok(lp)
}

/// Structural equality used by round-trip tests: identical names, bounds,
/// objective, relations, right-hand sides and coefficient patterns.
pub fn same_structure(a: &LinearProgram, b: &LinearProgram) -> bool {
    if a.var_names != b.var_names || a.rows.len() != b.rows.len() {
        return false;
    }
    if a.objective != b.objective || a.lower != b.lower || a.upper != b.upper {
        return false;
    }
    a.rows.iter().zip(&b.rows).all(|(x, y)| {
        x.name == y.name && x.relation == y.relation && x.rhs == y.rhs && x.coeffs == y.coeffs
    })
}
