//! Whitespace-tokenized MPS reader and writer.
//!
//! Supported sections: `NAME`, `OBJSENSE`, `ROWS`, `COLUMNS` (with
//! `INTORG`/`INTEND` markers), `RHS`, `RANGES`, `BOUNDS`, `ENDATA`. A single
//! `N` row is the objective. Ranged rows are split into a `≥` and a `≤` row.

use std::collections::HashMap;
use std::fmt::Write as _;

use branchlab_core::milp::{Constraint, InstanceError};
use branchlab_core::{MilpInstance, Sense};

#[derive(Debug, thiserror::Error)]
pub enum MpsError {
    #[error("line {line}: {kind}")]
    Syntax { line: usize, kind: SyntaxError },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("invalid instance: {0}")]
    Instance(#[from] InstanceError),
}

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum SyntaxError {
    #[error("section {found} out of order (after {after})")]
    SectionOrder { found: String, after: String },
    #[error("unknown section {0}")]
    UnknownSection(String),
    #[error("data line outside of any section")]
    NoSection,
    #[error("duplicate row name {0}")]
    DuplicateRow(String),
    #[error("unknown row {0}")]
    UnknownRow(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("unknown row type {0}")]
    UnknownRowType(String),
    #[error("unknown bound type {0}")]
    UnknownBound(String),
    #[error("column {0} appears in two separate blocks")]
    SplitColumn(String),
    #[error("duplicate entry for column {col} in row {row}")]
    DuplicateEntry { col: String, row: String },
    #[error("more than one objective (N) row: {0}")]
    ExtraObjective(String),
    #[error("objective constant on row {0} is not supported")]
    ObjectiveOffset(String),
    #[error("bad number {0}")]
    BadNumber(String),
    #[error("unexpected token count {0}")]
    TokenCount(usize),
    #[error("unknown marker {0}")]
    BadMarker(String),
    #[error("unknown objective sense {0}")]
    BadSense(String),
    #[error("range on objective row {0}")]
    ObjectiveRange(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Start,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

impl Section {
    fn parse(token: &str) -> Option<Section> {
        Some(match token {
            "NAME" => Section::Name,
            "OBJSENSE" => Section::ObjSense,
            "ROWS" => Section::Rows,
            "COLUMNS" => Section::Columns,
            "RHS" => Section::Rhs,
            "RANGES" => Section::Ranges,
            "BOUNDS" => Section::Bounds,
            "ENDATA" => Section::End,
            _ => return None,
        })
    }

    fn label(self) -> &'static str {
        match self {
            Section::Start => "start of file",
            Section::Name => "NAME",
            Section::ObjSense => "OBJSENSE",
            Section::Rows => "ROWS",
            Section::Columns => "COLUMNS",
            Section::Rhs => "RHS",
            Section::Ranges => "RANGES",
            Section::Bounds => "BOUNDS",
            Section::End => "ENDATA",
        }
    }
}

struct Row {
    name: String,
    sense: Sense,
    coefs: Vec<(usize, f64)>,
    rhs: f64,
    range: Option<f64>,
}

#[derive(Default)]
struct Parser {
    name: String,
    maximize: bool,
    objective_row: Option<String>,
    rows: Vec<Row>,
    row_index: HashMap<String, usize>,
    cols: Vec<String>,
    col_index: HashMap<String, usize>,
    objective: Vec<f64>,
    integer: Vec<bool>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    in_int_block: bool,
}

fn number(tok: &str) -> Result<f64, SyntaxError> {
    match tok.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(SyntaxError::BadNumber(tok.to_string())),
    }
}

impl Parser {
    fn row(&self, name: &str) -> Result<Option<usize>, SyntaxError> {
        if self.objective_row.as_deref() == Some(name) {
            return Ok(None);
        }
        self.row_index.get(name).copied().map(Some).ok_or_else(|| SyntaxError::UnknownRow(name.to_string()))
    }

    fn col(&self, name: &str) -> Result<usize, SyntaxError> {
        self.col_index.get(name).copied().ok_or_else(|| SyntaxError::UnknownColumn(name.to_string()))
    }

    fn rows_line(&mut self, t: &[&str]) -> Result<(), SyntaxError> {
        let [kind, name] = t else { return Err(SyntaxError::TokenCount(t.len())) };
        let sense = match *kind {
            "N" => {
                if let Some(prev) = &self.objective_row {
                    return Err(SyntaxError::ExtraObjective(format!("{prev}, {name}")));
                }
                self.objective_row = Some(name.to_string());
                return Ok(());
            }
            "L" => Sense::Le,
            "G" => Sense::Ge,
            "E" => Sense::Eq,
            other => return Err(SyntaxError::UnknownRowType(other.to_string())),
        };
        if self.row_index.contains_key(*name) || self.objective_row.as_deref() == Some(name) {
            return Err(SyntaxError::DuplicateRow(name.to_string()));
        }
        self.row_index.insert(name.to_string(), self.rows.len());
        self.rows.push(Row { name: name.to_string(), sense, coefs: Vec::new(), rhs: 0.0, range: None });
        Ok(())
    }

    fn columns_line(&mut self, t: &[&str]) -> Result<(), SyntaxError> {
        if t.len() == 3 && t[1].trim_matches('\'') == "MARKER" {
            match t[2].trim_matches('\'') {
                "INTORG" => self.in_int_block = true,
                "INTEND" => self.in_int_block = false,
                other => return Err(SyntaxError::BadMarker(other.to_string())),
            }
            return Ok(());
        }
        if t.len() != 3 && t.len() != 5 {
            return Err(SyntaxError::TokenCount(t.len()));
        }
        let col = t[0];
        let j = match self.col_index.get(col) {
            Some(&j) if j + 1 == self.cols.len() => j,
            Some(_) => return Err(SyntaxError::SplitColumn(col.to_string())),
            None => {
                let j = self.cols.len();
                self.col_index.insert(col.to_string(), j);
                self.cols.push(col.to_string());
                self.objective.push(0.0);
                self.integer.push(self.in_int_block);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                j
            }
        };
        for pair in t[1..].chunks(2) {
            let value = number(pair[1])?;
            match self.row(pair[0])? {
                None => self.objective[j] = value,
                Some(i) => {
                    let row = &mut self.rows[i];
                    if row.coefs.last().is_some_and(|&(c, _)| c == j) {
                        return Err(SyntaxError::DuplicateEntry { col: col.to_string(), row: pair[0].to_string() });
                    }
                    if value != 0.0 {
                        row.coefs.push((j, value));
                    }
                }
            }
        }
        Ok(())
    }

    /// Drops an optional leading set name: data comes in (row, value) pairs.
    fn pairs<'a, 'b>(t: &'a [&'b str]) -> Result<&'a [&'b str], SyntaxError> {
        match t.len() {
            2 | 4 => Ok(t),
            3 | 5 => Ok(&t[1..]),
            n => Err(SyntaxError::TokenCount(n)),
        }
    }

    fn rhs_line(&mut self, t: &[&str]) -> Result<(), SyntaxError> {
        for pair in Self::pairs(t)?.chunks(2) {
            let value = number(pair[1])?;
            match self.row(pair[0])? {
                None if value != 0.0 => return Err(SyntaxError::ObjectiveOffset(pair[0].to_string())),
                None => {}
                Some(i) => self.rows[i].rhs = value,
            }
        }
        Ok(())
    }

    fn ranges_line(&mut self, t: &[&str]) -> Result<(), SyntaxError> {
        for pair in Self::pairs(t)?.chunks(2) {
            let value = number(pair[1])?;
            match self.row(pair[0])? {
                None => return Err(SyntaxError::ObjectiveRange(pair[0].to_string())),
                Some(i) => self.rows[i].range = Some(value),
            }
        }
        Ok(())
    }

    fn bounds_line(&mut self, t: &[&str]) -> Result<(), SyntaxError> {
        let kind = *t.first().ok_or(SyntaxError::TokenCount(0))?;
        let valued = match kind {
            "UP" | "LO" | "FX" | "LI" | "UI" => true,
            "FR" | "MI" | "PL" | "BV" => false,
            other => return Err(SyntaxError::UnknownBound(other.to_string())),
        };
        // optional bound-set name between the type and the column
        let rest = match (valued, t.len()) {
            (true, 4) | (false, 3) => &t[2..],
            (true, 3) | (false, 2) => &t[1..],
            (_, n) => return Err(SyntaxError::TokenCount(n)),
        };
        let j = self.col(rest[0])?;
        let value = if valued { number(rest[1])? } else { 0.0 };
        match kind {
            "UP" => self.upper[j] = value,
            "LO" => self.lower[j] = value,
            "FX" => {
                self.lower[j] = value;
                self.upper[j] = value;
            }
            "FR" => {
                self.lower[j] = f64::NEG_INFINITY;
                self.upper[j] = f64::INFINITY;
            }
            "MI" => self.lower[j] = f64::NEG_INFINITY,
            "PL" => self.upper[j] = f64::INFINITY,
            "BV" => {
                self.integer[j] = true;
                self.lower[j] = 0.0;
                self.upper[j] = 1.0;
            }
            "LI" => {
                self.integer[j] = true;
                self.lower[j] = value;
            }
            "UI" => {
                self.integer[j] = true;
                self.upper[j] = value;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn finish(self) -> Result<MilpInstance, MpsError> {
        let mut rows = Vec::new();
        let mut row_names = Vec::new();
        for r in self.rows {
            let (sense, rhs) = (r.sense, r.rhs);
            let bounds = match (r.range, sense) {
                (None, _) => None,
                (Some(q), Sense::Le) => Some((rhs - q.abs(), rhs)),
                (Some(q), Sense::Ge) => Some((rhs, rhs + q.abs())),
                (Some(q), Sense::Eq) if q >= 0.0 => Some((rhs, rhs + q)),
                (Some(q), Sense::Eq) => Some((rhs + q, rhs)),
            };
            match bounds {
                None => {
                    rows.push(Constraint { coefs: r.coefs, sense, rhs });
                    row_names.push(r.name);
                }
                Some((lo, hi)) => {
                    rows.push(Constraint { coefs: r.coefs.clone(), sense: Sense::Ge, rhs: lo });
                    row_names.push(format!("{}_lo", r.name));
                    rows.push(Constraint { coefs: r.coefs, sense: Sense::Le, rhs: hi });
                    row_names.push(format!("{}_hi", r.name));
                }
            }
        }
        let mut objective = self.objective;
        if self.maximize {
            for c in objective.iter_mut() {
                *c = -*c;
            }
        }
        let integers: Vec<usize> = (0..self.integer.len()).filter(|&j| self.integer[j]).collect();
        let mut inst = MilpInstance::new(self.name, objective, rows, integers)?.with_bounds(self.lower, self.upper)?;
        inst.negated_objective = self.maximize;
        inst.var_names = self.cols;
        inst.row_names = row_names;
        Ok(inst)
    }
}

/// Parses MPS text into a minimization instance.
pub fn parse_mps(text: &str) -> Result<MilpInstance, MpsError> {
    let mut p = Parser::default();
    let mut section = Section::Start;
    let mut seen = [false; 9];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |kind| MpsError::Syntax { line, kind };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let header = !raw.starts_with(char::is_whitespace);
        if header {
            let next = Section::parse(tokens[0]).ok_or_else(|| err(SyntaxError::UnknownSection(tokens[0].to_string())))?;
            if next <= section {
                return Err(err(SyntaxError::SectionOrder { found: next.label().into(), after: section.label().into() }));
            }
            section = next;
            seen[next as usize] = true;
            match next {
                Section::Name => p.name = tokens.get(1).map_or_else(String::new, |s| s.to_string()),
                Section::ObjSense if tokens.len() > 1 => p.maximize = objsense(tokens[1]).map_err(err)?,
                Section::End => break,
                _ => {}
            }
            continue;
        }
        match section {
            Section::Start | Section::Name | Section::End => return Err(err(SyntaxError::NoSection)),
            Section::ObjSense => p.maximize = objsense(tokens[0]).map_err(err)?,
            Section::Rows => p.rows_line(&tokens).map_err(err)?,
            Section::Columns => p.columns_line(&tokens).map_err(err)?,
            Section::Rhs => p.rhs_line(&tokens).map_err(err)?,
            Section::Ranges => p.ranges_line(&tokens).map_err(err)?,
            Section::Bounds => p.bounds_line(&tokens).map_err(err)?,
        }
    }
    for s in [Section::Rows, Section::Columns, Section::Rhs] {
        if !seen[s as usize] {
            return Err(MpsError::MissingSection(s.label()));
        }
    }
    p.finish()
}

fn objsense(tok: &str) -> Result<bool, SyntaxError> {
    match tok {
        "MAX" | "MAXIMIZE" => Ok(true),
        "MIN" | "MINIMIZE" => Ok(false),
        other => Err(SyntaxError::BadSense(other.to_string())),
    }
}

/// Writes `inst` as free MPS. Parsing the output gives back the same
/// instance, names included (generated names are used when absent).
pub fn write_mps(inst: &MilpInstance) -> String {
    let n = inst.num_vars();
    let var = |j: usize| inst.var_names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
    let row = |i: usize| inst.row_names.get(i).cloned().unwrap_or_else(|| format!("c{i}"));
    let obj = "OBJ";
    let mut out = String::new();
    let name = if inst.name.is_empty() { "unnamed" } else { &inst.name };
    let _ = writeln!(out, "NAME {name}");
    if inst.negated_objective {
        let _ = writeln!(out, "OBJSENSE\n    MAX");
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {obj}");
    for (i, r) in inst.rows.iter().enumerate() {
        let kind = match r.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {kind}  {}", row(i));
    }
    out.push_str("COLUMNS\n");
    let columns = inst.column_index();
    let sign = if inst.negated_objective { -1.0 } else { 1.0 };
    let mut in_int = false;
    let mut markers = 0;
    for j in 0..n {
        let int = inst.is_integer(j);
        if int != in_int {
            let tag = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    M{markers} 'MARKER' '{tag}'");
            markers += 1;
            in_int = int;
        }
        let c = sign * inst.objective[j];
        if c != 0.0 || columns[j].is_empty() {
            let _ = writeln!(out, "    {}  {obj}  {c}", var(j));
        }
        for &(i, a) in &columns[j] {
            let _ = writeln!(out, "    {}  {}  {a}", var(j), row(i));
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{markers} 'MARKER' 'INTEND'");
    }
    out.push_str("RHS\n");
    for (i, r) in inst.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            let _ = writeln!(out, "    RHS  {}  {}", row(i), r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..n {
        let (lo, up) = (inst.lower[j], inst.upper[j]);
        if lo == up {
            let _ = writeln!(out, " FX BND  {}  {lo}", var(j));
            continue;
        }
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            let _ = writeln!(out, " FR BND  {}", var(j));
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND  {}", var(j));
        } else if lo != 0.0 {
            let _ = writeln!(out, " LO BND  {}  {lo}", var(j));
        }
        if up != f64::INFINITY {
            let _ = writeln!(out, " UP BND  {}  {up}", var(j));
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
NAME toy
ROWS
 N  obj
 L  cap
COLUMNS
    MARKER 'MARKER' 'INTORG'
    x1  obj  -1  cap  1
    x2  obj  -1  cap  1
    MARKER 'MARKER' 'INTEND'
RHS
    RHS  cap  1.5
BOUNDS
 UP BND  x1  1
 UP BND  x2  1
ENDATA
";

    #[test]
    fn toy_file() {
        let inst = parse_mps(TOY).unwrap();
        assert_eq!(inst.num_vars(), 2);
        assert_eq!(inst.num_conss(), 1);
        assert_eq!(inst.integers, vec![0, 1]);
        assert_eq!(inst.objective, vec![-1.0, -1.0]);
        assert_eq!(inst.rows[0].rhs, 1.5);
        assert_eq!(inst.upper, vec![1.0, 1.0]);
    }

    #[test]
    fn default_bounds_without_bounds_section() {
        let text = "NAME t\nROWS\n N obj\n G r\nCOLUMNS\n    MARKER 'MARKER' 'INTORG'\n    x obj 1 r 1\n    MARKER 'MARKER' 'INTEND'\nRHS\n    RHS r 2\nENDATA\n";
        let inst = parse_mps(text).unwrap();
        assert_eq!(inst.lower, vec![0.0]);
        assert_eq!(inst.upper, vec![f64::INFINITY]);
    }

    #[test]
    fn maximization_is_negated() {
        let text = TOY.replace("ROWS", "OBJSENSE\n    MAX\nROWS");
        let inst = parse_mps(&text).unwrap();
        assert!(inst.negated_objective);
        assert_eq!(inst.objective, vec![1.0, 1.0]);
        assert_eq!(parse_mps(&write_mps(&inst)).unwrap(), inst);
    }

    #[test]
    fn errors_name_the_line() {
        let dup = TOY.replace(" L  cap", " L  cap\n G  cap");
        match parse_mps(&dup) {
            Err(MpsError::Syntax { line: 5, kind: SyntaxError::DuplicateRow(r) }) => assert_eq!(r, "cap"),
            other => panic!("{other:?}"),
        }
        let bad_bound = TOY.replace(" UP BND  x2  1", " XX BND  x2  1");
        assert!(matches!(
            parse_mps(&bad_bound),
            Err(MpsError::Syntax { line: 14, kind: SyntaxError::UnknownBound(_) })
        ));
        let order = TOY.replace("RHS\n    RHS  cap  1.5\n", "").replace("ENDATA", "RHS\nENDATA");
        let order = order.replacen("COLUMNS", "BOUNDS\nCOLUMNS", 1);
        assert!(matches!(parse_mps(&order), Err(MpsError::Syntax { kind: SyntaxError::SectionOrder { .. }, .. })));
    }

    #[test]
    fn missing_rhs_section() {
        let text = TOY.replace("RHS\n    RHS  cap  1.5\n", "");
        assert!(matches!(parse_mps(&text), Err(MpsError::MissingSection("RHS"))));
    }

    #[test]
    fn ranges_split_rows() {
        let text = TOY.replace("BOUNDS", "RANGES\n    RNG  cap  0.5\nBOUNDS");
        let inst = parse_mps(&text).unwrap();
        assert_eq!(inst.num_conss(), 2);
        assert_eq!((inst.rows[0].sense, inst.rows[0].rhs), (Sense::Ge, 1.0));
        assert_eq!((inst.rows[1].sense, inst.rows[1].rhs), (Sense::Le, 1.5));
    }

    #[test]
    fn round_trip() {
        let inst = parse_mps(TOY).unwrap();
        assert_eq!(parse_mps(&write_mps(&inst)).unwrap(), inst);
    }
}
