//! Canonical source rendering. Output reparses to an equal program.

use std::fmt::{self, Display, Formatter};

use super::ast::{Atom, Expr, FieldPath, Literal, PolicyProgram, SetRef};

impl Display for FieldPath {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.source.name(), self.field)
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Num(n) => write!(f, "{n}"),
            Literal::Variant(v) => f.write_str(v),
            Literal::Digest(d) => write!(f, "0x{}", d.to_hex()),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
        }
    }
}

fn list<T>(
    f: &mut Formatter<'_>,
    items: &[T],
    one: impl Fn(&mut Formatter<'_>, &T) -> fmt::Result,
) -> fmt::Result {
    f.write_str("[")?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        one(f, item)?;
    }
    f.write_str("]")
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Compare { path, op, value } => write!(f, "{path} {} {value}", op.symbol()),
            Atom::Member { path, set } => {
                write!(f, "{path} in ")?;
                match set {
                    SetRef::Path(p) => write!(f, "{p}"),
                    SetRef::Literals(items) => list(f, items, |f, l| write!(f, "{l}")),
                }
            }
            Atom::Inside { polygon } => {
                f.write_str("inside(geo_location, ")?;
                list(f, polygon, |f, (lat, lon)| write!(f, "({lat}, {lon})"))?;
                f.write_str(")")
            }
            Atom::Endorsed(path) => write!(f, "endorsed({path})"),
            Atom::ReachesEk => f.write_str("reaches_ek(key_provenance)"),
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 0,
        Expr::And(..) => 1,
        Expr::Not(_) => 2,
        Expr::Const(_) | Expr::Atom(_) => 3,
    }
}

fn operand(f: &mut Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(b) => write!(f, "{b}"),
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Not(e) => {
                f.write_str("not ")?;
                operand(f, e, 2)
            }
            // Both connectives parse left-associatively, so a right operand of
            // equal precedence needs parentheses to survive a reparse.
            Expr::And(a, b) => {
                operand(f, a, 1)?;
                f.write_str(" and ")?;
                operand(f, b, 2)
            }
            Expr::Or(a, b) => {
                operand(f, a, 0)?;
                f.write_str(" or ")?;
                operand(f, b, 1)
            }
        }
    }
}

impl Display for PolicyProgram {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(id) = &self.id {
            writeln!(f, "policy {id}")?;
        }
        for r in &self.rules {
            writeln!(f, "rule {} {}: {}", r.id, r.severity.keyword(), r.predicate)?;
        }
        let table = &self.loa_table;
        if !table.is_empty() {
            writeln!(f, "loa:")?;
            for (name, expr) in &table.features {
                writeln!(f, "  feature {name}: {expr}")?;
            }
            for (level, required) in &table.levels {
                let names: Vec<&str> = required.iter().map(String::as_str).collect();
                writeln!(f, "  level {level}: {}", names.join(", "))?;
            }
        }
        Ok(())
    }
}
