use std::collections::{BTreeMap, BTreeSet};

use crate::crypto::Digest;

use super::schema::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Severity {
    Mandatory,
    Advisory,
}

impl Severity {
    pub fn keyword(self) -> &'static str {
        match self {
            Severity::Mandatory => "mandatory",
            Severity::Advisory => "advisory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Bool(bool),
    Num(f64),
    /// Enum variant written as a bare identifier.
    Variant(String),
    Digest(Digest),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldPath {
    pub source: Source,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetRef {
    Path(FieldPath),
    Literals(Vec<Literal>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Compare {
        path: FieldPath,
        op: CmpOp,
        value: Literal,
    },
    Member {
        path: FieldPath,
        set: SetRef,
    },
    /// Even-odd containment of every reported location in a (lat, lon) polygon.
    Inside {
        polygon: Vec<(f64, f64)>,
    },
    /// Every reported value of the field equals the same field of an endorsed reference claim.
    Endorsed(FieldPath),
    /// Every key provenance chain verifies link by link and ends at the device endorsement key.
    ReachesEk,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(bool),
    Atom(Atom),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Claim kinds and context sources the expression reads.
    pub fn sources(&self) -> BTreeSet<Source> {
        let mut out = BTreeSet::new();
        self.collect_sources(&mut out);
        out
    }

    fn collect_sources(&self, out: &mut BTreeSet<Source>) {
        match self {
            Expr::Const(_) => {}
            Expr::Not(e) => e.collect_sources(out),
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_sources(out);
                b.collect_sources(out);
            }
            Expr::Atom(atom) => match atom {
                Atom::Compare { path, .. } | Atom::Endorsed(path) => {
                    out.insert(path.source);
                }
                Atom::Member { path, set } => {
                    out.insert(path.source);
                    if let SetRef::Path(p) = set {
                        out.insert(p.source);
                    }
                }
                Atom::Inside { .. } => {
                    out.insert(Source::Claim(crate::claims::ClaimKind::GeoLocation));
                }
                Atom::ReachesEk => {
                    out.insert(Source::Claim(crate::claims::ClaimKind::KeyProvenance));
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: String,
    pub severity: Severity,
    pub predicate: Expr,
}

/// Named features and the feature sets each assurance level requires.
///
/// The level assigned to a satisfied-feature set is the highest level whose
/// requirement set it contains, or 1 when none is contained.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoaTable {
    pub features: Vec<(String, Expr)>,
    pub levels: BTreeMap<u8, BTreeSet<String>>,
}

impl LoaTable {
    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.levels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyProgram {
    pub id: Option<String>,
    pub rules: Vec<Rule>,
    pub loa_table: LoaTable,
}

impl PolicyProgram {
    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Applies an owner overlay on top of `self`.
    ///
    /// Overlay rules replace baseline rules with the same id in place and are
    /// otherwise appended; a non-empty overlay LOA table replaces the baseline's.
    pub fn with_overlay(&self, overlay: &PolicyProgram) -> PolicyProgram {
        let mut rules = self.rules.clone();
        for r in &overlay.rules {
            match rules.iter_mut().find(|b| b.id == r.id) {
                Some(slot) => *slot = r.clone(),
                None => rules.push(r.clone()),
            }
        }
        PolicyProgram {
            id: overlay.id.clone().or_else(|| self.id.clone()),
            rules,
            loa_table: if overlay.loa_table.is_empty() {
                self.loa_table.clone()
            } else {
                overlay.loa_table.clone()
            },
        }
    }
}
