//! Line-oriented lexer and recursive-descent parser for `.apl` sources.

use std::collections::{BTreeSet, HashMap};

use crate::crypto::Digest;

use super::ast::{Atom, CmpOp, Expr, FieldPath, Literal, PolicyProgram, Rule, SetRef, Severity};
use super::schema::{endorsable, field_type, FieldType, Source};
use super::PolicyError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Hex(Digest),
    Colon,
    Comma,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Op(CmpOp),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Str(_) => "string literal".into(),
            Tok::Hex(_) => "hex literal".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> PolicyError {
    PolicyError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn type_error(line: usize, col: usize, message: impl Into<String>) -> PolicyError {
    PolicyError::Type {
        line,
        col,
        message: message.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Tokenizes one source line. Columns are 1-based character positions.
fn lex(text: &str, line: usize) -> Result<Vec<Token>, PolicyError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c == ' ' || c == '\t' || c == '\r' {
            i += 1;
            continue;
        }
        let single = match c {
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let op = match (c, next) {
            ('=', Some('=')) => Some((CmpOp::Eq, 2)),
            ('!', Some('=')) => Some((CmpOp::Ne, 2)),
            ('<', Some('=')) => Some((CmpOp::Le, 2)),
            ('>', Some('=')) => Some((CmpOp::Ge, 2)),
            ('<', _) => Some((CmpOp::Lt, 1)),
            ('>', _) => Some((CmpOp::Gt, 1)),
            _ => None,
        };
        if let Some((op, len)) = op {
            out.push(Token {
                tok: Tok::Op(op),
                col,
            });
            i += len;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line, col, "unterminated string literal")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some(e @ ('"' | '\\')) => {
                            s.push(*e);
                            i += 2;
                        }
                        _ => return Err(syntax(line, i + 1, "invalid escape in string literal")),
                    },
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                col,
            });
            continue;
        }
        if c == '0' && next == Some('x') {
            let start = i + 2;
            let mut end = start;
            while end < chars.len() && chars[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let digits: String = chars[start..end].iter().collect();
            let d = Digest::from_hex(&digits)
                .ok_or_else(|| syntax(line, col, "hex literal must be exactly 64 hex digits"))?;
            out.push(Token {
                tok: Tok::Hex(d),
                col,
            });
            i = end;
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) {
            let mut end = i + 1;
            while end < chars.len() && chars[end].is_ascii_digit() {
                end += 1;
            }
            if end + 1 < chars.len() && chars[end] == '.' && chars[end + 1].is_ascii_digit() {
                end += 1;
                while end < chars.len() && chars[end].is_ascii_digit() {
                    end += 1;
                }
            }
            if chars
                .get(end)
                .is_some_and(|ch| is_ident_char(*ch) || *ch == '.')
            {
                return Err(syntax(line, end + 1, "malformed number"));
            }
            let text: String = chars[i..end].iter().collect();
            let n: f64 = text
                .parse()
                .map_err(|_| syntax(line, col, "malformed number"))?;
            if !n.is_finite() {
                return Err(syntax(line, col, "number out of range"));
            }
            out.push(Token {
                tok: Tok::Num(n),
                col,
            });
            i = end;
            continue;
        }
        if is_ident_start(c) {
            let mut end = i + 1;
            while end < chars.len() && is_ident_char(chars[end]) {
                end += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[i..end].iter().collect()),
                col,
            });
            i = end;
            continue;
        }
        return Err(syntax(line, col, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct LineParser {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl LineParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn err(&self, message: impl Into<String>) -> PolicyError {
        syntax(self.line, self.col(), message)
    }

    fn unexpected(&self, wanted: &str) -> PolicyError {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {}", t.describe())),
            None => self.err(format!("expected {wanted}, found end of line")),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, wanted: &str) -> Result<(), PolicyError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, PolicyError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn finish(&self) -> Result<(), PolicyError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!(
                "unexpected {} after end of statement",
                t.describe()
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.and_expr()?;
        while self.eat_keyword("or") {
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.unary()?;
        while self.eat_keyword("and") {
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, PolicyError> {
        if self.eat_keyword("not") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, PolicyError> {
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        let is_call = matches!(
            self.toks.get(self.pos + 1).map(|t| &t.tok),
            Some(Tok::LParen)
        );
        let Some(Tok::Ident(word)) = self.peek().cloned() else {
            return Err(self.unexpected("an expression"));
        };
        match word.as_str() {
            "true" => {
                self.pos += 1;
                Ok(Expr::Const(true))
            }
            "false" => {
                self.pos += 1;
                Ok(Expr::Const(false))
            }
            "inside" if is_call => self.inside(),
            "endorsed" if is_call => {
                self.pos += 2;
                let col = self.col();
                let path = self.path()?;
                if !endorsable(path.source) {
                    return Err(type_error(
                        self.line,
                        col,
                        format!(
                            "`{}` claims carry no endorsed reference values",
                            path.source.name()
                        ),
                    ));
                }
                if field_type(path.source, &path.field) == Some(FieldType::DigestSet) {
                    return Err(type_error(
                        self.line,
                        col,
                        "cannot endorse a set-valued field",
                    ));
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr::Atom(Atom::Endorsed(path)))
            }
            "reaches_ek" if is_call => {
                self.pos += 2;
                let col = self.col();
                let arg = self.ident("`key_provenance`")?;
                if arg != "key_provenance" {
                    return Err(type_error(
                        self.line,
                        col,
                        format!("reaches_ek takes `key_provenance`, not `{arg}`"),
                    ));
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr::Atom(Atom::ReachesEk))
            }
            _ => self.comparison(),
        }
    }

    fn inside(&mut self) -> Result<Expr, PolicyError> {
        self.pos += 2;
        let col = self.col();
        let arg = self.ident("`geo_location`")?;
        if arg != "geo_location" {
            return Err(type_error(
                self.line,
                col,
                format!("inside takes `geo_location`, not `{arg}`"),
            ));
        }
        self.expect(&Tok::Comma, "`,`")?;
        let list_col = self.col();
        self.expect(&Tok::LBracket, "`[`")?;
        let mut polygon = Vec::new();
        if !self.eat(&Tok::RBracket) {
            loop {
                self.expect(&Tok::LParen, "`(`")?;
                let lat = self.number()?;
                self.expect(&Tok::Comma, "`,`")?;
                let lon = self.number()?;
                self.expect(&Tok::RParen, "`)`")?;
                polygon.push((lat, lon));
                if self.eat(&Tok::RBracket) {
                    break;
                }
                self.expect(&Tok::Comma, "`,` or `]`")?;
            }
        }
        if polygon.len() < 3 {
            return Err(syntax(
                self.line,
                list_col,
                "polygon needs at least 3 vertices",
            ));
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(Expr::Atom(Atom::Inside { polygon }))
    }

    fn number(&mut self) -> Result<f64, PolicyError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    /// `source.field`, resolved against the schema.
    fn path(&mut self) -> Result<FieldPath, PolicyError> {
        let col = self.col();
        let source_name = self.ident("a field path")?;
        let source = Source::from_name(&source_name).ok_or_else(|| {
            type_error(
                self.line,
                col,
                format!("unknown claim kind or source `{source_name}`"),
            )
        })?;
        self.expect(&Tok::Dot, "`.`")?;
        let field = self.ident("a field name")?;
        if field_type(source, &field).is_none() {
            return Err(type_error(
                self.line,
                col,
                format!("`{source_name}` has no field `{field}`"),
            ));
        }
        Ok(FieldPath { source, field })
    }

    fn literal(&mut self) -> Result<Literal, PolicyError> {
        let lit = match self.peek() {
            Some(Tok::Num(n)) => Literal::Num(*n),
            Some(Tok::Str(s)) => Literal::Str(s.clone()),
            Some(Tok::Hex(d)) => Literal::Digest(*d),
            Some(Tok::Ident(s)) if s == "true" => Literal::Bool(true),
            Some(Tok::Ident(s)) if s == "false" => Literal::Bool(false),
            Some(Tok::Ident(s)) => Literal::Variant(s.clone()),
            _ => return Err(self.unexpected("a literal")),
        };
        self.pos += 1;
        Ok(lit)
    }

    fn typed_literal(&mut self, ty: FieldType, path: &FieldPath) -> Result<Literal, PolicyError> {
        let col = self.col();
        let lit = self.literal()?;
        if !literal_fits(&lit, ty) {
            return Err(type_error(
                self.line,
                col,
                format!(
                    "`{}.{}` is a {}; literal does not match",
                    path.source.name(),
                    path.field,
                    ty.describe()
                ),
            ));
        }
        Ok(lit)
    }

    fn comparison(&mut self) -> Result<Expr, PolicyError> {
        let col = self.col();
        let path = self.path()?;
        let ty = field_type(path.source, &path.field).expect("path resolved");
        if self.eat_keyword("in") {
            if ty == FieldType::DigestSet {
                return Err(type_error(self.line, col, "a set cannot be a member"));
            }
            let set = if self.eat(&Tok::LBracket) {
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.typed_literal(ty, &path)?);
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `]`")?;
                    }
                }
                SetRef::Literals(items)
            } else {
                let set_col = self.col();
                let set_path = self.path()?;
                let set_ty = field_type(set_path.source, &set_path.field);
                if set_ty != Some(FieldType::DigestSet) || ty != FieldType::Digest {
                    return Err(type_error(
                        self.line,
                        set_col,
                        format!(
                            "`{}.{}` is not a set of {}",
                            set_path.source.name(),
                            set_path.field,
                            ty.describe()
                        ),
                    ));
                }
                SetRef::Path(set_path)
            };
            return Ok(Expr::Atom(Atom::Member { path, set }));
        }
        let op_col = self.col();
        let op = match self.bump() {
            Some(Tok::Op(op)) => op,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a comparison operator or `in`"));
            }
        };
        if ty == FieldType::DigestSet {
            return Err(type_error(
                self.line,
                col,
                "set-valued fields can only appear on the right of `in`",
            ));
        }
        if op.is_ordering() && ty != FieldType::Num {
            return Err(type_error(
                self.line,
                op_col,
                format!("`{}` needs a number, found {}", op.symbol(), ty.describe()),
            ));
        }
        let value = self.typed_literal(ty, &path)?;
        Ok(Expr::Atom(Atom::Compare { path, op, value }))
    }
}

fn literal_fits(lit: &Literal, ty: FieldType) -> bool {
    match (lit, ty) {
        (Literal::Bool(_), FieldType::Bool)
        | (Literal::Num(_), FieldType::Num)
        | (Literal::Digest(_), FieldType::Digest)
        | (Literal::Str(_), FieldType::Str) => true,
        (Literal::Variant(v), FieldType::Enum(e)) => e.variants().contains(&v.as_str()),
        _ => false,
    }
}

/// Parses and type-checks a policy source, returning the first error.
pub fn parse_policy(source: &str) -> Result<PolicyProgram, PolicyError> {
    let mut program = PolicyProgram::default();
    let mut rule_lines: HashMap<String, usize> = HashMap::new();
    let mut loa_open = false;
    for (idx, text) in source.lines().enumerate() {
        let line = idx + 1;
        let toks = lex(text, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser {
            toks,
            pos: 0,
            line,
            end_col: text.chars().count() + 1,
        };
        let head_col = p.col();
        let head = p.ident("`policy`, `rule`, `loa`, `feature` or `level`")?;
        match head.as_str() {
            "policy" => {
                if program.id.is_some() || !program.rules.is_empty() || loa_open {
                    return Err(syntax(line, head_col, "`policy` header must come first"));
                }
                program.id = Some(p.ident("a policy name")?);
                p.finish()?;
            }
            "rule" => {
                let id_col = p.col();
                let id = p.ident("a rule id")?;
                let sev_col = p.col();
                let severity = match p.ident("`mandatory` or `advisory`")?.as_str() {
                    "mandatory" => Severity::Mandatory,
                    "advisory" => Severity::Advisory,
                    other => {
                        return Err(syntax(
                            line,
                            sev_col,
                            format!("expected `mandatory` or `advisory`, found `{other}`"),
                        ))
                    }
                };
                p.expect(&Tok::Colon, "`:`")?;
                let predicate = p.expr()?;
                p.finish()?;
                if let Some(first_line) = rule_lines.get(&id) {
                    return Err(PolicyError::DuplicateRuleId {
                        id,
                        line,
                        col: id_col,
                        first_line: *first_line,
                    });
                }
                rule_lines.insert(id.clone(), line);
                program.rules.push(Rule {
                    id,
                    severity,
                    predicate,
                });
            }
            "loa" => {
                if loa_open {
                    return Err(syntax(line, head_col, "only one `loa:` block is allowed"));
                }
                p.expect(&Tok::Colon, "`:`")?;
                p.finish()?;
                loa_open = true;
            }
            "feature" => {
                if !loa_open {
                    return Err(syntax(line, head_col, "`feature` outside an `loa:` block"));
                }
                let name_col = p.col();
                let name = p.ident("a feature name")?;
                p.expect(&Tok::Colon, "`:`")?;
                let expr = p.expr()?;
                p.finish()?;
                if program.loa_table.feature_names().any(|n| n == name) {
                    return Err(syntax(
                        line,
                        name_col,
                        format!("duplicate feature `{name}`"),
                    ));
                }
                program.loa_table.features.push((name, expr));
            }
            "level" => {
                if !loa_open {
                    return Err(syntax(line, head_col, "`level` outside an `loa:` block"));
                }
                let level_col = p.col();
                let n = p.number()?;
                if n.fract() != 0.0 || !(1.0..=4.0).contains(&n) {
                    return Err(syntax(
                        line,
                        level_col,
                        "level must be an integer from 1 to 4",
                    ));
                }
                let level = n as u8;
                if program.loa_table.levels.contains_key(&level) {
                    return Err(syntax(line, level_col, format!("duplicate level {level}")));
                }
                p.expect(&Tok::Colon, "`:`")?;
                let mut required = BTreeSet::new();
                loop {
                    let col = p.col();
                    let f = p.ident("a feature name")?;
                    if !program.loa_table.feature_names().any(|n| n == f) {
                        return Err(type_error(line, col, format!("unknown feature `{f}`")));
                    }
                    required.insert(f);
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
                p.finish()?;
                program.loa_table.levels.insert(level, required);
            }
            other => {
                return Err(syntax(
                    line,
                    head_col,
                    format!(
                        "expected `policy`, `rule`, `loa`, `feature` or `level`, found `{other}`"
                    ),
                ))
            }
        }
    }
    Ok(program)
}
