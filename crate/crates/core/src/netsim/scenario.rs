//! Declarative scenario files (`.scn`).
//!
//! One statement per line; `#` starts a comment. Options are `key=value`
//! tokens or bare flags, in any order.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::claims::LogicalTime;
use crate::fixtures;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkPolicy {
    pub delay: LogicalTime,
    /// Probability that one transmission is lost, at most 0.5.
    pub drop: f64,
    pub reorder: bool,
}

impl Default for LinkPolicy {
    fn default() -> Self {
        LinkPolicy {
            delay: 1,
            drop: 0.0,
            reorder: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JurisdictionKind {
    Open,
    Strict,
    Private,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VaspDecl {
    pub name: String,
    pub verifier: String,
    pub jurisdiction: JurisdictionKind,
    pub min_loa: u8,
    pub daily_limit: u64,
    pub policy: String,
    pub info_channel: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalletDecl {
    pub name: String,
    pub model: String,
    pub vasp: Option<String>,
    pub migratable: bool,
    pub funds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossPath {
    /// Beneficiary evidence goes to the requesting VASP's own verifier.
    Own,
    /// Beneficiary evidence goes to the consortium's shared service.
    Shared,
    /// Both, with the verdicts compared.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Onboard(String),
    Attest(String),
    Transfer { from: String, to: String, amount: u64 },
    Direct { from: String, to: String, amount: u64 },
    Cross { from: String, to: String, amount: u64, path: CrossPath },
    Discover { vasp: String, wallet: String },
    Recover { wallet: String, onto: Option<String> },
    Offboard { wallet: String, move_assets: bool },
    Reconcile(Option<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scheduled {
    pub tick: LogicalTime,
    pub line: usize,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expectation {
    pub metric: String,
    pub value: u64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub budget: LogicalTime,
    pub confirm_delay: LogicalTime,
    pub ledger_link: LinkPolicy,
    pub default_link: LinkPolicy,
    pub links: Vec<(String, String, LinkPolicy)>,
    pub policies: BTreeMap<String, String>,
    pub verifiers: Vec<String>,
    pub shared: Option<String>,
    pub vasps: Vec<VaspDecl>,
    pub wallets: Vec<WalletDecl>,
    pub actions: Vec<Scheduled>,
    /// 1-based ledger submission numbers to lose.
    pub drops: BTreeSet<u64>,
    /// Submission `n` is delivered after submission `n + 1`.
    pub reorders: BTreeSet<u64>,
    pub expectations: Vec<Expectation>,
}

pub const METRICS: &[&str] = &[
    "action_errors",
    "attested",
    "authorized",
    "confirmed",
    "deferred",
    "denied",
    "discover_known",
    "discover_unknown",
    "discover_withheld",
    "divergences",
    "ledger_dropped",
    "ledger_rejected",
    "lost",
    "offboarded",
    "onboard_failed",
    "onboarded",
    "path_mismatches",
    "plane_violations",
    "preauth_approved",
    "preauth_deferred",
    "preauth_rejected",
    "recovered",
    "rekeyed",
    "retroactive_rejections",
    "swept",
    "travel_verified",
    "unrecorded",
];

const MODELS: &[&str] = &[fixtures::MODEL_A, fixtures::MODEL_B, fixtures::SOFT_WALLET];

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut col_of = Vec::with_capacity(line.len() + 1);
    let mut col = 1;
    for (i, _) in line.char_indices() {
        col_of.push((i, col));
        col += 1;
    }
    let col_at = |i: usize| col_of.iter().find(|(b, _)| *b == i).map_or(col, |(_, c)| *c);
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Tok {
                    text: &line[s..i],
                    col: col_at(s),
                });
                start = None;
            }
            (false, None) => {
                if c == '#' {
                    return out;
                }
                start = Some(i);
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: col_at(s),
        });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

struct Line<'a> {
    no: usize,
    toks: Vec<Tok<'a>>,
    end_col: usize,
}

impl<'a> Line<'a> {
    fn err(&self, col: usize, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.no,
            col,
            message: message.into(),
        }
    }

    fn arg(&self, i: usize, what: &str) -> Result<Tok<'a>, ScenarioError> {
        self.toks.get(i).copied().ok_or_else(|| {
            let col = self.toks.last().map_or(1, |t| t.col + t.text.chars().count() + 1);
            self.err(col.min(self.end_col + 1), format!("expected {what}"))
        })
    }

    fn name(&self, i: usize, what: &str) -> Result<Tok<'a>, ScenarioError> {
        let t = self.arg(i, what)?;
        if !is_ident(t.text) {
            return Err(self.err(t.col, format!("expected {what}, found `{}`", t.text)));
        }
        Ok(t)
    }

    fn number(&self, t: Tok<'_>) -> Result<u64, ScenarioError> {
        t.text
            .parse()
            .map_err(|_| self.err(t.col, format!("expected a non-negative integer, found `{}`", t.text)))
    }

    fn no_more(&self, from: usize) -> Result<(), ScenarioError> {
        match self.toks.get(from) {
            Some(t) => Err(self.err(t.col, format!("unexpected `{}`", t.text))),
            None => Ok(()),
        }
    }

    /// Parses trailing `key=value` options and flags.
    fn options(&self, from: usize, keys: &[&str], flags: &[&str]) -> Result<Opts<'a>, ScenarioError> {
        let mut opts = Opts::default();
        for t in &self.toks[from.min(self.toks.len())..] {
            if let Some((k, v)) = t.text.split_once('=') {
                if !keys.contains(&k) {
                    return Err(self.err(t.col, format!("unknown option `{k}`")));
                }
                let vcol = t.col + k.chars().count() + 1;
                if v.is_empty() {
                    return Err(self.err(vcol, format!("missing value for `{k}`")));
                }
                if opts.values.insert(k, (v, vcol)).is_some() {
                    return Err(self.err(t.col, format!("option `{k}` given twice")));
                }
            } else if flags.contains(&t.text) {
                if !opts.flags.insert(t.text) {
                    return Err(self.err(t.col, format!("flag `{}` given twice", t.text)));
                }
            } else {
                return Err(self.err(t.col, format!("unexpected `{}`", t.text)));
            }
        }
        Ok(opts)
    }
}

#[derive(Default)]
struct Opts<'a> {
    values: BTreeMap<&'a str, (&'a str, usize)>,
    flags: BTreeSet<&'a str>,
}

impl<'a> Opts<'a> {
    fn get(&self, k: &str) -> Option<(&'a str, usize)> {
        self.values.get(k).copied()
    }

    fn flag(&self, f: &str) -> bool {
        self.flags.contains(f)
    }

    fn num(&self, line: &Line<'_>, k: &str) -> Result<Option<u64>, ScenarioError> {
        self.get(k)
            .map(|(v, col)| line.number(Tok { text: v, col }))
            .transpose()
    }

    fn ident(&self, line: &Line<'_>, k: &str) -> Result<Option<(String, usize)>, ScenarioError> {
        match self.get(k) {
            Some((v, col)) if is_ident(v) => Ok(Some((v.to_string(), col))),
            Some((v, col)) => Err(line.err(col, format!("expected a name, found `{v}`"))),
            None => Ok(None),
        }
    }
}

fn link_policy(line: &Line<'_>, opts: &Opts<'_>, base: LinkPolicy) -> Result<LinkPolicy, ScenarioError> {
    let mut p = base;
    if let Some(d) = opts.num(line, "delay")? {
        p.delay = d;
    }
    if let Some((v, col)) = opts.get("drop") {
        let x: f64 = v
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite() && (0.0..=0.5).contains(x))
            .ok_or_else(|| line.err(col, "drop must be a probability between 0 and 0.5"))?;
        p.drop = x;
    }
    if opts.flag("reorder") {
        p.reorder = true;
    }
    Ok(p)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RefKind {
    Verifier,
    Vasp,
    Wallet,
    Policy,
    /// Any declared verifier, VASP or wallet.
    Actor,
}

impl RefKind {
    fn label(self) -> &'static str {
        match self {
            RefKind::Verifier => "verifier",
            RefKind::Vasp => "vasp",
            RefKind::Wallet => "wallet",
            RefKind::Policy => "policy",
            RefKind::Actor => "actor",
        }
    }
}

pub fn parse_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario {
        name: String::new(),
        budget: 10_000,
        confirm_delay: 3,
        ledger_link: LinkPolicy::default(),
        default_link: LinkPolicy::default(),
        links: Vec::new(),
        policies: BTreeMap::new(),
        verifiers: Vec::new(),
        shared: None,
        vasps: Vec::new(),
        wallets: Vec::new(),
        actions: Vec::new(),
        drops: BTreeSet::new(),
        reorders: BTreeSet::new(),
        expectations: Vec::new(),
    };
    let mut declared: BTreeMap<String, (RefKind, usize)> = BTreeMap::new();
    let mut refs: Vec<(usize, usize, RefKind, String)> = Vec::new();
    let mut seen_metric = BTreeSet::new();
    let mut reorder_at: BTreeMap<u64, (usize, usize)> = BTreeMap::new();

    for (i, raw) in source.lines().enumerate() {
        let toks = tokenize(raw);
        let line = Line {
            no: i + 1,
            end_col: raw.chars().count(),
            toks,
        };
        let Some(head) = line.toks.first().copied() else {
            continue;
        };
        let mut declare = |t: Tok<'_>, kind: RefKind| -> Result<String, ScenarioError> {
            if let Some((_, first)) = declared.get(t.text) {
                return Err(line.err(
                    t.col,
                    format!("`{}` is already declared on line {first}", t.text),
                ));
            }
            declared.insert(t.text.to_string(), (kind, line.no));
            Ok(t.text.to_string())
        };
        match head.text {
            "scenario" => {
                let n = line.name(1, "a scenario name")?;
                if !sc.name.is_empty() {
                    return Err(line.err(head.col, "scenario name given twice"));
                }
                line.no_more(2)?;
                sc.name = n.text.to_string();
            }
            "budget" => {
                sc.budget = line.number(line.arg(1, "a tick budget")?)?;
                line.no_more(2)?;
            }
            "ledger" => {
                let opts = line.options(1, &["confirm", "delay", "drop"], &["reorder"])?;
                if let Some(c) = opts.num(&line, "confirm")? {
                    sc.confirm_delay = c;
                }
                sc.ledger_link = link_policy(&line, &opts, sc.ledger_link)?;
            }
            "link" => {
                let a = line.arg(1, "a sender name or `*`")?;
                if a.text == "default" {
                    let opts = line.options(2, &["delay", "drop"], &[])?;
                    sc.default_link = link_policy(&line, &opts, sc.default_link)?;
                    continue;
                }
                let b = line.arg(2, "a receiver name or `*`")?;
                for k in [1, 2] {
                    if line.toks[k].text != "*" {
                        let t = line.name(k, "an actor name or `*`")?;
                        refs.push((line.no, t.col, RefKind::Actor, t.text.to_string()));
                    }
                }
                let opts = line.options(3, &["delay", "drop"], &[])?;
                let p = link_policy(&line, &opts, sc.default_link)?;
                sc.links.push((a.text.to_string(), b.text.to_string(), p));
            }
            "policy" => {
                let id = line.name(1, "a policy id")?;
                if id.text == "baseline" {
                    return Err(line.err(id.col, "`baseline` is built in"));
                }
                let file = line.arg(2, "an overlay file name")?;
                line.no_more(3)?;
                let id = declare(id, RefKind::Policy)?;
                sc.policies.insert(id, file.text.to_string());
            }
            "verifier" => {
                let n = line.name(1, "a verifier name")?;
                line.no_more(2)?;
                let n = declare(n, RefKind::Verifier)?;
                sc.verifiers.push(n);
            }
            "shared" => {
                let n = line.name(1, "a verifier name")?;
                line.no_more(2)?;
                if sc.shared.is_some() {
                    return Err(line.err(head.col, "shared service given twice"));
                }
                refs.push((line.no, n.col, RefKind::Verifier, n.text.to_string()));
                sc.shared = Some(n.text.to_string());
            }
            "vasp" => {
                let n = line.name(1, "a VASP name")?;
                let opts = line.options(
                    2,
                    &["verifier", "jurisdiction", "min-loa", "limit", "policy"],
                    &["no-info-channel"],
                )?;
                let (verifier, vcol) = opts
                    .ident(&line, "verifier")?
                    .ok_or_else(|| line.err(n.col, "a VASP needs `verifier=<name>`"))?;
                refs.push((line.no, vcol, RefKind::Verifier, verifier.clone()));
                let jurisdiction = match opts.get("jurisdiction") {
                    None | Some(("open", _)) => JurisdictionKind::Open,
                    Some(("strict", _)) => JurisdictionKind::Strict,
                    Some(("private", _)) => JurisdictionKind::Private,
                    Some((v, col)) => {
                        return Err(line.err(col, format!("unknown jurisdiction `{v}`")))
                    }
                };
                let min_loa = match opts.num(&line, "min-loa")? {
                    None => 3,
                    Some(l @ 1..=4) => l as u8,
                    Some(_) => {
                        let col = opts.get("min-loa").map_or(n.col, |(_, c)| c);
                        return Err(line.err(col, "min-loa must be between 1 and 4"));
                    }
                };
                let policy = match opts.ident(&line, "policy")? {
                    Some((p, col)) => {
                        if p != "baseline" {
                            refs.push((line.no, col, RefKind::Policy, p.clone()));
                        }
                        p
                    }
                    None => "baseline".into(),
                };
                let name = declare(n, RefKind::Vasp)?;
                sc.vasps.push(VaspDecl {
                    name,
                    verifier,
                    jurisdiction,
                    min_loa,
                    daily_limit: opts.num(&line, "limit")?.unwrap_or(3000),
                    policy,
                    info_channel: !opts.flag("no-info-channel"),
                });
            }
            "wallet" => {
                let n = line.name(1, "a wallet name")?;
                let opts = line.options(2, &["model", "vasp", "funds"], &["migratable"])?;
                let model = match opts.get("model") {
                    Some((m, col)) if !MODELS.contains(&m) => {
                        return Err(line.err(col, format!("unknown device model `{m}`")))
                    }
                    Some((m, _)) => m.to_string(),
                    None => fixtures::MODEL_A.to_string(),
                };
                let vasp = opts.ident(&line, "vasp")?.map(|(v, col)| {
                    refs.push((line.no, col, RefKind::Vasp, v.clone()));
                    v
                });
                let name = declare(n, RefKind::Wallet)?;
                sc.wallets.push(WalletDecl {
                    name,
                    model,
                    vasp,
                    migratable: opts.flag("migratable"),
                    funds: opts.num(&line, "funds")?.unwrap_or(0),
                });
            }
            "at" => {
                let tick = line.number(line.arg(1, "a tick")?)?;
                let verb = line.arg(2, "an action")?;
                let wallet_ref = |k: usize, refs: &mut Vec<_>| -> Result<String, ScenarioError> {
                    let t = line.name(k, "a wallet name")?;
                    refs.push((line.no, t.col, RefKind::Wallet, t.text.to_string()));
                    Ok(t.text.to_string())
                };
                let action = match verb.text {
                    "onboard" | "attest" => {
                        let w = wallet_ref(3, &mut refs)?;
                        line.no_more(4)?;
                        if verb.text == "onboard" {
                            Action::Onboard(w)
                        } else {
                            Action::Attest(w)
                        }
                    }
                    "transfer" | "direct" | "cross" => {
                        let from = wallet_ref(3, &mut refs)?;
                        let to = wallet_ref(4, &mut refs)?;
                        let amount = line.number(line.arg(5, "an amount")?)?;
                        if verb.text == "cross" {
                            let opts = line.options(6, &["path"], &[])?;
                            let path = match opts.get("path") {
                                None | Some(("both", _)) => CrossPath::Both,
                                Some(("own", _)) => CrossPath::Own,
                                Some(("shared", _)) => CrossPath::Shared,
                                Some((v, col)) => {
                                    return Err(line.err(col, format!("unknown path `{v}`, expected own, shared or both")))
                                }
                            };
                            Action::Cross {
                                from,
                                to,
                                amount,
                                path,
                            }
                        } else {
                            line.no_more(6)?;
                            if verb.text == "transfer" {
                                Action::Transfer { from, to, amount }
                            } else {
                                Action::Direct { from, to, amount }
                            }
                        }
                    }
                    "discover" => {
                        let v = line.name(3, "a VASP name")?;
                        refs.push((line.no, v.col, RefKind::Vasp, v.text.to_string()));
                        let wallet = wallet_ref(4, &mut refs)?;
                        line.no_more(5)?;
                        Action::Discover {
                            vasp: v.text.to_string(),
                            wallet,
                        }
                    }
                    "recover" => {
                        let wallet = wallet_ref(3, &mut refs)?;
                        let opts = line.options(4, &["onto"], &[])?;
                        let onto = match opts.get("onto") {
                            Some((m, col)) if !MODELS.contains(&m) => {
                                return Err(line.err(col, format!("unknown device model `{m}`")))
                            }
                            other => other.map(|(m, _)| m.to_string()),
                        };
                        Action::Recover { wallet, onto }
                    }
                    "offboard" => {
                        let wallet = wallet_ref(3, &mut refs)?;
                        let opts = line.options(4, &[], &["move"])?;
                        Action::Offboard {
                            wallet,
                            move_assets: opts.flag("move"),
                        }
                    }
                    "reconcile" => {
                        let t = line.name(3, "a VASP name or `all`")?;
                        line.no_more(4)?;
                        if t.text == "all" {
                            Action::Reconcile(None)
                        } else {
                            refs.push((line.no, t.col, RefKind::Vasp, t.text.to_string()));
                            Action::Reconcile(Some(t.text.to_string()))
                        }
                    }
                    other => return Err(line.err(verb.col, format!("unknown action `{other}`"))),
                };
                sc.actions.push(Scheduled {
                    tick,
                    line: line.no,
                    action,
                });
            }
            "fault" => {
                let kind = line.arg(1, "`drop` or `reorder`")?;
                let n = line.arg(2, "a submission number")?;
                let k = line.number(n)?;
                if k == 0 {
                    return Err(line.err(n.col, "submissions are numbered from 1"));
                }
                line.no_more(3)?;
                let set = match kind.text {
                    "drop" => &mut sc.drops,
                    "reorder" => {
                        reorder_at.insert(k, (line.no, n.col));
                        &mut sc.reorders
                    }
                    other => return Err(line.err(kind.col, format!("unknown fault `{other}`"))),
                };
                if !set.insert(k) {
                    return Err(line.err(n.col, format!("fault on submission {k} given twice")));
                }
            }
            "expect" => {
                let m = line.arg(1, "a metric name")?;
                if !METRICS.contains(&m.text) {
                    return Err(line.err(m.col, format!("unknown metric `{}`", m.text)));
                }
                if !seen_metric.insert(m.text) {
                    return Err(line.err(m.col, format!("metric `{}` expected twice", m.text)));
                }
                let value = line.number(line.arg(2, "a value")?)?;
                line.no_more(3)?;
                sc.expectations.push(Expectation {
                    metric: m.text.to_string(),
                    value,
                    line: line.no,
                });
            }
            other => return Err(line.err(head.col, format!("unknown statement `{other}`"))),
        }
    }

    for (line, col, kind, name) in refs {
        match declared.get(&name) {
            Some((k, _)) if *k == kind => {}
            Some((k, _)) if kind == RefKind::Actor && *k != RefKind::Policy => {}
            _ => {
                return Err(ScenarioError {
                    line,
                    col,
                    message: format!("undeclared {} `{name}`", kind.label()),
                })
            }
        }
    }
    for (k, (line, col)) in &reorder_at {
        if sc.drops.contains(k) || sc.drops.contains(&(k + 1)) || sc.reorders.contains(&(k + 1)) {
            return Err(ScenarioError {
                line: *line,
                col: *col,
                message: format!("reorder of submission {k} overlaps another fault"),
            });
        }
    }
    if sc.name.is_empty() {
        return Err(ScenarioError {
            line: 1,
            col: 1,
            message: "missing `scenario <name>`".into(),
        });
    }
    Ok(sc)
}
