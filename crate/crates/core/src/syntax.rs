//! Textual domain/problem language: parser and printer.
//!
//! The format is line oriented. `#` starts a comment. Identifiers follow the
//! Prolog-style lexical rule: uppercase-first names are variables. A fluent
//! term is `1` (the unit) or a comma-separated list of fluents; a CN-state
//! appends negated members with `; not <fluent term>`.
//!
//! ```text
//! domain bw
//! gamma 1
//!
//! fluents:
//!   on/2
//!   e/0
//!
//! action pickup(X, Y):
//!   pre: on(X, Y), e ; not on(W, X)
//!   choice pickupS prob 0.75:
//!     eff: holding(X) ; not on(X, Y)
//!   choice pickupF prob 0.25:
//!     eff: on(X, Y), e ; not on(W, X)
//!   cost: -3
//!
//! reward: on(X, a) -> 500 absorbing
//! reward default: 0
//! ```

use crate::action::{NatureChoice, RewardModel, RewardRule, StochasticAction};
use crate::domain::{DomainSpec, FluentDecl, ProblemSpec};
use crate::error::{Error, Result};
use crate::state::CNState;
use crate::term::{is_variable_name, Fluent, FluentTerm, GroundState, Substitution, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Slash,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(s) => format!("number `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Arrow => "`->`".into(),
        }
    }
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
            }
            '(' => {
                out.push((col, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((col, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((col, Tok::Comma));
                i += 1;
            }
            ';' => {
                out.push((col, Tok::Semi));
                i += 1;
            }
            ':' => {
                out.push((col, Tok::Colon));
                i += 1;
            }
            '/' => {
                out.push((col, Tok::Slash));
                i += 1;
            }
            '-' if i + 1 < chars.len() && chars[i + 1] == '>' => {
                out.push((col, Tok::Arrow));
                i += 2;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((col, Tok::Ident(chars[start..i].iter().collect())));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign =
                        (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((col, Tok::Num(chars[start..i].iter().collect())));
            }
            other => {
                return Err(Error::parse(
                    line_no,
                    col,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
    }
    Ok(out)
}

struct Cur {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    line: usize,
}

impl Cur {
    fn new(toks: Vec<(usize, Tok)>, line: usize) -> Cur {
        Cur { toks, pos: 0, line }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(c, _)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::parse(self.line, self.col(), message))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: &Tok) -> Result<()> {
        match self.next() {
            Some(t) if &t == tok => Ok(()),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected {}, found {}", tok.describe(), t.describe()))
            }
            None => self.err(format!("expected {}", tok.describe())),
        }
    }

    fn expect_ident(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {}", t.describe()))
            }
            None => self.err("expected identifier"),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        let s = self.expect_ident()?;
        if s == kw {
            Ok(())
        } else {
            self.pos -= 1;
            self.err(format!("expected `{kw}`, found `{s}`"))
        }
    }

    fn expect_number(&mut self) -> Result<f64> {
        match self.next() {
            Some(Tok::Num(s)) => s.parse::<f64>().map_err(|_| {
                Error::parse(self.line, self.col(), format!("malformed number `{s}`"))
            }),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected number, found {}", t.describe()))
            }
            None => self.err("expected number"),
        }
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(Error::parse(
                self.line,
                self.col(),
                format!(
                    "unexpected trailing {}",
                    self.toks[self.pos].1.describe()
                ),
            ))
        }
    }
}

fn parse_fluent(cur: &mut Cur) -> Result<Fluent> {
    let symbol = cur.expect_ident()?;
    if is_variable_name(&symbol) {
        cur.pos -= 1;
        return cur.err(format!(
            "fluent symbol `{symbol}` must not start uppercase"
        ));
    }
    let mut args = Vec::new();
    if cur.peek() == Some(&Tok::LParen) {
        cur.next();
        loop {
            let name = cur.expect_ident()?;
            args.push(Term::from_name(&name));
            match cur.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                Some(t) => {
                    cur.pos -= 1;
                    return cur.err(format!("expected `,` or `)`, found {}", t.describe()));
                }
                None => return cur.err("unterminated argument list"),
            }
        }
    }
    Ok(Fluent::new(symbol, args))
}

fn parse_fluent_term(cur: &mut Cur) -> Result<FluentTerm> {
    if let Some(Tok::Num(s)) = cur.peek() {
        if s == "1" {
            cur.next();
            return Ok(FluentTerm::unit());
        }
    }
    let mut fluents = vec![parse_fluent(cur)?];
    while cur.peek() == Some(&Tok::Comma) {
        cur.next();
        fluents.push(parse_fluent(cur)?);
    }
    Ok(FluentTerm::from_fluents(fluents))
}

fn parse_cn_state(cur: &mut Cur) -> Result<CNState> {
    let positive = parse_fluent_term(cur)?;
    let mut negations = Vec::new();
    while cur.peek() == Some(&Tok::Semi) {
        cur.next();
        cur.expect_keyword("not")?;
        let member = parse_fluent_term(cur)?;
        if member.is_empty() {
            return cur.err("negated member must not be the unit 1");
        }
        negations.push(member);
    }
    Ok(CNState::new(positive, negations))
}

/// Parse a CN-state from a bare string (used by the value/policy formats).
pub fn parse_cn_state_str(text: &str, line_no: usize) -> Result<CNState> {
    let mut cur = Cur::new(tokenize(text, line_no)?, line_no);
    let z = parse_cn_state(&mut cur)?;
    cur.expect_end()?;
    Ok(z)
}

/// Parse a substitution in the compact `X=a, Y=b` form; `-` is empty.
pub fn parse_subst_str(text: &str, line_no: usize) -> Result<Substitution> {
    let text = text.trim();
    if text == "-" || text.is_empty() {
        return Ok(Substitution::empty());
    }
    let mut subst = Substitution::empty();
    for part in text.split(',') {
        let mut halves = part.splitn(2, '=');
        let var = halves.next().unwrap_or("").trim();
        let image = halves.next().map(str::trim);
        let Some(image) = image else {
            return Err(Error::parse(
                line_no,
                1,
                format!("malformed binding `{part}` (expected VAR=term)"),
            ));
        };
        if !is_variable_name(var) {
            return Err(Error::parse(
                line_no,
                1,
                format!("binding of non-variable `{var}`"),
            ));
        }
        subst.bind(var, Term::from_name(image));
    }
    Ok(subst)
}

/// Render a substitution in the compact form used by policy files.
pub fn subst_to_compact(theta: &Substitution) -> String {
    if theta.is_empty() {
        return "-".to_string();
    }
    theta
        .iter()
        .map(|(v, t)| format!("{v}={t}"))
        .collect::<Vec<_>>()
        .join(",")
}

struct ActionBuilder {
    line: usize,
    name: String,
    params: Vec<String>,
    pre: Option<CNState>,
    choices: Vec<(String, f64, Option<CNState>)>,
    cost: Option<f64>,
}

impl ActionBuilder {
    fn finish(self) -> Result<StochasticAction> {
        let fail = |msg: String| Err(Error::parse(self.line, 1, msg));
        let Some(pre) = self.pre else {
            return fail(format!("action {} has no pre:", self.name));
        };
        let Some(cost) = self.cost else {
            return fail(format!("action {} has no cost:", self.name));
        };
        if self.choices.is_empty() {
            return fail(format!("action {} has no choices", self.name));
        }
        let mut choices = Vec::new();
        for (name, prob, eff) in self.choices {
            let Some(eff) = eff else {
                return fail(format!("choice {name} of {} has no eff:", self.name));
            };
            choices.push(NatureChoice {
                name,
                params: self.params.clone(),
                pre: pre.clone(),
                eff,
                prob,
            });
        }
        Ok(StochasticAction {
            name: self.name,
            params: self.params,
            choices,
            cost,
        })
    }
}

/// Parse and validate a domain file.
pub fn parse_domain(text: &str) -> Result<DomainSpec> {
    let mut name: Option<String> = None;
    let mut gamma: Option<f64> = None;
    let mut fluents: Vec<FluentDecl> = Vec::new();
    let mut actions: Vec<StochasticAction> = Vec::new();
    let mut rules: Vec<RewardRule> = Vec::new();
    let mut default_value: Option<f64> = None;
    let mut in_fluents = false;
    let mut building: Option<ActionBuilder> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cur::new(toks, line_no);
        let head = match cur.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return cur.err("expected a keyword or declaration"),
        };
        match head.as_str() {
            "domain" => {
                in_fluents = false;
                cur.next();
                name = Some(cur.expect_ident()?);
                cur.expect_end()?;
            }
            "gamma" => {
                in_fluents = false;
                cur.next();
                gamma = Some(cur.expect_number()?);
                cur.expect_end()?;
            }
            "fluents" => {
                cur.next();
                cur.expect(&Tok::Colon)?;
                cur.expect_end()?;
                in_fluents = true;
            }
            "action" => {
                in_fluents = false;
                if let Some(b) = building.take() {
                    actions.push(b.finish()?);
                }
                cur.next();
                let action_name = cur.expect_ident()?;
                let mut params = Vec::new();
                if cur.peek() == Some(&Tok::LParen) {
                    cur.next();
                    loop {
                        let p = cur.expect_ident()?;
                        if !is_variable_name(&p) {
                            cur.pos -= 1;
                            return cur.err(format!(
                                "parameter `{p}` must be a variable (uppercase-first)"
                            ));
                        }
                        params.push(p);
                        match cur.next() {
                            Some(Tok::Comma) => continue,
                            Some(Tok::RParen) => break,
                            _ => return cur.err("expected `,` or `)` in parameter list"),
                        }
                    }
                }
                cur.expect(&Tok::Colon)?;
                cur.expect_end()?;
                building = Some(ActionBuilder {
                    line: line_no,
                    name: action_name,
                    params,
                    pre: None,
                    choices: Vec::new(),
                    cost: None,
                });
            }
            "pre" => {
                cur.next();
                cur.expect(&Tok::Colon)?;
                let z = parse_cn_state(&mut cur)?;
                cur.expect_end()?;
                match building.as_mut() {
                    Some(b) => b.pre = Some(z),
                    None => return cur.err("pre: outside an action"),
                }
            }
            "choice" => {
                cur.next();
                let choice_name = cur.expect_ident()?;
                cur.expect_keyword("prob")?;
                let prob = cur.expect_number()?;
                cur.expect(&Tok::Colon)?;
                cur.expect_end()?;
                match building.as_mut() {
                    Some(b) => b.choices.push((choice_name, prob, None)),
                    None => return cur.err("choice outside an action"),
                }
            }
            "eff" => {
                cur.next();
                cur.expect(&Tok::Colon)?;
                let z = parse_cn_state(&mut cur)?;
                cur.expect_end()?;
                let slot = building
                    .as_mut()
                    .and_then(|b| b.choices.last_mut())
                    .filter(|(_, _, eff)| eff.is_none());
                match slot {
                    Some((_, _, eff)) => *eff = Some(z),
                    None => return cur.err("eff: without a preceding choice"),
                }
            }
            "cost" => {
                cur.next();
                cur.expect(&Tok::Colon)?;
                let c = cur.expect_number()?;
                cur.expect_end()?;
                match building.as_mut() {
                    Some(b) => b.cost = Some(c),
                    None => return cur.err("cost: outside an action"),
                }
            }
            "reward" => {
                in_fluents = false;
                if let Some(b) = building.take() {
                    actions.push(b.finish()?);
                }
                cur.next();
                if let Some(Tok::Ident(s)) = cur.peek() {
                    if s == "default" {
                        cur.next();
                        cur.expect(&Tok::Colon)?;
                        default_value = Some(cur.expect_number()?);
                        cur.expect_end()?;
                        continue;
                    }
                }
                cur.expect(&Tok::Colon)?;
                let condition = parse_cn_state(&mut cur)?;
                cur.expect(&Tok::Arrow)?;
                let value = cur.expect_number()?;
                let absorbing = match cur.peek() {
                    Some(Tok::Ident(s)) if s == "absorbing" => {
                        cur.next();
                        true
                    }
                    _ => false,
                };
                cur.expect_end()?;
                rules.push(RewardRule {
                    condition,
                    value,
                    absorbing,
                });
            }
            _ if in_fluents => {
                let symbol = cur.expect_ident()?;
                cur.expect(&Tok::Slash)?;
                let arity = cur.expect_number()?;
                cur.expect_end()?;
                if arity < 0.0 || arity.fract() != 0.0 {
                    return cur.err(format!("arity `{arity}` must be a natural number"));
                }
                fluents.push(FluentDecl {
                    symbol,
                    arity: arity as usize,
                });
            }
            other => {
                return cur.err(format!("unknown keyword `{other}`"));
            }
        }
    }
    if let Some(b) = building.take() {
        actions.push(b.finish()?);
    }

    let Some(name) = name else {
        return Err(Error::parse(1, 1, "missing `domain <name>` line"));
    };
    let Some(gamma) = gamma else {
        return Err(Error::parse(1, 1, "missing `gamma <value>` line"));
    };
    let spec = DomainSpec {
        name,
        fluents,
        actions,
        reward: RewardModel {
            rules,
            default_value: default_value
                .ok_or_else(|| Error::parse(1, 1, "missing `reward default:` line"))?,
        },
        gamma,
    };
    spec.validate()?;
    Ok(spec)
}

/// Parse and validate a problem file against a loaded domain.
pub fn parse_problem(text: &str, dom: &DomainSpec) -> Result<ProblemSpec> {
    let mut name: Option<String> = None;
    let mut domain: Option<String> = None;
    let mut horizon: Option<usize> = None;
    let mut initial_states: Vec<GroundState> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cur::new(toks, line_no);
        let head = cur.expect_ident()?;
        match head.as_str() {
            "problem" => {
                name = Some(cur.expect_ident()?);
                cur.expect_end()?;
            }
            "domain" => {
                domain = Some(cur.expect_ident()?);
                cur.expect_end()?;
            }
            "horizon" => {
                let h = cur.expect_number()?;
                cur.expect_end()?;
                if h < 1.0 || h.fract() != 0.0 {
                    return cur.err("horizon must be a positive integer");
                }
                horizon = Some(h as usize);
            }
            "init" => {
                cur.expect(&Tok::Colon)?;
                let term = parse_fluent_term(&mut cur)?;
                cur.expect_end()?;
                if !term.is_ground() {
                    return cur.err("initial states must be ground");
                }
                initial_states.push(GroundState::from(term));
            }
            other => return cur.err(format!("unknown keyword `{other}`")),
        }
    }

    let spec = ProblemSpec {
        name: name.ok_or_else(|| Error::parse(1, 1, "missing `problem <name>` line"))?,
        domain: domain.ok_or_else(|| Error::parse(1, 1, "missing `domain <name>` line"))?,
        initial_states,
        horizon: horizon.unwrap_or(1000),
    };
    spec.validate(dom)?;
    Ok(spec)
}

/// Render a domain spec in the textual format. Parsing the output yields an
/// equal spec.
pub fn domain_to_string(dom: &DomainSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("domain {}\n", dom.name));
    out.push_str(&format!("gamma {}\n\n", dom.gamma));
    out.push_str("fluents:\n");
    for d in &dom.fluents {
        out.push_str(&format!("  {}/{}\n", d.symbol, d.arity));
    }
    for action in &dom.actions {
        out.push('\n');
        if action.params.is_empty() {
            out.push_str(&format!("action {}:\n", action.name));
        } else {
            out.push_str(&format!(
                "action {}({}):\n",
                action.name,
                action.params.join(", ")
            ));
        }
        out.push_str(&format!("  pre: {}\n", action.pre()));
        for choice in &action.choices {
            out.push_str(&format!(
                "  choice {} prob {}:\n    eff: {}\n",
                choice.name, choice.prob, choice.eff
            ));
        }
        out.push_str(&format!("  cost: {}\n", action.cost));
    }
    out.push('\n');
    for rule in &dom.reward.rules {
        out.push_str(&format!(
            "reward: {} -> {}{}\n",
            rule.condition,
            rule.value,
            if rule.absorbing { " absorbing" } else { "" }
        ));
    }
    out.push_str(&format!("reward default: {}\n", dom.reward.default_value));
    out
}

/// Render a problem spec in the textual format.
pub fn problem_to_string(p: &ProblemSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("problem {}\n", p.name));
    out.push_str(&format!("domain {}\n", p.domain));
    out.push_str(&format!("horizon {}\n", p.horizon));
    for d in &p.initial_states {
        out.push_str(&format!("init: {d}\n"));
    }
    out
}
