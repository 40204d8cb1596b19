//! Recursive-descent parser. After a syntax error the parser skips to the
//! next declaration keyword, so one pass reports every independent error.

use crate::model::{CmpOp, ScalarKind, Value};
use crate::objectives::{Aggregator, Direction};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, Span};

const DECL_KEYWORDS: [&str; 7] = ["param", "quality", "preferences", "goal", "condition", "option", "rule"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

/// Marker for an error already recorded in `diags`.
struct Reported;

type PResult<T> = Result<T, Reported>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span.clone()
    }

    fn prev_end(&self) -> Span {
        if self.pos == 0 {
            self.span()
        } else {
            self.toks[self.pos - 1].end.clone()
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        // A missing `;` is reported where it belongs: after the previous token.
        let span = if expected == "`;`" {
            self.prev_end()
        } else {
            self.span()
        };
        let msg = format!("expected {expected}, found {}", self.peek());
        self.diags.push(Diagnostic::error("syntax", msg, Some(span)));
        Err(Reported)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(&t.to_string())
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        if let Tok::Ident(s) = self.peek() {
            let text = s.clone();
            let span = self.bump().span;
            Ok(Name { text, span })
        } else {
            self.fail(what)
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        let x = match *self.peek() {
            Tok::Int(i) => i as f64,
            Tok::Float(x) => x,
            _ => return self.fail("a number"),
        };
        self.bump();
        Ok(if neg { -x } else { x })
    }

    fn literal(&mut self) -> PResult<Value> {
        if self.is_kw("true") || self.is_kw("false") {
            let b = self.is_kw("true");
            self.bump();
            return Ok(Value::Bool(b));
        }
        let neg = self.eat(&Tok::Minus);
        let v = match self.peek().clone() {
            Tok::Int(i) => Value::Int(if neg { -i } else { i }),
            Tok::Float(x) => Value::Float(if neg { -x } else { x }),
            Tok::Str(s) if !neg => Value::Str(s),
            _ => return self.fail("a literal"),
        };
        self.bump();
        Ok(v)
    }

    fn kind(&mut self) -> PResult<ScalarKind> {
        let name = self.ident("a type (`int`, `float`, `string`, `bool`)")?;
        match ScalarKind::parse(&name.text) {
            Some(k) => Ok(k),
            None => {
                self.diags.push(Diagnostic::error(
                    "syntax",
                    format!("unknown scalar type `{}`", name.text),
                    Some(name.span),
                ));
                Err(Reported)
            }
        }
    }

    fn cmp_op(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return self.fail("a comparison operator"),
        };
        self.bump();
        Ok(op)
    }

    fn rhs(&mut self) -> PResult<Rhs> {
        match self.peek() {
            Tok::Ident(s) if s != "true" && s != "false" => {
                let first = self.ident("a name")?;
                if self.eat(&Tok::Dot) {
                    let attr = self.ident("an attribute name")?;
                    Ok(Rhs::Attr(first, attr))
                } else {
                    Ok(Rhs::Name(first))
                }
            }
            _ => Ok(Rhs::Literal(self.literal()?)),
        }
    }

    fn cmp(&mut self) -> PResult<CmpAst> {
        let var = self.ident("a variable")?;
        self.expect(Tok::Dot)?;
        let attr = self.ident("an attribute name")?;
        let op = self.cmp_op()?;
        let rhs = self.rhs()?;
        Ok(CmpAst { var, attr, op, rhs })
    }

    fn conjunction(&mut self) -> PResult<Vec<CmpAst>> {
        let mut out = vec![self.cmp()?];
        while self.eat_kw("and") {
            out.push(self.cmp()?);
        }
        Ok(out)
    }

    fn clause(&mut self) -> PResult<Clause> {
        if self.is_kw("not") && *self.peek_at(1) == Tok::LParen {
            self.bump();
            self.bump();
            let inner = self.pattern()?;
            self.expect(Tok::RParen)?;
            return Ok(Clause::Not(inner));
        }
        let first = self.ident("a node type or variable")?;
        if self.eat(&Tok::Minus) {
            let edge_type = self.ident("an edge type")?;
            self.expect(Tok::Arrow)?;
            let target = self.ident("a variable")?;
            return Ok(Clause::Edge {
                source: first,
                edge_type,
                target,
            });
        }
        let anchor = self.eat(&Tok::At);
        let var = self.ident("a variable name")?;
        Ok(Clause::Node {
            node_type: first,
            var,
            anchor,
        })
    }

    fn pattern(&mut self) -> PResult<PatternAst> {
        let span = self.span();
        let mut clauses = vec![self.clause()?];
        while self.eat(&Tok::Comma) {
            clauses.push(self.clause()?);
        }
        let conditions = if self.eat_kw("where") {
            self.conjunction()?
        } else {
            Vec::new()
        };
        Ok(PatternAst {
            clauses,
            conditions,
            span,
        })
    }

    fn param(&mut self) -> PResult<Decl> {
        self.expect_kw("param")?;
        let name = self.ident("a parameter name")?;
        self.expect(Tok::Colon)?;
        let kind = self.kind()?;
        self.expect(Tok::Eq)?;
        let value_span = self.span();
        let value = self.literal()?;
        self.expect(Tok::Semi)?;
        Ok(Decl::Param(ParamAst {
            name,
            kind,
            value,
            value_span,
        }))
    }

    fn quality(&mut self) -> PResult<Decl> {
        self.expect_kw("quality")?;
        let name = self.ident("a quality name")?;
        self.expect(Tok::LBrace)?;
        self.expect_kw("metric")?;
        let agg_name = self.ident("an aggregator")?;
        let Some(aggregator) = Aggregator::parse(&agg_name.text) else {
            self.diags.push(Diagnostic::error(
                "syntax",
                format!(
                    "unknown aggregator `{}` (expected avg, min, max, sum, fraction)",
                    agg_name.text
                ),
                Some(agg_name.span),
            ));
            return Err(Reported);
        };
        self.expect(Tok::LParen)?;
        let node_type = self.ident("a node type")?;
        let attribute = if self.eat(&Tok::Dot) {
            Some(self.ident("an attribute name")?)
        } else {
            None
        };
        let mut filter = Vec::new();
        if self.eat_kw("where") {
            loop {
                let attr = self.ident("an attribute name")?;
                let op = self.cmp_op()?;
                let rhs = self.rhs()?;
                filter.push(FilterAst { attr, op, rhs });
                if !self.eat_kw("and") {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        self.expect_kw("direction")?;
        let direction = if self.eat_kw("minimize") {
            Direction::Minimize
        } else if self.eat_kw("maximize") {
            Direction::Maximize
        } else {
            return self.fail("`minimize` or `maximize`");
        };
        self.expect(Tok::Semi)?;
        self.expect_kw("bounds")?;
        self.expect(Tok::LBracket)?;
        let lo = self.number()?;
        self.expect(Tok::Comma)?;
        let hi = self.number()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Semi)?;
        self.expect(Tok::RBrace)?;
        Ok(Decl::Quality(QualityAst {
            name,
            aggregator,
            node_type,
            attribute,
            filter,
            direction,
            lo,
            hi,
        }))
    }

    fn weights(&mut self) -> PResult<Vec<(Name, f64)>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let q = self.ident("a quality name or `}`")?;
            self.expect(Tok::Eq)?;
            let w = self.number()?;
            self.expect(Tok::Semi)?;
            out.push((q, w));
        }
        Ok(out)
    }

    fn preferences(&mut self) -> PResult<Decl> {
        let span = self.span();
        self.expect_kw("preferences")?;
        let weights = self.weights()?;
        Ok(Decl::Preferences(PreferencesAst { span, weights }))
    }

    fn goal(&mut self) -> PResult<Decl> {
        self.expect_kw("goal")?;
        let name = self.ident("a goal name")?;
        self.expect(Tok::LBrace)?;
        let require = if self.eat_kw("require") {
            true
        } else if self.eat_kw("forbid") {
            false
        } else {
            return self.fail("`require` or `forbid`");
        };
        let pattern = self.pattern()?;
        self.eat(&Tok::Semi);
        self.expect(Tok::RBrace)?;
        Ok(Decl::Goal(GoalAst { name, require, pattern }))
    }

    fn event_kind(&mut self) -> PResult<Name> {
        let mut name = self.ident("an event kind")?;
        while *self.peek() == Tok::Minus {
            self.bump();
            let part = self.ident("an event kind")?;
            name.text.push('-');
            name.text.push_str(&part.text);
        }
        Ok(name)
    }

    fn condition(&mut self) -> PResult<Decl> {
        self.expect_kw("condition")?;
        let name = self.ident("a condition name")?;
        self.expect_kw("priority")?;
        let neg = self.eat(&Tok::Minus);
        let priority = match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                if neg {
                    -i
                } else {
                    i
                }
            }
            _ => return self.fail("an integer priority"),
        };
        self.expect_kw("lane")?;
        let fast = if self.eat_kw("fast") {
            true
        } else if self.eat_kw("slow") {
            false
        } else {
            return self.fail("`fast` or `slow`");
        };
        let linked = if self.eat_kw("for") {
            Some(self.ident("a quality or goal name")?)
        } else {
            None
        };
        let mut triggers = Vec::new();
        while self.eat_kw("on") {
            self.expect(Tok::LParen)?;
            let kind = self.event_kind()?;
            let attribute = if self.eat(&Tok::Comma) {
                Some(self.ident("an attribute name")?)
            } else {
                None
            };
            self.expect(Tok::RParen)?;
            triggers.push(TriggerAst { kind, attribute });
        }
        self.expect(Tok::LBrace)?;
        let pattern = self.pattern()?;
        self.eat(&Tok::Semi);
        self.expect(Tok::RBrace)?;
        Ok(Decl::Condition(ConditionAst {
            name,
            priority,
            fast,
            linked,
            triggers,
            pattern,
        }))
    }

    fn edit(&mut self) -> PResult<EditAst> {
        let kw = self.ident("`set`, `clone`, `link`, `unlink` or `delete`")?;
        match kw.text.as_str() {
            "set" => {
                let var = self.ident("a variable")?;
                self.expect(Tok::Dot)?;
                let attr = self.ident("an attribute name")?;
                self.expect(Tok::Eq)?;
                let value = self.rhs()?;
                Ok(EditAst::Set { var, attr, value })
            }
            "clone" => {
                let source = self.ident("a variable")?;
                self.expect_kw("as")?;
                let new_var = self.ident("a new variable name")?;
                Ok(EditAst::Clone { source, new_var })
            }
            "link" | "unlink" => {
                let source = self.ident("a variable")?;
                self.expect(Tok::Minus)?;
                let edge_type = self.ident("an edge type")?;
                self.expect(Tok::Arrow)?;
                let target = self.ident("a variable")?;
                Ok(if kw.text == "link" {
                    EditAst::Link {
                        source,
                        edge_type,
                        target,
                    }
                } else {
                    EditAst::Unlink {
                        source,
                        edge_type,
                        target,
                    }
                })
            }
            "delete" => Ok(EditAst::Delete {
                var: self.ident("a variable")?,
            }),
            other => {
                let msg = format!("expected `set`, `clone`, `link`, `unlink` or `delete`, found `{other}`");
                self.diags.push(Diagnostic::error("syntax", msg, Some(kw.span)));
                Err(Reported)
            }
        }
    }

    fn option(&mut self) -> PResult<Decl> {
        self.expect_kw("option")?;
        let name = self.ident("an option name")?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let pname = self.ident("a parameter name")?;
                self.expect(Tok::Colon)?;
                let kind = self.kind()?;
                self.expect(Tok::Eq)?;
                let default = self.literal()?;
                params.push(FormalAst {
                    name: pname,
                    kind,
                    default,
                });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        self.expect(Tok::LBrace)?;
        self.expect_kw("pre")?;
        let pre = self.pattern()?;
        self.expect(Tok::Semi)?;
        let body = if self.eat_kw("effect") {
            let mut edits = vec![self.edit()?];
            while *self.peek() != Tok::Semi {
                self.eat(&Tok::Comma);
                edits.push(self.edit()?);
            }
            BodyAst::Effect(edits)
        } else if self.eat_kw("compose") {
            let mut parts = vec![self.ident("an option name")?];
            while *self.peek() != Tok::Semi {
                self.eat(&Tok::Comma);
                parts.push(self.ident("an option name")?);
            }
            BodyAst::Compose(parts)
        } else {
            return self.fail("`effect` or `compose`");
        };
        self.expect(Tok::Semi)?;
        self.expect_kw("post")?;
        let post = if self.eat_kw("true") {
            Vec::new()
        } else {
            self.conjunction()?
        };
        self.expect(Tok::Semi)?;
        let mut invariants = Vec::new();
        while self.eat_kw("invariant") {
            invariants.push(self.pattern()?);
            self.expect(Tok::Semi)?;
        }
        self.expect_kw("cost")?;
        let cost = self.number()?;
        self.expect(Tok::Semi)?;
        let benefit = if self.eat_kw("benefit") {
            self.weights()?
        } else {
            Vec::new()
        };
        self.expect(Tok::RBrace)?;
        Ok(Decl::Option(OptionAst {
            name,
            params,
            pre,
            body,
            post,
            invariants,
            cost,
            benefit,
        }))
    }

    fn rule(&mut self) -> PResult<Decl> {
        self.expect_kw("rule")?;
        let name = self.ident("a rule name")?;
        self.expect(Tok::Colon)?;
        self.expect_kw("when")?;
        let condition = self.ident("a condition name")?;
        self.expect_kw("do")?;
        let mut actions = Vec::new();
        loop {
            let option = self.ident("an option name")?;
            let mut args = Vec::new();
            if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
                loop {
                    let n = self.ident("a parameter name")?;
                    self.expect(Tok::Eq)?;
                    let v = self.literal()?;
                    args.push((n, v));
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma)?;
                }
            }
            actions.push(ActionAst { option, args });
            self.eat(&Tok::Comma);
            if *self.peek() == Tok::Semi || !matches!(self.peek(), Tok::Ident(_)) {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(Decl::Rule(RuleAst {
            name,
            condition,
            actions,
        }))
    }

    fn decl(&mut self) -> PResult<Decl> {
        match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "param" => self.param(),
                "quality" => self.quality(),
                "preferences" => self.preferences(),
                "goal" => self.goal(),
                "condition" => self.condition(),
                "option" => self.option(),
                "rule" => self.rule(),
                _ => self.fail("a declaration"),
            },
            _ => self.fail("a declaration"),
        }
    }

    fn recover(&mut self) {
        self.bump();
        while *self.peek() != Tok::Eof {
            if DECL_KEYWORDS.iter().any(|k| self.is_kw(k)) {
                return;
            }
            self.bump();
        }
    }
}

/// Parses one `.adm` file. Returns every syntax error found.
pub fn parse(text: &str, file: &str) -> Result<SourceFile, Vec<Diagnostic>> {
    let (toks, diags) = lex(text, file);
    let mut p = Parser { toks, pos: 0, diags };
    let name = (|| -> PResult<Name> {
        p.expect_kw("adaptation")?;
        let n = p.ident("a model name")?;
        p.expect(Tok::Semi)?;
        Ok(n)
    })();
    let name = match name {
        Ok(n) => n,
        Err(Reported) => {
            p.recover();
            Name {
                text: String::new(),
                span: Span::default(),
            }
        }
    };
    let mut decls = Vec::new();
    while *p.peek() != Tok::Eof {
        match p.decl() {
            Ok(d) => decls.push(d),
            Err(Reported) => p.recover(),
        }
    }
    if p.diags.is_empty() {
        Ok(SourceFile {
            file: file.to_string(),
            name,
            decls,
        })
    } else {
        Err(p.diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_declaration() {
        let f = parse("adaptation a;\nparam MAX_RT: float = 500;", "a.adm").unwrap();
        assert_eq!(f.name.text, "a");
        let Decl::Param(p) = &f.decls[0] else { panic!() };
        assert_eq!(p.name.text, "MAX_RT");
        assert_eq!(p.kind, ScalarKind::Float);
        assert_eq!(p.value, Value::Int(500));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse("adaptation empty;", "e.adm").unwrap().decls.is_empty());
    }

    #[test]
    fn missing_semicolon_names_its_line() {
        let errs = parse("adaptation a;\nparam A: int = 1\nparam B: int = 2;", "a.adm").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span.as_ref().unwrap().line, 2);
        assert!(errs[0].message.contains("`;`"));
    }

    #[test]
    fn reports_independent_errors() {
        let src = "adaptation a;\nparam A int = 1;\nparam B: int = 2;\ngoal G { maybe C c }\n";
        let errs = parse(src, "a.adm").unwrap_err();
        let lines: Vec<_> = errs.iter().map(|d| d.span.as_ref().unwrap().line).collect();
        assert_eq!(lines, [2, 4]);
    }

    #[test]
    fn condition_with_triggers() {
        let src = r#"adaptation a;
            condition FailedComp priority 10 lane fast on (attr-changed, state) on (node-added) {
                Component @c, c -deployedOn-> s, Server s, not (Component d, d -connects-> c) where c.state = "FAILED"
            }"#;
        let f = parse(src, "a.adm").unwrap();
        let Decl::Condition(c) = &f.decls[0] else { panic!() };
        assert_eq!(c.triggers[0].kind.text, "attr-changed");
        assert_eq!(c.triggers[1].kind.text, "node-added");
        assert_eq!(c.pattern.clauses.len(), 4);
        assert!(matches!(c.pattern.clauses[3], Clause::Not(_)));
        assert_eq!(c.pattern.conditions.len(), 1);
    }

    #[test]
    fn option_and_rule() {
        let src = r#"adaptation a;
            option AddReplica(n: int = 1) {
                pre Component @c, Server s, c -deployedOn-> s where c.rt > MAX_RT;
                effect clone c as r, link r -deployedOn-> s;
                post true;
                invariant Component x where x.load < 0;
                cost 5;
                benefit { perf = 0.2; }
            }
            rule Scale: when HighRT do AddReplica(n = 2) RestartComponent;"#;
        let f = parse(src, "a.adm").unwrap();
        let Decl::Option(o) = &f.decls[0] else { panic!() };
        assert_eq!(o.params.len(), 1);
        assert!(matches!(&o.body, BodyAst::Effect(e) if e.len() == 2));
        assert!(o.post.is_empty());
        assert_eq!(o.invariants.len(), 1);
        let Decl::Rule(r) = &f.decls[1] else { panic!() };
        assert_eq!(r.actions.len(), 2);
        assert_eq!(r.actions[0].args[0].1, Value::Int(2));
    }
}
