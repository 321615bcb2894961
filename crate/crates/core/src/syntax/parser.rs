use super::lexer::{tokenize, Tok, Token};
use super::span::LineIndex;
use super::tree::{NodeKind, Phase, SyntaxNode, SyntaxTree};
use super::{ParseError, SourceFile};
use crate::num::parse_decimal;
use crate::scalar::Scalar;

/// Nesting limit; deeper inputs are rejected instead of exhausting the stack.
const MAX_DEPTH: usize = 200;

/// Parses a whole program.
pub fn parse(source: &SourceFile) -> Result<SyntaxTree, ParseError> {
    parse_text(&source.text)
}

pub fn parse_text(text: &str) -> Result<SyntaxTree, ParseError> {
    let index = LineIndex::new(text);
    let tokens = tokenize(text).map_err(|e| ParseError::from(e).locate(&index, text))?;
    let mut p = Parser { text, index: &index, tokens, pos: 0, inflight_depth: 0, depth: 0 };
    let root = p.program().map_err(|e| e.locate(&index, text))?;
    Ok(SyntaxTree { text: text.to_string(), root })
}

/// Parses a single expression spanning the whole text (after trimming
/// whitespace and comments).
pub fn parse_expression(text: &str) -> Result<SyntaxNode, ParseError> {
    let index = LineIndex::new(text);
    let tokens = tokenize(text).map_err(|e| ParseError::from(e).locate(&index, text))?;
    let mut p = Parser { text, index: &index, tokens, pos: 0, inflight_depth: 0, depth: 0 };
    let node = p
        .expression(true)
        .and_then(|n| {
            p.expect(Tok::Eof, "end of expression")?;
            Ok(n)
        })
        .map_err(|e| e.locate(&index, text))?;
    Ok(node)
}

struct Parser<'a> {
    text: &'a str,
    index: &'a LineIndex,
    tokens: Vec<Token>,
    pos: usize,
    inflight_depth: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].end
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.current();
        ParseError::raw(t.start, t.end, expected.to_string(), t.tok.to_string())
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.error(expected))
        }
    }

    fn expect_ident(&mut self, expected: &str) -> PResult<(String, Token)> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.bump())),
            _ => Err(self.error(expected)),
        }
    }

    fn phase(&self) -> Phase {
        if self.inflight_depth > 0 {
            Phase::Inflight
        } else {
            Phase::Preflight
        }
    }

    fn node(&self, kind: NodeKind, start: usize, end: usize, phase: Phase) -> SyntaxNode {
        SyntaxNode {
            kind,
            span: self.index.span(self.text, start, end),
            phase,
            name: None,
            value: None,
            children: Vec::new(),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("less deeply nested code"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn program(&mut self) -> PResult<SyntaxNode> {
        let mut root = self.node(NodeKind::Program, 0, self.text.len(), Phase::Preflight);
        while *self.peek() != Tok::Eof {
            root.children.push(self.statement()?);
        }
        Ok(root)
    }

    fn statement(&mut self) -> PResult<SyntaxNode> {
        self.enter()?;
        let result = match self.peek() {
            Tok::Bring => self.bring(),
            Tok::Let => self.let_binding(),
            Tok::If => self.if_let(),
            Tok::Return => self.return_stmt(),
            _ => self.expr_stmt(),
        };
        self.leave();
        result
    }

    fn bring(&mut self) -> PResult<SyntaxNode> {
        let start = self.bump().start;
        let (name, _) = self.expect_ident("module name after `bring`")?;
        let end = self.expect(Tok::Semi, "`;`")?.end;
        let mut node = self.node(NodeKind::Bring, start, end, self.phase());
        node.name = Some(name);
        Ok(node)
    }

    fn let_binding(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        let (name, _) = self.expect_ident("binding name after `let`")?;
        let mut children = Vec::new();
        if *self.peek() == Tok::Colon {
            self.bump();
            children.push(self.type_ref()?);
        }
        self.expect(Tok::Eq, "`=`")?;
        children.push(self.expression(true)?);
        let end = self.expect(Tok::Semi, "`;`")?.end;
        let mut node = self.node(NodeKind::LetBinding, start, end, phase);
        node.name = Some(name);
        node.children = children;
        Ok(node)
    }

    fn if_let(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        self.expect(Tok::Let, "`let` after `if`")?;
        let (name, _) = self.expect_ident("binding name")?;
        self.expect(Tok::Eq, "`=`")?;
        let scrutinee = self.expression(false)?;
        let then_block = self.block()?;
        let mut children = vec![scrutinee, then_block];
        if *self.peek() == Tok::Else {
            self.bump();
            children.push(self.block()?);
        }
        let end = self.prev_end();
        let mut node = self.node(NodeKind::IfLet, start, end, phase);
        node.name = Some(name);
        node.children = children;
        Ok(node)
    }

    fn return_stmt(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        let mut children = Vec::new();
        if *self.peek() != Tok::Semi {
            children.push(self.expression(true)?);
        }
        let end = self.expect(Tok::Semi, "`;`")?.end;
        let mut node = self.node(NodeKind::Return, start, end, phase);
        node.children = children;
        Ok(node)
    }

    fn expr_stmt(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let expr = self.expression(true)?;
        let start = expr.span.start_byte;
        let end = self.expect(Tok::Semi, "`;`")?.end;
        let mut node = self.node(NodeKind::ExprStmt, start, end, phase);
        node.children = vec![expr];
        Ok(node)
    }

    fn block(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.expect(Tok::LBrace, "`{`")?.start;
        let mut children = Vec::new();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            children.push(self.statement()?);
        }
        let end = self.expect(Tok::RBrace, "`}`")?.end;
        let mut node = self.node(NodeKind::Block, start, end, phase);
        node.children = children;
        Ok(node)
    }

    fn type_ref(&mut self) -> PResult<SyntaxNode> {
        let (mut path, first) = self.expect_ident("a type name")?;
        let start = first.start;
        while *self.peek() == Tok::Dot {
            self.bump();
            let (seg, _) = self.expect_ident("a type name segment")?;
            path.push('.');
            path.push_str(&seg);
        }
        if *self.peek() == Tok::Question {
            self.bump();
            path.push('?');
        }
        let end = self.prev_end();
        let mut node = self.node(NodeKind::TypeRef, start, end, self.phase());
        node.name = Some(path);
        Ok(node)
    }

    fn expression(&mut self, allow_struct: bool) -> PResult<SyntaxNode> {
        self.enter()?;
        let result = self.postfix(allow_struct);
        self.leave();
        result
    }

    fn postfix(&mut self, allow_struct: bool) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let mut expr = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let (name, _) = self.expect_ident("member name after `.`")?;
                    let start = expr.span.start_byte;
                    if *self.peek() == Tok::LParen {
                        let args = self.call_args()?;
                        let end = self.prev_end();
                        let mut node = self.node(NodeKind::MethodCall, start, end, phase);
                        node.name = Some(name);
                        node.children = std::iter::once(expr).chain(args).collect();
                        expr = node;
                    } else {
                        let end = self.prev_end();
                        let mut node = self.node(NodeKind::MemberAccess, start, end, phase);
                        node.name = Some(name);
                        node.children = vec![expr];
                        expr = node;
                    }
                }
                Tok::LParen => {
                    let start = expr.span.start_byte;
                    let args = self.call_args()?;
                    let end = self.prev_end();
                    let mut node = self.node(NodeKind::Call, start, end, phase);
                    node.children = std::iter::once(expr).chain(args).collect();
                    expr = node;
                }
                Tok::LBracket => {
                    self.bump();
                    let index = self.expression(true)?;
                    let end = self.expect(Tok::RBracket, "`]`")?.end;
                    expr = self.index_or_wrapper(expr, index, end, phase);
                }
                Tok::LBrace if allow_struct && expr.as_path().is_some() => {
                    let start = expr.span.start_byte;
                    let path = expr.as_path();
                    let object = self.object_literal()?;
                    let mut node = self.node(NodeKind::StructLiteral, start, object.span.end_byte, phase);
                    node.name = path;
                    node.children = object.children;
                    expr = node;
                }
                _ => return Ok(expr),
            }
        }
    }

    fn index_or_wrapper(&self, target: SyntaxNode, index: SyntaxNode, end: usize, phase: Phase) -> SyntaxNode {
        let start = target.span.start_byte;
        let is_wrapper = target.kind == NodeKind::ArrayLiteral
            && target.children.len() == 2
            && is_scalar_object(&target.children[1])
            && index.kind == NodeKind::Number
            && index.value == Some(Scalar::Number(crate::num::int(0)));
        if is_wrapper {
            let mut node = self.node(NodeKind::AnnotationWrapper, start, end, phase);
            node.children = target.children;
            node
        } else {
            let mut node = self.node(NodeKind::Index, start, end, phase);
            node.children = vec![target, index];
            node
        }
    }

    fn primary(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let t = self.current().clone();
        match t.tok {
            Tok::Str(s) => {
                self.bump();
                let mut node = self.node(NodeKind::String, t.start, t.end, phase);
                node.value = Some(Scalar::Text(s));
                Ok(node)
            }
            Tok::Number(ref digits) => {
                self.bump();
                let mut node = self.node(NodeKind::Number, t.start, t.end, phase);
                node.value = parse_decimal(digits).map(Scalar::Number);
                Ok(node)
            }
            Tok::Minus => {
                self.bump();
                let Tok::Number(digits) = self.peek().clone() else {
                    return Err(self.error("a number after `-`"));
                };
                let end = self.bump().end;
                let mut node = self.node(NodeKind::Number, t.start, end, phase);
                node.value = parse_decimal(&digits).map(|n| Scalar::Number(-n));
                Ok(node)
            }
            Tok::Duration(secs) => {
                self.bump();
                let mut node = self.node(NodeKind::DurationLiteral, t.start, t.end, phase);
                node.value = Some(Scalar::Duration(secs));
                Ok(node)
            }
            Tok::True | Tok::False => {
                self.bump();
                let mut node = self.node(NodeKind::Bool, t.start, t.end, phase);
                node.value = Some(Scalar::Bool(t.tok == Tok::True));
                Ok(node)
            }
            Tok::Ident(name) => {
                self.bump();
                let mut node = self.node(NodeKind::Identifier, t.start, t.end, phase);
                node.name = Some(name);
                Ok(node)
            }
            Tok::New => self.constructor_call(),
            Tok::Inflight => self.closure(),
            Tok::LBracket => self.array_literal(),
            Tok::LBrace => self.object_literal(),
            Tok::LParen => {
                self.bump();
                let mut inner = self.expression(true)?;
                let end = self.expect(Tok::RParen, "`)`")?.end;
                // parentheses belong to the expression they enclose
                inner.span = self.index.span(self.text, t.start, end);
                Ok(inner)
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn constructor_call(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        let (mut path, _) = self.expect_ident("a type name after `new`")?;
        while *self.peek() == Tok::Dot {
            self.bump();
            let (seg, _) = self.expect_ident("a type name segment")?;
            path.push('.');
            path.push_str(&seg);
        }
        if *self.peek() != Tok::LParen {
            return Err(self.error("`(` after constructor type"));
        }
        let args = self.call_args()?;
        let end = self.prev_end();
        let mut node = self.node(NodeKind::ConstructorCall, start, end, phase);
        node.name = Some(path);
        node.children = args;
        Ok(node)
    }

    fn call_args(&mut self) -> PResult<Vec<SyntaxNode>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        while *self.peek() != Tok::RParen {
            let phase = self.phase();
            if let (Tok::Ident(name), Tok::Colon) = (self.peek().clone(), self.peek_at(1)) {
                let start = self.bump().start;
                self.bump();
                let value = self.expression(true)?;
                let mut node = self.node(NodeKind::NamedArg, start, value.span.end_byte, phase);
                node.name = Some(name);
                node.children = vec![value];
                args.push(node);
            } else {
                args.push(self.expression(true)?);
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            } else if *self.peek() != Tok::RParen {
                return Err(self.error("`,` or `)`"));
            }
        }
        self.bump();
        Ok(args)
    }

    fn closure(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        self.inflight_depth += 1;
        let result = self.closure_rest(start, phase);
        self.inflight_depth -= 1;
        result
    }

    fn closure_rest(&mut self, start: usize, phase: Phase) -> PResult<SyntaxNode> {
        self.expect(Tok::LParen, "`(` after `inflight`")?;
        let mut children = Vec::new();
        while *self.peek() != Tok::RParen {
            let (name, first) = self.expect_ident("a parameter name")?;
            self.expect(Tok::Colon, "`:` and a parameter type")?;
            let ty = self.type_ref()?;
            let mut param = self.node(NodeKind::Param, first.start, ty.span.end_byte, Phase::Inflight);
            param.name = Some(name);
            param.children = vec![ty];
            children.push(param);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else if *self.peek() != Tok::RParen {
                return Err(self.error("`,` or `)`"));
            }
        }
        self.bump();
        if *self.peek() == Tok::Colon {
            self.bump();
            children.push(self.type_ref()?);
        }
        self.expect(Tok::Arrow, "`=>`")?;
        children.push(self.block()?);
        let end = self.prev_end();
        let mut node = self.node(NodeKind::Closure, start, end, phase);
        node.children = children;
        Ok(node)
    }

    fn array_literal(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.bump().start;
        let mut children = Vec::new();
        while *self.peek() != Tok::RBracket {
            children.push(self.expression(true)?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else if *self.peek() != Tok::RBracket {
                return Err(self.error("`,` or `]`"));
            }
        }
        let end = self.bump().end;
        let mut node = self.node(NodeKind::ArrayLiteral, start, end, phase);
        node.children = children;
        Ok(node)
    }

    fn object_literal(&mut self) -> PResult<SyntaxNode> {
        let phase = self.phase();
        let start = self.expect(Tok::LBrace, "`{`")?.start;
        let mut children = Vec::new();
        while *self.peek() != Tok::RBrace {
            let key_tok = self.current().clone();
            let key = match key_tok.tok {
                Tok::Ident(ref k) | Tok::Str(ref k) => k.clone(),
                _ => return Err(self.error("a property name")),
            };
            self.bump();
            self.expect(Tok::Colon, "`:` after property name")?;
            let value = self.expression(true)?;
            let mut prop = self.node(NodeKind::Property, key_tok.start, value.span.end_byte, phase);
            prop.name = Some(key);
            prop.children = vec![value];
            children.push(prop);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else if *self.peek() != Tok::RBrace {
                return Err(self.error("`,` or `}`"));
            }
        }
        let end = self.bump().end;
        let mut node = self.node(NodeKind::ObjectLiteral, start, end, phase);
        node.children = children;
        Ok(node)
    }
}

fn is_scalar_object(node: &SyntaxNode) -> bool {
    node.kind == NodeKind::ObjectLiteral
        && node.children.iter().all(|p| {
            matches!(
                p.children[0].kind,
                NodeKind::String | NodeKind::Number | NodeKind::DurationLiteral | NodeKind::Bool
            )
        })
}
