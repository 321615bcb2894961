use std::collections::{BTreeMap, HashMap};

use super::resources::{annotation_index, key, AnnotationIndex};
use super::{closure_id, static_value, ExtractError, MethodRole, ResourceCall, ResourceDecl, ResourceType, HTTP_RESOURCE};
use crate::syntax::{NodeKind, Phase, SyntaxNode, SyntaxTree};

/// Namespaces that are never resources.
const BUILTINS: [&str; 8] = ["std", "str", "num", "cloud", "util", "Json", "math", "log"];

#[derive(Clone)]
enum Binding {
    Resource(String),
    /// `shadows` is set when the name hid a resource binding.
    Value { shadows: bool },
}

struct Resolver<'a> {
    decls: HashMap<(usize, usize), &'a ResourceDecl>,
    types: HashMap<&'a str, ResourceType>,
    annotations: AnnotationIndex,
    scopes: Vec<HashMap<String, Binding>>,
    closures: Vec<String>,
    calls: Vec<ResourceCall>,
}

/// Every call on a declared resource, plus `httpPost` pseudo-calls, in
/// evaluation order.
pub fn resolve_usages(tree: &SyntaxTree, resources: &[ResourceDecl]) -> Result<Vec<ResourceCall>, ExtractError> {
    let mut resolver = Resolver {
        decls: resources.iter().filter(|d| !d.implicit).map(|d| ((d.decl_span.start_byte, d.decl_span.end_byte), d)).collect(),
        types: resources.iter().map(|d| (d.id.as_str(), d.resource_type)).collect(),
        annotations: annotation_index(tree)?,
        scopes: vec![HashMap::new()],
        closures: Vec::new(),
        calls: Vec::new(),
    };
    for stmt in &tree.root.children {
        resolver.statement(stmt)?;
    }
    Ok(resolver.calls)
}

impl<'a> Resolver<'a> {
    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn bind(&mut self, name: &str, binding: Binding) {
        self.scopes.last_mut().expect("scope").insert(name.to_string(), binding);
    }

    fn value_binding(&self, name: &str) -> Binding {
        Binding::Value { shadows: matches!(self.lookup(name), Some(Binding::Resource(_))) }
    }

    fn classify(&self, expr: &SyntaxNode) -> Option<Binding> {
        let expr = expr.unwrapped();
        match expr.kind {
            NodeKind::ConstructorCall => self.decls.get(&key(expr)).map(|d| Binding::Resource(d.id.clone())),
            NodeKind::Identifier => match self.lookup(expr.name()) {
                Some(Binding::Resource(id)) => Some(Binding::Resource(id.clone())),
                _ => None,
            },
            _ => None,
        }
    }

    fn statement(&mut self, stmt: &SyntaxNode) -> Result<(), ExtractError> {
        match stmt.kind {
            NodeKind::LetBinding => {
                let value = stmt.children.last().expect("let has a value");
                self.expression(value)?;
                let binding = self.classify(value).unwrap_or_else(|| self.value_binding(stmt.name()));
                self.bind(stmt.name(), binding);
            }
            NodeKind::IfLet => {
                self.expression(&stmt.children[0])?;
                self.scopes.push(HashMap::new());
                let binding = self.value_binding(stmt.name());
                self.bind(stmt.name(), binding);
                let result = self.block(&stmt.children[1]);
                self.scopes.pop();
                result?;
                if let Some(otherwise) = stmt.children.get(2) {
                    self.block(otherwise)?;
                }
            }
            NodeKind::Block => self.block(stmt)?,
            NodeKind::Bring => {}
            _ => {
                for child in &stmt.children {
                    self.expression(child)?;
                }
            }
        }
        Ok(())
    }

    fn block(&mut self, block: &SyntaxNode) -> Result<(), ExtractError> {
        self.scopes.push(HashMap::new());
        let result = block.children.iter().try_for_each(|s| self.statement(s));
        self.scopes.pop();
        result
    }

    fn expression(&mut self, expr: &SyntaxNode) -> Result<(), ExtractError> {
        match expr.kind {
            NodeKind::Closure => {
                let mut scope = HashMap::new();
                for param in expr.children.iter().filter(|c| c.kind == NodeKind::Param) {
                    let shadows = matches!(self.lookup(param.name()), Some(Binding::Resource(_)));
                    scope.insert(param.name().to_string(), Binding::Value { shadows });
                }
                self.scopes.push(scope);
                self.closures.push(closure_id(&expr.span));
                let result = self.block(expr.children.last().expect("closure body"));
                self.closures.pop();
                self.scopes.pop();
                result
            }
            NodeKind::MethodCall => {
                for child in &expr.children {
                    self.expression(child)?;
                }
                self.method_call(expr)
            }
            NodeKind::Call => {
                for child in &expr.children {
                    self.expression(child)?;
                }
                let callee = &expr.children[0];
                if callee.kind == NodeKind::Identifier && callee.name() == "httpPost" && self.lookup("httpPost").is_none() {
                    self.http_call(expr)?;
                }
                Ok(())
            }
            _ => expr.children.iter().try_for_each(|c| self.expression(c)),
        }
    }

    fn record(&mut self, resource_id: String, resource_type: Option<ResourceType>, call: &SyntaxNode, args: &[SyntaxNode]) {
        let mut args_summary = BTreeMap::new();
        let mut position = 0;
        for arg in args {
            if arg.kind == NodeKind::NamedArg {
                if let Some(v) = static_value(&arg.children[0]) {
                    args_summary.insert(arg.name().to_string(), v);
                }
            } else {
                if let Some(v) = static_value(arg) {
                    args_summary.insert(format!("arg{position}"), v);
                }
                position += 1;
            }
        }
        self.calls.push(ResourceCall {
            resource_id,
            resource_type,
            method: call.name().to_string(),
            call_span: call.span,
            enclosing_closure: self.closures.last().cloned(),
            args_summary,
            annotations: self.annotations.get(&key(call)).cloned().unwrap_or_default(),
        });
    }

    fn http_call(&mut self, call: &SyntaxNode) -> Result<(), ExtractError> {
        if call.phase != Phase::Inflight {
            return Err(ExtractError::PhaseMismatch { span: call.span, method: "httpPost".into(), expected: Phase::Inflight });
        }
        let mut named = call.clone();
        named.name = Some("httpPost".into());
        self.record(HTTP_RESOURCE.into(), None, &named, &call.children[1..]);
        Ok(())
    }

    fn method_call(&mut self, call: &SyntaxNode) -> Result<(), ExtractError> {
        let receiver = call.children[0].unwrapped();
        let method = call.name();
        let resource = match receiver.kind {
            NodeKind::Identifier => match self.lookup(receiver.name()) {
                Some(Binding::Resource(id)) => Some(id.clone()),
                Some(Binding::Value { shadows: true }) => {
                    return Err(ExtractError::UnresolvedReceiver { span: receiver.span, name: receiver.name().into() })
                }
                Some(Binding::Value { shadows: false }) => None,
                None if BUILTINS.contains(&receiver.name()) => None,
                None if is_registration_name(method) => {
                    return Err(ExtractError::DanglingTrigger {
                        span: call.span,
                        name: receiver.name().into(),
                        method: method.into(),
                    })
                }
                None => return Err(ExtractError::UnresolvedReceiver { span: receiver.span, name: receiver.name().into() }),
            },
            NodeKind::ConstructorCall => self.decls.get(&key(receiver)).map(|d| d.id.clone()),
            NodeKind::MemberAccess => {
                let root = receiver.root_identifier().unwrap_or("");
                match self.lookup(root) {
                    Some(Binding::Resource(_)) => {
                        let ty = self.resource_type_of(root);
                        return Err(ExtractError::UnsupportedMethod {
                            span: call.span,
                            resource_type: ty,
                            method: format!("{}.{method}", &receiver.as_path().unwrap_or_default()[root.len() + 1..]),
                        });
                    }
                    Some(_) => None,
                    None if BUILTINS.contains(&root) => None,
                    None => return Err(ExtractError::UnresolvedReceiver { span: receiver.span, name: root.into() }),
                }
            }
            _ => None,
        };
        let Some(resource_id) = resource else { return Ok(()) };
        let resource_type = self.types[resource_id.as_str()];
        let role = resource_type.method_role(method).ok_or_else(|| ExtractError::UnsupportedMethod {
            span: call.span,
            resource_type,
            method: method.into(),
        })?;
        let expected = match role {
            MethodRole::Registration => Phase::Preflight,
            MethodRole::Data => Phase::Inflight,
        };
        if call.phase != expected {
            return Err(ExtractError::PhaseMismatch { span: call.span, method: method.into(), expected });
        }
        self.record(resource_id, Some(resource_type), call, &call.children[1..]);
        Ok(())
    }

    fn resource_type_of(&self, name: &str) -> ResourceType {
        match self.lookup(name) {
            Some(Binding::Resource(id)) => self.types[id.as_str()],
            _ => unreachable!("caller checked the binding"),
        }
    }
}

fn is_registration_name(method: &str) -> bool {
    matches!(method, "onCreate" | "onTick")
}
