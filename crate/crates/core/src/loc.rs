//! Repair locations: resolving `.locs` markers to AST nodes, validating
//! that a location set is legal, and splicing replacement subtrees in.
//!
//! Marker forms:
//!   `12:5..12:40`   exact span of a formula or expression
//!   `Sorted`        the sole body formula of declaration `Sorted`
//!   `Sorted/1/0`    body formula 1, then child indices
//!
//! Locations may sit inside fact bodies, pred bodies, and asserts that no
//! oracle check targets. Mutating an oracle's own assert would let the
//! search trivially satisfy it, so that territory is rejected.

use crate::ast::*;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LocError {
    #[error("bad location marker `{0}`")]
    BadMarker(String),
    #[error("unknown declaration `{0}` in location marker")]
    UnknownDecl(String),
    #[error("marker `{0}` does not resolve to a node")]
    NoSuchNode(String),
    #[error("marker `{marker}`: {msg}")]
    Forbidden { marker: String, msg: String },
    #[error("locations {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("replacement for location {0} has the wrong sort")]
    SortMismatch(usize),
    #[error("patched spec is ill-typed: {0}")]
    Type(String),
}

/// Declarations with formula bodies, in a fixed order used everywhere a
/// location's `DeclRef` is compared or iterated.
pub fn all_decls(spec: &Spec) -> Vec<DeclRef> {
    let mut v = Vec::new();
    for i in 0..spec.facts.len() {
        v.push(DeclRef {
            kind: DeclKind::Fact,
            index: i,
        });
    }
    for i in 0..spec.preds.len() {
        v.push(DeclRef {
            kind: DeclKind::Pred,
            index: i,
        });
    }
    for i in 0..spec.asserts.len() {
        v.push(DeclRef {
            kind: DeclKind::Assert,
            index: i,
        });
    }
    v
}

pub fn node_at<'a>(spec: &'a Spec, loc: &Location) -> Option<NodeRef<'a>> {
    let body = spec.decl_body(loc.decl)?;
    let f = body.get(*loc.path.first()?)?;
    let mut node = NodeRef::F(f);
    for &i in &loc.path[1..] {
        node = node.child(i)?;
    }
    Some(node)
}

pub fn subtree_at(spec: &Spec, loc: &Location) -> Option<Subtree> {
    node_at(spec, loc).map(Subtree::from_node)
}

/// Parse one marker string against a spec.
pub fn resolve_marker(spec: &Spec, marker: &str) -> Result<Location, LocError> {
    let marker = marker.trim();
    if marker.is_empty() {
        return Err(LocError::BadMarker(marker.into()));
    }
    if marker.contains("..") {
        return resolve_span_marker(spec, marker);
    }
    let mut parts = marker.split('/');
    let name = parts.next().unwrap();
    let decl = find_decl(spec, name).ok_or_else(|| LocError::UnknownDecl(name.into()))?;
    let body = spec.decl_body(decl).unwrap();
    let mut path = Vec::new();
    for p in parts {
        let i: usize = p
            .parse()
            .map_err(|_| LocError::BadMarker(marker.into()))?;
        path.push(i);
    }
    if path.is_empty() {
        if body.len() != 1 {
            return Err(LocError::Forbidden {
                marker: marker.into(),
                msg: format!(
                    "`{name}` has {} body formulas; use `{name}/i` to pick one",
                    body.len()
                ),
            });
        }
        path.push(0);
    }
    let loc = Location {
        decl,
        path: path.clone(),
        sort: LocSort::Formula,
        span: Span::synthetic(),
    };
    let node = node_at(spec, &loc).ok_or_else(|| LocError::NoSuchNode(marker.into()))?;
    Ok(Location {
        decl,
        path,
        sort: node.sort(),
        span: node.span(),
    })
}

fn resolve_span_marker(spec: &Spec, marker: &str) -> Result<Location, LocError> {
    let (a, b) = marker
        .split_once("..")
        .ok_or_else(|| LocError::BadMarker(marker.into()))?;
    let parse_pos = |s: &str| -> Option<Pos> {
        let (l, c) = s.trim().split_once(':')?;
        Some(Pos {
            line: l.parse().ok()?,
            col: c.parse().ok()?,
        })
    };
    let start = parse_pos(a).ok_or_else(|| LocError::BadMarker(marker.into()))?;
    let end = parse_pos(b).ok_or_else(|| LocError::BadMarker(marker.into()))?;
    for decl in all_decls(spec) {
        let body = spec.decl_body(decl).unwrap();
        for (i, f) in body.iter().enumerate() {
            let mut path = vec![i];
            if let Some(loc) = scan(NodeRef::F(f), &mut path, start, end, decl) {
                return Ok(loc);
            }
        }
    }
    return Err(LocError::NoSuchNode(marker.into()));

    fn scan(
        node: NodeRef<'_>,
        path: &mut Vec<usize>,
        start: Pos,
        end: Pos,
        decl: DeclRef,
    ) -> Option<Location> {
        if node.span().start == start && node.span().end == end {
            return Some(Location {
                decl,
                path: path.clone(),
                sort: node.sort(),
                span: node.span(),
            });
        }
        for (i, c) in node.children().into_iter().enumerate() {
            path.push(i);
            if let Some(loc) = scan(c, path, start, end, decl) {
                return Some(loc);
            }
            path.pop();
        }
        None
    }
}

fn find_decl(spec: &Spec, name: &str) -> Option<DeclRef> {
    if let Some(i) = spec.preds.iter().position(|p| p.name == name) {
        return Some(DeclRef {
            kind: DeclKind::Pred,
            index: i,
        });
    }
    if let Some(i) = spec.facts.iter().position(|f| f.name == name) {
        return Some(DeclRef {
            kind: DeclKind::Fact,
            index: i,
        });
    }
    if let Some(i) = spec.asserts.iter().position(|a| a.name == name) {
        return Some(DeclRef {
            kind: DeclKind::Assert,
            index: i,
        });
    }
    None
}

/// Resolve all markers and validate them as one location set.
pub fn resolve_markers(spec: &Spec, markers: &[String]) -> Result<Vec<Location>, LocError> {
    let locs: Vec<Location> = markers
        .iter()
        .map(|m| resolve_marker(spec, m))
        .collect::<Result<_, _>>()?;
    for (loc, m) in locs.iter().zip(markers) {
        check_territory(spec, loc, m)?;
    }
    validate_disjoint(&locs)?;
    Ok(locs)
}

/// Validate locations that came from `//@loc` comments in the source.
pub fn validate_inline_markers(spec: &Spec) -> Result<Vec<Location>, LocError> {
    for loc in &spec.markers {
        check_territory(spec, loc, &format!("{}", loc.span))?;
    }
    validate_disjoint(&spec.markers)?;
    Ok(spec.markers.clone())
}

fn check_territory(spec: &Spec, loc: &Location, marker: &str) -> Result<(), LocError> {
    if loc.decl.kind == DeclKind::Assert {
        let name = &spec.asserts[loc.decl.index].name;
        let targeted = spec
            .commands
            .iter()
            .any(|c| c.kind == CmdKind::Check && c.is_oracle && &c.target == name);
        if targeted {
            return Err(LocError::Forbidden {
                marker: marker.into(),
                msg: format!("assert `{name}` is an oracle target and cannot be repaired"),
            });
        }
    }
    Ok(())
}

pub fn validate_disjoint(locs: &[Location]) -> Result<(), LocError> {
    for i in 0..locs.len() {
        for j in i + 1..locs.len() {
            let (a, b) = (&locs[i], &locs[j]);
            if a.decl != b.decl {
                continue;
            }
            let n = a.path.len().min(b.path.len());
            if a.path[..n] == b.path[..n] {
                return Err(LocError::Overlap(i, j));
            }
        }
    }
    Ok(())
}

enum NodeMut<'a> {
    E(&'a mut Expr),
    F(&'a mut Formula),
}

impl<'a> NodeMut<'a> {
    // Child order must mirror NodeRef::children exactly.
    fn child(self, i: usize) -> Option<NodeMut<'a>> {
        match self {
            NodeMut::F(f) => match &mut f.kind {
                FormulaKind::Cmp(_, l, r) => match i {
                    0 => Some(NodeMut::E(l)),
                    1 => Some(NodeMut::E(r)),
                    _ => None,
                },
                FormulaKind::Mult(_, e) => (i == 0).then_some(NodeMut::E(e)),
                FormulaKind::Not(g) => (i == 0).then_some(NodeMut::F(g)),
                FormulaKind::Conn(_, l, r) => match i {
                    0 => Some(NodeMut::F(l)),
                    1 => Some(NodeMut::F(r)),
                    _ => None,
                },
                FormulaKind::Quant { bound, body, .. } => match i {
                    0 => Some(NodeMut::E(bound)),
                    1 => Some(NodeMut::F(body)),
                    _ => None,
                },
                FormulaKind::Call { args, .. } => args.get_mut(i).map(NodeMut::E),
                FormulaKind::Lit(_) | FormulaKind::WitnessProbe { .. } => None,
            },
            NodeMut::E(e) => match &mut e.kind {
                ExprKind::Un(_, a) => (i == 0).then_some(NodeMut::E(a)),
                ExprKind::Bin(_, l, r) => match i {
                    0 => Some(NodeMut::E(l)),
                    1 => Some(NodeMut::E(r)),
                    _ => None,
                },
                ExprKind::Card(a) => (i == 0).then_some(NodeMut::E(a)),
                ExprKind::Compr { bound, body, .. } => match i {
                    0 => Some(NodeMut::E(bound)),
                    1 => Some(NodeMut::F(body)),
                    _ => None,
                },
                _ => None,
            },
        }
    }
}

/// Splice `repl` in at `loc`. The caller owns validation order: sorts are
/// checked here, typing by `apply_patch`.
fn splice(spec: &mut Spec, loc: &Location, repl: Subtree, idx: usize) -> Result<(), LocError> {
    if repl.sort() != loc.sort {
        return Err(LocError::SortMismatch(idx));
    }
    let body = spec
        .decl_body_mut(loc.decl)
        .ok_or_else(|| LocError::NoSuchNode(format!("location {idx}")))?;
    let f = body
        .get_mut(loc.path[0])
        .ok_or_else(|| LocError::NoSuchNode(format!("location {idx}")))?;
    let mut node = NodeMut::F(f);
    for &i in &loc.path[1..] {
        node = node
            .child(i)
            .ok_or_else(|| LocError::NoSuchNode(format!("location {idx}")))?;
    }
    match (node, repl) {
        (NodeMut::F(slot), Subtree::F(new)) => *slot = new,
        (NodeMut::E(slot), Subtree::E(new)) => *slot = new,
        _ => return Err(LocError::SortMismatch(idx)),
    }
    Ok(())
}

/// Apply one replacement per location and typecheck the result. Locations
/// must be pairwise disjoint, so splice order does not matter.
pub fn apply_patch(
    spec: &Spec,
    patch: &[(Location, Subtree)],
) -> Result<Spec, LocError> {
    let locs: Vec<Location> = patch.iter().map(|(l, _)| l.clone()).collect();
    validate_disjoint(&locs)?;
    let mut out = spec.clone();
    for (i, (loc, repl)) in patch.iter().enumerate() {
        splice(&mut out, loc, repl.clone(), i)?;
    }
    crate::types::typecheck_spec(&out).map_err(|e| LocError::Type(e.to_string()))?;
    Ok(out)
}

impl fmt::Display for LocSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocSort::Expr => write!(f, "expr"),
            LocSort::Formula => write!(f, "formula"),
        }
    }
}
