//! Random branchy Python methods and a brute-force path enumerator over the
//! generator's own statement tree.

use std::collections::BTreeSet;

use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};

#[derive(Clone, Debug)]
pub enum Stmt {
    Assign(usize),
    Return(String),
    If {
        clauses: Vec<(String, Vec<Stmt>)>,
        orelse: Option<Vec<Stmt>>,
    },
    While {
        cond: String,
        body: Vec<Stmt>,
    },
}

/// One enumerated path: constraints as rendered strings, and the return value.
pub type OraclePath = (Vec<String>, String);

pub struct Synth {
    rng: TestRng,
    conditions: usize,
    max_conditions: usize,
    max_depth: usize,
    returns: usize,
}

impl Synth {
    pub fn new(seed: u64, max_conditions: usize, max_depth: usize) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            rng: TestRng::from_seed(RngAlgorithm::ChaCha, &bytes),
            conditions: 0,
            max_conditions,
            max_depth,
            returns: 0,
        }
    }

    fn below(&mut self, n: u64) -> u64 {
        self.rng.next_u64() % n
    }

    fn cond(&mut self) -> Option<String> {
        if self.conditions >= self.max_conditions {
            return None;
        }
        let i = self.conditions;
        self.conditions += 1;
        Some(match self.below(3) {
            0 => format!("x{i} > {}", self.below(10)),
            1 => format!("flag{i}"),
            _ => format!("obj.check_{i}(arg)"),
        })
    }

    fn block(&mut self, depth: usize) -> Vec<Stmt> {
        let len = 1 + self.below(3) as usize;
        let mut out = Vec::new();
        for _ in 0..len {
            let stmt = self.stmt(depth);
            let ends = matches!(stmt, Stmt::Return(_));
            out.push(stmt);
            if ends {
                break;
            }
        }
        out
    }

    fn stmt(&mut self, depth: usize) -> Stmt {
        let roll = self.below(10);
        if depth < self.max_depth && roll < 5 {
            if let Some(first) = self.cond() {
                let mut clauses = vec![(first, self.block(depth + 1))];
                while self.below(3) == 0 {
                    match self.cond() {
                        Some(c) => {
                            let body = self.block(depth + 1);
                            clauses.push((c, body));
                        }
                        None => break,
                    }
                }
                let orelse = if self.below(2) == 0 {
                    Some(self.block(depth + 1))
                } else {
                    None
                };
                return Stmt::If { clauses, orelse };
            }
        }
        if depth < self.max_depth && roll == 5 {
            if let Some(cond) = self.cond() {
                let body = self.block(depth + 1);
                return Stmt::While { cond, body };
            }
        }
        if roll >= 8 {
            self.returns += 1;
            return Stmt::Return(format!("r{}", self.returns));
        }
        Stmt::Assign(self.below(5) as usize)
    }

    /// A method body with at most `max_conditions` conditions.
    pub fn method(&mut self) -> Vec<Stmt> {
        let mut body = Vec::new();
        let len = 1 + self.below(4) as usize;
        for _ in 0..len {
            let s = self.stmt(0);
            let ends = matches!(s, Stmt::Return(_));
            body.push(s);
            if ends {
                break;
            }
        }
        body
    }
}

pub fn render(name: &str, body: &[Stmt]) -> String {
    let mut out = format!("def {name}(arg, obj):\n");
    render_block(body, 1, &mut out);
    out
}

fn render_block(block: &[Stmt], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for stmt in block {
        match stmt {
            Stmt::Assign(v) => out.push_str(&format!("{pad}v{v} = arg\n")),
            Stmt::Return(e) => out.push_str(&format!("{pad}return {e}\n")),
            Stmt::If { clauses, orelse } => {
                for (i, (cond, body)) in clauses.iter().enumerate() {
                    let kw = if i == 0 { "if" } else { "elif" };
                    out.push_str(&format!("{pad}{kw} {cond}:\n"));
                    render_block(body, indent + 1, out);
                }
                if let Some(body) = orelse {
                    out.push_str(&format!("{pad}else:\n"));
                    render_block(body, indent + 1, out);
                }
            }
            Stmt::While { cond, body } => {
                out.push_str(&format!("{pad}while {cond}:\n"));
                render_block(body, indent + 1, out);
            }
        }
    }
}

fn neg(c: &str) -> String {
    format!("not ({c})")
}

fn extend(paths: &[Vec<String>], extra: &[String]) -> Vec<Vec<String>> {
    paths
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.extend(extra.iter().cloned());
            p
        })
        .collect()
}

/// Every path through `block`, without any minimization. Returns the paths
/// still running at the end of the block; terminated ones go to `done`.
fn walk(block: &[Stmt], mut active: Vec<Vec<String>>, done: &mut Vec<OraclePath>) -> Vec<Vec<String>> {
    for stmt in block {
        if active.is_empty() {
            break;
        }
        match stmt {
            Stmt::Assign(_) => {}
            Stmt::Return(e) => {
                done.extend(active.drain(..).map(|p| (p, e.clone())));
            }
            Stmt::If { clauses, orelse } => {
                let mut next = Vec::new();
                let mut negated: Vec<String> = Vec::new();
                for (cond, body) in clauses {
                    let mut extra = negated.clone();
                    extra.push(cond.clone());
                    next.extend(walk(body, extend(&active, &extra), done));
                    negated.push(neg(cond));
                }
                match orelse {
                    Some(body) => next.extend(walk(body, extend(&active, &negated), done)),
                    None => next.extend(extend(&active, &negated)),
                }
                active = next;
            }
            Stmt::While { cond, body } => {
                let mut next = walk(body, extend(&active, std::slice::from_ref(cond)), done);
                next.extend(extend(&active, &[neg(cond)]));
                active = next;
            }
        }
    }
    active
}

pub fn enumerate_paths(body: &[Stmt]) -> Vec<OraclePath> {
    let mut done = Vec::new();
    let rest = walk(body, vec![Vec::new()], &mut done);
    done.extend(rest.into_iter().map(|p| (p, "None".to_string())));
    done
}

pub fn constraint_union<'a>(paths: impl IntoIterator<Item = &'a Vec<String>>) -> BTreeSet<String> {
    paths.into_iter().flatten().cloned().collect()
}

pub fn condition_count(body: &[Stmt]) -> usize {
    body.iter()
        .map(|s| match s {
            Stmt::If { clauses, orelse } => {
                clauses.len()
                    + clauses.iter().map(|(_, b)| condition_count(b)).sum::<usize>()
                    + orelse.as_deref().map(condition_count).unwrap_or(0)
            }
            Stmt::While { body, .. } => 1 + condition_count(body),
            _ => 0,
        })
        .sum()
}

pub fn nesting_depth(body: &[Stmt]) -> usize {
    body.iter()
        .map(|s| match s {
            Stmt::If { clauses, orelse } => {
                1 + clauses
                    .iter()
                    .map(|(_, b)| nesting_depth(b))
                    .chain(orelse.as_deref().map(nesting_depth))
                    .max()
                    .unwrap_or(0)
            }
            Stmt::While { body, .. } => 1 + nesting_depth(body),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}
