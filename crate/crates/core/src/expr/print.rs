//! Minimal-parenthesis printer. Output re-parses to the same tree.

use super::{BinOp, Node};

// Binding strength of each node kind; atoms bind tightest.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Binary { op, .. } => match op {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        },
        Node::Neg(_) => PREC_NEG,
        _ => PREC_ATOM,
    }
}

pub(super) fn print(node: &Node, vars: &[String]) -> String {
    let mut out = String::new();
    write_node(node, vars, &mut out);
    out
}

fn write_child(node: &Node, vars: &[String], parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_node(node, vars, out);
        out.push(')');
    } else {
        write_node(node, vars, out);
    }
}

fn write_node(node: &Node, vars: &[String], out: &mut String) {
    match node {
        Node::Num(v) => out.push_str(&format!("{v}")),
        Node::Var(i) => match vars.get(*i) {
            Some(name) => out.push_str(name),
            None => out.push_str(&format!("x{i}")),
        },
        Node::Const { name, .. } => out.push_str(name),
        Node::Neg(a) => {
            out.push('-');
            write_child(a, vars, prec(a) < PREC_NEG, out);
        }
        Node::Binary { op, lhs, rhs } => {
            let p = prec(node);
            let (lp, rp) = if *op == BinOp::Pow {
                // base must be an atom; exponent may be any unary
                (prec(lhs) <= PREC_POW, prec(rhs) < PREC_NEG)
            } else {
                (prec(lhs) < p, prec(rhs) <= p)
            };
            write_child(lhs, vars, lp, out);
            out.push(op.symbol());
            write_child(rhs, vars, rp, out);
        }
        Node::Call { func, arg } => {
            out.push_str(func.name());
            out.push('(');
            write_node(arg, vars, out);
            out.push(')');
        }
    }
}
