use std::fmt::Write;

use super::ast::*;

/// Canonical text for a document: one operation per line, single spaces between tokens,
/// explicit `query` keyword on anonymous operations.
pub fn print(doc: &QueryDocument) -> String {
    let mut out = String::new();
    for (i, op) in doc.operations.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_operation(&mut out, op);
    }
    out
}

fn print_operation(out: &mut String, op: &Operation) {
    out.push_str(op.op_type.keyword());
    if let Some(name) = &op.name {
        out.push(' ');
        out.push_str(name);
    }
    if !op.variable_defs.is_empty() {
        out.push('(');
        for (i, def) in op.variable_defs.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "${}: {}", def.name, def.type_ref);
            if def.non_null {
                out.push('!');
            }
        }
        out.push(')');
    }
    out.push(' ');
    print_selection_set(out, &op.selection_set);
}

fn print_selection_set(out: &mut String, selections: &[Selection]) {
    out.push_str("{ ");
    for sel in selections {
        if let Some(alias) = &sel.alias {
            out.push_str(alias);
            out.push_str(": ");
        }
        out.push_str(&sel.field_name);
        if !sel.arguments.is_empty() {
            out.push('(');
            for (i, arg) in sel.arguments.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&arg.name);
                out.push_str(": ");
                print_value(out, &arg.value);
            }
            out.push(')');
        }
        if let Some(set) = &sel.selection_set {
            out.push(' ');
            print_selection_set(out, set);
        }
        out.push(' ');
    }
    out.push('}');
}

pub(crate) fn print_value(out: &mut String, value: &Value) {
    match value {
        Value::Int(n) => {
            let _ = write!(out, "{n}");
        }
        // Debug formatting always keeps a '.' or an exponent, so the text re-lexes as a float.
        Value::Float(f) => {
            let _ = write!(out, "{f:?}");
        }
        Value::String(s) => print_string(out, s),
        Value::Boolean(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Null => out.push_str("null"),
        Value::Enum(name) => out.push_str(name),
        Value::Variable(name) => {
            out.push('$');
            out.push_str(name);
        }
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_value(out, item);
            }
            out.push(']');
        }
        Value::Object(fields) => {
            out.push('{');
            for (i, (key, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(key);
                out.push_str(": ");
                print_value(out, v);
            }
            out.push('}');
        }
    }
}

fn print_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
