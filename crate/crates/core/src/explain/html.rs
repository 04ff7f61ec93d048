//! Standalone highlight page: orange for deceptive weight, blue for
//! truthful weight, opacity proportional to |weight|.

use std::fmt::Write;

use super::Explanation;
use crate::model::Statement;

const ORANGE: (u8, u8, u8) = (255, 127, 14);
const BLUE: (u8, u8, u8) = (31, 119, 180);

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Background colour for a weight, given the largest |weight| shown.
pub fn color(weight: f64, max_abs: f64) -> Option<String> {
    if weight == 0.0 || max_abs <= 0.0 {
        return None;
    }
    let (r, g, b) = if weight > 0.0 { ORANGE } else { BLUE };
    let alpha = (weight.abs() / max_abs).min(1.0);
    Some(format!("rgba({r},{g},{b},{alpha:.3})"))
}

pub fn render(e: &Explanation) -> String {
    let max_abs = e.token_weights.iter().map(|w| w.weight.abs()).fold(0.0, f64::max);
    let title = match &e.doc_id {
        Some(id) => format!("Explanation for {}", escape(id)),
        None => "Explanation".to_string(),
    };
    let mut h = String::new();
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n<style>\n\
body {{ font-family: sans-serif; max-width: 50em; margin: 2em auto; }}\n\
.tok {{ padding: 0 2px; border-radius: 3px; }}\n\
table {{ border-collapse: collapse; }} td, th {{ padding: 2px 8px; text-align: left; }}\n\
</style>\n</head>\n<body>\n<h1>{title}</h1>\n"
    );
    let _ = writeln!(
        h,
        "<p>P({}) = {:.4} &middot; surrogate R&sup2; = {:.4} &middot; {} samples, seed {}</p>",
        escape(&e.class_names[1]),
        e.predicted_prob,
        e.local_fidelity_r2,
        e.n_samples,
        e.seed
    );
    let _ = writeln!(
        h,
        "<p><span class=\"tok\" style=\"background:rgba(255,127,14,1)\">{}</span> <span class=\"tok\" style=\"background:rgba(31,119,180,1)\">{}</span></p>",
        escape(&e.class_names[1]),
        escape(&e.class_names[0])
    );
    for (statement, label) in [(Statement::Q1, "Q1"), (Statement::Q2, "Q2")] {
        let _ = write!(h, "<h2>{label}</h2>\n<p>");
        for t in e.tokens.iter().filter(|t| t.statement == statement) {
            match color(t.weight, max_abs) {
                Some(c) => {
                    let _ = write!(
                        h,
                        "<span class=\"tok\" style=\"background:{c}\" title=\"{:+.4}\">{}</span> ",
                        t.weight,
                        escape(&t.token)
                    );
                }
                None => {
                    let _ = write!(h, "<span class=\"tok\">{}</span> ", escape(&t.token));
                }
            }
        }
        h.push_str("</p>\n");
    }
    h.push_str("<h2>Weights</h2>\n<table>\n<tr><th>token</th><th>statement</th><th>weight</th></tr>\n");
    for w in &e.token_weights {
        let _ = writeln!(
            h,
            "<tr><td>{}</td><td>{}</td><td>{:+.5}</td></tr>",
            escape(&w.token),
            if w.statement == Statement::Q1 { "Q1" } else { "Q2" },
            w.weight
        );
    }
    h.push_str("</table>\n</body>\n</html>\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colours() {
        assert_eq!(color(0.5, 1.0).unwrap(), "rgba(255,127,14,0.500)");
        assert_eq!(color(-1.0, 1.0).unwrap(), "rgba(31,119,180,1.000)");
        assert_eq!(color(0.0, 1.0), None);
        assert_eq!(escape("<a & 'b'>"), "&lt;a &amp; &#39;b&#39;&gt;");
    }
}
