//! Minimal two-sided formula language: `response ~ term (+ term)*` with an
//! optional leading `0 +` or `1 +` controlling the intercept.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    pub terms: Vec<String>,
    pub intercept: bool,
}

fn err(pos: usize, msg: impl Into<String>) -> Error {
    Error::Formula { pos, msg: msg.into() }
}

fn check_name(name: &str, pos: usize, what: &str) -> Result<()> {
    if name.is_empty() {
        return Err(err(pos, format!("empty {what}")));
    }
    if let Some(bad) = name.chars().find(|c| c.is_whitespace() || "~+".contains(*c)) {
        return Err(err(pos, format!("invalid character {bad:?} in {what} {name:?}")));
    }
    Ok(())
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let tilde = text
        .find('~')
        .ok_or_else(|| err(text.len(), "expected `response ~ terms`, found no `~`"))?;
    if text[tilde + 1..].contains('~') {
        let second = tilde + 1 + text[tilde + 1..].find('~').unwrap();
        return Err(err(second, "more than one `~`"));
    }

    let response_raw = &text[..tilde];
    let response = response_raw.trim();
    let resp_pos = response_raw.len() - response_raw.trim_start().len();
    check_name(response, resp_pos, "response")?;
    let response = response.to_string();

    let mut intercept = true;
    let mut terms: Vec<String> = Vec::new();
    let rhs = &text[tilde + 1..];
    if rhs.trim().is_empty() {
        return Err(err(text.len(), "formula has no right-hand side"));
    }
    let mut offset = tilde + 1;
    for (i, piece) in rhs.split('+').enumerate() {
        let tok = piece.trim();
        let pos = offset + (piece.len() - piece.trim_start().len());
        offset += piece.len() + 1;
        match tok {
            "1" if i == 0 => intercept = true,
            "0" if i == 0 => intercept = false,
            "0" | "1" => return Err(err(pos, "`0`/`1` may only lead the right-hand side")),
            _ => {
                check_name(tok, pos, "term")?;
                if tok == response {
                    return Err(err(pos, format!("response {tok:?} cannot appear as a term")));
                }
                if terms.iter().any(|t| t == tok) {
                    return Err(err(pos, format!("duplicate term {tok:?}")));
                }
                terms.push(tok.to_string());
            }
        }
    }
    if terms.is_empty() && !intercept {
        return Err(err(tilde + 1, "model has neither an intercept nor terms"));
    }
    Ok(Formula { response, terms, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_term_formula() {
        let f = parse_formula("outcome ~ age + race + treatment + cd4").unwrap();
        assert_eq!(f.response, "outcome");
        assert_eq!(f.terms, ["age", "race", "treatment", "cd4"]);
        assert!(f.intercept);
    }

    #[test]
    fn intercept_only() {
        let f = parse_formula("y ~ 1").unwrap();
        assert_eq!(f.response, "y");
        assert!(f.terms.is_empty());
        assert!(f.intercept);
    }

    #[test]
    fn suppressed_intercept() {
        let f = parse_formula("y ~ 0 + x").unwrap();
        assert!(!f.intercept);
        assert_eq!(f.terms, ["x"]);
    }

    #[test]
    fn rejections_carry_positions() {
        for (text, needle) in [
            ("y x", "no `~`"),
            (" ~ x", "empty response"),
            ("y ~ ", "right-hand side"),
            ("y ~ x + x", "duplicate"),
            ("y ~ y", "cannot appear"),
            ("y ~ 0", "neither"),
            ("y ~ x + 1", "only lead"),
            ("y ~ a b", "invalid character"),
            ("y ~ x ~ z", "more than one"),
        ] {
            let e = parse_formula(text).unwrap_err();
            let Error::Formula { msg, .. } = &e else {
                panic!("expected formula error for {text:?}, got {e:?}")
            };
            assert!(msg.contains(needle), "{text:?}: {msg}");
        }
        match parse_formula("y ~ x + x") {
            Err(Error::Formula { pos, .. }) => assert_eq!(pos, 8),
            other => panic!("{other:?}"),
        }
    }
}
