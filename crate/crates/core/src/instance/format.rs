//! Plain-text instance files.
//!
//! ```text
//! # comment
//! K = 2
//! N = 2
//! M = 2
//! J = 8
//! P_tot = 1.0000000000000000e0
//! noise = 1.0000000000000000e-10
//! P_user = 2.0000000000000001e-1 2.0000000000000001e-1
//! weights = 1.0000000000000000e0 1.0000000000000000e0
//! gains =
//!   1.0000000000000000e-8 2.0000000000000000e-8
//!   3.0000000000000000e-9 4.0000000000000000e-9
//! ```
//!
//! `gains` is followed by exactly `K` rows of `N` numbers. Fields may appear in
//! any order. Numbers are written with 17 significant digits so a write/read
//! cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{InstanceError, ProblemInstance};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: field `{field}`: cannot parse `{text}` as a number")]
    Number {
        line: usize,
        field: String,
        text: String,
    },
    #[error("line {line}: unknown field `{field}`")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: field `{field}` given twice")]
    Duplicate { line: usize, field: String },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` has {found} values, expected {expected}")]
    Length {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Invalid(#[from] InstanceError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const FIELDS: [&str; 9] = ["K", "N", "M", "J", "P_tot", "noise", "P_user", "weights", "gains"];

#[derive(Default)]
struct Raw {
    users: Option<usize>,
    subcarriers: Option<usize>,
    max_multiplexed: Option<usize>,
    levels: Option<usize>,
    total_power: Option<f64>,
    noise: Option<f64>,
    user_power: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    gains: Option<Vec<Vec<f64>>>,
}

fn parse_numbers(text: &str, line: usize, field: &str) -> Result<Vec<f64>, ParseError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| ParseError::Number {
                line,
                field: field.to_string(),
                text: tok.to_string(),
            })
        })
        .collect()
}

fn parse_count(text: &str, line: usize, field: &str) -> Result<usize, ParseError> {
    text.trim().parse::<usize>().map_err(|_| ParseError::Number {
        line,
        field: field.to_string(),
        text: text.trim().to_string(),
    })
}

fn parse_scalar(text: &str, line: usize, field: &str) -> Result<f64, ParseError> {
    let values = parse_numbers(text, line, field)?;
    match values.as_slice() {
        [v] => Ok(*v),
        _ => Err(ParseError::Syntax {
            line,
            message: format!("field `{field}` takes exactly one number"),
        }),
    }
}

/// Parses the text form of an instance and validates it.
pub fn parse_instance(text: &str) -> Result<ProblemInstance, ParseError> {
    let mut raw = Raw::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut in_gains = false;

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            if in_gains {
                let row = parse_numbers(content, line, "gains")?;
                raw.gains.get_or_insert_with(Vec::new).push(row);
                continue;
            }
            return Err(ParseError::Syntax {
                line,
                message: format!("expected `field = value`, found `{content}`"),
            });
        };
        in_gains = false;
        let key = key.trim();
        let Some(&field) = FIELDS.iter().find(|&&f| f == key) else {
            return Err(ParseError::UnknownField {
                line,
                field: key.to_string(),
            });
        };
        if seen.contains(&field) {
            return Err(ParseError::Duplicate {
                line,
                field: field.to_string(),
            });
        }
        seen.push(field);
        match field {
            "K" => raw.users = Some(parse_count(value, line, field)?),
            "N" => raw.subcarriers = Some(parse_count(value, line, field)?),
            "M" => raw.max_multiplexed = Some(parse_count(value, line, field)?),
            "J" => raw.levels = Some(parse_count(value, line, field)?),
            "P_tot" => raw.total_power = Some(parse_scalar(value, line, field)?),
            "noise" => raw.noise = Some(parse_scalar(value, line, field)?),
            "P_user" => raw.user_power = Some(parse_numbers(value, line, field)?),
            "weights" => raw.weights = Some(parse_numbers(value, line, field)?),
            "gains" => {
                if !value.trim().is_empty() {
                    return Err(ParseError::Syntax {
                        line,
                        message: "`gains =` must be followed by one row per user on the next lines"
                            .into(),
                    });
                }
                raw.gains = Some(Vec::new());
                in_gains = true;
            }
            _ => unreachable!("field list and match arms disagree"),
        }
    }
    finish(raw)
}

fn finish(raw: Raw) -> Result<ProblemInstance, ParseError> {
    let users = raw.users.ok_or(ParseError::MissingField("K"))?;
    let subcarriers = raw.subcarriers.ok_or(ParseError::MissingField("N"))?;
    let max_multiplexed = raw.max_multiplexed.ok_or(ParseError::MissingField("M"))?;
    let levels = raw.levels.ok_or(ParseError::MissingField("J"))?;
    let total_power = raw.total_power.ok_or(ParseError::MissingField("P_tot"))?;
    let noise = raw.noise.ok_or(ParseError::MissingField("noise"))?;
    let user_power = raw.user_power.ok_or(ParseError::MissingField("P_user"))?;
    let weights = raw.weights.ok_or(ParseError::MissingField("weights"))?;
    let gains = raw.gains.ok_or(ParseError::MissingField("gains"))?;

    let check = |field: &'static str, found: usize, expected: usize| {
        if found == expected {
            Ok(())
        } else {
            Err(ParseError::Length {
                field,
                expected,
                found,
            })
        }
    };
    check("P_user", user_power.len(), users)?;
    check("weights", weights.len(), users)?;
    check("gains", gains.len(), users)?;
    for row in &gains {
        check("gains", row.len(), subcarriers)?;
    }

    let inst = ProblemInstance {
        gains,
        weights,
        total_power,
        user_power,
        max_multiplexed,
        noise,
        levels,
    };
    inst.validate()?;
    Ok(inst)
}

fn push_list(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
}

/// Text form of `inst`; [`parse_instance`] inverts it exactly.
pub fn render_instance(inst: &ProblemInstance) -> String {
    let mut out = String::from("# noma-lddp instance\n");
    let _ = writeln!(out, "K = {}", inst.users());
    let _ = writeln!(out, "N = {}", inst.subcarriers());
    let _ = writeln!(out, "M = {}", inst.max_multiplexed);
    let _ = writeln!(out, "J = {}", inst.levels);
    let _ = writeln!(out, "P_tot = {:.16e}", inst.total_power);
    let _ = writeln!(out, "noise = {:.16e}", inst.noise);
    out.push_str("P_user = ");
    push_list(&mut out, &inst.user_power);
    out.push_str("\nweights = ");
    push_list(&mut out, &inst.weights);
    out.push_str("\ngains =\n");
    for row in &inst.gains {
        out.push_str("  ");
        push_list(&mut out, row);
        out.push('\n');
    }
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance, ParseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

pub fn write_instance(inst: &ProblemInstance, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, render_instance(inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BY_TWO: &str = "\
# hand written
K = 2
N = 2
M = 2
J = 8
P_tot = 1.0
noise = 1e-10
P_user = 0.2 0.3
weights = 1 2.5
gains =
  1e-8 2e-8   # user 0
  3e-9 4e-9
";

    #[test]
    fn reads_hand_written_file() {
        let inst = parse_instance(TWO_BY_TWO).unwrap();
        assert_eq!(inst.users(), 2);
        assert_eq!(inst.subcarriers(), 2);
        assert_eq!(inst.max_multiplexed, 2);
        assert_eq!(inst.levels, 8);
        assert_eq!(inst.total_power, 1.0);
        assert_eq!(inst.noise, 1e-10);
        assert_eq!(inst.user_power, vec![0.2, 0.3]);
        assert_eq!(inst.weights, vec![1.0, 2.5]);
        assert_eq!(inst.gains, vec![vec![1e-8, 2e-8], vec![3e-9, 4e-9]]);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut inst = parse_instance(TWO_BY_TWO).unwrap();
        inst.gains[1][0] = 1.0 / 3.0 * 1e-9;
        inst.weights[0] = std::f64::consts::PI;
        let back = parse_instance(&render_instance(&inst)).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn missing_gains_is_named() {
        let text: String = TWO_BY_TWO
            .lines()
            .take_while(|l| !l.starts_with("gains"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_instance(&text).unwrap_err();
        assert!(matches!(err, ParseError::MissingField("gains")));
        assert!(err.to_string().contains("gains"));
    }

    #[test]
    fn diagnostics_carry_line_and_field() {
        let bad = TWO_BY_TWO.replace("P_tot = 1.0", "P_tot = one");
        match parse_instance(&bad).unwrap_err() {
            ParseError::Number { line, field, .. } => {
                assert_eq!(line, 6);
                assert_eq!(field, "P_tot");
            }
            other => panic!("unexpected {other}"),
        }
        let bad = TWO_BY_TWO.replace("J = 8", "J = 8\nK = 3");
        assert!(matches!(parse_instance(&bad), Err(ParseError::Duplicate { line: 6, .. })));
        let bad = TWO_BY_TWO.replace("J = 8", "Q = 8");
        assert!(matches!(parse_instance(&bad), Err(ParseError::UnknownField { .. })));
        let bad = TWO_BY_TWO.replace("  3e-9 4e-9\n", "");
        assert!(matches!(
            parse_instance(&bad),
            Err(ParseError::Length { field: "gains", expected: 2, found: 1 })
        ));
        let bad = TWO_BY_TWO.replace("1e-8 2e-8", "1e-8 -2e-8");
        assert!(matches!(parse_instance(&bad), Err(ParseError::Invalid(_))));
        let bad = TWO_BY_TWO.replace("M = 2", "M 2");
        assert!(matches!(parse_instance(&bad), Err(ParseError::Syntax { line: 4, .. })));
    }
}
