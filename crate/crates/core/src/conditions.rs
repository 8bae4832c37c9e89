//! Delivery conditions: monotone predicates over first-contact distributions.
//!
//! A condition is a conjunction of atoms. Every atom kind is monotone under
//! dominance: if a distribution satisfies it, so does every distribution that
//! dominates it. A delivery distribution satisfies a condition when every row
//! (optionally, every row in a send window) does.
//!
//! Text grammar, whitespace-insensitive:
//!
//! ```text
//! cond := atom ("&" atom)*
//! atom := "P(" int ")>=" float          deliver by bin `int` with probability ≥ float
//!       | "E<=" float ["@" float]       expected delay ≤ float bins, delivery mass ≥ @float
//! ```

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::distribution::{row, DeliveryDistribution, FirstContactDistribution, EPS_MASS, EPS_ORD};
use crate::error::Result;

/// Default mass floor of the expected-delay atom.
pub const DEFAULT_MIN_MASS: f64 = 1.0 - EPS_MASS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("value out of range at byte {offset}: {message}")]
    Range { offset: usize, message: String },
    #[error("deadline bin {deadline} is outside the horizon of {horizon} bins")]
    DeadlineOutOfGrid { deadline: usize, horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Atom {
    /// Cumulative probability at `deadline` is at least `prob`.
    QuantileAtLeast { deadline: usize, prob: f64 },
    /// Total delivery mass at least `min_mass`, and expected delay at most
    /// `max_delay` bins, where undelivered mass is charged the full horizon.
    ExpectedDelayAtMost { max_delay: f64, min_mass: f64 },
}

impl Atom {
    pub fn quantile(deadline: usize, prob: f64) -> std::result::Result<Self, ConditionError> {
        check_probability(prob, 0)?;
        Ok(Atom::QuantileAtLeast { deadline, prob })
    }

    pub fn expected_delay(max_delay: f64) -> std::result::Result<Self, ConditionError> {
        Self::expected_delay_with_mass(max_delay, DEFAULT_MIN_MASS)
    }

    pub fn expected_delay_with_mass(
        max_delay: f64,
        min_mass: f64,
    ) -> std::result::Result<Self, ConditionError> {
        check_delay(max_delay, 0)?;
        check_probability(min_mass, 0)?;
        Ok(Atom::ExpectedDelayAtMost {
            max_delay,
            min_mass,
        })
    }

    fn eval(&self, mass: &[f64]) -> std::result::Result<bool, ConditionError> {
        match *self {
            Atom::QuantileAtLeast { deadline, prob } => {
                if deadline >= mass.len() {
                    return Err(ConditionError::DeadlineOutOfGrid {
                        deadline,
                        horizon: mass.len(),
                    });
                }
                let reached: f64 = mass[..=deadline].iter().sum();
                Ok(reached >= prob - EPS_ORD)
            }
            Atom::ExpectedDelayAtMost {
                max_delay,
                min_mass,
            } => {
                if row::total(mass) < min_mass - EPS_ORD {
                    return Ok(false);
                }
                Ok(defensive_expected_delay(mass) <= max_delay + EPS_ORD)
            }
        }
    }
}

/// `Σ_{t<H} (1 − cum[t])`: the expected delay when every undelivered bundle
/// is counted as arriving at the horizon. Equals the plain expectation for a
/// row of total mass one.
pub fn defensive_expected_delay(mass: &[f64]) -> f64 {
    row::cumulative(mass).iter().map(|c| (1.0 - c).max(0.0)).sum()
}

fn check_probability(v: f64, offset: usize) -> std::result::Result<(), ConditionError> {
    if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
        return Err(ConditionError::Range {
            offset,
            message: format!("{v} is not a probability"),
        });
    }
    Ok(())
}

fn check_delay(v: f64, offset: usize) -> std::result::Result<(), ConditionError> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(ConditionError::Range {
            offset,
            message: format!("{v} is not a non-negative delay"),
        });
    }
    Ok(())
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Atom::QuantileAtLeast { deadline, prob } => write!(f, "P({deadline})>={prob}"),
            Atom::ExpectedDelayAtMost {
                max_delay,
                min_mass,
            } => {
                write!(f, "E<={max_delay}")?;
                if min_mass != DEFAULT_MIN_MASS {
                    write!(f, "@{min_mass}")?;
                }
                Ok(())
            }
        }
    }
}

/// Conjunction of atoms. The empty conjunction always holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeliveryCondition {
    atoms: Vec<Atom>,
}

impl DeliveryCondition {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn eval_row(&self, d: &FirstContactDistribution) -> Result<bool> {
        Ok(self.eval_mass(d.mass())?)
    }

    pub(crate) fn eval_mass(&self, mass: &[f64]) -> std::result::Result<bool, ConditionError> {
        for atom in &self.atoms {
            if !atom.eval(mass)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Holds when every row holds.
    pub fn eval_delivery(&self, d: &DeliveryDistribution) -> Result<bool> {
        self.eval_delivery_in(d, 0..d.horizon())
    }

    /// Holds when every row whose send bin lies in `window` holds.
    pub fn eval_delivery_in(&self, d: &DeliveryDistribution, window: Range<usize>) -> Result<bool> {
        Ok(self.failing_rows_in(d, window)?.is_empty())
    }

    /// Send bins in `window` whose row violates the condition.
    pub fn failing_rows_in(
        &self,
        d: &DeliveryDistribution,
        window: Range<usize>,
    ) -> Result<Vec<usize>> {
        let end = window.end.min(d.horizon());
        let mut failing = Vec::new();
        for send in window.start..end {
            if !self.eval_mass(d.row(send))? {
                failing.push(send);
            }
        }
        Ok(failing)
    }
}

impl fmt::Display for DeliveryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{atom}")?;
        }
        Ok(())
    }
}

impl FromStr for DeliveryCondition {
    type Err = ConditionError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_condition(s)
    }
}

pub fn parse_condition(text: &str) -> std::result::Result<DeliveryCondition, ConditionError> {
    let mut p = Parser { text, pos: 0 };
    let mut atoms = vec![p.atom()?];
    loop {
        p.skip_ws();
        if p.pos == text.len() {
            break;
        }
        p.expect("&")?;
        atoms.push(p.atom()?);
    }
    Ok(DeliveryCondition { atoms })
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn syntax(&self, message: impl Into<String>) -> ConditionError {
        ConditionError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Matches `token`, allowing whitespace between its characters.
    fn expect(&mut self, token: &str) -> std::result::Result<(), ConditionError> {
        for ch in token.chars() {
            self.skip_ws();
            if !self.text[self.pos..].starts_with(ch) {
                return Err(self.syntax(format!("expected `{ch}`")));
            }
            self.pos += ch.len_utf8();
        }
        Ok(())
    }

    fn token(&mut self, allowed: impl Fn(char) -> bool) -> (usize, &str) {
        self.skip_ws();
        let start = self.pos;
        let len = self.text[start..]
            .char_indices()
            .find(|(_, c)| !allowed(*c))
            .map_or(self.text.len() - start, |(i, _)| i);
        self.pos += len;
        (start, &self.text[start..start + len])
    }

    fn float(&mut self) -> std::result::Result<(usize, f64), ConditionError> {
        let (start, tok) =
            self.token(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
        let value = tok.parse::<f64>().map_err(|_| ConditionError::Syntax {
            offset: start,
            message: format!("expected a number, found `{tok}`"),
        })?;
        Ok((start, value))
    }

    fn int(&mut self) -> std::result::Result<usize, ConditionError> {
        let (start, tok) = self.token(|c| c.is_ascii_digit());
        if tok.is_empty() {
            return Err(ConditionError::Syntax {
                offset: start,
                message: "expected a bin index".into(),
            });
        }
        tok.parse::<usize>().map_err(|e| ConditionError::Range {
            offset: start,
            message: e.to_string(),
        })
    }

    fn atom(&mut self) -> std::result::Result<Atom, ConditionError> {
        self.skip_ws();
        match self.text[self.pos..].chars().next() {
            Some('P') => {
                self.expect("P(")?;
                let deadline = self.int()?;
                self.expect(")>=")?;
                let (at, prob) = self.float()?;
                check_probability(prob, at)?;
                Ok(Atom::QuantileAtLeast { deadline, prob })
            }
            Some('E') => {
                self.expect("E<=")?;
                let (at, max_delay) = self.float()?;
                check_delay(max_delay, at)?;
                self.skip_ws();
                let mut min_mass = DEFAULT_MIN_MASS;
                if self.text[self.pos..].starts_with('@') {
                    self.pos += 1;
                    let (at, m) = self.float()?;
                    check_probability(m, at)?;
                    min_mass = m;
                }
                Ok(Atom::ExpectedDelayAtMost {
                    max_delay,
                    min_mass,
                })
            }
            _ => Err(self.syntax("expected `P(` or `E<=`")),
        }
    }
}
