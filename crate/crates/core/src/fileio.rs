//! The plain-text market file format.
//!
//! ```text
//! market 3 3
//! m1: w2 w3 w1 self
//! m2: w1 w2 w3 self
//! m3: w1 w3 w2 self
//! w1: m1 m2 m3 self
//! w2: m2 m3 m1 self
//! w3: m2 m1 m3 self
//! ```
//!
//! Line 1 declares the side sizes; every agent then gets one line listing
//! its full preference order, best first, covering the opposite side plus
//! `self` exactly once. Agent lines may appear in any order. Blank lines and
//! `#` comments are ignored. `parse_market(serialize_profile(p)) == p` for
//! every valid profile.

use thiserror::Error;

use crate::market::{AgentId, Market, Partner, Preference, Profile};

/// A parse failure, carrying the offending line and a stable diagnostic code.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message} [{code}]")]
pub struct ParseError {
    /// One-based line number in the input text.
    pub line: usize,
    /// Stable machine-readable code, e.g. `duplicate-partner`.
    pub code: &'static str,
    pub message: String,
}

fn err(line: usize, code: &'static str, message: impl Into<String>) -> ParseError {
    ParseError { line, code, message: message.into() }
}

/// Parses the market file format into a validated [`Profile`].
pub fn parse_market(text: &str) -> Result<Profile, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| err(0, "missing-header", "empty input, expected `market <men> <women>`"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("market") {
        return Err(err(header_no, "bad-header", format!("expected `market <men> <women>`, got `{header}`")));
    }
    let mut side = |name: &str| -> Result<usize, ParseError> {
        parts
            .next()
            .and_then(|t| t.parse().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| err(header_no, "bad-header", format!("{name} count must be a positive integer")))
    };
    let num_men = side("men")?;
    let num_women = side("women")?;
    if parts.next().is_some() {
        return Err(err(header_no, "bad-header", "trailing tokens after sizes"));
    }
    let market = Market::new(num_men, num_women).expect("sizes checked positive");

    let mut prefs: Vec<Option<(usize, Preference)>> = vec![None; market.num_agents()];
    for (line_no, line) in lines {
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| err(line_no, "bad-agent-line", "expected `<agent>: <p1> <p2> ...`"))?;
        let owner: AgentId = name
            .trim()
            .parse()
            .map_err(|_| err(line_no, "unknown-name", format!("`{}` is not an agent name", name.trim())))?;
        if !market.contains(owner) {
            return Err(err(line_no, "unknown-name", format!("{owner} is outside the {num_men}x{num_women} market")));
        }
        let expected = market.opposite_size(owner.side) + 1;
        let mut order: Vec<Partner> = Vec::with_capacity(expected);
        let mut self_seen = false;
        for token in rest.split_whitespace() {
            let partner: Partner = token
                .parse()
                .map_err(|_| err(line_no, "unknown-name", format!("`{token}` is not a partner name")))?;
            match partner {
                Partner::Single => {
                    if self_seen {
                        return Err(err(line_no, "duplicate-partner", "self listed twice"));
                    }
                    self_seen = true;
                }
                Partner::Agent(a) => {
                    if a.side == owner.side {
                        return Err(err(line_no, "wrong-side-partner", format!("{a} is on {owner}'s own side")));
                    }
                    if !market.contains(a) {
                        return Err(err(line_no, "unknown-name", format!("{a} is outside the market")));
                    }
                    if order.contains(&partner) {
                        return Err(err(line_no, "duplicate-partner", format!("{a} listed twice")));
                    }
                }
            }
            order.push(partner);
        }
        if !self_seen {
            return Err(err(line_no, "missing-self", format!("the list of {owner} does not contain `self`")));
        }
        if order.len() != expected {
            return Err(err(
                line_no,
                "size-mismatch",
                format!("{owner} lists {} entries, expected {expected}", order.len()),
            ));
        }
        let slot = market.ordinal(owner);
        if let Some((first_line, _)) = prefs[slot] {
            return Err(err(line_no, "duplicate-agent", format!("{owner} already has a line ({first_line})")));
        }
        let pref = Preference::new(&market, owner, order)
            .map_err(|e| err(line_no, "invalid-preference", e.to_string()))?;
        prefs[slot] = Some((line_no, pref));
    }

    let mut ordered = Vec::with_capacity(market.num_agents());
    for (slot, entry) in prefs.into_iter().enumerate() {
        match entry {
            Some((_, pref)) => ordered.push(pref),
            None => {
                return Err(err(
                    0,
                    "missing-agent",
                    format!("no preference line for {}", market.agent_at(slot)),
                ))
            }
        }
    }
    Profile::new(market, ordered).map_err(|e| err(0, "invalid-profile", e.to_string()))
}

/// Serializes a profile back into the market file format, agents in
/// canonical order.
pub fn serialize_profile(profile: &Profile) -> String {
    let market = profile.market();
    let mut out = format!("market {} {}\n", market.num_men(), market.num_women());
    for pref in profile.prefs() {
        let entries: Vec<String> = pref.order().iter().map(Partner::name).collect();
        out.push_str(&format!("{}: {}\n", pref.owner().name(), entries.join(" ")));
    }
    out
}
