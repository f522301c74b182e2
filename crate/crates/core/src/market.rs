//! Marriage-market primitives: agents, preferences, profiles, matchings, and
//! deterministic enumeration of preference and profile spaces.
//!
//! Agents are indexed zero-based within their side and printed one-based
//! (`m1`, `w3`). Ranks are one-based: the most-preferred entry has rank 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Which side of the market an agent belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Man,
    Woman,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Man => Side::Woman,
            Side::Woman => Side::Man,
        }
    }

    fn letter(self) -> char {
        match self {
            Side::Man => 'm',
            Side::Woman => 'w',
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Man => write!(f, "man"),
            Side::Woman => write!(f, "woman"),
        }
    }
}

/// One agent, identified by side and zero-based index within that side.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn man(index: usize) -> AgentId {
        AgentId { side: Side::Man, index }
    }

    pub fn woman(index: usize) -> AgentId {
        AgentId { side: Side::Woman, index }
    }

    /// External one-based name, e.g. `m1` or `w3`.
    pub fn name(&self) -> String {
        format!("{}{}", self.side.letter(), self.index + 1)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl FromStr for AgentId {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<AgentId, MarketError> {
        let bad = || MarketError::BadAgentName { name: s.to_string() };
        let mut chars = s.chars();
        let side = match chars.next() {
            Some('m') => Side::Man,
            Some('w') => Side::Woman,
            _ => return Err(bad()),
        };
        let digits = chars.as_str();
        let one_based: usize = digits.parse().map_err(|_| bad())?;
        if one_based == 0 {
            return Err(bad());
        }
        Ok(AgentId { side, index: one_based - 1 })
    }
}

impl Serialize for AgentId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<AgentId, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// An entry of a preference list or the value of a matching: either an agent
/// of the opposite side, or the outside option of staying single.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Partner {
    Agent(AgentId),
    Single,
}

impl Partner {
    pub fn is_single(&self) -> bool {
        matches!(self, Partner::Single)
    }

    pub fn agent(&self) -> Option<AgentId> {
        match self {
            Partner::Agent(a) => Some(*a),
            Partner::Single => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Partner::Agent(a) => a.name(),
            Partner::Single => "self".to_string(),
        }
    }
}

impl fmt::Display for Partner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl From<AgentId> for Partner {
    fn from(a: AgentId) -> Partner {
        Partner::Agent(a)
    }
}

impl FromStr for Partner {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Partner, MarketError> {
        if s == "self" {
            Ok(Partner::Single)
        } else {
            Ok(Partner::Agent(s.parse()?))
        }
    }
}

impl Serialize for Partner {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Partner {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Partner, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Errors from constructing or querying market-level values.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarketError {
    #[error("both sides must be nonempty, got {num_men} men and {num_women} women")]
    EmptySide { num_men: usize, num_women: usize },
    #[error("agent {agent} does not exist in a {num_men}x{num_women} market")]
    UnknownAgent { agent: AgentId, num_men: usize, num_women: usize },
    #[error("malformed agent name `{name}`")]
    BadAgentName { name: String },
    #[error("{partner} is not a valid partner for {owner}")]
    InvalidPartner { owner: AgentId, partner: Partner },
    #[error("preference of {owner} is not a permutation of the opposite side plus self: {detail}")]
    NotAPermutation { owner: AgentId, detail: String },
    #[error("profile must list one preference per agent in order; position {position} holds {found}")]
    MisplacedPreference { position: usize, found: AgentId },
    #[error("profile has {found} preferences, expected {expected}")]
    WrongPreferenceCount { expected: usize, found: usize },
    #[error("invalid matching: {0:?}")]
    InvalidMatching(Vec<MatchingViolation>),
    #[error("preference index {index} out of range (domain size {size})")]
    IndexOutOfRange { index: u128, size: u128 },
    #[error("sampling is not defined for a single agent's preference space")]
    SampledUnsupported,
    #[error("domain size overflows u128 for a {num_men}x{num_women} market")]
    DomainTooLarge { num_men: usize, num_women: usize },
}

/// Market dimensions. Both sides are nonempty; sides need not be balanced.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Market {
    num_men: usize,
    num_women: usize,
}

#[derive(Deserialize)]
struct RawMarket {
    num_men: usize,
    num_women: usize,
}

impl TryFrom<RawMarket> for Market {
    type Error = MarketError;

    fn try_from(raw: RawMarket) -> Result<Market, MarketError> {
        Market::new(raw.num_men, raw.num_women)
    }
}

impl<'de> Deserialize<'de> for Market {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Market, D::Error> {
        let raw = RawMarket::deserialize(deserializer)?;
        Market::try_from(raw).map_err(D::Error::custom)
    }
}

impl Market {
    pub fn new(num_men: usize, num_women: usize) -> Result<Market, MarketError> {
        if num_men == 0 || num_women == 0 {
            return Err(MarketError::EmptySide { num_men, num_women });
        }
        Ok(Market { num_men, num_women })
    }

    pub fn num_men(&self) -> usize {
        self.num_men
    }

    pub fn num_women(&self) -> usize {
        self.num_women
    }

    pub fn num_agents(&self) -> usize {
        self.num_men + self.num_women
    }

    pub fn side_size(&self, side: Side) -> usize {
        match side {
            Side::Man => self.num_men,
            Side::Woman => self.num_women,
        }
    }

    /// Size of the opposite set of an agent on `side`.
    pub fn opposite_size(&self, side: Side) -> usize {
        self.side_size(side.opposite())
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        agent.index < self.side_size(agent.side)
    }

    /// Position of `agent` in the canonical agent order: men ascending, then
    /// women ascending.
    pub fn ordinal(&self, agent: AgentId) -> usize {
        match agent.side {
            Side::Man => agent.index,
            Side::Woman => self.num_men + agent.index,
        }
    }

    pub fn agent_at(&self, ordinal: usize) -> AgentId {
        if ordinal < self.num_men {
            AgentId::man(ordinal)
        } else {
            AgentId::woman(ordinal - self.num_men)
        }
    }

    /// All agents in canonical order.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        let men = (0..self.num_men).map(AgentId::man);
        let women = (0..self.num_women).map(AgentId::woman);
        men.chain(women)
    }

    pub fn side_agents(&self, side: Side) -> impl Iterator<Item = AgentId> {
        (0..self.side_size(side)).map(move |i| AgentId { side, index: i })
    }
}

/// One agent's strict total order over the opposite side plus the outside
/// option. The order is a permutation: every opposite-side agent appears
/// exactly once and `self` appears exactly once.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Preference {
    owner: AgentId,
    order: Vec<Partner>,
}

#[derive(Deserialize)]
struct RawPreference {
    owner: AgentId,
    order: Vec<Partner>,
}

impl TryFrom<RawPreference> for Preference {
    type Error = MarketError;

    fn try_from(raw: RawPreference) -> Result<Preference, MarketError> {
        Preference::from_parts(raw.owner, raw.order)
    }
}

impl<'de> Deserialize<'de> for Preference {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Preference, D::Error> {
        let raw = RawPreference::deserialize(deserializer)?;
        Preference::try_from(raw).map_err(D::Error::custom)
    }
}

impl Preference {
    /// Builds and validates a preference for `owner` in `market`.
    pub fn new(market: &Market, owner: AgentId, order: Vec<Partner>) -> Result<Preference, MarketError> {
        if !market.contains(owner) {
            return Err(MarketError::UnknownAgent {
                agent: owner,
                num_men: market.num_men,
                num_women: market.num_women,
            });
        }
        let pref = Preference::from_parts(owner, order)?;
        if pref.opposite_count() != market.opposite_size(owner.side) {
            return Err(MarketError::NotAPermutation {
                owner,
                detail: format!(
                    "covers {} opposite-side agents, market has {}",
                    pref.opposite_count(),
                    market.opposite_size(owner.side)
                ),
            });
        }
        Ok(pref)
    }

    /// Structural validation that does not need market dimensions: the order
    /// must be exactly the opposite-side agents `0..k` plus one `self`.
    fn from_parts(owner: AgentId, order: Vec<Partner>) -> Result<Preference, MarketError> {
        let err = |detail: String| MarketError::NotAPermutation { owner, detail };
        if order.is_empty() {
            return Err(err("empty order".into()));
        }
        let opposite = owner.side.opposite();
        let mut seen = vec![false; order.len() - 1];
        let mut self_seen = false;
        for entry in &order {
            match entry {
                Partner::Single => {
                    if self_seen {
                        return Err(err("self listed twice".into()));
                    }
                    self_seen = true;
                }
                Partner::Agent(a) => {
                    if a.side != opposite {
                        return Err(MarketError::InvalidPartner { owner, partner: *entry });
                    }
                    if a.index >= seen.len() {
                        return Err(err(format!("{} out of range", a)));
                    }
                    if seen[a.index] {
                        return Err(err(format!("{} listed twice", a)));
                    }
                    seen[a.index] = true;
                }
            }
        }
        if !self_seen {
            return Err(err("self missing".into()));
        }
        Ok(Preference { owner, order })
    }

    /// Internal constructor for callers that permute an already-valid order.
    pub(crate) fn from_order_unchecked(owner: AgentId, order: Vec<Partner>) -> Preference {
        debug_assert!(Preference::from_parts(owner, order.clone()).is_ok());
        Preference { owner, order }
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn order(&self) -> &[Partner] {
        &self.order
    }

    fn opposite_count(&self) -> usize {
        self.order.len() - 1
    }

    fn position(&self, p: Partner) -> Result<usize, MarketError> {
        self.order
            .iter()
            .position(|&q| q == p)
            .ok_or(MarketError::InvalidPartner { owner: self.owner, partner: p })
    }

    /// One-based rank of `p`; the top entry has rank 1.
    pub fn rank(&self, p: Partner) -> Result<usize, MarketError> {
        Ok(self.position(p)? + 1)
    }

    /// Strict preference: true iff `a` is ranked above `b`.
    pub fn prefers(&self, a: Partner, b: Partner) -> Result<bool, MarketError> {
        Ok(self.position(a)? < self.position(b)?)
    }

    /// True iff `p` is weakly preferred to staying single.
    pub fn is_acceptable(&self, p: Partner) -> Result<bool, MarketError> {
        if p.is_single() {
            return Ok(true);
        }
        self.prefers(p, Partner::Single)
    }

    fn compact(&self) -> String {
        let names: Vec<String> = self.order.iter().map(Partner::name).collect();
        format!("({})", names.join(" "))
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.owner, self.compact())
    }
}

/// A full assignment of preferences to every agent of a market, stored in
/// canonical agent order.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Profile {
    market: Market,
    prefs: Vec<Preference>,
}

#[derive(Deserialize)]
struct RawProfile {
    market: Market,
    prefs: Vec<Preference>,
}

impl TryFrom<RawProfile> for Profile {
    type Error = MarketError;

    fn try_from(raw: RawProfile) -> Result<Profile, MarketError> {
        Profile::new(raw.market, raw.prefs)
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Profile, D::Error> {
        let raw = RawProfile::deserialize(deserializer)?;
        Profile::try_from(raw).map_err(D::Error::custom)
    }
}

impl Profile {
    pub fn new(market: Market, prefs: Vec<Preference>) -> Result<Profile, MarketError> {
        if prefs.len() != market.num_agents() {
            return Err(MarketError::WrongPreferenceCount {
                expected: market.num_agents(),
                found: prefs.len(),
            });
        }
        for (position, pref) in prefs.iter().enumerate() {
            if market.agent_at(position) != pref.owner {
                return Err(MarketError::MisplacedPreference { position, found: pref.owner });
            }
            Preference::new(&market, pref.owner, pref.order.clone())?;
        }
        Ok(Profile { market, prefs })
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn prefs(&self) -> &[Preference] {
        &self.prefs
    }

    pub fn pref(&self, agent: AgentId) -> &Preference {
        &self.prefs[self.market.ordinal(agent)]
    }

    /// A copy of the profile with the owner's preference replaced by `pref`.
    pub fn with_pref(&self, pref: Preference) -> Result<Profile, MarketError> {
        Preference::new(&self.market, pref.owner, pref.order.clone())?;
        let slot = self.market.ordinal(pref.owner);
        let mut prefs = self.prefs.clone();
        prefs[slot] = pref;
        Ok(Profile { market: self.market, prefs })
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pref in &self.prefs {
            writeln!(f, "{pref}")?;
        }
        Ok(())
    }
}

/// A single violated matching constraint, naming the offending agent(s).
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MatchingViolation {
    /// `agent` points at `partner` but `partner` does not point back.
    BrokenInvolution { agent: AgentId, partner: AgentId },
    /// `agent` is assigned a partner from its own side.
    WrongSide { agent: AgentId, partner: AgentId },
    /// `agent` is assigned someone outside the market.
    OutOfRange { agent: AgentId, partner: AgentId },
    /// The partner map does not cover the market's agents exactly.
    WrongLength { expected: usize, found: usize },
}

impl fmt::Display for MatchingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchingViolation::BrokenInvolution { agent, partner } => {
                write!(f, "{agent} is assigned {partner}, but {partner} is not assigned {agent}")
            }
            MatchingViolation::WrongSide { agent, partner } => {
                write!(f, "{agent} is assigned same-side agent {partner}")
            }
            MatchingViolation::OutOfRange { agent, partner } => {
                write!(f, "{agent} is assigned {partner}, which is not in the market")
            }
            MatchingViolation::WrongLength { expected, found } => {
                write!(f, "partner map covers {found} agents, market has {expected}")
            }
        }
    }
}

/// Checks a raw partner map (in canonical agent order) against the two
/// matching constraints: bilateral consistency and opposite-side assignment.
pub fn validate_partner_map(market: &Market, partners: &[Partner]) -> Vec<MatchingViolation> {
    let mut violations = Vec::new();
    if partners.len() != market.num_agents() {
        violations.push(MatchingViolation::WrongLength {
            expected: market.num_agents(),
            found: partners.len(),
        });
        return violations;
    }
    for (ordinal, &assigned) in partners.iter().enumerate() {
        let agent = market.agent_at(ordinal);
        let partner = match assigned {
            Partner::Single => continue,
            Partner::Agent(p) => p,
        };
        if partner.side == agent.side {
            violations.push(MatchingViolation::WrongSide { agent, partner });
            continue;
        }
        if !market.contains(partner) {
            violations.push(MatchingViolation::OutOfRange { agent, partner });
            continue;
        }
        if partners[market.ordinal(partner)] != Partner::Agent(agent) {
            violations.push(MatchingViolation::BrokenInvolution { agent, partner });
        }
    }
    violations
}

/// An involutive partner map: each agent is assigned an opposite-side agent
/// or stays single, and assignments are mutual.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Matching {
    market: Market,
    partners: Vec<Partner>,
}

impl Matching {
    pub fn new(market: Market, partners: Vec<Partner>) -> Result<Matching, MarketError> {
        let violations = validate_partner_map(&market, &partners);
        if violations.is_empty() {
            Ok(Matching { market, partners })
        } else {
            Err(MarketError::InvalidMatching(violations))
        }
    }

    /// The matching in which every agent stays single.
    pub fn everyone_single(market: Market) -> Matching {
        Matching { market, partners: vec![Partner::Single; market.num_agents()] }
    }

    /// Builds a matching from man-woman pairs; unnamed agents stay single.
    pub fn from_pairs(market: Market, pairs: &[(AgentId, AgentId)]) -> Result<Matching, MarketError> {
        let mut partners = vec![Partner::Single; market.num_agents()];
        for &(man, woman) in pairs {
            if man.side != Side::Man || woman.side != Side::Woman {
                return Err(MarketError::InvalidMatching(vec![MatchingViolation::WrongSide {
                    agent: man,
                    partner: woman,
                }]));
            }
            if !market.contains(man) || !market.contains(woman) {
                return Err(MarketError::InvalidMatching(vec![MatchingViolation::OutOfRange {
                    agent: man,
                    partner: woman,
                }]));
            }
            partners[market.ordinal(man)] = Partner::Agent(woman);
            partners[market.ordinal(woman)] = Partner::Agent(man);
        }
        Matching::new(market, partners)
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn partner(&self, agent: AgentId) -> Partner {
        self.partners[self.market.ordinal(agent)]
    }

    pub fn partners(&self) -> &[Partner] {
        &self.partners
    }

    /// Matched man-woman pairs, by ascending man index.
    pub fn matched_pairs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.market.side_agents(Side::Man).filter_map(move |m| match self.partner(m) {
            Partner::Agent(w) => Some((m, w)),
            Partner::Single => None,
        })
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> =
            self.matched_pairs().map(|(m, w)| format!("{m}-{w}")).collect();
        for agent in self.market.agents() {
            if self.partner(agent).is_single() {
                parts.push(format!("{agent}-self"));
            }
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for Matching {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc<'a> {
            market: Market,
            partners: BTreeMap<String, &'a str>,
        }
        let names: Vec<String> = self.partners.iter().map(Partner::name).collect();
        let mut map = BTreeMap::new();
        for (ordinal, name) in names.iter().enumerate() {
            map.insert(self.market.agent_at(ordinal).name(), name.as_str());
        }
        Doc { market: self.market, partners: map }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matching {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Matching, D::Error> {
        #[derive(Deserialize)]
        struct Doc {
            market: Market,
            partners: BTreeMap<String, String>,
        }
        let doc = Doc::deserialize(deserializer)?;
        let mut partners = vec![Partner::Single; doc.market.num_agents()];
        for (agent, partner) in &doc.partners {
            let agent: AgentId = agent.parse().map_err(D::Error::custom)?;
            if !doc.market.contains(agent) {
                return Err(D::Error::custom(format!("agent {agent} not in market")));
            }
            partners[doc.market.ordinal(agent)] = partner.parse().map_err(D::Error::custom)?;
        }
        if doc.partners.len() != doc.market.num_agents() {
            return Err(D::Error::custom("partner map does not cover every agent"));
        }
        Matching::new(doc.market, partners).map_err(D::Error::custom)
    }
}

/// Which slice of the preference/profile space an enumeration covers.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainRestriction {
    /// Every strict order per agent.
    Full,
    /// Only orders that rank every opposite-side agent above self.
    AllAcceptable,
    /// `count` profiles drawn i.i.d. uniformly from the full space,
    /// reproducible from `seed`.
    Sampled { count: u64, seed: u64 },
}

impl fmt::Display for DomainRestriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainRestriction::Full => write!(f, "full"),
            DomainRestriction::AllAcceptable => write!(f, "all-acceptable"),
            DomainRestriction::Sampled { count, seed } => {
                write!(f, "sampled({count}, seed={seed})")
            }
        }
    }
}

fn factorial(n: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 2..=n as u128 {
        acc = acc.checked_mul(i)?;
    }
    Some(acc)
}

/// Number of preferences one agent has under a (non-sampled) restriction.
fn preference_count(opposite: usize, restriction: DomainRestriction) -> Option<u128> {
    match restriction {
        DomainRestriction::Full => factorial(opposite + 1),
        DomainRestriction::AllAcceptable => factorial(opposite),
        DomainRestriction::Sampled { .. } => None,
    }
}

/// The canonical partner indexing used for enumeration order: opposite-side
/// agents by ascending index, then self.
fn partner_symbols(owner: AgentId, opposite: usize) -> Vec<Partner> {
    let side = owner.side.opposite();
    let mut symbols: Vec<Partner> =
        (0..opposite).map(|i| Partner::Agent(AgentId { side, index: i })).collect();
    symbols.push(Partner::Single);
    symbols
}

/// Writes the `index`-th lexicographic permutation of `symbols` (factorial
/// number system decoding).
fn nth_permutation<T: Copy>(symbols: &[T], mut index: u128) -> Vec<T> {
    let mut pool: Vec<T> = symbols.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    for i in (1..=pool.len()).rev() {
        let f = factorial(i - 1).expect("pool small enough");
        let pick = (index / f) as usize;
        index %= f;
        out.push(pool.remove(pick));
    }
    out
}

/// Lexicographic index of `perm` within the permutations of `symbols`.
fn permutation_index<T: Copy + PartialEq>(symbols: &[T], perm: &[T]) -> u128 {
    let mut pool: Vec<T> = symbols.to_vec();
    let mut index: u128 = 0;
    for (i, item) in perm.iter().enumerate() {
        let f = factorial(perm.len() - 1 - i).expect("pool small enough");
        let pos = pool.iter().position(|s| s == item).expect("item in pool");
        index += pos as u128 * f;
        pool.remove(pos);
    }
    index
}

/// The `index`-th preference of `owner` in the deterministic enumeration
/// order of the restriction.
pub fn nth_preference(
    market: &Market,
    owner: AgentId,
    restriction: DomainRestriction,
    index: u128,
) -> Result<Preference, MarketError> {
    let opposite = market.opposite_size(owner.side);
    let size = preference_count(opposite, restriction).ok_or(MarketError::SampledUnsupported)?;
    if index >= size {
        return Err(MarketError::IndexOutOfRange { index, size });
    }
    let order = match restriction {
        DomainRestriction::Full => nth_permutation(&partner_symbols(owner, opposite), index),
        DomainRestriction::AllAcceptable => {
            let symbols = partner_symbols(owner, opposite);
            let mut order = nth_permutation(&symbols[..opposite], index);
            order.push(Partner::Single);
            order
        }
        DomainRestriction::Sampled { .. } => return Err(MarketError::SampledUnsupported),
    };
    Ok(Preference::from_order_unchecked(owner, order))
}

/// Inverse of [`nth_preference`].
pub fn preference_index(
    market: &Market,
    pref: &Preference,
    restriction: DomainRestriction,
) -> Result<u128, MarketError> {
    let opposite = market.opposite_size(pref.owner.side);
    let symbols = partner_symbols(pref.owner, opposite);
    match restriction {
        DomainRestriction::Full => Ok(permutation_index(&symbols, pref.order())),
        DomainRestriction::AllAcceptable => {
            if pref.order().last() != Some(&Partner::Single) {
                return Err(MarketError::InvalidPartner {
                    owner: pref.owner,
                    partner: Partner::Single,
                });
            }
            Ok(permutation_index(&symbols[..opposite], &pref.order()[..opposite]))
        }
        DomainRestriction::Sampled { .. } => Err(MarketError::SampledUnsupported),
    }
}

/// Streams all preferences of one agent under `Full` or `AllAcceptable`, in
/// deterministic lexicographic order over the canonical partner indexing.
pub fn enumerate_preferences(
    market: &Market,
    owner: AgentId,
    restriction: DomainRestriction,
) -> Result<impl Iterator<Item = Preference>, MarketError> {
    if !market.contains(owner) {
        return Err(MarketError::UnknownAgent {
            agent: owner,
            num_men: market.num_men,
            num_women: market.num_women,
        });
    }
    let opposite = market.opposite_size(owner.side);
    let size = preference_count(opposite, restriction).ok_or(MarketError::SampledUnsupported)?;
    let market = *market;
    Ok((0..size).map(move |i| {
        nth_preference(&market, owner, restriction, i).expect("index in range")
    }))
}

/// An indexed profile space: random access by index makes the stream
/// splittable into disjoint contiguous chunks for parallel consumption.
///
/// For `Full` and `AllAcceptable` the order is the mixed-radix product of the
/// per-agent preference enumerations, with earlier agents (men before women)
/// most significant. For `Sampled` it is the seeded i.i.d. draw sequence.
#[derive(Clone, Debug)]
pub struct ProfileDomain {
    market: Market,
    restriction: DomainRestriction,
    /// Per-agent space sizes, canonical agent order.
    agent_sizes: Vec<u128>,
    size: u128,
    /// Pre-drawn per-agent preference indices, one row per sample.
    sampled_digits: Vec<Vec<u128>>,
}

impl ProfileDomain {
    pub fn new(market: Market, restriction: DomainRestriction) -> Result<ProfileDomain, MarketError> {
        let per_agent = |restriction| -> Vec<u128> {
            market
                .agents()
                .map(|a| {
                    preference_count(market.opposite_size(a.side), restriction)
                        .expect("non-sampled restriction")
                })
                .collect()
        };
        match restriction {
            DomainRestriction::Full | DomainRestriction::AllAcceptable => {
                let agent_sizes = per_agent(restriction);
                let mut size: u128 = 1;
                for per in &agent_sizes {
                    size = size.checked_mul(*per).ok_or(MarketError::DomainTooLarge {
                        num_men: market.num_men,
                        num_women: market.num_women,
                    })?;
                }
                Ok(ProfileDomain { market, restriction, agent_sizes, size, sampled_digits: Vec::new() })
            }
            DomainRestriction::Sampled { count, seed } => {
                // Drawing each agent's preference index independently is the
                // uniform distribution over the full product space.
                let agent_sizes = per_agent(DomainRestriction::Full);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let sampled_digits = (0..count)
                    .map(|_| agent_sizes.iter().map(|&per| rng.gen_range(0..per)).collect())
                    .collect();
                Ok(ProfileDomain {
                    market,
                    restriction,
                    agent_sizes,
                    size: count as u128,
                    sampled_digits,
                })
            }
        }
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn restriction(&self) -> DomainRestriction {
        self.restriction
    }

    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn profile_at(&self, index: u128) -> Result<Profile, MarketError> {
        if index >= self.size {
            return Err(MarketError::IndexOutOfRange { index, size: self.size });
        }
        let (base, digits) = match self.restriction {
            DomainRestriction::Sampled { .. } => {
                (DomainRestriction::Full, self.sampled_digits[index as usize].clone())
            }
            other => {
                let mut rest = index;
                let mut digits = vec![0u128; self.agent_sizes.len()];
                for (slot, per) in self.agent_sizes.iter().enumerate().rev() {
                    digits[slot] = rest % per;
                    rest /= per;
                }
                (other, digits)
            }
        };
        let prefs = self
            .market
            .agents()
            .zip(digits)
            .map(|(agent, digit)| {
                nth_preference(&self.market, agent, base, digit).expect("digit in range")
            })
            .collect();
        Ok(Profile { market: self.market, prefs })
    }

    /// Index of `profile` in this domain (`Full`/`AllAcceptable` only).
    pub fn index_of(&self, profile: &Profile) -> Result<u128, MarketError> {
        let mut index: u128 = 0;
        for (pref, per) in profile.prefs().iter().zip(&self.agent_sizes) {
            let digit = preference_index(&self.market, pref, self.restriction)?;
            index = index * per + digit;
        }
        Ok(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.size).map(move |i| self.profile_at(i).expect("index in range"))
    }
}

/// Streams all profiles of a market under a restriction.
pub fn enumerate_profiles(
    market: &Market,
    restriction: DomainRestriction,
) -> Result<ProfileDomain, MarketError> {
    ProfileDomain::new(*market, restriction)
}
