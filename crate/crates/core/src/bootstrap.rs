//! Tracker identification: IP-to-ASN lookup followed by a DNS query for
//! `as<ASN>.<container>`. Resolvers are traits; the static implementations
//! here back the simulator.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::model::Address;

pub const DEFAULT_CONTAINER: &str = "nsis.org";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BootstrapError {
    #[error("no ASN known for {0}")]
    UnknownAddress(Address),
    #[error("`{0}` does not resolve to any tracker")]
    NoTracker(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub trait AsnResolver: Send + Sync {
    fn lookup(&self, ip: Address) -> Result<u32, BootstrapError>;
}

pub trait TrackerResolver: Send + Sync {
    fn resolve(&self, name: &str) -> Result<Vec<Address>, BootstrapError>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StaticAsnResolver {
    map: BTreeMap<Address, u32>,
}

impl StaticAsnResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ip: Address, asn: u32) -> &mut Self {
        self.map.insert(ip, asn);
        self
    }

    /// Maps every address to the same ASN.
    pub fn uniform<I: IntoIterator<Item = Address>>(ips: I, asn: u32) -> Self {
        StaticAsnResolver {
            map: ips.into_iter().map(|ip| (ip, asn)).collect(),
        }
    }
}

impl AsnResolver for StaticAsnResolver {
    fn lookup(&self, ip: Address) -> Result<u32, BootstrapError> {
        self.map
            .get(&ip)
            .copied()
            .ok_or(BootstrapError::UnknownAddress(ip))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StaticTrackerResolver {
    names: BTreeMap<String, Vec<Address>>,
}

impl StaticTrackerResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, addrs: Vec<Address>) -> &mut Self {
        self.names.insert(name.to_ascii_lowercase(), addrs);
        self
    }
}

impl TrackerResolver for StaticTrackerResolver {
    fn resolve(&self, name: &str) -> Result<Vec<Address>, BootstrapError> {
        match self.names.get(&name.to_ascii_lowercase()) {
            Some(addrs) if !addrs.is_empty() => Ok(addrs.clone()),
            _ => Err(BootstrapError::NoTracker(name.to_string())),
        }
    }
}

/// Pre-configured tracker addresses, whatever name is asked for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedTrackers(pub Vec<Address>);

impl TrackerResolver for FixedTrackers {
    fn resolve(&self, name: &str) -> Result<Vec<Address>, BootstrapError> {
        if self.0.is_empty() {
            return Err(BootstrapError::NoTracker(name.to_string()));
        }
        Ok(self.0.clone())
    }
}

pub fn tracker_domain(asn: u32, container: &str) -> String {
    format!("as{asn}.{container}").to_ascii_lowercase()
}

/// Finds the tracker a node contacts first. The node's own address is never
/// returned; when several candidates remain one is picked uniformly.
pub fn bootstrap<R: Rng + ?Sized>(
    own: Address,
    asn_resolver: &dyn AsnResolver,
    tracker_resolver: &dyn TrackerResolver,
    container: &str,
    rng: &mut R,
) -> Result<Address, BootstrapError> {
    let asn = asn_resolver.lookup(own)?;
    let name = tracker_domain(asn, container);
    let candidates: Vec<Address> = tracker_resolver
        .resolve(&name)?
        .into_iter()
        .filter(|&a| a != own)
        .collect();
    if candidates.is_empty() {
        return Err(BootstrapError::NoTracker(name));
    }
    Ok(candidates[rng.gen_range(0..candidates.len())])
}

/// Parses a static resolver file:
///
/// ```text
/// asn <ipv4> <asn>
/// tracker <domain> <ipv4>[,<ipv4>...]
/// ```
pub fn parse_resolver_config(
    text: &str,
) -> Result<(StaticAsnResolver, StaticTrackerResolver), BootstrapError> {
    let mut asn = StaticAsnResolver::new();
    let mut trackers = StaticTrackerResolver::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |msg: &str| BootstrapError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            ["asn", ip, n] => {
                let ip = Address(ip.parse().map_err(|_| err("bad ipv4 address"))?);
                asn.insert(ip, n.parse().map_err(|_| err("bad ASN"))?);
            }
            ["tracker", domain, list] => {
                let addrs = list
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map(Address)
                            .map_err(|_| err("bad ipv4 address"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                trackers.insert(domain, addrs);
            }
            _ => {
                return Err(err(
                    "expected `asn <ipv4> <asn>` or `tracker <domain> <ipv4>[,...]`",
                ))
            }
        }
    }
    Ok((asn, trackers))
}
