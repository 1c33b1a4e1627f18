use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::simnet::DeliveryMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
}

/// How Rumors travel after the bootstrap exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    /// Router-alert Rumors consumed by the first on-path GIST node.
    QMode,
    /// Plain datagrams to the selected peer.
    UdpMode,
    /// Router-alert Rumors processed and forwarded by every on-path GIST node.
    QFull,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::QMode, Approach::UdpMode, Approach::QFull];

    pub fn rumor_mode(self) -> DeliveryMode {
        match self {
            Approach::QMode => DeliveryMode::QModeIntercept,
            Approach::UdpMode => DeliveryMode::DMode,
            Approach::QFull => DeliveryMode::QModeFullPath,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::QMode => "q-mode",
            Approach::UdpMode => "udp-mode",
            Approach::QFull => "q-full",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Approach::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown approach `{s}` (expected q-mode, udp-mode or q-full)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossipConfig {
    /// Cycle interval.
    pub delta_ms: f64,
    /// Descriptors per message.
    pub m: usize,
    pub approach: Approach,
    /// Idle cycles before the interval is relaxed.
    pub idle_cycles_threshold: u32,
    pub relax_factor: f64,
    /// Longest relaxed interval; idling at this interval suspends the node.
    pub max_delta_ms: f64,
    /// Prefix length shared with the requester for a descriptor to be
    /// disclosed. 0 shares everything.
    pub share_netmask: u8,
    pub store_max_gist_hops: Option<u32>,
    pub store_max_ip_hops: Option<u32>,
    pub view_capacity: Option<usize>,
    /// Initial GIST hop count of Rumors.
    pub rumor_gist_hop_limit: u8,
    /// Initial IP TTL of every discovery packet.
    pub rumor_ip_ttl: u8,
    pub validity_time_ms: u32,
    pub loss_probability: f64,
    pub supported_nslps: Vec<u16>,
}

impl Default for GossipConfig {
    fn default() -> Self {
        GossipConfig {
            delta_ms: 10_000.0,
            m: 1,
            approach: Approach::QFull,
            idle_cycles_threshold: 5,
            relax_factor: 2.0,
            max_delta_ms: 80_000.0,
            share_netmask: 0,
            store_max_gist_hops: None,
            store_max_ip_hops: None,
            view_capacity: None,
            rumor_gist_hop_limit: 64,
            rumor_ip_ttl: 64,
            validity_time_ms: 30_000,
            loss_probability: 0.0,
            supported_nslps: Vec::new(),
        }
    }
}

impl GossipConfig {
    pub fn with_approach(approach: Approach) -> Self {
        GossipConfig {
            approach,
            ..Self::default()
        }
    }

    /// Sets Δ and keeps the suspension cap at 8Δ.
    pub fn with_delta(mut self, delta_ms: f64) -> Self {
        self.delta_ms = delta_ms;
        self.max_delta_ms = 8.0 * delta_ms;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta_ms > 0.0 && self.delta_ms.is_finite()) {
            return Err(ConfigError::Invalid("delta_ms must be positive"));
        }
        if self.m == 0 {
            return Err(ConfigError::Invalid("m must be at least 1"));
        }
        if self.relax_factor.is_nan() || self.relax_factor <= 1.0 {
            return Err(ConfigError::Invalid("relax_factor must exceed 1"));
        }
        if self.max_delta_ms < self.delta_ms {
            return Err(ConfigError::Invalid(
                "max_delta_ms must be at least delta_ms",
            ));
        }
        if self.share_netmask > 32 {
            return Err(ConfigError::Invalid(
                "share_netmask is a prefix length (0..=32)",
            ));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(ConfigError::Invalid(
                "loss_probability must be within [0, 1]",
            ));
        }
        if self.validity_time_ms == 0 {
            return Err(ConfigError::Invalid("validity_time_ms must be positive"));
        }
        if self.rumor_gist_hop_limit == 0 || self.rumor_ip_ttl == 0 {
            return Err(ConfigError::Invalid("hop limits must be positive"));
        }
        Ok(())
    }

    /// Loads `key = value` lines; unspecified keys keep their defaults.
    /// `max_delta_ms` follows `delta_ms` (8Δ) unless given explicitly.
    pub fn parse(text: &str) -> Result<GossipConfig, ConfigError> {
        let mut cfg = GossipConfig::default();
        let mut explicit_max = false;
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| ConfigError::Parse { line: i + 1, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64, ConfigError> {
                v.parse()
                    .map_err(|_| err(format!("bad value for {key}: `{v}`")))
            };
            let int = |v: &str| -> Result<u64, ConfigError> {
                v.parse()
                    .map_err(|_| err(format!("bad value for {key}: `{v}`")))
            };
            let narrow = |v: u64, max: u64| -> Result<u64, ConfigError> {
                if v <= max {
                    Ok(v)
                } else {
                    Err(err(format!("{key} out of range: {v}")))
                }
            };
            let opt = |v: &str| -> Result<Option<u32>, ConfigError> {
                match v {
                    "" | "none" | "unbounded" => Ok(None),
                    v => v
                        .parse()
                        .map(Some)
                        .map_err(|_| err(format!("bad value for {key}: `{v}`"))),
                }
            };
            match key {
                "delta_ms" => cfg.delta_ms = num(value)?,
                "m" => cfg.m = int(value)? as usize,
                "approach" => cfg.approach = value.parse().map_err(err)?,
                "idle_cycles_threshold" => {
                    cfg.idle_cycles_threshold = narrow(int(value)?, u32::MAX.into())? as u32
                }
                "relax_factor" => cfg.relax_factor = num(value)?,
                "max_delta_ms" => {
                    cfg.max_delta_ms = num(value)?;
                    explicit_max = true;
                }
                "share_netmask" => cfg.share_netmask = narrow(int(value)?, 32)? as u8,
                "store_max_gist_hops" => cfg.store_max_gist_hops = opt(value)?,
                "store_max_ip_hops" => cfg.store_max_ip_hops = opt(value)?,
                "view_capacity" => cfg.view_capacity = opt(value)?.map(|c| c as usize),
                "rumor_gist_hop_limit" => {
                    cfg.rumor_gist_hop_limit = narrow(int(value)?, 255)? as u8
                }
                "rumor_ip_ttl" => cfg.rumor_ip_ttl = narrow(int(value)?, 255)? as u8,
                "validity_time_ms" => {
                    cfg.validity_time_ms = narrow(int(value)?, u32::MAX.into())? as u32
                }
                "loss_probability" => cfg.loss_probability = num(value)?,
                "supported_nslps" => {
                    cfg.supported_nslps = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| narrow(int(s)?, u16::MAX.into()).map(|v| v as u16))
                        .collect::<Result<_, _>>()?
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if !explicit_max {
            cfg.max_delta_ms = 8.0 * cfg.delta_ms;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
