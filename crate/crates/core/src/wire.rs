//! Binary codec for discovery and epidemic signaling messages.
//!
//! Layout (big-endian): an 8-byte common header
//!
//! ```text
//! version:u8 | msg_type:u8 | nslpid:u16 | gist_hop_count:u8 | flags:u8 | total_length:u16
//! ```
//!
//! followed by TLV objects `{obj_type:u8, obj_len:u16, value}` where `obj_len`
//! counts the value only. Object types:
//!
//! | type | object          | value                                                    |
//! |------|-----------------|----------------------------------------------------------|
//! | 1    | MRI             | mrm_id u8, scope u8, source 4B, destination 4B, radius u32 |
//! | 2    | SID             | 16 bytes                                                 |
//! | 3    | NLI             | identity 16B, address 4B, ip_ttl u8, validity_ms u32     |
//! | 4    | Supported-NSLPs | count u16, count × u16                                   |
//! | 5    | Node-List       | count u16, count × descriptor record                     |
//! | 6    | Timestamp       | origin send time, u64 ms                                 |
//! | 7    | Path-Stamp      | count u16, count × 4B interceptor addresses              |
//! | 8    | NSLP-Data       | opaque payload                                           |
//!
//! The MRI scope byte packs the epidemic type in the high nibble and the
//! metric kind in the low nibble; both and the radius are zero for the
//! path-coupled MRM. Unknown object types are skipped.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Address, MetricKind, NodeDescriptor, NslpId, PeerIdentity, SessionId};

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8;
pub const MRM_PATH_COUPLED: u8 = 0;
pub const MRM_EPIDEMIC: u8 = 125;

const OBJ_MRI: u8 = 1;
const OBJ_SID: u8 = 2;
const OBJ_NLI: u8 = 3;
const OBJ_NSLPS: u8 = 4;
const OBJ_NODE_LIST: u8 = 5;
const OBJ_TIMESTAMP: u8 = 6;
const OBJ_PATH_STAMP: u8 = 7;
const OBJ_PAYLOAD: u8 = 8;

const MRI_LEN: usize = 14;
const NLI_LEN: usize = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("message invariant violated: {0}")]
    Invalid(&'static str),
    #[error("{0} does not fit its length field")]
    TooLarge(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input shorter than the common header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    BadMessageType(u8),
    #[error("header declares {declared} bytes but {actual} were supplied")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("object {0} overruns the message")]
    Overrun(u8),
    #[error("duplicate object {0}")]
    DuplicateObject(u8),
    #[error("missing mandatory {0} object")]
    MissingObject(&'static str),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("decoded message violates an invariant: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageType {
    Rumor,
    RumorResponse,
    RumorAck,
    EpidemicSignaling,
}

impl MessageType {
    pub fn code(self) -> u8 {
        match self {
            MessageType::Rumor => 1,
            MessageType::RumorResponse => 2,
            MessageType::RumorAck => 3,
            MessageType::EpidemicSignaling => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<MessageType> {
        match code {
            1 => Some(MessageType::Rumor),
            2 => Some(MessageType::RumorResponse),
            3 => Some(MessageType::RumorAck),
            4 => Some(MessageType::EpidemicSignaling),
            _ => None,
        }
    }

    pub fn is_discovery(self) -> bool {
        self != MessageType::EpidemicSignaling
    }
}

/// Common header control flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct HeaderFlags(pub u8);

impl HeaderFlags {
    /// Router-alert (query-mode) encapsulation.
    pub const QMODE: HeaderFlags = HeaderFlags(0b01);
    /// Process and forward further on-path.
    pub const FULLPATH: HeaderFlags = HeaderFlags(0b10);

    pub fn contains(self, other: HeaderFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: HeaderFlags) -> HeaderFlags {
        HeaderFlags(self.0 | other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonHeader {
    pub msg_type: MessageType,
    pub nslpid: NslpId,
    pub gist_hop_count: u8,
    pub flags: HeaderFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EpidemicType {
    Bubble,
    Balloon,
    Hose,
}

impl EpidemicType {
    pub fn code(self) -> u8 {
        match self {
            EpidemicType::Bubble => 0,
            EpidemicType::Balloon => 1,
            EpidemicType::Hose => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<EpidemicType> {
        match code {
            0 => Some(EpidemicType::Bubble),
            1 => Some(EpidemicType::Balloon),
            2 => Some(EpidemicType::Hose),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpidemicType::Bubble => "bubble",
            EpidemicType::Balloon => "balloon",
            EpidemicType::Hose => "hose",
        }
    }
}

impl std::fmt::Display for EpidemicType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EpidemicType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bubble" => Ok(EpidemicType::Bubble),
            "balloon" => Ok(EpidemicType::Balloon),
            "hose" => Ok(EpidemicType::Hose),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

/// Scope of an epidemic-MRM message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpidemicScope {
    pub epidemic_type: EpidemicType,
    pub metric: MetricKind,
    pub radius: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MriObject {
    pub mrm_id: u8,
    pub source: Address,
    pub destination: Address,
    /// Present iff `mrm_id == MRM_EPIDEMIC`.
    pub epidemic: Option<EpidemicScope>,
}

impl MriObject {
    pub fn path_coupled(source: Address, destination: Address) -> Self {
        MriObject {
            mrm_id: MRM_PATH_COUPLED,
            source,
            destination,
            epidemic: None,
        }
    }

    pub fn epidemic(source: Address, destination: Address, scope: EpidemicScope) -> Self {
        MriObject {
            mrm_id: MRM_EPIDEMIC,
            source,
            destination,
            epidemic: Some(scope),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NliObject {
    pub identity: PeerIdentity,
    pub address: Address,
    pub ip_ttl: u8,
    pub validity_time_ms: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub header: CommonHeader,
    pub mri: MriObject,
    pub sid: SessionId,
    pub nli: NliObject,
    pub supported_nslps: Option<BTreeSet<NslpId>>,
    pub node_list: Option<Vec<NodeDescriptor>>,
    pub origin_send_time_ms: Option<u64>,
    /// Addresses of the on-path GIST nodes that processed a full-path message
    /// so far, in order.
    pub path_stamp: Option<Vec<Address>>,
    pub payload: Option<Vec<u8>>,
}

impl Message {
    pub fn validate(&self) -> Result<(), &'static str> {
        let t = self.header.msg_type;
        if t.is_discovery() {
            if self.header.nslpid != NslpId::NULL {
                return Err("discovery messages carry the null NSLPID");
            }
            if self.mri.mrm_id != MRM_PATH_COUPLED {
                return Err("discovery messages use the path-coupled MRM");
            }
        } else if self.mri.mrm_id != MRM_EPIDEMIC {
            return Err("epidemic signaling uses the epidemic MRM");
        }
        match (self.mri.mrm_id, &self.mri.epidemic) {
            (MRM_EPIDEMIC, None) => return Err("epidemic MRI without scope"),
            (MRM_EPIDEMIC, Some(scope)) => {
                if scope.epidemic_type == EpidemicType::Bubble
                    && !self.mri.destination.is_unspecified()
                {
                    return Err("bubble destination must be 0.0.0.0");
                }
            }
            (_, Some(_)) => return Err("scope fields on a non-epidemic MRI"),
            (_, None) => {}
        }
        if t == MessageType::RumorAck
            && (self.supported_nslps.is_some() || self.node_list.is_some())
        {
            return Err("Rumor-Ack carries neither Supported-NSLPs nor Node-List");
        }
        if self.nli.validity_time_ms == 0 {
            return Err("NLI validity time must be positive");
        }
        if let Some(list) = &self.node_list {
            for d in list {
                if !d.is_consistent() {
                    return Err("node-list descriptor path vector inconsistent");
                }
                if matches!(&d.path_vector, Some(p) if p.is_empty()) {
                    return Err("empty path vector");
                }
                if d.latency_ms.is_some_and(|l| !l.is_finite() || l < 0.0) {
                    return Err("latency must be finite and non-negative");
                }
            }
        }
        Ok(())
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
    fn addr(&mut self, a: Address) {
        self.bytes(&a.octets());
    }

    /// Writes an object header, runs `body`, then patches the length.
    fn object(
        &mut self,
        obj_type: u8,
        name: &'static str,
        body: impl FnOnce(&mut Writer) -> Result<(), EncodeError>,
    ) -> Result<(), EncodeError> {
        self.u8(obj_type);
        let len_at = self.buf.len();
        self.u16(0);
        body(self)?;
        let len = self.buf.len() - len_at - 2;
        let len = u16::try_from(len).map_err(|_| EncodeError::TooLarge(name))?;
        self.buf[len_at..len_at + 2].copy_from_slice(&len.to_be_bytes());
        Ok(())
    }
}

fn count(n: usize, name: &'static str) -> Result<u16, EncodeError> {
    u16::try_from(n).map_err(|_| EncodeError::TooLarge(name))
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    msg.validate().map_err(EncodeError::Invalid)?;
    let mut w = Writer {
        buf: Vec::with_capacity(128),
    };
    w.u8(VERSION);
    w.u8(msg.header.msg_type.code());
    w.u16(msg.header.nslpid.0);
    w.u8(msg.header.gist_hop_count);
    w.u8(msg.header.flags.0);
    w.u16(0);

    w.object(OBJ_MRI, "MRI", |w| {
        w.u8(msg.mri.mrm_id);
        let (scope, radius) = match msg.mri.epidemic {
            Some(s) => ((s.epidemic_type.code() << 4) | s.metric.code(), s.radius),
            None => (0, 0),
        };
        w.u8(scope);
        w.addr(msg.mri.source);
        w.addr(msg.mri.destination);
        w.u32(radius);
        Ok(())
    })?;
    w.object(OBJ_SID, "SID", |w| {
        w.bytes(&msg.sid.0);
        Ok(())
    })?;
    w.object(OBJ_NLI, "NLI", |w| {
        w.bytes(&msg.nli.identity.0);
        w.addr(msg.nli.address);
        w.u8(msg.nli.ip_ttl);
        w.u32(msg.nli.validity_time_ms);
        Ok(())
    })?;
    if let Some(nslps) = &msg.supported_nslps {
        w.object(OBJ_NSLPS, "Supported-NSLPs", |w| {
            w.u16(count(nslps.len(), "Supported-NSLPs")?);
            nslps.iter().for_each(|n| w.u16(n.0));
            Ok(())
        })?;
    }
    if let Some(list) = &msg.node_list {
        w.object(OBJ_NODE_LIST, "Node-List", |w| {
            w.u16(count(list.len(), "Node-List")?);
            for d in list {
                write_descriptor(w, d)?;
            }
            Ok(())
        })?;
    }
    if let Some(ts) = msg.origin_send_time_ms {
        w.object(OBJ_TIMESTAMP, "Timestamp", |w| {
            w.u64(ts);
            Ok(())
        })?;
    }
    if let Some(stamp) = &msg.path_stamp {
        w.object(OBJ_PATH_STAMP, "Path-Stamp", |w| {
            w.u16(count(stamp.len(), "Path-Stamp")?);
            stamp.iter().for_each(|a| w.addr(*a));
            Ok(())
        })?;
    }
    if let Some(payload) = &msg.payload {
        w.object(OBJ_PAYLOAD, "NSLP-Data", |w| {
            w.bytes(payload);
            Ok(())
        })?;
    }

    let total = u16::try_from(w.buf.len()).map_err(|_| EncodeError::TooLarge("message"))?;
    w.buf[6..8].copy_from_slice(&total.to_be_bytes());
    Ok(w.buf)
}

fn write_descriptor(w: &mut Writer, d: &NodeDescriptor) -> Result<(), EncodeError> {
    w.bytes(&d.identity.0);
    w.addr(d.address);
    w.u16(count(d.supported_nslps.len(), "descriptor NSLPs")?);
    d.supported_nslps.iter().for_each(|n| w.u16(n.0));
    w.u8(u8::from(d.gist_hops.is_some()));
    w.u8(u8::from(d.ip_hops.is_some()));
    w.u8(u8::from(d.latency_ms.is_some()));
    if let Some(v) = d.gist_hops {
        w.u32(v);
    }
    if let Some(v) = d.ip_hops {
        w.u32(v);
    }
    if let Some(v) = d.latency_ms {
        w.bytes(&v.to_be_bytes());
    }
    let path = d.path_vector.as_deref().unwrap_or(&[]);
    w.u16(count(path.len(), "path vector")?);
    path.iter().for_each(|a| w.addr(*a));
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    obj: u8,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(DecodeError::Overrun(self.obj))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn array16(&mut self) -> Result<[u8; 16], DecodeError> {
        Ok(self.take(16)?.try_into().unwrap())
    }
    fn addr(&mut self) -> Result<Address, DecodeError> {
        Ok(Address::from_octets(self.take(4)?.try_into().unwrap()))
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn flag(v: u8) -> Result<bool, DecodeError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(DecodeError::Malformed("metric presence flag")),
    }
}

fn read_descriptor(r: &mut Reader<'_>) -> Result<NodeDescriptor, DecodeError> {
    let identity = PeerIdentity(r.array16()?);
    let address = r.addr()?;
    let mut d = NodeDescriptor::new(identity, address);
    let n = r.u16()?;
    for _ in 0..n {
        if !d.supported_nslps.insert(NslpId(r.u16()?)) {
            return Err(DecodeError::Malformed("duplicate NSLPID"));
        }
    }
    let (g, i, l) = (flag(r.u8()?)?, flag(r.u8()?)?, flag(r.u8()?)?);
    if g {
        d.gist_hops = Some(r.u32()?);
    }
    if i {
        d.ip_hops = Some(r.u32()?);
    }
    if l {
        d.latency_ms = Some(f32::from_be_bytes(r.take(4)?.try_into().unwrap()));
    }
    let n = r.u16()?;
    if n > 0 {
        d.path_vector = Some((0..n).map(|_| r.addr()).collect::<Result<_, _>>()?);
    }
    Ok(d)
}

pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::TruncatedHeader(bytes.len()));
    }
    if bytes[0] != VERSION {
        return Err(DecodeError::BadVersion(bytes[0]));
    }
    let msg_type = MessageType::from_code(bytes[1]).ok_or(DecodeError::BadMessageType(bytes[1]))?;
    let declared = usize::from(u16::from_be_bytes([bytes[6], bytes[7]]));
    if declared != bytes.len() {
        return Err(DecodeError::LengthMismatch {
            declared,
            actual: bytes.len(),
        });
    }
    let header = CommonHeader {
        msg_type,
        nslpid: NslpId(u16::from_be_bytes([bytes[2], bytes[3]])),
        gist_hop_count: bytes[4],
        flags: HeaderFlags(bytes[5]),
    };

    let mut mri = None;
    let mut sid = None;
    let mut nli = None;
    let mut supported_nslps = None;
    let mut node_list = None;
    let mut origin_send_time_ms = None;
    let mut path_stamp = None;
    let mut payload = None;

    let mut outer = Reader {
        buf: bytes,
        pos: HEADER_LEN,
        obj: 0,
    };
    while !outer.done() {
        outer.obj = 0;
        let obj_type = outer.u8()?;
        outer.obj = obj_type;
        let len = usize::from(outer.u16()?);
        let value = outer.take(len)?;
        let mut r = Reader {
            buf: value,
            pos: 0,
            obj: obj_type,
        };
        fn set<T>(slot: &mut Option<T>, v: T, obj_type: u8) -> Result<(), DecodeError> {
            if slot.replace(v).is_some() {
                return Err(DecodeError::DuplicateObject(obj_type));
            }
            Ok(())
        }
        match obj_type {
            OBJ_MRI => {
                if len != MRI_LEN {
                    return Err(DecodeError::Malformed("MRI length"));
                }
                let mrm_id = r.u8()?;
                let scope = r.u8()?;
                let source = r.addr()?;
                let destination = r.addr()?;
                let radius = r.u32()?;
                let epidemic = if mrm_id == MRM_EPIDEMIC {
                    Some(EpidemicScope {
                        epidemic_type: EpidemicType::from_code(scope >> 4)
                            .ok_or(DecodeError::Malformed("epidemic type"))?,
                        metric: MetricKind::from_code(scope & 0x0f)
                            .ok_or(DecodeError::Malformed("metric kind"))?,
                        radius,
                    })
                } else if scope != 0 || radius != 0 {
                    return Err(DecodeError::Malformed("scope fields on a non-epidemic MRI"));
                } else {
                    None
                };
                set(
                    &mut mri,
                    MriObject {
                        mrm_id,
                        source,
                        destination,
                        epidemic,
                    },
                    obj_type,
                )?;
            }
            OBJ_SID => {
                if len != 16 {
                    return Err(DecodeError::Malformed("SID length"));
                }
                set(&mut sid, SessionId(r.array16()?), obj_type)?;
            }
            OBJ_NLI => {
                if len != NLI_LEN {
                    return Err(DecodeError::Malformed("NLI length"));
                }
                let v = NliObject {
                    identity: PeerIdentity(r.array16()?),
                    address: r.addr()?,
                    ip_ttl: r.u8()?,
                    validity_time_ms: r.u32()?,
                };
                set(&mut nli, v, obj_type)?;
            }
            OBJ_NSLPS => {
                let n = r.u16()?;
                let mut s = BTreeSet::new();
                for _ in 0..n {
                    if !s.insert(NslpId(r.u16()?)) {
                        return Err(DecodeError::Malformed("duplicate NSLPID"));
                    }
                }
                set(&mut supported_nslps, s, obj_type)?;
            }
            OBJ_NODE_LIST => {
                let n = r.u16()?;
                let list = (0..n)
                    .map(|_| read_descriptor(&mut r))
                    .collect::<Result<Vec<_>, _>>()?;
                set(&mut node_list, list, obj_type)?;
            }
            OBJ_TIMESTAMP => {
                if len != 8 {
                    return Err(DecodeError::Malformed("Timestamp length"));
                }
                set(&mut origin_send_time_ms, r.u64()?, obj_type)?;
            }
            OBJ_PATH_STAMP => {
                let n = r.u16()?;
                let v = (0..n).map(|_| r.addr()).collect::<Result<Vec<_>, _>>()?;
                set(&mut path_stamp, v, obj_type)?;
            }
            OBJ_PAYLOAD => {
                set(&mut payload, value.to_vec(), obj_type)?;
                r.pos = value.len();
            }
            // Forward compatibility: skip what we do not understand.
            _ => r.pos = value.len(),
        }
        if !r.done() {
            return Err(DecodeError::Malformed("trailing bytes inside object"));
        }
    }

    let msg = Message {
        header,
        mri: mri.ok_or(DecodeError::MissingObject("MRI"))?,
        sid: sid.ok_or(DecodeError::MissingObject("SID"))?,
        nli: nli.ok_or(DecodeError::MissingObject("NLI"))?,
        supported_nslps,
        node_list,
        origin_send_time_ms,
        path_stamp,
        payload,
    };
    msg.validate().map_err(DecodeError::Invalid)?;
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeId;

    fn ack() -> Message {
        Message {
            header: CommonHeader {
                msg_type: MessageType::RumorAck,
                nslpid: NslpId::NULL,
                gist_hop_count: 64,
                flags: HeaderFlags::default(),
            },
            mri: MriObject::path_coupled(
                Address::for_node(NodeId(0)),
                Address::for_node(NodeId(4)),
            ),
            sid: SessionId(std::array::from_fn(|i| i as u8)),
            nli: NliObject {
                identity: PeerIdentity::for_node(NodeId(0)),
                address: Address::for_node(NodeId(0)),
                ip_ttl: 64,
                validity_time_ms: 30_000,
            },
            supported_nslps: None,
            node_list: None,
            origin_send_time_ms: None,
            path_stamp: None,
            payload: None,
        }
    }

    #[test]
    fn sid_object_layout() {
        let bytes = encode(&ack()).unwrap();
        // header(8) + MRI(3 + 14), then SID.
        let at = 8 + 3 + 14;
        assert_eq!(&bytes[at..at + 3], &[0x02, 0x00, 0x10]);
        assert_eq!(
            &bytes[at + 3..at + 19],
            &std::array::from_fn::<u8, 16, _>(|i| i as u8)
        );
    }

    /// Byte count from the declared layout, independent of the encoder.
    fn layout_len(msg: &Message) -> usize {
        let obj = |v: usize| 3 + v;
        let desc = |d: &NodeDescriptor| {
            16 + 4
                + 2
                + 2 * d.supported_nslps.len()
                + 3
                + 4 * usize::from(d.gist_hops.is_some())
                + 4 * usize::from(d.ip_hops.is_some())
                + 4 * usize::from(d.latency_ms.is_some())
                + 2
                + 4 * d.path_vector.as_ref().map_or(0, Vec::len)
        };
        8 + obj(14)
            + obj(16)
            + obj(16 + 4 + 1 + 4)
            + msg
                .supported_nslps
                .as_ref()
                .map_or(0, |s| obj(2 + 2 * s.len()))
            + msg
                .node_list
                .as_ref()
                .map_or(0, |l| obj(2 + l.iter().map(desc).sum::<usize>()))
            + msg.origin_send_time_ms.map_or(0, |_| obj(8))
            + msg.path_stamp.as_ref().map_or(0, |p| obj(2 + 4 * p.len()))
            + msg.payload.as_ref().map_or(0, |p| obj(p.len()))
    }

    #[test]
    fn minimal_ack_is_72_bytes() {
        let bytes = encode(&ack()).unwrap();
        assert_eq!(layout_len(&ack()), 72);
        assert_eq!(bytes.len(), 72);
        assert_eq!(u16::from_be_bytes([bytes[6], bytes[7]]), 72);
    }

    #[test]
    fn metric_free_descriptor_record_is_27_bytes() {
        let mut rumor = ack();
        rumor.header.msg_type = MessageType::Rumor;
        rumor.supported_nslps = Some(BTreeSet::new());
        let without = encode(&rumor).unwrap().len();
        let d = NodeDescriptor::new(
            PeerIdentity::for_node(NodeId(3)),
            Address::for_node(NodeId(3)),
        );
        rumor.node_list = Some(vec![d]);
        let with = encode(&rumor).unwrap();
        // object header 3 + count 2 + record
        assert_eq!(with.len() - without - 3 - 2, 27);
        assert_eq!(with.len(), layout_len(&rumor));
    }

    #[test]
    fn unknown_object_is_skipped() {
        let bytes = encode(&ack()).unwrap();
        let nli_at = 8 + 3 + 14 + 3 + 16;
        let mut spliced = bytes[..nli_at].to_vec();
        spliced.extend_from_slice(&[200, 0, 3, 0xde, 0xad, 0xbe]);
        spliced.extend_from_slice(&bytes[nli_at..]);
        let total = spliced.len() as u16;
        spliced[6..8].copy_from_slice(&total.to_be_bytes());
        assert_eq!(decode(&spliced).unwrap(), ack());
    }

    #[test]
    fn short_input_rejected() {
        assert_eq!(
            decode(&[1, 3, 0, 0, 64, 0, 0]),
            Err(DecodeError::TruncatedHeader(7))
        );
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(&ack()).unwrap();
        bytes[0] = 2;
        assert_eq!(decode(&bytes), Err(DecodeError::BadVersion(2)));
        bytes[0] = 1;
        bytes[1] = 9;
        assert_eq!(decode(&bytes), Err(DecodeError::BadMessageType(9)));
        bytes[1] = 3;
        assert!(matches!(
            decode(&bytes[..60]),
            Err(DecodeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_mandatory_object_rejected() {
        let bytes = encode(&ack()).unwrap();
        let sid_at = 8 + 3 + 14;
        let mut dup = bytes.clone();
        dup.extend_from_slice(&bytes[sid_at..sid_at + 19]);
        let total = dup.len() as u16;
        dup[6..8].copy_from_slice(&total.to_be_bytes());
        assert_eq!(decode(&dup), Err(DecodeError::DuplicateObject(OBJ_SID)));
    }

    #[test]
    fn overrunning_object_rejected() {
        let mut bytes = encode(&ack()).unwrap();
        // Inflate the NLI length past the end of the buffer.
        let nli_at = 8 + 3 + 14 + 3 + 16;
        bytes[nli_at + 1..nli_at + 3].copy_from_slice(&200u16.to_be_bytes());
        assert_eq!(decode(&bytes), Err(DecodeError::Overrun(OBJ_NLI)));
    }

    #[test]
    fn encode_rejects_invariant_violations() {
        let mut m = ack();
        m.node_list = Some(vec![]);
        assert!(matches!(encode(&m), Err(EncodeError::Invalid(_))));

        let mut m = ack();
        m.header.nslpid = NslpId(7);
        assert!(encode(&m).is_err());

        let mut m = ack();
        m.header.msg_type = MessageType::EpidemicSignaling;
        m.mri = MriObject::epidemic(
            Address::for_node(NodeId(0)),
            Address::for_node(NodeId(4)),
            EpidemicScope {
                epidemic_type: EpidemicType::Bubble,
                metric: MetricKind::GistHops,
                radius: 2,
            },
        );
        assert!(encode(&m).is_err(), "bubble must address 0.0.0.0");
        m.mri.destination = Address::UNSPECIFIED;
        let bytes = encode(&m).unwrap();
        assert_eq!(decode(&bytes).unwrap(), m);
    }
}
