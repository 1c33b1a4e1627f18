//! Proptest generators for wire messages and view contents.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use gistgossip::model::{Address, MetricKind, NodeDescriptor, NslpId, PeerIdentity, SessionId};
use gistgossip::wire::{
    CommonHeader, EpidemicScope, EpidemicType, HeaderFlags, Message, MessageType, MriObject,
    NliObject,
};
use proptest::collection::{btree_set, vec};
use proptest::option;
use proptest::prelude::*;

pub fn address() -> impl Strategy<Value = Address> {
    any::<u32>().prop_map(|v| Address(Ipv4Addr::from(v)))
}

fn nslps() -> impl Strategy<Value = BTreeSet<NslpId>> {
    btree_set(any::<u16>().prop_map(NslpId), 0..4)
}

/// Wire-legal descriptor: a path vector, when present, ends at the peer and
/// fixes gist_hops.
pub fn descriptor() -> impl Strategy<Value = NodeDescriptor> {
    (
        any::<[u8; 16]>(),
        address(),
        nslps(),
        option::of(any::<u32>()),
        option::of(any::<u32>()),
        option::of(0.0f32..1.0e6),
        option::of(vec(address(), 0..5)),
    )
        .prop_map(|(id, addr, nslps, gist, ip, lat, path)| {
            let mut d = NodeDescriptor::new(PeerIdentity(id), addr);
            d.supported_nslps = nslps;
            d.gist_hops = gist;
            d.ip_hops = ip;
            d.latency_ms = lat;
            if let Some(mut p) = path {
                p.push(addr);
                d.gist_hops = Some(p.len() as u32);
                d.path_vector = Some(p);
            }
            d
        })
}

fn scope() -> impl Strategy<Value = EpidemicScope> {
    (0u8..3, 0u8..3, any::<u32>()).prop_map(|(t, m, radius)| EpidemicScope {
        epidemic_type: EpidemicType::from_code(t).unwrap(),
        metric: MetricKind::from_code(m).unwrap(),
        radius,
    })
}

pub fn message() -> impl Strategy<Value = Message> {
    let types = prop_oneof![
        Just(MessageType::Rumor),
        Just(MessageType::RumorResponse),
        Just(MessageType::RumorAck),
        Just(MessageType::EpidemicSignaling),
    ];
    (
        types,
        (any::<u16>(), any::<u8>(), 0u8..4),
        (address(), address(), scope()),
        any::<[u8; 16]>(),
        (any::<[u8; 16]>(), address(), any::<u8>(), 1u32..),
        option::of(nslps()),
        option::of(vec(descriptor(), 0..6)),
        option::of(any::<u64>()),
        option::of(vec(address(), 0..6)),
        option::of(vec(any::<u8>(), 0..64)),
    )
        .prop_map(
            |(t, (nslpid, hops, flags), (src, dst, sc), sid, nli, sup, list, ts, stamp, data)| {
                let epidemic = t == MessageType::EpidemicSignaling;
                let mri = if epidemic {
                    let dst = if sc.epidemic_type == EpidemicType::Bubble {
                        Address::UNSPECIFIED
                    } else {
                        dst
                    };
                    MriObject::epidemic(src, dst, sc)
                } else {
                    MriObject::path_coupled(src, dst)
                };
                let ack = t == MessageType::RumorAck;
                Message {
                    header: CommonHeader {
                        msg_type: t,
                        nslpid: if epidemic {
                            NslpId(nslpid)
                        } else {
                            NslpId::NULL
                        },
                        gist_hop_count: hops,
                        flags: HeaderFlags(flags),
                    },
                    mri,
                    sid: SessionId(sid),
                    nli: NliObject {
                        identity: PeerIdentity(nli.0),
                        address: nli.1,
                        ip_ttl: nli.2,
                        validity_time_ms: nli.3,
                    },
                    supported_nslps: if ack { None } else { sup },
                    node_list: if ack { None } else { list },
                    origin_send_time_ms: ts,
                    path_stamp: stamp,
                    payload: data,
                }
            },
        )
}
