//! Path-header relay ("FLOOD") and the receiver's fault-hypothesis decoder.
//!
//! A sender emits its message to every neighbor with a one-entry path header.
//! Every other node validates what it receives, appends its own UID, and
//! forwards to every neighbor not already on the path; the destination
//! collects messages instead of forwarding. After the scheduler window
//! elapses, the destination sweeps every maximal permitted fault set F: if
//! deleting all messages whose header meets F leaves a nonempty set with one
//! common body, F witnesses that body. All witnessed bodies agreeing means
//! delivery; two different consistent bodies are a live ambiguity witness.
//!
//! # Wire format
//!
//! All integers are big-endian. A UID is `u16 length + UTF-8 bytes`.
//!
//! ```text
//! u8   version        (= 1)
//! u8   flags          (bit 0: attestation block present)
//! u64  session id
//! uid  destination
//! u16  header count
//! uid* header         (relay path, origin first)
//! u32  body length
//! u8*  body
//! -- if flags bit 0, one block per header entry, aligned with it:
//! u16  neighbor count
//! uid* attested neighbors
//! ```
//!
//! In unknown-topology mode every relay attests its neighbor set; header
//! validity then uses mutual attested adjacency instead of the shared graph.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::{FaultHypothesis, FaultModel};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::sim::{
    DiscardReason, InputValue, NodeEvent, NodeIdx, Process, ProtocolEnv, ProtocolSpec, SimEnvelope,
};

pub const WIRE_VERSION: u8 = 1;

/// Whether processes may consult the shared graph or only their own
/// neighbor lists plus attestations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphKnowledge {
    #[default]
    Known,
    Unknown,
}

/// Rounds the receiver waits after first receipt before decoding.
pub fn round_budget(g_size: usize) -> usize {
    g_size * g_size
}

/// Scheduler window for one send: worst-case first arrival plus the wait.
pub fn session_window(g_size: usize) -> usize {
    g_size * g_size + g_size
}

/// A relayed message with its path header. Public, name-based form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathMessage {
    pub session: u64,
    pub dest: NodeId,
    /// Relay path, sender first.
    pub header: Vec<NodeId>,
    pub body: Vec<u8>,
    /// Unknown-topology mode: attested neighbor set per header entry.
    pub attestations: Option<Vec<NodeSet>>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// What the decoder concluded for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecodeOutcome {
    Delivered {
        #[serde(with = "hex_bytes")]
        body: Vec<u8>,
        hypothesis: FaultHypothesis,
    },
    NoMessage,
    Ambiguous {
        hypothesis_a: FaultHypothesis,
        #[serde(with = "hex_bytes")]
        body_a: Vec<u8>,
        hypothesis_b: FaultHypothesis,
        #[serde(with = "hex_bytes")]
        body_b: Vec<u8>,
    },
}

impl DecodeOutcome {
    pub fn delivered_body(&self) -> Option<&[u8]> {
        match self {
            DecodeOutcome::Delivered { body, .. } => Some(body),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Wire codec
// ---------------------------------------------------------------------------

/// Internal index-based form, parsed against the global UID table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Msg {
    pub session: u64,
    pub dest: NodeIdx,
    pub header: Vec<NodeIdx>,
    pub hmask: u64,
    pub body: Vec<u8>,
    pub attest: Option<Vec<u64>>,
}

fn put_uid(out: &mut Vec<u8>, name: &NodeId) {
    let b = name.as_str().as_bytes();
    out.extend_from_slice(&(b.len() as u16).to_be_bytes());
    out.extend_from_slice(b);
}

pub(crate) fn encode_wire(names: &[NodeId], msg: &Msg) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + msg.body.len());
    out.push(WIRE_VERSION);
    out.push(if msg.attest.is_some() { 1 } else { 0 });
    out.extend_from_slice(&msg.session.to_be_bytes());
    put_uid(&mut out, &names[msg.dest]);
    out.extend_from_slice(&(msg.header.len() as u16).to_be_bytes());
    for &h in &msg.header {
        put_uid(&mut out, &names[h]);
    }
    out.extend_from_slice(&(msg.body.len() as u32).to_be_bytes());
    out.extend_from_slice(&msg.body);
    if let Some(atts) = &msg.attest {
        for &mask in atts {
            let mut m = mask;
            out.extend_from_slice(&(m.count_ones() as u16).to_be_bytes());
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                put_uid(&mut out, &names[i]);
                m &= m - 1;
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.buf.len() {
            return None;
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|s| s[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|s| u16::from_be_bytes([s[0], s[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|s| {
            u64::from_be_bytes([s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]])
        })
    }
}

fn read_uid(r: &mut Reader, names: &[NodeId]) -> std::result::Result<NodeIdx, DiscardReason> {
    let len = r.u16().ok_or(DiscardReason::Malformed)? as usize;
    let raw = r.take(len).ok_or(DiscardReason::Malformed)?;
    let s = std::str::from_utf8(raw).map_err(|_| DiscardReason::Malformed)?;
    names
        .binary_search_by(|n| n.as_str().cmp(s))
        .map_err(|_| DiscardReason::UnknownUid)
}

/// Parse wire bytes against the sorted global UID table.
pub(crate) fn parse_wire(
    names: &[NodeId],
    bytes: &[u8],
) -> std::result::Result<Msg, DiscardReason> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.u8() != Some(WIRE_VERSION) {
        return Err(DiscardReason::Malformed);
    }
    let flags = r.u8().ok_or(DiscardReason::Malformed)?;
    if flags > 1 {
        return Err(DiscardReason::Malformed);
    }
    let session = r.u64().ok_or(DiscardReason::Malformed)?;
    let dest = read_uid(&mut r, names)?;
    let hcount = r.u16().ok_or(DiscardReason::Malformed)? as usize;
    if hcount == 0 || hcount > names.len() {
        return Err(DiscardReason::Malformed);
    }
    let mut header = Vec::with_capacity(hcount);
    let mut hmask = 0u64;
    for _ in 0..hcount {
        let idx = read_uid(&mut r, names)?;
        if hmask & (1 << idx) != 0 {
            return Err(DiscardReason::DuplicateUid);
        }
        hmask |= 1 << idx;
        header.push(idx);
    }
    let blen = r.u32().ok_or(DiscardReason::Malformed)? as usize;
    let body = r.take(blen).ok_or(DiscardReason::Malformed)?.to_vec();
    let attest = if flags & 1 != 0 {
        let mut atts = Vec::with_capacity(hcount);
        for _ in 0..hcount {
            let count = r.u16().ok_or(DiscardReason::Malformed)? as usize;
            if count > names.len() {
                return Err(DiscardReason::Malformed);
            }
            let mut mask = 0u64;
            for _ in 0..count {
                mask |= 1 << read_uid(&mut r, names)?;
            }
            atts.push(mask);
        }
        Some(atts)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(DiscardReason::Malformed);
    }
    Ok(Msg {
        session,
        dest,
        header,
        hmask,
        body,
        attest,
    })
}

impl PathMessage {
    pub fn encode(&self, uids: &[NodeId]) -> Result<Vec<u8>> {
        Ok(encode_wire(uids, &to_msg(uids, self)?))
    }

    pub fn decode(uids: &[NodeId], bytes: &[u8]) -> Result<PathMessage> {
        let msg = parse_wire(uids, bytes)
            .map_err(|r| Error::Config(format!("undecodable wire frame: {r:?}")))?;
        Ok(from_msg(uids, &msg))
    }
}

fn to_msg(uids: &[NodeId], pm: &PathMessage) -> Result<Msg> {
    let idx_of = |n: &NodeId| -> Result<usize> {
        uids.binary_search(n)
            .map_err(|_| Error::UnknownNode(n.to_string()))
    };
    let mut header = Vec::with_capacity(pm.header.len());
    let mut hmask = 0u64;
    for h in &pm.header {
        let i = idx_of(h)?;
        hmask |= 1 << i;
        header.push(i);
    }
    let attest = match &pm.attestations {
        None => None,
        Some(blocks) => {
            let mut out = Vec::with_capacity(blocks.len());
            for b in blocks {
                let mut m = 0u64;
                for n in b {
                    m |= 1 << idx_of(n)?;
                }
                out.push(m);
            }
            Some(out)
        }
    };
    Ok(Msg {
        session: pm.session,
        dest: idx_of(&pm.dest)?,
        header,
        hmask,
        body: pm.body.clone(),
        attest,
    })
}

fn from_msg(uids: &[NodeId], m: &Msg) -> PathMessage {
    let set_of = |mut mask: u64| -> NodeSet {
        let mut s = NodeSet::new();
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            s.insert(uids[i].clone());
            mask &= mask - 1;
        }
        s
    };
    PathMessage {
        session: m.session,
        dest: uids[m.dest].clone(),
        header: m.header.iter().map(|&i| uids[i].clone()).collect(),
        body: m.body.clone(),
        attestations: m.attest.as_ref().map(|a| a.iter().map(|&x| set_of(x)).collect()),
    }
}

/// Session facts a spoofing strategy extracts from an observed initial frame.
pub(crate) struct PathSpoofTarget {
    pub origin: NodeIdx,
    pub session: u64,
    pub dest: NodeIdx,
    pub body: Vec<u8>,
    pub attested: bool,
}

/// Build a frame with an arbitrary claimed path. When attestations are in
/// play, each forged entry attests exactly its claimed path neighbors (plus
/// the receiver for the final hop), which is the most plausible lie.
pub(crate) fn forge_frame(
    names: &[NodeId],
    session: u64,
    dest: NodeIdx,
    header: &[NodeIdx],
    body: &[u8],
    attested: bool,
    receiver: NodeIdx,
) -> Vec<u8> {
    let mut hmask = 0u64;
    for &h in header {
        hmask |= 1 << h;
    }
    let attest = if attested {
        let mut blocks = Vec::with_capacity(header.len());
        for (pos, _) in header.iter().enumerate() {
            let mut m = 0u64;
            if pos > 0 {
                m |= 1 << header[pos - 1];
            }
            if pos + 1 < header.len() {
                m |= 1 << header[pos + 1];
            } else {
                m |= 1 << receiver;
            }
            blocks.push(m);
        }
        Some(blocks)
    } else {
        None
    };
    encode_wire(
        names,
        &Msg {
            session,
            dest,
            header: header.to_vec(),
            hmask,
            body: body.to_vec(),
            attest,
        },
    )
}

// ---------------------------------------------------------------------------
// Receive validity and relay rules
// ---------------------------------------------------------------------------

/// Structural and path validity of a received message; `None` means valid.
/// `adj` is consulted in known mode only.
pub(crate) fn validity_error(
    msg: &Msg,
    me: NodeIdx,
    from: NodeIdx,
    knowledge: GraphKnowledge,
    adj: Option<&[u64]>,
) -> Option<DiscardReason> {
    let last = *msg.header.last().expect("parse keeps headers nonempty");
    if last != from {
        return Some(DiscardReason::LastHopNotSender);
    }
    if msg.header[0] == msg.dest {
        return Some(DiscardReason::OriginIsDest);
    }
    if msg.hmask & (1 << me) != 0 {
        return Some(DiscardReason::SelfInHeader);
    }
    match knowledge {
        GraphKnowledge::Known => {
            let adj = adj.expect("known mode has adjacency");
            for w in msg.header.windows(2) {
                if adj[w[0]] & (1 << w[1]) == 0 {
                    return Some(DiscardReason::NonAdjacentHops);
                }
            }
        }
        GraphKnowledge::Unknown => {
            let atts = match &msg.attest {
                Some(a) => a,
                None => return Some(DiscardReason::AttestationMissing),
            };
            for i in 0..msg.header.len() - 1 {
                let a = msg.header[i];
                let b = msg.header[i + 1];
                // Each hop must be attested by both endpoints.
                if atts[i] & (1 << b) == 0 || atts[i + 1] & (1 << a) == 0 {
                    return Some(DiscardReason::AttestationDenies);
                }
            }
            // The delivering neighbor must not deny the link it just used.
            if atts[msg.header.len() - 1] & (1 << me) == 0 {
                return Some(DiscardReason::AttestationDenies);
            }
        }
    }
    None
}

/// The relay step: append own UID (and attestation) and fan out to all
/// neighbors not already on the path. Callers have already validated.
pub(crate) fn relay_targets_and_msg(
    msg: &Msg,
    me: NodeIdx,
    my_neighbors: u64,
    my_attestation: Option<u64>,
) -> (u64, Msg) {
    let mut out = msg.clone();
    out.header.push(me);
    out.hmask |= 1 << me;
    if let Some(atts) = &mut out.attest {
        atts.push(my_attestation.unwrap_or(my_neighbors));
    }
    (my_neighbors & !out.hmask, out)
}

/// Everything a node needs to run the relay step for one inbound message.
pub struct RelayContext<'a> {
    pub me: &'a NodeId,
    pub my_neighbors: &'a NodeSet,
    pub delivered_by: &'a NodeId,
    pub knowledge: GraphKnowledge,
    /// Shared topology, known mode only.
    pub graph: Option<&'a Graph>,
    /// Global UID table (sorted).
    pub uids: &'a [NodeId],
}

/// Initial fan-out for a send: one message per neighbor of the origin with a
/// single-entry header. Self-delivery is a no-op.
pub fn flood_send(
    graph: &Graph,
    origin: &NodeId,
    dest: &NodeId,
    session: u64,
    body: &[u8],
    attest_origin: Option<&NodeSet>,
) -> Result<Vec<(NodeId, PathMessage)>> {
    if origin == dest {
        return Ok(Vec::new());
    }
    let oi = graph.idx(origin)?;
    graph.idx(dest)?;
    let pm = PathMessage {
        session,
        dest: dest.clone(),
        header: vec![origin.clone()],
        body: body.to_vec(),
        attestations: attest_origin.map(|s| vec![s.clone()]),
    };
    let mut out = Vec::new();
    let mut m = graph.adj_mask(oi);
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push((graph.node_at(i).clone(), pm.clone()));
        m &= m - 1;
    }
    Ok(out)
}

/// Validate-and-forward for one received message. Discards return an empty
/// vector; calling this as the destination is a usage error.
pub fn flood_relay(
    ctx: &RelayContext,
    incoming: &PathMessage,
) -> Result<Vec<(NodeId, PathMessage)>> {
    if *ctx.me == incoming.dest {
        return Err(Error::Config(
            "flood_relay invoked at the destination; destinations collect instead".into(),
        ));
    }
    let msg = match to_msg(ctx.uids, incoming) {
        Ok(m) => m,
        Err(_) => return Ok(Vec::new()),
    };
    if msg.attest.as_ref().is_some_and(|a| a.len() != msg.header.len()) {
        return Ok(Vec::new());
    }
    let me = ctx
        .uids
        .binary_search(ctx.me)
        .map_err(|_| Error::UnknownNode(ctx.me.to_string()))?;
    let from = ctx
        .uids
        .binary_search(ctx.delivered_by)
        .map_err(|_| Error::UnknownNode(ctx.delivered_by.to_string()))?;
    let adj_table: Option<Vec<u64>> = match ctx.knowledge {
        GraphKnowledge::Known => {
            let g = ctx
                .graph
                .ok_or_else(|| Error::Config("known mode requires the graph".into()))?;
            Some((0..g.node_count()).map(|i| g.adj_mask(i)).collect())
        }
        GraphKnowledge::Unknown => None,
    };
    if validity_error(&msg, me, from, ctx.knowledge, adj_table.as_deref()).is_some() {
        return Ok(Vec::new());
    }
    let mut nmask = 0u64;
    for n in ctx.my_neighbors {
        nmask |= 1 << ctx
            .uids
            .binary_search(n)
            .map_err(|_| Error::UnknownNode(n.to_string()))?;
    }
    let (targets, out) = relay_targets_and_msg(&msg, me, nmask, None);
    let pm = from_msg(ctx.uids, &out);
    let mut result = Vec::new();
    let mut t = targets;
    while t != 0 {
        let i = t.trailing_zeros() as usize;
        result.push((ctx.uids[i].clone(), pm.clone()));
        t &= t - 1;
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Decoders
// ---------------------------------------------------------------------------

fn mask_to_set(uids: &[NodeId], mut mask: u64) -> NodeSet {
    let mut s = NodeSet::new();
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        s.insert(uids[i].clone());
        mask &= mask - 1;
    }
    s
}

/// Known-topology sweep over maximal fault hypotheses.
pub(crate) fn decode_known_indexed(
    msgs: &[Msg],
    hyps: &[(u64, NodeSet)],
    uids: &[NodeId],
) -> DecodeOutcome {
    let mut records: Vec<(usize, &[u8])> = Vec::new();
    for (k, (mask, _)) in hyps.iter().enumerate() {
        let mut body: Option<&[u8]> = None;
        let mut consistent = true;
        for m in msgs {
            if m.hmask & mask != 0 {
                continue;
            }
            match body {
                None => body = Some(&m.body),
                Some(b) if b == m.body.as_slice() => {}
                Some(_) => {
                    consistent = false;
                    break;
                }
            }
        }
        if let (true, Some(b)) = (consistent, body) {
            records.push((k, b));
        }
    }
    finish_decode(records, hyps, uids)
}

fn finish_decode(
    records: Vec<(usize, &[u8])>,
    hyps: &[(u64, NodeSet)],
    uids: &[NodeId],
) -> DecodeOutcome {
    let _ = uids;
    let Some(&(first_k, first_body)) = records.first() else {
        return DecodeOutcome::NoMessage;
    };
    for &(k, body) in records.iter().skip(1) {
        if body != first_body {
            return DecodeOutcome::Ambiguous {
                hypothesis_a: FaultHypothesis {
                    members: hyps[first_k].1.clone(),
                },
                body_a: first_body.to_vec(),
                hypothesis_b: FaultHypothesis {
                    members: hyps[k].1.clone(),
                },
                body_b: body.to_vec(),
            };
        }
    }
    DecodeOutcome::Delivered {
        body: first_body.to_vec(),
        hypothesis: FaultHypothesis {
            members: hyps[first_k].1.clone(),
        },
    }
}

/// Decode with the real graph in hand.
pub fn flood_decode(
    inbox: &[PathMessage],
    model: &FaultModel,
    graph: &Graph,
    origin: &NodeId,
) -> Result<DecodeOutcome> {
    let uids = graph.nodes();
    let oi = graph.idx(origin)?;
    let mut msgs = Vec::with_capacity(inbox.len());
    for pm in inbox {
        let m = to_msg(uids, pm)?;
        if m.header[0] == oi {
            msgs.push(m);
        }
    }
    let hyps: Vec<(u64, NodeSet)> = model
        .enumerate_maximal_fault_sets(&graph.node_set())?
        .into_iter()
        .map(|s| Ok((graph.set_to_mask(&s)?, s)))
        .collect::<Result<_>>()?;
    Ok(decode_known_indexed(&msgs, &hyps, uids))
}

enum ConflictResolution {
    Ambiguous,
    EliminateFirst,
    EliminateSecond,
    EliminateBoth,
}

/// Unknown-topology sweep. Header validity already used attestations on
/// receipt; here each hypothesis additionally requires the surviving
/// messages to agree on the attestation of every node they mention, and
/// conflicting hypothesis pairs are arbitrated through the attested boundary
/// of the receiver's trusted component.
pub(crate) fn decode_unknown_indexed(
    msgs: &[Msg],
    hyps: &[(u64, NodeSet)],
    uids: &[NodeId],
    me: NodeIdx,
    my_true_neighbors: u64,
    model: &FaultModel,
) -> DecodeOutcome {
    let mut records: Vec<(usize, &[u8])> = Vec::new();
    for (k, (mask, _)) in hyps.iter().enumerate() {
        let mut body: Option<&[u8]> = None;
        let mut consistent = true;
        let mut attest_seen: BTreeMap<NodeIdx, u64> = BTreeMap::new();
        for m in msgs {
            if m.hmask & mask != 0 {
                continue;
            }
            match body {
                None => body = Some(&m.body),
                Some(b) if b == m.body.as_slice() => {}
                Some(_) => {
                    consistent = false;
                    break;
                }
            }
            if let Some(atts) = &m.attest {
                for (pos, &node) in m.header.iter().enumerate() {
                    match attest_seen.get(&node) {
                        None => {
                            attest_seen.insert(node, atts[pos]);
                        }
                        Some(&prev) if prev == atts[pos] => {}
                        Some(_) => {
                            consistent = false;
                            break;
                        }
                    }
                }
                if !consistent {
                    break;
                }
            }
        }
        if let (true, Some(b)) = (consistent, body) {
            records.push((k, b));
        }
    }

    // Arbitrate conflicting pairs in enumeration order.
    'outer: loop {
        let mut conflict: Option<(usize, usize)> = None;
        'scan: for i in 0..records.len() {
            for j in (i + 1)..records.len() {
                if records[i].1 != records[j].1 {
                    conflict = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((i, j)) = conflict else {
            return finish_decode(records, hyps, uids);
        };
        let f1 = hyps[records[i].0].0;
        let f2 = hyps[records[j].0].0;
        match resolve_conflict(msgs, uids, me, my_true_neighbors, model, f1, f2) {
            ConflictResolution::Ambiguous => {
                return DecodeOutcome::Ambiguous {
                    hypothesis_a: FaultHypothesis {
                        members: hyps[records[i].0].1.clone(),
                    },
                    body_a: records[i].1.to_vec(),
                    hypothesis_b: FaultHypothesis {
                        members: hyps[records[j].0].1.clone(),
                    },
                    body_b: records[j].1.to_vec(),
                };
            }
            ConflictResolution::EliminateFirst => {
                records.remove(i);
            }
            ConflictResolution::EliminateSecond => {
                records.remove(j);
            }
            ConflictResolution::EliminateBoth => {
                records.remove(j);
                records.remove(i);
            }
        }
        continue 'outer;
    }
}

/// Grow the receiver's trusted component T from its own true neighbors
/// through attestations carried by messages that avoid both hypotheses, then
/// split T's attested boundary between the hypotheses.
fn resolve_conflict(
    msgs: &[Msg],
    uids: &[NodeId],
    me: NodeIdx,
    my_true_neighbors: u64,
    model: &FaultModel,
    f1: u64,
    f2: u64,
) -> ConflictResolution {
    let union = f1 | f2;
    // Attestations relayed exclusively by nodes outside both hypotheses.
    let mut trusted_attest: BTreeMap<NodeIdx, Option<u64>> = BTreeMap::new();
    for m in msgs {
        if m.hmask & union != 0 {
            continue;
        }
        if let Some(atts) = &m.attest {
            for (pos, &node) in m.header.iter().enumerate() {
                trusted_attest
                    .entry(node)
                    .and_modify(|e| {
                        if *e != Some(atts[pos]) {
                            *e = None;
                        }
                    })
                    .or_insert(Some(atts[pos]));
            }
        }
    }

    let mut t_mask: u64 = 1 << me;
    let mut frontier_edges: u64 = my_true_neighbors;
    loop {
        let additions = frontier_edges & !union & !t_mask;
        if additions == 0 {
            break;
        }
        t_mask |= additions;
        let mut a = additions;
        frontier_edges = 0;
        while a != 0 {
            let i = a.trailing_zeros() as usize;
            if let Some(Some(att)) = trusted_attest.get(&i) {
                frontier_edges |= att;
            }
            a &= a - 1;
        }
    }
    let mut boundary: u64 = my_true_neighbors & !t_mask;
    let mut t = t_mask & !(1 << me);
    while t != 0 {
        let i = t.trailing_zeros() as usize;
        if let Some(Some(att)) = trusted_attest.get(&i) {
            boundary |= att & !t_mask;
        }
        t &= t - 1;
    }
    boundary &= union;

    let a_mask = boundary & f1;
    let b_mask = boundary & !f1;
    if a_mask == 0 && b_mask == 0 {
        return ConflictResolution::EliminateBoth;
    }
    if a_mask == 0 {
        return ConflictResolution::EliminateSecond;
    }
    if b_mask == 0 {
        return ConflictResolution::EliminateFirst;
    }
    let a_set = mask_to_set(uids, a_mask);
    let b_set = mask_to_set(uids, b_mask);
    match (model.can_all_fault(&a_set), model.can_all_fault(&b_set)) {
        (true, true) => ConflictResolution::Ambiguous,
        (false, _) => ConflictResolution::EliminateFirst,
        (_, false) => ConflictResolution::EliminateSecond,
    }
}

/// Decode without the graph: `uids` is the globally known UID table and
/// `receiver_neighbors` the receiver's own (locally known) neighbor set.
pub fn flood_decode_unknown(
    inbox: &[PathMessage],
    model: &FaultModel,
    uids: &[NodeId],
    origin: &NodeId,
    receiver: &NodeId,
    receiver_neighbors: &NodeSet,
) -> Result<DecodeOutcome> {
    let mut sorted = uids.to_vec();
    sorted.sort();
    let uids = &sorted[..];
    let oi = uids
        .binary_search(origin)
        .map_err(|_| Error::UnknownNode(origin.to_string()))?;
    let me = uids
        .binary_search(receiver)
        .map_err(|_| Error::UnknownNode(receiver.to_string()))?;
    let mut nmask = 0u64;
    for n in receiver_neighbors {
        nmask |= 1 << uids
            .binary_search(n)
            .map_err(|_| Error::UnknownNode(n.to_string()))?;
    }
    let mut msgs = Vec::with_capacity(inbox.len());
    for pm in inbox {
        let m = to_msg(uids, pm)?;
        if m.header[0] == oi {
            msgs.push(m);
        }
    }
    let universe: NodeSet = uids.iter().cloned().collect();
    let hyps: Vec<(u64, NodeSet)> = model
        .enumerate_maximal_fault_sets(&universe)?
        .into_iter()
        .map(|s| {
            let mut m = 0u64;
            for n in &s {
                m |= 1 << uids.binary_search(n).expect("hypothesis within universe");
            }
            (m, s)
        })
        .collect();
    Ok(decode_unknown_indexed(&msgs, &hyps, uids, me, nmask, model))
}

// ---------------------------------------------------------------------------
// Relay process machinery shared by protocols
// ---------------------------------------------------------------------------

/// Per-node relay state: validation, duplicate suppression, the forward
/// queue, and per-session inboxes at the destination.
pub(crate) struct RelayCore {
    pub me: NodeIdx,
    pub names: Arc<Vec<NodeId>>,
    pub knowledge: GraphKnowledge,
    pub adj: Option<Arc<Vec<u64>>>,
    pub my_neighbors: u64,
    /// Attached when relaying in unknown mode; honest nodes attest truly.
    pub my_attestation: u64,
    seen: std::collections::BTreeSet<Vec<u8>>,
    forward: Vec<(NodeIdx, Vec<u8>)>,
    pub inboxes: BTreeMap<(NodeIdx, u64), Vec<Msg>>,
}

impl RelayCore {
    pub fn new(
        me: NodeIdx,
        names: Arc<Vec<NodeId>>,
        knowledge: GraphKnowledge,
        adj: Option<Arc<Vec<u64>>>,
        my_neighbors: u64,
    ) -> Self {
        RelayCore {
            me,
            names,
            knowledge,
            adj,
            my_neighbors,
            my_attestation: my_neighbors,
            seen: Default::default(),
            forward: Vec::new(),
            inboxes: BTreeMap::new(),
        }
    }

    /// Fan a fresh send out to all neighbors.
    pub fn send_new(&self, session: u64, dest: NodeIdx, body: Vec<u8>) -> Vec<(NodeIdx, Vec<u8>)> {
        let msg = Msg {
            session,
            dest,
            header: vec![self.me],
            hmask: 1 << self.me,
            body,
            attest: match self.knowledge {
                GraphKnowledge::Known => None,
                GraphKnowledge::Unknown => Some(vec![self.my_attestation]),
            },
        };
        let bytes = encode_wire(&self.names, &msg);
        let mut out = Vec::new();
        let mut m = self.my_neighbors;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            out.push((i, bytes.clone()));
            m &= m - 1;
        }
        out
    }

    /// Validate one delivery; collect it (destination) or queue the relays.
    /// Returns a discard event when the message is thrown out.
    pub fn ingest(&mut self, env: &SimEnvelope) -> Option<NodeEvent> {
        let msg = match parse_wire(&self.names, &env.payload) {
            Ok(m) => m,
            Err(reason) => {
                return Some(NodeEvent::Discard {
                    from: env.from,
                    reason,
                    payload: env.payload.clone(),
                });
            }
        };
        if msg
            .attest
            .as_ref()
            .is_some_and(|a| a.len() != msg.header.len())
        {
            return Some(NodeEvent::Discard {
                from: env.from,
                reason: DiscardReason::Malformed,
                payload: env.payload.clone(),
            });
        }
        if self.seen.contains(&env.payload) {
            return None;
        }
        if let Some(reason) = validity_error(
            &msg,
            self.me,
            env.from,
            self.knowledge,
            self.adj.as_ref().map(|a| a.as_slice()),
        ) {
            // Plain duplicate-suppression discards are part of normal
            // operation; everything else is worth a record.
            return Some(NodeEvent::Discard {
                from: env.from,
                reason,
                payload: env.payload.clone(),
            });
        }
        self.seen.insert(env.payload.clone());
        if msg.dest == self.me {
            self.inboxes
                .entry((msg.header[0], msg.session))
                .or_default()
                .push(msg);
            return None;
        }
        let (targets, out) = relay_targets_and_msg(
            &msg,
            self.me,
            self.my_neighbors,
            Some(self.my_attestation),
        );
        if targets != 0 {
            let bytes = encode_wire(&self.names, &out);
            let mut t = targets;
            while t != 0 {
                let i = t.trailing_zeros() as usize;
                self.forward.push((i, bytes.clone()));
                t &= t - 1;
            }
        }
        None
    }

    pub fn drain(&mut self) -> Vec<(NodeIdx, Vec<u8>)> {
        std::mem::take(&mut self.forward)
    }

    pub fn inbox(&self, origin: NodeIdx, session: u64) -> &[Msg] {
        self.inboxes
            .get(&(origin, session))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }
}

// ---------------------------------------------------------------------------
// Single-send protocol (used by flood-level tests and the harness demos)
// ---------------------------------------------------------------------------

/// Honest logic for one message send: everyone relays, the origin emits at
/// round 1, the destination decodes at the end of the scheduler window.
pub struct SingleSendProtocol {
    pub origin: NodeId,
    pub dest: NodeId,
    pub body: Vec<u8>,
    pub session: u64,
    pub knowledge: GraphKnowledge,
}

struct SingleSendNode {
    core: RelayCore,
    role_origin: bool,
    dest_idx: NodeIdx,
    /// Set iff this node is the destination: the origin to decode.
    decode_origin_idx: Option<NodeIdx>,
    body: Vec<u8>,
    session: u64,
    decode_round: usize,
    hyps: Arc<Vec<(u64, NodeSet)>>,
    model: Arc<FaultModel>,
}

impl Process for SingleSendNode {
    fn send(&mut self, round: usize) -> std::result::Result<Vec<(NodeIdx, Vec<u8>)>, String> {
        let mut out = self.core.drain();
        if round == 1 && self.role_origin {
            out.extend(self.core.send_new(self.session, self.dest_idx, self.body.clone()));
        }
        Ok(out)
    }

    fn receive(
        &mut self,
        round: usize,
        inbox: &[SimEnvelope],
    ) -> std::result::Result<Vec<NodeEvent>, String> {
        let mut events = Vec::new();
        for env in inbox {
            if let Some(ev) = self.core.ingest(env) {
                events.push(ev);
            }
        }
        if round == self.decode_round {
            if let Some(origin) = self.decode_origin_idx {
                let msgs = self.core.inbox(origin, self.session).to_vec();
                let outcome = match self.core.knowledge {
                    GraphKnowledge::Known => {
                        decode_known_indexed(&msgs, &self.hyps, &self.core.names)
                    }
                    GraphKnowledge::Unknown => decode_unknown_indexed(
                        &msgs,
                        &self.hyps,
                        &self.core.names,
                        self.core.me,
                        self.core.my_neighbors,
                        &self.model,
                    ),
                };
                events.push(NodeEvent::Decode {
                    origin,
                    session: self.session,
                    outcome,
                });
            }
        }
        Ok(events)
    }

    fn decision(&self) -> Option<InputValue> {
        None
    }
}

impl ProtocolSpec for SingleSendProtocol {
    fn build(&self, node: NodeIdx, env: &ProtocolEnv) -> Result<Box<dyn Process>> {
        let g = env.graph;
        let names = Arc::new(g.nodes().to_vec());
        let adj: Arc<Vec<u64>> = Arc::new((0..g.node_count()).map(|i| g.adj_mask(i)).collect());
        let oi = g.idx(&self.origin)?;
        let di = g.idx(&self.dest)?;
        let hyps: Vec<(u64, NodeSet)> = env
            .fault_model
            .enumerate_maximal_fault_sets(&g.node_set())?
            .into_iter()
            .map(|s| Ok((g.set_to_mask(&s)?, s)))
            .collect::<Result<_>>()?;
        let core = RelayCore::new(
            node,
            names,
            self.knowledge,
            match self.knowledge {
                GraphKnowledge::Known => Some(adj),
                GraphKnowledge::Unknown => None,
            },
            g.adj_mask(node),
        );
        Ok(Box::new(SingleSendNode {
            core,
            role_origin: node == oi,
            dest_idx: di,
            decode_origin_idx: if node == di { Some(oi) } else { None },
            body: self.body.clone(),
            session: self.session,
            decode_round: session_window(g.node_count()),
            hyps: Arc::new(hyps),
            model: Arc::new(env.fault_model.clone()),
        }))
    }

    fn round_budget(&self, env: &ProtocolEnv) -> usize {
        session_window(env.graph.node_count())
    }
}
