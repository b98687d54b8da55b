//! Binary wire format. Little-endian throughout.
//!
//! ```text
//! frame      = magic "FBT1" | tag u8 | payload_len u64 | payload
//! polynomial = domain u8 (0 = coefficient, 1 = NTT) | limbs × N × u64 residues
//! ciphertext = c0 polynomial | c1 polynomial
//!
//! tag 1  EncryptedUpdate    client_id u64 | round u64 | count u32 | ciphertexts | L × (lo f64, hi f64)
//! tag 2  AggregateBroadcast round u64 | participants u64 | count u32 | ciphertexts | L × (lo f64, hi f64)
//! tag 3  ModelInit          round u64 | layers u32 | per layer: len u64, len × f64
//! tag 4  Abort              round u64 | reason_len u32 | UTF-8 reason
//! ```
//!
//! The per-layer metadata count is implied by the bytes left after the
//! ciphertexts. Ciphertext round tags come from the enclosing message and
//! indices from their position.

use bitfold_core::bfv::CiphertextTag;
use bitfold_core::{Ciphertext, Domain, Polynomial, RingContext};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FBT1";
pub const HEADER_LEN: usize = 13;

pub const TAG_UPDATE: u8 = 1;
pub const TAG_BROADCAST: u8 = 2;
pub const TAG_MODEL_INIT: u8 = 3;
pub const TAG_ABORT: u8 = 4;

const DOMAIN_COEFFICIENT: u8 = 0;
const DOMAIN_NTT: u8 = 1;

/// Per-layer quantization range echoed alongside ciphertexts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantMeta {
    pub lo: f64,
    pub hi: f64,
}

impl QuantMeta {
    pub fn bits_eq(&self, other: &QuantMeta) -> bool {
        self.lo.to_bits() == other.lo.to_bits() && self.hi.to_bits() == other.hi.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedUpdate {
    pub client_id: u64,
    pub round: u64,
    pub cts: Vec<Ciphertext>,
    pub quant_meta: Vec<QuantMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateBroadcast {
    pub round: u64,
    pub participants: u64,
    pub cts: Vec<Ciphertext>,
    pub quant_meta: Vec<QuantMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInit {
    pub round: u64,
    pub layers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abort {
    pub round: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Update(EncryptedUpdate),
    Broadcast(AggregateBroadcast),
    ModelInit(ModelInit),
    Abort(Abort),
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Update(_) => TAG_UPDATE,
            Message::Broadcast(_) => TAG_BROADCAST,
            Message::ModelInit(_) => TAG_MODEL_INIT,
            Message::Abort(_) => TAG_ABORT,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Update(_) => "EncryptedUpdate",
            Message::Broadcast(_) => "AggregateBroadcast",
            Message::ModelInit(_) => "ModelInit",
            Message::Abort(_) => "Abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireErrorKind {
    #[error("bad magic or unsupported version")]
    BadMagic,
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("truncated input: need {needed} more bytes")]
    Truncated { needed: usize },
    #[error("payload length {declared} disagrees with {actual} available bytes")]
    LengthMismatch { declared: u64, actual: usize },
    #[error("unknown polynomial domain flag {0}")]
    BadDomain(u8),
    #[error("c{component} must be in the {expected:?} domain")]
    WrongDomain { component: u8, expected: Domain },
    #[error("residue {value} is not below limb modulus {modulus}")]
    ResidueOutOfRange { value: u64, modulus: u64 },
    #[error("trailing metadata of {0} bytes is not a whole number of (lo, hi) pairs")]
    BadMetadata(usize),
    #[error("reason is not valid UTF-8")]
    BadUtf8,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decode error at byte {offset}: {kind}")]
pub struct WireError {
    pub offset: usize,
    pub kind: WireErrorKind,
}

/// Bytes of one serialized polynomial.
pub fn polynomial_len(ctx: &RingContext) -> usize {
    1 + ctx.limb_count() * ctx.n() * 8
}

/// Bytes of one serialized ciphertext.
pub fn ciphertext_len(ctx: &RingContext) -> usize {
    2 * polynomial_len(ctx)
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        Message::Update(u) => {
            put_u64(&mut payload, u.client_id);
            put_u64(&mut payload, u.round);
            put_cts(&mut payload, &u.cts);
            put_meta(&mut payload, &u.quant_meta);
        }
        Message::Broadcast(b) => {
            put_u64(&mut payload, b.round);
            put_u64(&mut payload, b.participants);
            put_cts(&mut payload, &b.cts);
            put_meta(&mut payload, &b.quant_meta);
        }
        Message::ModelInit(m) => {
            put_u64(&mut payload, m.round);
            payload.extend_from_slice(&(m.layers.len() as u32).to_le_bytes());
            for layer in &m.layers {
                put_u64(&mut payload, layer.len() as u64);
                for w in layer {
                    payload.extend_from_slice(&w.to_le_bytes());
                }
            }
        }
        Message::Abort(a) => {
            put_u64(&mut payload, a.round);
            payload.extend_from_slice(&(a.reason.len() as u32).to_le_bytes());
            payload.extend_from_slice(a.reason.as_bytes());
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(msg.tag());
    put_u64(&mut out, payload.len() as u64);
    out.extend_from_slice(&payload);
    out
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_poly(buf: &mut Vec<u8>, p: &Polynomial) {
    buf.push(match p.domain() {
        Domain::Coefficient => DOMAIN_COEFFICIENT,
        Domain::Ntt => DOMAIN_NTT,
    });
    buf.reserve(p.residues().len() * 8);
    for r in p.residues() {
        buf.extend_from_slice(&r.to_le_bytes());
    }
}

fn put_cts(buf: &mut Vec<u8>, cts: &[Ciphertext]) {
    buf.extend_from_slice(&(cts.len() as u32).to_le_bytes());
    for ct in cts {
        put_poly(buf, ct.c0());
        put_poly(buf, ct.c1());
    }
}

fn put_meta(buf: &mut Vec<u8>, meta: &[QuantMeta]) {
    for m in meta {
        buf.extend_from_slice(&m.lo.to_le_bytes());
        buf.extend_from_slice(&m.hi.to_le_bytes());
    }
}

/// Parses just the frame header, returning `(tag, payload_len)`.
pub fn decode_header(bytes: &[u8]) -> Result<(u8, u64), WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(WireError { offset: 0, kind: WireErrorKind::BadMagic });
    }
    let tag = r.u8()?;
    if !(TAG_UPDATE..=TAG_ABORT).contains(&tag) {
        return Err(WireError { offset: 4, kind: WireErrorKind::UnknownTag(tag) });
    }
    Ok((tag, r.u64()?))
}

pub fn decode_message(bytes: &[u8], ctx: &RingContext) -> Result<Message, WireError> {
    let (tag, declared) = decode_header(bytes)?;
    let actual = bytes.len() - HEADER_LEN;
    if declared != actual as u64 {
        let kind = if declared > actual as u64 {
            WireErrorKind::Truncated { needed: (declared - actual as u64) as usize }
        } else {
            WireErrorKind::LengthMismatch { declared, actual }
        };
        return Err(WireError { offset: 5, kind });
    }
    let mut r = Reader { bytes, pos: HEADER_LEN };
    let msg = match tag {
        TAG_UPDATE => {
            let client_id = r.u64()?;
            let round = r.u64()?;
            let cts = r.cts(ctx, round)?;
            let quant_meta = r.meta()?;
            Message::Update(EncryptedUpdate { client_id, round, cts, quant_meta })
        }
        TAG_BROADCAST => {
            let round = r.u64()?;
            let participants = r.u64()?;
            let cts = r.cts(ctx, round)?;
            let quant_meta = r.meta()?;
            Message::Broadcast(AggregateBroadcast { round, participants, cts, quant_meta })
        }
        TAG_MODEL_INIT => {
            let round = r.u64()?;
            let count = r.u32()? as usize;
            let mut layers = Vec::with_capacity(count.min(r.remaining() / 8));
            for _ in 0..count {
                let len = r.u64()? as usize;
                let need = len.saturating_mul(8);
                if need > r.remaining() {
                    return Err(r.truncated(need));
                }
                let layer = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                layers.push(layer);
            }
            Message::ModelInit(ModelInit { round, layers })
        }
        TAG_ABORT => {
            let round = r.u64()?;
            let len = r.u32()? as usize;
            let at = r.pos;
            let raw = r.take(len)?;
            let reason = std::str::from_utf8(raw)
                .map_err(|_| WireError { offset: at, kind: WireErrorKind::BadUtf8 })?
                .to_owned();
            Message::Abort(Abort { round, reason })
        }
        _ => unreachable!("tag checked by decode_header"),
    };
    if r.remaining() != 0 {
        return Err(WireError { offset: r.pos, kind: WireErrorKind::TrailingBytes(r.remaining()) });
    }
    Ok(msg)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn truncated(&self, want: usize) -> WireError {
        WireError { offset: self.pos, kind: WireErrorKind::Truncated { needed: want - self.remaining() } }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], WireError> {
        if len > self.remaining() {
            return Err(self.truncated(len));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn poly(&mut self, ctx: &RingContext) -> Result<Polynomial, WireError> {
        let flag_at = self.pos;
        let domain = match self.u8()? {
            DOMAIN_COEFFICIENT => Domain::Coefficient,
            DOMAIN_NTT => Domain::Ntt,
            other => return Err(WireError { offset: flag_at, kind: WireErrorKind::BadDomain(other) }),
        };
        let need = ctx.poly_len() * 8;
        if need > self.remaining() {
            return Err(self.truncated(need));
        }
        let mut residues = Vec::with_capacity(ctx.poly_len());
        for m in ctx.limbs() {
            for _ in 0..ctx.n() {
                let at = self.pos;
                let value = self.u64()?;
                if value >= m.value() {
                    return Err(WireError {
                        offset: at,
                        kind: WireErrorKind::ResidueOutOfRange { value, modulus: m.value() },
                    });
                }
                residues.push(value);
            }
        }
        Ok(Polynomial::from_residues(ctx, domain, residues).expect("residues validated above"))
    }

    fn cts(&mut self, ctx: &RingContext, round: u64) -> Result<Vec<Ciphertext>, WireError> {
        let count = self.u32()? as usize;
        let need = count.saturating_mul(ciphertext_len(ctx));
        if need > self.remaining() {
            return Err(self.truncated(need));
        }
        let mut cts = Vec::with_capacity(count);
        for index in 0..count {
            let c0_at = self.pos;
            let c0 = self.poly(ctx)?;
            if c0.domain() != Domain::Coefficient {
                return Err(WireError {
                    offset: c0_at,
                    kind: WireErrorKind::WrongDomain { component: 0, expected: Domain::Coefficient },
                });
            }
            let c1_at = self.pos;
            let c1 = self.poly(ctx)?;
            if c1.domain() != Domain::Ntt {
                return Err(WireError {
                    offset: c1_at,
                    kind: WireErrorKind::WrongDomain { component: 1, expected: Domain::Ntt },
                });
            }
            let tag = CiphertextTag { round, index: index as u64 };
            cts.push(Ciphertext::from_parts(c0, c1, tag).expect("domains checked above"));
        }
        Ok(cts)
    }

    fn meta(&mut self) -> Result<Vec<QuantMeta>, WireError> {
        if !self.remaining().is_multiple_of(16) {
            return Err(WireError { offset: self.pos, kind: WireErrorKind::BadMetadata(self.remaining()) });
        }
        let mut out = Vec::with_capacity(self.remaining() / 16);
        while self.remaining() > 0 {
            let lo = self.f64()?;
            let hi = self.f64()?;
            out.push(QuantMeta { lo, hi });
        }
        Ok(out)
    }
}
