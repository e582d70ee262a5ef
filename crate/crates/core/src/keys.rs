//! Key material and its derivation from a 128-bit user key and a timestamp.
//!
//! The position template and the modulus indices are read as 6-bit chunks
//! from a chain of AES-128 (ECB) blocks: `C_1 = E_U(T)`, `C_{k+1} = E_U(C_k)`.
//! The template consumes whole blocks from the head of the chain; modulus
//! selection starts at the next unused block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::modmath::{self, capacity_check, pow2, ModMathError, ModulusSet};

/// Six-bit chunks per 128-bit block (two trailing bits are unused).
pub const CHUNKS_PER_BLOCK: usize = 21;
/// Largest pool size or slot count addressable by a 6-bit chunk.
pub const MAX_INDEX: usize = 64;
/// Minimum `a / eta_max` ratio enforced by private-key validation.
pub const NOISE_HEADROOM_BITS: u32 = 30;
/// Blocks the modulus selection may consume before giving up.
const MODULUS_BLOCK_LIMIT: usize = 64;

const KEY_HEADER: &str = "cmpswhe-key v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("user key must be 32 hex digits: {0}")]
    BadUserKey(String),
    #[error("invalid key parameters: {0}")]
    InvalidParams(String),
    #[error("key derivation exhausted {0} cipher blocks before finding enough distinct moduli")]
    DerivationExhausted(usize),
    #[error(transparent)]
    Modulus(#[from] ModMathError),
    #[error("malformed key file: {0}")]
    Malformed(String),
    #[error("unsupported key file version: {0}")]
    Version(String),
}

/// 128-bit secret from which all key material is derived.
#[derive(Clone, PartialEq, Eq)]
pub struct UserKey([u8; 16]);

impl std::fmt::Debug for UserKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("UserKey(..)")
    }
}

impl UserKey {
    pub fn new(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self, KeyError> {
        let text = text.trim();
        if text.len() != 32 || !text.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(KeyError::BadUserKey(text.to_string()));
        }
        let mut bytes = [0u8; 16];
        for (i, byte) in bytes.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&text[2 * i..2 * i + 2], 16)
                .map_err(|_| KeyError::BadUserKey(text.to_string()))?;
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// Operating envelope a key is validated for: plaintext magnitude bound,
/// maximum ciphertext order and maximum polynomial term count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub max_p: BigUint,
    pub max_order: u32,
    pub max_terms: BigUint,
}

impl Default for Envelope {
    fn default() -> Self {
        Self {
            max_p: pow2(16),
            max_order: 8,
            max_terms: pow2(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyParams {
    /// Size of the prime pool (`n`).
    pub pool_size: usize,
    /// Moduli per key (`N`).
    pub moduli: usize,
    /// Projections per modulus, one correct plus `M - 1` redundant (`M`).
    pub slots: usize,
    pub a: BigUint,
    pub eta_max: BigUint,
    pub start_bits: u32,
    pub envelope: Envelope,
}

impl Default for KeyParams {
    fn default() -> Self {
        Self {
            pool_size: 64,
            moduli: 20,
            slots: 64,
            a: pow2(100),
            eta_max: pow2(62),
            start_bits: 61,
            envelope: Envelope::default(),
        }
    }
}

impl KeyParams {
    pub fn validate(&self) -> Result<(), KeyError> {
        if self.pool_size <= self.moduli {
            return Err(KeyError::InvalidParams(format!(
                "pool size {} must exceed the modulus count {}",
                self.pool_size, self.moduli
            )));
        }
        if self.pool_size > MAX_INDEX {
            return Err(KeyError::InvalidParams(format!(
                "pool size {} exceeds the 6-bit index range",
                self.pool_size
            )));
        }
        if self.moduli == 0 {
            return Err(KeyError::InvalidParams("at least one modulus is required".into()));
        }
        if self.slots < 2 || self.slots > MAX_INDEX {
            return Err(KeyError::InvalidParams(format!(
                "slot count {} must lie in [2, {MAX_INDEX}]",
                self.slots
            )));
        }
        Ok(())
    }
}

/// Amplification factor, modulus group and the declared envelope.
#[derive(Debug, Clone)]
pub struct PublicKey {
    a: BigUint,
    mset: Arc<ModulusSet>,
    slots: usize,
    envelope: Envelope,
    a_residues: Vec<u64>,
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.mset == other.mset
            && self.slots == other.slots
            && self.envelope == other.envelope
    }
}

impl Eq for PublicKey {}

impl PublicKey {
    /// Builds a key and checks the capacity inequality for its envelope.
    pub fn new(a: BigUint, mset: ModulusSet, slots: usize, envelope: Envelope) -> Result<Self, KeyError> {
        let pk = Self::new_relaxed(a, mset, slots, envelope)?;
        if !capacity_check(
            &pk.a,
            &pk.envelope.max_p,
            pk.envelope.max_order,
            &pk.envelope.max_terms,
            &pk.mset,
        ) {
            return Err(KeyError::InvalidParams(format!(
                "envelope (max_p={}, order={}, terms={}) overflows the modulus product",
                pk.envelope.max_p, pk.envelope.max_order, pk.envelope.max_terms
            )));
        }
        Ok(pk)
    }

    /// Structural checks only. Used for demonstration-sized parameters
    /// that deliberately sit outside the capacity envelope.
    pub fn new_relaxed(a: BigUint, mset: ModulusSet, slots: usize, envelope: Envelope) -> Result<Self, KeyError> {
        if a < BigUint::one() {
            return Err(KeyError::InvalidParams("amplification factor must be positive".into()));
        }
        if slots == 0 {
            return Err(KeyError::InvalidParams("slot count must be positive".into()));
        }
        if envelope.max_order == 0 {
            return Err(KeyError::InvalidParams("envelope order must be positive".into()));
        }
        let a_residues = (0..mset.len()).map(|i| mset.residue(&a, i)).collect();
        Ok(Self {
            a,
            mset: Arc::new(mset),
            slots,
            envelope,
            a_residues,
        })
    }

    pub fn a(&self) -> &BigUint {
        &self.a
    }

    pub fn mset(&self) -> &ModulusSet {
        &self.mset
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn rows(&self) -> usize {
        self.mset.len()
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    /// `a mod b_i` for every modulus.
    pub fn a_residues(&self) -> &[u64] {
        &self.a_residues
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{KEY_HEADER}").unwrap();
        writeln!(out, "kind=public").unwrap();
        self.write_fields(&mut out);
        out
    }

    fn write_fields(&self, out: &mut String) {
        writeln!(out, "a={}", self.a).unwrap();
        writeln!(out, "slots={}", self.slots).unwrap();
        writeln!(out, "moduli={}", join(self.mset.moduli())).unwrap();
        writeln!(out, "max_p={}", self.envelope.max_p).unwrap();
        writeln!(out, "max_order={}", self.envelope.max_order).unwrap();
        writeln!(out, "max_terms={}", self.envelope.max_terms).unwrap();
    }

    pub fn from_text(text: &str) -> Result<Self, KeyError> {
        match KeyFile::parse(text)? {
            KeyFile::Public(pk) => Ok(pk),
            KeyFile::Private(_) => Err(KeyError::Malformed("expected a public key, found a private key".into())),
        }
    }
}

/// Public key plus the position template and randomization bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    pk: PublicKey,
    template: Vec<usize>,
    eta_max: BigUint,
    timestamp: Option<u64>,
}

impl PrivateKey {
    /// Validates `max(b_i) < eta_max` and `a >= 2^30 * eta_max` on top of
    /// the structural checks.
    pub fn new(pk: PublicKey, template: Vec<usize>, eta_max: BigUint) -> Result<Self, KeyError> {
        let sk = Self::new_relaxed(pk, template, eta_max)?;
        if sk.eta_max <= BigUint::from(sk.pk.mset.max_modulus()) {
            return Err(KeyError::InvalidParams(format!(
                "eta_max {} must exceed the largest modulus {}",
                sk.eta_max,
                sk.pk.mset.max_modulus()
            )));
        }
        if sk.pk.a < &sk.eta_max << NOISE_HEADROOM_BITS {
            return Err(KeyError::InvalidParams(format!(
                "amplification factor {} must be at least 2^{NOISE_HEADROOM_BITS} * eta_max",
                sk.pk.a
            )));
        }
        if !capacity_check(
            &sk.pk.a,
            &sk.pk.envelope.max_p,
            sk.pk.envelope.max_order,
            &sk.pk.envelope.max_terms,
            &sk.pk.mset,
        ) {
            return Err(KeyError::InvalidParams("envelope overflows the modulus product".into()));
        }
        Ok(sk)
    }

    pub fn new_relaxed(pk: PublicKey, template: Vec<usize>, eta_max: BigUint) -> Result<Self, KeyError> {
        if template.len() != pk.rows() {
            return Err(KeyError::InvalidParams(format!(
                "template has {} entries for {} moduli",
                template.len(),
                pk.rows()
            )));
        }
        if let Some(&bad) = template.iter().find(|&&s| s >= pk.slots) {
            return Err(KeyError::InvalidParams(format!(
                "template entry {bad} is outside [0, {})",
                pk.slots
            )));
        }
        if eta_max < BigUint::one() {
            return Err(KeyError::InvalidParams("eta_max must be positive".into()));
        }
        Ok(Self {
            pk,
            template,
            eta_max,
            timestamp: None,
        })
    }

    pub fn with_timestamp(mut self, timestamp: u64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn public(&self) -> &PublicKey {
        &self.pk
    }

    pub fn template(&self) -> &[usize] {
        &self.template
    }

    pub fn eta_max(&self) -> &BigUint {
        &self.eta_max
    }

    /// Timestamp the key was derived from, when known.
    pub fn timestamp(&self) -> Option<u64> {
        self.timestamp
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{KEY_HEADER}").unwrap();
        writeln!(out, "kind=private").unwrap();
        self.pk.write_fields(&mut out);
        writeln!(out, "eta_max={}", self.eta_max).unwrap();
        writeln!(out, "template={}", join(&self.template)).unwrap();
        if let Some(ts) = self.timestamp {
            writeln!(out, "timestamp={ts}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, KeyError> {
        match KeyFile::parse(text)? {
            KeyFile::Private(sk) => Ok(sk),
            KeyFile::Public(_) => Err(KeyError::Malformed("expected a private key, found a public key".into())),
        }
    }
}

/// Either kind of key file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyFile {
    Public(PublicKey),
    Private(PrivateKey),
}

impl KeyFile {
    /// Parses a key file. Loaded keys get the same validation as freshly
    /// built ones, except that the noise/capacity checks are skipped so
    /// demonstration keys can be stored too.
    pub fn parse(text: &str) -> Result<Self, KeyError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| KeyError::Malformed("empty key file".into()))?;
        if header != KEY_HEADER {
            return if header.starts_with("cmpswhe-key ") {
                Err(KeyError::Version(header.to_string()))
            } else {
                Err(KeyError::Malformed(format!("unexpected header `{header}`")))
            };
        }
        let mut fields = BTreeMap::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| KeyError::Malformed(format!("line without `=`: `{line}`")))?;
            if fields.insert(name.to_string(), value.to_string()).is_some() {
                return Err(KeyError::Malformed(format!("duplicate field `{name}`")));
            }
        }
        let mut take = |name: &str| {
            fields
                .remove(name)
                .ok_or_else(|| KeyError::Malformed(format!("missing field `{name}`")))
        };
        let kind = take("kind")?;
        let a = parse_big(&take("a")?, "a")?;
        let slots = parse_num::<usize>(&take("slots")?, "slots")?;
        let moduli = parse_list::<u64>(&take("moduli")?, "moduli")?;
        let envelope = Envelope {
            max_p: parse_big(&take("max_p")?, "max_p")?,
            max_order: parse_num(&take("max_order")?, "max_order")?,
            max_terms: parse_big(&take("max_terms")?, "max_terms")?,
        };
        let pk = PublicKey::new_relaxed(a, ModulusSet::new(moduli)?, slots, envelope)?;
        let key = match kind.as_str() {
            "public" => KeyFile::Public(pk),
            "private" => {
                let eta_max = parse_big(&take("eta_max")?, "eta_max")?;
                let template = parse_list::<usize>(&take("template")?, "template")?;
                let mut sk = PrivateKey::new_relaxed(pk, template, eta_max)?;
                if let Some(ts) = fields.remove("timestamp") {
                    sk.timestamp = Some(parse_num(&ts, "timestamp")?);
                }
                KeyFile::Private(sk)
            }
            other => return Err(KeyError::Malformed(format!("unknown key kind `{other}`"))),
        };
        if let Some(name) = fields.keys().next() {
            return Err(KeyError::Malformed(format!("unexpected field `{name}` for this key kind")));
        }
        Ok(key)
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_big(text: &str, name: &str) -> Result<BigUint, KeyError> {
    if text.is_empty() || !text.bytes().all(|c| c.is_ascii_digit()) {
        return Err(KeyError::Malformed(format!("field `{name}` is not a decimal integer")));
    }
    text.parse()
        .map_err(|_| KeyError::Malformed(format!("field `{name}` is not a decimal integer")))
}

fn parse_num<T: std::str::FromStr>(text: &str, name: &str) -> Result<T, KeyError> {
    text.parse()
        .map_err(|_| KeyError::Malformed(format!("field `{name}` is not a valid number")))
}

fn parse_list<T: std::str::FromStr>(text: &str, name: &str) -> Result<Vec<T>, KeyError> {
    text.split(',').map(|item| parse_num(item, name)).collect()
}

/// Six-bit chunk reader over the chained AES-128 blocks.
struct ChunkStream {
    cipher: Aes128,
    block: [u8; 16],
    next: usize,
    blocks_used: usize,
}

impl ChunkStream {
    fn new(user: &UserKey, timestamp: u64) -> Self {
        let cipher = Aes128::new(GenericArray::from_slice(user.as_bytes()));
        let mut block = [0u8; 16];
        block[8..].copy_from_slice(&timestamp.to_be_bytes());
        let mut stream = Self {
            cipher,
            block,
            next: 0,
            blocks_used: 0,
        };
        stream.advance_block();
        stream
    }

    fn advance_block(&mut self) {
        let mut buf = GenericArray::clone_from_slice(&self.block);
        self.cipher.encrypt_block(&mut buf);
        self.block.copy_from_slice(&buf);
        self.next = 0;
        self.blocks_used += 1;
    }

    fn next_chunk(&mut self) -> u8 {
        if self.next == CHUNKS_PER_BLOCK {
            self.advance_block();
        }
        let chunk = chunk_at(&self.block, self.next);
        self.next += 1;
        chunk
    }
}

/// The `index`-th 6-bit chunk of a block, most significant bits first.
pub fn chunk_at(block: &[u8; 16], index: usize) -> u8 {
    let value = u128::from_be_bytes(*block);
    ((value >> (122 - 6 * index)) & 0x3f) as u8
}

/// Derives the key pair, building the prime pool from `params`.
pub fn derive_keys(user: &UserKey, timestamp: u64, params: &KeyParams) -> Result<(PublicKey, PrivateKey), KeyError> {
    params.validate()?;
    let pool = modmath::gen_prime_pool(params.start_bits, params.pool_size)?;
    derive_keys_with_pool(user, timestamp, params, &pool)
}

/// As [`derive_keys`] with a precomputed pool (must hold `params.pool_size`
/// primes).
pub fn derive_keys_with_pool(
    user: &UserKey,
    timestamp: u64,
    params: &KeyParams,
    pool: &[u64],
) -> Result<(PublicKey, PrivateKey), KeyError> {
    params.validate()?;
    if pool.len() != params.pool_size {
        return Err(KeyError::InvalidParams(format!(
            "pool holds {} primes, parameters declare {}",
            pool.len(),
            params.pool_size
        )));
    }
    let (template, indices) = derive_indices(user, timestamp, params)?;
    let moduli = indices.iter().map(|&i| pool[i]).collect();
    let mset = ModulusSet::new(moduli)?;
    let pk = PublicKey::new(params.a.clone(), mset, params.slots, params.envelope.clone())?;
    let sk = PrivateKey::new(pk.clone(), template, params.eta_max.clone())?.with_timestamp(timestamp);
    Ok((pk, sk))
}

/// Position template and distinct pool indices for the given inputs.
pub fn derive_indices(
    user: &UserKey,
    timestamp: u64,
    params: &KeyParams,
) -> Result<(Vec<usize>, Vec<usize>), KeyError> {
    let mut stream = ChunkStream::new(user, timestamp);
    let template: Vec<usize> = (0..params.moduli)
        .map(|_| stream.next_chunk() as usize % params.slots)
        .collect();

    stream.advance_block();
    let first_modulus_block = stream.blocks_used;
    let mut indices: Vec<usize> = Vec::with_capacity(params.moduli);
    while indices.len() < params.moduli {
        if stream.next == CHUNKS_PER_BLOCK && stream.blocks_used - first_modulus_block + 1 >= MODULUS_BLOCK_LIMIT {
            return Err(KeyError::DerivationExhausted(MODULUS_BLOCK_LIMIT));
        }
        let idx = stream.next_chunk() as usize % params.pool_size;
        if !indices.contains(&idx) {
            indices.push(idx);
        }
    }
    Ok((template, indices))
}

/// Envelope order capacity left for a key: the largest `t` for which the
/// capacity inequality still holds with the envelope's `max_p` and `w`.
pub fn max_supported_order(pk: &PublicKey) -> u32 {
    let env = pk.envelope();
    let mut t = 0;
    while capacity_check(pk.a(), &env.max_p, t + 1, &env.max_terms, pk.mset()) {
        t += 1;
        if t > 4096 {
            break;
        }
    }
    t
}

/// The three-modulus demonstration key: `a = 33`, moduli 19, 29, 31,
/// three slots with the real residue in slot 0, 1 and 2 respectively, and
/// `eta` up to 32. Far too small to be secure.
pub fn demo_key() -> PrivateKey {
    let mset = ModulusSet::new(vec![19, 29, 31]).expect("distinct primes");
    let env = Envelope {
        max_p: BigUint::from(255u32),
        max_order: 1,
        max_terms: BigUint::from(2u32),
    };
    let pk = PublicKey::new(BigUint::from(33u32), mset, 3, env).expect("fits 17081");
    PrivateKey::new_relaxed(pk, vec![0, 1, 2], BigUint::from(32u32)).expect("template in range")
}
