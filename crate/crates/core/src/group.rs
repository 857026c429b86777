//! Arithmetic in the prime-order subgroup of `Z_p^*` generated by `g`.
//!
//! Exponents live in `Z_q` where `q` is the order of `g`. Reducing modulo
//! `q` (not `p`) is what makes `g^a * g^b = g^((a + b) mod q)` hold.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hexint;

/// Miller-Rabin rounds used by [`validate_params`].
pub const PRIMALITY_ROUNDS: usize = 64;

/// Minimum modulus size accepted by the production profile.
pub const PRODUCTION_MIN_BITS: u64 = 2048;

/// 2048-bit MODP safe prime from RFC 3526 (group 14). `2` is a quadratic
/// residue modulo it, so `g = 2` generates the subgroup of order `(p-1)/2`.
const MODP_2048_P: &str = "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74\
020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f14374fe1356d6d51c245\
e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7edee386bfb5a899fa5ae9f24117c4b1fe6\
49286651ece45b3dc2007cb8a163bf0598da48361c55d39a69163fa8fd24cf5f83655d23dca3ad96\
1c62f356208552bb9ed529077096966d670c354e4abc9804f1746c08ca18217c32905e462e36ce3b\
e39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf6955817183995497cea956ae5\
15d2261898fa051015728e5a8aacaa68ffffffffffffffff";

/// The invariant a candidate parameter set breaks first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    ModulusNotPrime,
    OrderNotPrime,
    OrderDoesNotDivide,
    GeneratorOutOfRange,
    GeneratorIsIdentity,
    GeneratorWrongOrder,
    ModulusTooSmall,
    NotSafePrime,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Violation::ModulusNotPrime => "p is not prime",
            Violation::OrderNotPrime => "q is not prime",
            Violation::OrderDoesNotDivide => "q does not divide p-1",
            Violation::GeneratorOutOfRange => "g is outside [2, p-1]",
            Violation::GeneratorIsIdentity => "g is the identity",
            Violation::GeneratorWrongOrder => "g^q is not 1 mod p",
            Violation::ModulusTooSmall => "p is smaller than 2048 bits",
            Violation::NotSafePrime => "q is not (p-1)/2",
        };
        f.write_str(msg)
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidityReport {
    Valid,
    Invalid(Violation),
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidityReport::Valid)
    }
}

/// Public group description `(p, q, g)`. Only constructible through
/// validation, so every instance satisfies the subgroup invariants.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    id: String,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams").field("id", &self.id).field("bits", &self.p.bits()).finish()
    }
}

/// An exponent in `[0, q)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scalar(#[serde(with = "crate::hexint::serde_hex")] BigUint);

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({:x})", self.0)
    }
}

/// A value in `[1, p)` that callers obtain either from group operations or
/// from a membership check. Deserialized values are unchecked until they pass
/// [`GroupParams::check_member`].
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(#[serde(with = "crate::hexint::serde_hex")] BigUint);

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:x})", self.0)
    }
}

impl Scalar {
    pub fn new(value: BigUint, params: &GroupParams) -> Result<Self> {
        if value >= params.q {
            return Err(Error::ScalarRange);
        }
        Ok(Scalar(value))
    }

    pub fn from_u64(value: u64, params: &GroupParams) -> Result<Self> {
        Self::new(BigUint::from(value), params)
    }

    pub fn reduce(value: &BigUint, params: &GroupParams) -> Self {
        Scalar(value % &params.q)
    }

    pub fn zero() -> Self {
        Scalar(BigUint::zero())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Wraps a value whose range has not been checked yet, such as a
    /// response read off the wire. `verify_round` rejects out-of-range values.
    pub(crate) fn from_raw(value: BigUint) -> Self {
        Scalar(value)
    }

    pub fn add(&self, other: &Scalar, params: &GroupParams) -> Scalar {
        Scalar((&self.0 + &other.0) % &params.q)
    }

    pub fn sub(&self, other: &Scalar, params: &GroupParams) -> Scalar {
        Scalar((&self.0 + &params.q - &other.0) % &params.q)
    }
}

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub(crate) fn from_raw(value: BigUint) -> Self {
        GroupElement(value)
    }
}

impl GroupParams {
    /// Validates `(p, q, g)` and builds the parameter set.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self> {
        if let ValidityReport::Invalid(v) = validate_params(&p, &q, &g) {
            return Err(Error::InvalidParams(v));
        }
        let id = derive_id(&p, &q, &g);
        Ok(GroupParams { p, q, g, id })
    }

    /// Toy group `p = 23, q = 11, g = 2` for tests and demonstrations.
    pub fn toy() -> Self {
        GroupParams { p: BigUint::from(23u8), q: BigUint::from(11u8), g: BigUint::from(2u8), id: "toy".into() }
    }

    /// The 2048-bit safe-prime production group. Validated on first use.
    pub fn modp2048() -> Self {
        static PARAMS: OnceLock<GroupParams> = OnceLock::new();
        PARAMS
            .get_or_init(|| {
                let p = hexint::decode(MODP_2048_P).expect("constant is canonical hex");
                let q = (&p - 1u8) >> 1;
                let g = BigUint::from(2u8);
                let report = validate_production(&p, &q, &g);
                assert!(report.is_valid(), "built-in group failed validation: {report:?}");
                GroupParams { p, q, g, id: "modp2048".into() }
            })
            .clone()
    }

    /// Looks up a built-in profile by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy()),
            "modp2048" | "production" => Some(Self::modp2048()),
            _ => None,
        }
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    /// Stable identifier stored alongside evidence: a profile name for the
    /// built-in groups, otherwise a digest of the canonical parameter file.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    pub fn is_member(&self, value: &BigUint) -> bool {
        if value.is_zero() || value >= &self.p {
            return false;
        }
        // for a safe prime the order-q subgroup is the quadratic residues
        if (&self.q << 1u8) + 1u8 == self.p {
            jacobi(value, &self.p) == 1
        } else {
            value.modpow(&self.q, &self.p).is_one()
        }
    }

    /// Promotes an untrusted value to a [`GroupElement`].
    pub fn check_member(&self, value: &BigUint) -> Result<GroupElement> {
        if self.is_member(value) {
            Ok(GroupElement(value.clone()))
        } else {
            Err(Error::NotInSubgroup)
        }
    }

    pub fn mod_exp(&self, base: &GroupElement, exponent: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&exponent.0, &self.p))
    }

    /// `base^exponent mod p` for an arbitrary integer base.
    pub fn mod_exp_raw(&self, base: &BigUint, exponent: &Scalar) -> BigUint {
        base.modpow(&exponent.0, &self.p)
    }

    /// `g^exponent mod p`.
    pub fn exp_g(&self, exponent: &Scalar) -> GroupElement {
        GroupElement(self.g.modpow(&exponent.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    pub fn invert(&self, a: &GroupElement) -> GroupElement {
        GroupElement(a.0.modinv(&self.p).expect("group elements are units"))
    }

    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Scalar> {
        random_below(&self.q, rng).map(Scalar)
    }

    /// SHA-256 of `data` as a big-endian integer, reduced mod `q`.
    pub fn hash_to_scalar(&self, data: &[u8]) -> Scalar {
        let digest = Sha256::digest(data);
        Scalar(BigUint::from_bytes_be(&digest) % &self.q)
    }

    /// Flat key-value text: `p=<hex>\nq=<hex>\ng=<hex>\n`.
    pub fn to_file_string(&self) -> String {
        params_text(&self.p, &self.q, &self.g)
    }

    pub fn from_file_str(text: &str) -> Result<Self> {
        let (mut p, mut q, mut g) = (None, None, None);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Decode(format!("expected key=value, got `{line}`")))?;
            let slot = match key.trim() {
                "p" => &mut p,
                "q" => &mut q,
                "g" => &mut g,
                other => return Err(Error::Decode(format!("unknown parameter key `{other}`"))),
            };
            if slot.is_some() {
                return Err(Error::Decode(format!("duplicate parameter key `{}`", key.trim())));
            }
            *slot = Some(hexint::decode(value.trim())?);
        }
        let missing = |k: &str| Error::Decode(format!("missing parameter `{k}`"));
        let (p, q, g) =
            (p.ok_or_else(|| missing("p"))?, q.ok_or_else(|| missing("q"))?, g.ok_or_else(|| missing("g"))?);
        let params = GroupParams::new(p, q, g)?;
        // Keep the friendly name when a file reproduces a built-in profile.
        let builtin = match params.p.bits() {
            5 => GroupParams::toy(),
            2048 => GroupParams::modp2048(),
            _ => return Ok(params),
        };
        if builtin.p == params.p && builtin.q == params.q && builtin.g == params.g {
            return Ok(builtin);
        }
        Ok(params)
    }
}

fn params_text(p: &BigUint, q: &BigUint, g: &BigUint) -> String {
    format!("p={}\nq={}\ng={}\n", hexint::encode(p), hexint::encode(q), hexint::encode(g))
}

/// Jacobi symbol `(a / n)` for odd `n`.
fn jacobi(a: &BigUint, n: &BigUint) -> i8 {
    let mut a = a % n;
    let mut n = n.clone();
    let mut sign = 1;
    while !a.is_zero() {
        let twos = a.trailing_zeros().unwrap_or(0);
        a >>= twos;
        let n8 = (&n & BigUint::from(7u8)).to_u8().unwrap_or(0);
        if twos % 2 == 1 && (n8 == 3 || n8 == 5) {
            sign = -sign;
        }
        let a4 = (&a & BigUint::from(3u8)).to_u8().unwrap_or(0);
        if a4 == 3 && n8 % 4 == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= &n;
    }
    if n.is_one() {
        sign
    } else {
        0
    }
}

fn derive_id(p: &BigUint, q: &BigUint, g: &BigUint) -> String {
    let digest = Sha256::digest(params_text(p, q, g).as_bytes());
    format!("sha256:{}", hex::encode(&digest[..16]))
}

/// Checks the subgroup invariants and names the first one violated.
pub fn validate_params(p: &BigUint, q: &BigUint, g: &BigUint) -> ValidityReport {
    use ValidityReport::*;
    if !is_probable_prime(p, PRIMALITY_ROUNDS) {
        return Invalid(Violation::ModulusNotPrime);
    }
    if !is_probable_prime(q, PRIMALITY_ROUNDS) {
        return Invalid(Violation::OrderNotPrime);
    }
    if !(p - 1u8).is_multiple_of(q) {
        return Invalid(Violation::OrderDoesNotDivide);
    }
    if g.is_one() {
        return Invalid(Violation::GeneratorIsIdentity);
    }
    if g < &BigUint::from(2u8) || g >= p {
        return Invalid(Violation::GeneratorOutOfRange);
    }
    if !g.modpow(q, p).is_one() {
        return Invalid(Violation::GeneratorWrongOrder);
    }
    Valid
}

/// [`validate_params`] plus the production profile's size and safe-prime rules.
pub fn validate_production(p: &BigUint, q: &BigUint, g: &BigUint) -> ValidityReport {
    if p.bits() < PRODUCTION_MIN_BITS {
        return ValidityReport::Invalid(Violation::ModulusTooSmall);
    }
    if &((p - 1u8) >> 1) != q {
        return ValidityReport::Invalid(Violation::NotSafePrime);
    }
    validate_params(p, q, g)
}

/// Uniform sample from `[0, bound)` by rejection on the bit length of
/// `bound - 1`. Fails only if the rng fails.
pub fn random_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> Result<BigUint> {
    assert!(!bound.is_zero(), "empty sampling range");
    let max = bound - 1u8;
    let bits = max.bits();
    if bits == 0 {
        return Ok(BigUint::zero());
    }
    let len = bits.div_ceil(8) as usize;
    let excess = (len as u64) * 8 - bits;
    let mut buf = vec![0u8; len];
    loop {
        rng.try_fill_bytes(&mut buf).map_err(|e| Error::Entropy(e.to_string()))?;
        buf[0] &= 0xff >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return Ok(candidate);
        }
    }
}

const SMALL_PRIMES: [u32; 24] =
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Miller-Rabin with `rounds` bases drawn from an rng seeded by `n`, so the
/// verdict for a given input is reproducible.
pub fn is_probable_prime(n: &BigUint, rounds: usize) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }

    let n_minus_1 = n - 1u8;
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }

    let seed: [u8; 32] = Sha256::digest(n.to_bytes_be()).into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    let span = &n_minus_1 - 2u8; // bases in [2, n-2]
    'witness: for _ in 0..rounds {
        let a = random_below(&span, &mut rng).expect("ChaCha never fails") + 2u8;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Searches for a safe prime `p = 2q + 1` of exactly `bits` bits and returns
/// validated parameters with `g = 4` (a quadratic residue, hence of order q).
pub fn generate_safe_prime_params<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<GroupParams> {
    if bits < 6 {
        return Err(Error::Content(format!("{bits}-bit safe primes are too small")));
    }
    let q_bits = bits - 1;
    let top = BigUint::one() << (q_bits - 1);
    loop {
        let mut q = random_below(&top, rng)? | &top;
        q |= BigUint::one();
        if !is_probable_prime(&q, 20) {
            continue;
        }
        let p: BigUint = (&q << 1) + 1u8;
        if p.bits() != bits || !is_probable_prime(&p, 20) {
            continue;
        }
        return GroupParams::new(p, q, BigUint::from(4u8));
    }
}
