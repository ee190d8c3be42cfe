use std::collections::BTreeMap;

use ark_bls12_381::{g1, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{Field, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use ark_std::UniformRand;
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::tree::{AccessTree, AttributeSet, Node};
use super::AbeError;
use crate::codec::{DecodeError, Reader, Writer};

type Gt = PairingOutput<Bls12_381>;

/// Largest payload `encrypt` accepts.
pub const MAX_PAYLOAD: usize = 64 * 1024;

const HASH_DST: &[u8] = b"LOCQUERY-ABE-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const KDF_LABEL: &[u8] = b"locquery abe session key v1";
const CT_VERSION: u8 = 1;
const NONCE_LEN: usize = 12;

type AttrHasher =
    MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

fn hash_attributes<'a>(attrs: impl IntoIterator<Item = &'a str>) -> Vec<G1Affine> {
    let hasher = AttrHasher::new(HASH_DST).expect("BLS12-381 G1 supports hash-to-curve");
    attrs
        .into_iter()
        .map(|a| hasher.hash(a.as_bytes()).expect("hash-to-curve is total"))
        .collect()
}

fn put<T: CanonicalSerialize>(w: &mut Writer, v: &T) {
    let mut buf = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut buf).expect("serializing into a Vec cannot fail");
    w.prefixed(&buf);
}

fn get<T: CanonicalDeserialize + CanonicalSerialize>(r: &mut Reader<'_>) -> Result<T, AbeError> {
    let bytes = r.prefixed()?;
    let v = T::deserialize_compressed(bytes).map_err(|e| AbeError::Group(e.to_string()))?;
    // Reject encodings that decode but do not re-encode to the same bytes.
    let mut again = Vec::with_capacity(bytes.len());
    v.serialize_compressed(&mut again).expect("serializing into a Vec cannot fail");
    if again != bytes {
        return Err(AbeError::Group("non-canonical encoding".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    g1: G1Affine,
    g2: G2Affine,
    /// g1^β
    h: G1Affine,
    /// g2^{1/β}
    f: G2Affine,
    egg_alpha: Gt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterKey {
    beta: Fr,
    g2_alpha: G2Affine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    /// g2^{(α+r)/β}
    d: G2Affine,
    /// attribute -> (g1^r · H(j)^{r_j}, g2^{r_j})
    components: BTreeMap<String, (G1Affine, G2Affine)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    tree: AccessTree,
    /// M · e(g1,g2)^{αs}
    c_tilde: Gt,
    /// h^s
    c: G1Affine,
    /// Per leaf in preorder: (g2^{q_y(0)}, H(attr)^{q_y(0)}).
    leaves: Vec<(G2Affine, G1Affine)>,
    nonce: [u8; NONCE_LEN],
    sealed: Vec<u8>,
}

/// Generates a fresh public/master key pair.
pub fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (PublicKey, MasterKey) {
    let alpha = nonzero_scalar(rng);
    let beta = nonzero_scalar(rng);
    let g1 = G1Projective::generator();
    let g2 = G2Projective::generator();
    let beta_inv = beta.inverse().expect("beta is non-zero");
    let g2_alpha = g2 * alpha;
    let pk = PublicKey {
        g1: g1.into_affine(),
        g2: g2.into_affine(),
        h: (g1 * beta).into_affine(),
        f: (g2 * beta_inv).into_affine(),
        egg_alpha: Bls12_381::pairing(g1, g2_alpha),
    };
    let mk = MasterKey {
        beta,
        g2_alpha: g2_alpha.into_affine(),
    };
    (pk, mk)
}

fn nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Fr {
    loop {
        let s = Fr::rand(rng);
        if !s.is_zero() {
            return s;
        }
    }
}

/// Issues a secret key for a non-empty, duplicate-free attribute set.
pub fn keygen<R, I, S>(pk: &PublicKey, mk: &MasterKey, attrs: I, rng: &mut R) -> Result<SecretKey, AbeError>
where
    R: RngCore + CryptoRng,
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut names: Vec<String> = Vec::new();
    let mut seen = AttributeSet::new();
    for a in attrs {
        let a = a.as_ref();
        if a.is_empty() {
            return Err(AbeError::InvalidAttribute(a.into()));
        }
        if !seen.insert(a.to_string()) {
            return Err(AbeError::DuplicateAttribute(a.into()));
        }
        names.push(a.to_string());
    }
    if names.is_empty() {
        return Err(AbeError::EmptyAttributes);
    }

    let r = Fr::rand(rng);
    let g1r = G1Projective::from(pk.g1) * r;
    let beta_inv = mk.beta.inverse().expect("beta is non-zero");
    let d = ((G2Projective::from(mk.g2_alpha) + G2Projective::from(pk.g2) * r) * beta_inv).into_affine();
    let hashes = hash_attributes(names.iter().map(String::as_str));
    let components = names
        .into_iter()
        .zip(hashes)
        .map(|(name, hj)| {
            let rj = Fr::rand(rng);
            let dj = (g1r + hj * rj).into_affine();
            let dj_prime = (pk.g2 * rj).into_affine();
            (name, (dj, dj_prime))
        })
        .collect();
    Ok(SecretKey { d, components })
}

/// Shares `secret` down the tree; leaf shares are pushed in preorder.
fn share<R: RngCore + CryptoRng>(node: &Node, secret: Fr, rng: &mut R, out: &mut Vec<Fr>) {
    match node {
        Node::Leaf(_) => out.push(secret),
        Node::Gate { threshold, children } => {
            let mut coeffs = vec![secret];
            coeffs.extend((1..*threshold).map(|_| Fr::rand(rng)));
            for (i, child) in children.iter().enumerate() {
                let x = Fr::from(i as u64 + 1);
                let y = coeffs.iter().rev().fold(Fr::zero(), |acc, c| acc * x + c);
                share(child, y, rng, out);
            }
        }
    }
}

/// Encrypts `payload` so that only keys satisfying `tree` can recover it.
pub fn encrypt<R: RngCore + CryptoRng>(
    pk: &PublicKey,
    payload: &[u8],
    tree: &AccessTree,
    rng: &mut R,
) -> Result<Ciphertext, AbeError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(AbeError::PayloadTooLarge(payload.len()));
    }
    let s = Fr::rand(rng);
    let session = Gt::generator() * nonzero_scalar(rng);

    let mut shares = Vec::with_capacity(tree.leaf_count());
    share(tree.root(), s, rng, &mut shares);
    let hashes = hash_attributes(tree.leaves());
    let c_y: Vec<G2Projective> = shares.iter().map(|q| pk.g2 * q).collect();
    let c_y_prime: Vec<G1Projective> = hashes.iter().zip(&shares).map(|(h, q)| *h * q).collect();
    let leaves = G2Projective::normalize_batch(&c_y)
        .into_iter()
        .zip(G1Projective::normalize_batch(&c_y_prime))
        .collect();

    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut ct = Ciphertext {
        tree: tree.clone(),
        c_tilde: session + pk.egg_alpha * s,
        c: (pk.h * s).into_affine(),
        leaves,
        nonce,
        sealed: Vec::new(),
    };
    let aad = ct.header_bytes();
    ct.sealed = aead(&session)
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: payload, aad: &aad })
        .map_err(|_| AbeError::Integrity)?;
    Ok(ct)
}

fn aead(session: &Gt) -> ChaCha20Poly1305 {
    let mut buf = Vec::new();
    session
        .serialize_compressed(&mut buf)
        .expect("serializing into a Vec cannot fail");
    let digest = Sha256::new().chain_update(KDF_LABEL).chain_update(&buf).finalize();
    ChaCha20Poly1305::new(Key::from_slice(&digest))
}

fn leaf_count(node: &Node) -> usize {
    match node {
        Node::Leaf(_) => 1,
        Node::Gate { children, .. } => children.iter().map(leaf_count).sum(),
    }
}

/// Lagrange coefficient at zero for index `i` over the index set `set`.
fn lagrange_at_zero(i: u64, set: &[u64]) -> Fr {
    let xi = Fr::from(i);
    set.iter().filter(|&&j| j != i).fold(Fr::from(1u64), |acc, &j| {
        let xj = Fr::from(j);
        acc * xj * (xj - xi).inverse().expect("distinct indices")
    })
}

/// Chooses satisfied leaves and their combined interpolation coefficients.
/// `first_leaf` is the preorder index of the node's first leaf.
fn plan(node: &Node, first_leaf: usize, attrs: &BTreeMap<String, (G1Affine, G2Affine)>) -> Option<Vec<(usize, Fr)>> {
    match node {
        Node::Leaf(a) => attrs.contains_key(a).then(|| vec![(first_leaf, Fr::from(1u64))]),
        Node::Gate { threshold, children } => {
            let mut chosen: Vec<(u64, Vec<(usize, Fr)>)> = Vec::with_capacity(*threshold);
            let mut offset = first_leaf;
            for (i, child) in children.iter().enumerate() {
                if chosen.len() == *threshold {
                    break;
                }
                if let Some(p) = plan(child, offset, attrs) {
                    chosen.push((i as u64 + 1, p));
                }
                offset += leaf_count(child);
            }
            if chosen.len() < *threshold {
                return None;
            }
            let indices: Vec<u64> = chosen.iter().map(|(i, _)| *i).collect();
            let mut out = Vec::new();
            for (i, p) in chosen {
                let coeff = lagrange_at_zero(i, &indices);
                out.extend(p.into_iter().map(|(leaf, c)| (leaf, c * coeff)));
            }
            Some(out)
        }
    }
}

/// Recovers the payload when the key's attributes satisfy the embedded tree.
pub fn decrypt(_pk: &PublicKey, sk: &SecretKey, ct: &Ciphertext) -> Result<Vec<u8>, AbeError> {
    let chosen = plan(ct.tree.root(), 0, &sk.components).ok_or(AbeError::NotSatisfied)?;
    let leaf_attrs = ct.tree.leaves();

    // X = e(C, D) - Σ c_l · [e(D_j, C_y) - e(C'_y, D'_j)] = e(g1,g2)^{αs}
    let mut lhs: Vec<G1Projective> = vec![ct.c.into()];
    let mut rhs: Vec<G2Affine> = vec![sk.d];
    for (leaf, coeff) in chosen {
        let (dj, dj_prime) = sk.components[leaf_attrs[leaf]];
        let (c_y, c_y_prime) = ct.leaves[leaf];
        lhs.push(-(dj * coeff));
        rhs.push(c_y);
        lhs.push(c_y_prime * coeff);
        rhs.push(dj_prime);
    }
    let x = Bls12_381::multi_pairing(G1Projective::normalize_batch(&lhs), rhs);
    let session = ct.c_tilde - x;

    aead(&session)
        .decrypt(
            Nonce::from_slice(&ct.nonce),
            Payload {
                msg: &ct.sealed,
                aad: &ct.header_bytes(),
            },
        )
        .map_err(|_| AbeError::Integrity)
}

impl PublicKey {
    /// e(h, f) = e(g1, g2) and e(g1,g2)^α is not the identity.
    pub fn is_consistent(&self) -> bool {
        Bls12_381::pairing(self.h, self.f) == Bls12_381::pairing(self.g1, self.g2) && !self.egg_alpha.is_zero()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        put(&mut w, &self.g1);
        put(&mut w, &self.g2);
        put(&mut w, &self.h);
        put(&mut w, &self.f);
        put(&mut w, &self.egg_alpha);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let pk = PublicKey {
            g1: get(&mut r)?,
            g2: get(&mut r)?,
            h: get(&mut r)?,
            f: get(&mut r)?,
            egg_alpha: get(&mut r)?,
        };
        r.finish()?;
        if !pk.is_consistent() {
            return Err(AbeError::Group("inconsistent public key".into()));
        }
        Ok(pk)
    }
}

impl MasterKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        put(&mut w, &self.beta);
        put(&mut w, &self.g2_alpha);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let mk = MasterKey {
            beta: get(&mut r)?,
            g2_alpha: get(&mut r)?,
        };
        r.finish()?;
        if mk.beta.is_zero() {
            return Err(AbeError::Group("zero master exponent".into()));
        }
        Ok(mk)
    }
}

impl SecretKey {
    pub fn attributes(&self) -> AttributeSet {
        self.components.keys().cloned().collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        put(&mut w, &self.d);
        w.u32(self.components.len() as u32);
        for (name, (dj, dj_prime)) in &self.components {
            w.string(name);
            put(&mut w, dj);
            put(&mut w, dj_prime);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let d = get(&mut r)?;
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(AbeError::EmptyAttributes);
        }
        let mut components = BTreeMap::new();
        for _ in 0..count {
            let name = r.string()?;
            if name.is_empty() {
                return Err(AbeError::InvalidAttribute(name));
            }
            let pair = (get(&mut r)?, get(&mut r)?);
            if components.insert(name.clone(), pair).is_some() {
                return Err(AbeError::DuplicateAttribute(name));
            }
        }
        r.finish()?;
        Ok(SecretKey { d, components })
    }
}

impl Ciphertext {
    pub fn tree(&self) -> &AccessTree {
        &self.tree
    }

    /// Everything except the sealed payload; bound into the AEAD tag.
    fn header_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_header(&mut w);
        w.finish()
    }

    fn write_header(&self, w: &mut Writer) {
        w.u8(CT_VERSION);
        let mut tree = Writer::new();
        self.tree.write(&mut tree);
        w.prefixed(&tree.finish());
        put(w, &self.c_tilde);
        put(w, &self.c);
        for (c_y, c_y_prime) in &self.leaves {
            put(w, c_y);
            put(w, c_y_prime);
        }
        w.raw(&self.nonce);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_header(&mut w);
        w.prefixed(&self.sealed);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != CT_VERSION {
            return Err(DecodeError::invalid(format!("unsupported ciphertext version {version}")).into());
        }
        let tree = AccessTree::from_bytes(r.prefixed()?)?;
        let c_tilde = get(&mut r)?;
        let c = get(&mut r)?;
        let leaves = (0..tree.leaf_count())
            .map(|_| Ok((get(&mut r)?, get(&mut r)?)))
            .collect::<Result<Vec<_>, AbeError>>()?;
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(r.take(NONCE_LEN)?);
        let sealed = r.prefixed()?.to_vec();
        r.finish()?;
        Ok(Ciphertext {
            tree,
            c_tilde,
            c,
            leaves,
            nonce,
            sealed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abe::tree::attributes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn leaf(a: &str) -> Node {
        Node::leaf(a)
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn setup_is_consistent_and_fresh() {
        let mut rng = rng(1);
        let (pk, mk) = setup(&mut rng);
        assert!(pk.is_consistent());
        assert_eq!(Bls12_381::pairing(pk.h, pk.f), Bls12_381::pairing(pk.g1, pk.g2));
        assert!(!pk.egg_alpha.is_zero());
        let (_, mk2) = setup(&mut rng);
        assert_ne!(mk.beta, mk2.beta);
    }

    #[test]
    fn single_leaf_roundtrip() {
        let mut rng = rng(2);
        let (pk, mk) = setup(&mut rng);
        let sk = keygen(&pk, &mk, ["friend"], &mut rng).unwrap();
        let tree = AccessTree::leaf("friend").unwrap();
        let ct = encrypt(&pk, b"meet at noon", &tree, &mut rng).unwrap();
        assert_eq!(decrypt(&pk, &sk, &ct).unwrap(), b"meet at noon");
        let ct = Ciphertext::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(decrypt(&pk, &sk, &ct).unwrap(), b"meet at noon");
    }

    #[test]
    fn and_gate_needs_both() {
        let mut rng = rng(3);
        let (pk, mk) = setup(&mut rng);
        let tree = AccessTree::new(Node::and(vec![leaf("a"), leaf("b")])).unwrap();
        let ct = encrypt(&pk, b"x", &tree, &mut rng).unwrap();
        let both = keygen(&pk, &mk, ["a", "b"], &mut rng).unwrap();
        let one = keygen(&pk, &mk, ["a"], &mut rng).unwrap();
        assert_eq!(decrypt(&pk, &both, &ct).unwrap(), b"x");
        assert_eq!(decrypt(&pk, &one, &ct), Err(AbeError::NotSatisfied));
    }

    #[test]
    fn keygen_rejects_bad_attribute_sets() {
        let mut rng = rng(4);
        let (pk, mk) = setup(&mut rng);
        assert_eq!(keygen(&pk, &mk, Vec::<&str>::new(), &mut rng), Err(AbeError::EmptyAttributes));
        assert!(matches!(keygen(&pk, &mk, ["a", "a"], &mut rng), Err(AbeError::DuplicateAttribute(_))));
        assert!(matches!(keygen(&pk, &mk, [""], &mut rng), Err(AbeError::InvalidAttribute(_))));
    }

    #[test]
    fn colluding_keys_cannot_combine() {
        // Each key satisfies one half of AND(a, b); neither decrypts alone,
        // and splicing components across keys fails because r differs.
        let mut rng = rng(5);
        let (pk, mk) = setup(&mut rng);
        let tree = AccessTree::new(Node::and(vec![leaf("a"), leaf("b")])).unwrap();
        let ct = encrypt(&pk, b"secret", &tree, &mut rng).unwrap();
        let ka = keygen(&pk, &mk, ["a"], &mut rng).unwrap();
        let kb = keygen(&pk, &mk, ["b"], &mut rng).unwrap();
        let mut spliced = ka.clone();
        spliced.components.extend(kb.components.clone());
        assert_eq!(decrypt(&pk, &spliced, &ct), Err(AbeError::Integrity));
    }

    #[test]
    fn wrong_master_key_fails_integrity() {
        let mut rng = rng(6);
        let (pk, _) = setup(&mut rng);
        let (pk2, mk2) = setup(&mut rng);
        let sk = keygen(&pk2, &mk2, ["a"], &mut rng).unwrap();
        let ct = encrypt(&pk, b"p", &AccessTree::leaf("a").unwrap(), &mut rng).unwrap();
        assert_eq!(decrypt(&pk, &sk, &ct), Err(AbeError::Integrity));
    }

    #[test]
    fn payload_limit() {
        let mut rng = rng(7);
        let (pk, _) = setup(&mut rng);
        let tree = AccessTree::leaf("a").unwrap();
        assert!(encrypt(&pk, &vec![0; MAX_PAYLOAD], &tree, &mut rng).is_ok());
        assert_eq!(
            encrypt(&pk, &vec![0; MAX_PAYLOAD + 1], &tree, &mut rng).unwrap_err(),
            AbeError::PayloadTooLarge(MAX_PAYLOAD + 1)
        );
    }

    #[test]
    fn every_flipped_byte_is_rejected() {
        let mut rng = rng(8);
        let (pk, mk) = setup(&mut rng);
        let sk = keygen(&pk, &mk, ["a"], &mut rng).unwrap();
        let tree = AccessTree::leaf("a").unwrap();
        let bytes = encrypt(&pk, b"payload", &tree, &mut rng).unwrap().to_bytes();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            let outcome = Ciphertext::from_bytes(&bad).and_then(|ct| decrypt(&pk, &sk, &ct));
            assert!(outcome.is_err(), "flip at byte {i} went unnoticed");
        }
    }

    #[test]
    fn keys_roundtrip_through_bytes() {
        let mut rng = rng(9);
        let (pk, mk) = setup(&mut rng);
        let sk = keygen(&pk, &mk, ["a", "b"], &mut rng).unwrap();
        assert_eq!(PublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(MasterKey::from_bytes(&mk.to_bytes()).unwrap(), mk);
        let sk2 = SecretKey::from_bytes(&sk.to_bytes()).unwrap();
        assert_eq!(sk2, sk);
        assert_eq!(sk2.attributes(), attributes(["a", "b"]));
    }

    #[test]
    fn lowest_indices_preferred_but_any_subset_works() {
        let mut rng = rng(10);
        let (pk, mk) = setup(&mut rng);
        let tree = AccessTree::new(Node::gate(2, vec![leaf("a"), leaf("b"), leaf("c")])).unwrap();
        let ct = encrypt(&pk, b"m", &tree, &mut rng).unwrap();
        for attrs in [vec!["a", "b"], vec!["a", "c"], vec!["b", "c"], vec!["a", "b", "c"]] {
            let sk = keygen(&pk, &mk, attrs, &mut rng).unwrap();
            assert_eq!(decrypt(&pk, &sk, &ct).unwrap(), b"m");
        }
    }

    fn random_node(rng: &mut ChaCha20Rng, depth: usize, budget: &mut usize, universe: &[&str]) -> Node {
        if depth == 3 || *budget <= 1 || rng.gen_bool(0.35) {
            *budget = budget.saturating_sub(1);
            return leaf(universe[rng.gen_range(0..universe.len())]);
        }
        let arity = rng.gen_range(1..=(*budget).min(4));
        let children: Vec<Node> = (0..arity).map(|_| random_node(rng, depth + 1, budget, universe)).collect();
        let threshold = rng.gen_range(1..=children.len());
        Node::gate(threshold, children)
    }

    #[test]
    fn random_trees_decrypt_iff_satisfied() {
        let mut rng = rng(11);
        let (pk, mk) = setup(&mut rng);
        let universe = ["a", "b", "c", "d", "e", "f"];
        let mut counts = [0usize; 2];
        for _ in 0..40 {
            let mut budget = 10;
            let tree = AccessTree::new(random_node(&mut rng, 1, &mut budget, &universe)).unwrap();
            assert!(tree.leaf_count() <= 10 && tree.depth() <= 3);
            let attrs: Vec<&str> = universe.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let attrs = if attrs.is_empty() { vec!["z"] } else { attrs };
            let sk = keygen(&pk, &mk, &attrs, &mut rng).unwrap();
            let ct = encrypt(&pk, b"probe", &tree, &mut rng).unwrap();
            let expected = tree.is_satisfied_by(&sk.attributes());
            match decrypt(&pk, &sk, &ct) {
                Ok(m) => {
                    assert!(expected, "{tree} decrypted with {attrs:?}");
                    assert_eq!(m, b"probe");
                }
                Err(e) => {
                    assert!(!expected, "{tree} failed with {attrs:?}: {e}");
                    assert_eq!(e, AbeError::NotSatisfied);
                }
            }
            counts[expected as usize] += 1;
        }
        assert!(counts[0] > 0 && counts[1] > 0);
    }
}
