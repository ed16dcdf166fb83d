//! Binary checkpoint format.
//!
//! ```text
//! "OAKN" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
//! | f32 payloads: parameters, batch-norm running statistics, optimiser slots
//! | u64 checksum (first 8 bytes of SHA-256 over everything before it)
//! ```
//!
//! All integers and floats are little-endian. Payloads follow declaration
//! order, so the metadata alone determines the byte layout.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{build_network, Network, RngState};
use super::optim::{Optimizer, OptimizerConfig, OptimizerKind};
use super::spec::NetworkSpec;
use super::{NnError, Result};
use crate::tensor::Scalar;

pub const MAGIC: &[u8; 4] = b"OAKN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Metadata {
    name: String,
    digest: String,
    spec: NetworkSpec,
    params: Vec<(String, Vec<usize>)>,
    batch_norm: Vec<(String, usize)>,
    seed: u64,
    epoch: u64,
    rng_seed: String,
    rng_stream: u64,
    rng_word_pos: String,
    optimizer: Option<OptimizerMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OptimizerMeta {
    config: OptimizerConfig,
    iterations: u64,
}

/// A restored network with its training state.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub network: Network<T>,
    pub optimizer: Option<Optimizer<T>>,
    pub epoch: u64,
}

fn checksum(bytes: &[u8]) -> u64 {
    let h = Sha256::digest(bytes);
    u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes"))
}

fn push_values<T: Scalar>(out: &mut Vec<u8>, values: &[T]) {
    for v in values {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
}

/// Serialize a network (and optionally its optimiser) to bytes.
pub fn encode_checkpoint<T: Scalar>(net: &Network<T>, opt: Option<&Optimizer<T>>, epoch: u64) -> Vec<u8> {
    let rng = net.rng_state();
    let meta = Metadata {
        name: net.spec().name.clone(),
        digest: net.spec().digest(),
        spec: net.spec().clone(),
        params: net
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.value.shape().to_vec()))
            .collect(),
        batch_norm: net
            .bn_states()
            .iter()
            .map(|(n, s)| (n.to_string(), s.running_mean.len()))
            .collect(),
        seed: net.seed(),
        epoch,
        rng_seed: rng.seed.iter().map(|b| format!("{b:02x}")).collect(),
        rng_stream: rng.stream,
        rng_word_pos: rng.word_pos.to_string(),
        optimizer: opt.map(|o| OptimizerMeta {
            config: o.config,
            iterations: o.iterations,
        }),
    };
    let json = serde_json::to_vec(&meta).expect("metadata serialisation cannot fail");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        push_values(&mut out, p.value.data());
    }
    for (_, s) in net.bn_states() {
        push_values(&mut out, &s.running_mean);
        push_values(&mut out, &s.running_var);
    }
    if let Some(o) = opt {
        for slot in o.slot_a.iter().chain(&o.slot_b) {
            push_values(&mut out, slot);
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn save_checkpoint<T: Scalar>(
    net: &Network<T>,
    opt: Option<&Optimizer<T>>,
    epoch: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, encode_checkpoint(net, opt, epoch))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NnError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| NnError::Format("payload too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect())
    }
}

/// Parse a checkpoint, checking magic, version, checksum and spec digest.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    if bytes.len() < MAGIC.len() + 16 {
        return Err(NnError::Format(format!("file of {} bytes is too short", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let meta_len = r.u32()? as usize;
    let meta_bytes = r.take(meta_len)?;
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if checksum(body) != stored {
        return Err(NnError::Integrity("checksum mismatch".into()));
    }
    let meta: Metadata =
        serde_json::from_slice(meta_bytes).map_err(|e| NnError::Format(format!("metadata: {e}")))?;
    if meta.spec.digest() != meta.digest {
        return Err(NnError::Integrity("embedded spec does not match its digest".into()));
    }
    let mut net = build_network::<T>(&meta.spec, meta.seed)?;
    let layout: Vec<(String, Vec<usize>)> = net
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    if layout != meta.params {
        return Err(NnError::Integrity("parameter layout does not match the spec".into()));
    }
    for p in net.params_mut() {
        let n = p.value.len();
        p.value.data_mut().copy_from_slice(&r.values::<T>(n)?);
    }
    for s in net.bn_states_mut() {
        let c = s.running_mean.len();
        s.running_mean = r.values(c)?;
        s.running_var = r.values(c)?;
    }
    let optimizer = match meta.optimizer {
        None => None,
        Some(m) => {
            let sizes: Vec<usize> = net.params().iter().map(|p| p.value.len()).collect();
            let mut opt = Optimizer::new(m.config, &sizes)?;
            opt.iterations = m.iterations;
            for (i, &n) in sizes.iter().enumerate() {
                opt.slot_a[i] = r.values(n)?;
            }
            if m.config.kind == OptimizerKind::Adam {
                for (i, &n) in sizes.iter().enumerate() {
                    opt.slot_b[i] = r.values(n)?;
                }
            }
            Some(opt)
        }
    };
    if r.pos != body.len() {
        return Err(NnError::Format(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let seed_bytes: Vec<u8> = (0..meta.rng_seed.len() / 2)
        .map(|i| u8::from_str_radix(&meta.rng_seed[2 * i..2 * i + 2], 16))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| NnError::Format(format!("rng seed: {e}")))?;
    let seed: [u8; 32] = seed_bytes
        .try_into()
        .map_err(|_| NnError::Format("rng seed must be 32 bytes".into()))?;
    let word_pos = meta
        .rng_word_pos
        .parse()
        .map_err(|e| NnError::Format(format!("rng position: {e}")))?;
    net.set_rng_state(RngState {
        seed,
        stream: meta.rng_stream,
        word_pos,
    });
    Ok(Checkpoint {
        network: net,
        optimizer,
        epoch: meta.epoch,
    })
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    decode_checkpoint(&fs::read(path)?)
}

/// Load a checkpoint and require that it was produced from `expected`.
pub fn load_checkpoint_for<T: Scalar>(path: impl AsRef<Path>, expected: &NetworkSpec) -> Result<Checkpoint<T>> {
    let ck = load_checkpoint::<T>(path)?;
    if ck.network.spec().digest() != expected.digest() {
        return Err(NnError::SpecMismatch {
            expected: expected.name.clone(),
            found: ck.network.spec().name.clone(),
        });
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::Phase;
    use crate::nn::{desk_cnn, optimizer_for, preset, HeadLayout};
    use crate::tensor::Tensor;

    fn tiny_fcn() -> NetworkSpec {
        let mut spec = preset("desk-fcn").unwrap();
        spec.input_shape = [1, 16, 16];
        spec
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let spec = tiny_fcn();
        let mut net = build_network::<f32>(&spec, 5).unwrap();
        let x = Tensor::<f32>::new(&[2, 1, 16, 16], (0..512).map(|i| (i % 17) as f32 / 17.0).collect()).unwrap();
        net.forward(&x, Phase::Train).unwrap();
        let opt = optimizer_for(&net, OptimizerConfig::adam()).unwrap();
        let bytes = encode_checkpoint(&net, Some(&opt), 3);
        let back = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(back.epoch, 3);
        assert_eq!(back.network.predict(&x).unwrap(), net.predict(&x).unwrap());
        assert_eq!(back.optimizer.unwrap(), opt);
        assert_eq!(encode_checkpoint(&back.network, None, 3), encode_checkpoint(&net, None, 3));
    }

    #[test]
    fn corrupted_byte_fails_integrity() {
        let net = build_network::<f32>(&tiny_fcn(), 5).unwrap();
        let mut bytes = encode_checkpoint(&net, None, 0);
        let i = bytes.len() - 20;
        bytes[i] ^= 0x40;
        assert!(matches!(decode_checkpoint::<f32>(&bytes), Err(NnError::Integrity(_))));
    }

    #[test]
    fn truncation_fails_format() {
        let net = build_network::<f32>(&tiny_fcn(), 5).unwrap();
        let bytes = encode_checkpoint(&net, None, 0);
        assert!(matches!(decode_checkpoint::<f32>(&bytes[..10]), Err(NnError::Format(_))));
        assert!(matches!(decode_checkpoint::<f32>(&bytes[..bytes.len() / 2]), Err(NnError::Integrity(_) | NnError::Format(_))));
    }

    #[test]
    fn mismatched_preset_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.oakn");
        let net = build_network::<f32>(&tiny_fcn(), 5).unwrap();
        save_checkpoint(&net, None, 0, &path).unwrap();
        assert!(load_checkpoint_for::<f32>(&path, &tiny_fcn()).is_ok());
        let other = desk_cnn(HeadLayout::Joint);
        assert!(matches!(
            load_checkpoint_for::<f32>(&path, &other),
            Err(NnError::SpecMismatch { .. })
        ));
    }
}
