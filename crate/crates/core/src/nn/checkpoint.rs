//! Checkpoint container: named networks plus the seed that produced them.
//!
//! On disk: a magic line, a one-line JSON header (stage, seed, payload
//! sha256, per-network architecture and length), then the concatenated
//! parameter payload as little-endian f64. The layout contains nothing
//! machine- or time-dependent, so identical runs write identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::{Activation, FlatParams, MlpArchitecture};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "swingup-checkpoint-v1";

/// One named parameter block, e.g. "policy" or "q1".
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEntry {
    pub name: String,
    pub arch: MlpArchitecture,
    pub params: FlatParams,
}

impl NetworkEntry {
    pub fn new(name: impl Into<String>, arch: MlpArchitecture, params: FlatParams) -> Self {
        Self {
            name: name.into(),
            arch,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Pipeline stage that wrote the file ("sac", "snes", ...).
    pub stage: String,
    /// Seed of the run that produced the parameters.
    pub seed: u64,
    pub networks: Vec<NetworkEntry>,
}

#[derive(Serialize, Deserialize)]
struct HeaderNet {
    name: String,
    layer_sizes: Vec<usize>,
    activation: Activation,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    stage: String,
    seed: u64,
    sha256: String,
    networks: Vec<HeaderNet>,
}

fn payload_hash(payload: &[u8]) -> String {
    let digest = Sha256::digest(payload);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Result<&NetworkEntry> {
        self.networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("no network named `{name}`")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload =
            Vec::with_capacity(8 * self.networks.iter().map(|n| n.params.len()).sum::<usize>());
        for net in &self.networks {
            if net.params.len() != net.arch.param_count() {
                return Err(Error::Checkpoint(format!(
                    "network `{}` has {} params, architecture wants {}",
                    net.name,
                    net.params.len(),
                    net.arch.param_count()
                )));
            }
            for v in net.params.as_slice() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            stage: self.stage.clone(),
            seed: self.seed,
            sha256: payload_hash(&payload),
            networks: self
                .networks
                .iter()
                .map(|n| HeaderNet {
                    name: n.name.clone(),
                    layer_sizes: n.arch.layer_sizes.clone(),
                    activation: n.arch.activation,
                    len: n.params.len(),
                })
                .collect(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        w.write_all(&payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let magic_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing magic line".into()))?;
        let magic = std::str::from_utf8(&bytes[..magic_end])
            .map_err(|_| Error::Checkpoint("magic line is not utf-8".into()))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic `{magic}`, expected `{CHECKPOINT_MAGIC}`"
            )));
        }
        let rest = &bytes[magic_end + 1..];
        let header_end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&rest[..header_end])
            .map_err(|e| Error::Checkpoint(format!("header parse: {e}")))?;
        let payload = &rest[header_end + 1..];
        let expected: usize = header.networks.iter().map(|n| n.len).sum();
        if payload.len() != expected * 8 {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, header wants {}",
                payload.len(),
                expected * 8
            )));
        }
        let hash = payload_hash(payload);
        if hash != header.sha256 {
            return Err(Error::Checkpoint(format!(
                "payload checksum mismatch: {hash} vs header {}",
                header.sha256
            )));
        }
        let mut networks = Vec::with_capacity(header.networks.len());
        let mut off = 0;
        for hn in header.networks {
            let arch = MlpArchitecture::new(hn.layer_sizes, hn.activation)
                .map_err(|e| Error::Checkpoint(format!("network `{}`: {e}", hn.name)))?;
            if arch.param_count() != hn.len {
                return Err(Error::Checkpoint(format!(
                    "network `{}` length {} does not match its architecture ({})",
                    hn.name,
                    hn.len,
                    arch.param_count()
                )));
            }
            let mut params = Vec::with_capacity(hn.len);
            for k in 0..hn.len {
                let p = off + 8 * k;
                params.push(f64::from_le_bytes(payload[p..p + 8].try_into().unwrap()));
            }
            off += 8 * hn.len;
            networks.push(NetworkEntry::new(hn.name, arch, FlatParams(params)));
        }
        Ok(Self {
            stage: header.stage,
            seed: header.seed,
            networks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let arch_p = MlpArchitecture::new(vec![6, 8, 2], Activation::Relu).unwrap();
        let arch_q = MlpArchitecture::new(vec![7, 8, 1], Activation::Relu).unwrap();
        Checkpoint {
            stage: "sac".into(),
            seed: 42,
            networks: vec![
                NetworkEntry::new("policy", arch_p.clone(), FlatParams::init(&arch_p, &mut rng)),
                NetworkEntry::new("q1", arch_q.clone(), FlatParams::init(&arch_q, &mut rng)),
                NetworkEntry::new("q2", arch_q.clone(), FlatParams::init(&arch_q, &mut rng)),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let ck = sample_checkpoint();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ck, back);
        for (a, b) in ck.networks.iter().zip(&back.networks) {
            for (x, y) in a.params.as_slice().iter().zip(b.params.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn repeated_saves_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        let ck = sample_checkpoint();
        ck.save(&p1).unwrap();
        ck.save(&p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 5] ^= 0x40;
        std::fs::write(&path, bytes).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        std::fs::write(&path, b"not-a-checkpoint\n{}\n").unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn missing_network_lookup_fails() {
        let ck = sample_checkpoint();
        assert!(ck.network("policy").is_ok());
        assert!(ck.network("value").is_err());
    }
}
