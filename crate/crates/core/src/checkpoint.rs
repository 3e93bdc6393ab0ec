//! Binary checkpoint container.
//!
//! All integers and reals are little-endian; strings are a `u32` byte count
//! followed by UTF-8.
//!
//! ```text
//! "SCTC"  u32 version
//! str network config      str topology fingerprint      u64 epoch
//! u32 block count, per block: str name, u32 rank, u64 dims…, f64 values…
//! u8 has optimizer; if 1: f64 rho, f64 epsilon, u64 steps,
//!    then per block E[g²] values followed by E[Δx²] values
//! ```

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::net::{Init, Network, NetworkConfig};
use crate::optim::AdadeltaState;
use crate::params::ParamStore;

pub const MAGIC: &[u8; 4] = b"SCTC";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: NetworkConfig,
    pub fingerprint: String,
    /// Number of completed training epochs.
    pub epoch: u64,
    pub params: ParamStore,
    pub optimizer: Option<AdadeltaState>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.write_u32::<LE>(s.len() as u32).unwrap();
    out.extend_from_slice(s.as_bytes());
}

fn put_values(out: &mut Vec<u8>, v: &[f64]) {
    for &x in v {
        out.write_f64::<LE>(x).unwrap();
    }
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn truncated<T>(r: std::io::Result<T>) -> Result<T> {
        r.map_err(|_| Error::Format("checkpoint is truncated".into()))
    }

    fn u8(&mut self) -> Result<u8> {
        Self::truncated(self.0.read_u8())
    }

    fn u32(&mut self) -> Result<u32> {
        Self::truncated(self.0.read_u32::<LE>())
    }

    fn u64(&mut self) -> Result<u64> {
        Self::truncated(self.0.read_u64::<LE>())
    }

    fn f64(&mut self) -> Result<f64> {
        Self::truncated(self.0.read_f64::<LE>())
    }

    fn remaining(&self) -> usize {
        self.0.get_ref().len() - self.0.position() as usize
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        if n > self.remaining() {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let mut buf = vec![0; n];
        Self::truncated(self.0.read_exact(&mut buf))?;
        String::from_utf8(buf).map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }

    fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn from_network(net: &Network, epoch: u64, optimizer: Option<&AdadeltaState>) -> Self {
        Checkpoint {
            network: net.config().clone(),
            fingerprint: net.fingerprint().to_string(),
            epoch,
            params: net.params().clone(),
            optimizer: optimizer.cloned(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LE>(VERSION).unwrap();
        put_str(&mut out, &self.network.to_text());
        put_str(&mut out, &self.fingerprint);
        out.write_u64::<LE>(self.epoch).unwrap();
        out.write_u32::<LE>(self.params.len() as u32).unwrap();
        for b in self.params.blocks() {
            put_str(&mut out, &b.name);
            out.write_u32::<LE>(b.shape.len() as u32).unwrap();
            for &d in &b.shape {
                out.write_u64::<LE>(d as u64).unwrap();
            }
            put_values(&mut out, &b.values);
        }
        match &self.optimizer {
            None => out.push(0),
            Some(st) => {
                out.push(1);
                out.write_f64::<LE>(st.rho).unwrap();
                out.write_f64::<LE>(st.epsilon).unwrap();
                out.write_u64::<LE>(st.steps).unwrap();
                for (g, d) in st.mean_sq_grad.iter().zip(&st.mean_sq_delta) {
                    put_values(&mut out, g);
                    put_values(&mut out, d);
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let mut r = Reader(Cursor::new(bytes));
        r.0.set_position(4);
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Compatibility(format!("checkpoint version {version}, expected {VERSION}")));
        }
        let network = NetworkConfig::from_text(&r.str()?)?;
        let fingerprint = r.str()?;
        let epoch = r.u64()?;
        let count = r.u32()? as usize;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = r.str()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("block {name} is too large")))?;
            let values = r.values(n)?;
            params.add(name, &shape, values);
        }
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let rho = r.f64()?;
                let epsilon = r.f64()?;
                let steps = r.u64()?;
                let mut st = AdadeltaState::new(&params, rho, epsilon)
                    .map_err(|e| Error::Format(format!("optimizer state: {e}")))?;
                st.steps = steps;
                for i in 0..params.len() {
                    let n = params.blocks()[i].values.len();
                    st.mean_sq_grad[i] = r.values(n)?;
                    st.mean_sq_delta[i] = r.values(n)?;
                }
                Some(st)
            }
            f => return Err(Error::Format(format!("bad optimizer flag {f}"))),
        };
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Checkpoint {
            network,
            fingerprint,
            epoch,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.encode())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Rebuilds the network described by the checkpoint and loads its weights.
    pub fn to_network(&self) -> Result<Network> {
        let mut net = Network::build(self.network.clone(), Init::Zeros)?;
        if net.fingerprint() != self.fingerprint {
            return Err(Error::Compatibility(format!(
                "checkpoint topology {} does not match its own config ({})",
                self.fingerprint,
                net.fingerprint()
            )));
        }
        net.params_mut().load_from(&self.params)?;
        Ok(net)
    }

    /// Fails unless `expected` has the same topology as this checkpoint.
    pub fn check_compatible(&self, expected: &Network) -> Result<()> {
        if expected.fingerprint() != self.fingerprint {
            return Err(Error::Compatibility(format!(
                "checkpoint topology {} differs from configured network {}",
                self.fingerprint,
                expected.fingerprint()
            )));
        }
        Ok(())
    }
}
