//! Chain dumps: CSV (`draw, w0..w{d-1}, nll`), a little-endian binary layout,
//! and a JSON sidecar carrying configuration and diagnostics.
//!
//! Binary layout: magic `WBCH`, u32 version (1), u64 draws, u64 dim, f64 beta,
//! u64 n, then for each draw `dim` parameter values followed by `nll`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Chain, ChainConfig, ChainDiagnostics};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WBCH";
const VERSION: u32 = 1;

pub fn write_chain_csv<W: Write>(chain: &Chain, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["draw".to_string()];
    header.extend((0..chain.dim).map(|k| format!("w{k}")));
    header.push("nll".into());
    w.write_record(&header)?;
    for r in 0..chain.len() {
        let mut row = vec![r.to_string()];
        row.extend(chain.draw(r).iter().map(|v| v.to_string()));
        row.push(chain.nll[r].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chain_binary<W: Write>(chain: &Chain, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(chain.len() as u64).to_le_bytes())?;
    out.write_all(&(chain.dim as u64).to_le_bytes())?;
    out.write_all(&chain.beta.to_le_bytes())?;
    out.write_all(&(chain.n as u64).to_le_bytes())?;
    for r in 0..chain.len() {
        for v in chain.draw(r) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&chain.nll[r].to_le_bytes())?;
    }
    Ok(())
}

/// Raw contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDump {
    pub beta: f64,
    pub n: usize,
    pub dim: usize,
    pub draws: Vec<f64>,
    pub nll: Vec<f64>,
}

pub fn read_chain_binary<R: Read>(mut input: R) -> Result<ChainDump> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config("not a chain dump (bad magic)".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Config("unsupported chain dump version".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut b8)?;
        Ok(b8)
    };
    let len = u64::from_le_bytes(next(&mut input)?) as usize;
    let dim = u64::from_le_bytes(next(&mut input)?) as usize;
    let beta = f64::from_le_bytes(next(&mut input)?);
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let mut draws = Vec::with_capacity(len * dim);
    let mut nll = Vec::with_capacity(len);
    for _ in 0..len {
        for _ in 0..dim {
            draws.push(f64::from_le_bytes(next(&mut input)?));
        }
        nll.push(f64::from_le_bytes(next(&mut input)?));
    }
    Ok(ChainDump { beta, n, dim, draws, nll })
}

/// JSON metadata written next to a dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSidecar {
    pub beta: f64,
    pub n: usize,
    pub dim: usize,
    pub draws: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub step_std_final: f64,
    pub model_fingerprint: String,
    pub data_fingerprint: String,
    pub config: ChainConfig,
    pub per_chain: Vec<ChainDiagnostics>,
}

impl From<&Chain> for ChainSidecar {
    fn from(c: &Chain) -> Self {
        ChainSidecar {
            beta: c.beta,
            n: c.n,
            dim: c.dim,
            draws: c.len(),
            seed: c.seed,
            acceptance_rate: c.acceptance_rate,
            step_std_final: c.step_std_final,
            model_fingerprint: c.model_fingerprint.clone(),
            data_fingerprint: c.data_fingerprint.clone(),
            config: c.config.clone(),
            per_chain: c.per_chain.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{run_chain, TemperedTarget};
    use crate::models::{ConjugateNormalModel, Dataset};

    fn chain() -> Chain {
        let m = ConjugateNormalModel::new(2, 1.0, 1.0).unwrap();
        let data = Dataset::plain(vec![vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.0, 1.0]]).unwrap();
        let t = TemperedTarget::new(&m, &data, 1.0).unwrap();
        let cfg = ChainConfig { burn_in: 100, thin: 2, draws: 25, step_std_init: 0.5, ..Default::default() };
        run_chain(&t, &cfg).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let c = chain();
        let mut buf = Vec::new();
        write_chain_binary(&c, &mut buf).unwrap();
        let dump = read_chain_binary(&buf[..]).unwrap();
        assert_eq!(dump.draws, c.draws);
        assert_eq!(dump.nll, c.nll);
        assert_eq!((dump.beta, dump.n, dump.dim), (c.beta, c.n, c.dim));
        assert!(read_chain_binary(&b"NOPE0000"[..]).is_err());
    }

    #[test]
    fn csv_has_index_params_and_nll() {
        let c = chain();
        let mut buf = Vec::new();
        write_chain_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "draw,w0,w1,nll");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[3].parse::<f64>().unwrap(), c.nll[0]);
        assert_eq!(text.lines().count(), 26);
    }
}
