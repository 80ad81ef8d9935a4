//! Stored posterior draws and their on-disk forms.
//!
//! The binary layout is columnar little-endian:
//!
//! ```text
//! magic "HPDRAWS1"
//! u32 N, u32 T, u32 K, u64 S
//! u64 seed, u64 n_iter, u64 burn_in, u64 thin
//! u32 n_chains, then per chain: u64 accepted_alpha, u64 accepted_eps,
//!                               u64 proposals, u64 floored
//! S × u32 chain index
//! one column of S × f64 per scalar, in `column_names()` order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::ParameterState;

const MAGIC: &[u8; 8] = b"HPDRAWS1";

/// Per-chain sampler diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub accepted_alpha: u64,
    pub accepted_eps: u64,
    /// MH proposals made for each of σ²_α and σ²_ε.
    pub proposals: u64,
    /// Variance draws raised to the 1e-12 floor.
    pub floored: u64,
}

impl ChainStats {
    pub fn acceptance_alpha(&self) -> f64 {
        rate(self.accepted_alpha, self.proposals)
    }

    pub fn acceptance_eps(&self) -> f64 {
        rate(self.accepted_eps, self.proposals)
    }
}

fn rate(a: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        a as f64 / n as f64
    }
}

/// Settings a set of draws was produced under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DrawsMeta {
    pub seed: u64,
    pub n_iter: u64,
    pub burn_in: u64,
    pub thin: u64,
}

/// Thinned post-burn-in states from one or more chains.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub n_regions: usize,
    pub n_periods: usize,
    pub k_regressors: usize,
    pub states: Vec<ParameterState>,
    /// Chain index of each stored state.
    pub chain: Vec<u32>,
    pub chain_stats: Vec<ChainStats>,
    pub meta: DrawsMeta,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Concatenates per-chain draws in chain order.
    pub fn concat(parts: Vec<PosteriorDraws>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::invalid("no chains to combine"))?;
        for (c, part) in iter.enumerate() {
            if (part.n_regions, part.n_periods, part.k_regressors)
                != (out.n_regions, out.n_periods, out.k_regressors)
            {
                return Err(Error::invalid("chains disagree on dimensions"));
            }
            let offset = (c + 1) as u32;
            out.chain.extend(part.chain.iter().map(|_| offset));
            out.states.extend(part.states);
            out.chain_stats.extend(part.chain_stats);
        }
        Ok(out)
    }

    /// Per-draw values of one scalar.
    pub fn series(&self, f: impl Fn(&ParameterState) -> f64) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.k_regressors)
            .map(|k| format!("beta_{k}"))
            .collect();
        names.extend(
            [
                "sigma2_alpha",
                "sigma2_eps",
                "sigma2_v",
                "sigma2_u",
                "sigma2_eta",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        names.extend((0..self.n_regions).map(|i| format!("eta_plus_{i}")));
        names.extend((0..self.n_regions).map(|i| format!("v_{i}")));
        for i in 0..self.n_regions {
            for t in 0..self.n_periods {
                names.push(format!("u_plus_{i}_{t}"));
            }
        }
        names
    }

    fn flatten(s: &ParameterState) -> Vec<f64> {
        let mut row = s.beta.clone();
        row.extend([
            s.sigma2_alpha,
            s.sigma2_eps,
            s.sigma2_v,
            s.sigma2_u,
            s.sigma2_eta,
        ]);
        row.extend(&s.eta_plus);
        row.extend(&s.v);
        row.extend(&s.u_plus);
        row
    }

    fn unflatten(&self, row: &[f64]) -> ParameterState {
        let (n, t, k) = (self.n_regions, self.n_periods, self.k_regressors);
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &row[at..at + len];
            at += len;
            s.to_vec()
        };
        let beta = take(k);
        let var = take(5);
        let eta_plus = take(n);
        let v = take(n);
        let u_plus = take(n * t);
        ParameterState {
            beta,
            u_plus,
            eta_plus,
            v,
            sigma2_alpha: var[0],
            sigma2_eps: var[1],
            sigma2_v: var[2],
            sigma2_u: var[3],
            sigma2_eta: var[4],
        }
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn encode<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for d in [self.n_regions, self.n_periods, self.k_regressors] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&(self.states.len() as u64).to_le_bytes())?;
        for m in [
            self.meta.seed,
            self.meta.n_iter,
            self.meta.burn_in,
            self.meta.thin,
        ] {
            w.write_all(&m.to_le_bytes())?;
        }
        w.write_all(&(self.chain_stats.len() as u32).to_le_bytes())?;
        for s in &self.chain_stats {
            for v in [s.accepted_alpha, s.accepted_eps, s.proposals, s.floored] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for c in &self.chain {
            w.write_all(&c.to_le_bytes())?;
        }
        let rows: Vec<Vec<f64>> = self.states.iter().map(Self::flatten).collect();
        let width = rows.first().map_or(0, Vec::len);
        for col in 0..width {
            for row in &rows {
                w.write_all(&row[col].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Self::decode(&mut r).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData | std::io::ErrorKind::UnexpectedEof => {
                Error::validation(format!("{}: {e}", path.display()))
            }
            _ => Error::io(path, e),
        })
    }

    fn decode<R: Read>(r: &mut R) -> std::io::Result<Self> {
        use std::io::{Error as IoError, ErrorKind};
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IoError::new(ErrorKind::InvalidData, "not a draws file"));
        }
        let n = read_u32(r)? as usize;
        let t = read_u32(r)? as usize;
        let k = read_u32(r)? as usize;
        let s = read_u64(r)? as usize;
        if s == 0 {
            return Err(IoError::new(
                ErrorKind::InvalidData,
                "draws file holds no draws",
            ));
        }
        let meta = DrawsMeta {
            seed: read_u64(r)?,
            n_iter: read_u64(r)?,
            burn_in: read_u64(r)?,
            thin: read_u64(r)?,
        };
        let n_chains = read_u32(r)? as usize;
        let mut chain_stats = Vec::with_capacity(n_chains);
        for _ in 0..n_chains {
            chain_stats.push(ChainStats {
                accepted_alpha: read_u64(r)?,
                accepted_eps: read_u64(r)?,
                proposals: read_u64(r)?,
                floored: read_u64(r)?,
            });
        }
        let mut chain = Vec::with_capacity(s);
        for _ in 0..s {
            chain.push(read_u32(r)?);
        }
        let width = k + 5 + 2 * n + n * t;
        let mut rows = vec![vec![0.0; width]; s];
        let mut buf = [0u8; 8];
        for col in 0..width {
            for row in rows.iter_mut() {
                r.read_exact(&mut buf)?;
                row[col] = f64::from_le_bytes(buf);
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(IoError::new(
                ErrorKind::InvalidData,
                "trailing bytes after draws",
            ));
        }
        let mut out = PosteriorDraws {
            n_regions: n,
            n_periods: t,
            k_regressors: k,
            states: Vec::new(),
            chain,
            chain_stats,
            meta,
        };
        out.states = rows.iter().map(|row| out.unflatten(row)).collect();
        Ok(out)
    }

    /// Wide CSV, one row per draw, full precision.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["chain".to_string()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for (s, c) in self.states.iter().zip(&self.chain) {
            let mut rec = vec![c.to_string()];
            rec.extend(Self::flatten(s).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PosteriorDraws {
        let state = |x: f64| ParameterState {
            beta: vec![x, -x],
            u_plus: vec![0.1 * x, 0.2, 0.3, 0.4],
            eta_plus: vec![0.5, 0.6 + x],
            v: vec![-0.1, 0.1],
            sigma2_alpha: 0.01,
            sigma2_eps: 0.02,
            sigma2_v: 0.03,
            sigma2_u: 0.04,
            sigma2_eta: 0.05 + x,
        };
        PosteriorDraws {
            n_regions: 2,
            n_periods: 2,
            k_regressors: 2,
            states: vec![state(1.0), state(2.0), state(3.0)],
            chain: vec![0, 0, 1],
            chain_stats: vec![ChainStats::default(); 2],
            meta: DrawsMeta {
                seed: 9,
                n_iter: 10,
                burn_in: 5,
                thin: 1,
            },
        }
    }

    #[test]
    fn binary_roundtrip() {
        let d = tiny();
        let mut buf = Vec::new();
        d.encode(&mut buf).unwrap();
        let back = PosteriorDraws::decode(&mut buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_garbage_and_empty() {
        assert!(PosteriorDraws::decode(&mut &b"nonsense-bytes"[..]).is_err());
        let mut d = tiny();
        d.states.clear();
        d.chain.clear();
        let mut buf = Vec::new();
        d.encode(&mut buf).unwrap();
        assert!(PosteriorDraws::decode(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn column_count_matches_row_width() {
        let d = tiny();
        assert_eq!(
            d.column_names().len(),
            PosteriorDraws::flatten(&d.states[0]).len()
        );
    }
}
