//! Text snapshots of a [`ParamFn`].
//!
//! ```text
//! #bsde-ml-params v1 <architecture descriptor>
//! p,<value>          one line per trainable parameter, in storage order
//! s,<value>          one line per buffer value (running statistics)
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a snapshot
//! restores parameters bit-for-bit.

use std::io::{BufRead, Write};

use super::ParamFn;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &str = "#bsde-ml-params";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub version: u32,
    pub arch: String,
    pub params: Vec<f64>,
    pub buffers: Vec<f64>,
}

impl Snapshot {
    pub fn of<P: ParamFn + ?Sized>(f: &P) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            arch: f.arch(),
            params: f.params().to_vec(),
            buffers: f.buffers(),
        }
    }

    /// Copies the stored values into `f`; the architecture must match.
    pub fn restore<P: ParamFn + ?Sized>(&self, f: &mut P) -> Result<()> {
        if f.arch() != self.arch {
            return Err(Error::InvalidArgument(format!(
                "snapshot architecture `{}` does not match `{}`",
                self.arch,
                f.arch()
            )));
        }
        crate::error::check_dim("snapshot parameters", f.num_params(), self.params.len())?;
        f.params_mut().copy_from_slice(&self.params);
        f.set_buffers(&self.buffers)
    }
}

pub fn write_snapshot<W: Write, P: ParamFn + ?Sized>(mut w: W, f: &P) -> Result<()> {
    writeln!(w, "{MAGIC} v{SNAPSHOT_VERSION} {}", f.arch())?;
    for p in f.params() {
        writeln!(w, "p,{p}")?;
    }
    for s in f.buffers() {
        writeln!(w, "s,{s}")?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty snapshot".into()))??;
    let rest = header
        .strip_prefix(MAGIC)
        .and_then(|s| s.strip_prefix(" v"))
        .ok_or_else(|| Error::InvalidArgument(format!("bad snapshot header `{header}`")))?;
    let (version, arch) = rest.split_once(' ').unwrap_or((rest, ""));
    let version: u32 = version
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad snapshot version `{version}`")))?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported snapshot version {version}")));
    }
    let mut snap = Snapshot {
        version,
        arch: arch.to_string(),
        params: Vec::new(),
        buffers: Vec::new(),
    };
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (kind, value) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidArgument(format!("bad snapshot line `{line}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad value `{value}`")))?;
        match kind {
            "p" => snap.params.push(value),
            "s" => snap.buffers.push(value),
            _ => return Err(Error::InvalidArgument(format!("bad snapshot line `{line}`"))),
        }
    }
    Ok(snap)
}
