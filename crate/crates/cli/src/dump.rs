//! Raw little-endian field dumps with JSON sidecar metadata.

use anyhow::{bail, Context, Result};
use mhd_shock::field::{Grid, Modal2, Modal3, Parity};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub field: String,
    pub parity: String,
    pub kind: String,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub rs: f64,
    pub r2: f64,
    pub theta0: f64,
}

fn parity_tag(p: Parity) -> String {
    p.tag().to_string()
}

fn parity_from(tag: &str) -> Result<Parity> {
    Ok(match tag {
        "cc" => Parity::CC,
        "sc" => Parity::SC,
        "cs" => Parity::CS,
        "ss" => Parity::SS,
        other => bail!("unknown parity tag '{other}'"),
    })
}

fn write_bin(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_bin(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() != len * 8 {
        bail!("{}: expected {} bytes, found {}", path.display(), len * 8, bytes.len());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn dump_modal3(dir: &Path, name: &str, grid: &Grid, f: &Modal3) -> Result<()> {
    let meta = Sidecar {
        field: name.to_string(),
        parity: parity_tag(f.parity),
        kind: "modal3".into(),
        n1: f.n1,
        n2: f.n2,
        n3: f.n3,
        rs: grid.rs(),
        r2: grid.r2(),
        theta0: grid.theta.half,
    };
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&meta)?)?;
    write_bin(&dir.join(format!("{name}.bin")), &f.c)
}

pub fn dump_modal2(dir: &Path, name: &str, grid: &Grid, f: &Modal2) -> Result<()> {
    let meta = Sidecar {
        field: name.to_string(),
        parity: parity_tag(f.parity),
        kind: "modal2".into(),
        n1: 1,
        n2: f.n2,
        n3: f.n3,
        rs: grid.rs(),
        r2: grid.r2(),
        theta0: grid.theta.half,
    };
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&meta)?)?;
    write_bin(&dir.join(format!("{name}.bin")), &f.c)
}

pub fn load_modal3(dir: &Path, name: &str, grid: &Grid) -> Result<Modal3> {
    let meta: Sidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json")))?)?;
    if meta.kind != "modal3" || meta.n1 != grid.n1 || meta.n2 != grid.n2() || meta.n3 != grid.n3()
    {
        bail!("{name}: sidecar does not match the configured grid");
    }
    let c = read_bin(&dir.join(format!("{name}.bin")), meta.n1 * meta.n2 * meta.n3)?;
    Ok(Modal3 { parity: parity_from(&meta.parity)?, n1: meta.n1, n2: meta.n2, n3: meta.n3, c })
}

pub fn load_modal2(dir: &Path, name: &str, grid: &Grid) -> Result<Modal2> {
    let meta: Sidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json")))?)?;
    if meta.kind != "modal2" || meta.n2 != grid.n2() || meta.n3 != grid.n3() {
        bail!("{name}: sidecar does not match the configured grid");
    }
    let c = read_bin(&dir.join(format!("{name}.bin")), meta.n2 * meta.n3)?;
    Ok(Modal2 { parity: parity_from(&meta.parity)?, n2: meta.n2, n3: meta.n3, c })
}
