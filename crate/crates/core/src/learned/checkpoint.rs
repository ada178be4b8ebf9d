//! Parameter files: one text header line of `key=value` fields, then the
//! parameters of each network as little-endian `f64`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learned::net::ConvNet;

const MAGIC: &str = "devopt-params v1";

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Smooth {
        net: ConvNet,
        eps: f64,
        seed: u64,
    },
    ForwardBackward {
        first: ConvNet,
        second: ConvNet,
        kappa: (f64, f64),
        seed: u64,
    },
}

fn net_fields(prefix: &str, net: &ConvNet) -> String {
    net.describe()
        .split(' ')
        .map(|kv| format!("{prefix}{kv}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse<T: std::str::FromStr>(fields: &BTreeMap<String, String>, key: &str) -> Result<T> {
    fields
        .get(key)
        .ok_or_else(|| Error::Checkpoint(format!("missing header field {key}")))?
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad value for {key}")))
}

fn read_net(
    fields: &BTreeMap<String, String>,
    prefix: &str,
    body: &mut &[u8],
) -> Result<ConvNet> {
    let cin: usize = parse(fields, &format!("{prefix}in"))?;
    let hidden: usize = parse(fields, &format!("{prefix}hidden"))?;
    let slope: f64 = parse(fields, &format!("{prefix}slope"))?;
    let count: usize = parse(fields, &format!("{prefix}params"))?;
    let mut net = ConvNet::zeros(cin, hidden, slope)?;
    if count != net.param_count() {
        return Err(Error::Checkpoint(format!(
            "header says {count} parameters, architecture has {}",
            net.param_count()
        )));
    }
    if body.len() < 8 * count {
        return Err(Error::Checkpoint("parameter block truncated".into()));
    }
    let (head, rest) = body.split_at(8 * count);
    let params = head
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    net.set_params(params)?;
    *body = rest;
    Ok(net)
}

impl Checkpoint {
    pub fn header(&self) -> String {
        match self {
            Checkpoint::Smooth { net, eps, seed } => format!(
                "{MAGIC} kind=smooth nets=1 {} eps={eps} seed={seed}",
                net_fields("", net)
            ),
            Checkpoint::ForwardBackward {
                first,
                second,
                kappa,
                seed,
            } => format!(
                "{MAGIC} kind=fb nets=2 {} {} kappa_a={} kappa_b={} seed={seed}",
                net_fields("first.", first),
                net_fields("second.", second),
                kappa.0,
                kappa.1
            ),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        out.push(b'\n');
        let nets: Vec<&ConvNet> = match self {
            Checkpoint::Smooth { net, .. } => vec![net],
            Checkpoint::ForwardBackward { first, second, .. } => vec![first, second],
        };
        for net in nets {
            for p in net.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::Checkpoint("header is not text".into()))?;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Checkpoint("not a parameter file".into()))?;
        let fields: BTreeMap<String, String> = rest
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut body = &bytes[nl + 1..];
        let kind: String = parse(&fields, "kind")?;
        let seed: u64 = parse(&fields, "seed")?;
        let ck = match kind.as_str() {
            "smooth" => Checkpoint::Smooth {
                net: read_net(&fields, "", &mut body)?,
                eps: parse(&fields, "eps")?,
                seed,
            },
            "fb" => Checkpoint::ForwardBackward {
                first: read_net(&fields, "first.", &mut body)?,
                second: read_net(&fields, "second.", &mut body)?,
                kappa: (parse(&fields, "kappa_a")?, parse(&fields, "kappa_b")?),
                seed,
            },
            other => return Err(Error::Checkpoint(format!("unknown kind {other}"))),
        };
        if !body.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", body.len())));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
