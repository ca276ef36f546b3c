//! Parameter blobs.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"CTXB" | u32 header length | header JSON | f64 payload
//! ```
//!
//! The header lists named sections in payload order; each section records
//! its element count and free-form attributes (layer sizes, activations,
//! optimizer counters). Encoding is deterministic, so equal state yields
//! equal bytes.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Activation, Adam, AdamConfig, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CTXB";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionHeader {
    pub name: String,
    pub len: usize,
    #[serde(default)]
    pub attrs: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub header: SectionHeader,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    sections: Vec<SectionHeader>,
}

pub fn encode(sections: &[Section]) -> Vec<u8> {
    let header = Header {
        sections: sections.iter().map(|s| s.header.clone()).collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let payload: usize = sections.iter().map(|s| s.data.len()).sum();
    let mut out = Vec::with_capacity(8 + header.len() + payload * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for s in sections {
        for v in &s.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Section>> {
    let corrupt = |why: &str| Error::invalid(format!("corrupt parameter blob: {why}"));
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let mut payload = &bytes[8 + hlen..];
    let expected: usize = header.sections.iter().map(|s| s.len).sum();
    if payload.len() != expected * 8 {
        return Err(corrupt("payload length mismatch"));
    }
    let mut sections = Vec::with_capacity(header.sections.len());
    for h in header.sections {
        let (chunk, rest) = payload.split_at(h.len * 8);
        payload = rest;
        let data = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        sections.push(Section { header: h, data });
    }
    Ok(sections)
}

pub fn find<'a>(sections: &'a [Section], name: &str) -> Result<&'a Section> {
    sections
        .iter()
        .find(|s| s.header.name == name)
        .ok_or_else(|| Error::invalid(format!("blob has no section `{name}`")))
}

fn attr<T: serde::de::DeserializeOwned>(s: &Section, key: &str) -> Result<T> {
    let v = s
        .header
        .attrs
        .get(key)
        .ok_or_else(|| Error::invalid(format!("section `{}` lacks `{key}`", s.header.name)))?;
    Ok(serde_json::from_value(v.clone())?)
}

fn section(name: &str, data: Vec<f64>, attrs: Value) -> Section {
    let attrs = match attrs {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    Section {
        header: SectionHeader {
            name: name.to_string(),
            len: data.len(),
            attrs,
        },
        data,
    }
}

impl Mlp {
    pub fn to_section(&self, name: &str) -> Section {
        section(
            name,
            self.params().to_vec(),
            json!({
                "sizes": self.sizes(),
                "hidden": self.hidden_activation(),
                "output": self.output_activation(),
            }),
        )
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let sizes: Vec<usize> = attr(s, "sizes")?;
        let hidden: Activation = attr(s, "hidden")?;
        let output: Activation = attr(s, "output")?;
        Mlp::from_params(&sizes, hidden, output, s.data.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&[self.to_section("mlp")])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let sections = decode(bytes)?;
        Mlp::from_section(find(&sections, "mlp")?)
    }
}

impl Adam {
    /// First and second moments as two sections, `<name>.m` and `<name>.v`.
    pub fn to_sections(&self, name: &str) -> [Section; 2] {
        let attrs = json!({
            "t": self.t,
            "beta1": self.config.beta1,
            "beta2": self.config.beta2,
            "eps": self.config.eps,
        });
        [
            section(&format!("{name}.m"), self.m.clone(), attrs.clone()),
            section(&format!("{name}.v"), self.v.clone(), attrs),
        ]
    }

    pub fn from_sections(sections: &[Section], name: &str) -> Result<Self> {
        let m = find(sections, &format!("{name}.m"))?;
        let v = find(sections, &format!("{name}.v"))?;
        let config = AdamConfig {
            beta1: attr(m, "beta1")?,
            beta2: attr(m, "beta2")?,
            eps: attr(m, "eps")?,
        };
        Adam::from_parts(config, m.data.clone(), v.data.clone(), attr(m, "t")?)
    }
}
