//! Parameter checkpoint format: structured text with an explicit float
//! format tag. Parameter values are written as the hexadecimal bit pattern
//! of each 64-bit float, so load/save round-trips are bit-exact regardless
//! of locale or decimal formatting.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{Activation, DiffError, MlpSpec, ParamStore};

const MAGIC: &str = "armslab-checkpoint v1";
const FLOAT_FORMAT: &str = "f64-bits-hex";

/// One named network inside a checkpoint file, with optional scalar
/// metadata (e.g. an output scale factor).
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub spec: MlpSpec,
    pub params: ParamStore<f64>,
    pub meta: BTreeMap<String, f64>,
}

pub fn save_checkpoint<W: Write>(w: &mut W, entries: &[CheckpointEntry]) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "float-format {FLOAT_FORMAT}")?;
    writeln!(w, "entries {}", entries.len())?;
    for e in entries {
        writeln!(w, "entry {}", e.name)?;
        write!(w, "layers {}", e.spec.layer_sizes.len())?;
        for s in &e.spec.layer_sizes {
            write!(w, " {s}")?;
        }
        writeln!(w)?;
        writeln!(w, "hidden {}", e.spec.hidden_activation.name())?;
        writeln!(w, "output {}", e.spec.output_activation.name())?;
        writeln!(w, "meta {}", e.meta.len())?;
        for (k, v) in &e.meta {
            writeln!(w, "{k} {:016x}", v.to_bits())?;
        }
        writeln!(w, "params {}", e.params.len())?;
        for chunk in e.params.flat().chunks(16) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: BufRead>(r: &mut R) -> Result<Vec<CheckpointEntry>, DiffError> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String, DiffError> {
        lines
            .next()
            .ok_or_else(|| DiffError::Checkpoint(format!("unexpected end of file, wanted {what}")))?
            .map_err(|e| DiffError::Checkpoint(format!("read error: {e}")))
    };

    let magic = next("magic line")?;
    if magic.trim() != MAGIC {
        return Err(DiffError::Checkpoint(format!("bad magic line: {magic:?}")));
    }
    let fmt = next("float-format line")?;
    let fmt_tag = fmt
        .strip_prefix("float-format ")
        .ok_or_else(|| DiffError::Checkpoint("missing float-format line".into()))?;
    if fmt_tag != FLOAT_FORMAT {
        return Err(DiffError::Checkpoint(format!(
            "unsupported float format {fmt_tag:?}"
        )));
    }
    let n_entries: usize = field(&next("entries line")?, "entries")?;

    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let name = next("entry line")?
            .strip_prefix("entry ")
            .ok_or_else(|| DiffError::Checkpoint("missing entry line".into()))?
            .to_string();
        let layers_line = next("layers line")?;
        let mut it = layers_line.split_whitespace();
        if it.next() != Some("layers") {
            return Err(DiffError::Checkpoint("missing layers line".into()));
        }
        let n_layers: usize = parse_num(it.next(), "layer count")?;
        let mut layer_sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            layer_sizes.push(parse_num(it.next(), "layer size")?);
        }
        let hidden = activation(&next("hidden line")?, "hidden")?;
        let output = activation(&next("output line")?, "output")?;
        let spec = MlpSpec::new(layer_sizes, hidden, output)
            .map_err(|e| DiffError::Checkpoint(format!("invalid spec in checkpoint: {e}")))?;

        let n_meta: usize = field(&next("meta line")?, "meta")?;
        let mut meta = BTreeMap::new();
        for _ in 0..n_meta {
            let line = next("meta entry")?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| DiffError::Checkpoint(format!("bad meta entry {line:?}")))?;
            meta.insert(k.to_string(), f64::from_bits(parse_bits(v)?));
        }

        let n_params: usize = field(&next("params line")?, "params")?;
        let mut flat = Vec::with_capacity(n_params);
        while flat.len() < n_params {
            let line = next("parameter line")?;
            for tok in line.split_whitespace() {
                flat.push(f64::from_bits(parse_bits(tok)?));
            }
        }
        if flat.len() != n_params {
            return Err(DiffError::Checkpoint(format!(
                "expected {n_params} parameters, got {}",
                flat.len()
            )));
        }
        let params = ParamStore::from_flat(&spec, flat)
            .map_err(|e| DiffError::Checkpoint(format!("parameter count mismatch: {e}")))?;
        entries.push(CheckpointEntry {
            name,
            spec,
            params,
            meta,
        });
    }
    Ok(entries)
}

fn field(line: &str, key: &str) -> Result<usize, DiffError> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| DiffError::Checkpoint(format!("expected {key:?} line, got {line:?}")))?;
    rest.trim()
        .parse()
        .map_err(|_| DiffError::Checkpoint(format!("bad {key} count in {line:?}")))
}

fn parse_num(tok: Option<&str>, what: &str) -> Result<usize, DiffError> {
    tok.ok_or_else(|| DiffError::Checkpoint(format!("missing {what}")))?
        .parse()
        .map_err(|_| DiffError::Checkpoint(format!("bad {what}")))
}

fn parse_bits(tok: &str) -> Result<u64, DiffError> {
    u64::from_str_radix(tok, 16)
        .map_err(|_| DiffError::Checkpoint(format!("bad parameter token {tok:?}")))
}

fn activation(line: &str, key: &str) -> Result<Activation, DiffError> {
    let name = line
        .strip_prefix(key)
        .ok_or_else(|| DiffError::Checkpoint(format!("expected {key} line, got {line:?}")))?
        .trim();
    Activation::from_name(name)
        .ok_or_else(|| DiffError::Checkpoint(format!("unknown activation {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = MlpSpec::new(vec![7, 5, 3], Activation::Silu, Activation::Tanh).unwrap();
        let params = ParamStore::init(&spec, 1234).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("scale".to_string(), 0.1);
        meta.insert("weird".to_string(), -3.0e-300);
        let entries = vec![
            CheckpointEntry {
                name: "shaping".into(),
                spec: spec.clone(),
                params: params.clone(),
                meta,
            },
            CheckpointEntry {
                name: "other".into(),
                spec: MlpSpec::new(vec![2, 2], Activation::Relu, Activation::Identity).unwrap(),
                params: ParamStore::init(
                    &MlpSpec::new(vec![2, 2], Activation::Relu, Activation::Identity).unwrap(),
                    9,
                )
                .unwrap(),
                meta: BTreeMap::new(),
            },
        ];
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &entries).unwrap();
        let loaded = load_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), 2);
        for (a, b) in entries.iter().zip(&loaded) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.spec, b.spec);
            assert_eq!(a.meta, b.meta);
            let bits_a: Vec<u64> = a.params.flat().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.params.flat().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        // Saving the loaded copy reproduces the bytes exactly.
        let mut buf2 = Vec::new();
        save_checkpoint(&mut buf2, &loaded).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_checkpoint(&mut "not a checkpoint".as_bytes()).is_err());
        let truncated = format!("{MAGIC}\nfloat-format {FLOAT_FORMAT}\nentries 1\n");
        assert!(load_checkpoint(&mut truncated.as_bytes()).is_err());
    }
}
