//! Surrogate checkpoint: a text manifest plus a flat little-endian `f64` payload.
//!
//! ```text
//! surrogate-checkpoint 1
//! payload surrogate.bin
//! hidden_dim 8
//! head_hidden_dim 8
//! num_tasks 4
//! num_nodes 2
//! operations identity,zero,ffn,rnn,attention
//! activation tanh
//! block input_node 8 1 0
//! block op.identity 8 8 64
//! ...
//! ```
//!
//! Each `block` line is `name rows cols byte_offset`.

use std::fs;
use std::path::Path;

use super::{DagActivation, SurrogateConfig, SurrogateParams};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "surrogate.manifest";
pub const PAYLOAD_FILE: &str = "surrogate.bin";

pub fn save_checkpoint(params: &SurrogateParams, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = &params.config;
    let ops: Vec<&str> = cfg.operations.iter().map(|o| o.label()).collect();
    let mut manifest = format!(
        "surrogate-checkpoint 1\npayload {PAYLOAD_FILE}\nhidden_dim {}\nhead_hidden_dim {}\nnum_tasks {}\nnum_nodes {}\noperations {}\nactivation {}\n",
        cfg.hidden_dim,
        cfg.head_hidden_dim,
        cfg.num_tasks,
        cfg.num_nodes,
        ops.join(","),
        match cfg.activation {
            DagActivation::Tanh => "tanh",
            DagActivation::Linear => "linear",
        }
    );
    let mut payload = Vec::with_capacity(params.num_parameters() * 8);
    for (spec, block) in SurrogateParams::layout(cfg).iter().zip(params.blocks()) {
        manifest.push_str(&format!(
            "block {} {} {} {}\n",
            spec.name,
            spec.rows,
            spec.cols,
            payload.len()
        ));
        for v in block {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(dir.join(PAYLOAD_FILE), payload)?;
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

/// Loads a checkpoint and checks it against `expected` when given.
pub fn load_checkpoint(dir: &Path, expected: Option<&SurrogateConfig>) -> Result<SurrogateParams> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let bad = |reason: String| Error::checkpoint(&manifest_path, reason);
    let text = fs::read_to_string(&manifest_path).map_err(|e| bad(format!("cannot read manifest: {e}")))?;

    let mut lines = text.lines();
    if lines.next() != Some("surrogate-checkpoint 1") {
        return Err(bad("unrecognized manifest header".into()));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
    };
    let payload_name = field("payload")?;
    let number = |s: String| s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")));
    let hidden_dim = number(field("hidden_dim")?)?;
    let head_hidden_dim = number(field("head_hidden_dim")?)?;
    let num_tasks = number(field("num_tasks")?)?;
    let num_nodes = number(field("num_nodes")?)?;
    let operations = field("operations")?
        .split(',')
        .map(|s| s.parse().map_err(|e: String| bad(e)))
        .collect::<Result<Vec<_>>>()?;
    let activation = match field("activation")?.as_str() {
        "tanh" => DagActivation::Tanh,
        "linear" => DagActivation::Linear,
        other => return Err(bad(format!("unknown activation `{other}`"))),
    };
    let config = SurrogateConfig {
        hidden_dim,
        head_hidden_dim,
        num_tasks,
        num_nodes,
        operations,
        activation,
    };
    config.validate()?;
    if let Some(exp) = expected {
        if exp != &config {
            return Err(bad(format!(
                "checkpoint configuration {config:?} does not match expected {exp:?}"
            )));
        }
    }

    let payload_path = dir.join(&payload_name);
    let payload =
        fs::read(&payload_path).map_err(|e| Error::checkpoint(&payload_path, format!("cannot read payload: {e}")))?;
    let mut params = SurrogateParams::zeros(&config);
    let layout = SurrogateParams::layout(&config);
    let block_lines: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if block_lines.len() != layout.len() {
        return Err(bad(format!(
            "expected {} blocks, manifest lists {}",
            layout.len(),
            block_lines.len()
        )));
    }
    for ((spec, line), block) in layout.iter().zip(block_lines).zip(params.blocks_mut()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [kw, name, rows, cols, offset] = parts.as_slice() else {
            return Err(bad(format!("malformed block line `{line}`")));
        };
        let rows: usize = rows.parse().map_err(|_| bad(format!("bad rows in `{line}`")))?;
        let cols: usize = cols.parse().map_err(|_| bad(format!("bad cols in `{line}`")))?;
        let offset: usize = offset.parse().map_err(|_| bad(format!("bad offset in `{line}`")))?;
        if *kw != "block" || *name != spec.name || rows != spec.rows || cols != spec.cols {
            return Err(bad(format!(
                "block `{line}` does not match expected {} {}x{}",
                spec.name, spec.rows, spec.cols
            )));
        }
        let end = offset + spec.len() * 8;
        if end > payload.len() {
            return Err(bad(format!("block {} runs past the end of the payload", spec.name)));
        }
        for (v, bytes) in block.iter_mut().zip(payload[offset..end].chunks_exact(8)) {
            *v = f64::from_le_bytes(bytes.try_into().unwrap());
        }
    }
    if let Some(block) = params.non_finite_block() {
        return Err(bad(format!("block {block} holds non-finite values")));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::space::SearchSpaceConfig;
    use crate::surrogate::init_params;

    #[test]
    fn round_trip_and_shape_validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SurrogateConfig::for_space(&SearchSpaceConfig::new(3, 2), 5);
        let params = init_params(&cfg, &mut rng_from_seed(4));
        save_checkpoint(&params, dir.path()).unwrap();
        let back = load_checkpoint(dir.path(), Some(&cfg)).unwrap();
        assert_eq!(back, params);

        let other = SurrogateConfig::for_space(&SearchSpaceConfig::new(4, 2), 5);
        assert!(load_checkpoint(dir.path(), Some(&other)).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SurrogateConfig::for_space(&SearchSpaceConfig::new(3, 1), 4);
        save_checkpoint(&init_params(&cfg, &mut rng_from_seed(1)), dir.path()).unwrap();
        let p = dir.path().join(PAYLOAD_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(dir.path(), None).is_err());
    }
}
