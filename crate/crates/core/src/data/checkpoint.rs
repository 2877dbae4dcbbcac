//! Parameter checkpoints: a `pathmlp-ckpt v1` header, then for every
//! parameter a `name rows cols` line followed by its values row by row.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

const HEADER: &str = "pathmlp-ckpt v1";

pub fn checkpoint_text(store: &ParamStore) -> String {
    let mut s = format!("{HEADER}\n");
    for p in store.iter() {
        let (r, c) = p.value.dim();
        writeln!(s, "{} {r} {c}", p.name).unwrap();
        for row in p.value.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_text(store)).map_err(|e| Error::io(path, e))
}

/// Parses a checkpoint into `(name, value)` pairs in file order.
pub fn parse_checkpoint(text: &str, path: &Path) -> Result<Vec<(String, Array2<f64>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected '{HEADER}' header"))),
    }
    let mut out = Vec::new();
    while let Some((line, head)) = lines.next() {
        if head.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = head.split_whitespace().collect();
        let [name, r, c] = f[..] else {
            return Err(Error::parse(path, line, "expected 'name rows cols'"));
        };
        let dim = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| Error::parse(path, line, format!("bad dimension '{t}': {e}")))
        };
        let (rows, cols) = (dim(r)?, dim(c)?);
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (vline, row) = lines
                .next()
                .ok_or_else(|| Error::parse(path, line, format!("'{name}' is truncated")))?;
            let before = values.len();
            for t in row.split_whitespace() {
                values.push(
                    t.parse::<f64>()
                        .map_err(|e| Error::parse(path, vline, format!("bad value '{t}': {e}")))?,
                );
            }
            if values.len() - before != cols {
                return Err(Error::parse(path, vline, format!("expected {cols} values")));
            }
        }
        let value = Array2::from_shape_vec((rows, cols), values).expect("row lengths checked");
        out.push((name.to_string(), value));
    }
    Ok(out)
}

/// Overwrites the parameters of `store` with a checkpoint's values. Every
/// parameter must be present with a matching shape.
pub fn load_checkpoint_into(store: &mut ParamStore, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries = parse_checkpoint(&text, path)?;
    if entries.len() != store.len() {
        return Err(Error::parse(
            path,
            0,
            format!("checkpoint has {} parameters, model has {}", entries.len(), store.len()),
        ));
    }
    for (name, value) in entries {
        let id = store
            .find(&name)
            .ok_or_else(|| Error::parse(path, 0, format!("unknown parameter '{name}'")))?;
        let p = store.get_mut(id);
        if p.value.dim() != value.dim() {
            return Err(Error::parse(
                path,
                0,
                format!("'{name}' is {:?} in the checkpoint, {:?} in the model", value.dim(), p.value.dim()),
            ));
        }
        p.value = value;
    }
    Ok(())
}
