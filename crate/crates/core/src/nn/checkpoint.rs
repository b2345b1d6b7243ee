//! Plain-text model checkpoints.
//!
//! ```text
//! WFRNN-CHECKPOINT 1
//! {"kind":"LSTM", ...}          model spec as one JSON line
//! tensor input.weight 81 81     name and shape
//! 0.0123 -0.4 ...               values, row-major, one line
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! saved model reloads bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{Model, ModelSpec, Parameters};
use crate::error::{Error, Result};

const MAGIC: &str = "WFRNN-CHECKPOINT 1";

pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{MAGIC}").unwrap();
    writeln!(text, "{}", serde_json::to_string(&model.spec)?).unwrap();
    for (name, tensor) in model.net.tensor_names().iter().zip(model.net.tensors()) {
        let shape: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        writeln!(text, "tensor {name} {}", shape.join(" ")).unwrap();
        let values: Vec<String> = tensor.iter().map(|v| v.to_string()).collect();
        writeln!(text, "{}", values.join(" ")).unwrap();
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("checkpoint", e))
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Model> {
    let bad = |m: String| Error::format("checkpoint", m);
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io("checkpoint", e)),
            None => Err(bad(format!("truncated before {what}"))),
        }
    };
    if next("header")?.trim() != MAGIC {
        return Err(bad("missing checkpoint header".into()));
    }
    let spec: ModelSpec = serde_json::from_str(&next("spec")?)?;
    let mut model = Model::new(spec)?;
    let names = model.net.tensor_names();
    for (name, mut tensor) in names.iter().zip(model.net.tensors_mut()) {
        let header = next(name)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") || parts.next() != Some(name.as_str()) {
            return Err(bad(format!("expected tensor {name}, found {header:?}")));
        }
        let shape: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| bad(format!("bad dimension {p:?}"))))
            .collect::<Result<_>>()?;
        if shape != tensor.shape() {
            return Err(Error::shape(format!("{name} {:?}", tensor.shape()), format!("{shape:?}")));
        }
        let values = next(name)?;
        let mut count = 0;
        for (slot, token) in tensor.iter_mut().zip(values.split_whitespace()) {
            *slot = token.parse().map_err(|_| bad(format!("bad value {token:?} in {name}")))?;
            count += 1;
        }
        if count != tensor.len() || values.split_whitespace().count() != tensor.len() {
            return Err(bad(format!("{name}: expected {} values", tensor.len())));
        }
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load(path: &Path) -> Result<Model> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

/// `epoch,loss` rows.
pub fn write_loss_history<W: Write>(history: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (i, loss) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("loss history", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelKind;
    use crate::sequence::Task;

    #[test]
    fn round_trip_is_exact() {
        for kind in ModelKind::ALL {
            let mut spec = ModelSpec::for_task(kind, Task::Multiclass, 3, 17);
            spec.hidden = [3, 4];
            let model = Model::new(spec).unwrap();
            let mut buf = Vec::new();
            write_checkpoint(&model, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint("hello\n".as_bytes()).is_err());
        let mut spec = ModelSpec::for_task(ModelKind::Lr, Task::Binary, 2, 0);
        spec.hidden = [2, 2];
        let mut buf = Vec::new();
        write_checkpoint(&Model::new(spec).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(truncated.as_bytes()).is_err());
    }
}
