//! Plain-text checkpoints.
//!
//! ```text
//! wfa-toynet-checkpoint 1
//! num_queries 32
//! neighbors_per_query 16
//! radius 3.5e-1
//! hidden_widths 64 128
//! num_classes 5
//! axis_order 123
//! use_wfa true
//! seed 7
//! sign_tol 1e-6
//! gap_tol 1e-3
//! rank_tol 1e-10
//! tensor first.weight 64 3
//! <64 lines of 3 values: the weight points w_k>
//! tensor first.bias 64
//! <64 values, one per line>
//! tensor hidden.0.weight 64 128
//! <64 lines of 128 values: row i maps input i to every output>
//! tensor hidden.0.bias 128
//! ...
//! tensor classifier.weight 128 5
//! tensor classifier.bias 5
//! end
//! ```
//!
//! Header keys appear in exactly this order. Numbers use the shortest
//! representation that parses back to the same double. Every `tensor` line
//! names the tensor and its shape (rows, then columns for matrices); one
//! hidden tensor pair follows per entry of `hidden_widths` after the first.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Dense, NetworkConfig, NetworkParams};
use crate::error::{Error, Result};
use crate::geometry::Seed;
use crate::linalg3::Vec3;
use crate::wfa::LayerWeights;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "wfa-toynet-checkpoint";

pub fn write_checkpoint(path: impl AsRef<Path>, cfg: &NetworkConfig, params: &NetworkParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint_to(&mut w, cfg, params)?;
    w.flush()?;
    Ok(())
}

fn write_rows<W: Write>(w: &mut W, values: &[f64], cols: usize) -> Result<()> {
    for row in values.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_checkpoint_to<W: Write>(w: &mut W, cfg: &NetworkConfig, params: &NetworkParams) -> Result<()> {
    params.check_shapes(cfg)?;
    writeln!(w, "{MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(w, "num_queries {}", cfg.num_queries)?;
    writeln!(w, "neighbors_per_query {}", cfg.neighbors_per_query)?;
    writeln!(w, "radius {:e}", cfg.radius)?;
    let widths: Vec<String> = cfg.hidden_widths.iter().map(|v| v.to_string()).collect();
    writeln!(w, "hidden_widths {}", widths.join(" "))?;
    writeln!(w, "num_classes {}", cfg.num_classes)?;
    writeln!(w, "axis_order {}", cfg.axis_order)?;
    writeln!(w, "use_wfa {}", cfg.use_wfa)?;
    writeln!(w, "seed {}", cfg.seed.0)?;
    writeln!(w, "sign_tol {:e}", cfg.sign_tol)?;
    writeln!(w, "gap_tol {:e}", cfg.gap_tol)?;
    writeln!(w, "rank_tol {:e}", cfg.rank_tol)?;

    let d = params.first.width();
    writeln!(w, "tensor first.weight {d} 3")?;
    let flat: Vec<f64> = params.first.columns().iter().flatten().copied().collect();
    write_rows(w, &flat, 3)?;
    writeln!(w, "tensor first.bias {d}")?;
    write_rows(w, params.first.bias(), 1)?;
    for (i, l) in params.hidden.iter().enumerate() {
        writeln!(w, "tensor hidden.{i}.weight {} {}", l.inputs, l.outputs)?;
        write_rows(w, &l.weight, l.outputs)?;
        writeln!(w, "tensor hidden.{i}.bias {}", l.outputs)?;
        write_rows(w, &l.bias, 1)?;
    }
    let c = &params.classifier;
    writeln!(w, "tensor classifier.weight {} {}", c.inputs, c.outputs)?;
    write_rows(w, &c.weight, c.outputs)?;
    writeln!(w, "tensor classifier.bias {}", c.outputs)?;
    write_rows(w, &c.bias, 1)?;
    writeln!(w, "end")?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkConfig, NetworkParams)> {
    read_checkpoint_from(BufReader::new(File::open(path)?))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn key(&mut self, key: &str) -> Result<String> {
        let l = self.next_line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(self.err(format!("expected {key:?}, found {l:?}"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.key(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for {key}: {v:?}")))
    }

    fn tensor(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let l = self.next_line()?;
        let words: Vec<&str> = l.split_whitespace().collect();
        let expected: Vec<String> = shape.iter().map(|s| s.to_string()).collect();
        if words.len() != 2 + shape.len() || words[0] != "tensor" || words[1] != name || words[2..] != expected[..] {
            return Err(self.err(format!("expected tensor {name} with shape {shape:?}, found {l:?}")));
        }
        let rows = shape[0];
        let cols = if shape.len() == 2 { shape[1] } else { 1 };
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self.next_line()?;
            let before = out.len();
            for f in l.split_whitespace() {
                out.push(f.parse::<f64>().map_err(|_| self.err(format!("not a number: {f:?}")))?);
            }
            if out.len() - before != cols {
                return Err(self.err(format!("expected {cols} values in {name}")));
            }
        }
        Ok(out)
    }
}

pub fn read_checkpoint_from<R: BufRead>(reader: R) -> Result<(NetworkConfig, NetworkParams)> {
    let mut r = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let head = r.next_line()?;
    let version = head
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| r.err("not a toynet checkpoint"))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let num_queries = r.parsed("num_queries")?;
    let neighbors_per_query = r.parsed("neighbors_per_query")?;
    let radius = r.parsed("radius")?;
    let widths = r.key("hidden_widths")?;
    let hidden_widths = widths
        .split_whitespace()
        .map(|w| w.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| r.err(format!("bad hidden_widths {widths:?}")))?;
    let num_classes = r.parsed("num_classes")?;
    let axis_order = r.parsed("axis_order")?;
    let use_wfa = r.parsed("use_wfa")?;
    let seed = Seed(r.parsed("seed")?);
    let cfg = NetworkConfig {
        num_queries,
        neighbors_per_query,
        radius,
        hidden_widths,
        num_classes,
        axis_order,
        use_wfa,
        seed,
        sign_tol: r.parsed("sign_tol")?,
        gap_tol: r.parsed("gap_tol")?,
        rank_tol: r.parsed("rank_tol")?,
    };
    cfg.validate()?;

    let d = cfg.hidden_widths[0];
    let flat = r.tensor("first.weight", &[d, 3])?;
    let cols: Vec<Vec3> = flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let first = LayerWeights::new(cols, r.tensor("first.bias", &[d])?)?;
    let mut hidden = Vec::new();
    for (i, pair) in cfg.hidden_widths.windows(2).enumerate() {
        let w = r.tensor(&format!("hidden.{i}.weight"), &[pair[0], pair[1]])?;
        let b = r.tensor(&format!("hidden.{i}.bias"), &[pair[1]])?;
        hidden.push(Dense::new(pair[0], pair[1], w, b)?);
    }
    let last = *cfg.hidden_widths.last().expect("validated");
    let w = r.tensor("classifier.weight", &[last, cfg.num_classes])?;
    let b = r.tensor("classifier.bias", &[cfg.num_classes])?;
    let classifier = Dense::new(last, cfg.num_classes, w, b)?;
    if r.next_line()?.trim() != "end" {
        return Err(r.err("expected end"));
    }
    Ok((
        cfg,
        NetworkParams {
            first,
            hidden,
            classifier,
        },
    ))
}
