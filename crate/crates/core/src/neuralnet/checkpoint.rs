//! Plain-text network checkpoints.
//!
//! ```text
//! RSPNET v1
//! meta arch ce-net
//! meta n 32
//! l2 0.0001
//! bn 64 0.9 1e-5 on
//! layers 3
//! layer 64 192 relu
//! layer 192 128 relu
//! layer 128 64 linear
//! params 45504
//! <running_mean> <running_var> <gamma> <beta>, then W (row-major) and b per layer
//! end
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so a reload
//! reproduces every parameter bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, BatchNorm, Dense, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &str = "RSPNET v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: Mlp,
    /// Free-form `key value` pairs, e.g. the architecture tag.
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn new(net: Mlp) -> Self {
        Self { net, meta: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let net = &self.net;
        let bn = net.batch_norm();
        writeln!(w, "{MAGIC}")?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}")?;
        }
        writeln!(w, "l2 {:?}", net.l2_coeff())?;
        writeln!(w, "bn {} {:?} {:?} {}", bn.dim(), bn.momentum, bn.epsilon, if bn.enabled { "on" } else { "off" })?;
        writeln!(w, "layers {}", net.layers().len())?;
        for l in net.layers() {
            writeln!(w, "layer {} {} {}", l.weights.nrows(), l.weights.ncols(), l.activation.tag())?;
        }
        let count = 4 * bn.dim() + net.layers().iter().map(|l| l.weights.len() + l.bias.len()).sum::<usize>();
        writeln!(w, "params {count}")?;
        for arr in [&bn.running_mean, &bn.running_var, &bn.gamma, &bn.beta] {
            for v in arr.iter() {
                writeln!(w, "{v:?}")?;
            }
        }
        for l in net.layers() {
            // ndarray iterates in logical row-major order.
            for v in l.weights.iter().chain(l.bias.iter()) {
                writeln!(w, "{v:?}")?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = Lines::new(BufReader::new(r));
        let magic = lines.next_line()?;
        if magic != MAGIC {
            return Err(lines.err(format!("expected `{MAGIC}`, found `{magic}`")));
        }

        let mut meta = Vec::new();
        let mut line = lines.next_line()?;
        while let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest
                .split_once(' ')
                .ok_or_else(|| lines.err("meta line needs a key and a value".into()))?;
            meta.push((k.to_string(), v.to_string()));
            line = lines.next_line()?;
        }

        let l2: f64 = lines.keyed(&line, "l2", 1)?[0].parse().map_err(|_| lines.err("bad l2".into()))?;
        let line = lines.next_line()?;
        let bn_fields = lines.keyed(&line, "bn", 4)?;
        let bn_dim: usize = lines.parse(bn_fields[0])?;
        let momentum: f64 = lines.parse(bn_fields[1])?;
        let epsilon: f64 = lines.parse(bn_fields[2])?;
        let enabled = match bn_fields[3] {
            "on" => true,
            "off" => false,
            other => return Err(lines.err(format!("bn flag must be on/off, found `{other}`"))),
        };
        let line = lines.next_line()?;
        let n_layers: usize = lines.parse(lines.keyed(&line, "layers", 1)?[0])?;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let line = lines.next_line()?;
            let f = lines.keyed(&line, "layer", 3)?;
            let act = Activation::from_tag(f[2]).ok_or_else(|| lines.err(format!("unknown activation `{}`", f[2])))?;
            shapes.push((lines.parse::<usize>(f[0])?, lines.parse::<usize>(f[1])?, act));
        }
        let line = lines.next_line()?;
        let count: usize = lines.parse(lines.keyed(&line, "params", 1)?[0])?;
        let expected = 4 * bn_dim + shapes.iter().map(|(i, o, _)| i * o + o).sum::<usize>();
        if count != expected {
            return Err(lines.err(format!("parameter count {count} does not match architecture ({expected})")));
        }

        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            (0..n).map(|_| {
                let l = lines.next_line()?;
                lines.parse::<f64>(&l)
            }).collect()
        };
        let running_mean = Array1::from(read_vec(bn_dim)?);
        let running_var = Array1::from(read_vec(bn_dim)?);
        let gamma = Array1::from(read_vec(bn_dim)?);
        let beta = Array1::from(read_vec(bn_dim)?);
        let mut layers = Vec::with_capacity(n_layers);
        for &(i, o, activation) in &shapes {
            let weights = Array2::from_shape_vec((i, o), read_vec(i * o)?).expect("sized above");
            let bias = Array1::from(read_vec(o)?);
            layers.push(Dense { weights, bias, activation });
        }
        let tail = lines.next_line()?;
        if tail != "end" {
            return Err(lines.err(format!("expected `end`, found `{tail}`")));
        }
        let bn = BatchNorm {
            gamma,
            beta,
            running_mean,
            running_var,
            momentum,
            epsilon,
            enabled,
        };
        Ok(Self {
            net: Mlp::from_parts(bn, layers, l2)?,
            meta,
        })
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line_no: 0 }
    }

    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(l) => Ok(l?.trim_end().to_string()),
            None => Err(self.err("unexpected end of file".into())),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Checkpoint { line: self.line_no, msg }
    }

    fn keyed<'a>(&self, line: &'a str, key: &str, n: usize) -> Result<Vec<&'a str>> {
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}` line, found `{line}`")));
        }
        let rest: Vec<&str> = parts.collect();
        if rest.len() != n {
            return Err(self.err(format!("`{key}` expects {n} fields, found {}", rest.len())));
        }
        Ok(rest)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.trim().parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}
