//! `inr-weights-v1`: a line-oriented text bundle.
//!
//! ```text
//! inr-weights-v1
//! activation sine
//! input_dim 3
//! output_dim 1
//! domain_lower -1.0000000000000000e0 ...
//! domain_upper 1.0000000000000000e0 ...
//! value_scale <f64>
//! value_offset <f64>
//! layers <count>
//! layer <rows> <cols>
//! w <cols values>        (one line per row)
//! b <rows values>
//! ...
//! end
//! ```
//!
//! Numbers are written with 17 significant digits so a save/load cycle
//! reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Activation, LinearLayer, MlpNetwork};

pub const WEIGHTS_SCHEMA: &str = "inr-weights-v1";

fn fmt_num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn fmt_list(out: &mut String, key: &str, vals: &[f64]) {
    out.push_str(key);
    for &v in vals {
        out.push(' ');
        fmt_num(out, v);
    }
    out.push('\n');
}

pub fn write_network(net: &MlpNetwork) -> String {
    let mut s = String::new();
    s.push_str(WEIGHTS_SCHEMA);
    s.push('\n');
    let _ = writeln!(s, "activation {}", net.activation());
    let _ = writeln!(s, "input_dim {}", net.input_dim());
    let _ = writeln!(s, "output_dim {}", net.output_dim());
    fmt_list(&mut s, "domain_lower", net.domain_lower());
    fmt_list(&mut s, "domain_upper", net.domain_upper());
    fmt_list(&mut s, "value_scale", &[net.value_scale()]);
    fmt_list(&mut s, "value_offset", &[net.value_offset()]);
    let _ = writeln!(s, "layers {}", net.layers().len());
    for layer in net.layers() {
        let _ = writeln!(s, "layer {} {}", layer.rows(), layer.cols());
        for r in 0..layer.rows() {
            fmt_list(&mut s, "w", layer.row(r));
        }
        fmt_list(&mut s, "b", layer.bias());
    }
    s.push_str("end\n");
    s
}

pub fn save_network(net: &MlpNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_network(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<MlpNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text)
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = &'a str> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = &'a str>> = Box::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        );
        Self { inner: it.peekable() }
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn expect(&mut self, key: &str, field: &str) -> Result<Vec<&'a str>> {
        let line = self
            .inner
            .next()
            .ok_or_else(|| Error::parse(field, "unexpected end of file"))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some(k) if k == key => Ok(toks.collect()),
            Some(k) => Err(Error::parse(
                field,
                format!("expected `{key}`, found `{k}`"),
            )),
            None => Err(Error::parse(field, "empty line")),
        }
    }
}

fn one<'a>(toks: &[&'a str], field: &str) -> Result<&'a str> {
    match toks {
        [t] => Ok(t),
        _ => Err(Error::parse(
            field,
            format!("expected exactly one value, found {}", toks.len()),
        )),
    }
}

fn parse_usize(tok: &str, field: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(field, format!("`{tok}` is not a non-negative integer")))
}

fn parse_f64s(toks: &[&str], count: usize, field: &str) -> Result<Vec<f64>> {
    if toks.len() != count {
        return Err(Error::parse(
            field,
            format!("expected {count} numbers, found {}", toks.len()),
        ));
    }
    toks.iter()
        .map(|t| {
            let v: f64 = t
                .parse()
                .map_err(|_| Error::parse(field, format!("`{t}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(field, format!("`{t}` is not finite")))
            }
        })
        .collect()
}

pub fn parse_network(text: &str) -> Result<MlpNetwork> {
    let mut lines = Lines::new(text);
    let header = lines
        .inner
        .next()
        .ok_or_else(|| Error::parse("schema", "empty file"))?;
    if header != WEIGHTS_SCHEMA {
        return Err(Error::parse(
            "schema",
            format!("expected `{WEIGHTS_SCHEMA}`, found `{header}`"),
        ));
    }
    let activation: Activation = one(&lines.expect("activation", "activation")?, "activation")?.parse()?;
    let input_dim = parse_usize(one(&lines.expect("input_dim", "input_dim")?, "input_dim")?, "input_dim")?;
    let output_dim = parse_usize(one(&lines.expect("output_dim", "output_dim")?, "output_dim")?, "output_dim")?;
    let domain_lower = parse_f64s(&lines.expect("domain_lower", "domain_lower")?, input_dim, "domain_lower")?;
    let domain_upper = parse_f64s(&lines.expect("domain_upper", "domain_upper")?, input_dim, "domain_upper")?;
    let value_scale = parse_f64s(&lines.expect("value_scale", "value_scale")?, 1, "value_scale")?[0];
    let value_offset = parse_f64s(&lines.expect("value_offset", "value_offset")?, 1, "value_offset")?[0];
    let count = parse_usize(one(&lines.expect("layers", "layers")?, "layers")?, "layers")?;
    let mut layers = Vec::with_capacity(count);
    for li in 0..count {
        let field = format!("layer[{li}]");
        let shape = lines.expect("layer", &field)?;
        if shape.len() != 2 {
            return Err(Error::parse(&field, "expected `layer <rows> <cols>`"));
        }
        let rows = parse_usize(shape[0], &format!("{field}.rows"))?;
        let cols = parse_usize(shape[1], &format!("{field}.cols"))?;
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let f = format!("{field}.weights[{r}]");
            weights.extend(parse_f64s(&lines.expect("w", &f)?, cols, &f)?);
        }
        let f = format!("{field}.bias");
        let bias = parse_f64s(&lines.expect("b", &f)?, rows, &f)?;
        layers.push(LinearLayer::new(rows, cols, weights, bias).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{field}: {m}")),
            other => other,
        })?);
    }
    lines.expect("end", "end")?;
    if let Some(extra) = lines.inner.next() {
        return Err(Error::parse("end", format!("trailing content `{extra}`")));
    }
    MlpNetwork::new(
        layers,
        activation,
        input_dim,
        output_dim,
        domain_lower,
        domain_upper,
        value_scale,
        value_offset,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MlpNetwork {
        let l0 = LinearLayer::new(2, 3, vec![0.1, -0.2, 1.0 / 3.0, 5e-300, -0.0, 7.0], vec![0.5, -0.25]).unwrap();
        let l1 = LinearLayer::new(1, 2, vec![std::f64::consts::PI, -1e10], vec![0.125]).unwrap();
        MlpNetwork::new(vec![l0, l1], Activation::Elu, 3, 1, vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0], 0.3, -7.0)
            .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let net = sample();
        let text = write_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(write_network(&back), text);
        assert!(back.layers()[0].weights()[4].is_sign_negative());
    }

    #[test]
    fn unknown_activation_is_a_parse_error() {
        let text = write_network(&sample()).replace("activation elu", "activation tanh");
        match parse_network(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "activation"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_chain_violation_is_a_validation_error() {
        let text = write_network(&sample())
            .replace("layer 1 2\n", "layer 1 3\n")
            .replace(
                "w 3.1415926535897931e0 -1.0000000000000000e10",
                "w 3.1415926535897931e0 -1.0000000000000000e10 0.0",
            );
        assert!(matches!(parse_network(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_number_names_the_field() {
        let text = write_network(&sample()).replace("b 5.0000000000000000e-1", "b zzz");
        match parse_network(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "layer[0].bias"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
