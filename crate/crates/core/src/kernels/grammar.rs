//! Inline kernel grammar.
//!
//! ```text
//! kernel  := leaf | sum | stab
//! leaf    := name [":" key "=" value ("," key "=" value)*]
//! sum     := "sum[" member (";" member)* "]"
//! member  := [weight "*"] kernel
//! stab    := "stab[" kernel ";" kernel ";" epsilon "]"
//! ```
//!
//! Leaf names: `gaussian` (sigma), `rq` (alpha), `cramer` (z0, components
//! separated by `|`), `elastic` (exponent), `rgauss` (sigma), `rrq` (alpha).

use std::fmt;

use super::{KernelSpec, Weighted};
use crate::error::{Error, Result};

pub fn parse_kernel(input: &str) -> Result<KernelSpec> {
    let mut p = Parser { src: input, pos: 0 };
    let k = p.kernel()?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.err("trailing input"));
    }
    k.validate().map_err(|e| Error::Parse {
        pos: 0,
        msg: e.to_string(),
    })?;
    Ok(k)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected a name"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let text = &rest[..len];
        let v = text
            .parse::<f64>()
            .map_err(|_| self.err(format!("expected a number, found `{text}`")))?;
        self.pos += len;
        Ok(v)
    }

    fn kernel(&mut self) -> Result<KernelSpec> {
        let start = self.pos;
        let name = self.ident()?;
        match name {
            "sum" => {
                self.expect("[")?;
                let mut terms = Vec::new();
                loop {
                    terms.push(self.member()?);
                    if self.eat("]") {
                        break;
                    }
                    self.expect(";")?;
                }
                Ok(KernelSpec::Sum { terms })
            }
            "stab" => {
                self.expect("[")?;
                let base = self.kernel()?;
                self.expect(";")?;
                let stabilizer = self.kernel()?;
                self.expect(";")?;
                let epsilon = self.number()?;
                self.expect("]")?;
                Ok(KernelSpec::stabilized(base, stabilizer, epsilon))
            }
            _ => {
                let params = if self.eat(":") { self.params()? } else { Vec::new() };
                self.leaf(name, params).map_err(|msg| Error::Parse { pos: start, msg })
            }
        }
    }

    fn member(&mut self) -> Result<Weighted> {
        self.skip_ws();
        let starts_numeric = self
            .rest()
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '.');
        let weight = if starts_numeric {
            let w = self.number()?;
            self.expect("*")?;
            w
        } else {
            1.0
        };
        Ok(Weighted {
            weight,
            kernel: self.kernel()?,
        })
    }

    fn params(&mut self) -> Result<Vec<(&'a str, String)>> {
        let mut out = Vec::new();
        loop {
            let key = self.ident()?;
            self.expect("=")?;
            self.skip_ws();
            let rest = self.rest();
            let len = rest.find([',', ';', ']']).unwrap_or(rest.len());
            out.push((key, rest[..len].trim().to_string()));
            self.pos += len;
            if !self.eat(",") {
                break;
            }
        }
        Ok(out)
    }

    fn leaf(&self, name: &str, params: Vec<(&str, String)>) -> std::result::Result<KernelSpec, String> {
        let allowed: &[&str] = match name {
            "gaussian" | "rgauss" => &["sigma"],
            "rq" | "rrq" => &["alpha"],
            "cramer" => &["z0"],
            "elastic" => &["exponent"],
            other => return Err(format!("unknown kernel `{other}`")),
        };
        let value = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| v.clone());
        for (k, _) in &params {
            if !allowed.contains(k) {
                return Err(format!("`{name}` has no parameter `{k}`"));
            }
        }
        let num = |key: &str, v: Option<String>| -> std::result::Result<f64, String> {
            let v = v.ok_or_else(|| format!("`{name}` requires `{key}`"))?;
            v.parse::<f64>().map_err(|_| format!("`{key}` is not a number: `{v}`"))
        };
        Ok(match name {
            "gaussian" => KernelSpec::gaussian(num("sigma", value("sigma"))?),
            "rgauss" => KernelSpec::rescaled_gaussian(num("sigma", value("sigma"))?),
            "rq" => KernelSpec::rational_quadratic(num("alpha", value("alpha"))?),
            "rrq" => KernelSpec::rescaled_rq(num("alpha", value("alpha"))?),
            "cramer" => {
                let z0 = match value("z0") {
                    None => None,
                    Some(s) => Some(
                        s.split('|')
                            .map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad z0 component `{c}`")))
                            .collect::<std::result::Result<Vec<_>, _>>()?,
                    ),
                };
                KernelSpec::Cramer { z0 }
            }
            "elastic" => match value("exponent") {
                None => KernelSpec::elastic(),
                Some(s) => KernelSpec::elastic_with_exponent(num("exponent", Some(s))?),
            },
            _ => unreachable!(),
        })
    }
}

pub(super) fn write_kernel(k: &KernelSpec, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match k {
        KernelSpec::GaussianRbf { sigma } => write!(f, "gaussian:sigma={sigma}"),
        KernelSpec::RescaledGaussian { sigma } => write!(f, "rgauss:sigma={sigma}"),
        KernelSpec::RationalQuadratic { alpha } => write!(f, "rq:alpha={alpha}"),
        KernelSpec::RescaledRq { alpha } => write!(f, "rrq:alpha={alpha}"),
        KernelSpec::Cramer { z0: None } => write!(f, "cramer"),
        KernelSpec::Cramer { z0: Some(z) } => {
            let parts: Vec<String> = z.iter().map(|c| c.to_string()).collect();
            write!(f, "cramer:z0={}", parts.join("|"))
        }
        KernelSpec::Elastic { exponent: None } => write!(f, "elastic"),
        KernelSpec::Elastic { exponent: Some(p) } => write!(f, "elastic:exponent={p}"),
        KernelSpec::Sum { terms } => {
            write!(f, "sum[")?;
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    write!(f, ";")?;
                }
                if t.weight != 1.0 {
                    write!(f, "{}*", t.weight)?;
                }
                write_kernel(&t.kernel, f)?;
            }
            write!(f, "]")
        }
        KernelSpec::Stabilized {
            base,
            stabilizer,
            epsilon,
        } => {
            write!(f, "stab[")?;
            write_kernel(base, f)?;
            write!(f, ";")?;
            write_kernel(stabilizer, f)?;
            write!(f, ";{epsilon}]")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_leaves_and_combinators() {
        assert_eq!(parse_kernel("gaussian:sigma=2").unwrap(), KernelSpec::gaussian(2.0));
        assert_eq!(parse_kernel("rq:alpha=0.5").unwrap(), KernelSpec::rational_quadratic(0.5));
        assert_eq!(parse_kernel("cramer").unwrap(), KernelSpec::cramer());
        assert_eq!(
            parse_kernel("cramer:z0=1|-2").unwrap(),
            KernelSpec::Cramer {
                z0: Some(vec![1.0, -2.0])
            }
        );
        assert_eq!(parse_kernel("elastic").unwrap(), KernelSpec::elastic());
        let k = parse_kernel("stab[sum[rgauss:sigma=4; rgauss:sigma=8];sum[rgauss:sigma=1;2*rgauss:sigma=2];1.5]")
            .unwrap();
        assert_eq!(
            k,
            KernelSpec::stabilized(
                KernelSpec::sum([KernelSpec::rescaled_gaussian(4.0), KernelSpec::rescaled_gaussian(8.0)]),
                KernelSpec::weighted_sum([
                    (1.0, KernelSpec::rescaled_gaussian(1.0)),
                    (2.0, KernelSpec::rescaled_gaussian(2.0))
                ]),
                1.5
            )
        );
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(parse_kernel("gauss:sigma=1"), Err(Error::Parse { .. })));
        assert!(parse_kernel("gaussian").is_err());
        assert!(parse_kernel("gaussian:sigma=abc").is_err());
        assert!(parse_kernel("gaussian:alpha=1").is_err());
        assert!(parse_kernel("gaussian:sigma=-1").is_err());
        assert!(parse_kernel("sum[gaussian:sigma=1").is_err());
        assert!(parse_kernel("stab[gaussian:sigma=1;gaussian:sigma=2]").is_err());
        assert!(parse_kernel("gaussian:sigma=1 extra").is_err());
    }

    fn leaf() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            (0.1f64..10.0).prop_map(KernelSpec::gaussian),
            (0.1f64..10.0).prop_map(KernelSpec::rescaled_gaussian),
            (0.1f64..5.0).prop_map(KernelSpec::rational_quadratic),
            (0.1f64..5.0).prop_map(KernelSpec::rescaled_rq),
            Just(KernelSpec::cramer()),
            Just(KernelSpec::elastic()),
            (0.0f64..4.0).prop_map(KernelSpec::elastic_with_exponent),
        ]
    }

    fn kernel() -> impl Strategy<Value = KernelSpec> {
        leaf().prop_recursive(3, 12, 4, |inner| {
            prop_oneof![
                prop::collection::vec((0.1f64..3.0, inner.clone()), 1..4)
                    .prop_map(KernelSpec::weighted_sum),
                (inner.clone(), inner, 0.0f64..3.0)
                    .prop_map(|(b, s, e)| KernelSpec::stabilized(b, s, e)),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(k in kernel()) {
            let text = k.to_string();
            prop_assert_eq!(parse_kernel(&text).unwrap(), k);
        }
    }
}
