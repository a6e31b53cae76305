use std::fmt;
use std::str::FromStr;

use crate::error::IcfError;

/// Textual description of a zoo member, independent of the dimension.
///
/// Grammar: `power-mean:<r>`, `elem-sym:<k>`, `interp:<specA>,<specB>,<sigma>`,
/// `dual:<spec>`.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSpec {
    PowerMean(f64),
    ElemSym(usize),
    Interpolate {
        left: Box<FunctionSpec>,
        right: Box<FunctionSpec>,
        sigma: f64,
    },
    Dual(Box<FunctionSpec>),
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::PowerMean(r) => write!(f, "power-mean:{r}"),
            FunctionSpec::ElemSym(k) => write!(f, "elem-sym:{k}"),
            FunctionSpec::Interpolate { left, right, sigma } => {
                write!(f, "interp:{left},{right},{sigma}")
            }
            FunctionSpec::Dual(inner) => write!(f, "dual:{inner}"),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = IcfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = |why: &str| IcfError::Config(format!("bad function spec `{s}`: {why}"));
        let (head, body) = s.split_once(':').ok_or_else(|| bad("missing `:`"))?;
        match head {
            "power-mean" => body
                .parse::<f64>()
                .map(FunctionSpec::PowerMean)
                .map_err(|_| bad("exponent is not a number")),
            "elem-sym" => body
                .parse::<usize>()
                .map(FunctionSpec::ElemSym)
                .map_err(|_| bad("order is not a positive integer")),
            "dual" => Ok(FunctionSpec::Dual(Box::new(body.parse()?))),
            "interp" => {
                let (pair, sigma) = body.rsplit_once(',').ok_or_else(|| bad("missing sigma"))?;
                let sigma = sigma
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad("sigma is not a number"))?;
                // nested specs may contain commas; take the first split where both sides parse
                for (idx, _) in pair.match_indices(',') {
                    let (a, b) = (&pair[..idx], &pair[idx + 1..]);
                    if let (Ok(left), Ok(right)) = (a.parse(), b.parse()) {
                        return Ok(FunctionSpec::Interpolate {
                            left: Box::new(left),
                            right: Box::new(right),
                            sigma,
                        });
                    }
                }
                Err(bad("cannot split into two function specs"))
            }
            _ => Err(bad("unknown function family")),
        }
    }
}
