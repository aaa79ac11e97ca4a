//! Versioned plain-text model files.
//!
//! ```text
//! tscrr-model v1
//! dim 2
//! degree 2
//! feature 0 1
//! feature 0 1
//! target 0 6
//! term 0 0 1
//! term 1 0 2
//! gamma 0
//! anomalies 7 13
//! ```
//!
//! `feature` and `target` lines are absent for unnormalized models. Each
//! `term` line lists the exponent vector followed by the coefficient. Reals
//! use the shortest decimal form that parses back to the same bits.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::poly::{enumerate_basis, MultiIndex, Normalization, SparseModel};

pub const MAGIC: &str = "tscrr-model v1";

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or very large magnitudes.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_model(model: &SparseModel, mut out: impl Write) -> Result<()> {
    model.validate()?;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dim {}", model.basis.dim())?;
    writeln!(out, "degree {}", model.basis.degree())?;
    if let Some(norm) = &model.normalization {
        for (lo, hi) in &norm.features {
            writeln!(out, "feature {} {}", format_real(*lo), format_real(*hi))?;
        }
        writeln!(out, "target {} {}", format_real(norm.target.0), format_real(norm.target.1))?;
    }
    for (&j, c) in model.selected.iter().zip(&model.coefficients) {
        let exps: Vec<String> = model.basis.get(j).exponents().iter().map(u32::to_string).collect();
        writeln!(out, "term {} {}", exps.join(" "), format_real(*c))?;
    }
    writeln!(out, "gamma {}", format_real(model.gamma))?;
    let anomalies: Vec<String> = model.anomalies.iter().map(usize::to_string).collect();
    writeln!(out, "anomalies{}{}", if anomalies.is_empty() { "" } else { " " }, anomalies.join(" "))?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ModelFormat(format!("line {line}: {msg}"))
}

fn parse<T: std::str::FromStr>(line: usize, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| bad(line, "missing value"))?;
    tok.parse().map_err(|_| bad(line, format!("cannot parse `{tok}`")))
}

pub fn read_model(input: impl BufRead) -> Result<SparseModel> {
    let mut lines = input.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    match lines.next().transpose()? {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(bad(1, format!("expected `{MAGIC}`"))),
    }
    let mut dim: Option<usize> = None;
    let mut degree: Option<u32> = None;
    let mut features = Vec::new();
    let mut target = None;
    let mut terms: Vec<(usize, Vec<u32>, f64)> = Vec::new();
    let mut gamma = None;
    let mut anomalies = None;
    for item in lines {
        let (no, line) = item?;
        let mut toks = line.split_whitespace();
        let Some(key) = toks.next() else { continue };
        match key {
            "dim" => dim = Some(parse(no, toks.next())?),
            "degree" => degree = Some(parse(no, toks.next())?),
            "feature" => features.push((parse(no, toks.next())?, parse(no, toks.next())?)),
            "target" => target = Some((parse(no, toks.next())?, parse(no, toks.next())?)),
            "term" => {
                let vals: Vec<&str> = toks.by_ref().collect();
                let (coef, exps) = vals.split_last().ok_or_else(|| bad(no, "empty term"))?;
                let exps = exps.iter().map(|t| parse(no, Some(t))).collect::<Result<Vec<u32>>>()?;
                terms.push((no, exps, parse(no, Some(coef))?));
            }
            "gamma" => gamma = Some(parse(no, toks.next())?),
            "anomalies" => {
                anomalies = Some(toks.by_ref().map(|t| parse(no, Some(t))).collect::<Result<Vec<usize>>>()?)
            }
            other => return Err(bad(no, format!("unknown key `{other}`"))),
        }
        if toks.next().is_some() {
            return Err(bad(no, "trailing tokens"));
        }
    }
    let missing = |what: &str| Error::ModelFormat(format!("missing `{what}`"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let basis = enumerate_basis(dim, degree.ok_or_else(|| missing("degree"))?)?;
    let normalization = match (features.is_empty(), target) {
        (true, None) => None,
        (false, Some(target)) if features.len() == dim => Some(Normalization { features, target }),
        _ => return Err(Error::ModelFormat("incomplete normalization".into())),
    };
    let mut pairs = Vec::with_capacity(terms.len());
    for (no, exps, c) in terms {
        if exps.len() != dim {
            return Err(bad(no, format!("expected {dim} exponents")));
        }
        let j = basis.position(&MultiIndex::new(exps)).ok_or_else(|| bad(no, "monomial outside the basis"))?;
        pairs.push((j, c));
    }
    let model = SparseModel {
        selected: pairs.iter().map(|p| p.0).collect(),
        coefficients: pairs.iter().map(|p| p.1).collect(),
        basis,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        anomalies: anomalies.ok_or_else(|| missing("anomalies"))?,
        normalization,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> SparseModel {
        SparseModel {
            basis: enumerate_basis(2, 2).unwrap(),
            selected: vec![0, 2, 3],
            coefficients: vec![1.0, 2.0, -1.0],
            gamma: 0.0,
            anomalies: vec![7, 13],
            normalization: Some(Normalization { features: vec![(0.0, 1.0); 2], target: (-2.0, 6.0) }),
        }
    }

    fn round_trip(m: &SparseModel) -> SparseModel {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    #[test]
    fn layout() {
        let mut buf = Vec::new();
        write_model(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "tscrr-model v1\ndim 2\ndegree 2\nfeature 0 1\nfeature 0 1\ntarget -2 6\n\
             term 0 0 1\nterm 1 0 2\nterm 0 2 -1\ngamma 0\nanomalies 7 13\n"
        );
        assert_eq!(round_trip(&sample()), sample());
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(5.551115123125783e-17), "5.551115123125783e-17");
        assert_eq!(format_real(-2e20), "-2e20");
    }

    #[test]
    fn rejects_malformed_files() {
        for text in [
            "tscrr-model v2\n",
            "tscrr-model v1\ndim 2\ndegree 2\nterm 3 0 1\ngamma 0\nanomalies\n",
            "tscrr-model v1\ndim 2\ndegree 2\nterm 0 0 x\ngamma 0\nanomalies\n",
            "tscrr-model v1\ndim 2\ndegree 2\nterm 0 0 1\nanomalies\n",
            "tscrr-model v1\ndim 2\ndegree 2\nfeature 0 1\nterm 0 0 1\ngamma 0\nanomalies\n",
            "tscrr-model v1\ndim 2\ndegree 2\nterm 0 0 1\ngamma 0 1\nanomalies\n",
        ] {
            assert!(matches!(read_model(text.as_bytes()), Err(Error::ModelFormat(_))), "{text}");
        }
    }

    proptest! {
        #[test]
        fn reals_round_trip_bit_exactly(
            coefs in proptest::collection::vec(-1e300..1e300f64, 3),
            gamma in 0.0..1e10f64,
            lo in -1e-300..1e-300f64,
        ) {
            let mut m = sample();
            m.coefficients = coefs;
            m.gamma = gamma;
            m.normalization.as_mut().unwrap().target = (lo, 1.0 / 3.0);
            let back = round_trip(&m);
            prop_assert!(back.coefficients.iter().zip(&m.coefficients).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.gamma.to_bits(), m.gamma.to_bits());
            prop_assert_eq!(back, m);
        }
    }
}
