//! JSON system definitions: the blocks `P`, `F` and optionally `W`, each a
//! transfer function or an explicit realization, plus optional defaults.
//!
//! ```json
//! {
//!   "P": { "tf": { "num": [1], "den": [1, 0] } },
//!   "F": { "tf": { "num": [1], "den": [0.1, 1] } },
//!   "h": 1.5,
//!   "delta": 0
//! }
//! ```
//!
//! `W` defaults to `F`. Explicit realizations use row-major nested arrays:
//! `{ "ss": { "a": [[-1]], "b": [[1]], "c": [[1]], "d": [[0]] } }`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certify::SearchSpec;
use crate::error::{Error, Result};
use crate::lti::StateSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Block {
    /// Coefficients in descending powers of `s`.
    Tf { num: Vec<f64>, den: Vec<f64> },
    Ss {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
}

fn matrix(field: &str, rows: &[Vec<f64>], shape: Option<(usize, usize)>) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(shape.map_or(0, |s| s.1), |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse {
            location: field.into(),
            message: "rows have different lengths".into(),
        });
    }
    if nr == 0 {
        let (r, c) = shape.unwrap_or((0, 0));
        return Ok(DMatrix::zeros(r, c));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl Block {
    /// Realization of the block; `field` labels diagnostics.
    pub fn to_state_space(&self, field: &str) -> Result<StateSpace> {
        let wrap = |e: Error| Error::Parse { location: field.into(), message: e.to_string() };
        match self {
            Block::Tf { num, den } => StateSpace::from_tf(num, den).map_err(wrap),
            Block::Ss { a, b, c, d } => {
                let dm = matrix(&format!("{field}.ss.d"), d, None)?;
                let am = matrix(&format!("{field}.ss.a"), a, None)?;
                let n = am.nrows();
                let bm = matrix(&format!("{field}.ss.b"), b, Some((n, dm.ncols())))?;
                let cm = matrix(&format!("{field}.ss.c"), c, Some((dm.nrows(), n)))?;
                StateSpace::new(am, bm, cm, dm).map_err(wrap)
            }
        }
    }

    pub fn from_state_space(s: &StateSpace) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
        };
        Block::Ss { a: rows(&s.a), b: rows(&s.b), c: rows(&s.c), d: rows(&s.d) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(rename = "P")]
    pub p: Block,
    #[serde(rename = "F")]
    pub f: Block,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpec>,
}

/// The three realized blocks of a system file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopBlocks {
    pub p: StateSpace,
    pub f: StateSpace,
    pub w: StateSpace,
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let sys: SystemFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        sys.blocks()?;
        if let Some(s) = &sys.search {
            s.validate().map_err(|e| Error::Parse { location: "search".into(), message: e.to_string() })?;
        }
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system files serialize");
        s.push('\n');
        s
    }

    pub fn blocks(&self) -> Result<LoopBlocks> {
        let p = self.p.to_state_space("P")?;
        let f = self.f.to_state_space("F")?;
        let w = match &self.w {
            Some(b) => b.to_state_space("W")?,
            None => f.clone(),
        };
        Ok(LoopBlocks { p, f, w })
    }

    pub fn search_spec(&self) -> SearchSpec {
        self.search.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::freq_response;

    const EX1: &str = r#"{
        "P": { "tf": { "num": [1], "den": [1, 0] } },
        "F": { "tf": { "num": [1], "den": [0.1, 1] } },
        "h": 1.5
    }"#;

    #[test]
    fn weight_defaults_to_filter() {
        let s = SystemFile::parse(EX1).unwrap();
        let b = s.blocks().unwrap();
        assert_eq!(b.w, b.f);
        assert_eq!(s.h, Some(1.5));
        assert_eq!(s.delta, None);
    }

    #[test]
    fn round_trip_preserves_responses() {
        let mut s = SystemFile::parse(EX1).unwrap();
        let lag = StateSpace::siso(&[-3.0, 1.0, 0.0, -0.5], &[0.0, 1.0], &[0.7, 0.1], 0.0).unwrap();
        s.w = Some(Block::from_state_space(&lag));
        s.search = Some(SearchSpec::default());
        let again = SystemFile::parse(&s.to_json()).unwrap();
        assert_eq!(again, s);
        let (a, b) = (s.blocks().unwrap(), again.blocks().unwrap());
        for k in 0..100 {
            let w = 10f64.powf(-3.0 + 6.0 * k as f64 / 99.0);
            for (x, y) in [(&a.p, &b.p), (&a.f, &b.f), (&a.w, &b.w)] {
                let (gx, gy) = (freq_response(x, w).unwrap(), freq_response(y, w).unwrap());
                assert!((gx[(0, 0)] - gy[(0, 0)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn diagnostics_name_the_location() {
        let err = SystemFile::parse("{\n  \"P\": { \"tf\": { \"num\": [1], \"den\": [1, 0] } },\n  \"F\": 3\n}").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("line 3"), "{location}"),
            other => panic!("{other:?}"),
        }
        let improper = r#"{ "P": { "tf": { "num": [1, 0, 0], "den": [1, 1] } }, "F": { "tf": { "num": [1], "den": [1, 1] } } }"#;
        match SystemFile::parse(improper).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "P"),
            other => panic!("{other:?}"),
        }
        let ragged = r#"{ "P": { "ss": { "a": [[1, 2], [3]], "b": [[1], [1]], "c": [[1, 0]], "d": [[0]] } }, "F": { "tf": { "num": [1], "den": [1, 1] } } }"#;
        match SystemFile::parse(ragged).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "P.ss.a"),
            other => panic!("{other:?}"),
        }
        assert!(SystemFile::parse(r#"{ "P": { "tf": { "num": [1], "den": [1] } }, "F": { "tf": { "num": [1], "den": [1, 1] } }, "extra": 1 }"#).is_err());
    }

    #[test]
    fn static_gain_block() {
        let s = r#"{ "P": { "ss": { "a": [], "b": [], "c": [], "d": [[2]] } }, "F": { "tf": { "num": [1], "den": [1, 1] } } }"#;
        let b = SystemFile::parse(s).unwrap().blocks().unwrap();
        assert_eq!(b.p.n_states(), 0);
        assert_eq!(b.p.d[(0, 0)], 2.0);
    }
}
