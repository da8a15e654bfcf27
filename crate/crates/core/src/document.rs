//! JSON surface-definition documents.
//!
//! ```json
//! {"x": ["u", "v", "(u^2+v^2)/2", "u*v"],
//!  "xi": ["0", "0", "0", "1"],
//!  "domain": {"u": [-1, 1], "v": [-1, 1]},
//!  "jet_order": 10,
//!  "directors": {"xi": [...], "delta": [...]}}
//! ```

use serde::{Deserialize, Serialize};

use crate::congruence::PlaneCongruence;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::surface::{Domain, MetricNormalization, SurfacePatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectorsDocument {
    pub xi: [String; 4],
    pub delta: [String; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceDocument {
    pub x: [String; 4],
    pub xi: [String; 4],
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jet_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directors: Option<DirectorsDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_normalization: Option<MetricNormalization>,
}

fn parse_four(src: &[String; 4]) -> Result<[Expr; 4]> {
    let [a, b, c, d] = src;
    Ok([parse(a)?, parse(b)?, parse(c)?, parse(d)?])
}

impl SurfaceDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SurfaceDocument = serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        let d = doc.domain;
        if !(d.u[0] < d.u[1] && d.v[0] < d.v[1]) || d.u.iter().chain(&d.v).any(|x| !x.is_finite()) {
            return Err(Error::Document("domain bounds must be finite with lo < hi".into()));
        }
        if let Some(k) = doc.jet_order {
            if k < 5 {
                return Err(Error::InsufficientOrder { needed: 5, available: k });
            }
        }
        Ok(doc)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn patch(&self) -> Result<SurfacePatch> {
        let mut p = SurfacePatch::new(parse_four(&self.x)?, parse_four(&self.xi)?, self.domain);
        if let Some(k) = self.jet_order {
            p = p.with_jet_order(k);
        }
        if let Some(n) = self.metric_normalization {
            p = p.with_normalization(n);
        }
        Ok(p)
    }

    /// The congruence with the document's directors, or the affine normal
    /// plane congruence when none are given.
    pub fn congruence(&self) -> Result<PlaneCongruence> {
        let patch = self.patch()?;
        Ok(match &self.directors {
            Some(d) => PlaneCongruence::explicit(patch, parse_four(&d.xi)?, parse_four(&d.delta)?),
            None => PlaneCongruence::affine(patch),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S0: &str = r#"{"x": ["u", "v", "(u^2+v^2)/2", "u*v"], "xi": ["0","0","0","1"],
        "domain": {"u": [-1, 1], "v": [-1, 1]}}"#;

    #[test]
    fn reads_minimal_document() {
        let doc = SurfaceDocument::from_json(S0).unwrap();
        let p = doc.patch().unwrap();
        assert_eq!(p.domain, Domain::square(1.0));
        assert!(doc.directors.is_none());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_domains() {
        let bad = S0.replace("\"xi\"", "\"eta\"");
        assert!(matches!(SurfaceDocument::from_json(&bad), Err(Error::Document(_))));
        let bad = S0.replace("[-1, 1], \"v\"", "[1, -1], \"v\"");
        assert!(SurfaceDocument::from_json(&bad).is_err());
    }

    #[test]
    fn expression_errors_surface_on_patch() {
        let bad = S0.replace("u*v", "2u");
        let doc = SurfaceDocument::from_json(&bad).unwrap();
        assert!(matches!(doc.patch(), Err(Error::Syntax { offset: 1, .. })));
    }

    #[test]
    fn round_trips() {
        let doc = SurfaceDocument::from_json(S0).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(SurfaceDocument::from_json(&text).unwrap(), doc);
    }
}
