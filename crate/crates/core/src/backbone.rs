//! Disparity-filter backbone extraction for directed weighted networks.
//!
//! For an endpoint with degree `k` and an incident edge carrying a fraction
//! `p` of that endpoint's strength, the probability of observing a share at
//! least `p` under a uniform random split of the strength is `(1 - p)^(k - 1)`.
//! Edges whose probability falls below the significance level at either
//! endpoint form the backbone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trade::TradeNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneParams {
    /// Significance level, strictly inside (0, 1).
    pub alpha: f64,
    /// Treat a degree-1 endpoint as certifying its single edge. Off by default:
    /// the null model has no content at k = 1.
    pub keep_degree_one: bool,
}

impl Default for BackboneParams {
    fn default() -> Self {
        BackboneParams {
            alpha: 0.05,
            keep_degree_one: false,
        }
    }
}

impl BackboneParams {
    pub fn new(alpha: f64) -> Result<Self> {
        let p = BackboneParams {
            alpha,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "significance level {} must lie strictly between 0 and 1",
                self.alpha
            )))
        }
    }
}

/// `(1 - p)^(k - 1)`; 1 for `k == 1`.
pub fn disparity_alpha(p: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "normalised weight {p} outside [0, 1]"
        )));
    }
    if k == 0 {
        return Err(Error::Domain("endpoint degree must be at least 1".into()));
    }
    if k == 1 {
        return Ok(1.0);
    }
    Ok((1.0 - p).powi((k - 1) as i32))
}

/// Significance of one edge from both of its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSignificance {
    pub exporter: String,
    pub importer: String,
    pub weight: f64,
    /// Exporter-side value; `None` when the exporter has out-degree 1.
    pub alpha_out: Option<f64>,
    /// Importer-side value; `None` when the importer has in-degree 1.
    pub alpha_in: Option<f64>,
}

impl EdgeSignificance {
    /// Smaller of the two endpoint values, 1 when neither endpoint is testable.
    pub fn min_alpha(&self) -> f64 {
        match (self.alpha_out, self.alpha_in) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1.0,
        }
    }

    fn is_significant(&self, params: &BackboneParams) -> bool {
        let side = |a: Option<f64>| match a {
            Some(a) => a < params.alpha,
            None => params.keep_degree_one,
        };
        side(self.alpha_out) || side(self.alpha_in)
    }
}

/// Endpoint significance for every edge, in edge order.
pub fn edge_significance(network: &TradeNetwork) -> Vec<EdgeSignificance> {
    let outs = network.out_strengths();
    let ins = network.in_strengths();
    let endpoint = |w: f64, (strength, degree): (f64, usize)| {
        (degree > 1).then(|| {
            // w <= strength, but rounding in the strength sum can push the
            // ratio a hair above 1.
            let p = (w / strength).clamp(0.0, 1.0);
            disparity_alpha(p, degree).expect("share and degree are in range")
        })
    };
    network
        .edges()
        .map(|(a, b, w)| EdgeSignificance {
            exporter: a.to_string(),
            importer: b.to_string(),
            weight: w,
            alpha_out: endpoint(w, outs[a]),
            alpha_in: endpoint(w, ins[b]),
        })
        .collect()
}

/// Edges significant at `params.alpha` from at least one endpoint.
pub fn extract_backbone(network: &TradeNetwork, params: &BackboneParams) -> Result<TradeNetwork> {
    params.validate()?;
    let keep: Vec<(String, String, f64)> = edge_significance(network)
        .into_iter()
        .filter(|e| e.is_significant(params))
        .map(|e| (e.exporter, e.importer, e.weight))
        .collect();
    Ok(TradeNetwork::from_edges(network.window, keep))
}

/// Baseline for comparison: keep edges with weight at least `min_weight`.
pub fn global_threshold(network: &TradeNetwork, min_weight: f64) -> TradeNetwork {
    let mut out = network.clone();
    out.retain(|_, _, w| w >= min_weight);
    out
}
