//! Proposal kernels for the copula block.
//!
//! Every kernel maps the current copula to a candidate of the same degree and
//! reports `log q(old | new) - log q(new | old)`.

mod gre;
mod vertex;

pub use gre::{propose_gre, GreMove, GRE_MAX_RETRIES};
pub use vertex::{propose_vertex_line, sample_vertex, HastingsForm, VertexLine};

use crate::yett::{RectangleExchange, YettCopula};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalKind {
    /// `u` rectangle exchanges per proposal.
    Ire { u: usize },
    /// `u` generalized rectangle exchanges per proposal.
    Gre { u: usize },
    /// Line through the state and a random vertex; larger `tau` means
    /// shorter moves.
    VertexLine { tau: f64, hastings: HastingsForm },
}

impl ProposalKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProposalKind::Ire { .. } => "ire",
            ProposalKind::Gre { .. } => "gre",
            ProposalKind::VertexLine { .. } => "vertex",
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = match self {
            ProposalKind::Ire { u } | ProposalKind::Gre { u } => *u == 0,
            ProposalKind::VertexLine { tau, .. } => !(*tau > 0.0 && tau.is_finite()),
        };
        if bad {
            return Err(crate::Error::InvalidParameter(format!("invalid proposal settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidate: YettCopula,
    pub log_hastings: f64,
}

/// Draws a candidate. `None` means the kernel gave up (a GRE step that could
/// not find a non-null move); the caller treats it as a rejection.
pub fn propose<R: Rng + ?Sized>(kind: &ProposalKind, g: &YettCopula, rng: &mut R) -> Option<Proposal> {
    match *kind {
        ProposalKind::Ire { u } => Some(propose_ire(g, u, rng)),
        ProposalKind::Gre { u } => propose_gre(g, u, rng),
        ProposalKind::VertexLine { tau, hastings } => propose_vertex_line(g, tau, hastings, rng).ok(),
    }
}

/// `u` successive rectangle exchanges, each with its amount uniform on the
/// feasible interval. Each exchange consumes the draws of
/// [`RectangleExchange::random`] plus one uniform.
pub fn propose_ire<R: Rng + ?Sized>(g: &YettCopula, u: usize, rng: &mut R) -> Proposal {
    propose_ire_traced(g, u, rng).0
}

/// As [`propose_ire`], also returning each exchange and the amount moved.
pub fn propose_ire_traced<R: Rng + ?Sized>(
    g: &YettCopula,
    u: usize,
    rng: &mut R,
) -> (Proposal, Vec<(RectangleExchange, f64)>) {
    let mut candidate = g.clone();
    let mut trace = Vec::with_capacity(u);
    for _ in 0..u {
        let Some(ex) = RectangleExchange::random(g.degree(), rng) else {
            break;
        };
        let (lo, hi) = ex.bounds(&candidate);
        let eps = if hi > lo { lo + (hi - lo) * rng.random::<f64>() } else { 0.0 };
        ex.apply_in_place(&mut candidate, eps).expect("amount drawn inside bounds");
        trace.push((ex, eps));
    }
    (Proposal { candidate, log_hastings: 0.0 }, trace)
}
