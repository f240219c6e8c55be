use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice index `j ∈ Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i32>);

impl Site {
    pub fn new(coords: Vec<i32>) -> Self {
        Site(coords)
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Integer sum of squares of the coordinates.
    pub fn norm2_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    /// Euclidean norm `|j|₂`.
    pub fn norm2(&self) -> f64 {
        (self.norm2_sq() as f64).sqrt()
    }

    /// Weight `⟨j⟩ = max(1, |j|₂)` used in the weighted ℓ² norms.
    pub fn weight(&self) -> f64 {
        self.norm2().max(1.0)
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The variables a series is written in: `n` angle/action pairs attached to
/// the tangential sites, and one `(q, q̄)` pair per normal site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteTable {
    d: usize,
    tangential: Vec<Site>,
    sites: Vec<Site>,
    index: HashMap<Site, u32>,
}

impl SiteTable {
    pub fn new(d: usize, tangential: Vec<Site>, sites: Vec<Site>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension(
                "spatial dimension must be at least 1".into(),
            ));
        }
        let mut index = HashMap::with_capacity(sites.len());
        for (i, s) in tangential.iter().chain(sites.iter()).enumerate() {
            if s.dim() != d {
                return Err(Error::Dimension(format!(
                    "site {s} does not have {d} coordinates"
                )));
            }
            if i >= tangential.len() {
                let slot = (i - tangential.len()) as u32;
                if index.insert(s.clone(), slot).is_some() {
                    return Err(Error::InvalidTerm(format!("duplicate site {s}")));
                }
            }
        }
        for t in &tangential {
            if index.contains_key(t) {
                return Err(Error::InvalidTerm(format!(
                    "tangential site {t} also listed as a normal site"
                )));
            }
        }
        Ok(SiteTable {
            d,
            tangential,
            sites,
            index,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of angle/action pairs.
    pub fn n(&self) -> usize {
        self.tangential.len()
    }

    pub fn tangential(&self) -> &[Site] {
        &self.tangential
    }

    /// Sites carrying a `(q, q̄)` pair.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, slot: u32) -> &Site {
        &self.sites[slot as usize]
    }

    pub fn slot(&self, site: &Site) -> Option<u32> {
        self.index.get(site).copied()
    }

    /// `⟨j⟩` for every normal slot.
    pub fn weights(&self) -> Vec<f64> {
        self.sites.iter().map(Site::weight).collect()
    }
}
