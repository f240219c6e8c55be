//! Line-oriented text and JSON encodings of a series.
//!
//! Text layout: `#`-prefixed header lines carrying the metadata, then one term
//! per line as `k | α | β | γ | re | im`. Integer vectors are comma separated,
//! exponent maps are space separated `site:power` entries, and `-` marks an
//! empty field. Floats use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::monomial::{canonical_exps, Exps, Monomial};
use super::{Series, SeriesMeta, Site, SiteTable, C64};
use crate::error::{Error, Result};

const MAGIC: &str = "# kamstick-series v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetaRecord {
    pub n: usize,
    pub d: usize,
    pub degree_cap: u32,
    pub fourier_cap: u32,
    pub tangential: Vec<Vec<i32>>,
    pub sites: Vec<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub k: Vec<i32>,
    pub alpha: Vec<u16>,
    pub beta: Vec<(Vec<i32>, u16)>,
    pub gamma: Vec<(Vec<i32>, u16)>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub meta: SeriesMetaRecord,
    pub terms: Vec<TermRecord>,
}

impl SeriesMetaRecord {
    pub fn from_meta(meta: &SeriesMeta) -> Self {
        SeriesMetaRecord {
            n: meta.n(),
            d: meta.table.d(),
            degree_cap: meta.degree_cap,
            fourier_cap: meta.fourier_cap,
            tangential: meta
                .table
                .tangential()
                .iter()
                .map(|s| s.coords().to_vec())
                .collect(),
            sites: meta
                .table
                .sites()
                .iter()
                .map(|s| s.coords().to_vec())
                .collect(),
        }
    }

    pub fn to_meta(&self) -> Result<SeriesMeta> {
        let table = SiteTable::new(
            self.d,
            self.tangential.iter().cloned().map(Site::new).collect(),
            self.sites.iter().cloned().map(Site::new).collect(),
        )?;
        if table.n() != self.n {
            return Err(Error::Dimension(format!(
                "header says n = {} but lists {} tangential sites",
                self.n,
                table.n()
            )));
        }
        Ok(SeriesMeta::new(
            Arc::new(table),
            self.degree_cap,
            self.fourier_cap,
        ))
    }
}

fn exps_record(table: &SiteTable, e: &Exps) -> Vec<(Vec<i32>, u16)> {
    e.iter()
        .map(|&(s, p)| (table.site(s).coords().to_vec(), p))
        .collect()
}

fn exps_from_record(table: &SiteTable, r: &[(Vec<i32>, u16)]) -> Result<Exps> {
    let mut v = Vec::with_capacity(r.len());
    for (coords, p) in r {
        let site = Site::new(coords.clone());
        let slot = table
            .slot(&site)
            .ok_or_else(|| Error::InvalidTerm(format!("site {site} is not in the table")))?;
        v.push((slot, *p));
    }
    Ok(canonical_exps(&v))
}

impl Series {
    pub fn to_document(&self) -> SeriesDocument {
        let table = self.table();
        SeriesDocument {
            meta: SeriesMetaRecord::from_meta(self.meta()),
            terms: self
                .iter()
                .map(|(m, c)| TermRecord {
                    k: m.k.to_vec(),
                    alpha: m.alpha.to_vec(),
                    beta: exps_record(table, &m.beta),
                    gamma: exps_record(table, &m.gamma),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &SeriesDocument) -> Result<Series> {
        let meta = doc.meta.to_meta()?;
        Series::from_records(meta, &doc.terms)
    }

    /// Reads term records against existing metadata.
    pub fn from_records(meta: SeriesMeta, records: &[TermRecord]) -> Result<Series> {
        let mut terms = Vec::with_capacity(records.len());
        for r in records {
            let mut m = Monomial::new(&r.k, &r.alpha, &[], &[])?;
            m.beta = exps_from_record(&meta.table, &r.beta)?;
            m.gamma = exps_from_record(&meta.table, &r.gamma)?;
            terms.push((m, C64::new(r.re, r.im)));
        }
        Series::from_terms(meta, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Series> {
        let doc: SeriesDocument = serde_json::from_str(s)?;
        Series::from_document(&doc)
    }

    pub fn to_text(&self) -> String {
        let meta = SeriesMetaRecord::from_meta(self.meta());
        let mut out = String::new();
        let sites = |v: &[Vec<i32>]| {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.iter()
                    .map(|c| Site::new(c.clone()).to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "# n = {}", meta.n);
        let _ = writeln!(out, "# d = {}", meta.d);
        let _ = writeln!(out, "# degree_cap = {}", meta.degree_cap);
        let _ = writeln!(out, "# fourier_cap = {}", meta.fourier_cap);
        let _ = writeln!(out, "# tangential = {}", sites(&meta.tangential));
        let _ = writeln!(out, "# sites = {}", sites(&meta.sites));
        let _ = writeln!(out, "# k | alpha | beta | gamma | re | im");
        let table = self.table();
        for (m, c) in self.iter() {
            let _ = writeln!(
                out,
                "{} | {} | {} | {} | {} | {}",
                int_list(&m.k),
                int_list(&m.alpha),
                exps_text(table, &m.beta),
                exps_text(table, &m.gamma),
                c.re,
                c.im
            );
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Series> {
        let mut header = std::collections::HashMap::new();
        let mut body = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    header.insert(key.trim().to_string(), value.trim().to_string());
                }
                continue;
            }
            body.push((line_no, t));
        }
        let get = |key: &str| {
            header.get(key).cloned().ok_or(Error::Parse {
                line: 0,
                reason: format!("missing header `{key}`"),
            })
        };
        let num = |key: &str| -> Result<u64> {
            get(key)?.parse().map_err(|_| Error::Parse {
                line: 0,
                reason: format!("header `{key}` is not an integer"),
            })
        };
        let meta = SeriesMetaRecord {
            n: num("n")? as usize,
            d: num("d")? as usize,
            degree_cap: num("degree_cap")? as u32,
            fourier_cap: num("fourier_cap")? as u32,
            tangential: parse_site_list(&get("tangential")?, 0)?,
            sites: parse_site_list(&get("sites")?, 0)?,
        }
        .to_meta()?;
        let mut terms = Vec::with_capacity(body.len());
        for (line, t) in body {
            let fields: Vec<&str> = t.split('|').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected 6 fields, found {}", fields.len()),
                });
            }
            let k: Vec<i32> = parse_int_list(fields[0], line)?;
            let alpha: Vec<u16> = parse_int_list(fields[1], line)?;
            let beta = parse_exps(fields[2], line)?;
            let gamma = parse_exps(fields[3], line)?;
            let re = parse_float(fields[4], line)?;
            let im = parse_float(fields[5], line)?;
            terms.push(TermRecord {
                k,
                alpha,
                beta,
                gamma,
                re,
                im,
            });
        }
        Series::from_records(meta, &terms)
    }
}

fn int_list<T: std::fmt::Display>(v: &[T]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn exps_text(table: &SiteTable, e: &Exps) -> String {
    if e.is_empty() {
        "-".into()
    } else {
        e.iter()
            .map(|&(s, p)| format!("{}:{p}", table.site(s)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_int_list<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad integer `{x}`")))
        })
        .collect()
}

fn parse_site(s: &str, line: usize) -> Result<Vec<i32>> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| parse_err(line, format!("bad site `{s}`")))?;
    parse_int_list(inner, line)
}

fn parse_site_list(s: &str, line: usize) -> Result<Vec<Vec<i32>>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split_whitespace().map(|t| parse_site(t, line)).collect()
}

fn parse_exps(s: &str, line: usize) -> Result<Vec<(Vec<i32>, u16)>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split_whitespace()
        .map(|t| {
            let (site, p) = t
                .rsplit_once(':')
                .ok_or_else(|| parse_err(line, format!("bad exponent entry `{t}`")))?;
            let p = p
                .parse()
                .map_err(|_| parse_err(line, format!("bad power in `{t}`")))?;
            Ok((parse_site(site, line)?, p))
        })
        .collect()
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| parse_err(line, format!("bad float `{s}`")))
}
