//! File formats: instances, certificates, measures, and generation traces.
//!
//! Everything is JSON with alphabetically ordered keys and no floats in
//! exactness-critical fields; rationals travel as `p/q` strings and
//! assignments as digit strings over the alphabet (capped at q <= 10, which
//! covers every object this toolkit produces).

use crate::cert::{BasicCertificate, LocalDistribution, SaCertificate};
use crate::csp::{Constraint, Instance, Predicate};
use crate::error::{Error, Result};
use crate::gap::{LiftedInstance, Template};
use crate::ratio::{rat_from_str, rat_to_string, Rat};
use crate::resistance::{AtomicMeasure, KtwConstraintTrace, KtwTrace, MeasureAtom};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn values_to_key(values: &[u8]) -> Result<String> {
    if values.iter().any(|&v| v > 9) {
        return Err(Error::contract(
            "assignment serialization supports alphabets up to q = 10",
        ));
    }
    Ok(values.iter().map(|v| (b'0' + v) as char).collect())
}

fn key_to_values(key: &str) -> Result<Vec<u8>> {
    key.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as u8)
                .ok_or_else(|| Error::Parse(format!("bad assignment digit {c:?}")))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub scope: Vec<usize>,
    pub shift: Vec<u8>,
}

/// Canonical instance schema; field order is the serialization order.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub constraints: Vec<ConstraintFile>,
    pub k: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<(usize, usize)>>,
    pub q: usize,
    pub table: String,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> InstanceFile {
        InstanceFile {
            constraints: inst
                .constraints
                .iter()
                .map(|c| ConstraintFile {
                    scope: c.scope.clone(),
                    shift: c.shift.clone(),
                })
                .collect(),
            k: inst.predicate.k(),
            n: inst.n,
            parts: inst.parts.clone(),
            q: inst.predicate.q(),
            table: inst.predicate.table_bits(),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        let predicate = Predicate::from_bits(self.q, self.k, &self.table)?;
        Instance::new(
            predicate,
            self.n,
            self.parts,
            self.constraints
                .into_iter()
                .map(|c| Constraint::new(c.scope, c.shift))
                .collect(),
        )
    }
}

/// Predicate-only schema for the resistance subcommands.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredicateFile {
    pub k: usize,
    pub q: usize,
    pub table: String,
}

impl PredicateFile {
    pub fn from_predicate(p: &Predicate) -> PredicateFile {
        PredicateFile {
            k: p.k(),
            q: p.q(),
            table: p.table_bits(),
        }
    }

    pub fn into_predicate(self) -> Result<Predicate> {
        Predicate::from_bits(self.q, self.k, &self.table)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DistributionFile {
    pub domain: Vec<usize>,
    /// assignment digit-string -> exact rational
    pub probs: BTreeMap<String, String>,
}

impl DistributionFile {
    pub fn from_dist(d: &LocalDistribution) -> Result<DistributionFile> {
        let probs = d
            .support()
            .map(|(a, p)| Ok((values_to_key(a)?, rat_to_string(p))))
            .collect::<Result<BTreeMap<String, String>>>()?;
        Ok(DistributionFile {
            domain: d.domain().to_vec(),
            probs,
        })
    }

    pub fn into_dist(self) -> Result<LocalDistribution> {
        let probs = self
            .probs
            .into_iter()
            .map(|(k, v)| Ok((key_to_values(&k)?, rat_from_str(&v)?)))
            .collect::<Result<BTreeMap<Vec<u8>, Rat>>>()?;
        LocalDistribution::new(self.domain, probs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BasicCertificateFile {
    pub per_constraint: Vec<DistributionFile>,
    pub per_variable: Vec<DistributionFile>,
}

impl BasicCertificateFile {
    pub fn from_cert(c: &BasicCertificate) -> Result<BasicCertificateFile> {
        Ok(BasicCertificateFile {
            per_constraint: c
                .per_constraint
                .iter()
                .map(DistributionFile::from_dist)
                .collect::<Result<_>>()?,
            per_variable: c
                .per_variable
                .iter()
                .map(DistributionFile::from_dist)
                .collect::<Result<_>>()?,
        })
    }

    pub fn into_cert(self) -> Result<BasicCertificate> {
        Ok(BasicCertificate {
            per_constraint: self
                .per_constraint
                .into_iter()
                .map(DistributionFile::into_dist)
                .collect::<Result<_>>()?,
            per_variable: self
                .per_variable
                .into_iter()
                .map(DistributionFile::into_dist)
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SaCertificateFile {
    pub family: Vec<DistributionFile>,
    pub t: usize,
}

impl SaCertificateFile {
    pub fn from_cert(c: &SaCertificate) -> Result<SaCertificateFile> {
        Ok(SaCertificateFile {
            family: c
                .family
                .values()
                .map(DistributionFile::from_dist)
                .collect::<Result<_>>()?,
            t: c.t,
        })
    }

    pub fn into_cert(self) -> Result<SaCertificate> {
        let mut family = BTreeMap::new();
        for d in self.family {
            let dist = d.into_dist()?;
            family.insert(dist.domain().to_vec(), dist);
        }
        Ok(SaCertificate {
            t: self.t,
            family,
        })
    }
}

/// Template schema: instance + certificate + claimed values.
#[derive(Debug, Serialize, Deserialize)]
pub struct TemplateFile {
    pub certificate: BasicCertificateFile,
    pub instance: InstanceFile,
    pub lp_value: String,
    pub soundness: String,
}

impl TemplateFile {
    pub fn from_template(t: &Template) -> Result<TemplateFile> {
        Ok(TemplateFile {
            certificate: BasicCertificateFile::from_cert(&t.certificate)?,
            instance: InstanceFile::from_instance(&t.instance),
            lp_value: rat_to_string(&t.lp_value),
            soundness: rat_to_string(&t.soundness),
        })
    }

    pub fn into_template(self) -> Result<Template> {
        let tpl = Template {
            instance: self.instance.into_instance()?,
            certificate: self.certificate.into_cert()?,
            lp_value: rat_from_str(&self.lp_value)?,
            soundness: rat_from_str(&self.soundness)?,
        };
        tpl.validate()?;
        Ok(tpl)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureAtomFile {
    pub weight: String,
    pub witness: BTreeMap<String, String>,
    pub zeta: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub atoms: Vec<MeasureAtomFile>,
}

impl MeasureFile {
    pub fn from_measure(m: &AtomicMeasure) -> Result<MeasureFile> {
        Ok(MeasureFile {
            atoms: m
                .atoms
                .iter()
                .map(|a| {
                    Ok(MeasureAtomFile {
                        weight: rat_to_string(&a.weight),
                        witness: a
                            .witness
                            .iter()
                            .map(|(k, v)| Ok((values_to_key(k)?, rat_to_string(v))))
                            .collect::<Result<_>>()?,
                        zeta: a.zeta.iter().map(rat_to_string).collect(),
                    })
                })
                .collect::<Result<_>>()?,
        })
    }

    pub fn into_measure(self) -> Result<AtomicMeasure> {
        Ok(AtomicMeasure {
            atoms: self
                .atoms
                .into_iter()
                .map(|a| {
                    Ok(MeasureAtom {
                        weight: rat_from_str(&a.weight)?,
                        witness: a
                            .witness
                            .into_iter()
                            .map(|(k, v)| Ok((key_to_values(&k)?, rat_from_str(&v)?)))
                            .collect::<Result<_>>()?,
                        zeta: a
                            .zeta
                            .iter()
                            .map(|z| rat_from_str(z))
                            .collect::<Result<_>>()?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KtwTraceConstraintFile {
    pub atom: usize,
    pub blocks: Vec<usize>,
    pub zeta: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KtwTraceFile {
    pub delta: String,
    pub epsilon: f64,
    pub n0: usize,
    pub per_constraint: Vec<KtwTraceConstraintFile>,
}

impl KtwTraceFile {
    pub fn from_trace(t: &KtwTrace) -> KtwTraceFile {
        KtwTraceFile {
            delta: rat_to_string(&t.delta),
            epsilon: t.epsilon,
            n0: t.n0,
            per_constraint: t
                .per_constraint
                .iter()
                .map(|c| KtwTraceConstraintFile {
                    atom: c.atom,
                    blocks: c.blocks.clone(),
                    zeta: c.zeta.iter().map(rat_to_string).collect(),
                })
                .collect(),
        }
    }

    pub fn into_trace(self) -> Result<KtwTrace> {
        Ok(KtwTrace {
            epsilon: self.epsilon,
            delta: rat_from_str(&self.delta)?,
            n0: self.n0,
            per_constraint: self
                .per_constraint
                .into_iter()
                .map(|c| {
                    Ok(KtwConstraintTrace {
                        atom: c.atom,
                        zeta: c
                            .zeta
                            .iter()
                            .map(|z| rat_from_str(z))
                            .collect::<Result<_>>()?,
                        blocks: c.blocks,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Lifted-instance schema: the instance plus generation metadata.
#[derive(Debug, Serialize, Deserialize)]
pub struct LiftedInstanceFile {
    pub instance: InstanceFile,
    pub n_per_block: usize,
    pub origins: Vec<usize>,
    pub seed: u64,
}

impl LiftedInstanceFile {
    pub fn from_lifted(l: &LiftedInstance) -> LiftedInstanceFile {
        LiftedInstanceFile {
            instance: InstanceFile::from_instance(&l.instance),
            n_per_block: l.n_per_block,
            origins: l.origins.clone(),
            seed: l.seed,
        }
    }

    pub fn into_lifted(self) -> Result<LiftedInstance> {
        Ok(LiftedInstance {
            instance: self.instance.into_instance()?,
            origins: self.origins,
            seed: self.seed,
            n_per_block: self.n_per_block,
        })
    }
}

pub fn write_json<T: Serialize>(path: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
