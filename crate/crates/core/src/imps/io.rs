//! Versioned JSON container for [`UniformMPS`].
//!
//! Floating point values are stored as IEEE-754 bit patterns so a round
//! trip reproduces every tensor entry exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::UniformMPS;
use crate::error::{Error, Result};
use crate::scalar::{Real, C};
use crate::tensor::{Charges, SchmidtSpectrum, Tensor};

pub const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    charges: Option<Charges>,
    /// `(re, im)` bit patterns, row-major.
    data: Vec<(u64, u64)>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRecord {
    values: Vec<u64>,
    sector: Option<Vec<u32>>,
    discarded_weight: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    version: u32,
    scalar: String,
    charge_modulus: u32,
    sites: Vec<TensorRecord>,
    lambdas: Vec<SpectrumRecord>,
}

fn bits<R: Real>(x: R) -> u64 {
    x.as_f64().to_bits()
}

fn unbits<R: Real>(b: u64) -> R {
    R::of(f64::from_bits(b))
}

fn scalar_name<R: Real>() -> String {
    format!("f{}", std::mem::size_of::<R>() * 8)
}

pub fn write_state<R: Real, W: Write>(mps: &UniformMPS<R>, mut w: W) -> Result<()> {
    let rec = StateRecord {
        version: STATE_VERSION,
        scalar: scalar_name::<R>(),
        charge_modulus: mps.charge_modulus(),
        sites: mps
            .sites
            .iter()
            .map(|t| TensorRecord {
                shape: t.shape().to_vec(),
                charges: t.charges().cloned(),
                data: t.data().iter().map(|z| (bits(z.re), bits(z.im))).collect(),
            })
            .collect(),
        lambdas: mps
            .lambdas
            .iter()
            .map(|s| SpectrumRecord {
                values: s.values.iter().map(|&v| bits(v)).collect(),
                sector: s.sector.clone(),
                discarded_weight: bits(s.discarded_weight),
            })
            .collect(),
    };
    serde_json::to_writer(&mut w, &rec)?;
    w.flush()?;
    Ok(())
}

pub fn read_state<R: Real, Rd: Read>(r: Rd) -> Result<UniformMPS<R>> {
    let rec: StateRecord = serde_json::from_reader(r)?;
    if rec.version != STATE_VERSION {
        return Err(Error::Version(rec.version));
    }
    if rec.scalar != scalar_name::<R>() {
        return Err(Error::InvalidArgument(format!("container holds {} data", rec.scalar)));
    }
    if rec.sites.len() != 2 || rec.lambdas.len() != 2 {
        return Err(Error::InvalidArgument("a state has exactly two sites and two bonds".into()));
    }
    let mut sites = Vec::with_capacity(2);
    for t in rec.sites {
        let data = t.data.into_iter().map(|(a, b)| C::new(unbits(a), unbits(b))).collect();
        let tensor = Tensor::new(t.shape, data)?;
        sites.push(match t.charges {
            Some(c) => tensor.with_charges(c)?,
            None => tensor,
        });
    }
    let lambdas: Vec<SchmidtSpectrum<R>> = rec
        .lambdas
        .into_iter()
        .map(|s| SchmidtSpectrum {
            values: s.values.into_iter().map(unbits).collect(),
            sector: s.sector,
            discarded_weight: unbits(s.discarded_weight),
        })
        .collect();
    let [a, b]: [Tensor<R>; 2] = sites.try_into().expect("two sites");
    let [la, lb]: [SchmidtSpectrum<R>; 2] = lambdas.try_into().expect("two bonds");
    UniformMPS::from_parts([a, b], [la, lb], rec.charge_modulus)
}
