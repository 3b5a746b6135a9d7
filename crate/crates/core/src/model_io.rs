//! Versioned JSON persistence for trained models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::KmeansRef;
use crate::scalar::Scalar;
use crate::svc::MulticlassModel;
use crate::svr::SvrModel;

pub const FORMAT: &str = "cellplan-model";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "params",
    rename_all = "lowercase",
    bound = "F: Scalar"
)]
pub enum Model<F> {
    Svc(MulticlassModel<F>),
    Kmeans(KmeansRef<F>),
    Svr(SvrModel<F>),
}

impl<F: Scalar> Model<F> {
    pub fn type_name(&self) -> &'static str {
        match self {
            Model::Svc(_) => "svc",
            Model::Kmeans(_) => "kmeans",
            Model::Svr(_) => "svr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Svc(m) => m.validate(),
            Model::Kmeans(m) => m.validate(),
            Model::Svr(m) => m.validate(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
struct Envelope<F> {
    format: String,
    version: u32,
    scalar: String,
    model: Model<F>,
}

pub fn write_model<F: Scalar, W: Write>(out: W, model: &Model<F>) -> Result<()> {
    model.validate()?;
    let env = Envelope {
        format: FORMAT.into(),
        version: VERSION,
        scalar: F::NAME.into(),
        model: model.clone(),
    };
    serde_json::to_writer_pretty(out, &env)?;
    Ok(())
}

pub fn read_model<F: Scalar, R: Read>(input: R) -> Result<Model<F>> {
    let value: serde_json::Value = serde_json::from_reader(input)?;
    let field = |k: &str| value.get(k).cloned().unwrap_or(serde_json::Value::Null);
    if field("format") != FORMAT {
        return Err(Error::ModelFormat(format!("not a {FORMAT} file")));
    }
    match field("version").as_u64() {
        Some(v) if v == VERSION as u64 => {}
        other => return Err(Error::ModelFormat(format!("unsupported version {other:?}"))),
    }
    if field("scalar") != F::NAME {
        return Err(Error::ModelFormat(format!(
            "model stores {}, expected {}",
            field("scalar"),
            F::NAME
        )));
    }
    let env: Envelope<F> =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
    env.model.validate()?;
    Ok(env.model)
}

pub fn save_model<F: Scalar>(path: impl AsRef<Path>, model: &Model<F>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(&mut out, model)?;
    out.flush()?;
    Ok(())
}

pub fn load_model<F: Scalar>(path: impl AsRef<Path>) -> Result<Model<F>> {
    read_model(BufReader::new(File::open(path)?))
}
