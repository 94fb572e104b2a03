use crate::error::{Error, Result};
use crate::numerics::ParamVector;

fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Structure(format!("{what} accuracy {v} outside [0, 1]")));
    }
    Ok(())
}

/// Server observation: accuracy of every uploaded model on the server's test set.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerState(Vec<f64>);

impl ServerState {
    pub fn new(acc: Vec<f64>) -> Result<Self> {
        for &a in &acc {
            check_unit("server state", a)?;
        }
        Ok(Self(acc))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Client observation: accuracy of the distributed global model on local test data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClientState(f64);

impl ClientState {
    pub fn new(acc: f64) -> Result<Self> {
        check_unit("client state", acc)?;
        Ok(Self(acc))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.0]
    }
}

/// Everything the next stage depends on besides the players' policies:
/// the global model, the latest local models and the 1-based stage index.
#[derive(Clone, Debug, PartialEq)]
pub struct GameCondition {
    pub global: ParamVector,
    pub locals: Vec<ParamVector>,
    pub stage: usize,
}

impl GameCondition {
    pub fn new(global: ParamVector, locals: Vec<ParamVector>, stage: usize) -> Result<Self> {
        if stage == 0 {
            return Err(Error::Usage("stages are numbered from 1".into()));
        }
        if let Some(bad) = locals.iter().find(|w| w.len() != global.len()) {
            return Err(Error::dim("local model", global.len(), bad.len()));
        }
        Ok(Self { global, locals, stage })
    }
}
