use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent applied to the discount at stage `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountConvention {
    /// `γ^t`
    #[default]
    StageExponent,
    /// `γ^(t-1)`, so the first stage is undiscounted.
    ShiftedExponent,
}

impl DiscountConvention {
    pub fn weight(self, gamma: f64, stage: usize) -> f64 {
        let exp = match self {
            Self::StageExponent => stage,
            Self::ShiftedExponent => stage - 1,
        };
        gamma.powi(exp as i32)
    }
}

/// `Σ_{k} w(first_stage + k) · u[k]`, summed from the last stage backwards so
/// that every suffix sum is an exact prefix of the computation.
pub fn discounted_sum(utilities: &[f64], first_stage: usize, gamma: f64, convention: DiscountConvention) -> f64 {
    utilities
        .iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, u)| convention.weight(gamma, first_stage + k) * u + acc)
}

/// Per-stage utilities of the server and every client.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffLedger {
    pub discount: f64,
    pub kappa_global: f64,
    pub kappa_local: f64,
    pub convention: DiscountConvention,
    server: Vec<f64>,
    clients: Vec<Vec<f64>>,
}

impl PayoffLedger {
    pub fn new(discount: f64, kappa_global: f64, kappa_local: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::Usage(format!("discount {discount} outside [0, 1]")));
        }
        if !(kappa_global > 0.0 && kappa_local > 0.0) {
            return Err(Error::Usage("bias ratios must be positive".into()));
        }
        Ok(Self {
            discount,
            kappa_global,
            kappa_local,
            convention: DiscountConvention::default(),
            server: Vec::new(),
            clients: Vec::new(),
        })
    }

    pub fn with_convention(mut self, convention: DiscountConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Append one stage of unclipped utilities.
    pub fn record(&mut self, server: f64, clients: Vec<f64>) -> Result<()> {
        if let Some(first) = self.clients.first() {
            if first.len() != clients.len() {
                return Err(Error::dim("client utilities", first.len(), clients.len()));
            }
        }
        if !std::iter::once(&server).chain(&clients).all(|u| *u > 0.0 && u.is_finite()) {
            return Err(Error::Structure("utilities must be positive and finite".into()));
        }
        self.server.push(server);
        self.clients.push(clients);
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.server.len()
    }

    pub fn server_utilities(&self) -> &[f64] {
        &self.server
    }

    pub fn client_utilities(&self, stage: usize) -> Option<&[f64]> {
        self.clients.get(stage.checked_sub(1)?).map(Vec::as_slice)
    }
}

/// Discounted payoffs accumulated from stage `tau` (1-based) to the end.
pub fn accumulate_payoff(ledger: &PayoffLedger, tau: usize) -> Result<(f64, Vec<f64>)> {
    let t = ledger.stages();
    if tau == 0 || tau > t {
        return Err(Error::Usage(format!("stage {tau} outside recorded range 1..={t}")));
    }
    let (g, conv) = (ledger.discount, ledger.convention);
    let u_cs = discounted_sum(&ledger.server[tau - 1..], tau, g, conv);
    let n = ledger.clients[0].len();
    let u_i = (0..n)
        .map(|i| {
            let seq: Vec<f64> = ledger.clients[tau - 1..].iter().map(|c| c[i]).collect();
            discounted_sum(&seq, tau, g, conv)
        })
        .collect();
    Ok((u_cs, u_i))
}
