//! MDL scoring: model-encoding lengths for BKBs and Bayesian networks,
//! data-encoding lengths, the BN-to-BKB conversion cost with its bound, and
//! the restricted cross-entropy used by the theory tests.
//!
//! Everything is in bits (log base 2). Data bits are the encoding length
//! `-N * sum_tau p_tau * log2(q_tau)` over the unique data worlds, which is
//! nonnegative for any sub-normalized model; the same value is also reported
//! in signed table convention `N * sum p log2 q`.

use serde::{Deserialize, Serialize};

use crate::bnlearn::BayesNet;
use crate::core::{dedupe_worlds, Bkb, Dataset, World};
use crate::error::{Error, Result};

/// The two model-encoding conventions for BN MDL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BnMdlVariant {
    /// `sum_i [k_i log2(n) + delta (r_i - 1) c_i]`.
    LamBacchus,
    /// `(K(G) / 2) log2(N)` with `K(G)` the free-parameter count.
    Suzuki,
}

impl std::fmt::Display for BnMdlVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BnMdlVariant::LamBacchus => write!(f, "lam-bacchus"),
            BnMdlVariant::Suzuki => write!(f, "suzuki"),
        }
    }
}

/// A scored model: encoding bits for the structure and for the data under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlBreakdown {
    pub model_bits: f64,
    pub data_bits: f64,
    /// Bits reserved per stored probability value.
    pub delta: f64,
    /// `log2(m)` for the data variables' joint instantiation space.
    pub log2_m: f64,
    /// Variable count of the data problem.
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<BnMdlVariant>,
}

impl MdlBreakdown {
    pub fn total(&self) -> f64 {
        self.model_bits + self.data_bits
    }

    /// The signed per-table convention `N * sum p log2 q`.
    pub fn data_mdl_signed(&self) -> f64 {
        -self.data_bits
    }

    pub fn report(&self) -> ScoreReport {
        ScoreReport {
            model_bits: self.model_bits,
            data_bits: self.data_bits,
            data_mdl_signed: self.data_mdl_signed(),
            delta: self.delta,
            variant: self.variant.map(|v| v.to_string()),
        }
    }
}

/// JSON score report: both sign conventions, clearly labeled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model_bits: f64,
    pub data_bits: f64,
    pub data_mdl_signed: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
}

/// Model bits for a rule set: `sum_q ((|parents(q)| + 1) log2(m) + delta)`
/// over the given parent-set sizes.
pub fn model_bits_for_sizes(sizes: impl Iterator<Item = usize>, log2_m: f64, delta: f64) -> f64 {
    sizes.map(|s| (s as f64 + 1.0) * log2_m + delta).sum()
}

/// BKB model-encoding length over every S-node of the graph.
pub fn bkb_model_bits(bkb: &Bkb, log2_m: f64, delta: f64) -> f64 {
    model_bits_for_sizes(bkb.snodes().iter().map(|s| s.parents().len()), log2_m, delta)
}

/// Data-encoding length `-N sum_tau p_tau log2 q_tau` in bits over the unique
/// worlds of `dataset`, with `q_tau` supplied by the model being scored.
/// Errors with the offending world when the model assigns it zero.
pub fn data_bits<F>(world_prob: F, dataset: &Dataset) -> Result<f64>
where
    F: Fn(&World) -> f64,
{
    let mut bits = 0.0;
    for world in dedupe_worlds(dataset) {
        let q = world_prob(&world);
        if q <= 0.0 || q.is_nan() {
            return Err(Error::CannotEncode(format!(
                "world {:?} has probability {q} under the model",
                world.assignment
            )));
        }
        bits -= world.multiplicity as f64 * q.log2();
    }
    Ok(bits)
}

/// BN model-encoding bits under the chosen variant. `c_i` counts every
/// possible parent configuration, seen or not.
pub fn bn_model_bits(bn: &BayesNet, dataset: &Dataset, delta: f64, variant: BnMdlVariant) -> f64 {
    let n = dataset.num_vars();
    let big_n = dataset.num_rows() as f64;
    let mut bits = 0.0;
    for i in 0..n {
        let r_i = dataset.variables()[i].arity() as f64;
        let c_i: f64 = bn.parents(i)
            .iter()
            .map(|&p| dataset.variables()[p].arity() as f64)
            .product();
        let k_i = bn.parents(i).len() as f64;
        bits += match variant {
            BnMdlVariant::LamBacchus => k_i * (n as f64).log2() + delta * (r_i - 1.0) * c_i,
            BnMdlVariant::Suzuki => (r_i - 1.0) * c_i / 2.0 * big_n.log2(),
        };
    }
    bits
}

/// Full BN MDL: variant model bits plus the shared data bits from the BN's
/// factorized world probability.
pub fn bn_mdl(
    bn: &BayesNet,
    dataset: &Dataset,
    delta: f64,
    variant: BnMdlVariant,
) -> Result<MdlBreakdown> {
    let data = data_bits(
        |w| bn.world_prob(&w.assignment).unwrap_or(0.0),
        dataset,
    )?;
    Ok(MdlBreakdown {
        model_bits: bn_model_bits(bn, dataset, delta, variant),
        data_bits: data,
        delta,
        log2_m: dataset.log2_state_space(),
        n: dataset.num_vars(),
        variant: Some(variant),
    })
}

/// Cost of converting a BN into its complete BKB form,
/// `sum_i K log2(m^R / n) + (2 - r_i) delta R`, together with the upper bound
/// obtained by replacing `m` with `r_max^n`. The exact cost never exceeds the
/// bound.
pub fn bkb_conversion_cost(bn: &BayesNet, dataset: &Dataset, delta: f64) -> (f64, f64) {
    let n = dataset.num_vars() as f64;
    let log2_m = dataset.log2_state_space();
    let r_max = dataset
        .variables()
        .iter()
        .map(|v| v.arity())
        .max()
        .unwrap_or(1) as f64;
    let log2_m_bound = n * r_max.log2();
    let mut exact = 0.0;
    let mut bound = 0.0;
    for i in 0..dataset.num_vars() {
        let r_i = dataset.variables()[i].arity() as f64;
        let k = bn.parents(i).len() as f64;
        let r: f64 = bn.parents(i)
            .iter()
            .map(|&p| dataset.variables()[p].arity() as f64)
            .product();
        // K log2(m^R / n) = K (R log2 m - log2 n)
        exact += k * (r * log2_m - n.log2()) + (2.0 - r_i) * delta * r;
        bound += k * (r * log2_m_bound - n.log2()) + (2.0 - r_i) * delta * r;
    }
    (exact, bound)
}

/// Restricted cross-entropy `C_D(P, Q) = sum_{tau in D} p_tau (log2 p_tau -
/// log2 q_tau)` over the unique data worlds. Equals `data_bits / N` minus the
/// empirical world entropy.
pub fn cross_entropy_cd<F>(world_prob: F, dataset: &Dataset) -> Result<f64>
where
    F: Fn(&World) -> f64,
{
    let n = dataset.num_rows() as f64;
    let mut cd = 0.0;
    for world in dedupe_worlds(dataset) {
        let p = world.multiplicity as f64 / n;
        let q = world_prob(&world);
        if q <= 0.0 || q.is_nan() {
            return Err(Error::CannotEncode(format!(
                "world {:?} has probability {q} under the model",
                world.assignment
            )));
        }
        cd += p * (p.log2() - q.log2());
    }
    Ok(cd)
}

/// Empirical entropy of the unique-world distribution, in bits.
pub fn empirical_world_entropy(dataset: &Dataset) -> f64 {
    let n = dataset.num_rows() as f64;
    dedupe_worlds(dataset)
        .iter()
        .map(|w| {
            let p = w.multiplicity as f64 / n;
            -p * p.log2()
        })
        .sum()
}
