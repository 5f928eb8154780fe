//! Simulated secure dot product: three logical parties (client A, client B,
//! commodity coordinator) exchange additively masked matrices so that only
//! the designated product `X * Y^T` is revealed. Every message is recorded
//! in a transcript; mask identifiers are process-unique and their reuse
//! aborts the protocol.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{LazyLock, Mutex};

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

/// Logical protocol participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    ClientA,
    ClientB,
    Coordinator,
}

/// One recorded protocol message: routing, payload shape and digest, and the
/// identifiers of any masks contained in (or applied to) the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcMessage {
    pub seq: usize,
    pub from: Party,
    pub to: Party,
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub digest: String,
    /// Identifiers of masks dealt in this message.
    pub carries_masks: Vec<u128>,
    /// Identifier of the mask hiding this payload, if any.
    pub masked_by: Option<u128>,
}

/// Ordered message log of one protocol invocation plus its mask identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyTranscript {
    pub messages: Vec<SmcMessage>,
    pub mask_ids: Vec<u128>,
}

impl PartyTranscript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Raw simulation values retained for audit: masks as dealt and messages as
/// transmitted. Only masked quantities ever travel between A and B.
#[derive(Debug, Clone)]
pub struct ProtocolEvidence {
    pub r_a: Array2<f64>,
    pub r_b: Array2<f64>,
    pub t_a: Array2<f64>,
    pub t_b: Array2<f64>,
    pub x_masked: Array2<f64>,
    pub y_masked: Array2<f64>,
    pub v_masked: Array2<f64>,
}

/// Result of one secure dot-product invocation.
#[derive(Debug, Clone)]
pub struct SmcExchange {
    /// The revealed output `X * Y^T`.
    pub product: Array2<f64>,
    pub transcript: PartyTranscript,
    pub evidence: ProtocolEvidence,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(1);
static MASK_REGISTRY: LazyLock<Mutex<HashSet<u128>>> =
    LazyLock::new(|| Mutex::new(HashSet::new()));

/// Register a mask identifier; a second registration of the same id aborts.
pub(crate) fn register_mask_id(id: u128) -> Result<()> {
    let mut seen = MASK_REGISTRY.lock().expect("mask registry poisoned");
    if !seen.insert(id) {
        return Err(Error::MaskReuse(id));
    }
    Ok(())
}

pub fn digest_matrix(m: &Array2<f64>) -> String {
    let mut hasher = Sha256::new();
    for v in m.iter() {
        hasher.update(v.to_le_bytes());
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

struct TranscriptBuilder {
    messages: Vec<SmcMessage>,
    mask_ids: Vec<u128>,
}

impl TranscriptBuilder {
    fn new() -> Self {
        Self { messages: Vec::new(), mask_ids: Vec::new() }
    }

    fn record(
        &mut self,
        from: Party,
        to: Party,
        label: &str,
        payload: &Array2<f64>,
        carries_masks: Vec<u128>,
        masked_by: Option<u128>,
    ) {
        self.messages.push(SmcMessage {
            seq: self.messages.len(),
            from,
            to,
            label: label.to_string(),
            rows: payload.nrows(),
            cols: payload.ncols(),
            digest: digest_matrix(payload),
            carries_masks,
            masked_by,
        });
    }

    fn fresh_mask(&mut self, session: u64, k: &mut u64) -> Result<u128> {
        let id = (u128::from(session) << 64) | u128::from(*k);
        *k += 1;
        register_mask_id(id)?;
        self.mask_ids.push(id);
        Ok(id)
    }
}

/// Compute `X * Y^T` without either client revealing its factor matrix.
///
/// The coordinator deals correlated randomness `(R_a, t_a)` to A and
/// `(R_b, t_b)` to B with `t_a + t_b = R_a * R_b^T`. A transmits `X + R_a`,
/// B transmits `Y + R_b` and `V = (X + R_a) * Y^T + t_b`; A then recovers
/// `V - R_a * (Y + R_b)^T + t_a = X * Y^T` exactly and reveals it.
///
/// The seed drives only mask values; since masks cancel, the revealed
/// product is independent of it up to float round-off.
pub fn secure_dot_product(
    x: &Array2<f64>,
    y: &Array2<f64>,
    seed: u64,
) -> Result<SmcExchange> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "inner dimensions disagree: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let (n_a, d) = x.dim();
    let n_b = y.nrows();

    // Mask identifiers are process-unique (freshness); mask values depend
    // only on the caller's seed so the whole computation stays a pure
    // function of (inputs, seed). The masks cancel in the output either way.
    let session = SESSION_COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut mask_counter: u64 = 0;
    let mut rng = rng_from_seed(derive_seed(seed, "smc-masks", 0));
    let mut tb = TranscriptBuilder::new();

    // Coordinator deals correlated randomness.
    let r_a = gaussian_matrix(n_a, d, &mut rng);
    let r_b = gaussian_matrix(n_b, d, &mut rng);
    let t_total = r_a.dot(&r_b.t());
    let t_b = gaussian_matrix(n_a, n_b, &mut rng);
    let t_a = &t_total - &t_b;

    let id_r_a = tb.fresh_mask(session, &mut mask_counter)?;
    let id_t_a = tb.fresh_mask(session, &mut mask_counter)?;
    let id_r_b = tb.fresh_mask(session, &mut mask_counter)?;
    let id_t_b = tb.fresh_mask(session, &mut mask_counter)?;

    tb.record(Party::Coordinator, Party::ClientA, "deal_r_a", &r_a, vec![id_r_a], None);
    tb.record(Party::Coordinator, Party::ClientA, "deal_t_a", &t_a, vec![id_t_a], None);
    tb.record(Party::Coordinator, Party::ClientB, "deal_r_b", &r_b, vec![id_r_b], None);
    tb.record(Party::Coordinator, Party::ClientB, "deal_t_b", &t_b, vec![id_t_b], None);

    // A -> B: masked factor.
    let x_masked = x + &r_a;
    tb.record(Party::ClientA, Party::ClientB, "x_masked", &x_masked, vec![], Some(id_r_a));

    // B -> A: masked factor and masked partial product.
    let y_masked = y + &r_b;
    tb.record(Party::ClientB, Party::ClientA, "y_masked", &y_masked, vec![], Some(id_r_b));
    let v_masked = x_masked.dot(&y.t()) + &t_b;
    tb.record(Party::ClientB, Party::ClientA, "v_masked", &v_masked, vec![], Some(id_t_b));

    // A unmasks the designated output and reveals it.
    let product = &v_masked - &r_a.dot(&y_masked.t()) + &t_a;
    tb.record(Party::ClientA, Party::ClientB, "product", &product, vec![], None);

    Ok(SmcExchange {
        product,
        transcript: PartyTranscript { messages: tb.messages, mask_ids: tb.mask_ids },
        evidence: ProtocolEvidence { r_a, r_b, t_a, t_b, x_masked, y_masked, v_masked },
    })
}
