use crate::channel::{ChannelConfig, ChannelKind, SensingConfig};
use crate::error::Result;
use crate::models::e2e_check::check_pipeline;
use crate::models::{LinkConfig, Mode};
use crate::nn::gradcheck::{check_all_layers, GradCheckReport};

/// Maximum relative error every check must stay under.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Each layer kernel, then the full pipeline in both modes over both channel
/// kinds (n_c = 4, batch of 2, channel frozen, dropout off, f64).
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut reports = check_all_layers(GRADCHECK_TOLERANCE, seed)?;
    for kind in [ChannelKind::Awgn, ChannelKind::Rayleigh] {
        let link = LinkConfig {
            channel: ChannelConfig { kind, snr_db: 3.0 },
            sensing: SensingConfig::default(),
        };
        for mode in [Mode::Joint, Mode::SensingOnly] {
            let mut r = check_pipeline(mode, 4, 2, &link, GRADCHECK_TOLERANCE, seed)?;
            r.name = format!("{} over {kind}", r.name);
            reports.push(r);
        }
    }
    Ok(reports)
}
