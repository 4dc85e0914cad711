#![no_main]

use axl_core::config::{ExperimentKind, ScenarioConfig};
use axl_core::mac::MacInstance;
use axl_core::network::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ScenarioConfig::from_toml_str(text) else { return };
    // Keep each input cheap.
    let (_, tx) = cfg.tx_antennas.bounds();
    if cfg.subcarriers > 64 || cfg.num_su + cfg.num_pu > 16 || tx > 8 || cfg.rx_antennas > 8 || cfg.pu_tx_antennas > 8 {
        return;
    }
    match cfg.kind {
        ExperimentKind::StaticMac => {
            let _ = MacInstance::from_config(&cfg);
        }
        _ => {
            let _ = Scenario::build(&cfg);
        }
    }
});
