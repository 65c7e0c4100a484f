//! Fuzz target bodies. Each accepts arbitrary input, must never panic, and
//! checks that whatever it accepts survives a re-encode.

use hlfsr_core::config::RunConfig;
use hlfsr_core::datagen::Manifest;
use hlfsr_core::tensor::Checkpoint;

pub fn checkpoint_decode(data: &[u8]) {
    let Ok(ck) = Checkpoint::<f64>::from_bytes(data) else {
        // The narrower element type must reject the same inputs.
        assert!(Checkpoint::<f32>::from_bytes(data).is_err());
        return;
    };
    let bytes = ck.to_bytes().expect("decoded checkpoint re-encodes");
    let again = Checkpoint::<f64>::from_bytes(&bytes).expect("re-encoded checkpoint decodes");
    assert_eq!(again.metadata, ck.metadata);
    assert_eq!(again.params.len(), ck.params.len());
    for (a, b) in again.params.iter().zip(ck.params.iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.frozen, b.frozen);
        assert_eq!(a.value.shape(), b.value.shape());
        let same = a
            .value
            .data()
            .iter()
            .zip(b.value.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same, "parameter {} changed on re-encode", a.name);
    }
}

pub fn run_config_parse(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::parse(text) else { return };
    let toml = cfg.to_toml().expect("valid config serialises");
    let again = RunConfig::parse(&toml).expect("serialised config parses");
    assert_eq!(again.hash().ok(), cfg.hash().ok());
}

pub fn manifest_parse(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = Manifest::parse(text) else { return };
    let toml = m.to_toml().expect("valid manifest serialises");
    let again = Manifest::parse(&toml).expect("serialised manifest parses");
    assert_eq!(again.scenes.len(), m.scenes.len());
}
