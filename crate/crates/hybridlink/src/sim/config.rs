//! Scenario config files: flat `key = value` text with dotted sections.
//! Every scenario field is addressable; unknown keys are errors.

use super::{Modulation, ReceiverMode, Scenario, Scheme};
use crate::channel::{load_taps, PlcChannelSpec};
use crate::error::{Error, Result};
use crate::noise::{CycloParams, GmParams, NoiseModel, Region};
use crate::ofdm::OfdmConfig;
use std::collections::BTreeMap;
use std::path::Path;

/// Parse a config file into a Scenario, starting from defaults.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Parse config text into a Scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", ln + 1)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", ln + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", ln + 1)));
        }
    }
    build_scenario(map)
}

fn take(map: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
    map.remove(key)
}

fn parse_val<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_val::<f64>(key, s.trim()))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got '{v}'"))),
    }
}

fn apply_ofdm(map: &mut BTreeMap<String, String>, prefix: &str, cfg: &mut OfdmConfig) -> Result<()> {
    let mut active_lo: Option<usize> = None;
    let mut active_hi: Option<usize> = None;
    if let Some(v) = take(map, &format!("{prefix}.fft_size")) {
        cfg.fft_size = parse_val(&format!("{prefix}.fft_size"), &v)?;
    }
    if let Some(v) = take(map, &format!("{prefix}.cp_len")) {
        cfg.cp_len = parse_val(&format!("{prefix}.cp_len"), &v)?;
    }
    if let Some(v) = take(map, &format!("{prefix}.active_lo")) {
        active_lo = Some(parse_val(&format!("{prefix}.active_lo"), &v)?);
    }
    if let Some(v) = take(map, &format!("{prefix}.active_hi")) {
        active_hi = Some(parse_val(&format!("{prefix}.active_hi"), &v)?);
    }
    if let Some(v) = take(map, &format!("{prefix}.sample_rate")) {
        cfg.sample_rate = parse_val(&format!("{prefix}.sample_rate"), &v)?;
    }
    if active_lo.is_some() || active_hi.is_some() {
        let lo = active_lo.unwrap_or(*cfg.active.first().unwrap());
        let hi = active_hi.unwrap_or(*cfg.active.last().unwrap());
        if lo > hi {
            return Err(Error::Config(format!(
                "{prefix}: active_lo {lo} exceeds active_hi {hi}"
            )));
        }
        cfg.active = (lo..=hi).collect();
    }
    Ok(())
}

fn apply_noise(
    map: &mut BTreeMap<String, String>,
    prefix: &str,
    sample_rate: f64,
    current: &NoiseModel,
) -> Result<(NoiseModel, Option<usize>)> {
    let model_key = format!("{prefix}.model");
    let model_name = take(map, &model_key);
    let ac_hz: f64 = match take(map, &format!("{prefix}.ac_hz")) {
        Some(v) => parse_val(&format!("{prefix}.ac_hz"), &v)?,
        None => 60.0,
    };
    let phase = match take(map, &format!("{prefix}.phase")) {
        None => None,
        Some(v) if v == "random" => None,
        Some(v) => Some(parse_val::<usize>(&format!("{prefix}.phase"), &v)?),
    };
    // Collect region.<i>.<field> keys.
    let region_prefix = format!("{prefix}.region.");
    let region_keys: Vec<String> = map
        .keys()
        .filter(|k| k.starts_with(&region_prefix))
        .cloned()
        .collect();
    let mut regions: BTreeMap<usize, Region> = BTreeMap::new();
    for key in &region_keys {
        let rest = &key[region_prefix.len()..];
        let (idx_str, field) = rest
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("{key}: expected {prefix}.region.<i>.<field>")))?;
        let idx: usize = parse_val(key, idx_str)?;
        let value = take(map, key).unwrap();
        let entry = regions.entry(idx).or_insert(Region {
            start_frac: f64::NAN,
            multiplier: 1.0,
            taps: vec![1.0],
        });
        match field {
            "start" => entry.start_frac = parse_val(key, &value)?,
            "mult" => entry.multiplier = parse_val(key, &value)?,
            "taps" => entry.taps = parse_list(key, &value)?,
            other => {
                return Err(Error::Config(format!(
                    "{key}: unknown region field '{other}'"
                )))
            }
        }
    }
    let gm_weights = take(map, &format!("{prefix}.gm.weights"));
    let gm_vars = take(map, &format!("{prefix}.gm.vars"));

    let name = match model_name {
        Some(n) => n,
        None => {
            // No model key: allow parameter-only tweaks of the default model.
            if !regions.is_empty() || gm_weights.is_some() || gm_vars.is_some() {
                match current {
                    NoiseModel::Cyclostationary(_) if !regions.is_empty() => "cyclo".to_string(),
                    NoiseModel::GaussianMixture(_) if gm_weights.is_some() || gm_vars.is_some() => {
                        "gm".to_string()
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "{prefix}: parameters given for a model other than the default; \
                             set {model_key}"
                        )))
                    }
                }
            } else {
                return Ok((current.clone(), phase));
            }
        }
    };

    let model = match name.as_str() {
        "awgn" | "white" => NoiseModel::White { power: 1.0 },
        "gm" => {
            let weights = match &gm_weights {
                Some(v) => parse_list(&format!("{prefix}.gm.weights"), v)?,
                None => vec![0.9, 0.1],
            };
            let vars = match &gm_vars {
                Some(v) => parse_list(&format!("{prefix}.gm.vars"), v)?,
                None => vec![1.0, 100.0],
            };
            NoiseModel::GaussianMixture(GmParams {
                weights,
                variances: vars,
            })
        }
        "cyclo" => {
            if regions.is_empty() {
                NoiseModel::Cyclostationary(CycloParams::default_impulsive(
                    sample_rate,
                    ac_hz,
                    1.0,
                ))
            } else {
                let mut list = Vec::new();
                for (want, (idx, r)) in regions.into_iter().enumerate() {
                    if idx != want {
                        return Err(Error::Config(format!(
                            "{prefix}.region indices must be contiguous from 0, missing {want}"
                        )));
                    }
                    if r.start_frac.is_nan() {
                        return Err(Error::Config(format!(
                            "{prefix}.region.{idx}.start is required"
                        )));
                    }
                    list.push(r);
                }
                NoiseModel::Cyclostationary(CycloParams {
                    period_samples: (sample_rate / (2.0 * ac_hz)).floor() as usize,
                    regions: list,
                    base_power: 1.0,
                })
            }
        }
        other => {
            return Err(Error::Config(format!(
                "{model_key}: unknown noise model '{other}'"
            )))
        }
    };
    model.validate()?;
    Ok((model, phase))
}

fn build_scenario(mut map: BTreeMap<String, String>) -> Result<Scenario> {
    let mut sc = Scenario::default();

    if let Some(v) = take(&mut map, "seed") {
        sc.seed = parse_val("seed", &v)?;
    }
    if let Some(v) = take(&mut map, "scheme") {
        sc.scheme = Scheme::parse(&v)?;
    }
    if let Some(v) = take(&mut map, "sweep") {
        sc.sweep = parse_list("sweep", &v)?;
    }
    if let Some(v) = take(&mut map, "wl_ebno_db") {
        sc.wl_ebno_db = parse_val("wl_ebno_db", &v)?;
    }
    if let Some(v) = take(&mut map, "fec") {
        sc.fec = parse_bool("fec", &v)?;
    }
    if let Some(v) = take(&mut map, "receiver") {
        sc.receiver = match v.as_str() {
            "genie" => ReceiverMode::Genie,
            "realistic" => ReceiverMode::Realistic,
            other => {
                return Err(Error::Config(format!(
                    "receiver: expected genie or realistic, got '{other}'"
                )))
            }
        };
    }
    if let Some(v) = take(&mut map, "stop.min_errors") {
        sc.stop.min_errors = parse_val("stop.min_errors", &v)?;
    }
    if let Some(v) = take(&mut map, "stop.max_bits") {
        sc.stop.max_bits = parse_val("stop.max_bits", &v)?;
    }
    if let Some(v) = take(&mut map, "frame.data_symbols") {
        sc.data_symbols = parse_val("frame.data_symbols", &v)?;
    }
    if let Some(v) = take(&mut map, "fec.interleaver_rows") {
        sc.interleaver_rows = parse_val("fec.interleaver_rows", &v)?;
    }

    // Shared OFDM keys first, then per-link overrides.
    apply_ofdm(&mut map, "ofdm", &mut sc.ofdm_plc)?;
    sc.ofdm_wl = sc.ofdm_plc.clone();
    apply_ofdm(&mut map, "plc.ofdm", &mut sc.ofdm_plc)?;
    apply_ofdm(&mut map, "wl.ofdm", &mut sc.ofdm_wl)?;
    sc.ofdm_plc.symbols_per_frame = sc.data_symbols;
    sc.ofdm_wl.symbols_per_frame = sc.data_symbols;

    if let Some(v) = take(&mut map, "plc.modulation") {
        sc.plc_modulation = Modulation::parse(&v)?;
    }
    if let Some(v) = take(&mut map, "wl.modulation") {
        sc.wl_modulation = Modulation::parse(&v)?;
    }
    if let Some(v) = take(&mut map, "plc.channel") {
        sc.plc_channel = if let Some(path) = v.strip_prefix("file:") {
            PlcChannelSpec::Taps(load_taps(Path::new(path))?)
        } else {
            PlcChannelSpec::Preset(v)
        };
    }
    if let Some(v) = take(&mut map, "wl.channel.taps") {
        sc.wl_taps = parse_val("wl.channel.taps", &v)?;
        if sc.wl_taps == 0 {
            return Err(Error::Config("wl.channel.taps must be positive".into()));
        }
    }

    let (plc_noise, plc_phase) = apply_noise(
        &mut map,
        "plc.noise",
        sc.ofdm_plc.sample_rate,
        &sc.plc_noise,
    )?;
    sc.plc_noise = plc_noise;
    sc.plc_phase = plc_phase;
    let (wl_noise, wl_phase) =
        apply_noise(&mut map, "wl.noise", sc.ofdm_wl.sample_rate, &sc.wl_noise)?;
    sc.wl_noise = wl_noise;
    sc.wl_phase = wl_phase;

    if let Some(v) = take(&mut map, "wl.cfo_hz") {
        sc.wl_cfo_hz = parse_val("wl.cfo_hz", &v)?;
    }
    if let Some(v) = take(&mut map, "sync.n_syncp") {
        sc.n_syncp = parse_val("sync.n_syncp", &v)?;
    }
    if let Some(v) = take(&mut map, "sync.stage1_threshold") {
        sc.sync.stage1_threshold = parse_val("sync.stage1_threshold", &v)?;
    }
    if let Some(v) = take(&mut map, "sync.stage2_threshold") {
        sc.sync.stage2_threshold = parse_val("sync.stage2_threshold", &v)?;
    }
    if let Some(v) = take(&mut map, "sync.search_range") {
        sc.sync.search_range = parse_val("sync.search_range", &v)?;
    }

    if !map.is_empty() {
        let unknown: Vec<String> = map.keys().cloned().collect();
        return Err(Error::Config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }
    sc.validate()?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let sc = parse_scenario("sweep = 0, 2, 4\nscheme = psdc\n").unwrap();
        assert_eq!(sc.sweep, vec![0.0, 2.0, 4.0]);
        assert_eq!(sc.scheme, Scheme::Psdc);
        assert_eq!(sc.wl_ebno_db, 3.0);
    }

    #[test]
    fn unknown_key_is_error() {
        let err = parse_scenario("sweep = 1\nbogus.key = 3\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("bogus.key"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_error() {
        assert!(parse_scenario("sweep = 1\nsweep = 2\n").is_err());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let sc = parse_scenario("# a comment\n\nsweep = 5\n").unwrap();
        assert_eq!(sc.sweep, vec![5.0]);
    }

    #[test]
    fn custom_regions() {
        let text = "\
sweep = 1
plc.noise.model = cyclo
plc.noise.region.0.start = 0
plc.noise.region.0.mult = 1
plc.noise.region.1.start = 0.5
plc.noise.region.1.mult = 25
plc.noise.region.1.taps = 0.8, 0.4
";
        let sc = parse_scenario(text).unwrap();
        match &sc.plc_noise {
            NoiseModel::Cyclostationary(p) => {
                assert_eq!(p.regions.len(), 2);
                assert_eq!(p.regions[1].multiplier, 25.0);
                assert_eq!(p.regions[1].taps, vec![0.8, 0.4]);
            }
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn gm_parameters() {
        let text = "sweep = 1\nwl.noise.model = gm\nwl.noise.gm.weights = 0.8, 0.2\nwl.noise.gm.vars = 1, 50\n";
        let sc = parse_scenario(text).unwrap();
        match &sc.wl_noise {
            NoiseModel::GaussianMixture(p) => {
                assert_eq!(p.weights, vec![0.8, 0.2]);
                assert_eq!(p.variances, vec![1.0, 50.0]);
            }
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn per_link_ofdm_override() {
        let text = "sweep = 1\nofdm.cp_len = 22\nwl.ofdm.cp_len = 16\n";
        let sc = parse_scenario(text).unwrap();
        assert_eq!(sc.ofdm_plc.cp_len, 22);
        assert_eq!(sc.ofdm_wl.cp_len, 16);
    }

    #[test]
    fn bad_scheme_combination_rejected() {
        let text = "sweep = 1\nscheme = dssc\n"; // coherent default modulation
        assert!(parse_scenario(text).is_err());
    }

    #[test]
    fn mismatched_bit_rates_rejected() {
        // FDDM on one link only changes the bits per frame.
        let text = "sweep = 1\nplc.modulation = dbpsk_fddm\n";
        assert!(parse_scenario(text).is_err());
    }
}
