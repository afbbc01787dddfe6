//! Run configuration, layered as built-in defaults, then the INI file, then
//! `--set` overrides, then dedicated flags.
//!
//! Every setting has a flat `section.key` name. Keys in the general part of
//! the file (before any section header) have no prefix.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, ParseOption};
use mipdc_core::classification::CvConfig;
use mipdc_core::grid::{Band, FreqGrid};
use mipdc_core::pipeline::{BurgSettings, MvarSettings, PowerScale};
use mipdc_core::preprocess::PreprocessConfig;
use mipdc_core::signal_io::{ClassLabel, SignalFormat};
use mipdc_core::synth::{CouplingEdge, PlantedRhythm, ScenarioConfig};

use crate::error::Failure;

/// A documented setting and its default.
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, default: &'static str, doc: &'static str) -> Key {
    Key { name, default, doc }
}

/// Every recognised key except the free-form `bands.<name>` entries.
pub const KEYS: &[Key] = &[
    key("seed", "1", "seed of the synthetic scenario and of the CV splits"),
    key("jobs", "0", "worker threads; 0 uses every core"),
    key("input.signal", "", "signal file; empty analyses the synthetic scenario"),
    key("input.format", "auto", "csv, binary, or auto (from the extension)"),
    key("input.sample_rate", "1200", "sample rate of CSV input in Hz"),
    key("input.epoch_seconds", "1", "epoch length in seconds"),
    key("preprocess.enabled", "true", "run the filtering front end"),
    key(
        "preprocess.connectivity",
        "false",
        "also filter the data entering the connectivity track",
    ),
    key("preprocess.bandpass.low", "5", "band-pass low edge in Hz"),
    key("preprocess.bandpass.high", "50", "band-pass high edge in Hz"),
    key("preprocess.bandpass.order", "4", "Butterworth prototype order"),
    key("preprocess.notch.center", "50", "notch center in Hz, or none"),
    key("preprocess.notch.q", "35", "notch quality factor"),
    key(
        "preprocess.decimate.factor",
        "1",
        "keep every n-th sample after filtering",
    ),
    key("grid.low", "8", "lowest analysis frequency in Hz"),
    key("grid.high", "30", "highest analysis frequency in Hz"),
    key("grid.step", "1", "frequency spacing in Hz"),
    key("burg.order", "12", "Burg AR order for every channel"),
    key(
        "burg.auto",
        "false",
        "pick per-channel orders from reflection coefficients",
    ),
    key("burg.scan", "20", "deepest order scanned when burg.auto is set"),
    key("burg.threshold", "0.1", "reflection magnitude that still counts"),
    key("power.scale", "db", "scale of the PSD entering r²: db or linear"),
    key("mvar.max_order", "20", "largest MVAR order considered by AIC"),
    key("mvar.order", "auto", "fixed MVAR order, or auto for AIC"),
    key("svm.c", "512", "SVM penalty C"),
    key("svm.gamma", "0.002", "RBF kernel width γ"),
    key("svm.repeats", "100", "random train/test splits"),
    key("svm.split", "0.5", "training fraction of each class"),
    key("screen.alpha", "0.001", "rank-sum significance level"),
    key("synth.channels", "16", "channel count"),
    key("synth.order", "2", "model order"),
    key("synth.sample_rate", "1200", "sample rate in Hz"),
    key("synth.epoch_seconds", "1", "epoch length in seconds"),
    key("synth.epochs_per_class", "30", "epochs per class"),
    key(
        "synth.base_freqs",
        "10,20,12,24",
        "per-channel resonances in Hz, used cyclically",
    ),
    key(
        "synth.base_radius",
        "0",
        "pole radius of the resonances; 0 gives white channels",
    ),
    key("synth.noise_std", "1", "innovation standard deviation"),
    key("synth.shared_edges", "", "edges present in both classes"),
    key("synth.class1_edges", "CZ>C4:1:0.4", "edges present only in class 1"),
    key("synth.class2_edges", "", "edges present only in class 2"),
    key("synth.burn_in", "auto", "discarded warm-up samples, or auto"),
    key(
        "synth.rhythm.channel",
        "P4",
        "channel carrying the class rhythm, or none",
    ),
    key("synth.rhythm.freq", "24", "rhythm frequency in Hz"),
    key("synth.rhythm.amplitude", "2", "rhythm amplitude"),
    key(
        "synth.rhythm.bandwidth",
        "0",
        "rhythm bandwidth in Hz; 0 gives a sinusoid",
    ),
    key("synth.rhythm.class", "1", "class carrying the rhythm: 1 or 2"),
    key("output.dir", "mipdc-out", "output directory"),
];

/// Default analysis bands.
pub const DEFAULT_BANDS: &[(&str, &str)] = &[("alpha", "8-12"), ("beta", "13-30")];

/// Keys that only affect where and how fast a run happens, not its results.
/// They are left out of the configuration embedded in reports.
pub const RUNTIME_KEYS: &[&str] = &["jobs", "output.dir"];

/// Resolved `key → value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

fn is_band_key(name: &str) -> bool {
    name.strip_prefix("bands.").is_some_and(|b| !b.is_empty())
}

fn known(name: &str) -> bool {
    is_band_key(name) || KEYS.iter().any(|k| k.name == name)
}

impl Default for RawConfig {
    fn default() -> Self {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .map(|k| (k.name.to_string(), k.default.to_string()))
            .collect();
        for (name, range) in DEFAULT_BANDS {
            values.insert(format!("bands.{name}"), range.to_string());
        }
        RawConfig { values }
    }
}

impl RawConfig {
    /// Overlays an INI file. A `[bands]` section replaces the default bands.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), Failure> {
        let opt = ParseOption {
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini = Ini::load_from_file_opt(path, opt).map_err(|e| match e {
            ini::Error::Io(err) => Failure::io("config", format!("cannot read {}: {err}", path.display())),
            ini::Error::Parse(err) => Failure::contract("config", format!("{}: {err}", path.display())),
        })?;
        if ini.section(Some("bands")).is_some() {
            self.values.retain(|k, _| !is_band_key(k));
        }
        for (section, props) in &ini {
            for (k, v) in props.iter() {
                let name = match section {
                    Some(s) => format!("{}.{}", s.trim(), k.trim()),
                    None => k.trim().to_string(),
                };
                self.set(&name, v)?;
            }
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), Failure> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            Failure::contract(
                "config",
                format!("override {assignment:?} is not of the form key=value"),
            )
        })?;
        self.set(k.trim(), v)
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), Failure> {
        if !known(name) {
            return Err(Failure::contract("config", format!("unknown config key {name:?}")));
        }
        self.values.insert(name.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or("")
    }

    /// Entries that determine the results of a run.
    pub fn reproducible(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| !RUNTIME_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    fn parse<T: FromStr>(&self, name: &str) -> Result<T, Failure> {
        let raw = self.get(name);
        raw.parse()
            .map_err(|_| Failure::contract("config", format!("key {name}: cannot interpret {raw:?}")))
    }

    fn positive(&self, name: &str) -> Result<f64, Failure> {
        let v: f64 = self.parse(name)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Failure::contract(
                "config",
                format!("key {name} must be positive, got {v}"),
            ))
        }
    }

    fn flag(&self, name: &str) -> Result<bool, Failure> {
        match self.get(name).to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(Failure::contract(
                "config",
                format!("key {name}: {other:?} is not a boolean"),
            )),
        }
    }

    fn optional<T: FromStr>(&self, name: &str, off: &[&str]) -> Result<Option<T>, Failure> {
        if off.contains(&self.get(name).to_ascii_lowercase().as_str()) {
            Ok(None)
        } else {
            self.parse(name).map(Some)
        }
    }
}

#[derive(Debug, Clone)]
pub struct InputSettings {
    pub signal: Option<PathBuf>,
    pub format: Option<SignalFormat>,
    pub sample_rate_hz: f64,
    pub epoch_seconds: f64,
}

/// Typed, validated view of a [`RawConfig`].
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub jobs: usize,
    pub input: InputSettings,
    pub preprocess: PreprocessConfig,
    /// Whether the connectivity track sees filtered data too.
    pub preprocess_connectivity: bool,
    pub grid: FreqGrid,
    pub bands: Vec<(String, Band)>,
    pub burg: BurgSettings,
    pub power_scale: PowerScale,
    pub mvar: MvarSettings,
    pub cv: CvConfig,
    pub alpha_level: f64,
    pub scenario: ScenarioConfig,
    pub out_dir: PathBuf,
}

impl Settings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Failure> {
        let seed: u64 = raw.parse("seed")?;
        let contract = |msg: String| Failure::contract("config", msg);

        let signal = raw.get("input.signal");
        let input = InputSettings {
            signal: (!signal.is_empty()).then(|| PathBuf::from(signal)),
            format: match raw.get("input.format") {
                "auto" => None,
                f => Some(f.parse().map_err(|e: mipdc_core::Error| contract(e.to_string()))?),
            },
            sample_rate_hz: raw.positive("input.sample_rate")?,
            epoch_seconds: raw.positive("input.epoch_seconds")?,
        };

        let preprocess = PreprocessConfig {
            enabled: raw.flag("preprocess.enabled")?,
            bandpass_low_hz: raw.positive("preprocess.bandpass.low")?,
            bandpass_high_hz: raw.positive("preprocess.bandpass.high")?,
            bandpass_order: raw.parse("preprocess.bandpass.order")?,
            notch_center_hz: raw.optional("preprocess.notch.center", &["none", "off", ""])?,
            notch_q: raw.positive("preprocess.notch.q")?,
            decimate_factor: raw.parse("preprocess.decimate.factor")?,
        };
        if preprocess.bandpass_low_hz >= preprocess.bandpass_high_hz {
            return Err(contract("band-pass low edge must lie below the high edge".into()));
        }

        let grid = FreqGrid::new(raw.parse("grid.low")?, raw.parse("grid.high")?, raw.parse("grid.step")?)
            .map_err(|e| contract(e.to_string()))?;

        let mut bands = Vec::new();
        for (k, v) in &raw.values {
            let Some(name) = k.strip_prefix("bands.") else { continue };
            if ["off", "none"].contains(&v.to_ascii_lowercase().as_str()) {
                continue;
            }
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(contract(format!(
                    "band name {name:?} may only use letters, digits, '_' and '-'"
                )));
            }
            let band = parse_band(v).ok_or_else(|| contract(format!("band {name}: expected low-high, got {v:?}")))?;
            if band.low_hz < grid.low_hz - 1e-9 || band.high_hz > grid.high_hz + 1e-9 {
                return Err(contract(format!("band {name} ({band}) leaves the frequency grid")));
            }
            bands.push((name.to_string(), band));
        }
        bands.sort_by(|a, b| a.1.low_hz.total_cmp(&b.1.low_hz).then_with(|| a.0.cmp(&b.0)));

        let burg = BurgSettings {
            order: raw.parse("burg.order")?,
            auto_select: raw.flag("burg.auto")?,
            scan_order: raw.parse("burg.scan")?,
            threshold: raw.positive("burg.threshold")?,
        };
        if burg.order == 0 || burg.scan_order < 2 || burg.threshold >= 1.0 {
            return Err(contract(
                "burg.order >= 1, burg.scan >= 2 and burg.threshold < 1 are required".into(),
            ));
        }
        let power_scale = raw.get("power.scale").parse().map_err(contract)?;

        let mvar = MvarSettings {
            max_order: raw.parse("mvar.max_order")?,
            fixed_order: raw.optional("mvar.order", &["auto"])?,
        };
        if mvar.max_order == 0 || mvar.fixed_order == Some(0) {
            return Err(contract("MVAR orders must be at least 1".into()));
        }

        let cv = CvConfig {
            c_penalty: raw.positive("svm.c")?,
            gamma: raw.positive("svm.gamma")?,
            n_repeats: raw.parse("svm.repeats")?,
            split_fraction: raw.positive("svm.split")?,
            seed,
        };
        if cv.n_repeats == 0 || cv.split_fraction >= 1.0 {
            return Err(contract(
                "svm.repeats must be >= 1 and svm.split must lie in (0, 1)".into(),
            ));
        }

        let alpha_level = raw.positive("screen.alpha")?;
        if alpha_level > 1.0 {
            return Err(contract(format!("screen.alpha must lie in (0, 1], got {alpha_level}")));
        }

        Ok(Settings {
            seed,
            jobs: raw.parse("jobs")?,
            input,
            preprocess_connectivity: raw.flag("preprocess.connectivity")?,
            preprocess,
            grid,
            bands,
            burg,
            power_scale,
            mvar,
            cv,
            alpha_level,
            scenario: scenario(raw, seed)?,
            out_dir: PathBuf::from(raw.get("output.dir")),
        })
    }
}

fn parse_band(text: &str) -> Option<Band> {
    let (lo, hi) = text.split_once('-')?;
    Band::new(lo.trim().parse().ok()?, hi.trim().parse().ok()?).ok()
}

fn scenario(raw: &RawConfig, seed: u64) -> Result<ScenarioConfig, Failure> {
    let contract = |msg: String| Failure::contract("config", msg);
    let mut config = ScenarioConfig {
        n_channels: raw.parse("synth.channels")?,
        order: raw.parse("synth.order")?,
        sample_rate_hz: raw.positive("synth.sample_rate")?,
        epoch_seconds: raw.positive("synth.epoch_seconds")?,
        epochs_per_class: raw.parse("synth.epochs_per_class")?,
        base_freqs_hz: raw
            .get("synth.base_freqs")
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                contract(format!(
                    "key synth.base_freqs: cannot interpret {:?}",
                    raw.get("synth.base_freqs")
                ))
            })?,
        base_radius: raw.parse("synth.base_radius")?,
        noise_std: raw.positive("synth.noise_std")?,
        shared_edges: Vec::new(),
        class1_edges: Vec::new(),
        class2_edges: Vec::new(),
        rhythm: None,
        burn_in: raw.optional("synth.burn_in", &["auto"])?,
        seed,
    };
    let names = config.channel_names();
    let channel = |text: &str, key: &str| -> Result<usize, Failure> {
        let t = text.trim();
        names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(t))
            .or_else(|| t.parse().ok().filter(|&i: &usize| i < names.len()))
            .ok_or_else(|| contract(format!("key {key}: unknown channel {t:?}")))
    };
    let edges = |key: &str| -> Result<Vec<CouplingEdge>, Failure> {
        raw.get(key)
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|spec| {
                let bad = || contract(format!("key {key}: expected FROM>TO:LAG:WEIGHT, got {spec:?}"));
                let (pair, rest) = spec.split_once(':').ok_or_else(bad)?;
                let (lag, weight) = rest.split_once(':').ok_or_else(bad)?;
                let (from, to) = pair.split_once('>').ok_or_else(bad)?;
                Ok(CouplingEdge {
                    from: channel(from, key)?,
                    to: channel(to, key)?,
                    lag: lag.trim().parse().map_err(|_| bad())?,
                    weight: weight.trim().parse().map_err(|_| bad())?,
                })
            })
            .collect()
    };
    config.shared_edges = edges("synth.shared_edges")?;
    config.class1_edges = edges("synth.class1_edges")?;
    config.class2_edges = edges("synth.class2_edges")?;
    let rhythm_channel = raw.get("synth.rhythm.channel");
    if !["none", "off", ""].contains(&rhythm_channel.to_ascii_lowercase().as_str()) {
        let code: u8 = raw.parse("synth.rhythm.class")?;
        config.rhythm = Some(PlantedRhythm {
            channel: channel(rhythm_channel, "synth.rhythm.channel")?,
            freq_hz: raw.positive("synth.rhythm.freq")?,
            amplitude: raw.parse("synth.rhythm.amplitude")?,
            bandwidth_hz: raw.parse("synth.rhythm.bandwidth")?,
            class: ClassLabel::from_code(code)
                .ok_or_else(|| contract(format!("key synth.rhythm.class must be 1 or 2, got {code}")))?,
        });
    }
    Ok(config)
}

/// Default configuration as an annotated INI document.
pub fn default_ini() -> String {
    let mut out = String::new();
    let mut current = "";
    for k in KEYS {
        let (section, name) = k.name.split_once('.').unwrap_or(("", k.name));
        if section != current {
            out.push_str(&format!("\n[{section}]\n"));
            current = section;
        }
        out.push_str(&format!("; {}\n{name} = {}\n", k.doc, k.default));
        if k.name == "grid.step" {
            out.push_str("\n[bands]\n; name = low-high in Hz\n");
            for (b, r) in DEFAULT_BANDS {
                out.push_str(&format!("{b} = {r}\n"));
            }
            current = "bands";
        }
    }
    out.trim_start().to_string()
}
