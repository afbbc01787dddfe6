//! Subcommand execution. Outputs are written to a staging directory inside
//! the output directory and moved into place only when every stage succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mipdc_core::classification::AccuracyRow;
use mipdc_core::connectivity::FlowMap;
use mipdc_core::discriminability::{Edge, FeatureSpec};
use mipdc_core::grid::Band;
use mipdc_core::pipeline::{connectivity_track, power_track, Exclusion, PowerScale};
use mipdc_core::preprocess::preprocess_recording;
use mipdc_core::signal_io::{
    format_value, load_recording, save_matrix, save_recording, segment_epochs, ClassLabel, EpochSet, Recording,
    SignalFormat,
};
use mipdc_core::stats::median;
use mipdc_core::synth::{check_stability, make_two_class_scenario, GroundTruth, Scenario, ScenarioConfig};
use serde::Serialize;
use tempfile::TempDir;

use crate::config::{RawConfig, Settings};
use crate::error::{Failure, Stage};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Power,
    Connectivity,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Power => "power",
            Command::Connectivity => "connectivity",
            Command::All => "all",
        }
    }
}

struct Staging {
    out: PathBuf,
    created_out: bool,
    dir: TempDir,
    files: Vec<String>,
}

impl Staging {
    fn new(out: &Path) -> Result<Self, Failure> {
        let created_out = !out.exists();
        fs::create_dir_all(out).map_err(|e| Failure::io("output", format!("cannot create {}: {e}", out.display())))?;
        let dir = tempfile::Builder::new()
            .prefix(".mipdc-staging-")
            .tempdir_in(out)
            .map_err(|e| Failure::io("output", format!("cannot write into {}: {e}", out.display())))?;
        Ok(Staging {
            out: out.to_path_buf(),
            created_out,
            dir,
            files: Vec::new(),
        })
    }

    /// Registers `name` and returns its staging path.
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.path().join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Failure::io("output", format!("{}: {e}", path.display())))
    }

    fn commit(self) -> Result<Vec<PathBuf>, Failure> {
        let mut done = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let from = self.dir.path().join(name);
            let to = self.out.join(name);
            fs::rename(&from, &to).map_err(|e| Failure::io("output", format!("{}: {e}", to.display())))?;
            done.push(to);
        }
        Ok(done)
    }

    fn abort(self) {
        let Staging {
            out, created_out, dir, ..
        } = self;
        drop(dir);
        if created_out {
            let _ = fs::remove_dir(&out);
        }
    }
}

#[derive(Serialize)]
struct Report {
    command: &'static str,
    seed: u64,
    /// Every setting that influences the results.
    config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synth: Option<SynthReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<DataReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power: Option<PowerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    connectivity: Option<ConnectivityReport>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SynthReport {
    channels: Vec<String>,
    sample_rate_hz: f64,
    epochs_per_class: usize,
    spectral_radius: [f64; 2],
    class1_edges: Vec<[String; 2]>,
    class2_edges: Vec<[String; 2]>,
}

#[derive(Serialize)]
struct DataReport {
    source: String,
    channels: Vec<String>,
    sample_rate_hz: f64,
    n_samples: usize,
    epoch_seconds: f64,
    epochs_class1: usize,
    epochs_class2: usize,
    filtered_power: bool,
    filtered_connectivity: bool,
}

#[derive(Serialize)]
struct PowerReport {
    sample_rate_hz: f64,
    scale: PowerScale,
    burg_orders: Vec<usize>,
    rsq_max: f64,
    feature: FeatureSpec,
    /// Accuracy table row: mean, SD, channel, band.
    accuracy: AccuracyRow,
}

#[derive(Serialize)]
struct OrderSummary {
    min: usize,
    median: f64,
    max: usize,
    per_epoch: Vec<usize>,
}

#[derive(Serialize)]
struct BandReport {
    name: String,
    band: Band,
    alpha_level: f64,
    n_tests: usize,
    expected_false_edges: f64,
    n_edges: usize,
    edges: Vec<Edge>,
    top_outflow: [String; 2],
    flows: [FlowMap; 2],
}

#[derive(Serialize)]
struct ConnectivityReport {
    sample_rate_hz: f64,
    mvar_orders: Option<OrderSummary>,
    n_excluded: usize,
    excluded: Vec<Exclusion>,
    bands: Vec<BandReport>,
}

/// Runs `command` and returns the paths written.
pub fn execute(command: Command, raw: &RawConfig, settings: &Settings) -> Result<Vec<PathBuf>, Failure> {
    let mut staging = Staging::new(&settings.out_dir)?;
    match produce(command, raw, settings, &mut staging) {
        Ok(()) => staging.commit(),
        Err(e) => {
            staging.abort();
            Err(e)
        }
    }
}

fn produce(command: Command, raw: &RawConfig, settings: &Settings, staging: &mut Staging) -> Result<(), Failure> {
    let mut report = Report {
        command: command.name(),
        seed: settings.seed,
        config: raw.reproducible(),
        synth: None,
        data: None,
        power: None,
        connectivity: None,
        files: Vec::new(),
    };

    let needs_data = command != Command::Synth;
    let writes_synth = command == Command::Synth || (command == Command::All && settings.input.signal.is_none());
    let scenario = if writes_synth || (needs_data && settings.input.signal.is_none()) {
        Some(make_two_class_scenario(&settings.scenario).stage("synth")?)
    } else {
        None
    };
    if writes_synth {
        let s = scenario.as_ref().expect("scenario generated above");
        report.synth = Some(write_synth(s, &settings.scenario, staging)?);
    }

    if needs_data {
        let (recording, data) = load_data(settings, scenario.as_ref())?;
        report.data = Some(data);
        let freqs = settings.grid.freqs();
        let filtered = |yes: bool| -> Result<EpochSet, Failure> {
            let rec = if yes && settings.preprocess.enabled {
                preprocess_recording(&recording, &settings.preprocess).stage("preprocess")?
            } else {
                recording.clone()
            };
            segment_epochs(&rec, epoch_seconds(settings)).stage("epoch")
        };
        if matches!(command, Command::Power | Command::All) {
            let epochs = filtered(true)?;
            report.power = Some(run_power(&epochs, &freqs, settings, staging)?);
        }
        if matches!(command, Command::Connectivity | Command::All) {
            let epochs = filtered(settings.preprocess_connectivity)?;
            report.connectivity = Some(run_connectivity(&epochs, &freqs, settings, staging)?);
        }
    }

    report.files = staging.files.clone();
    report.files.push("report.json".into());
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::contract("report", e.to_string()))?;
    staging.write("report.json", &(text + "\n"))
}

fn write_synth(s: &Scenario, config: &ScenarioConfig, staging: &mut Staging) -> Result<SynthReport, Failure> {
    #[derive(Serialize)]
    struct Truth<'a> {
        label: ClassLabel,
        spectral_radius: f64,
        #[serde(flatten)]
        truth: &'a GroundTruth,
    }
    #[derive(Serialize)]
    struct TruthFile<'a> {
        scenario: &'a ScenarioConfig,
        classes: Vec<Truth<'a>>,
    }

    let radius = [check_stability(&s.truths[0].model), check_stability(&s.truths[1].model)];
    let signal = staging.path("synth.csv");
    staging.files.push("synth.events.csv".into());
    save_recording(&s.recording, &signal, SignalFormat::Csv).stage("synth")?;
    let truth = TruthFile {
        scenario: config,
        classes: ClassLabel::BOTH
            .iter()
            .zip(&s.truths)
            .zip(radius)
            .map(|((&label, truth), spectral_radius)| Truth {
                label,
                spectral_radius,
                truth,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&truth).map_err(|e| Failure::contract("synth", e.to_string()))?;
    staging.write("ground_truth.json", &(text + "\n"))?;

    let names = config.channel_names();
    let pairs = |t: &GroundTruth| {
        t.coupling_edges
            .iter()
            .map(|&(f, to)| [names[f].clone(), names[to].clone()])
            .collect()
    };
    Ok(SynthReport {
        channels: names.clone(),
        sample_rate_hz: config.sample_rate_hz,
        epochs_per_class: config.epochs_per_class,
        spectral_radius: radius,
        class1_edges: pairs(&s.truths[0]),
        class2_edges: pairs(&s.truths[1]),
    })
}

fn epoch_seconds(settings: &Settings) -> f64 {
    match settings.input.signal {
        Some(_) => settings.input.epoch_seconds,
        None => settings.scenario.epoch_seconds,
    }
}

fn load_data(settings: &Settings, scenario: Option<&Scenario>) -> Result<(Recording, DataReport), Failure> {
    let input = &settings.input;
    let (recording, source) = match (&input.signal, scenario) {
        (Some(path), _) => {
            let format = input.format.unwrap_or_else(|| SignalFormat::from_path(path));
            let mut rec = load_recording(path, format).stage("load")?;
            if format == SignalFormat::Csv {
                rec = rec.with_sample_rate(input.sample_rate_hz).stage("load")?;
            }
            (rec, path.display().to_string())
        }
        (None, Some(s)) => (s.recording.clone(), "synthetic".to_string()),
        (None, None) => return Err(Failure::contract("load", "no input signal and no synthetic scenario")),
    };
    let labels: Vec<ClassLabel> = recording.trial_marks().iter().filter_map(|m| m.label).collect();
    let count = |c| labels.iter().filter(|&&l| l == c).count();
    let data = DataReport {
        source,
        channels: recording.channel_names().to_vec(),
        sample_rate_hz: recording.sample_rate_hz(),
        n_samples: recording.n_samples(),
        epoch_seconds: epoch_seconds(settings),
        epochs_class1: count(ClassLabel::Class1),
        epochs_class2: count(ClassLabel::Class2),
        filtered_power: settings.preprocess.enabled,
        filtered_connectivity: settings.preprocess.enabled && settings.preprocess_connectivity,
    };
    Ok((recording, data))
}

fn run_power(
    epochs: &EpochSet,
    freqs: &[f64],
    settings: &Settings,
    staging: &mut Staging,
) -> Result<PowerReport, Failure> {
    let track = power_track(epochs, freqs, &settings.burg, settings.power_scale, &settings.cv).stage("power")?;
    let cols: Vec<String> = freqs.iter().map(|&f| format_value(f)).collect();
    let csv = staging.path("rsq_map.csv");
    save_matrix(&csv, &track.rsq.values, &track.rsq.channel_names, &cols).stage("power")?;
    staging.write("rsq_map.svg", &svg::rsquared_heatmap(&track.rsq))?;
    let accuracy = track.cv.to_row(&track.feature.channel_name, &track.feature.band);
    Ok(PowerReport {
        sample_rate_hz: epochs.sample_rate_hz,
        scale: settings.power_scale,
        burg_orders: track.burg_orders,
        rsq_max: track.rsq.max(),
        feature: track.feature,
        accuracy,
    })
}

fn run_connectivity(
    epochs: &EpochSet,
    freqs: &[f64],
    settings: &Settings,
    staging: &mut Staging,
) -> Result<ConnectivityReport, Failure> {
    let track = connectivity_track(epochs, freqs, &settings.mvar, &settings.bands, settings.alpha_level)
        .stage("connectivity")?;
    let mut bands = Vec::with_capacity(track.bands.len());
    for b in track.bands {
        let name = &b.name;
        b.significance
            .write_csv(&staging.path(&format!("edges_{name}.csv")))
            .stage("connectivity")?;
        for flow in &b.flows {
            let class = format!("class{}", flow.class_label.code());
            flow.write_csv(&staging.path(&format!("flows_{name}_{class}.csv")))
                .stage("connectivity")?;
        }
        staging.write(
            &format!("edges_{name}.svg"),
            &svg::edge_diagram(&b.significance, &epochs.channel_names, name),
        )?;
        staging.write(&format!("flows_{name}.svg"), &svg::flow_bars(&b.flows, name))?;
        let top = |f: &FlowMap| {
            let k = (0..f.outflow.len())
                .max_by(|&i, &j| f.outflow[i].total_cmp(&f.outflow[j]).then(j.cmp(&i)))
                .unwrap_or(0);
            f.channels.get(k).cloned().unwrap_or_default()
        };
        bands.push(BandReport {
            name: b.name.clone(),
            band: b.significance.band,
            alpha_level: b.significance.alpha_level,
            n_tests: b.significance.n_tests,
            expected_false_edges: b.significance.expected_false_edges(),
            n_edges: b.significance.edges.len(),
            top_outflow: [top(&b.flows[0]), top(&b.flows[1])],
            edges: b.significance.edges,
            flows: b.flows,
        });
    }
    let mvar_orders = (!track.orders.is_empty()).then(|| {
        let mut v: Vec<f64> = track.orders.iter().map(|&o| o as f64).collect();
        OrderSummary {
            min: *track.orders.iter().min().expect("non-empty"),
            median: median(&mut v),
            max: *track.orders.iter().max().expect("non-empty"),
            per_epoch: track.orders.clone(),
        }
    });
    Ok(ConnectivityReport {
        sample_rate_hz: epochs.sample_rate_hz,
        mvar_orders,
        n_excluded: track.excluded.len(),
        excluded: track.excluded,
        bands,
    })
}
