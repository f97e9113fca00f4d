//! Command-line surface: train / embed / eval / verify-theorem / energy /
//! cka / grad-probe with a key=value config file and deterministic seeding.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgcl::analytics::{cka, energy_binary_gnn, energy_full_precision, energy_spikegcl, sparsity};
use sgcl::contrastive::ContrastConfig;
use sgcl::encoder::{concat_pool, encode_all, partition_features};
use sgcl::error::{Result, SgclError};
use sgcl::eval::{accuracy, make_split, mean_std, train_probe, PROBE_EPOCHS, PROBE_L2, PROBE_LR};
use sgcl::graph::{load_graph, sym_norm_coeffs, CsrGraph};
use sgcl::io::{load_checkpoint, load_embedding, save_checkpoint, save_embedding};
use sgcl::nd::{DenseMatrix, OptimConfig};
use sgcl::neuron::{NeuronConfig, NeuronKind, ResetMode};
use sgcl::synth::random_bounded_degree;
use sgcl::theory::{verify_bound, OracleGcn};
use sgcl::trainer::{grad_norm_probe, train, DetachMode, TrainConfig};

#[derive(Parser)]
#[command(name = "sgcl", about = "Spiking graph contrastive learning engine")]
struct Cli {
    /// key=value config file; flags take precedence over file entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; falls back to config file, then SGCL_SEED, then 0
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Thread cap; the engine is single-threaded, 1 guarantees
    /// bit-reproducibility
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an encoder and write checkpoint, embeddings and history
    Train(TrainArgs),
    /// Produce embeddings from an existing checkpoint
    Embed(EmbedArgs),
    /// Linear-probe evaluation of an embedding file
    Eval(EvalArgs),
    /// Sweep the firing-rate approximation bound on random graphs
    VerifyTheorem(VerifyArgs),
    /// Theoretical energy accounting
    Energy(EnergyArgs),
    /// CKA similarity between feature groups and spike groups
    Cka(CkaArgs),
    /// Per-step gradient norms with and without block isolation
    GradProbe(GradProbeArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Number of time steps T
    #[arg(long = "T")]
    t_steps: Option<usize>,
    /// Embedding width per step k
    #[arg(long)]
    hidden: Option<usize>,
    /// Encoder depth L
    #[arg(long)]
    depth: Option<usize>,
    /// Neuron kind: if | lif | plif
    #[arg(long)]
    neuron: Option<String>,
    /// Firing threshold
    #[arg(long)]
    vth: Option<f32>,
    /// Reset mechanism: to_zero | by_subtraction
    #[arg(long)]
    reset: Option<String>,
    /// Membrane time constant (initial value for plif)
    #[arg(long)]
    tau: Option<f32>,
    /// Surrogate sharpness alpha
    #[arg(long)]
    alpha: Option<f32>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory with edges.csv / features.csv [/ labels.csv]
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    margin: Option<f32>,
    #[arg(long)]
    drop_p: Option<f64>,
    /// Stop-gradient placement: state | encoder_output
    #[arg(long)]
    detach: Option<String>,
    #[arg(long)]
    patience: Option<usize>,
    /// Output directory for model.sgcl, z.sgcb, history.csv
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "z.sgcb")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding file (SGCB)
    #[arg(long)]
    embeddings: PathBuf,
    /// labels.csv with one integer class per node
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// train,val,test fractions
    #[arg(long, default_value = "0.1,0.1,0.8")]
    ratios: String,
    #[arg(long, default_value_t = true)]
    stratified: bool,
    /// Optional per-trial CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    dmax: usize,
    #[arg(long = "L", default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Comma-separated list of simulation lengths
    #[arg(long = "T", default_value = "8,16,32,64")]
    t_list: String,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1.0)]
    vth: f32,
    /// Only by_subtraction is admissible; to_zero is refused
    #[arg(long, default_value = "by_subtraction")]
    reset: String,
    /// Optional CSV output path (stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    /// Recompute the spiking-model energy from a training history CSV
    #[arg(long)]
    from_history: Option<PathBuf>,
    /// Explicit per-step spike counts (comma-separated), alternative input
    #[arg(long)]
    spikes: Option<String>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long = "T")]
    t_steps: usize,
    /// Undirected edge count for the baseline comparisons
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 2)]
    layers: usize,
}

#[derive(Args)]
struct CkaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Write the full T x T matrix as CSV here
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct GradProbeArgs {
    /// Dataset directory; a random graph is synthesized when omitted
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Disable block isolation: single loss at the final step, full BPTT
    #[arg(long)]
    no_isolate: bool,
    /// Synthetic graph size when --data is omitted
    #[arg(long, default_value_t = 60)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat key=value config file; unknown keys rejected.
struct ConfigFile {
    entries: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "T",
    "hidden",
    "depth",
    "neuron",
    "vth",
    "reset",
    "tau",
    "alpha",
    "epochs",
    "block_size",
    "lr",
    "margin",
    "drop_p",
    "detach",
    "patience",
    "seed",
    "data",
];

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| SgclError::Parse {
                    line: i + 1,
                    msg: "expected key=value".into(),
                })?;
                let key = key.trim();
                if !KNOWN_KEYS.contains(&key) {
                    return Err(SgclError::Config(format!("unknown config key '{key}'")));
                }
                entries.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigFile { entries })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                SgclError::Config(format!("config key '{key}' has invalid value '{v}'"))
            }),
        }
    }
}

fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(cfg.get::<T>(key)?.unwrap_or(default))
}

fn resolve_seed(flag: Option<u64>, cfg: &ConfigFile) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.get::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var("SGCL_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| SgclError::Config(format!("SGCL_SEED is not an integer: '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn parse_neuron_kind(s: &str) -> Result<NeuronKind> {
    match s {
        "if" => Ok(NeuronKind::If),
        "lif" => Ok(NeuronKind::Lif),
        "plif" => Ok(NeuronKind::Plif),
        _ => Err(SgclError::Config(format!(
            "neuron must be if|lif|plif, got '{s}'"
        ))),
    }
}

fn parse_reset(s: &str) -> Result<ResetMode> {
    match s {
        "to_zero" => Ok(ResetMode::ToZero),
        "by_subtraction" => Ok(ResetMode::BySubtraction),
        _ => Err(SgclError::Config(format!(
            "reset must be to_zero|by_subtraction, got '{s}'"
        ))),
    }
}

fn parse_detach(s: &str) -> Result<DetachMode> {
    match s {
        "state" => Ok(DetachMode::State),
        "encoder_output" => Ok(DetachMode::EncoderOutput),
        _ => Err(SgclError::Config(format!(
            "detach must be state|encoder_output, got '{s}'"
        ))),
    }
}

fn build_train_config(
    args: &TrainArgs,
    cfg: &ConfigFile,
    seed: u64,
) -> Result<(TrainConfig, PathBuf)> {
    let defaults = TrainConfig::default();
    let neuron_defaults = NeuronConfig::default();
    let neuron_kind = match &args.model.neuron {
        Some(s) => parse_neuron_kind(s)?,
        None => match cfg.entries.get("neuron") {
            Some(s) => parse_neuron_kind(s)?,
            None => neuron_defaults.kind,
        },
    };
    let reset = match &args.model.reset {
        Some(s) => parse_reset(s)?,
        None => match cfg.entries.get("reset") {
            Some(s) => parse_reset(s)?,
            None => neuron_defaults.reset_mode,
        },
    };
    let detach = match &args.detach {
        Some(s) => parse_detach(s)?,
        None => match cfg.entries.get("detach") {
            Some(s) => parse_detach(s)?,
            None => defaults.detach_mode,
        },
    };
    let neuron = NeuronConfig {
        kind: neuron_kind,
        v_threshold: resolve(args.model.vth, cfg, "vth", neuron_defaults.v_threshold)?,
        reset_mode: reset,
        tau_m: resolve(args.model.tau, cfg, "tau", neuron_defaults.tau_m)?,
        surrogate_alpha: resolve(args.model.alpha, cfg, "alpha", neuron_defaults.surrogate_alpha)?,
        ..neuron_defaults
    };
    let train_cfg = TrainConfig {
        t_steps: resolve(args.model.t_steps, cfg, "T", defaults.t_steps)?,
        block_size: resolve(args.block_size, cfg, "block_size", defaults.block_size)?,
        epochs: resolve(args.epochs, cfg, "epochs", defaults.epochs)?,
        optim: OptimConfig {
            learning_rate: resolve(args.lr, cfg, "lr", defaults.optim.learning_rate)?,
            ..defaults.optim
        },
        contrast: ContrastConfig {
            margin: resolve(args.margin, cfg, "margin", defaults.contrast.margin)?,
            edge_drop_p: resolve(args.drop_p, cfg, "drop_p", defaults.contrast.edge_drop_p)?,
            seed,
        },
        neuron,
        depth: resolve(args.model.depth, cfg, "depth", defaults.depth)?,
        hidden: resolve(args.model.hidden, cfg, "hidden", defaults.hidden)?,
        early_stop_patience: resolve(args.patience, cfg, "patience", defaults.early_stop_patience)?,
        seed,
        detach_mode: detach,
    };
    let data = match &args.data {
        Some(p) => p.clone(),
        None => PathBuf::from(
            cfg.entries
                .get("data")
                .ok_or_else(|| SgclError::Config("missing --data (or config 'data')".into()))?,
        ),
    };
    Ok((train_cfg, data))
}

fn cmd_train(args: &TrainArgs, cfg: &ConfigFile, seed: u64) -> Result<()> {
    let (train_cfg, data) = build_train_config(args, cfg, seed)?;
    train_cfg.validate()?;
    let g = load_graph(&data)?;
    g.validate()?;
    let (encoder, predictor, history) = train(&g, &train_cfg)?;
    std::fs::create_dir_all(&args.out)?;
    save_checkpoint(&args.out.join("model.sgcl"), &encoder, &predictor)?;
    let coeffs = sym_norm_coeffs(&g);
    let spikes = encode_all(&g, &coeffs, &encoder)?;
    let z = concat_pool(&spikes);
    save_embedding(&args.out.join("z.sgcb"), &z, train_cfg.t_steps, train_cfg.hidden)?;
    let mut hist_file = std::fs::File::create(args.out.join("history.csv"))?;
    history.write_csv(&mut hist_file)?;
    let final_loss = history.records.last().map_or(0.0, |r| r.loss);
    println!(
        "{{\"final_loss\": {final_loss}, \"sparsity\": {:.6}, \"epochs_run\": {}}}",
        sparsity(&spikes),
        history.epochs_run
    );
    Ok(())
}

fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    let g = load_graph(&args.data)?;
    let (encoder, _) = load_checkpoint(&args.checkpoint)?;
    let coeffs = sym_norm_coeffs(&g);
    let spikes = encode_all(&g, &coeffs, &encoder)?;
    let z = concat_pool(&spikes);
    save_embedding(&args.out, &z, encoder.t_steps(), encoder.hidden)?;
    println!(
        "{{\"nodes\": {}, \"width\": {}, \"sparsity\": {:.6}}}",
        z.rows,
        z.cols,
        sparsity(&spikes)
    );
    Ok(())
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(SgclError::Config(format!(
            "ratios must be three comma-separated fractions, got '{s}'"
        )));
    }
    let mut v = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| SgclError::Config(format!("bad ratio '{p}'")))?;
    }
    Ok((v[0], v[1], v[2]))
}

fn read_labels_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse().map_err(|e| SgclError::Parse {
            line: i + 1,
            msg: format!("bad label: {e}"),
        })?);
    }
    Ok(labels)
}

fn cmd_eval(args: &EvalArgs, seed: u64) -> Result<()> {
    let (z, _, _) = load_embedding(&args.embeddings)?;
    let labels = read_labels_file(&args.labels)?;
    if labels.len() != z.rows {
        return Err(SgclError::Dimension(format!(
            "{} labels for {} embedded nodes",
            labels.len(),
            z.rows
        )));
    }
    let ratios = parse_ratios(&args.ratios)?;
    let mut accs = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let split = make_split(&labels, ratios, args.stratified, seed + trial as u64)?;
        let model = train_probe(&z, &labels, &split, PROBE_EPOCHS, PROBE_LR, PROBE_L2)?;
        accs.push(accuracy(&model, &z, &labels, &split.test_idx));
    }
    let (mean, std) = mean_std(&accs);
    if let Some(csv) = &args.csv {
        let mut f = std::fs::File::create(csv)?;
        writeln!(f, "trial,test_acc")?;
        for (i, a) in accs.iter().enumerate() {
            writeln!(f, "{i},{a}")?;
        }
    }
    println!(
        "{{\"mean_acc\": {mean:.6}, \"std_acc\": {std:.6}, \"trials\": {}}}",
        args.trials
    );
    Ok(())
}

fn cmd_verify_theorem(args: &VerifyArgs, seed: u64) -> Result<()> {
    if parse_reset(&args.reset)? != ResetMode::BySubtraction {
        return Err(SgclError::Usage(
            "verify-theorem requires reset by_subtraction; the approximation \
             identity does not hold under reset to_zero"
                .into(),
        ));
    }
    let t_list: Vec<usize> = args
        .t_list
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| SgclError::Config(format!("bad T value '{s}'")))
        })
        .collect::<Result<_>>()?;
    for &t in &t_list {
        if args.d % t != 0 {
            return Err(SgclError::Config(format!(
                "d={} must be divisible by T={t} for the construction",
                args.d
            )));
        }
    }
    let mut rows = Vec::new();
    let mut all_pass = true;
    for s in 0..args.seeds {
        let graph_seed = seed.wrapping_add(s);
        let g = random_bounded_degree(args.n, args.dmax, args.d, graph_seed)?;
        let mut rng =
            <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(graph_seed ^ 0xABCD);
        let oracle = OracleGcn::random(args.d, args.k, args.depth, 0.4, &mut rng);
        for &t in &t_list {
            let report = verify_bound(&g, &oracle, t, args.vth)?;
            let pass = report.all_pass();
            all_pass &= pass;
            rows.push(format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                graph_seed,
                t,
                args.n,
                report.degree_bound,
                report.nu,
                report.kappa,
                report.max_error(),
                report.bound,
                pass
            ));
        }
    }
    let header = "seed,T,N,D,nu,kappa,max_error,bound,pass";
    let body = rows.join("\n");
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{header}\n{body}\n"))?;
    } else {
        println!("{header}\n{body}");
    }
    if !all_pass {
        for row in rows.iter().filter(|r| r.ends_with("false")) {
            eprintln!("bound violated: {row}");
        }
        return Err(SgclError::Verification(
            "approximation bound violated".into(),
        ));
    }
    Ok(())
}

fn history_spike_total(path: &Path) -> Result<u64> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| SgclError::Parse {
        line: 1,
        msg: "empty history".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let epoch_col = cols.iter().position(|&c| c == "epoch").ok_or_else(|| {
        SgclError::Parse { line: 1, msg: "history missing 'epoch' column".into() }
    })?;
    let spike_col = cols.iter().position(|&c| c == "spikes").ok_or_else(|| {
        SgclError::Parse { line: 1, msg: "history missing 'spikes' column".into() }
    })?;
    // sum spikes over the final epoch only: one pass over the data
    let mut per_epoch: BTreeMap<u64, u64> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<u64> {
            s.parse().map_err(|e| SgclError::Parse {
                line: i + 2,
                msg: format!("bad history value: {e}"),
            })
        };
        let epoch = parse(fields[epoch_col])?;
        let spikes = parse(fields[spike_col])?;
        *per_epoch.entry(epoch).or_insert(0) += spikes;
    }
    per_epoch
        .values()
        .next_back()
        .copied()
        .ok_or_else(|| SgclError::Data("history has no records".into()))
}

fn cmd_energy(args: &EnergyArgs) -> Result<()> {
    // E depends on the spike total only, so fold whatever granularity the
    // input provides into the first step's count.
    let mut per_step = vec![0u64; args.t_steps];
    match (&args.from_history, &args.spikes) {
        (Some(path), None) => per_step[0] = history_spike_total(path)?,
        (None, Some(list)) => {
            let counts: Vec<u64> = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| SgclError::Config(format!("bad spike count '{s}'")))
                })
                .collect::<Result<_>>()?;
            if counts.len() != args.t_steps {
                return Err(SgclError::Config(format!(
                    "{} spike counts for T={}",
                    counts.len(),
                    args.t_steps
                )));
            }
            per_step = counts;
        }
        _ => {
            return Err(SgclError::Usage(
                "energy needs exactly one of --from-history or --spikes".into(),
            ))
        }
    }
    let report = energy_spikegcl(args.n, args.d, args.t_steps, &per_step)?;
    let mut out = serde_json::json!({
        "spikegcl": report,
    });
    if let Some(edges) = args.edges {
        out["binary_gnn_mj"] =
            serde_json::json!(energy_binary_gnn(args.n, edges, args.d, args.layers));
        out["full_precision_mj"] = serde_json::json!(energy_full_precision(
            args.n,
            edges,
            args.d,
            args.d,
            args.layers
        ));
    }
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}

/// T x T matrix of cka(X^t, S^t') between feature groups and spike groups.
fn cka_matrix(g: &CsrGraph, encoder: &sgcl::encoder::EncoderParams) -> Result<Vec<Vec<f64>>> {
    let coeffs = sym_norm_coeffs(g);
    let t_steps = encoder.t_steps();
    let groups = partition_features(&g.features, t_steps)?;
    let spikes = encode_all(g, &coeffs, encoder)?;
    let spike_dense: Vec<DenseMatrix> = spikes.steps.iter().map(|s| s.to_dense()).collect();
    let mut m = vec![vec![0.0f64; t_steps]; t_steps];
    for (i, x) in groups.groups.iter().enumerate() {
        for (j, s) in spike_dense.iter().enumerate() {
            m[i][j] = cka(x, s)?;
        }
    }
    Ok(m)
}

fn cmd_cka(args: &CkaArgs) -> Result<()> {
    let g = load_graph(&args.data)?;
    let (encoder, _) = load_checkpoint(&args.checkpoint)?;
    let m = cka_matrix(&g, &encoder)?;
    let t = m.len();
    if let Some(path) = &args.matrix {
        let mut f = std::fs::File::create(path)?;
        for row in &m {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "{}", line.join(","))?;
        }
    }
    let mut diag_dominant = 0usize;
    let mut diag_sum = 0.0f64;
    let mut off_sum = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if row[i] == max {
            diag_dominant += 1;
        }
        diag_sum += row[i];
        off_sum += row.iter().sum::<f64>() - row[i];
    }
    println!(
        "{{\"t_steps\": {t}, \"diag_mean\": {:.6}, \"offdiag_mean\": {:.6}, \"diag_dominant_rows\": {diag_dominant}}}",
        diag_sum / t as f64,
        if t > 1 { off_sum / (t * (t - 1)) as f64 } else { 0.0 },
    );
    Ok(())
}

fn cmd_grad_probe(args: &GradProbeArgs, cfg: &ConfigFile, seed: u64) -> Result<()> {
    let g = match &args.data {
        Some(dir) => load_graph(dir)?,
        None => random_bounded_degree(args.n, 8, 32, seed)?,
    };
    let defaults = TrainConfig::default();
    let neuron_defaults = NeuronConfig::default();
    let kind = match &args.model.neuron {
        Some(s) => parse_neuron_kind(s)?,
        None => NeuronKind::If,
    };
    let train_cfg = TrainConfig {
        t_steps: resolve(args.model.t_steps, cfg, "T", 30)?,
        neuron: NeuronConfig {
            kind,
            v_threshold: resolve(args.model.vth, cfg, "vth", 0.2)?,
            reset_mode: match &args.model.reset {
                Some(s) => parse_reset(s)?,
                None => neuron_defaults.reset_mode,
            },
            tau_m: resolve(args.model.tau, cfg, "tau", neuron_defaults.tau_m)?,
            surrogate_alpha: resolve(
                args.model.alpha,
                cfg,
                "alpha",
                neuron_defaults.surrogate_alpha,
            )?,
            ..neuron_defaults
        },
        depth: resolve(args.model.depth, cfg, "depth", defaults.depth)?,
        hidden: resolve(args.model.hidden, cfg, "hidden", defaults.hidden)?,
        seed,
        ..defaults
    };
    let norms = grad_norm_probe(&g, &train_cfg, !args.no_isolate)?;
    let mut text = String::from("step,grad_norm\n");
    for (t, n) in norms.iter().enumerate() {
        text.push_str(&format!("{},{}\n", t + 1, n));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(SgclError::Config("threads must be >= 1".into()));
        }
    }
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &cfg)?;
    match &cli.command {
        Command::Train(args) => cmd_train(args, &cfg, seed),
        Command::Embed(args) => cmd_embed(args),
        Command::Eval(args) => cmd_eval(args, seed),
        Command::VerifyTheorem(args) => cmd_verify_theorem(args, seed),
        Command::Energy(args) => cmd_energy(args),
        Command::Cka(args) => cmd_cka(args),
        Command::GradProbe(args) => cmd_grad_probe(args, &cfg, seed),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
