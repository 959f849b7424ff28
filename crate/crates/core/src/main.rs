//! Command-line interface: dataset generation, training, sampling, and
//! evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (files, formats,
//! inconsistent inputs), 3 numerical failure (eigensolver non-convergence,
//! non-finite loss).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use molfun::checkpoint::Checkpoint;
use molfun::config;
use molfun::metrics::{self, GeneratedSample};
use molfun::molgraph::{
    self, is_valid, read_molecule_file, write_molecule_file, AtomAlphabet, FileEntry, WriteRecord,
    ALPHABET_QM9,
};
use molfun::trainer::{self, TrainError};

#[derive(Parser)]
#[command(name = "molfun", version, about = "Functional denoising diffusion for small molecular graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic, valency-valid molecule dataset
    GenData {
        /// Number of molecules
        #[arg(long)]
        count: usize,
        /// Largest molecule size
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=38))]
        max_atoms: u64,
        /// Alphabet as sym:valence pairs
        #[arg(long, default_value = ALPHABET_QM9)]
        alphabet: String,
        #[arg(long)]
        seed: u64,
        /// Output molecule file
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a molecule file and write a checkpoint
    Train {
        /// Run configuration (section.key = value lines)
        #[arg(long)]
        config: PathBuf,
        /// Training molecule file
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_checkpoint: PathBuf,
        /// Per-epoch CSV loss log
        #[arg(long)]
        log: PathBuf,
    },
    /// Sample molecules from a checkpoint using training-set topologies
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Molecule file providing source topologies
        #[arg(long)]
        topologies: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Output molecule file; invalid decodes become #invalid lines
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a generated molecule file against training data
    Eval {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        train_data: PathBuf,
        /// Metrics JSON output
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Eigen(_) | TrainError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { count, max_atoms, alphabet, seed, out } => {
            if count < 1 {
                return Err(CliError::Data("count must be >= 1".into()));
            }
            let alphabet = AtomAlphabet::parse_spec(&alphabet).map_err(data_err)?;
            let molecules =
                molgraph::generate_synthetic_dataset(count, max_atoms as usize, &alphabet, seed);
            let records: Vec<WriteRecord> = molecules.iter().map(WriteRecord::Valid).collect();
            write_molecule_file(&out, &alphabet, &records).map_err(data_err)?;
            println!("wrote {} molecules to {}", molecules.len(), out.display());
            Ok(())
        }
        Command::Train { config, data, out_checkpoint, log } => {
            let cfg = config::load_config(&config).map_err(data_err)?;
            let file = read_molecule_file(&data).map_err(data_err)?;
            if file.alphabet != cfg.alphabet {
                return Err(CliError::Data(format!(
                    "alphabet mismatch: data file has {:?}, config has {:?}",
                    file.alphabet.spec_string(),
                    cfg.alphabet.spec_string()
                )));
            }
            let dataset: Vec<_> = file.molecules().into_iter().cloned().collect();
            let (ckpt, logs) = trainer::train(&dataset, &cfg).map_err(train_err)?;
            ckpt.save(&out_checkpoint).map_err(data_err)?;
            std::fs::write(&log, trainer::render_log_csv(&logs))
                .map_err(|e| CliError::Data(format!("{}: {e}", log.display())))?;
            if let Some(last) = logs.last() {
                println!(
                    "trained {} epochs on {} molecules (final L_m = {:.6})",
                    logs.len(),
                    dataset.len(),
                    last.l_m
                );
            } else {
                println!("wrote initialization checkpoint (0 epochs)");
            }
            Ok(())
        }
        Command::Sample { checkpoint, topologies, count, seed, out } => {
            let ckpt = Checkpoint::load(&checkpoint).map_err(data_err)?;
            let alphabet = ckpt.alphabet().map_err(data_err)?;
            let file = read_molecule_file(&topologies).map_err(data_err)?;
            if file.alphabet != alphabet {
                return Err(CliError::Data(format!(
                    "alphabet mismatch: topology file has {:?}, checkpoint has {:?}",
                    file.alphabet.spec_string(),
                    alphabet.spec_string()
                )));
            }
            let sources: Vec<_> = file.molecules().into_iter().cloned().collect();
            let generated = trainer::sample(&ckpt, &sources, count, seed).map_err(train_err)?;
            let records: Vec<WriteRecord> = generated
                .iter()
                .map(|g| {
                    if is_valid(g, &alphabet) {
                        WriteRecord::Valid(g)
                    } else {
                        WriteRecord::Invalid(g)
                    }
                })
                .collect();
            write_molecule_file(&out, &alphabet, &records).map_err(data_err)?;
            let n_valid = records.iter().filter(|r| matches!(r, WriteRecord::Valid(_))).count();
            println!("sampled {count} molecules ({n_valid} valid) to {}", out.display());
            Ok(())
        }
        Command::Eval { generated, train_data, out } => {
            let gen_file = read_molecule_file(&generated).map_err(data_err)?;
            let train_file = read_molecule_file(&train_data).map_err(data_err)?;
            if gen_file.alphabet != train_file.alphabet {
                return Err(CliError::Data(format!(
                    "alphabet mismatch: generated file has {:?}, training file has {:?}",
                    gen_file.alphabet.spec_string(),
                    train_file.alphabet.spec_string()
                )));
            }
            let doc = evaluate(&gen_file.alphabet, &gen_file.entries, &train_file.entries);
            let json =
                serde_json::to_string_pretty(&doc).expect("metrics serialization cannot fail");
            std::fs::write(&out, &json)
                .map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
            println!("{json}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct MetricsDoc {
    validity: f64,
    uniqueness: f64,
    novelty: f64,
    vun: f64,
    stats_distance: metrics::GraphStatsDistance,
    n_generated: usize,
    n_valid: usize,
}

fn evaluate(alphabet: &AtomAlphabet, generated: &[FileEntry], training: &[FileEntry]) -> MetricsDoc {
    let samples: Vec<GeneratedSample> = generated
        .iter()
        .map(|e| match e {
            FileEntry::Molecule(g) => GeneratedSample::Decoded(g.clone()),
            FileEntry::InvalidDecode(_) => GeneratedSample::Rejected,
        })
        .collect();
    let train_mols: Vec<&molgraph::MolecularGraph> = training
        .iter()
        .filter_map(|e| match e {
            FileEntry::Molecule(g) => Some(g),
            FileEntry::InvalidDecode(_) => None,
        })
        .collect();
    let hashes = molgraph::training_hash_set(&train_mols);
    let m = metrics::compute_metrics(&samples, alphabet, &hashes);

    let valid_gen: Vec<&molgraph::MolecularGraph> = samples
        .iter()
        .filter_map(|s| match s {
            GeneratedSample::Decoded(g) if is_valid(g, alphabet) => Some(g),
            _ => None,
        })
        .collect();
    // no valid molecules on either side: report maximal distance instead of
    // failing the whole evaluation
    let stats_distance = if valid_gen.is_empty() || train_mols.is_empty() {
        metrics::GraphStatsDistance {
            atom_tv: 1.0,
            bond_tv: 1.0,
            degree_tv: 1.0,
            nodes_tv: 1.0,
            mean: 1.0,
        }
    } else {
        metrics::graph_stats_distance(&valid_gen, &train_mols)
    };

    MetricsDoc {
        validity: m.validity,
        uniqueness: m.uniqueness,
        novelty: m.novelty,
        vun: m.vun,
        stats_distance,
        n_generated: m.n_generated,
        n_valid: m.n_valid,
    }
}
