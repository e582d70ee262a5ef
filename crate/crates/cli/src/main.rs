use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cmpswhe::batch::{decrypt_packed, encrypt_packed};
use cmpswhe::cipher::{encrypt_private_with, sample_eta};
use cmpswhe::keys::KeyFile;
use cmpswhe::modmath::pow2;
use cmpswhe::*;
use cmpswhe_cli::demo::{run_suite, Pipeline};
use cmpswhe_cli::errorlab::{run_lab, Sweep};
use cmpswhe_cli::{bench, residue};
use cmpswhe_vision::Frame;
use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Parser)]
#[command(name = "cmpswhe", version, about = "Somewhat-homomorphic encryption over CRT residues")]
struct Cli {
    /// Private key file.
    #[arg(long, global = true)]
    key: Option<PathBuf>,
    /// Public key file (the public half of --key is used when omitted).
    #[arg(long, global = true)]
    public_key: Option<PathBuf>,
    #[arg(long, global = true, default_value = "nearest")]
    round: Rounding,
    /// Seed for every random draw; system entropy when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for pixel and window kernels.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive a key pair from a 128-bit user key and a timestamp.
    Keygen(KeygenArgs),
    /// Encrypt an integer (private key if given, else public key).
    Encrypt {
        value: BigInt,
        #[arg(long)]
        out: PathBuf,
        /// Explicit randomization term (private encryption only).
        #[arg(long)]
        eta: Option<BigUint>,
    },
    /// Decrypt a ciphertext file and print the plaintext.
    Decrypt {
        file: PathBuf,
        /// Print the exact rational before rounding.
        #[arg(long)]
        raw: bool,
        /// Treat the ciphertext as packed and print its lanes.
        #[arg(long)]
        packing_key: Option<PathBuf>,
    },
    /// Evaluate an expression over ciphertext files.
    Eval {
        expr: String,
        /// NAME=FILE binding; repeatable.
        #[arg(long = "var", value_parser = parse_binding)]
        vars: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan CRT lanes and optionally encrypt a packed batch.
    Pack {
        #[arg(long)]
        lanes: usize,
        #[arg(long)]
        lane_bound: u64,
        /// Number of terms the packed computation sums.
        #[arg(long, default_value_t = 1)]
        terms: u64,
        /// Order of the packed computation.
        #[arg(long, default_value_t = 1)]
        order: u32,
        /// Comma-separated lane values to encrypt (needs --key).
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        packing_key_out: Option<PathBuf>,
    },
    /// Time the packed frame-difference kernel across batch sizes (CSV).
    Bench {
        #[arg(long, default_value = "fgdiff")]
        pipeline: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,12,16,20")]
        batches: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error sweeps over amplification, depth and multiplier imbalance (CSV).
    Errorlab {
        #[arg(long, default_value = "all")]
        sweep: String,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a pipeline on the bundled inputs and compare with plaintext.
    Demo {
        pipeline: Pipeline,
        #[arg(long, default_value_t = 3)]
        cases: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Encrypt an image and write one modulus row as a PGM.
    ResidueImage {
        /// Input PGM; a 256-level gradient when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        row: usize,
        /// Slot to draw; the real slot when omitted.
        #[arg(long)]
        slot: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct KeygenArgs {
    /// 32 hex digits.
    #[arg(long, required_unless_present = "demo")]
    user_key: Option<String>,
    /// Seconds since the epoch; the current time when omitted.
    #[arg(long)]
    timestamp: Option<u64>,
    /// Write the three-modulus demonstration key instead.
    #[arg(long)]
    demo: bool,
    #[arg(long, default_value_t = 64)]
    pool: usize,
    #[arg(long, default_value_t = 20)]
    moduli: usize,
    #[arg(long, default_value_t = 64)]
    slots: usize,
    #[arg(long, default_value_t = 100)]
    a_bits: u32,
    #[arg(long, default_value_t = 62)]
    eta_bits: u32,
    #[arg(long, default_value_t = 61)]
    start_bits: u32,
    #[arg(long, default_value_t = 16)]
    max_p_bits: u32,
    #[arg(long, default_value_t = 8)]
    max_order: u32,
    #[arg(long)]
    out_private: PathBuf,
    #[arg(long)]
    out_public: PathBuf,
}

fn parse_binding(s: &str) -> Result<(String, PathBuf), String> {
    let (name, file) = s.split_once('=').ok_or_else(|| format!("expected NAME=FILE, got `{s}`"))?;
    Ok((name.to_string(), PathBuf::from(file)))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

impl Cli {
    fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        }
    }

    fn private_key(&self) -> Result<Option<PrivateKey>> {
        self.key
            .as_ref()
            .map(|p| PrivateKey::from_text(&read(p)?).with_context(|| format!("loading {}", p.display())))
            .transpose()
    }

    fn require_private(&self) -> Result<PrivateKey> {
        self.private_key()?.ok_or_else(|| anyhow!("this command needs --key"))
    }

    fn public_key(&self) -> Result<PublicKey> {
        if let Some(p) = &self.public_key {
            return Ok(match KeyFile::parse(&read(p)?).with_context(|| format!("loading {}", p.display()))? {
                KeyFile::Public(pk) => pk,
                KeyFile::Private(sk) => sk.public().clone(),
            });
        }
        match self.private_key()? {
            Some(sk) => Ok(sk.public().clone()),
            None => bail!("this command needs --public-key or --key"),
        }
    }

    /// --key, or a default-size key derived from the seed.
    fn private_or_derived(&self) -> Result<PrivateKey> {
        if let Some(sk) = self.private_key()? {
            return Ok(sk);
        }
        let user = UserKey::new(self.rng().gen());
        Ok(derive_keys(&user, 0, &KeyParams::default())?.1)
    }

    fn read_ct(&self, path: &Path, pk: &PublicKey) -> Result<Ciphertext> {
        let ct = Ciphertext::from_text(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        ct.validate_against(pk).with_context(|| format!("{} does not belong to this key", path.display()))?;
        Ok(ct)
    }
}

fn keygen(args: &KeygenArgs) -> Result<()> {
    let sk = if args.demo {
        demo_key()
    } else {
        let user = UserKey::from_hex(args.user_key.as_deref().unwrap_or_default())?;
        let timestamp = match args.timestamp {
            Some(t) => t,
            None => SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs(),
        };
        let params = KeyParams {
            pool_size: args.pool,
            moduli: args.moduli,
            slots: args.slots,
            a: pow2(args.a_bits),
            eta_max: pow2(args.eta_bits),
            start_bits: args.start_bits,
            envelope: Envelope {
                max_p: pow2(args.max_p_bits),
                max_order: args.max_order,
                ..Envelope::default()
            },
        };
        derive_keys(&user, timestamp, &params)?.1
    };
    write(&args.out_private, &sk.to_text())?;
    write(&args.out_public, &sk.public().to_text())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Keygen(args) => keygen(args)?,
        Command::Encrypt { value, out, eta } => {
            let mut rng = cli.rng();
            let ct = match cli.private_key()? {
                Some(sk) => {
                    let eta = eta.clone().unwrap_or_else(|| sample_eta(sk.eta_max(), &mut rng));
                    if &eta > sk.eta_max() {
                        bail!("eta {eta} exceeds the key's eta_max {}", sk.eta_max());
                    }
                    let bound = sk.public().envelope().max_p.clone();
                    encrypt_private_with(value.clone(), &bound, &eta, &sk, &mut rng)?
                }
                None => {
                    if eta.is_some() {
                        bail!("--eta needs --key; public encryption has no randomization");
                    }
                    encrypt_public(value.clone(), &cli.public_key()?)?
                }
            };
            write(out, &ct.to_text())?;
        }
        Command::Decrypt { file, raw, packing_key } => {
            let sk = cli.require_private()?;
            let ct = cli.read_ct(file, sk.public())?;
            if let Some(pk_path) = packing_key {
                let pkey = PackingKey::from_text(&read(pk_path)?)?;
                let lanes: Vec<String> = decrypt_packed(&ct, &pkey, &sk)?.iter().map(u64::to_string).collect();
                println!("{}", lanes.join(","));
            } else if *raw {
                println!("{}", decrypt_raw(&ct, &sk)?);
            } else {
                println!("{}", decrypt(&ct, &sk, cli.round)?);
            }
        }
        Command::Eval { expr, vars, out } => {
            let pk = cli.public_key()?;
            let expr = parse_expr(expr)?;
            let mut env = HashMap::new();
            for (name, path) in vars {
                env.insert(name.clone(), cli.read_ct(path, &pk)?);
            }
            let ct = eval_expr(&expr, &env, &pk)?;
            write(out, &ct.to_text())?;
        }
        Command::Pack {
            lanes,
            lane_bound,
            terms,
            order,
            values,
            out,
            packing_key_out,
        } => {
            let pk = cli.public_key()?;
            let pkey = plan_lanes(*lanes, *lane_bound, &BigUint::from(*terms), *order, &pk)?;
            let moduli: Vec<String> = pkey.lane_moduli().iter().map(u64::to_string).collect();
            println!("lanes {} moduli {}", pkey.lanes(), moduli.join(","));
            if let Some(p) = packing_key_out {
                write(p, &pkey.to_text())?;
            }
            if !values.is_empty() {
                let sk = cli.require_private()?;
                let ct = encrypt_packed(values, &pkey, &sk, &mut cli.rng())?;
                match out {
                    Some(p) => write(p, &ct.to_text())?,
                    None => bail!("--values needs --out"),
                }
            }
        }
        Command::Bench {
            pipeline,
            batches,
            size,
            reps,
            out,
        } => {
            if pipeline != "fgdiff" {
                bail!("only the fgdiff pipeline is benchmarked, got `{pipeline}`");
            }
            let sk = cli.private_or_derived()?;
            let report = bench::bench_frame_diff(&sk, batches, *size, *reps, cli.seed.unwrap_or(0))?;
            emit(out.as_deref(), &report.to_string())?;
        }
        Command::Errorlab { sweep, runs, out } => {
            let sweeps: Vec<Sweep> = if sweep == "all" {
                Sweep::ALL.to_vec()
            } else {
                vec![sweep.parse().map_err(|e: String| anyhow!(e))?]
            };
            let report = run_lab(&sweeps, *runs, cli.seed.unwrap_or(0));
            emit(out.as_deref(), &report.to_csv())?;
            if !report.holds() {
                bail!("an error-lab trend failed; see the report");
            }
        }
        Command::Demo { pipeline, cases, out_dir } => {
            let sk = cli.private_or_derived()?;
            let results = run_suite(*pipeline, *cases, &sk, cli.seed.unwrap_or(0), out_dir.as_deref())?;
            for r in &results {
                println!("{r}");
            }
            if results.iter().any(|r| !r.matches) {
                bail!("blind output differs from the plaintext reference");
            }
        }
        Command::ResidueImage { input, row, slot, out } => {
            let sk = cli.require_private()?;
            let img = match input {
                Some(p) => Frame::read_pgm(p)?,
                None => residue::gradient(64),
            };
            let r = residue::residue_image(&img, &sk, *row, *slot, &mut cli.rng())?;
            r.write_pgm(out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
