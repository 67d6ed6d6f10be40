//! Command-line front end for the transcript readability toolkit.
//!
//! Subcommands cover the full workflow: corpus scoring (`score`,
//! `pairwise`), punctuation evaluation (`punct-f1`), correlation of result
//! series (`correlate`), human-rating aggregation (`hrs`), and synthetic
//! corruption of clean corpora (`perturb`). Every report embeds a run
//! manifest with input digests so results can be reproduced and audited.

mod args;
mod commands;
mod config;
mod report;

use clap::Parser;

fn main() {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
