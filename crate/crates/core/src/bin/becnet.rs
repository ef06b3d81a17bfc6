use clap::Parser;

fn main() {
    let args = becnet::cli::Args::parse();
    let result = becnet::cli::run(&args);
    std::process::exit(becnet::cli::exit_code(&result));
}
