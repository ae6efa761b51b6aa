use icinet_lab::harness::cli;

fn main() {
    if let Err(e) = cli::configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    std::process::exit(cli::run(std::env::args_os()));
}
