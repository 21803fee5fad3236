fn main() {
    if let Err(e) = hypergcd_cli::run(std::env::args().collect()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
