fn main() {
    std::process::exit(tau_snn_cli::run(std::env::args_os()));
}
