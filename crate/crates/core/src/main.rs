fn main() {
    std::process::exit(kf_core::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr()))
}
