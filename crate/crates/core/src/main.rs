fn main() {
    std::process::exit(datanexus::cli::run(std::env::args_os()));
}
