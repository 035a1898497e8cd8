fn main() {
    std::process::exit(driftstream_cli::run(std::env::args_os()));
}
