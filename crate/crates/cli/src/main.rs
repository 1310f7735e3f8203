fn main() {
    std::process::exit(mpsenc_cli::run(std::env::args_os()));
}
