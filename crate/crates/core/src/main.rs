fn main() {
    std::process::exit(anisolab::cli::run(std::env::args_os()));
}
