fn main() {
    std::process::exit(fgrain::cli::run(std::env::args_os()));
}
