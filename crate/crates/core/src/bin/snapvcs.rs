fn main() {
    std::process::exit(snapvcs::cli::run(std::env::args_os()));
}
