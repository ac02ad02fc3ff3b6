fn main() {
    std::process::exit(riskinf::cli::run(std::env::args_os()));
}
