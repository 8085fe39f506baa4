fn main() {
    std::process::exit(obslab::cli::main_from(std::env::args_os()));
}
