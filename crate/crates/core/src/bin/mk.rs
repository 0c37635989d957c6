fn main() {
    std::process::exit(mk_core::cli::run(std::env::args_os()));
}
