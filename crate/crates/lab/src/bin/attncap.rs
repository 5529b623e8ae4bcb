fn main() {
    std::process::exit(attncap::cli::dispatch(std::env::args_os()));
}
